import math

import numpy as np
import pytest

from kmsbound.bounds import bounds_from_program, compute_bounds
from kmsbound.kms_commuting import build_commuting_relaxation, kms_residual
from kmsbound.lattice import InteractionSpec, Window, classical_ising, extend_boundary, tfising
from kmsbound.oracles import classical_ising_transfer, ed_gibbs_marginal
from kmsbound.pauli import parse_operator
from kmsbound.relaxation import RelaxationConfig

ZZ = parse_operator("Z0 Z1")


def cluster(letter="X", field=0.0):
    terms = [(1.0, None, [((0,), "Z"), ((1,), letter), ((2,), "Z")])]
    if field:
        terms.append((field, None, [((0,), "Z")]))
    return InteractionSpec.from_terms(1, 2, terms, name=f"cluster-{letter}")


def _bounds(spec, obs, beta, ell, **kw):
    cfg = RelaxationConfig(objective=parse_operator(obs) if isinstance(obs, str) else obs, ell=ell, beta=beta)
    rep = bounds_from_program(build_commuting_relaxation(spec, cfg, **kw).program)
    assert not rep.failed
    return rep


def test_unpolarized_magnetization_is_zero():
    rep = _bounds(classical_ising(0.0), "Z0", 1.0, 1)
    assert abs(rep.p_min) < 1e-6 and abs(rep.p_max) < 1e-6


@pytest.mark.parametrize("spec,ell", [(classical_ising(0.3), 1), (cluster("X"), 0), (cluster("Y"), 0)],
                         ids=["ising-h", "zxz", "zyz"])
def test_infinite_temperature_pins_tracial_state(spec, ell):
    rep = _bounds(spec, "Z0", 0.0, ell)
    assert abs(rep.p_min) < 1e-6 and abs(rep.p_max) < 1e-6


@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_bounds_bracket_transfer_matrix(beta):
    _, corr = classical_ising_transfer(beta)
    for ell in (1, 2):
        rep = _bounds(classical_ising(0.0), ZZ, beta, ell)
        assert rep.p_min - 1e-6 <= corr <= rep.p_max + 1e-6


# range-2 cluster closures exceed the pairwise site cap beyond ell = 0
@pytest.mark.parametrize("spec,obs,ell", [
    (classical_ising(0.4), "Z0", 0), (classical_ising(0.4), "Z0 Z1", 1),
    (cluster("X"), "X0", 0), (cluster("Y"), "Y0", 0),
], ids=["ising-0", "ising-1", "zxz-0", "zyz-0"])
def test_pairwise_and_commutant_forms_agree(spec, obs, ell):
    a = _bounds(spec, obs, 0.8, ell, form="pairwise")
    b = _bounds(spec, obs, 0.8, ell, form="commutant")
    c = _bounds(spec, obs, 0.8, ell, form="commutant", psd="boundary")
    for r in (b, c):
        assert r.p_min == pytest.approx(a.p_min, abs=1e-6)
        assert r.p_max == pytest.approx(a.p_max, abs=1e-6)


@pytest.mark.parametrize("spec,n,ell", [(classical_ising(0.4), 10, 1), (cluster("X"), 9, 0), (cluster("Y"), 9, 0)],
                         ids=["ising", "zxz", "zyz"])
@pytest.mark.parametrize("form", ["commutant", "pairwise"])
def test_exact_gibbs_state_is_feasible(spec, n, ell, form):
    beta = 0.7
    cfg = RelaxationConfig(objective=parse_operator("Z0"), ell=ell, beta=beta)
    rel = build_commuting_relaxation(spec, cfg, form=form)
    closure = extend_boundary(spec, Window.box(ell))
    rho, _ = ed_gibbs_marginal(spec, n, beta, closure)
    assert kms_residual(spec, beta, Window.box(ell), rho) < 1e-10
    x = rel.assignment_from_state(rho)
    np.testing.assert_allclose(rel.rho_of(x), rho, atol=1e-10)
    viol = rel.program.violation(x)
    assert viol["equality"] < 1e-9 and viol["min_eig"] > -1e-9


def test_kms_residual_detects_non_gibbs_states():
    spec = classical_ising(0.0)
    closure = extend_boundary(spec, Window.box(1))
    rho = np.eye(1 << closure.n_sites) / (1 << closure.n_sites)
    assert kms_residual(spec, 1.0, Window.box(1), rho) > 1e-2


@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_tighter_than_ground_and_thermal_relaxation(beta):
    spec = classical_ising(0.0)
    comm = _bounds(spec, ZZ, beta, 1)
    opt2 = compute_bounds(spec, RelaxationConfig(objective=ZZ, ell=1, beta=beta))
    assert comm.p_min >= opt2.p_min - 1e-6 and comm.p_max <= opt2.p_max + 1e-6
    assert comm.p_max - comm.p_min < opt2.p_max - opt2.p_min


@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_gap_shrinks_with_the_window(beta):
    spec = classical_ising(0.0)
    widths = [(lambda r: r.p_max - r.p_min)(_bounds(spec, ZZ, beta, ell, psd="boundary")) for ell in (1, 2, 3)]
    assert widths[1] <= 0.6 * widths[0]
    assert widths[2] <= 0.6 * widths[1]


def test_input_checks():
    cfg = RelaxationConfig(objective=parse_operator("Z0"), ell=1, beta=1.0)
    with pytest.raises(ValueError, match="commuting"):
        build_commuting_relaxation(tfising(1.0), cfg)
    with pytest.raises(ValueError, match="finite"):
        build_commuting_relaxation(classical_ising(), RelaxationConfig(objective=parse_operator("Z0"), ell=1))
    with pytest.raises(ValueError):
        build_commuting_relaxation(classical_ising(), RelaxationConfig(objective=parse_operator("Z4"), ell=1, beta=1.0))
    with pytest.raises(ValueError):
        build_commuting_relaxation(classical_ising(), cfg, form="pairwise", psd="boundary")


def test_compute_bounds_commuting_flag():
    rep = compute_bounds(classical_ising(0.0), RelaxationConfig(objective=ZZ, ell=1, beta=1.0), commuting=True)
    assert rep.certified
    assert rep.p_min <= math.tanh(1.0) <= rep.p_max
