"""PASS/FAIL lines of the acceptance suite, printed in pytest's terminal summary."""

LINES = []
