"""Shared oracles and the acceptance summary hook.

The brute-force oracle below is written straight from the transition
formulas and does not touch the package's DP engine: it enumerates every
path of length ``n`` with :class:`fractions.Fraction` weights.
"""

from fractions import Fraction

import pytest

ACCEPTANCE_LINES = []


def oracle_moves(d, N, m, reflected=True):
    """List of ``(next_state, probability)`` pairs, exact."""
    lo = (d + 1) // 2 - 1
    drift = Fraction(d - 1, 4 * m)
    half = Fraction(1, 2)
    if d % 2 == 0 and m == lo:
        return [(m + 1, Fraction(1))]
    if reflected and m == N:
        return [(m, half + drift), (m - 1, half - drift)]
    moves = [(m + 1, half + drift)]
    if half - drift > 0:
        moves.append((m - 1, half - drift))
    return moves


def brute_force_row(d, N, n, m0, reflected=True):
    """``{m: p_N(n, m0, m)}`` by explicit enumeration of all paths."""
    out = {}

    def walk(m, k, w):
        if k == n:
            out[m] = out.get(m, Fraction(0)) + w
            return
        for nxt, p in oracle_moves(d, N, m, reflected):
            if p:
                walk(nxt, k + 1, w * p)

    walk(m0, 0, Fraction(1))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line[1])


@pytest.fixture
def acceptance_line():
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append((number, f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}: {detail}"))
        print(ACCEPTANCE_LINES[-1][1])
    return record
