from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_row, oracle_moves
from rbessel import DomainError
from rbessel.radial_chain import (
    ChainSpec, ProbVector, check_diagonal_monotone, check_loop_property, check_shift_monotone,
    evolve, expected_local_time, kernel_matrix, kernel_row, local_time_profile,
    local_time_scaling, loop_closed_form, min_state, step_law, sweep_diagonal_monotone,
)


# -- state space and one-step law ------------------------------------------

@pytest.mark.parametrize("d, lo", [(3, 1), (4, 1), (5, 2), (6, 2), (7, 3)])
def test_min_state(d, lo):
    assert min_state(d) == lo


@pytest.mark.parametrize("d", [2, 1, 0, -3])
def test_min_state_domain(d):
    with pytest.raises(DomainError):
        min_state(d)


def test_chain_spec_too_small():
    with pytest.raises(DomainError):
        ChainSpec(3, 2)
    ChainSpec(3, 3)


def test_step_law_examples():
    law = step_law(ChainSpec(4, 10), 1)
    assert (law.up, law.down, law.stay) == (1, 0, 0)
    law = step_law(ChainSpec(3, 10), 1)
    assert (law.up, law.down) == (1, 0)
    law = step_law(ChainSpec(3, 10), 10)
    assert law.stay == pytest.approx(0.55, abs=1e-15)
    assert law.down == pytest.approx(0.45, abs=1e-15)
    law = step_law(ChainSpec(3, 10), 10, exact=True)
    assert (law.stay, law.down) == (Fraction(11, 20), Fraction(9, 20))


def test_step_law_out_of_range():
    spec = ChainSpec(5, 10)
    for m in (1, 11):
        with pytest.raises(DomainError):
            step_law(spec, m)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 12), st.integers(0, 40), st.data())
def test_step_law_matches_oracle(d, extra, data):
    lo = min_state(d)
    N = lo + 2 + extra
    m = data.draw(st.integers(lo, N))
    law = step_law(ChainSpec(d, N), m, exact=True)
    assert law.total == 1
    moves = dict(oracle_moves(d, N, m))
    assert law.up == moves.get(m + 1, 0)
    assert law.down == moves.get(m - 1, 0)
    assert law.stay == moves.get(m, 0)


# -- propagation ------------------------------------------------------------

def test_evolve_examples():
    spec = ChainSpec(3, 5)
    out = evolve(spec, ProbVector.point(spec, 5))
    assert out.as_dict(nonzero=True) == pytest.approx({5: 0.6, 4: 0.4}, abs=1e-15)
    spec = ChainSpec(4, 5)
    out = evolve(spec, ProbVector.point(spec, 1, exact=True))
    assert out.as_dict(nonzero=True) == {2: 1}


def test_evolve_twice_against_enumeration():
    spec = ChainSpec(3, 6)
    start = ProbVector.from_mapping(spec, {2: Fraction(1, 2), 4: Fraction(1, 2)}, exact=True)
    out = evolve(spec, evolve(spec, start))
    expected = {}
    for m0 in (2, 4):
        for m, p in brute_force_row(3, 6, 2, m0).items():
            expected[m] = expected.get(m, 0) + p / 2
    assert out.as_dict(nonzero=True) == expected
    assert set(expected) == {1, 2, 3, 4, 5, 6} - {1, 3, 5}
    assert out.total() == 1


def test_evolve_accepts_float_and_rejects_bad_mapping():
    spec = ChainSpec(3, 6)
    out = evolve(spec, ProbVector.from_mapping(spec, {2: 0.5, 4: 0.5}))
    assert not out.exact
    with pytest.raises(DomainError):
        ProbVector.from_mapping(spec, {2: 0.5, 4: 0.4})
    with pytest.raises(DomainError):
        ProbVector.from_mapping(spec, {9: 1.0})


def test_kernel_row_examples():
    spec = ChainSpec(3, 5)
    assert kernel_row(spec, 0, 3, exact=True).as_dict(nonzero=True) == {3: 1}
    assert kernel_row(spec, 2, 2, exact=True)[2] == Fraction(1, 2)
    # For d=3 every interior loop has weight 1/4, so the m0=3 return
    # probability is again exactly 1/2 (no strict increase).
    assert kernel_row(spec, 2, 3, exact=True)[3] == Fraction(1, 2)
    assert brute_force_row(3, 5, 2, 3)[3] == Fraction(1, 2)


def test_kernel_row_domain():
    spec = ChainSpec(3, 5)
    with pytest.raises(DomainError):
        kernel_row(spec, 2, 0)
    with pytest.raises(DomainError):
        kernel_row(spec, -1, 2)


@pytest.mark.parametrize("d, N", [(3, 6), (4, 7), (5, 8), (6, 8)])
def test_kernel_matches_brute_force(d, N):
    spec = ChainSpec(d, N)
    for n in range(9):
        P = kernel_matrix(spec, n, exact=True)
        F = kernel_matrix(spec, n)
        for i, m0 in enumerate(spec.states):
            row = brute_force_row(d, N, n, m0)
            for j, m in enumerate(spec.states):
                assert P[i, j] == row.get(m, 0)
                assert abs(F[i, j] - float(row.get(m, 0))) <= 1e-13


@pytest.mark.parametrize("d, N", [(3, 30), (4, 17), (7, 25)])
def test_rational_and_float_agree(d, N):
    spec = ChainSpec(d, N)
    P = kernel_matrix(spec, 200, exact=True)
    F = kernel_matrix(spec, 200)
    diff = max(abs(float(a) - b) for a, b in zip(P.ravel(), F.ravel()))
    assert diff <= 1e-12


def test_parity_of_free_walk():
    spec = ChainSpec.free(5, 4, 41)
    assert not spec.reflected
    for n in (1, 3, 17, 41):
        assert kernel_row(spec, n, 4, exact=True)[4] == 0
    assert kernel_row(spec, 2, 4, exact=True)[4] > 0


def test_free_walk_refuses_to_reach_top():
    spec = ChainSpec(3, 6, reflected=False)
    with pytest.raises(DomainError):
        kernel_row(spec, 10, 3)


@pytest.mark.parametrize("d", [3, 4, 9])
def test_mass_conservation_long_run(d):
    spec = ChainSpec(d, 30)
    row = kernel_row(spec, 10_000, min_state(d) + 1)
    assert abs(row.total() - 1) <= 1e-12
    assert min(row.values) >= 0


def test_rows_of_kernel_sum_to_one_exactly():
    P = kernel_matrix(ChainSpec(4, 9), 13, exact=True)
    assert all(sum(row) == 1 for row in P)


# -- loop property ----------------------------------------------------------

def test_loop_d3_constant():
    rep = check_loop_property(ChainSpec(3, 1000))
    assert rep.passed
    assert all(abs(r.loop_product - 0.25) <= 1e-15 for r in rep.records)
    rep = check_loop_property(ChainSpec(3, 50), exact=True)
    assert all(r.loop_product == Fraction(1, 4) for r in rep.records)


def test_loop_d4_values():
    rep = check_loop_property(ChainSpec(4, 12), exact=True)
    by_m = {r.m: r for r in rep.records}
    assert by_m[1].loop_product == Fraction(1, 8)
    assert by_m[2].loop_product == Fraction(21, 96)
    assert rep.passed


@pytest.mark.parametrize("d", range(3, 11))
def test_loop_closed_form_and_monotone(d):
    rep = check_loop_property(ChainSpec(d, 60), exact=True)
    assert rep.passed
    assert all(r.diff == 0 for r in rep.records)
    assert all(r.loop_product <= rep.reflection_loop for r in rep.records)
    assert loop_closed_form(d, 5) == pytest.approx(float(loop_closed_form(d, 5, exact=True)))


def test_free_walk_has_no_reflection_loop():
    rep = check_loop_property(ChainSpec(5, 20, reflected=False))
    assert rep.reflection_loop is None and rep.passed


# -- diagonal and shift monotonicity ----------------------------------------

def test_diagonal_n0():
    rep = check_diagonal_monotone(ChainSpec(5, 12), 0, exact=True)
    assert rep.passed and all(v == 1 for v in rep.diagonal)


def test_diagonal_d3_small():
    rep = check_diagonal_monotone(ChainSpec(3, 5), 2, exact=True)
    assert rep.passed
    assert rep.diagonal[1] == Fraction(1, 2)
    assert rep.diagonal[1] <= rep.diagonal[2]
    assert rep.ties > 0


def test_diagonal_d4_long():
    assert check_diagonal_monotone(ChainSpec(4, 20), 1000).passed


def test_diagonal_sweep_exact_small():
    assert sweep_diagonal_monotone(ChainSpec(5, 9), 40, exact=True) == []


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 9), st.integers(0, 10), st.integers(0, 60))
def test_diagonal_property(d, extra, n):
    spec = ChainSpec(d, min_state(d) + 2 + extra)
    assert check_diagonal_monotone(spec, n, exact=True).passed


def test_shift_n1_is_down_step_monotonicity():
    spec = ChainSpec(6, 15)
    rep = check_shift_monotone(spec, 1, exact=True)
    assert rep.passed
    downs = [step_law(spec, m, exact=True).down for m in range(spec.lo + 1, spec.N)]
    assert downs == sorted(downs)


def test_shift_n0_trivial():
    rep = check_shift_monotone(ChainSpec(3, 6), 0, exact=True)
    assert rep.passed and rep.checked > 0


def test_shift_d3_N8_against_enumeration():
    d, N = 3, 8
    spec = ChainSpec(d, N)
    rep = check_shift_monotone(spec, 6, exact=True)
    assert rep.passed
    rows = {m: brute_force_row(d, N, 6, m) for m in spec.states}
    for m in spec.states:
        for mp in range(spec.lo, m):
            for p in range(1, N - m + 1):
                assert rows[m].get(mp, 0) <= rows[m + p].get(mp + p, 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 8), st.integers(0, 6), st.integers(0, 25))
def test_shift_property(d, extra, n):
    spec = ChainSpec(d, min_state(d) + 2 + extra)
    assert check_shift_monotone(spec, n, exact=True).passed


# -- local times --------------------------------------------------------------

def test_local_time_examples():
    spec = ChainSpec(3, 5)
    assert expected_local_time(spec, 2, 0, exact=True).expected_visits == 1
    assert expected_local_time(spec, 2, 2, exact=True).expected_visits == Fraction(3, 2)
    assert expected_local_time(spec, 2, 2).expected_visits == pytest.approx(1.5, abs=1e-15)


def test_local_time_matches_kernel_sum():
    spec = ChainSpec(4, 9)
    total = sum(kernel_row(spec, k, 5, exact=True)[5] for k in range(31))
    assert expected_local_time(spec, 5, 30, exact=True).expected_visits == total


def test_local_time_profile_d3_N16_nondecreasing():
    spec = ChainSpec(3, 16)
    values, numerators = local_time_profile(spec, 256, exact=True)
    assert all(a <= b for a, b in zip(numerators, numerators[1:]))
    assert values[-1] == expected_local_time(spec, 16, 256, exact=True).expected_visits
    fvals, _ = local_time_profile(spec, 256)
    assert max(abs(float(a) - b) for a, b in zip(values, fvals)) <= 1e-10


def test_local_time_domain():
    with pytest.raises(DomainError):
        expected_local_time(ChainSpec(3, 5), 2, -1)


def test_local_time_scaling_bands():
    fit = local_time_scaling(3, [16, 32, 64, 128])
    assert 1.0 < fit.slope < 1.9
    fit = local_time_scaling(5, [16, 32, 64])
    assert fit.slope < 1.9
    ts = local_time_scaling(3, [16, 32, 64, 128], method="theil-sen")
    assert 1.0 < ts.slope < 1.9
    assert list(fit.expected_visits) == sorted(fit.expected_visits)


@pytest.mark.parametrize("N_list", [[16, 16, 16], [16, 32], [2, 16, 32]])
def test_local_time_scaling_domain(N_list):
    with pytest.raises(DomainError):
        local_time_scaling(5, N_list)


def test_local_time_scaling_unknown_method():
    with pytest.raises(DomainError):
        local_time_scaling(3, [8, 16, 32], method="median")


def test_exact_values_are_fractions():
    row = kernel_row(ChainSpec(7, 10), 5, 4, exact=True)
    assert row.exact and all(isinstance(v, Fraction) for v in row.values)
    assert isinstance(kernel_row(ChainSpec(7, 10), 5, 4).to_numpy(), np.ndarray)
