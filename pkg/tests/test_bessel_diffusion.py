import math

import numpy as np
import pytest
from scipy import integrate, stats

from rbessel import DomainError
from rbessel.bessel_diffusion import (
    DiffusionConfig, counterexample_2d, default_dt, default_epsilon, estimate_diagonal,
    free_kernel_2d, free_window_density, monotonicity_probe, simulate_paths,
    simulate_reflected_bessel, stationary_window_density,
)
from rbessel.specfun import phi0


# -- closed-form free kernel ---------------------------------------------------

def test_free_kernel_symmetry():
    assert free_kernel_2d(1, 0.3, 0.7) / 0.7 == pytest.approx(free_kernel_2d(1, 0.7, 0.3) / 0.3, rel=1e-14)


@pytest.mark.parametrize("t", [0.05, 0.5, 2.0])
@pytest.mark.parametrize("r", [0.1, 1.2, 3.0])
def test_free_kernel_unit_mass(t, r):
    mass, _ = integrate.quad(lambda rho: free_kernel_2d(t, r, rho), 0, np.inf,
                             points=None, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert abs(mass - 1) <= 1e-8


def test_free_kernel_chapman_kolmogorov():
    s, t, r, rho = 0.3, 0.5, 0.7, 1.1
    val, _ = integrate.quad(lambda u: free_kernel_2d(s, r, u) * free_kernel_2d(t, u, rho),
                            0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert abs(val - free_kernel_2d(s + t, r, rho)) <= 1e-6


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("t", [0.01, 0.3])
def test_free_kernel_scaling_identity(r, t):
    s = math.sqrt(t)
    assert abs(free_kernel_2d(t, r * s, r * s) * s - phi0(r)) <= 1e-12


def test_free_kernel_large_argument_is_finite():
    v = free_kernel_2d(1e-4, 0.9, 0.9)
    assert math.isfinite(v) and v > 0


@pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, -1)])
def test_free_kernel_domain(args):
    with pytest.raises(DomainError):
        free_kernel_2d(*args)


def test_free_window_density_near_point_value():
    t = 0.01
    w = free_window_density(t, 0.1, 0.01)
    assert w == pytest.approx(phi0(1.0) / math.sqrt(t), rel=0.05)


# -- configuration -------------------------------------------------------------

def test_default_dt_tiers():
    assert default_dt(0.01) == 1e-5
    assert default_dt(0.5) == 1e-4
    assert default_dt(5.0) == 1e-3


def test_config_validation():
    with pytest.raises(DomainError):
        DiffusionConfig(1, 0.1)
    with pytest.raises(DomainError):
        DiffusionConfig(3, 0.0)
    with pytest.raises(DomainError):
        DiffusionConfig(3, 0.1, dt=0.05)
    with pytest.raises(DomainError):
        DiffusionConfig(3, 0.1, paths=10)
    cfg = DiffusionConfig(3, 0.1, dt=0.01)
    assert cfg.steps == 10


# -- simulation ----------------------------------------------------------------

def test_single_step_consistency():
    # t = dt: one Euler step moves O(sqrt(dt)) away from r0.
    dt = 1e-6
    r = simulate_paths(3, 0.5, 1, dt, 10_000, np.random.default_rng(0))
    assert np.max(np.abs(r - 0.5)) <= 6 * math.sqrt(dt)
    assert abs(r.mean() - 0.5) <= 4 * math.sqrt(dt / 10_000) + 2 * dt


def test_paths_stay_in_unit_interval():
    r = simulate_paths(2, 0.01, 2000, 1e-4, 5000, np.random.default_rng(1))
    assert np.all((r > 0) & (r <= 1))
    r = simulate_paths(3, 1.0, 2000, 1e-4, 5000, np.random.default_rng(2))
    assert np.all((r > 0) & (r <= 1))


def test_second_moment_against_free_kernel():
    t, r0 = 0.02, 0.5
    m2, _ = integrate.quad(lambda rho: rho * rho * free_kernel_2d(t, r0, rho), 0, np.inf)
    assert m2 == pytest.approx(r0 * r0 + 2 * t, abs=1e-10)
    r = simulate_reflected_bessel(DiffusionConfig(2, t, paths=20_000, seed=1), r0)
    se = (r**2).std(ddof=1) / math.sqrt(len(r))
    assert abs((r**2).mean() - m2) <= 3 * se


def test_stationary_law_d3():
    r = simulate_reflected_bessel(DiffusionConfig(3, 5.0, paths=3000, seed=2), 0.5)
    assert stats.kstest(r, lambda x: np.clip(x, 0, 1) ** 3).pvalue > 0.01


def test_reproducible_and_thread_independent():
    a = simulate_reflected_bessel(DiffusionConfig(3, 0.05, paths=9000, seed=4, threads=1), 0.3)
    b = simulate_reflected_bessel(DiffusionConfig(3, 0.05, paths=9000, seed=4, threads=3), 0.3)
    assert np.array_equal(a, b) and len(a) == 9000
    c = simulate_reflected_bessel(DiffusionConfig(3, 0.05, paths=9000, seed=5), 0.3)
    assert not np.array_equal(a, c)


def test_simulate_domain():
    cfg = DiffusionConfig(3, 0.1)
    for r0 in (0.0, 1.5):
        with pytest.raises(DomainError):
            simulate_reflected_bessel(cfg, r0)


# -- diagonal estimation -------------------------------------------------------

def test_window_partition_sums_to_one():
    r = simulate_reflected_bessel(DiffusionConfig(3, 0.2, paths=5000, seed=3), 0.5)
    edges = np.linspace(0, 1, 21)
    counts = [np.count_nonzero((r > a) & (r <= b)) for a, b in zip(edges, edges[1:])]
    assert sum(counts) == len(r)
    assert sum(c / len(r) for c in counts) == pytest.approx(1.0, abs=1e-12)


def test_estimate_basic_properties():
    cfg = DiffusionConfig(3, 0.05, paths=4000, seed=1)
    est = estimate_diagonal(cfg, [0.3, 0.6, 0.9])
    assert est.epsilon == default_epsilon([0.3, 0.6, 0.9]) == 0.01
    assert all(v >= 0 for v in est.density)
    assert all(s >= 0 for s in est.stderr)
    assert est.paths_used == 4000


def test_estimate_seed_invariance():
    grid = [0.4, 0.8]
    a = estimate_diagonal(DiffusionConfig(3, 0.1, paths=20_000, seed=1), grid, 0.05)
    b = estimate_diagonal(DiffusionConfig(3, 0.1, paths=20_000, seed=2), grid, 0.05)
    for i in range(2):
        se = math.hypot(a.stderr[i], b.stderr[i])
        assert abs(a.density[i] - b.density[i]) <= 4 * se


def test_estimate_domain():
    cfg = DiffusionConfig(3, 0.1, paths=100)
    with pytest.raises(DomainError):
        estimate_diagonal(cfg, [0.005], 0.01)
    with pytest.raises(DomainError):
        estimate_diagonal(cfg, [], 0.01)
    with pytest.raises(DomainError):
        estimate_diagonal(cfg, [0.5], 0.0)


def test_stationary_window_density():
    assert stationary_window_density(3, 1.0, 1.0) == 1.0
    assert stationary_window_density(3, 0.5, 1e-6) == pytest.approx(3 * 0.25, rel=1e-5)


# -- counterexample and probe --------------------------------------------------

def test_counterexample_small_scale():
    rep = counterexample_2d(t=0.0025, paths=100_000, seed=3, epsilon=0.005)
    assert rep.radii == pytest.approx((0.05, 0.1))
    assert rep.estimate.density[0] > rep.estimate.density[1]
    assert rep.targets[0] > rep.targets[1]
    assert rep.confirmed and rep.verdict == "non-monotone confirmed"


def test_counterexample_domain():
    with pytest.raises(DomainError):
        counterexample_2d(t=0.05)
    with pytest.raises(DomainError):
        counterexample_2d(t=0.0001, epsilon=0.01)


def test_probe_single_point_is_empty():
    rep = monotonicity_probe(3, 0.1, [0.5], paths=1000)
    assert rep.passed and rep.violations == []


def test_probe_small_run():
    rep = monotonicity_probe(3, 0.1, [0.3, 0.6, 0.9], paths=20_000, seed=5)
    assert rep.passed


def test_probe_rejects_d2():
    with pytest.raises(DomainError):
        monotonicity_probe(2, 0.1, [0.5])
