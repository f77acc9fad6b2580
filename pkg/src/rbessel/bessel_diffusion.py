"""Reflected Bessel diffusion on (0, 1].

The radial part of reflected Brownian motion in the unit ball solves
``dR = (d-1)/(2R) dt + dW`` with normal reflection at 1.  It is simulated by
Euler-Maruyama with mirror reflection ``r -> 2 - r``.  A proposed step that
would leave ``(0, 2)`` (only possible near the origin) is discarded and the
remaining time is covered in halved sub-steps with fresh noise, so every path
covers exactly the requested time.

The diagonal ``p(t, r, r)`` is estimated through the one-sided window
``P^r(R_t in [r - eps, r]) / eps``.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate

from rbessel.errors import DomainError
from rbessel.specfun import bessel_i0e, phi0
from rbessel.streams import map_blocks


def default_dt(t):
    if t <= 0.01:
        return 1e-5
    return 1e-4 if t <= 1 else 1e-3


@dataclass(frozen=True)
class DiffusionConfig:
    d: int
    t: float
    dt: float | None = None
    paths: int = 100_000
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("the Bessel process needs d >= 2")
        if not self.t > 0:
            raise DomainError("t must be positive")
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.t))
        if not 0 < self.dt <= self.t / 10 * (1 + 1e-12):
            raise DomainError(f"dt must lie in (0, t/10], got dt={self.dt}, t={self.t}")
        if self.paths < 100:
            raise DomainError("need at least 100 paths")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")

    @property
    def steps(self):
        return max(1, int(round(self.t / self.dt)))


def free_kernel_2d(t, r, rho):
    """Transition density of the free 2-D Bessel process,
    ``rho/t * exp(-(r^2 + rho^2)/(2t)) * I0(r rho / t)``, in scaled form."""
    t, r, rho = float(t), float(r), float(rho)
    if not (t > 0 and r > 0 and rho > 0):
        raise DomainError("free_kernel_2d needs t, r, rho > 0")
    return rho / t * math.exp(-((r - rho) ** 2) / (2 * t)) * bessel_i0e(r * rho / t)


@numba.njit(nogil=True, cache=True)
def _advance(r, dt, drift, rng):
    # One Euler step of length dt; on a bad proposal the remaining piece is halved.
    left = 1.0
    frac = 1.0
    while left > 0.0:
        h = dt * frac
        rn = r + drift / r * h + math.sqrt(h) * rng.standard_normal()
        if rn <= 0.0 or rn >= 2.0:
            frac *= 0.5
            continue
        if rn > 1.0:
            rn = 2.0 - rn
        r = rn
        left -= frac
    return r


@numba.njit(nogil=True, cache=True)
def _final_radii(r0, steps, dt, d, n, rng):
    out = np.empty(n)
    drift = 0.5 * (d - 1)
    for i in range(n):
        r = r0
        for _ in range(steps):
            r = _advance(r, dt, drift, rng)
        out[i] = r
    return out


def simulate_paths(d, r0, steps, dt, n, rng):
    """``n`` final radii after ``steps`` Euler steps of size ``dt`` from ``r0``."""
    return _final_radii(float(r0), int(steps), float(dt), float(d), int(n), rng)


def simulate_reflected_bessel(config, r0, stream=0):
    """Final radii ``R_t`` of ``config.paths`` independent paths started at ``r0``."""
    if not 0 < r0 <= 1:
        raise DomainError(f"r0 must lie in (0, 1], got {r0}")
    parts = map_blocks(
        lambda rng, size: simulate_paths(config.d, r0, config.steps, config.dt, size, rng),
        config.paths, config.seed, stream, config.threads,
    )
    return np.concatenate(parts)


@dataclass
class KernelEstimate:
    r_grid: list
    epsilon: float
    density: list
    stderr: list
    paths_used: int
    config: DiffusionConfig | None = None


def default_epsilon(r_grid):
    r_grid = sorted(r_grid)
    if len(r_grid) < 2:
        return 0.01
    return min(0.01, min(b - a for a, b in zip(r_grid, r_grid[1:])) / 2)


def _window_count(radii, r, epsilon):
    return int(np.count_nonzero((radii >= r - epsilon) & (radii <= r)))


def estimate_diagonal(config, r_grid, epsilon=None, stream_offset=0):
    """Window estimate of ``p(t, r, r)`` at each grid radius.

    For radius ``r`` the paths start at ``r`` and the estimate is the fraction
    of final radii in ``[r - epsilon, r]`` divided by ``epsilon``, with its
    binomial standard error.  Grid point ``i`` uses random stream
    ``stream_offset + i``.
    """
    r_grid = [float(r) for r in r_grid]
    if not r_grid:
        raise DomainError("empty radius grid")
    epsilon = default_epsilon(r_grid) if epsilon is None else float(epsilon)
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    for r in r_grid:
        if not (r - epsilon > 0 and r <= 1):
            raise DomainError(f"grid radius {r} needs r - epsilon > 0 and r <= 1")
    density, stderr = [], []
    n = config.paths
    for i, r in enumerate(r_grid):
        radii = simulate_reflected_bessel(config, r, stream=stream_offset + i)
        frac = _window_count(radii, r, epsilon) / n
        density.append(frac / epsilon)
        stderr.append(math.sqrt(frac * (1 - frac) / n) / epsilon)
    return KernelEstimate(r_grid, epsilon, density, stderr, n, config)


def stationary_window_density(d, r, epsilon):
    """Window average of the stationary density ``d r^(d-1)`` over ``[r - eps, r]``."""
    return (r**d - (r - epsilon) ** d) / epsilon


def free_window_density(t, r, epsilon):
    """Window average of the free 2-D kernel ``q(t, r, .)`` over ``[r - eps, r]``."""
    val, _ = integrate.quad(lambda rho: free_kernel_2d(t, r, rho), r - epsilon, r,
                            epsabs=1e-13, epsrel=1e-12)
    return val / epsilon


@dataclass
class CounterexampleReport:
    t: float
    radii: tuple
    estimate: KernelEstimate
    targets: tuple
    window_targets: tuple
    margin_sigma: float
    required_sigma: float = 3.0

    @property
    def confirmed(self):
        return self.margin_sigma >= self.required_sigma

    @property
    def verdict(self):
        return "non-monotone confirmed" if self.confirmed else "not confirmed"


def counterexample_2d(t=0.01, paths=200_000, seed=0, epsilon=0.01, dt=None, threads=None):
    """Estimate the d=2 diagonal at ``sqrt(t)`` and ``2 sqrt(t)``.

    The free-kernel diagonal there is ``Phi0(1)/sqrt(t)`` and
    ``Phi0(2)/sqrt(t)``; the first is larger, and for small ``t`` the
    reflected kernel inherits the ordering.
    """
    if not 0 < t <= 0.01:
        raise DomainError(f"the d=2 counterexample is a small-time statement; need 0 < t <= 0.01, got {t}")
    r1, r2 = math.sqrt(t), 2 * math.sqrt(t)
    if epsilon >= r1:
        raise DomainError("epsilon must be below sqrt(t)")
    config = DiffusionConfig(2, t, dt, paths, seed, threads)
    est = estimate_diagonal(config, [r1, r2], epsilon)
    diff = est.density[0] - est.density[1]
    se = math.hypot(est.stderr[0], est.stderr[1])
    targets = (phi0(1.0) / math.sqrt(t), phi0(2.0) / math.sqrt(t))
    windows = (free_window_density(t, r1, epsilon), free_window_density(t, r2, epsilon))
    return CounterexampleReport(t, (r1, r2), est, targets, windows, diff / se if se > 0 else math.inf)


@dataclass
class ProbeReport:
    d: int
    t: float
    estimate: KernelEstimate
    violations: list = field(default_factory=list)
    sigma: float = 3.0

    @property
    def passed(self):
        return not self.violations


def monotonicity_probe(d, t, r_grid, paths=100_000, seed=0, epsilon=None, dt=None,
                       threads=None, sigma=3.0):
    """Diagonal estimates on ``r_grid`` and all adjacent decreases exceeding
    ``sigma`` combined standard errors."""
    if d < 3:
        raise DomainError("the monotonicity probe is for d >= 3")
    config = DiffusionConfig(d, t, dt, paths, seed, threads)
    r_grid = sorted(float(r) for r in r_grid)
    est = estimate_diagonal(config, r_grid, epsilon)
    violations = []
    for i in range(len(r_grid) - 1):
        drop = est.density[i] - est.density[i + 1]
        se = math.hypot(est.stderr[i], est.stderr[i + 1])
        if drop > sigma * se:
            violations.append((r_grid[i], r_grid[i + 1], est.density[i], est.density[i + 1], se))
    return ProbeReport(d, t, est, violations, sigma)
