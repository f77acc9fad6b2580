"""Monte-Carlo simulation of the d-dimensional sphere walk.

From ``x`` with ``|x| = m`` the walk jumps to ``U(x) = (m+1)/m x`` with
probability 1/2, to ``D(x) = (m-1)/m x`` with probability
``1/2 - (d-1)/(4m)``, and otherwise to a uniform point of the (d-2)-sphere
``C(x)`` centred at ``D(x)``, orthogonal to ``x``, with radius ``2 sqrt(m)``
(every point of ``C(x)`` has norm ``m+1``).  At ``|x| = N`` the up-moves are
replaced by a hold.  The norm process is the radial walk of
:mod:`rbessel.radial_chain`.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from rbessel import radial_chain
from rbessel.errors import DomainError
from rbessel.streams import map_blocks

NORM_TOL = 1e-9


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray
    norm: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", coords)
        actual = float(np.linalg.norm(coords))
        if abs(actual - self.norm) > NORM_TOL * max(1.0, self.norm):
            raise DomainError(f"|coords| = {actual} does not match norm {self.norm}")

    @classmethod
    def from_coords(cls, coords):
        coords = np.asarray(coords, dtype=float)
        r = float(np.linalg.norm(coords))
        m = round(r)
        if abs(r - m) > NORM_TOL * max(1.0, r):
            raise DomainError(f"norm {r} is not an integer")
        return cls(coords, int(m))

    @classmethod
    def on_axis(cls, d, m):
        coords = np.zeros(d)
        coords[0] = m
        return cls(coords, int(m))

    @property
    def d(self):
        return self.coords.shape[0]


@dataclass(frozen=True)
class WalkConfig:
    d: int
    N: int
    steps: int
    paths: int
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.d < 3:
            raise DomainError("the sphere walk needs d >= 3")
        radial_chain.ChainSpec(self.d, self.N)
        if self.steps < 0 or self.paths <= 0 or self.seed < 0:
            raise DomainError("steps must be >= 0, paths > 0 and seed >= 0")

    @property
    def chain(self):
        return radial_chain.ChainSpec(self.d, self.N)


def up_point(x):
    if x.norm <= 0:
        raise DomainError("U(x) is undefined at the origin")
    return SpherePoint(_to_norm(x.coords, x.norm + 1), x.norm + 1)


def down_point(x):
    if x.norm <= 1:
        raise DomainError("D(x) needs |x| > 1")
    return SpherePoint(_to_norm(x.coords, x.norm - 1), x.norm - 1)


def _to_norm(X, target):
    """Scale each row of ``X`` to the (integer) norm ``target``.

    Applied after every move so rounding never drifts the norm off the lattice.
    """
    r = np.linalg.norm(X, axis=-1, keepdims=True)
    return X * (np.asarray(target, dtype=float).reshape(np.shape(r)[:-1] + (1,)) / r)


def _circle_batch(X, m, rng):
    """Uniform points on C(x) for each row of ``X`` (norms ``m``)."""
    g = rng.standard_normal(X.shape)
    xhat = X / m[:, None]
    g -= np.sum(g * xhat, axis=1)[:, None] * xhat
    g *= (2.0 * np.sqrt(m) / np.linalg.norm(g, axis=1))[:, None]
    Y = X * ((m - 1.0) / m)[:, None] + g
    return _to_norm(Y, m + 1.0)


def sample_circle(x, rng):
    """Uniform sample from C(x): norm ``|x|+1``, ``y - D(x)`` orthogonal to ``x``."""
    if x.d < 3:
        raise DomainError("C(x) degenerates for d < 3")
    if x.norm < 1:
        raise DomainError("C(x) needs |x| >= 1")
    Y = _circle_batch(x.coords[None, :], np.array([float(x.norm)]), rng)
    return SpherePoint(Y[0], x.norm + 1)


def sample_circle_batch(x, size, rng):
    """``size`` independent samples from C(x) as a ``(size, d)`` array."""
    if x.d < 3:
        raise DomainError("C(x) degenerates for d < 3")
    X = np.broadcast_to(x.coords, (size, x.d)).copy()
    return _circle_batch(X, np.full(size, float(x.norm)), rng)


def _move_probabilities(d, N, m):
    """Per-row (p_up, p_down, p_circle, p_stay) for norms ``m``."""
    m = np.asarray(m, dtype=float)
    a = (d - 1) / (4.0 * m)
    p_up = np.full_like(m, 0.5)
    p_down = 0.5 - a
    p_circ = a.copy()
    p_stay = np.zeros_like(m)
    if d % 2 == 0:
        floor = m == d // 2 - 1
        p_down[floor] = 0.0
        p_circ[floor] = 0.5
    top = m == N
    p_stay[top] = 0.5 + a[top]
    p_up[top] = 0.0
    p_circ[top] = 0.0
    return p_up, p_down, p_circ, p_stay


def step_batch(X, m, d, N, rng):
    """Advance every row of ``X`` (norms ``m``, integer array) by one step."""
    X = np.array(X, dtype=float, copy=True)
    m = np.array(m, dtype=np.int64, copy=True)
    p_up, p_down, p_circ, p_stay = _move_probabilities(d, N, m)
    u = rng.random(len(m))
    # Interval order: [stay | up | down | circle].
    c1 = p_stay
    c2 = c1 + p_up
    c3 = c2 + p_down
    go_up = (u >= c1) & (u < c2)
    go_down = (u >= c2) & (u < c3)
    go_circ = u >= c3
    if go_up.any():
        X[go_up] = _to_norm(X[go_up], m[go_up] + 1.0)
        m[go_up] += 1
    if go_down.any():
        X[go_down] = _to_norm(X[go_down], m[go_down] - 1.0)
        m[go_down] -= 1
    if go_circ.any():
        X[go_circ] = _circle_batch(X[go_circ], m[go_circ].astype(float), rng)
        m[go_circ] += 1
    return X, m


def _check_state(x, d, N):
    lo = radial_chain.min_state(d)
    if x.d != d or not lo <= x.norm <= N:
        raise DomainError(f"point with norm {x.norm} is outside the state space [{lo}, {N}]")


def step(x, config, rng):
    """One step of the reflected sphere walk from ``x``."""
    _check_state(x, config.d, config.N)
    X, m = step_batch(x.coords[None, :], np.array([x.norm]), config.d, config.N, rng)
    return SpherePoint(X[0], int(m[0]))


def _start_point(config, start):
    if start is None:
        start = radial_chain.min_state(config.d) + 1
    if isinstance(start, (int, np.integer)):
        start = SpherePoint.on_axis(config.d, int(start))
    _check_state(start, config.d, config.N)
    return start


def simulate(config, start=None, stream=0):
    """Run ``config.paths`` walks for ``config.steps`` steps.

    Returns ``(X, m)``: final positions ``(paths, d)`` and norms ``(paths,)``.
    """
    x0 = _start_point(config, start)

    def block(rng, size):
        X = np.broadcast_to(x0.coords, (size, config.d)).copy()
        m = np.full(size, x0.norm, dtype=np.int64)
        for _ in range(config.steps):
            X, m = step_batch(X, m, config.d, config.N, rng)
        return X, m

    parts = map_blocks(block, config.paths, config.seed, stream, config.threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass
class RadialLawReport:
    config: WalkConfig
    n: int
    states: list
    observed: list
    expected: list
    chi2: float
    dof: int
    pvalue: float
    alpha: float = 1e-3

    @property
    def passed(self):
        return self.pvalue > self.alpha


def _pooled_bins(expected, observed, min_expected=5.0):
    """Merge adjacent bins (in state order) until every expected count is >= min_expected."""
    e_out, o_out = [], []
    e_acc = o_acc = 0.0
    for e, o in zip(expected, observed):
        e_acc += e
        o_acc += o
        if e_acc >= min_expected:
            e_out.append(e_acc)
            o_out.append(o_acc)
            e_acc = o_acc = 0.0
    if e_acc or o_acc:
        if e_out:
            e_out[-1] += e_acc
            o_out[-1] += o_acc
        else:
            e_out.append(e_acc)
            o_out.append(o_acc)
    return np.array(e_out), np.array(o_out)


def radial_law_check(config, n=None, start=None, alpha=1e-3):
    """Chi-square comparison of simulated ``|X^N_n|`` with the exact DP row."""
    n = config.steps if n is None else n
    cfg = WalkConfig(config.d, config.N, n, config.paths, config.seed, config.threads)
    x0 = _start_point(cfg, start)
    _, m = simulate(cfg, x0)
    row = radial_chain.kernel_row(cfg.chain, n, x0.norm)
    states = list(row.states)
    probs = row.to_numpy()
    observed = np.bincount(m - row.lo, minlength=len(states)).astype(float)
    expected = probs * cfg.paths
    support = probs > 0
    if observed[~support].any():
        # Mass where the exact law has none.
        return RadialLawReport(cfg, n, states, observed.tolist(), expected.tolist(),
                               float("inf"), 0, 0.0, alpha)
    e, o = _pooled_bins(expected[support], observed[support])
    if len(e) < 2:
        chi2, dof, pvalue = 0.0, 0, 1.0
    else:
        res = stats.chisquare(o, e * (o.sum() / e.sum()))
        chi2, dof, pvalue = float(res.statistic), len(e) - 1, float(res.pvalue)
    return RadialLawReport(cfg, n, states, observed.tolist(), expected.tolist(),
                           chi2, dof, pvalue, alpha)


# ---------------------------------------------------------------------------
# Generator check


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    laplacian: float | None
    third_derivative_bound: float

    def value(self, Y):
        Y = np.atleast_2d(Y)
        if self.name == "linear":
            return Y[:, 0]
        if self.name == "coord_quadratic":
            return Y[:, 0] ** 2
        if self.name == "radial_quadratic":
            return np.sum(Y * Y, axis=1)
        if self.name == "cross":
            return Y[:, 0] * Y[:, 1]
        raise DomainError(f"unknown test function {self.name!r}")

    def laplacian_at(self, d):
        return 2.0 * d if self.name == "radial_quadratic" else self.laplacian


# All catalog members are polynomials of degree <= 2, so their third
# derivatives vanish and the Taylor slack C is zero.
CATALOG = {
    "linear": TestFunction("linear", 0.0, 0.0),
    "coord_quadratic": TestFunction("coord_quadratic", 2.0, 0.0),
    "radial_quadratic": TestFunction("radial_quadratic", None, 0.0),
    "cross": TestFunction("cross", 0.0, 0.0),
}


@dataclass
class GeneratorReport:
    test_point: SpherePoint
    N: int
    function: str
    estimate: float
    target: float
    stderr: float
    slack: float
    samples: int

    @property
    def passed(self):
        return abs(self.estimate - self.target) <= 3.0 * self.stderr + self.slack


def reflection_constant(d, N):
    """Coefficient of the inward normal derivative at the boundary."""
    return (0.5 - (d - 1) / (4.0 * N)) / N


def generator_check(f, x, N, samples, seed=0, threads=None, stream=0):
    """Estimate ``2 N^2 E[f(X_1/N) - f(x/N)]`` from ``x`` and compare with ``Laplacian f(x/N)``.

    ``x`` must be an interior lattice point: ``(d-1)/2 <= |x| < N``.
    """
    func = CATALOG.get(f) if isinstance(f, str) else f
    if func is None:
        raise DomainError(f"unknown test function {f!r}; choose from {sorted(CATALOG)}")
    d = x.d
    if d < 3:
        raise DomainError("the sphere walk needs d >= 3")
    if not (d - 1) / 2 <= x.norm < N:
        raise DomainError(
            f"generator check needs an interior point (d-1)/2 <= |x| < N, got |x|={x.norm}"
        )
    base = float(func.value(x.coords / N)[0])

    def block(rng, size):
        X = np.broadcast_to(x.coords, (size, d)).copy()
        m = np.full(size, x.norm, dtype=np.int64)
        X1, _ = step_batch(X, m, d, N, rng)
        inc = func.value(X1 / N) - base
        return inc.sum(), (inc * inc).sum()

    parts = map_blocks(block, samples, seed, stream, threads)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    scale = 2.0 * N * N
    return GeneratorReport(
        test_point=x,
        N=N,
        function=func.name,
        estimate=scale * mean,
        target=func.laplacian_at(d),
        stderr=scale * np.sqrt(var / samples),
        slack=func.third_derivative_bound / N,
        samples=samples,
    )
