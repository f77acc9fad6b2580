"""Exact n-step kernels of the reflected radial walk.

The walk lives on ``{m0, ..., N}`` with ``m0 = ceil(d/2) - 1``.  Away from the
ends it steps up with probability ``1/2 + (d-1)/(4m)`` and down with
``1/2 - (d-1)/(4m)``; for even ``d`` the bottom state ``d/2 - 1`` always
steps up; at ``N`` the up-move is replaced by a hold.

Two arithmetic modes share one code path.  In floating mode vectors are
float64 arrays.  In exact mode every transition probability is written over
the common denominator ``L = lcm(4m)``, so after ``n`` steps all entries are
integers over ``L**n``: the DP runs on Python integers (numpy object arrays)
and comparisons at fixed ``n`` are exact integer comparisons.  Exact values
leave the module as :class:`fractions.Fraction`.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import stats

from rbessel.errors import DomainError

FLOAT_TOL = 1e-14


def min_state(d):
    """Smallest radius of the walk: ``ceil(d/2) - 1``."""
    d = int(d)
    if d < 3:
        raise DomainError(f"the radial walk needs d >= 3, got d={d}")
    return (d + 1) // 2 - 1


@dataclass(frozen=True)
class ChainSpec:
    """Dimension ``d`` and top state ``N``.

    With ``reflected=False`` the same state space stands for the free walk
    truncated at a working horizon; any attempt to push mass past ``N`` raises.
    """

    d: int
    N: int
    reflected: bool = True

    def __post_init__(self):
        lo = min_state(self.d)
        if self.N < lo + 2:
            raise DomainError(f"N must be at least {lo + 2} for d={self.d}, got N={self.N}")

    @classmethod
    def free(cls, d, start, horizon):
        """Free walk started at ``start`` whose top state is never reached within ``horizon`` steps."""
        return cls(d, max(start + horizon + 1, min_state(d) + 2), reflected=False)

    @property
    def lo(self):
        return min_state(self.d)

    @property
    def states(self):
        return range(self.lo, self.N + 1)

    @property
    def size(self):
        return self.N - self.lo + 1

    def check_state(self, m):
        if not self.lo <= m <= self.N:
            raise DomainError(f"state {m} outside [{self.lo}, {self.N}]")
        return int(m)


@dataclass(frozen=True)
class StepLaw:
    up: object
    down: object
    stay: object

    def __post_init__(self):
        for p in (self.up, self.down, self.stay):
            if not 0 <= p <= 1:
                raise DomainError(f"step probability {p} outside [0, 1]")

    @property
    def total(self):
        return self.up + self.down + self.stay


def step_law(spec, m, exact=False):
    """One-step law from state ``m``.

    >>> step_law(ChainSpec(3, 10), 10)
    StepLaw(up=0.0, down=0.45, stay=0.55)
    """
    m = spec.check_state(m)
    d = spec.d
    half = Fraction(1, 2) if exact else 0.5
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    drift = Fraction(d - 1, 4 * m) if exact else (d - 1) / (4 * m)
    if d % 2 == 0 and m == d // 2 - 1:
        return StepLaw(up=one, down=zero, stay=zero)
    if m == spec.N and spec.reflected:
        return StepLaw(up=zero, down=half - drift, stay=half + drift)
    return StepLaw(up=half + drift, down=half - drift, stay=zero)


@dataclass(frozen=True)
class _Engine:
    spec: ChainSpec
    exact: bool
    scale: int
    up: np.ndarray
    down: np.ndarray
    stay: np.ndarray

    def zeros(self, shape=None):
        shape = self.spec.size if shape is None else shape
        if self.exact:
            out = np.empty(shape, dtype=object)
            out.fill(0)
            return out
        return np.zeros(shape)

    def point(self, m):
        p = self.zeros()
        p[m - self.spec.lo] = 1
        return p

    def identity(self):
        p = self.zeros((self.spec.size, self.spec.size))
        for i in range(self.spec.size):
            p[i, i] = 1
        return p

    def push(self, p):
        """One DP step along the last axis (rows are distributions)."""
        if not self.spec.reflected and np.any(p[..., -1] != 0):
            raise DomainError(
                f"free chain reached its working horizon N={self.spec.N}; enlarge N"
            )
        q = p * self.stay
        q[..., 1:] += p[..., :-1] * self.up[:-1]
        q[..., :-1] += p[..., 1:] * self.down[1:]
        return q

    def value(self, numerator, n):
        if self.exact:
            return Fraction(int(numerator), self.scale**n)
        return float(numerator)


@lru_cache(maxsize=64)
def _engine(spec, exact):
    laws = [step_law(spec, m, exact=exact) for m in spec.states]
    if exact:
        scale = math.lcm(*(4 * m for m in spec.states))

        def column(attr):
            col = np.empty(len(laws), dtype=object)
            for i, law in enumerate(laws):
                v = getattr(law, attr) * scale
                assert v.denominator == 1
                col[i] = int(v)
            return col

        return _Engine(spec, True, scale, column("up"), column("down"), column("stay"))
    arr = lambda attr: np.array([getattr(law, attr) for law in laws], dtype=float)
    return _Engine(spec, False, 1, arr("up"), arr("down"), arr("stay"))


@dataclass(frozen=True)
class ProbVector:
    """Distribution over ``{lo, ..., lo + len(values) - 1}``."""

    lo: int
    values: tuple

    def __getitem__(self, m):
        i = m - self.lo
        if not 0 <= i < len(self.values):
            return 0
        return self.values[i]

    def __len__(self):
        return len(self.values)

    @property
    def hi(self):
        return self.lo + len(self.values) - 1

    @property
    def states(self):
        return range(self.lo, self.hi + 1)

    @property
    def exact(self):
        return bool(self.values) and isinstance(self.values[0], Fraction)

    def total(self):
        return sum(self.values)

    def as_dict(self, nonzero=False):
        return {m: v for m, v in zip(self.states, self.values) if v or not nonzero}

    def to_numpy(self):
        return np.array([float(v) for v in self.values])

    @classmethod
    def point(cls, spec, m, exact=False):
        spec.check_state(m)
        one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
        return cls(spec.lo, tuple(one if s == m else zero for s in spec.states))

    @classmethod
    def from_mapping(cls, spec, mapping, exact=False):
        conv = Fraction if exact else float
        vals = [conv(0)] * spec.size
        for m, v in mapping.items():
            vals[spec.check_state(m) - spec.lo] = conv(v)
        out = cls(spec.lo, tuple(vals))
        total = out.total()
        if any(v < 0 or v > 1 for v in vals) or abs(total - 1) > (0 if exact else 1e-12):
            raise DomainError("mapping is not a probability vector")
        return out


def _to_numerators(spec, dist, exact):
    eng = _engine(spec, exact)
    if dist.lo != spec.lo or len(dist) != spec.size:
        raise DomainError("distribution does not live on the chain's state space")
    if exact:
        # Bring every entry onto the common denominator scale**k.
        k = 0
        for v in dist.values:
            den, need = Fraction(v).denominator, 0
            while den != 1:
                g = math.gcd(den, eng.scale)
                if g == 1:
                    raise DomainError(f"entry {v} is not a multiple of 1/scale**k")
                den //= g
                need += 1
            k = max(k, need)
        p = eng.zeros()
        for i, v in enumerate(dist.values):
            p[i] = int(Fraction(v) * eng.scale**k)
        return p, k
    return np.array([float(v) for v in dist.values]), 0


def _from_numerators(spec, p, n, exact):
    eng = _engine(spec, exact)
    return ProbVector(spec.lo, tuple(eng.value(v, n) for v in p))


def evolve(spec, dist, exact=None):
    """Push ``dist`` forward one step of the walk."""
    exact = dist.exact if exact is None else exact
    p, k = _to_numerators(spec, dist, exact)
    return _from_numerators(spec, _engine(spec, exact).push(p), k + 1, exact)


def kernel_row(spec, n, m0, exact=False):
    """Row ``m -> p_N(n, m0, m)`` of the n-step kernel."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    eng = _engine(spec, exact)
    p = eng.point(spec.check_state(m0))
    for _ in range(n):
        p = eng.push(p)
    return _from_numerators(spec, p, n, exact)


def iter_kernel_numerators(spec, n_max, exact=False):
    """Yield ``(n, P)`` for ``n = 0..n_max``, where ``P[i, j]`` is the numerator of
    ``p_N(n, lo + i, lo + j)`` over ``scale**n`` (scale is 1 in floating mode)."""
    eng = _engine(spec, exact)
    p = eng.identity()
    yield 0, p
    for n in range(1, n_max + 1):
        p = eng.push(p)
        yield n, p


def kernel_matrix(spec, n, exact=False):
    """Full n-step kernel as a 2-D array (object array of Fractions in exact mode)."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    eng = _engine(spec, exact)
    for k, p in iter_kernel_numerators(spec, n, exact):
        pass
    if not exact:
        return p
    out = np.empty(p.shape, dtype=object)
    for idx, v in np.ndenumerate(p):
        out[idx] = eng.value(v, n)
    return out


# ---------------------------------------------------------------------------
# Loop property


@dataclass(frozen=True)
class LoopRecord:
    m: int
    loop_product: object
    closed_form: object

    @property
    def diff(self):
        return self.loop_product - self.closed_form


@dataclass
class LoopReport:
    spec: ChainSpec
    records: list
    reflection_loop: object
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def loop_closed_form(d, m, exact=False):
    """Closed form of the loop product between ``m`` and ``m+1``."""
    if d % 2 == 0 and m == d // 2 - 1:
        return Fraction(1, 2 * d) if exact else 1 / (2 * d)
    if exact:
        return Fraction(1, 4) - Fraction((d - 1) * (d - 3), 16 * (m * m + m))
    return 0.25 - (d - 1) * (d - 3) / (16 * (m * m + m))


def check_loop_property(spec, exact=False, tol=FLOAT_TOL):
    """Loop products ``p(1,m,m+1) p(1,m+1,m)`` must be nondecreasing in ``m`` and,
    for the reflected walk, bounded by the hold probability at ``N`` squared."""
    tol = 0 if exact else tol
    records = []
    for m in range(spec.lo, spec.N):
        prod = step_law(spec, m, exact).up * step_law(spec, m + 1, exact).down
        records.append(LoopRecord(m, prod, loop_closed_form(spec.d, m, exact)))
    reflection = step_law(spec, spec.N, exact).stay ** 2 if spec.reflected else None
    violations = []
    for a, b in zip(records, records[1:]):
        if b.loop_product < a.loop_product - tol:
            violations.append(("decrease", b.m, a.loop_product, b.loop_product))
    if reflection is not None:
        for rec in records:
            if rec.loop_product > reflection + tol:
                violations.append(("above-reflection", rec.m, rec.loop_product, reflection))
    return LoopReport(spec, records, reflection, violations)


# ---------------------------------------------------------------------------
# Monotonicity of the diagonal and of shifted kernels


@dataclass
class DiagonalReport:
    spec: ChainSpec
    n: int
    diagonal: list
    violations: list
    ties: int

    @property
    def passed(self):
        return not self.violations


def _diagonal_violations(spec, n, diag_num, exact, tol):
    eng = _engine(spec, exact)
    violations, ties = [], 0
    for i in range(len(diag_num) - 1):
        a, b = diag_num[i], diag_num[i + 1]
        if exact:
            bad = a > b
        else:
            bad = a > b + tol
        if bad:
            violations.append((n, spec.lo + i, eng.value(a, n), eng.value(b, n)))
        elif a == b and a != 0:
            ties += 1
    return violations, ties


def check_diagonal_monotone(spec, n, exact=False, tol=FLOAT_TOL):
    """Check ``p_N(n, m, m) <= p_N(n, m+1, m+1)`` for every adjacent pair.

    ``ties`` counts adjacent pairs that are equal and nonzero; for ``d = 3``
    every interior loop has the same weight, so such ties are genuine and
    strict increase is not asserted.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    for k, p in iter_kernel_numerators(spec, n, exact):
        pass
    diag = np.diagonal(p).copy()
    violations, ties = _diagonal_violations(spec, n, diag, exact, tol)
    eng = _engine(spec, exact)
    return DiagonalReport(spec, n, [eng.value(v, n) for v in diag], violations, ties)


def sweep_diagonal_monotone(spec, n_max, exact=False, tol=FLOAT_TOL):
    """Run the diagonal check for every ``n <= n_max``; returns all violations."""
    violations = []
    for n, p in iter_kernel_numerators(spec, n_max, exact):
        v, _ = _diagonal_violations(spec, n, np.diagonal(p), exact, tol)
        violations.extend(v)
    return violations


@dataclass
class ShiftReport:
    spec: ChainSpec
    n: int
    checked: int
    violations: list

    @property
    def passed(self):
        return not self.violations


def check_shift_monotone(spec, n, exact=False, tol=FLOAT_TOL):
    """Check ``p_N(n, m, m') <= p_N(n, m+p, m'+p)`` for all ``m' < m``, ``p > 0``, ``m + p <= N``."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    for k, P in iter_kernel_numerators(spec, n, exact):
        pass
    eng = _engine(spec, exact)
    lo, S = spec.lo, spec.size
    checked, violations = 0, []
    for i in range(S):
        for j in range(i):
            for shift in range(1, S - i):
                lhs, rhs = P[i, j], P[i + shift, j + shift]
                checked += 1
                if (lhs > rhs) if exact else (lhs > rhs + tol):
                    violations.append(
                        (lo + i, lo + j, shift, eng.value(lhs, n), eng.value(rhs, n))
                    )
    return ShiftReport(spec, n, checked, violations)


# ---------------------------------------------------------------------------
# Local times


@dataclass(frozen=True)
class LocalTimeReport:
    start_state: int
    horizon: int
    expected_visits: object

    def __post_init__(self):
        if not 0 <= self.expected_visits <= self.horizon + 1:
            raise DomainError("expected visits outside [0, horizon + 1]")


def expected_local_time(spec, y, horizon, exact=False):
    """Expected number of visits to ``y`` by time ``horizon`` for the walk started at ``y``."""
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    eng = _engine(spec, exact)
    i = spec.check_state(y) - spec.lo
    p = eng.point(y)
    # acc holds sum_k p_k[y] * scale**(n-k) after n steps (Horner form).
    acc = p[i]
    for _ in range(horizon):
        p = eng.push(p)
        acc = acc * eng.scale + p[i] if exact else acc + p[i]
    return LocalTimeReport(y, horizon, eng.value(acc, horizon))


def local_time_profile(spec, horizon, exact=False):
    """``E^y(L_y^horizon)`` for every state ``y``, from one matrix sweep.

    Returns ``(values, numerators)``; in exact mode the numerators share the
    denominator ``scale**horizon`` and can be compared directly.
    """
    eng = _engine(spec, exact)
    acc = None
    for n, P in iter_kernel_numerators(spec, horizon, exact):
        diag = np.diagonal(P).copy()
        acc = diag if acc is None else (acc * eng.scale + diag if exact else acc + diag)
    return [eng.value(v, horizon) for v in acc], acc


@dataclass(frozen=True)
class ScalingFit:
    d: int
    N_list: tuple
    expected_visits: tuple
    slope: float
    intercept: float
    method: str


def local_time_scaling(d, N_list, method="lstsq"):
    """Fit the exponent of ``E^N(L_N^{N^2})`` against ``N`` on log-log axes.

    ``method`` is ``"lstsq"`` (ordinary least squares) or ``"theil-sen"``.
    """
    N_list = tuple(int(N) for N in N_list)
    if len(set(N_list)) < 3:
        raise DomainError("need at least 3 distinct values of N for the fit")
    lo = min_state(d)
    if min(N_list) < lo + 2:
        raise DomainError(f"every N must be at least {lo + 2}")
    visits = tuple(
        float(expected_local_time(ChainSpec(d, N), N, N * N).expected_visits) for N in N_list
    )
    x, y = np.log(N_list), np.log(visits)
    if method == "lstsq":
        slope, intercept = np.polyfit(x, y, 1)
    elif method == "theil-sen":
        slope, intercept, _, _ = stats.theilslopes(y, x)
    else:
        raise DomainError(f"unknown fit method {method!r}")
    return ScalingFit(d, N_list, visits, float(slope), float(intercept), method)
