r"""Modified Bessel function :math:`I_0` and the profile :math:`\Phi_0`.

Two evaluation branches are used:

* the ascending series :math:`\sum_k (z^2/4)^k / (k!)^2` for
  ``z <= SERIES_CROSSOVER``;
* the exponentially scaled large-argument expansion
  :math:`e^{-z} I_0(z) \sim (2\pi z)^{-1/2} \sum_k a_k z^{-k}`,
  :math:`a_k = ((2k-1)!!)^2 / (k!\, 8^k)`, truncated at its smallest term,
  for ``z > SERIES_CROSSOVER``.

The divergent expansion cannot do better than roughly :math:`e^{-2z}`
relative error, so the crossover sits at 15 where that is below 1e-14.
"""

import math
from dataclasses import dataclass

from rbessel.errors import DomainError

SERIES_CROSSOVER = 15.0


@dataclass(frozen=True)
class AccuracyPolicy:
    target_relative_error: float = 1e-12
    series_max_terms: int = 200

    def __post_init__(self):
        if not self.target_relative_error > 0:
            raise DomainError("target_relative_error must be positive")
        if self.series_max_terms < 10:
            raise DomainError("series_max_terms must be at least 10")


DEFAULT_POLICY = AccuracyPolicy()


def _check_argument(z, name="z"):
    z = float(z)
    if not math.isfinite(z) or z < 0:
        raise DomainError(f"{name} must be finite and nonnegative, got {z!r}")
    return z


def i0_series(z, policy=DEFAULT_POLICY):
    """Ascending power series for I0(z)."""
    z = _check_argument(z)
    q = 0.25 * z * z
    term = 1.0
    total = 1.0
    # Stop well below the target: all terms are positive, so truncation is the only error.
    stop = 0.1 * policy.target_relative_error
    for k in range(1, policy.series_max_terms + 1):
        term *= q / (k * k)
        total += term
        if term <= stop * total:
            return total
    raise ArithmeticError(
        f"I0 series did not reach {policy.target_relative_error:g} in "
        f"{policy.series_max_terms} terms at z={z}"
    )


def i0e_asymptotic(z, policy=DEFAULT_POLICY):
    """Large-argument expansion of exp(-z) * I0(z), truncated at the smallest term."""
    z = _check_argument(z)
    if z == 0:
        raise DomainError("asymptotic expansion needs z > 0")
    term = 1.0
    total = 1.0
    stop = 0.1 * policy.target_relative_error
    for k in range(1, policy.series_max_terms + 1):
        nxt = term * (2 * k - 1) ** 2 / (8.0 * k * z)
        if nxt >= term:
            break
        term = nxt
        total += term
        if term <= stop * total:
            break
    return total / math.sqrt(2.0 * math.pi * z)


def bessel_i0e(z, policy=DEFAULT_POLICY):
    """Exponentially scaled I0: exp(-z) * I0(z).  Finite for every z >= 0."""
    z = _check_argument(z)
    if z <= SERIES_CROSSOVER:
        return math.exp(-z) * i0_series(z, policy)
    return i0e_asymptotic(z, policy)


def bessel_i0(z, policy=DEFAULT_POLICY):
    """Modified Bessel function of the first kind, order zero.

    Parameters
    ----------
    z : float
        Nonnegative finite argument.
    policy : AccuracyPolicy, optional
        Relative accuracy target and series term budget.

    Returns
    -------
    float
        I0(z), relative error below ``policy.target_relative_error``.

    Raises
    ------
    DomainError
        If ``z`` is negative or not finite.
    OverflowError
        If I0(z) exceeds the double range (z above about 709).
    """
    z = _check_argument(z)
    if z <= SERIES_CROSSOVER:
        return i0_series(z, policy)
    return math.exp(z) * i0e_asymptotic(z, policy)


def phi0(r, policy=DEFAULT_POLICY):
    """Profile r * exp(-r**2) * I0(r**2), evaluated in scaled form."""
    r = _check_argument(r, "r")
    return r * bessel_i0e(r * r, policy)
