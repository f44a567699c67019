"""Sequential Poisson-mean estimation with an exactly known error law.

The estimator consumes a stream of iid Poisson(mu) counts, reading them as
the interval occupancy numbers of a rate-mu Poisson point process on
[0, inf): the i-th count is the number of process points in [i, i+1).  Once
the cumulative count reaches a chosen index k, the position of the k-th
point inside its interval is recovered exactly from the order statistics of
uniforms (a Beta draw), giving the k-th arrival time T'.  The estimate is

    mu_hat = (k - 1) / T'.

Because mu * T' ~ Gamma(k, 1) no matter what mu is, the relative error
mu_hat / mu - 1 has a fixed, mu-free distribution: mu_hat is inverse-gamma
with shape k and scale (k - 1) mu, unbiased, with standard deviation
mu / sqrt(k - 2).  Three consequences are implemented here:

* ``failure_probability`` evaluates P(|mu_hat/mu - 1| > eps) in closed form
  from the Gamma CDF;
* ``calibrate``/``exact_gpas`` pick k (with a randomized tie-break between
  k and k - 1) so that the failure probability equals a requested delta
  exactly, not merely at most;
* ``confidence_interval`` turns one run into an interval with exact
  coverage by dividing Gamma quantiles by T'.

The expected number of counts consumed by a run is at most 1 + k / mu.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .errors import BudgetExceededError, CalibrationError
from .numerics import (
    RngStream,
    gamma_quantile,
    reg_lower_gamma,
    sample_bernoulli,
    sample_beta,
    sample_poisson,
)

__all__ = [
    "DEFAULT_SOURCE_BUDGET",
    "PoissonSource",
    "SyntheticPoissonSource",
    "GpasResult",
    "Calibration",
    "ConfidenceInterval",
    "gpas",
    "failure_probability",
    "calibrate",
    "exact_gpas",
    "confidence_interval",
]

DEFAULT_SOURCE_BUDGET = 1_000_000

# Tolerance for the monotonicity assertion during calibration search; float
# noise between nearly equal failure probabilities must not trip it.
_MONOTONE_SLACK = 1e-12


class PoissonSource(ABC):
    """Stream of iid nonnegative integer counts with a common unknown mean.

    Implementors supply :meth:`_draw`; the base class counts calls and
    enforces the optional ``max_calls`` budget.  The budget is the guard
    against a mean of (nearly) zero, where a sequential stopping rule would
    never accumulate enough arrivals to terminate.

    A source is single-owner state: one estimator run at a time.
    """

    def __init__(self, max_calls: int | None = DEFAULT_SOURCE_BUDGET) -> None:
        if max_calls is not None and max_calls < 1:
            raise ValueError(f"max_calls must be positive or None, got {max_calls!r}")
        self.max_calls = max_calls
        self.call_count = 0

    def next_count(self) -> int:
        """Draw the next count; increments ``call_count`` by exactly one."""
        if self.max_calls is not None and self.call_count >= self.max_calls:
            raise BudgetExceededError(
                f"count source exhausted its budget of {self.max_calls} draws"
            )
        value = self._draw()
        self.call_count += 1
        return value

    @abstractmethod
    def _draw(self) -> int:
        """Produce one count (subclass hook; use :meth:`next_count`)."""


class SyntheticPoissonSource(PoissonSource):
    """Source of exact Poisson(mu) counts from a caller-owned stream."""

    def __init__(
        self,
        mu: float,
        rng: RngStream,
        max_calls: int | None = DEFAULT_SOURCE_BUDGET,
    ) -> None:
        if not (math.isfinite(mu) and mu >= 0.0):
            raise ValueError(f"mu must be a nonnegative finite real, got {mu!r}")
        super().__init__(max_calls=max_calls)
        self.mu = mu
        self._rng = rng

    def _draw(self) -> int:
        return sample_poisson(self._rng, self.mu)


@dataclass(frozen=True)
class GpasResult:
    """One estimator run.

    ``t_prime`` is the k-th arrival time of the embedded point process,
    ``mu_hat = (k - 1) / t_prime`` the estimate, and ``draws_used`` the
    number of counts consumed (equal to ceil(t_prime) whenever t_prime is
    not an integer, which is almost surely).
    """

    k: int
    t_prime: float
    mu_hat: float
    draws_used: int


@dataclass(frozen=True)
class Calibration:
    """Arrival index calibrated to a target failure probability.

    ``k`` is the minimal index (at least 3) whose failure probability
    ``f_k`` is at most ``delta``; running with k - 1 instead with
    probability ``p`` makes the overall failure probability exactly delta:
    p * f_km1 + (1 - p) * f_k = delta.
    """

    epsilon: float
    delta: float
    k: int
    p: float
    f_k: float
    f_km1: float


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    coverage: float


def gpas(source: PoissonSource, k: int, rng: RngStream) -> GpasResult:
    """Estimate the source mean from the k-th arrival of the point process.

    Counts are drawn one interval at a time.  When the interval holding the
    k-th point is reached, that interval's points are uniform on it given
    their number, so the position of the k-th point is the (k - A)-th order
    statistic of T uniforms: interval start plus a
    Beta(k - A, T - (k - A) + 1) draw, where A is the number of points in
    earlier intervals and T this interval's count.

    The returned ``mu_hat`` is distributed inverse-gamma with shape ``k``
    and scale ``(k - 1) mu``; the expected number of draws is at most
    1 + k / mu.

    Raises:
        ValueError: if ``k < 2`` (the estimate's mean exists only for k > 1).
        BudgetExceededError: if the source budget runs out first.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k!r}")
    arrivals = 0
    intervals = 0
    t_prime = -1.0
    while arrivals < k:
        count = source.next_count()
        if arrivals + count >= k:
            within = k - arrivals  # rank of the k-th point in this interval
            a, b = within, count - within + 1
            assert a >= 1 and b >= 1, "beta parameters must be >= 1 by construction"
            t_prime = intervals + sample_beta(rng, a, b)
        arrivals += count
        intervals += 1
    mu_hat = (k - 1) / t_prime
    return GpasResult(k=k, t_prime=t_prime, mu_hat=mu_hat, draws_used=intervals)


def failure_probability(k: int, epsilon: float) -> float:
    """Exact P(|mu_hat_k / mu - 1| > epsilon), independent of mu.

    Since mu * T' ~ Gamma(k, 1) and mu_hat = (k - 1)/T', the failure event
    is {G <= 1/(1 + eps)} union {G > 1/(1 - eps)} for G ~ Gamma(k, k - 1),
    so the probability is a sum of two exact Gamma tail values.
    """
    if not isinstance(k, int) or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie strictly inside (0, 1), got {epsilon!r}")
    rate = float(k - 1)
    low_tail = reg_lower_gamma(k, rate / (1.0 + epsilon))
    high_cdf = reg_lower_gamma(k, rate / (1.0 - epsilon))
    return low_tail + (1.0 - high_cdf)


def calibrate(epsilon: float, delta: float, k_cap: int = 10_000_000) -> Calibration:
    """Find the minimal k >= 3 whose failure probability is at most delta.

    The failure probability is nonincreasing in k over any sensible range,
    so the search doubles k from 3 to bracket the crossing and then
    bisects; monotonicity is asserted over every probed index rather than
    assumed globally.  The mixing probability p makes the randomized
    k / k - 1 choice fail with probability exactly delta.  In the corner
    where even k = 2 already beats delta, no exact mixture exists and p is
    clamped to 1 (always use k - 1 = 2; strictly conservative).

    Raises:
        ValueError: on parameters outside (0, 1).
        CalibrationError: if no k <= k_cap suffices, or monotonicity fails.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie strictly inside (0, 1), got {epsilon!r}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly inside (0, 1), got {delta!r}")
    if k_cap < 3:
        raise ValueError(f"k_cap must be at least 3, got {k_cap!r}")

    probes: dict[int, float] = {}

    def f(k: int) -> float:
        if k not in probes:
            probes[k] = failure_probability(k, epsilon)
        return probes[k]

    if f(3) <= delta:
        k_star = 3
    else:
        lo, hi = 3, 6
        while f(hi) > delta:
            lo, hi = hi, hi * 2
            if lo > k_cap:
                raise CalibrationError(
                    f"no k <= {k_cap} reaches failure probability {delta} "
                    f"at epsilon={epsilon}"
                )
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if f(mid) <= delta:
                hi = mid
            else:
                lo = mid
        k_star = hi

    f_k = f(k_star)
    f_km1 = f(k_star - 1)

    ks = sorted(probes)
    for k_a, k_b in zip(ks, ks[1:]):
        if probes[k_b] > probes[k_a] + _MONOTONE_SLACK:
            raise CalibrationError(
                f"failure probability is not monotone between k={k_a} "
                f"({probes[k_a]}) and k={k_b} ({probes[k_b]})"
            )

    if f_km1 <= delta:
        p = 1.0
    else:
        p = (delta - f_k) / (f_km1 - f_k)
    return Calibration(
        epsilon=epsilon, delta=delta, k=k_star, p=p, f_k=f_k, f_km1=f_km1
    )


def exact_gpas(
    source: PoissonSource,
    epsilon: float,
    delta: float,
    rng: RngStream,
    k_cap: int = 10_000_000,
) -> GpasResult:
    """Run the estimator with failure probability exactly delta.

    Calibrates k for (epsilon, delta), decrements it by one with the
    calibrated tie-break probability, and runs :func:`gpas` with the chosen
    index, so P(|mu_hat/mu - 1| > epsilon) = delta exactly.
    """
    cal = calibrate(epsilon, delta, k_cap=k_cap)
    k = cal.k - 1 if sample_bernoulli(rng, cal.p) else cal.k
    return gpas(source, k, rng)


def confidence_interval(result: GpasResult, coverage: float) -> ConfidenceInterval:
    """Exact equal-tailed interval for the source mean from one run.

    mu * t_prime ~ Gamma(k, 1) regardless of mu, so dividing the Gamma(k, 1)
    quantiles at (1 - coverage)/2 and (1 + coverage)/2 by t_prime yields an
    interval containing mu with probability exactly ``coverage``.
    """
    if not (0.0 < coverage < 1.0):
        raise ValueError(f"coverage must lie strictly inside (0, 1), got {coverage!r}")
    tail = 0.5 * (1.0 - coverage)
    lower = gamma_quantile(result.k, 1.0, tail) / result.t_prime
    upper = gamma_quantile(result.k, 1.0, 1.0 - tail) / result.t_prime
    return ConfidenceInterval(lower=lower, upper=upper, coverage=coverage)
