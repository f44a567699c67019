"""Normalizing-constant ratio estimation over a nested Gibbs family.

A Gibbs family Z(beta) = sum_x exp(beta * H(x)) with H >= 0 shrinks as beta
decreases, forming a nested family of weighted sets.  One descent
(:func:`tpa_run`) walks beta downward from ``beta_outer`` by
beta <- beta + ln(U)/H(X), with X ~ Gibbs(beta) drawn afresh each step: in
log-partition coordinates those steps are the points of a unit-rate Poisson
process descending from ln Z(beta_outer), so the number of steps landing
above ``beta_inner`` is exactly Poisson with mean

    r = ln( Z(beta_outer) / Z(beta_inner) ).

That makes a descent a drop-in count source for the exact Poisson-mean
machinery in :mod:`gpas.core`.  :func:`two_phase_scheme` composes the two: a
first phase pins r roughly, a second phase re-estimates it at the precision
needed so that exp(r_hat) lands within a factor (1 +- epsilon) of the true
ratio; by the union bound both phases succeed with probability at least
1 - delta.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

from .core import (
    DEFAULT_SOURCE_BUDGET,
    ConfidenceInterval,
    PoissonSource,
    confidence_interval,
    exact_gpas,
)
from .errors import BudgetExceededError, DegenerateRatioError, IterationCapError
from .numerics import RngStream

__all__ = [
    "NestedGibbsFamily",
    "TpaPoissonSource",
    "TpaReport",
    "tpa_run",
    "relative_error_transfer",
    "phase2_epsilon",
    "two_phase_from_source",
    "two_phase_scheme",
]

DEFAULT_STEP_CAP = 1_000_000

# The phase-2 precision formula exceeds 1 when the phase-1 estimate is below
# ln(1 + epsilon); clamping below 1 keeps calibration well-posed and only
# ever tightens phase 2.
_EPSILON2_CEILING = 1.0 - 1e-9


class NestedGibbsFamily(ABC):
    """A beta-indexed Gibbs family exposed through samples of H(X).

    The descent update depends on the sampled state only through its
    Hamiltonian, so implementations need not produce full states: they
    return a draw of H(X) for X ~ Gibbs(beta), with values confined to a
    fixed finite range [0, H_max].  ``beta_outer`` is the start (target)
    parameter and ``beta_inner`` the end (reference) parameter, with
    beta_inner < beta_outer.

    Instances must be safe for concurrent read-only use after construction;
    all per-run mutable state lives in the caller's stream.
    """

    beta_outer: float
    beta_inner: float

    @abstractmethod
    def sample_hamiltonian(self, beta: float, rng: RngStream) -> float:
        """One draw of H(X) with X ~ Gibbs(beta)."""


def tpa_run(
    family: NestedGibbsFamily,
    rng: RngStream,
    max_steps: int = DEFAULT_STEP_CAP,
) -> int:
    """One descent; the count is Poisson(ln(Z(beta_outer)/Z(beta_inner))).

    Starting at ``beta_outer``, each step draws H at the current beta and
    moves to beta + ln(U)/H with U uniform; when H = 0 the step lands at
    minus infinity.  Returns the number of steps whose updated beta stays
    strictly above ``beta_inner``.

    Raises:
        ValueError: if the family's beta ordering is invalid or it produces
            a negative or non-finite Hamiltonian.
        IterationCapError: after ``max_steps`` steps without finishing.
    """
    if not family.beta_inner < family.beta_outer:
        raise ValueError(
            f"beta_inner must be below beta_outer, got "
            f"[{family.beta_inner!r}, {family.beta_outer!r}]"
        )
    beta = family.beta_outer
    count = 0
    for _ in range(max_steps):
        h = family.sample_hamiltonian(beta, rng)
        if not (math.isfinite(h) and h >= 0.0):
            raise ValueError(f"family produced an invalid Hamiltonian {h!r}")
        u = rng.next_uniform()
        if h == 0.0 or u == 0.0:
            break  # step lands at -inf
        beta += math.log(u) / h
        if beta <= family.beta_inner:
            break
        count += 1
    else:
        raise IterationCapError(f"descent did not finish within {max_steps} steps")
    return count


class TpaPoissonSource(PoissonSource):
    """Adapter: one descent per count, making the family a Poisson source."""

    def __init__(
        self,
        family: NestedGibbsFamily,
        rng: RngStream,
        max_calls: int | None = DEFAULT_SOURCE_BUDGET,
        max_steps: int = DEFAULT_STEP_CAP,
    ) -> None:
        super().__init__(max_calls=max_calls)
        self.family = family
        self._rng = rng
        self._max_steps = max_steps

    def _draw(self) -> int:
        return tpa_run(self.family, self._rng, max_steps=self._max_steps)


@dataclass(frozen=True)
class TpaReport:
    """End-to-end result of the two-phase ratio scheme.

    ``ratio_estimate = exp(r_hat2)`` and ``total_tpa_calls`` is the sum of
    counts consumed by both phases.  ``ci`` is the phase-2 exact interval
    for r mapped through exp, at coverage 1 - delta.
    """

    r_hat1: float
    r_hat2: float
    epsilon2: float
    ratio_estimate: float
    ci: ConfidenceInterval
    total_tpa_calls: int


def relative_error_transfer(epsilon: float, r: float) -> float:
    """Relative precision on r that guarantees epsilon precision on exp(r).

    If |r_hat/r - 1| <= ln(1 + epsilon)/r then exp(r_hat)/exp(r) lies in
    [1/(1 + epsilon), 1 + epsilon], a subset of [1 - epsilon, 1 + epsilon].
    ln(1 + epsilon) is the binding side: it is smaller in magnitude than
    ln(1 - epsilon).
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie strictly inside (0, 1), got {epsilon!r}")
    if not (math.isfinite(r) and r > 0.0):
        raise ValueError(f"r must be a positive finite real, got {r!r}")
    return math.log1p(epsilon) / r


def phase2_epsilon(epsilon: float, r_hat1: float) -> float:
    """Phase-2 precision target ln(1 + epsilon) * (1 - epsilon) / r_hat1.

    A successful phase 1 guarantees r <= r_hat1 / (1 - epsilon), so applying
    the transfer bound at that worst case keeps the final ratio within
    epsilon.  Clamped just below 1 so calibration stays well-posed for very
    small phase-1 estimates.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie strictly inside (0, 1), got {epsilon!r}")
    if not (math.isfinite(r_hat1) and r_hat1 > 0.0):
        raise ValueError(f"r_hat1 must be a positive finite real, got {r_hat1!r}")
    return min(math.log1p(epsilon) * (1.0 - epsilon) / r_hat1, _EPSILON2_CEILING)


def two_phase_from_source(
    make_source: Callable[[], PoissonSource],
    epsilon: float,
    delta: float,
    rng: RngStream,
) -> TpaReport:
    """Two-phase (epsilon, delta)-approximation of exp(r) from Poisson(r) counts.

    ``make_source`` is invoked once per phase so each phase gets a fresh
    draw budget.  Phase 1 estimates r to within epsilon at confidence
    delta/2; phase 2 re-estimates it at the transferred precision
    :func:`phase2_epsilon` and confidence delta/2.  By the union bound,
    exp(r_hat2) is within a factor (1 +- epsilon) of exp(r) with probability
    at least 1 - delta.

    Raises:
        DegenerateRatioError: if phase 1 exhausts its budget, which signals
            r ~ 0 (ratio ~ 1).  A phase-2 budget failure propagates as
            BudgetExceededError.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie strictly inside (0, 1), got {epsilon!r}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie strictly inside (0, 1), got {delta!r}")
    source1 = make_source()
    try:
        first = exact_gpas(source1, epsilon, delta / 2.0, rng)
    except BudgetExceededError as exc:
        raise DegenerateRatioError(
            "phase 1 exhausted its draw budget; the log ratio is "
            "indistinguishable from 0 (ratio ~ 1)"
        ) from exc
    eps2 = phase2_epsilon(epsilon, first.mu_hat)
    source2 = make_source()
    second = exact_gpas(source2, eps2, delta / 2.0, rng)
    log_ci = confidence_interval(second, 1.0 - delta)
    ci = ConfidenceInterval(
        lower=math.exp(log_ci.lower),
        upper=math.exp(log_ci.upper),
        coverage=log_ci.coverage,
    )
    return TpaReport(
        r_hat1=first.mu_hat,
        r_hat2=second.mu_hat,
        epsilon2=eps2,
        ratio_estimate=math.exp(second.mu_hat),
        ci=ci,
        total_tpa_calls=source1.call_count + source2.call_count,
    )


def two_phase_scheme(
    family: NestedGibbsFamily,
    epsilon: float,
    delta: float,
    rng: RngStream,
    max_calls: int | None = DEFAULT_SOURCE_BUDGET,
    max_steps: int = DEFAULT_STEP_CAP,
) -> TpaReport:
    """Two-phase ratio approximation driven by descents on ``family``."""

    def make_source() -> PoissonSource:
        return TpaPoissonSource(family, rng, max_calls=max_calls, max_steps=max_steps)

    return two_phase_from_source(make_source, epsilon, delta, rng)
