"""Special functions and random variate generation.

Everything stochastic in this package is driven by :class:`RngStream`, a
seedable uniform stream addressed by a ``(seed, stream_id)`` pair.  The
samplers (Bernoulli, Poisson, Gamma, Beta) consume nothing but uniforms from
the stream, so any run is reproducible from that pair alone, and independent
replicates can be run on distinct stream ids.

The deterministic side consists of the regularized lower incomplete gamma
function and its inverse in the second argument, which together supply exact
Gamma tail probabilities and quantiles to the calibration and
confidence-interval code.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "RngStream",
    "reg_lower_gamma",
    "gamma_quantile",
    "sample_uniform",
    "sample_bernoulli",
    "sample_poisson",
    "sample_gamma",
    "sample_beta",
]

_MAX_ITERATIONS = 1_000_000
_REL_TERM_TOL = 1e-15

# Poisson draws above this mean are split into independent sub-draws so the
# sequential-search inversion always works on a short cumulative sum.
_POISSON_SPLIT_MEAN = 30.0

# Integer gamma shapes up to this bound are sampled as sums of exponentials;
# larger or fractional shapes fall back to a rejection sampler.
_GAMMA_SUM_LIMIT = 64


# ---------------------------------------------------------------------------
# Regularized incomplete gamma function and its inverse
# ---------------------------------------------------------------------------


def reg_lower_gamma(shape: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(shape, x).

    P(shape, x) = gamma(shape, x) / Gamma(shape) is the CDF at ``x`` of a
    Gamma(shape, 1) random variable; the CDF of Gamma(shape, rate) at ``t``
    is therefore ``reg_lower_gamma(shape, rate * t)``.

    Evaluated by the lower power series for ``x < shape + 1`` and via the
    continued fraction of the upper function otherwise, iterating until the
    relative term drops below 1e-15.

    Raises:
        ValueError: if ``shape <= 0`` or ``x < 0`` (or either is not finite).
    """
    if not (math.isfinite(shape) and shape > 0.0):
        raise ValueError(f"shape must be a positive finite real, got {shape!r}")
    if not (math.isfinite(x) and x >= 0.0):
        raise ValueError(f"x must be a nonnegative finite real, got {x!r}")
    if x == 0.0:
        return 0.0
    if x < shape + 1.0:
        return _lower_series(shape, x)
    return 1.0 - _upper_continued_fraction(shape, x)


# Above this shape the naive exponent shape*ln(x) - x - lgamma(shape) is a
# small difference of huge terms, each rounding at its own magnitude; the
# Stirling form below keeps every term at the scale of the result.
_STIRLING_SWITCH = 30.0


def _stirling_correction(s: float) -> float:
    # lgamma(s) - [(s - 1/2) ln s - s + ln(2 pi)/2], asymptotic series
    inv = 1.0 / s
    inv2 = inv * inv
    return inv * (
        1.0 / 12.0
        + inv2
        * (
            -1.0 / 360.0
            + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))
        )
    )


def _gamma_prefactor(shape: float, x: float) -> float:
    # x^shape e^-x / Gamma(shape), computed in log space to dodge overflow
    if shape < _STIRLING_SWITCH:
        return math.exp(shape * math.log(x) - x - math.lgamma(shape))
    excess = x - shape
    exponent = (
        shape * math.log1p(excess / shape)
        - excess
        + 0.5 * math.log(shape / (2.0 * math.pi))
        - _stirling_correction(shape)
    )
    return math.exp(exponent)


def _lower_series(shape: float, x: float) -> float:
    # P(shape, x) = x^shape e^-x / Gamma(shape) * sum_n x^n / (shape)_(n+1)
    denom = shape
    term = 1.0 / shape
    total = term
    for _ in range(_MAX_ITERATIONS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _REL_TERM_TOL:
            return total * _gamma_prefactor(shape, x)
    raise ArithmeticError(
        f"lower gamma series did not converge for shape={shape}, x={x}"
    )


def _upper_continued_fraction(shape: float, x: float) -> float:
    # Q(shape, x) by Lentz's algorithm on the standard continued fraction
    tiny = 1e-300
    b = x + 1.0 - shape
    c = 1.0 / tiny
    d = 1.0 / b if abs(b) >= tiny else 1.0 / tiny
    h = d
    for i in range(1, _MAX_ITERATIONS + 1):
        an = -i * (i - shape)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _REL_TERM_TOL:
            return h * _gamma_prefactor(shape, x)
    raise ArithmeticError(
        f"upper gamma continued fraction did not converge for shape={shape}, x={x}"
    )


@lru_cache(maxsize=65536)
def gamma_quantile(shape: float, rate: float, q: float) -> float:
    """Quantile of the Gamma(shape, rate) distribution.

    Returns ``t`` with ``reg_lower_gamma(shape, rate * t) = q``.  Solved by
    bracketed bisection: the initial bracket ``[0, 10 * shape/rate + 50/rate]``
    is doubled until the CDF exceeds ``q``, then bisected to 1e-13 relative
    width.  Bisection is slow but unconditionally robust, and quantiles are
    never in a hot loop here; results are memoized.

    Raises:
        ValueError: if ``q`` is outside (0, 1) or a parameter is nonpositive.
    """
    if not (math.isfinite(shape) and shape > 0.0):
        raise ValueError(f"shape must be a positive finite real, got {shape!r}")
    if not (math.isfinite(rate) and rate > 0.0):
        raise ValueError(f"rate must be a positive finite real, got {rate!r}")
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie strictly inside (0, 1), got {q!r}")
    hi = 10.0 * shape / rate + 50.0 / rate
    while reg_lower_gamma(shape, rate * hi) < q:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("quantile bracket expansion ran away")
    lo = 0.0
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if reg_lower_gamma(shape, rate * mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Uniform stream
# ---------------------------------------------------------------------------

# Refill sizes grow so short-lived streams stay cheap while long-lived ones
# amortize generator overhead.
_BUFFER_SCHEDULE = (64, 256, 1024, 4096, 16384)


class RngStream:
    """Deterministic uniform stream addressed by ``(seed, stream_id)``.

    Backed by the Philox counter-based generator keyed directly with the
    ``(seed, stream_id)`` pair.  Distinct keys yield statistically
    independent sequences (a documented property of that generator family),
    each with period 2^256, and the same pair reproduces the identical
    sequence of variates within one library version.

    A stream is single-owner mutable state: never share one instance across
    threads.  Run concurrent replicates on distinct stream ids instead.
    """

    __slots__ = ("seed", "stream_id", "_gen", "_buf", "_pos", "_refills")

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not 0 <= value < 2**64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self._buf: list[float] = []
        self._pos = 0
        self._refills = 0

    def next_uniform(self) -> float:
        """Next uniform variate in [0, 1)."""
        if self._pos >= len(self._buf):
            size = _BUFFER_SCHEDULE[min(self._refills, len(_BUFFER_SCHEDULE) - 1)]
            self._refills += 1
            self._buf = self._gen.random(size).tolist()
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        return value

    def spawn(self, stream_id: int) -> "RngStream":
        """Fresh independent stream with the same seed and a new stream id."""
        return RngStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def sample_uniform(rng: RngStream) -> float:
    """Uniform draw on [0, 1)."""
    return rng.next_uniform()


def sample_bernoulli(rng: RngStream, p: float) -> bool:
    """Bernoulli(p) draw; p = 0 is always False and p = 1 always True."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    return rng.next_uniform() < p


# ---------------------------------------------------------------------------
# Variate samplers
# ---------------------------------------------------------------------------


def _exponential(rng: RngStream) -> float:
    # Unit-rate exponential; redraw the measure-zero u == 0 so log stays finite.
    u = rng.next_uniform()
    while u == 0.0:
        u = rng.next_uniform()
    return -math.log(u)


def _standard_normal(rng: RngStream) -> float:
    # Box-Muller, cosine branch only: exactly two uniforms per normal keeps
    # stream consumption independent of call history.
    u1 = rng.next_uniform()
    while u1 == 0.0:
        u1 = rng.next_uniform()
    u2 = rng.next_uniform()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def sample_poisson(rng: RngStream, mu: float) -> int:
    """Poisson(mu) draw; mu = 0 returns 0 deterministically.

    Inversion by sequential search on the cumulative pmf for ``mu <= 30``;
    larger means are split into equal sub-means below 30 and the independent
    sub-draws summed, which preserves the exact law.
    """
    if not (math.isfinite(mu) and mu >= 0.0):
        raise ValueError(f"mu must be a nonnegative finite real, got {mu!r}")
    if mu == 0.0:
        return 0
    if mu > _POISSON_SPLIT_MEAN:
        pieces = math.ceil(mu / _POISSON_SPLIT_MEAN)
        sub_mean = mu / pieces
        return sum(_poisson_inversion(rng, sub_mean) for _ in range(pieces))
    return _poisson_inversion(rng, mu)


def _poisson_inversion(rng: RngStream, mu: float) -> int:
    u = rng.next_uniform()
    prob = math.exp(-mu)
    cdf = prob
    count = 0
    while u > cdf:
        count += 1
        prob *= mu / count
        cdf += prob
        if prob == 0.0:
            # pmf underflowed: u sits beyond representable mass
            break
    return count


def sample_gamma(rng: RngStream, shape: float, rate: float) -> float:
    """Gamma(shape, rate) draw.

    Integer shapes up to 64 (the dominant case here) are sampled exactly as
    sums of unit-rate exponentials; other shapes use the Marsaglia-Tsang
    squeeze-rejection method.
    """
    if not (math.isfinite(shape) and shape > 0.0):
        raise ValueError(f"shape must be a positive finite real, got {shape!r}")
    if not (math.isfinite(rate) and rate > 0.0):
        raise ValueError(f"rate must be a positive finite real, got {rate!r}")
    if shape <= _GAMMA_SUM_LIMIT and float(shape).is_integer():
        total = 0.0
        for _ in range(int(shape)):
            total += _exponential(rng)
        return total / rate
    return _gamma_rejection(rng, float(shape)) / rate


def _gamma_rejection(rng: RngStream, shape: float) -> float:
    # Marsaglia-Tsang; shapes below 1 are boosted via G(a) = G(a+1) * U^(1/a).
    boost = 1.0
    a = shape
    if a < 1.0:
        u = rng.next_uniform()
        while u == 0.0:
            u = rng.next_uniform()
        boost = u ** (1.0 / a)
        a += 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _standard_normal(rng)
        v = (1.0 + c * x) ** 3
        if v <= 0.0:
            continue
        u = rng.next_uniform()
        if u < 1.0 - 0.0331 * x**4:
            return boost * d * v
        if u == 0.0 or math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return boost * d * v


def sample_beta(rng: RngStream, a: int, b: int) -> float:
    """Beta(a, b) draw for integer parameters a, b >= 1.

    Sampled as G1 / (G1 + G2) with independent G1 ~ Gamma(a, 1) and
    G2 ~ Gamma(b, 1); the result is clamped to the open interval (0, 1).
    """
    for name, value in (("a", a), ("b", b)):
        if not isinstance(value, (int, np.integer)):
            raise ValueError(f"{name} must be an integer, got {value!r}")
        if value < 1:
            raise ValueError(f"{name} must be at least 1, got {value!r}")
    g1 = sample_gamma(rng, float(a), 1.0)
    g2 = sample_gamma(rng, float(b), 1.0)
    ratio = g1 / (g1 + g2)
    if ratio <= 0.0:
        return math.nextafter(0.0, 1.0)
    if ratio >= 1.0:
        return math.nextafter(1.0, 0.0)
    return ratio
