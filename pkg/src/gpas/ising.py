"""Desk-scale Ising backend with exact enumeration.

Configurations are 0/1 spin assignments on a small graph and the Hamiltonian
H(x) counts the edges whose endpoints agree, so the Gibbs weight of x at
inverse temperature beta is exp(beta * H(x)) and the partition function is
Z(beta) = sum_x exp(beta * H(x)).

At 24 vertices or fewer, fully enumerating the level counts
#{x : H(x) = h} is cheap and gives three exact tools from one histogram: the
partition function at any beta, the exact law of H(X) under Gibbs(beta)
(sampled by cumulative-weight inversion over at most #E + 1 levels), and
hence a :class:`~gpas.tpa.NestedGibbsFamily` with no sampler bias, which is
what makes this backend a clean validation target for the ratio scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SizeExceededError
from .numerics import RngStream
from .tpa import NestedGibbsFamily

__all__ = [
    "ENUMERATION_LIMIT",
    "LatticeGraph",
    "HamiltonianHistogram",
    "build_histogram",
    "partition_function",
    "log_partition_function",
    "sample_hamiltonian",
    "IsingGibbsFamily",
]

ENUMERATION_LIMIT = 24

# Enumeration proceeds in chunks of this many states to bound peak memory.
_CHUNK = 1 << 20


@dataclass(frozen=True)
class LatticeGraph:
    """Undirected simple graph, optionally with grid provenance.

    ``grid`` builds the 4-neighbor width x height lattice with free
    boundary, which has w(h-1) + h(w-1) edges; ``from_edge_file`` reads one
    0-indexed "u v" pair per line.  Vertex counts above
    :data:`ENUMERATION_LIMIT` are rejected, since every consumer here relies
    on exact enumeration.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    width: int | None = None
    height: int | None = None

    def __post_init__(self) -> None:
        if self.vertex_count < 1:
            raise ValueError(f"vertex_count must be positive, got {self.vertex_count!r}")
        if self.vertex_count > ENUMERATION_LIMIT:
            raise SizeExceededError(
                f"{self.vertex_count} vertices exceed the enumeration bound "
                f"of {ENUMERATION_LIMIT}"
            )
        seen: set[tuple[int, int]] = set()
        for u, v in self.edges:
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise ValueError(f"edge ({u}, {v}) has an out-of-range vertex")
            if u == v:
                raise ValueError(f"self-loop at vertex {u} is not allowed")
            pair = (min(u, v), max(u, v))
            if pair in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add(pair)

    @classmethod
    def grid(cls, width: int, height: int) -> "LatticeGraph":
        """4-neighbor width x height lattice with free boundary."""
        if width < 1 or height < 1:
            raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
        edges: list[tuple[int, int]] = []
        for row in range(height):
            for col in range(width):
                v = row * width + col
                if col + 1 < width:
                    edges.append((v, v + 1))
                if row + 1 < height:
                    edges.append((v, v + width))
        return cls(
            vertex_count=width * height,
            edges=tuple(edges),
            width=width,
            height=height,
        )

    @classmethod
    def from_edge_file(cls, path, vertex_count: int | None = None) -> "LatticeGraph":
        """Read one "u v" pair per line (0-indexed; blank and # lines skipped).

        ``vertex_count`` defaults to one past the largest vertex mentioned.
        """
        edges: list[tuple[int, int]] = []
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                parts = stripped.split()
                if len(parts) != 2:
                    raise ValueError(
                        f"{path}:{line_no}: expected 'u v', got {stripped!r}"
                    )
                edges.append((int(parts[0]), int(parts[1])))
        if vertex_count is None:
            if not edges:
                raise ValueError(f"{path}: empty edge list needs an explicit vertex_count")
            vertex_count = 1 + max(max(u, v) for u, v in edges)
        return cls(vertex_count=vertex_count, edges=tuple(edges))


@dataclass(frozen=True)
class HamiltonianHistogram:
    """Exact level counts: counts[h] = #{x in {0,1}^V : H(x) = h}.

    The counts array (length #E + 1) is write-locked after construction and
    the object is safe to share across threads; sampling needs only a
    caller-owned stream.
    """

    vertex_count: int
    counts: np.ndarray
    _levels: np.ndarray = field(init=False, repr=False, compare=False)
    _log_counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise ValueError("counts must be a one-dimensional nonempty array")
        if int(counts.sum()) != 1 << self.vertex_count:
            raise ValueError(
                f"counts sum to {int(counts.sum())}, expected 2^{self.vertex_count}"
            )
        counts.setflags(write=False)
        occupied = np.flatnonzero(counts)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "_levels", occupied.astype(np.float64))
        object.__setattr__(self, "_log_counts", np.log(counts[occupied].astype(np.float64)))

    @property
    def edge_count(self) -> int:
        return self.counts.size - 1


def build_histogram(graph: LatticeGraph) -> HamiltonianHistogram:
    """Exact level counts by enumerating all 2^V configurations.

    States are encoded as the bits of an unsigned integer; per edge, the
    endpoints agree exactly when the XOR of the two bits is 0.  Enumeration
    runs in fixed-size chunks, so peak memory stays small even at the
    24-vertex bound.
    """
    if graph.vertex_count > ENUMERATION_LIMIT:
        raise SizeExceededError(
            f"{graph.vertex_count} vertices exceed the enumeration bound "
            f"of {ENUMERATION_LIMIT}"
        )
    edge_count = len(graph.edges)
    counts = np.zeros(edge_count + 1, dtype=np.int64)
    total = 1 << graph.vertex_count
    for start in range(0, total, _CHUNK):
        states = np.arange(start, min(start + _CHUNK, total), dtype=np.uint32)
        # uint16: a simple graph on 24 vertices can carry up to 276 edges
        disagreements = np.zeros(states.shape, dtype=np.uint16)
        for u, v in graph.edges:
            disagreements += (((states >> u) ^ (states >> v)) & 1).astype(np.uint16)
        agreements = edge_count - disagreements.astype(np.int64)
        counts += np.bincount(agreements, minlength=edge_count + 1)
    return HamiltonianHistogram(vertex_count=graph.vertex_count, counts=counts)


def partition_function(hist: HamiltonianHistogram, beta: float) -> float:
    """Z(beta) = sum_h counts[h] * exp(beta * h), exact up to round-off."""
    levels = np.arange(hist.counts.size, dtype=np.float64)
    return float(np.sum(hist.counts * np.exp(beta * levels)))


def log_partition_function(hist: HamiltonianHistogram, beta: float) -> float:
    """ln Z(beta), evaluated stably in log space (safe at large beta * #E)."""
    log_weights = hist._log_counts + beta * hist._levels
    peak = float(log_weights.max())
    return peak + float(np.log(np.sum(np.exp(log_weights - peak))))


def sample_hamiltonian(hist: HamiltonianHistogram, beta: float, rng: RngStream) -> int:
    """Draw H(X) for X ~ Gibbs(beta): level h w.p. counts[h] e^{beta h} / Z(beta).

    Cumulative-sum inversion over the occupied levels, with weights
    exponentiated against the peak log weight so no beta overflows.
    """
    log_weights = hist._log_counts + beta * hist._levels
    weights = np.exp(log_weights - log_weights.max())
    cumulative = np.cumsum(weights)
    u = rng.next_uniform() * cumulative[-1]
    index = int(np.searchsorted(cumulative, u, side="right"))
    if index >= cumulative.size:
        index = cumulative.size - 1
    return int(hist._levels[index])


@dataclass(frozen=True)
class IsingGibbsFamily(NestedGibbsFamily):
    """Level-histogram Gibbs family for the ratio Z(beta_outer)/Z(beta_inner).

    Satisfies the nested-family contract with H_max = #E; the histogram is
    computed once per graph and shared across all beta values.
    """

    histogram: HamiltonianHistogram
    beta_outer: float = 1.0
    beta_inner: float = 0.0

    def sample_hamiltonian(self, beta: float, rng: RngStream) -> float:
        return float(sample_hamiltonian(self.histogram, beta, rng))
