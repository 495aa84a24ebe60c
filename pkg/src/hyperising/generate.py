"""Synthetic model generation and external-data ingestion.

Synthetic supports come from a configuration-model d-regular k-uniform
hypergraph: every vertex gets d stubs, the stub list is shuffled and cut
into groups of k, and the whole pairing is rejected if any group repeats a
vertex or any edge appears twice.  Coefficients are a fixed magnitude with
all-plus or random signs.  The sample-size law

    n = ceil(alpha * (k!)^8 * d^3 * ln C(p-1, k-1) / divisor)

maps a difficulty knob alpha to a sample count; divisor 6e6 matches the
recovery-rate sweeps and 1.5e6 the exact-recovery sweeps.

Ingestion: triangle supports from a pairwise edge list, and binarization
of real-valued time series by first-difference signs (rows where any node
has a zero difference are dropped, then every ``thin``-th surviving row is
kept, counting from the thin-th).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionError, EmptyResultError, GenerationError,
                     ParseError)
from .sampler import SampleMatrix
from .tensor import InteractionTensor
from .util import MAX_ORDER, factorial, log_binomial

__all__ = [
    "DIVISOR_RATE",
    "DIVISOR_SUCCESS",
    "HypergraphSupport",
    "CoefficientScheme",
    "regular_hypergraph",
    "assign_coefficients",
    "scaling_n",
    "triangles_from_graph",
    "binarize_series",
    "read_edge_list",
    "read_series_csv",
]

DIVISOR_RATE = 6e6
DIVISOR_SUCCESS = 1.5e6


@dataclass(frozen=True)
class HypergraphSupport:
    """A k-uniform hyperedge set on p vertices (no coefficients yet)."""

    p: int
    k: int
    edges: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if len(e) != self.k or any(a >= b for a, b in zip(e, e[1:])):
                raise ValueError(f"edge {e} is not a sorted {self.k}-tuple")
            if e[0] < 0 or e[-1] >= self.p:
                raise ValueError(f"edge {e} has vertices outside [0, {self.p})")
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)


@dataclass(frozen=True)
class CoefficientScheme:
    """Magnitude and sign assignment for generated edges.

    ``magnitude`` defaults to 0.5 / k! (so the per-edge energy contribution
    k! * J is 0.5).  ``sign_mode`` is ``"all_plus"`` or ``"rademacher"``.
    """

    magnitude: float | None = None
    sign_mode: str = "all_plus"
    seed: int = 0

    def __post_init__(self):
        if self.magnitude is not None and not self.magnitude > 0:
            raise ValueError("magnitude must be positive")
        if self.sign_mode not in ("all_plus", "rademacher"):
            raise ValueError("sign_mode must be 'all_plus' or 'rademacher'")


def regular_hypergraph(p: int, k: int, d: int, seed: int,
                       max_attempts: int = 1000) -> HypergraphSupport:
    """d-regular k-uniform support by rejection-sampled stub pairing.

    Requires k | p*d.  Each attempt shuffles the p*d stubs and slices them
    into edges; an attempt is rejected if any edge has a repeated vertex or
    duplicates another edge.  Raises after ``max_attempts`` rejections.
    """
    if k < 2 or k > min(p - 1, MAX_ORDER):
        raise ValueError(f"need 2 <= k <= min(p-1, {MAX_ORDER}), got k={k}, p={p}")
    if d < 1:
        raise ValueError(f"degree d must be >= 1, got {d}")
    if (p * d) % k != 0:
        raise ValueError(f"k={k} must divide p*d={p * d} for a d-regular support")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(p), d)
    for _ in range(max_attempts):
        rng.shuffle(stubs)
        groups = stubs.reshape(-1, k)
        edges = []
        ok = True
        seen = set()
        for g in groups:
            e = tuple(sorted(int(v) for v in g))
            if len(set(e)) != k or e in seen:
                ok = False
                break
            seen.add(e)
            edges.append(e)
        if ok:
            return HypergraphSupport(p=p, k=k, edges=tuple(sorted(edges)))
    raise GenerationError(
        f"no valid {d}-regular {k}-uniform pairing on {p} vertices after "
        f"{max_attempts} attempts")


def assign_coefficients(support: HypergraphSupport,
                        scheme: CoefficientScheme | None = None
                        ) -> InteractionTensor:
    """Turn a support into a model using the scheme's magnitude and signs."""
    scheme = scheme or CoefficientScheme()
    mag = (scheme.magnitude if scheme.magnitude is not None
           else 0.5 / factorial(support.k))
    if scheme.sign_mode == "rademacher":
        rng = np.random.default_rng(scheme.seed)
        signs = 2 * rng.integers(0, 2, size=len(support.edges)) - 1
    else:
        signs = np.ones(len(support.edges), dtype=np.int64)
    edges = {e: float(mag * s) for e, s in zip(support.edges, signs)}
    return InteractionTensor(support.p, support.k, edges)


def scaling_n(alpha: float, p: int, k: int, d: int,
              divisor: float = DIVISOR_RATE) -> int:
    """Sample count ceil(alpha * (k!)^8 * d^3 * ln C(p-1,k-1) / divisor)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if divisor <= 0:
        raise ValueError("divisor must be positive")
    if d < 1:
        raise ValueError("degree d must be >= 1")
    if not 2 <= k <= p - 1:
        raise ValueError(f"need 2 <= k <= p-1, got k={k}, p={p}")
    kfact = factorial(k)
    raw = alpha * kfact**8 * d**3 * log_binomial(p - 1, k - 1) / divisor
    if not math.isfinite(raw):
        raise ValueError("sample-size law overflowed; reduce k or d")
    return int(math.ceil(raw))


def triangles_from_graph(edge_list) -> HypergraphSupport:
    """All triangles of a pairwise graph as a 3-uniform support.

    Vertices are taken as 0..max(vertex); an empty edge list yields an
    empty support on 0 vertices.
    """
    adj: dict[int, set[int]] = {}
    pairs = set()
    for u, v in edge_list:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if u < 0 or v < 0:
            raise ValueError(f"negative vertex in edge ({u}, {v})")
        a, b = min(u, v), max(u, v)
        pairs.add((a, b))
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    if not pairs:
        return HypergraphSupport(p=0, k=3, edges=())
    p = max(max(a, b) for a, b in pairs) + 1
    triangles = []
    for a, b in sorted(pairs):
        common = adj[a] & adj[b]
        for w in sorted(common):
            if w > b:
                triangles.append((a, b, w))
    return HypergraphSupport(p=p, k=3, edges=tuple(sorted(triangles)))


def binarize_series(series, thin: int = 3) -> SampleMatrix:
    """Sign of first differences, zero-rows dropped, then thinned.

    ``series`` is either a (T, p) array (rows are time points) or a list of
    p equal-length per-node series.  A time step is dropped when any node's
    difference is exactly zero.  Of the surviving rows, every ``thin``-th is
    kept starting with the thin-th (so a strictly monotone series of length
    T yields floor((T-1)/thin) rows).
    """
    if thin < 1:
        raise ValueError("thin must be >= 1")
    if isinstance(series, (list, tuple)) and series and np.ndim(series[0]) == 1:
        lengths = {len(col) for col in series}
        if len(lengths) != 1:
            raise DimensionError(
                f"node series have mismatched lengths {sorted(lengths)}")
        arr = np.column_stack([np.asarray(col, dtype=np.float64)
                               for col in series])
    else:
        arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"series must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 time points to difference")
    diffs = np.diff(arr, axis=0)
    keep = np.all(diffs != 0.0, axis=1)
    signs = np.sign(diffs[keep]).astype(np.int8)
    thinned = signs[thin - 1::thin]
    if thinned.shape[0] == 0:
        raise EmptyResultError(
            "no rows survive zero-difference filtering and thinning")
    return SampleMatrix(thinned)


def read_edge_list(path) -> list[tuple[int, int]]:
    """Parse a 'u v' per line pairwise edge list; '#' lines are comments."""
    edges = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'u v', got {text!r}", line=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno)
            edges.append((u, v))
    return edges


def read_series_csv(path) -> np.ndarray:
    """Read a CSV with one column per node into a (T, p) float array.

    A non-numeric first row is treated as a header and skipped.
    """
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = [c.strip() for c in text.split(",")]
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(
                    f"expected {width} columns, got {len(parts)}", line=lineno)
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ParseError(f"non-numeric value in {parts!r}", line=lineno)
    if not rows:
        raise ParseError("no numeric rows in series file", line=1)
    return np.array(rows, dtype=np.float64)
