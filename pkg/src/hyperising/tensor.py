"""Symmetric k-spin interaction tensors and their exact small-p oracles.

A model on p spins x in {-1,+1}^p with interaction order k is stored as a
sparse collection of hyperedges: sorted k-tuples of distinct vertices with a
nonzero real coefficient.  The underlying symmetric tensor assigns that
coefficient to every permutation of the tuple and zero whenever an index
repeats, so sums over ordered index tuples collapse to sums over edges times
factorials:

    energy(x)      = k! * sum_e J_e * prod_{v in e} x_v
    local_field(r) = (k-1)! * sum_{e containing r} J_e * prod_{v in e, v != r} x_v

Exact enumeration routines (distribution, moments) refuse to run beyond
``ENUMERATION_CAP`` vertices rather than silently thrash.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, ParseError
from .util import MAX_ORDER, factorial

__all__ = [
    "ENUMERATION_CAP",
    "InteractionTensor",
    "ExactDistribution",
    "hamiltonian",
    "local_field",
    "conditional_prob",
    "exact_distribution",
    "exact_moment",
    "degrees",
    "state_matrix",
    "config_to_index",
    "index_to_config",
    "validate_spins",
    "save_tensor",
    "load_tensor",
]

# Exhaustive state enumeration is limited to this many vertices by default;
# 2^20 states times feature counts is the most a desk machine tolerates.
ENUMERATION_CAP = 20


class InteractionTensor:
    """Sparse symmetric interaction tensor of uniform order k on p vertices.

    Parameters
    ----------
    p : int
        Number of vertices (spins), p >= 3.
    k : int
        Interaction order, 2 <= k <= min(p - 1, 20).
    edges : mapping
        Sorted k-tuples of distinct vertex indices in [0, p) mapped to
        finite nonzero coefficients.  An empty mapping is the zero model.

    Instances are treated as immutable after construction; the per-vertex
    incidence lists are precomputed once.
    """

    __slots__ = ("p", "k", "edges", "incidence")

    def __init__(self, p: int, k: int, edges=None):
        if not isinstance(p, int) or not isinstance(k, int):
            raise ValueError("p and k must be ints")
        if k < 2:
            raise ValueError(f"interaction order k={k} must be at least 2")
        if k > MAX_ORDER:
            raise ValueError(f"interaction order k={k} exceeds the cap {MAX_ORDER}")
        if p < k + 1:
            raise ValueError(f"need p >= k + 1 distinct vertices, got p={p}, k={k}")
        if p < 4:
            warnings.warn(
                "p < 4 is outside the regime the recovery guarantees cover; "
                "estimation still runs", stacklevel=2)
        clean: dict[tuple[int, ...], float] = {}
        for key, value in (edges or {}).items():
            edge = tuple(key)
            if len(edge) != k:
                raise ValueError(f"edge {edge} does not have {k} vertices")
            if any(not isinstance(v, (int, np.integer)) for v in edge):
                raise ValueError(f"edge {edge} has non-integer vertices")
            edge = tuple(int(v) for v in edge)
            if any(a >= b for a, b in zip(edge, edge[1:])):
                raise ValueError(f"edge {edge} is not strictly increasing")
            if edge[0] < 0 or edge[-1] >= p:
                raise ValueError(f"edge {edge} has vertices outside [0, {p})")
            coeff = float(value)
            if not math.isfinite(coeff) or coeff == 0.0:
                raise ValueError(f"edge {edge} has invalid coefficient {value!r}")
            clean[edge] = coeff
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "edges", clean)
        incidence: list[list[tuple[int, ...]]] = [[] for _ in range(p)]
        for edge in clean:
            for v in edge:
                incidence[v].append(edge)
        object.__setattr__(self, "incidence",
                           tuple(tuple(lst) for lst in incidence))

    def __setattr__(self, name, value):
        raise AttributeError("InteractionTensor is immutable")

    def __eq__(self, other):
        if not isinstance(other, InteractionTensor):
            return NotImplemented
        return (self.p, self.k, self.edges) == (other.p, other.k, other.edges)

    def __repr__(self):
        return (f"InteractionTensor(p={self.p}, k={self.k}, "
                f"{len(self.edges)} edges)")

    @classmethod
    def zero(cls, p: int, k: int) -> "InteractionTensor":
        """The model with no interactions (uniform distribution)."""
        return cls(p, k, {})


@dataclass(frozen=True)
class ExactDistribution:
    """Full probability table over all 2^p spin configurations.

    State indexing: bit b of the state index is (spin_b + 1) / 2, i.e. a
    set bit means spin +1.
    """

    p: int
    probs: np.ndarray
    log_z: float

    def prob_of(self, x: np.ndarray) -> float:
        return float(self.probs[config_to_index(x)])


def validate_spins(x, p: int) -> np.ndarray:
    """Check that x is a length-p vector over {-1,+1}; return it as int8."""
    arr = np.asarray(x)
    if arr.shape != (p,):
        raise DimensionError(f"expected a length-{p} spin vector, got shape {arr.shape}")
    if not np.all(np.abs(arr) == 1):
        raise ValueError("spin entries must be -1 or +1")
    return arr.astype(np.int8, copy=False)


def hamiltonian(tensor: InteractionTensor, x) -> float:
    """Energy k! * sum_e J_e * prod_{v in e} x_v of configuration x."""
    xs = validate_spins(x, tensor.p)
    kfact = factorial(tensor.k)
    total = 0.0
    for edge, coeff in tensor.edges.items():
        prod = 1
        for v in edge:
            prod *= int(xs[v])
        total += coeff * prod
    return kfact * total


def local_field(tensor: InteractionTensor, x, r: int) -> float:
    """(k-1)! * sum over edges through r of J_e times the other spins' product."""
    xs = validate_spins(x, tensor.p)
    if not 0 <= r < tensor.p:
        raise ValueError(f"vertex {r} outside [0, {tensor.p})")
    km1fact = factorial(tensor.k - 1)
    total = 0.0
    for edge in tensor.incidence[r]:
        prod = 1
        for v in edge:
            if v != r:
                prod *= int(xs[v])
        total += tensor.edges[edge] * prod
    return km1fact * total


def _sigmoid(t: float) -> float:
    # Stable logistic: never exponentiates a positive argument.
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def conditional_prob(tensor: InteractionTensor, x, r: int, s: int) -> float:
    """P(X_r = s | X_others = x_others) = logistic(2k * s * local_field).

    The two values for s = +1 and s = -1 sum to 1.0 exactly because the
    minus branch is computed as the complement.  Stable for |k * field|
    into the hundreds.
    """
    if s not in (-1, 1):
        raise ValueError(f"spin value s must be -1 or +1, got {s!r}")
    m = local_field(tensor, x, r)
    p_plus = _sigmoid(2.0 * tensor.k * m)
    return p_plus if s == 1 else 1.0 - p_plus


def state_matrix(p: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All 2^p configurations as a (2^p, p) int8 matrix, index bit b -> spin b."""
    if p > cap:
        raise CapacityError(
            f"state enumeration needs 2^{p} configurations; cap is p <= {cap}")
    idx = np.arange(1 << p, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(p, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def config_to_index(x) -> int:
    arr = np.asarray(x)
    bits = (arr > 0).astype(np.int64)
    return int(bits @ (1 << np.arange(arr.shape[0], dtype=np.int64)))


def index_to_config(i: int, p: int) -> np.ndarray:
    bits = (i >> np.arange(p, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def _energies(tensor: InteractionTensor, states: np.ndarray) -> np.ndarray:
    kfact = factorial(tensor.k)
    total = np.zeros(states.shape[0])
    for edge, coeff in tensor.edges.items():
        prod = states[:, edge[0]].astype(np.float64)
        for v in edge[1:]:
            prod = prod * states[:, v]
        total += coeff * prod
    return kfact * total


def exact_distribution(tensor: InteractionTensor,
                       cap: int = ENUMERATION_CAP) -> ExactDistribution:
    """Enumerate all 2^p states and normalize exp(energy).

    Uses a max-shift so the partition sum never overflows.
    """
    states = state_matrix(tensor.p, cap=cap)
    h = _energies(tensor, states)
    shift = float(h.max())
    w = np.exp(h - shift)
    z = float(w.sum())
    probs = w / z
    return ExactDistribution(p=tensor.p, probs=probs, log_z=math.log(z) + shift)


def exact_moment(tensor: InteractionTensor, subset,
                 cap: int = ENUMERATION_CAP,
                 dist: ExactDistribution | None = None) -> float:
    """E[prod_{v in subset} X_v] under the exact distribution.

    An empty subset gives 1.0.  Pass a precomputed ``dist`` to amortize
    enumeration across many moments.
    """
    sub = tuple(int(v) for v in subset)
    if len(set(sub)) != len(sub):
        raise ValueError(f"subset {sub} has repeated vertices")
    if any(v < 0 or v >= tensor.p for v in sub):
        raise ValueError(f"subset {sub} has vertices outside [0, {tensor.p})")
    if not sub:
        return 1.0
    if dist is None:
        dist = exact_distribution(tensor, cap=cap)
    states = state_matrix(tensor.p, cap=max(cap, tensor.p))
    prod = states[:, sub[0]].astype(np.float64)
    for v in sub[1:]:
        prod = prod * states[:, v]
    return float(dist.probs @ prod)


def degrees(tensor: InteractionTensor) -> tuple[np.ndarray, int]:
    """Per-vertex edge counts and their maximum (0 for the zero model)."""
    d = np.zeros(tensor.p, dtype=np.int64)
    for edge in tensor.edges:
        for v in edge:
            d[v] += 1
    return d, int(d.max()) if tensor.p else 0


# ---------------------------------------------------------------------------
# Text format: "#tensor p=<p> k=<k>" header, then "v1 ... vk coefficient".

def save_tensor(tensor: InteractionTensor, path) -> None:
    lines = [f"#tensor p={tensor.p} k={tensor.k}"]
    for edge in sorted(tensor.edges):
        verts = " ".join(str(v) for v in edge)
        lines.append(f"{verts} {tensor.edges[edge]!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tensor(path) -> InteractionTensor:
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError("empty tensor file", line=1)
    header = raw[0].strip()
    if not header.startswith("#tensor"):
        raise ParseError("missing '#tensor p=<p> k=<k>' header", line=1)
    fields = dict()
    for token in header.split()[1:]:
        if "=" not in token:
            raise ParseError(f"bad header token {token!r}", line=1)
        name, _, value = token.partition("=")
        fields[name] = value
    try:
        p = int(fields["p"])
        k = int(fields["k"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"header must define integer p and k: {exc}", line=1)
    edges: dict[tuple[int, ...], float] = {}
    for lineno, line in enumerate(raw[1:], start=2):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != k + 1:
            raise ParseError(
                f"expected {k} vertices and a coefficient, got {len(parts)} fields",
                line=lineno)
        try:
            verts = tuple(int(v) for v in parts[:k])
            coeff = float(parts[k])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno)
        if verts in edges:
            raise ParseError(f"duplicate edge {verts}", line=lineno)
        edges[verts] = coeff
    try:
        return InteractionTensor(p, k, edges)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
