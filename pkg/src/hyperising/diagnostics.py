"""Assumption diagnostics: Fisher-information blocks and related constants.

The per-node Fisher weight is

    eta_r(x) = 4 (k!)^2 e^{2a} / (e^{2a} + 1)^2,   a = k * x_r * m_r(x),

an even function of the local field term, so eta depends on x only through
|m_r|.  The node's Fisher matrix Q = E[eta_r(X) X_r X_r^T] over the feature
vector X_r of (k-1)-subset products is split into the block on a reference
support S (usually the true neighborhood) and the cross block:

* smallest eigenvalue of Q_SS        -> dependency constant C_min
* largest eigenvalue of E[X_r X_r^T] -> D_max (matrix-free Lanczos)
* max row sum of |Q_ScS Q_SS^{-1}|   -> incoherence (solve, never invert)

Under independence (no interactions) Q = (k!)^2 I, so C_min = (k!)^2,
D_max = 1, incoherence = 0; those closed forms anchor the tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import CapacityError, DiagnosticError, DimensionError
from .regression import (NodeDesign, SolveOptions, SparseCoefVector,
                         _as_entries, _log2cosh, lambda_theory, pseudo_grad,
                         solve_l1)
from .sampler import SampleMatrix, exact_sample
from .tensor import (ENUMERATION_CAP, InteractionTensor, exact_distribution,
                     local_field, state_matrix, validate_spins)
from .util import factorial, seed_stream

__all__ = [
    "FisherBlocks",
    "UniquenessCertificate",
    "ProbeTable",
    "ProbeRow",
    "DiagnosticsReport",
    "eta",
    "population_fisher",
    "sample_fisher_blocks",
    "dependency_constants",
    "incoherence",
    "score_sup",
    "uniqueness_certificate",
    "concentration_probe",
    "diagnose_node",
]

# Feature-matrix enumeration guard for population routines: states x features.
_POP_ENTRY_CAP = 200_000_000


def eta(tensor: InteractionTensor, x, r: int) -> float:
    """Fisher weight at configuration x for target r; in (0, 4(k!)^2 / 4]."""
    m = local_field(tensor, x, r)
    return _eta_from_field(np.asarray([m]), tensor.k)[0]


def _eta_from_field(m: np.ndarray, k: int) -> np.ndarray:
    # 4 (k!)^2 t / (1+t)^2 with t = exp(-2|k m|); underflow-safe, even in m.
    kfact = factorial(k)
    t = np.exp(-2.0 * np.abs(k * m))
    return 4.0 * kfact * kfact * t / np.square(1.0 + t)


@dataclass
class FisherBlocks:
    """Blocks of one node's Fisher matrix over a reference support S."""

    r: int
    k: int
    support: list[tuple[int, ...]]
    complement: list[tuple[int, ...]]
    q_ss: np.ndarray
    q_scs: np.ndarray
    source: str  # "population" or "sample"


def _node_features(p: int, r: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations([v for v in range(p) if v != r], k - 1))


def _split_support(features, support, r, k):
    feat_set = set(features)
    sup = []
    for f in support:
        t = tuple(int(v) for v in f)
        if t not in feat_set:
            raise ValueError(
                f"support member {t} is not a sorted (k-1)-subset avoiding r={r}")
        sup.append(t)
    if len(set(sup)) != len(sup):
        raise ValueError("support has duplicate members")
    sup_set = set(sup)
    comp = [f for f in features if f not in sup_set]
    return sup, comp


def _feature_columns(x: np.ndarray, feats) -> np.ndarray:
    cols = np.empty((x.shape[0], len(feats)))
    for j, f in enumerate(feats):
        col = x[:, f[0]].copy()
        for v in f[1:]:
            col *= x[:, v]
        cols[:, j] = col
    return cols


def _population_state(tensor: InteractionTensor, r: int, cap: int):
    states = state_matrix(tensor.p, cap=cap).astype(np.float64)
    probs = exact_distribution(tensor, cap=cap).probs
    km1 = factorial(tensor.k - 1)
    m = np.zeros(states.shape[0])
    for e in tensor.incidence[r]:
        prod = np.ones(states.shape[0])
        for v in e:
            if v != r:
                prod *= states[:, v]
        m += tensor.edges[e] * prod
    m *= km1
    return states, probs, _eta_from_field(m, tensor.k)


def population_fisher(tensor: InteractionTensor, r: int,
                      support=None,
                      cap: int = ENUMERATION_CAP) -> FisherBlocks:
    """Exact Fisher blocks by state enumeration.

    ``support`` defaults to the true neighborhood of r (the (k-1)-subsets
    completing its incident edges); pass an explicit list to study other
    partitions, e.g. the saturated support for an interaction-free model.
    """
    if not 0 <= r < tensor.p:
        raise ValueError(f"vertex {r} outside [0, {tensor.p})")
    features = _node_features(tensor.p, r, tensor.k)
    if (1 << tensor.p) * len(features) > _POP_ENTRY_CAP:
        raise CapacityError(
            f"population Fisher needs 2^{tensor.p} x {len(features)} feature "
            f"products, beyond the cap of {_POP_ENTRY_CAP} entries")
    if support is None:
        support = [tuple(v for v in e if v != r) for e in tensor.incidence[r]]
    sup, comp = _split_support(features, support, r, tensor.k)
    states, probs, etas = _population_state(tensor, r, cap)
    w = probs * etas
    z_s = _feature_columns(states, sup)
    ws = w[:, None] * z_s
    q_ss = z_s.T @ ws
    q_scs = np.empty((len(comp), len(sup)))
    block = 4096
    for lo in range(0, len(comp), block):
        hi = min(lo + block, len(comp))
        q_scs[lo:hi] = _feature_columns(states, comp[lo:hi]).T @ ws
    return FisherBlocks(r=r, k=tensor.k, support=sup, complement=comp,
                        q_ss=q_ss, q_scs=q_scs, source="population")


def sample_fisher_blocks(samples: SampleMatrix, r: int, j_ref, support,
                         k: int | None = None) -> FisherBlocks:
    """Empirical Fisher blocks at reference coefficients ``j_ref``.

    ``j_ref`` may be an :class:`InteractionTensor` (typically the truth) or
    a per-node :class:`SparseCoefVector`; eta is evaluated at it sample by
    sample.  The cross block is accumulated in feature blocks, never as a
    full n x C(p-1,k-1) product.
    """
    if isinstance(j_ref, InteractionTensor):
        if k is not None and k != j_ref.k:
            raise ValueError(f"k={k} disagrees with reference tensor k={j_ref.k}")
        k = j_ref.k
    elif isinstance(j_ref, SparseCoefVector):
        if k is not None and k != j_ref.k:
            raise ValueError(f"k={k} disagrees with reference k={j_ref.k}")
        k = j_ref.k
    if k is None:
        raise ValueError("interaction order k is required")
    if samples.n < 1:
        raise DimensionError("need at least one sample")
    p = samples.p
    if not 0 <= r < p:
        raise ValueError(f"vertex {r} outside [0, {p})")
    entries = _as_entries(j_ref, r, k)
    features = _node_features(p, r, k)
    sup, comp = _split_support(features, support, r, k)
    x = samples.data.astype(np.float64)
    km1 = factorial(k - 1)
    m = np.zeros(samples.n)
    for f, value in entries.items():
        col = x[:, f[0]].copy()
        for v in f[1:]:
            col *= x[:, v]
        m += value * col
    m *= km1
    w = _eta_from_field(m, k) / samples.n
    z_s = _feature_columns(x, sup)
    ws = w[:, None] * z_s
    q_ss = z_s.T @ ws
    q_scs = np.empty((len(comp), len(sup)))
    block = 4096
    for lo in range(0, len(comp), block):
        hi = min(lo + block, len(comp))
        q_scs[lo:hi] = _feature_columns(x, comp[lo:hi]).T @ ws
    return FisherBlocks(r=r, k=k, support=sup, complement=comp,
                        q_ss=q_ss, q_scs=q_scs, source="sample")


class _PopulationCovariance:
    """Matrix-free E[X_r X_r^T] for the exact distribution of a tensor."""

    def __init__(self, tensor: InteractionTensor, r: int,
                 cap: int = ENUMERATION_CAP):
        self.features = _node_features(tensor.p, r, tensor.k)
        if (1 << tensor.p) * len(self.features) > _POP_ENTRY_CAP:
            raise CapacityError(
                f"population covariance needs 2^{tensor.p} x "
                f"{len(self.features)} feature products, beyond the cap of "
                f"{_POP_ENTRY_CAP} entries")
        states = state_matrix(tensor.p, cap=cap).astype(np.float64)
        self.z = _feature_columns(states, self.features)
        self.probs = exact_distribution(tensor, cap=cap).probs

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.z.T @ (self.probs * (self.z @ v))


def _implicit_max_eig(apply_fn, dim: int, tol: float, max_iters: int) -> float:
    """Largest eigenvalue of an implicit PSD operator, matrix-free.

    Lanczos iteration rather than plain power iteration: when the top two
    eigenvalues nearly tie (common for sample second-moment matrices of
    +-1 features), the power-iterate residual plateaus at the gap and
    never reaches a fixed tolerance, while the Krylov solve is unaffected.
    Only operator-vector products are required either way.
    """
    if dim == 1:
        return float(apply_fn(np.ones(1))[0])
    op = LinearOperator((dim, dim), matvec=apply_fn, dtype=np.float64)
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(dim)
    try:
        vals = eigsh(op, k=1, which="LA", tol=tol, maxiter=max_iters,
                     v0=v0, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        partial = np.asarray(exc.eigenvalues, dtype=np.float64)
        resid = float("nan")
        if partial.size and exc.eigenvectors is not None \
                and np.asarray(exc.eigenvectors).size:
            vec = np.asarray(exc.eigenvectors)[:, -1]
            resid = float(np.linalg.norm(apply_fn(vec) - partial[-1] * vec))
        raise DiagnosticError(
            f"eigenvalue iteration did not converge in {max_iters} "
            f"iterations (residual {resid:.3e})", residual=resid) from exc
    return float(vals[0])


def dependency_constants(blocks: FisherBlocks,
                         samples: SampleMatrix | None = None,
                         tensor: InteractionTensor | None = None,
                         tol: float = 1e-8,
                         max_iters: int = 10_000) -> tuple[float, float]:
    """(C_min, D_max) for the node described by ``blocks``.

    C_min is the smallest eigenvalue of Q_SS.  D_max is the largest
    eigenvalue of the feature second-moment matrix, estimated matrix-free
    from ``samples`` (empirical) or ``tensor`` (exact distribution),
    whichever is supplied.
    """
    if blocks.q_ss.shape[0] == 0:
        raise ValueError("Q_SS is empty; dependency constants need a support")
    c_min = float(np.linalg.eigvalsh(blocks.q_ss)[0])
    if (samples is None) == (tensor is None):
        raise ValueError("supply exactly one of samples= or tensor= for D_max")
    if samples is not None:
        design = NodeDesign(samples, blocks.r, blocks.k)
        n = samples.n
        d_max = _implicit_max_eig(
            lambda v: design.rmatvec(design.matvec(v)) / n,
            design.n_features, tol, max_iters)
    else:
        cov = _PopulationCovariance(tensor, blocks.r)
        d_max = _implicit_max_eig(cov.apply, len(cov.features), tol, max_iters)
    return c_min, d_max


def incoherence(blocks: FisherBlocks) -> float:
    """Max absolute row sum of Q_ScS Q_SS^{-1}; 0 for an empty block.

    Solved through a Cholesky factorization of Q_SS; refuses when Q_SS is
    numerically singular instead of returning garbage.
    """
    d = blocks.q_ss.shape[0]
    if d == 0 or blocks.q_scs.shape[0] == 0:
        return 0.0
    eig_min = float(np.linalg.eigvalsh(blocks.q_ss)[0])
    if eig_min < 1e-12:
        raise DiagnosticError(
            f"Q_SS is numerically singular (min eigenvalue {eig_min:.3e}); "
            "incoherence is not defined", residual=eig_min)
    factor = cho_factor(blocks.q_ss, lower=True)
    m = cho_solve(factor, blocks.q_scs.T)  # (d, N-d): Q_SS^{-1} Q_ScS^T
    return float(np.abs(m).sum(axis=0).max())


def score_sup(samples: SampleMatrix, r: int, j_truth,
              k: int | None = None,
              design: NodeDesign | None = None) -> float:
    """Sup norm of the empirical score W = -grad pseudo_loss at the truth."""
    if k is None and isinstance(j_truth, (InteractionTensor, SparseCoefVector)):
        k = j_truth.k
    g = pseudo_grad(j_truth, samples, r, k, design=design)
    return float(np.max(np.abs(g))) if g.size else 0.0


class UniquenessCertificate(NamedTuple):
    dual_strict: bool
    hessian_pd: bool


def uniqueness_certificate(coef: SparseCoefVector, samples: SampleMatrix,
                           r: int, lam: float,
                           k: int | None = None) -> UniquenessCertificate:
    """Check the two sufficient conditions for a unique l1 minimizer.

    dual_strict: every inactive coordinate of z_hat = -grad/lam stays
    strictly inside (-1, 1) (margin 1e-8).  hessian_pd: the sample Hessian
    restricted to the active set has smallest eigenvalue > 1e-10.  Both are
    vacuously true when the relevant index set is empty.
    """
    if lam <= 0:
        raise ValueError("the certificate is defined for lam > 0 only")
    if k is None:
        if isinstance(coef, SparseCoefVector):
            k = coef.k
        else:
            raise ValueError("interaction order k is required")
    entries = _as_entries(coef, r, k)
    p = samples.p
    features = _node_features(p, r, k)
    g = pseudo_grad(coef, samples, r, k)
    z_hat = -g / lam
    active_idx = {f: j for j, f in enumerate(features)}
    active = np.zeros(len(features), dtype=bool)
    for f in entries:
        active[active_idx[tuple(f)]] = True
    inactive_vals = np.abs(z_hat[~active])
    dual_strict = bool(inactive_vals.size == 0
                       or inactive_vals.max() < 1.0 - 1e-8)
    if not entries:
        hessian_pd = True
    else:
        sup = sorted(entries)
        x = samples.data.astype(np.float64)
        km1 = factorial(k - 1)
        m = np.zeros(samples.n)
        for f, value in entries.items():
            col = x[:, f[0]].copy()
            for v in f[1:]:
                col *= x[:, v]
            m += value * col
        m *= km1
        w = _eta_from_field(m, k) / samples.n
        z_s = _feature_columns(x, sup)
        h_ss = z_s.T @ (w[:, None] * z_s)
        hessian_pd = bool(np.linalg.eigvalsh(h_ss)[0] > 1e-10)
    return UniquenessCertificate(dual_strict=dual_strict, hessian_pd=hessian_pd)


@dataclass
class ProbeRow:
    n: int
    c_min: float
    d_max: float
    incoherence: float
    dev_c_min: float
    dev_d_max: float
    dev_incoherence: float


@dataclass
class ProbeTable:
    """Sample-size ladder of Fisher constants against their population values."""

    r: int
    population: dict
    rows: list[ProbeRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["# concentration-probe v1",
                 "source,n,c_min,d_max,incoherence,dev_c_min,dev_d_max,"
                 "dev_incoherence"]
        pop = self.population
        lines.append("population,,"
                     f"{pop['c_min']!r},{pop['d_max']!r},"
                     f"{pop['incoherence']!r},0.0,0.0,0.0")
        for row in self.rows:
            lines.append(
                f"sample,{row.n},{row.c_min!r},{row.d_max!r},"
                f"{row.incoherence!r},{row.dev_c_min!r},{row.dev_d_max!r},"
                f"{row.dev_incoherence!r}")
        return "\n".join(lines) + "\n"


def _support_estimate(samples: SampleMatrix, r: int, support, k: int,
                      max_iters: int = 50, tol: float = 1e-10) -> dict:
    """Support-restricted logistic fit used as the probe's eta reference.

    Damped Newton on the node's conditional log loss over the support
    features only, with a one-pseudo-observation ridge (weight 1/n) so the
    minimizer stays finite when the restricted data happen to be separable.
    Returns a feature -> coefficient mapping on the model's natural scale.
    """
    x = samples.data.astype(np.float64)
    z = _feature_columns(x, support)
    y = x[:, r]
    kfact = float(factorial(k))
    n = samples.n
    ridge = 1.0 / n
    c = np.zeros(len(support))

    def objective(vec):
        a = kfact * (z @ vec)
        return float(np.mean(_log2cosh(a) - y * a) + 0.5 * ridge * vec @ vec)

    current = objective(c)
    for _ in range(max_iters):
        a = kfact * (z @ c)
        g = (kfact / n) * (z.T @ (np.tanh(a) - y)) + ridge * c
        if float(np.max(np.abs(g))) < tol:
            break
        w = _eta_from_field(a / k, k) / n
        h = z.T @ (w[:, None] * z)
        h[np.diag_indices_from(h)] += ridge
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(30):
            cand = c - scale * step
            val = objective(cand)
            if val <= current:
                break
            scale *= 0.5
        else:
            break
        c, current = cand, val
    return {f: float(v) for f, v in zip(support, c)}


def concentration_probe(tensor: InteractionTensor, r: int, n_grid,
                        seed: int = 0) -> ProbeTable:
    """Empirical Fisher constants at each n in ``n_grid`` vs population.

    Samples are i.i.d. from the exact distribution (so p must sit within
    the enumeration cap) at seeds derived from ``seed``.  The sample rows
    evaluate eta at coefficients re-estimated from the same draw by a
    support-restricted logistic fit, so each row is computable without the
    true coefficients and its deviation reflects the estimation error at
    that n; the population row uses the exact model.  Requires vertex r to
    have at least one incident edge, otherwise C_min is undefined.
    """
    grid = [int(n) for n in n_grid]
    if not grid or any(n < 1 for n in grid):
        raise ValueError("n_grid must be nonempty positive ints")
    if not tensor.incidence[r]:
        raise ValueError(
            f"vertex {r} has no incident edges; the probe needs a support")
    pop_blocks = population_fisher(tensor, r)
    c_pop, d_pop = dependency_constants(pop_blocks, tensor=tensor)
    inc_pop = incoherence(pop_blocks)
    table = ProbeTable(r=r, population={
        "c_min": c_pop, "d_max": d_pop, "incoherence": inc_pop})
    support = pop_blocks.support
    for n, child in zip(grid, seed_stream(seed, len(grid))):
        samples = exact_sample(tensor, n, child)
        entries = _support_estimate(samples, r, support, tensor.k)
        j_ref = SparseCoefVector(r=r, k=tensor.k, entries=entries)
        blocks = sample_fisher_blocks(samples, r, j_ref, support)
        c_hat, d_hat = dependency_constants(blocks, samples=samples)
        inc_hat = incoherence(blocks)
        table.rows.append(ProbeRow(
            n=n, c_min=c_hat, d_max=d_hat, incoherence=inc_hat,
            dev_c_min=abs(c_hat - c_pop), dev_d_max=abs(d_hat - d_pop),
            dev_incoherence=abs(inc_hat - inc_pop)))
    return table


@dataclass
class DiagnosticsReport:
    """Per-node summary of all assumption diagnostics."""

    r: int
    c_min: float
    d_max: float
    incoherence: float
    alpha_implied: float | None
    w_sup: float
    lam: float
    dual_strict: bool
    hessian_pd: bool
    n: int

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "c_min": self.c_min,
            "d_max": self.d_max,
            "incoherence": self.incoherence,
            "alpha_implied": self.alpha_implied,
            "w_sup": self.w_sup,
            "lambda": self.lam,
            "dual_strict": self.dual_strict,
            "hessian_pd": self.hessian_pd,
            "n": self.n,
        }


def diagnose_node(tensor: InteractionTensor, r: int, n: int = 10_000,
                  seed: int = 0, lam: float | None = None,
                  opts: SolveOptions | None = None) -> DiagnosticsReport:
    """Population constants plus sample score/uniqueness checks for node r.

    Draws n exact samples, evaluates the score sup norm at the truth, fits
    the node at ``lam`` (default: the theory schedule at the implied
    incoherence level) and certifies uniqueness of that solution.
    """
    blocks = population_fisher(tensor, r)
    if blocks.q_ss.shape[0] == 0:
        raise ValueError(
            f"vertex {r} has no incident edges; diagnostics need a support")
    c_min, d_max = dependency_constants(blocks, tensor=tensor)
    inc = incoherence(blocks)
    alpha_implied = 1.0 - inc if inc < 1.0 else None
    samples = exact_sample(tensor, n, seed)
    w_sup = score_sup(samples, r, tensor)
    if lam is None:
        alpha = alpha_implied if alpha_implied and 0 < alpha_implied <= 1 else 1.0
        lam = lambda_theory(n, tensor.p, tensor.k, alpha)
    coef = solve_l1(samples, r, lam, k=tensor.k, opts=opts)
    cert = uniqueness_certificate(coef, samples, r, lam)
    return DiagnosticsReport(
        r=r, c_min=c_min, d_max=d_max, incoherence=inc,
        alpha_implied=alpha_implied, w_sup=w_sup, lam=lam,
        dual_strict=cert.dual_strict, hessian_pd=cert.hessian_pd, n=n)
