"""Node-wise l1-regularized logistic (pseudolikelihood) regression.

For a target vertex r the conditional law of x_r given the rest is logistic
in the products z_e' = prod_{v in e'} x_v over all sorted (k-1)-subsets e'
of the other vertices.  The per-node program is

    minimize  (1/n) sum_i [log 2cosh(k * m_r(x_i)) - k * x_ir * m_r(x_i)]
              + lam * ||J_r||_1,

where m_r is the local field induced by the coefficient vector J_r.  The
solver reparameterizes theta = 2 * k! * J_r, which turns the data-fit term
into the textbook logistic loss with +-1 features and the penalty into
(lam / (2 k!)) * ||theta||_1, and runs accelerated proximal gradient
(FISTA) with backtracking and a monotone restart.  Coefficients with
|J| <= zero_threshold are snapped to zero before the KKT residual is
certified, so the returned vector itself satisfies the stopping rule.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import CapacityError, DimensionError, SolverError
from .sampler import SampleMatrix
from .tensor import InteractionTensor
from .util import factorial, log_binomial

__all__ = [
    "FEATURE_BUDGET",
    "DENSE_ENTRY_CAP",
    "DEFAULT_C_GRID",
    "NodeDesign",
    "SparseCoefVector",
    "SolveInfo",
    "SolveOptions",
    "BicScore",
    "BicSelection",
    "node_coefficients",
    "pseudo_loss",
    "pseudo_grad",
    "solve_l1",
    "kkt_residual",
    "lambda_theory",
    "lambda_practice",
    "bic_select",
]

# Full feature enumeration is refused beyond this many (k-1)-subsets.
FEATURE_BUDGET = 200_000
# Above this many matrix entries the design is never materialized densely;
# products are streamed in feature blocks instead.
DENSE_ENTRY_CAP = 50_000_000

DEFAULT_C_GRID = tuple(round(0.1 * i, 1) for i in range(1, 21))


class NodeDesign:
    """Feature layout for one regression target r.

    Features are the sorted (k-1)-subsets of [0,p) \\ {r} in lexicographic
    order; feature j of sample i is the product of those spins.  The design
    is materialized as a dense float matrix when it fits under
    ``dense_cap`` entries and streamed in blocks otherwise.
    """

    def __init__(self, samples: SampleMatrix, r: int, k: int,
                 feature_budget: int = FEATURE_BUDGET,
                 dense_cap: int = DENSE_ENTRY_CAP):
        p = samples.p
        if not 0 <= r < p:
            raise ValueError(f"target vertex {r} outside [0, {p})")
        if not 2 <= k <= p - 1:
            raise ValueError(f"order k={k} must satisfy 2 <= k <= p-1={p - 1}")
        count = math.comb(p - 1, k - 1)
        if count > feature_budget:
            raise CapacityError(
                f"C({p - 1},{k - 1}) = {count} features exceeds the budget "
                f"{feature_budget}")
        self.samples = samples
        self.r = int(r)
        self.k = int(k)
        self.features: list[tuple[int, ...]] = list(
            itertools.combinations([v for v in range(p) if v != r], k - 1))
        self.index = {f: j for j, f in enumerate(self.features)}
        self.n_features = count
        self._x = samples.data.astype(np.float64)
        self._block = 4096
        self._l_bound: float | None = None
        if samples.n * count <= dense_cap:
            self._z = self._feature_block(0, count)
            self._zt = np.ascontiguousarray(self._z.T)
        else:
            self._z = None
            self._zt = None

    def _feature_block(self, lo: int, hi: int) -> np.ndarray:
        x = self._x
        cols = np.empty((x.shape[0], hi - lo))
        for j in range(lo, hi):
            f = self.features[j]
            col = x[:, f[0]].copy()
            for v in f[1:]:
                col *= x[:, v]
            cols[:, j - lo] = col
        return cols

    @property
    def labels(self) -> np.ndarray:
        return self._x[:, self.r]

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        """Z @ vec, streaming blocks if the design is not materialized."""
        if self._z is not None:
            return self._z @ vec
        out = np.zeros(self.samples.n)
        for lo in range(0, self.n_features, self._block):
            hi = min(lo + self._block, self.n_features)
            out += self._feature_block(lo, hi) @ vec[lo:hi]
        return out

    def rmatvec(self, vec: np.ndarray) -> np.ndarray:
        """Z.T @ vec, streaming blocks if the design is not materialized."""
        if self._zt is not None:
            return self._zt @ vec
        out = np.empty(self.n_features)
        for lo in range(0, self.n_features, self._block):
            hi = min(lo + self._block, self.n_features)
            out[lo:hi] = self._feature_block(lo, hi).T @ vec
        return out

    def margins_sparse(self, entries: dict[tuple[int, ...], float]) -> np.ndarray:
        """Z @ J for a sparse coefficient dict, touching only active columns."""
        x = self._x
        out = np.zeros(self.samples.n)
        for f, value in entries.items():
            col = x[:, f[0]].copy()
            for v in f[1:]:
                col *= x[:, v]
            out += value * col
        return out

    def dense_vector(self, entries: dict[tuple[int, ...], float]) -> np.ndarray:
        vec = np.zeros(self.n_features)
        for f, value in entries.items():
            j = self.index.get(tuple(f))
            if j is None:
                raise ValueError(f"feature {f} is not a (k-1)-subset avoiding r={self.r}")
            vec[j] = value
        return vec


@dataclass
class SolveInfo:
    """Solver telemetry attached to a returned coefficient vector."""

    iterations: int
    converged: bool
    kkt: float
    objective: float
    diverging_norm: bool = False
    objective_history: list[float] | None = None


@dataclass
class SparseCoefVector:
    """Sparse per-node coefficient vector over (k-1)-subsets avoiding r."""

    r: int
    k: int
    entries: dict[tuple[int, ...], float] = field(default_factory=dict)
    info: SolveInfo | None = None

    def l1_norm(self) -> float:
        return float(sum(abs(v) for v in self.entries.values()))

    def support(self) -> set[tuple[int, ...]]:
        return set(self.entries)


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances and step rules for :func:`solve_l1`.

    The primary stopping rule is the KKT residual of the (thresholded)
    iterate; ``objective_rel_tol`` is a stall guard that only terminates
    the lam = 0 path, where quasi-separable data may admit no finite
    minimizer (see the solver docstring).
    """

    max_iters: int = 10_000
    kkt_tol: float = 1e-6
    objective_rel_tol: float = 1e-9
    zero_threshold: float = 1e-8
    backtrack_factor: float = 2.0
    power_iters: int = 40
    kkt_check_every: int = 10
    record_history: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.kkt_tol <= 0 or self.objective_rel_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.zero_threshold < 0:
            raise ValueError("zero_threshold must be >= 0")
        if self.backtrack_factor <= 1.0:
            raise ValueError("backtrack_factor must exceed 1")


def node_coefficients(tensor: InteractionTensor, r: int) -> SparseCoefVector:
    """Restriction of a tensor to target r: entries e \\ {r} -> J_e."""
    if not 0 <= r < tensor.p:
        raise ValueError(f"vertex {r} outside [0, {tensor.p})")
    entries = {tuple(v for v in e if v != r): tensor.edges[e]
               for e in tensor.incidence[r]}
    return SparseCoefVector(r=r, k=tensor.k, entries=entries)


def _as_entries(coef, r: int, k: int) -> dict[tuple[int, ...], float]:
    if isinstance(coef, SparseCoefVector):
        if coef.r != r or coef.k != k:
            raise ValueError(
                f"coefficient vector targets (r={coef.r}, k={coef.k}), "
                f"expected (r={r}, k={k})")
        return coef.entries
    if isinstance(coef, InteractionTensor):
        return node_coefficients(coef, r).entries
    return {tuple(key): float(v) for key, v in dict(coef).items()}


def _check_samples(samples: SampleMatrix, r: int, k: int) -> None:
    if samples.n < 1:
        raise DimensionError("need at least one sample")
    if not 0 <= r < samples.p:
        raise ValueError(f"target vertex {r} outside [0, {samples.p})")
    if not 2 <= k <= samples.p - 1:
        raise ValueError(f"order k={k} must satisfy 2 <= k <= p-1={samples.p - 1}")


def _log2cosh(a: np.ndarray) -> np.ndarray:
    # log(2 cosh(a)) = |a| + log1p(exp(-2|a|)), stable for any magnitude.
    mag = np.abs(a)
    return mag + np.log1p(np.exp(-2.0 * mag))


def _resolve_design(design: NodeDesign | None, r: int, k: int | None):
    if design is not None:
        if design.r != r or (k is not None and design.k != k):
            raise ValueError(
                f"design targets (r={design.r}, k={design.k}), "
                f"call asked for (r={r}, k={k})")
        return design.r, design.k
    if k is None:
        raise ValueError("interaction order k is required")
    return r, k


def pseudo_loss(coef, samples: SampleMatrix, r: int, k: int | None = None,
                design: NodeDesign | None = None) -> float:
    """Mean negative log conditional likelihood of x_r given the rest."""
    r, k = _resolve_design(design, r, k)
    _check_samples(samples, r, k)
    entries = _as_entries(coef, r, k)
    kfact = factorial(k)
    if design is not None:
        a = kfact * design.margins_sparse(entries)
        y = design.labels
    else:
        x = samples.data.astype(np.float64)
        a = np.zeros(samples.n)
        for f, value in entries.items():
            col = x[:, f[0]].copy()
            for v in f[1:]:
                col *= x[:, v]
            a += value * col
        a *= kfact
        y = x[:, r]
    return float(np.mean(_log2cosh(a) - y * a))


def pseudo_grad(coef, samples: SampleMatrix, r: int, k: int | None = None,
                design: NodeDesign | None = None) -> np.ndarray:
    """Gradient of :func:`pseudo_loss` over all features, in feature order.

    Component e' is -(k!/n) * sum_i z_ie' * (x_ir - tanh(k * m_r(x_i))).
    """
    r, k = _resolve_design(design, r, k)
    if design is None:
        _check_samples(samples, r, k)
        design = NodeDesign(samples, r, k)
    entries = _as_entries(coef, r, k)
    kfact = factorial(k)
    a = kfact * design.margins_sparse(entries)
    y = design.labels
    resid = np.tanh(a) - y
    return (kfact / samples.n) * design.rmatvec(resid)


def kkt_residual(coef, samples: SampleMatrix, r: int, lam: float,
                 k: int | None = None,
                 design: NodeDesign | None = None) -> float:
    """Max violation of the subgradient optimality conditions at ``coef``.

    Active coordinates contribute |g_j + lam * sign(J_j)|, inactive ones
    max(0, |g_j| - lam).  Zero at an exact optimum.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    r, k = _resolve_design(design, r, k)
    if design is None:
        design = NodeDesign(samples, r, k)
    g = pseudo_grad(coef, samples, design.r, design.k, design=design)
    entries = _as_entries(coef, design.r, design.k)
    dense = design.dense_vector(entries)
    return _kkt_from_grad(g, dense, lam)


def _kkt_from_grad(g: np.ndarray, dense: np.ndarray, lam: float) -> float:
    active = dense != 0.0
    resid = np.where(active,
                     np.abs(g + lam * np.sign(dense)),
                     np.maximum(0.0, np.abs(g) - lam))
    return float(resid.max()) if resid.size else 0.0


def lambda_theory(n: int, p: int, k: int, alpha: float) -> float:
    """Penalty from the finite-sample guarantee, for incoherence level alpha.

    lam = 16 * k! * ((2 - alpha)/alpha) * sqrt(log C(p-1, k-1) / n).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not 2 <= k <= p - 1:
        raise ValueError(f"order k={k} must satisfy 2 <= k <= p-1={p - 1}")
    return (16.0 * factorial(k) * (2.0 - alpha) / alpha
            * math.sqrt(log_binomial(p - 1, k - 1) / n))


def lambda_practice(n: int, p: int, k: int, c: float) -> float:
    """Practical penalty scale lam = c * sqrt(k * ln(p) / n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if c <= 0:
        raise ValueError("c must be positive")
    if p < 2:
        raise ValueError("p must be >= 2")
    return c * math.sqrt(k * math.log(p) / n)


def _soft_threshold(v: np.ndarray, t: float, out: np.ndarray) -> np.ndarray:
    np.abs(v, out=out)
    out -= t
    np.maximum(out, 0.0, out=out)
    return np.copysign(out, v, out=out)


def _power_l_bound(design: NodeDesign, iters: int) -> float:
    """Upper estimate of lam_max(Z.T Z / (4n)), the logistic curvature bound.

    Cached on the design: the bound depends on the data only, so one
    estimate serves every penalty level fitted against the same design.
    """
    if design._l_bound is not None:
        return design._l_bound
    n = design.samples.n
    rng = np.random.default_rng(0)
    v = rng.standard_normal(design.n_features)
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = design.rmatvec(design.matvec(v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            lam = 1.0  # degenerate all-zero design block
            break
        lam = norm
        v = w / norm
    design._l_bound = 1.02 * lam / (4.0 * n)
    return design._l_bound


def solve_l1(samples: SampleMatrix, r: int, lam: float, k: int | None = None,
             opts: SolveOptions | None = None,
             design: NodeDesign | None = None,
             init: SparseCoefVector | None = None) -> SparseCoefVector:
    """Solve the per-node l1 program for target r at penalty ``lam``.

    Parameters
    ----------
    samples, r, lam : data, target vertex, penalty level (on the J scale).
    k : interaction order; required unless ``design`` is given.
    opts : tolerances and step rules.
    design : preassembled :class:`NodeDesign` to share across calls.
    init : warm-start coefficients (e.g. the previous point of a path).

    Returns a :class:`SparseCoefVector` whose ``info`` carries iteration
    count, the certified KKT residual, and the final objective value.

    Raises :class:`SolverError` when lam > 0 and the KKT tolerance is not
    met within ``max_iters``.  With lam = 0 and quasi-separable data there
    may be no finite minimizer; that path instead returns the last iterate
    flagged with ``info.diverging_norm`` once the objective stalls or the
    iteration budget is exhausted.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    opts = opts or SolveOptions()
    r, k = _resolve_design(design, r, k)
    if design is None:
        _check_samples(samples, r, k)
        design = NodeDesign(samples, r, k)
    n = samples.n
    kfact = factorial(k)
    scale = 2.0 * kfact          # theta = scale * J
    lam_t = lam / scale          # penalty on the theta scale
    y = design.labels
    zero_t = opts.zero_threshold * scale

    def f_of(theta):
        u = design.matvec(theta)  # u_i = z_i . theta
        return float(np.mean(np.logaddexp(0.0, -y * u))), u

    def grad_theta(u):
        return -design.rmatvec(y * expit(-y * u)) / n

    def objective(theta, fval):
        # identical value on either scale; penalty written on the J scale
        return fval + lam * np.abs(theta).sum() / scale

    def certify(theta):
        """KKT residual (J scale) of the thresholded copy of theta."""
        thr = np.where(np.abs(theta) <= zero_t, 0.0, theta)
        u = design.matvec(thr)
        g_j = (kfact / n) * design.rmatvec(np.tanh(0.5 * u) - y)
        return _kkt_from_grad(g_j, thr / scale, lam), thr

    state = {"L": None}

    def prox_step(point, fp, gp):
        """Backtracked proximal gradient step from ``point``; F(z) <= F(point)."""
        while True:
            step = 1.0 / state["L"]
            z = _soft_threshold(point - step * gp, step * lam_t,
                                np.empty_like(point))
            fz, uz = f_of(z)
            dz = z - point
            quad = fp + float(gp @ dz) + 0.5 * state["L"] * float(dz @ dz)
            if fz <= quad + 1e-14 * max(1.0, abs(quad)):
                return z, fz
            state["L"] *= opts.backtrack_factor
            if state["L"] > 1e18:
                raise SolverError("backtracking underflowed the step size",
                                  residual=None)

    x = (design.dense_vector(_as_entries(init, r, k)) * scale
         if init is not None else np.zeros(design.n_features))
    fx, _ = f_of(x)
    obj_x = objective(x, fx)
    history = [obj_x] if opts.record_history else None

    kkt0, thr0 = certify(x)
    if kkt0 < opts.kkt_tol:
        return _package(thr0, scale, design, SolveInfo(
            iterations=0, converged=True, kkt=kkt0,
            objective=objective(thr0, f_of(thr0)[0]),
            objective_history=history))

    state["L"] = _power_l_bound(design, opts.power_iters) or 0.25
    yv = x.copy()
    t_mom = 1.0
    proxy_trigger = 4.0 * opts.kkt_tol / scale

    it = 0
    while it < opts.max_iters:
        it += 1
        fy, uy = f_of(yv)
        z, fz = prox_step(yv, fy, grad_theta(uy))
        obj_z = objective(z, fz)
        if obj_z > obj_x + 1e-14 * max(1.0, abs(obj_x)):
            # Momentum overshoot: restart from the best point (monotone FISTA).
            t_mom = 1.0
            fx2, ux = f_of(x)
            z, fz = prox_step(x, fx2, grad_theta(ux))
            obj_z = objective(z, fz)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        yv = z + ((t_mom - 1.0) / t_next) * (z - x)
        step_inf = float(np.max(np.abs(z - x))) if z.size else 0.0
        rel_change = abs(obj_x - obj_z) / max(1.0, abs(obj_x))
        x, fx, obj_x = z, fz, obj_z
        t_mom = t_next
        if history is not None:
            history.append(obj_x)

        near = step_inf * state["L"] <= proxy_trigger
        if near or it % opts.kkt_check_every == 0 or it == opts.max_iters:
            kkt, thr = certify(x)
            if kkt < opts.kkt_tol:
                fthr, _ = f_of(thr)
                return _package(thr, scale, design, SolveInfo(
                    iterations=it, converged=True, kkt=kkt,
                    objective=objective(thr, fthr),
                    objective_history=history))
        if lam == 0.0 and rel_change < opts.objective_rel_tol:
            break

    kkt, thr = certify(x)
    if lam > 0.0:
        raise SolverError(
            f"no convergence after {it} iterations (KKT residual {kkt:.3e}, "
            f"tolerance {opts.kkt_tol:.1e})", residual=kkt, iterations=it)
    fthr, _ = f_of(thr)
    # Separable runs leave any plausible region (k!|J| > 5) before stalling;
    # finite-optimum stalls observed stay far below this.
    diverging = bool(np.max(np.abs(x)) > 10.0) if x.size else False
    return _package(thr, scale, design, SolveInfo(
        iterations=it, converged=kkt < opts.kkt_tol, kkt=kkt,
        objective=objective(thr, fthr), diverging_norm=diverging,
        objective_history=history))


def _package(theta: np.ndarray, scale: float, design: NodeDesign,
             info: SolveInfo) -> SparseCoefVector:
    j_vec = theta / scale
    entries = {design.features[j]: float(j_vec[j])
               for j in np.nonzero(j_vec)[0]}
    return SparseCoefVector(r=design.r, k=design.k, entries=entries, info=info)


@dataclass(frozen=True)
class BicScore:
    c: float
    lam: float
    bic: float
    df: int
    loss: float


@dataclass(frozen=True)
class BicSelection:
    lambda_star: float
    c_star: float
    scores: tuple[BicScore, ...]


def bic_select(samples: SampleMatrix, r: int, c_grid=None,
               k: int | None = None, opts: SolveOptions | None = None,
               design: NodeDesign | None = None) -> BicSelection:
    """Pick the penalty scale c minimizing BIC = 2n * loss + df * ln(n).

    df counts nonzero coefficients.  Ties go to the smaller c.  Fits run
    from the largest penalty down with warm starts.  Cross-node averaging
    of the selected penalty is the caller's job (see the recovery module).
    """
    grid = sorted(float(c) for c in (c_grid if c_grid is not None
                                     else DEFAULT_C_GRID))
    if not grid:
        raise ValueError("c_grid must be nonempty")
    if design is None:
        if k is None:
            raise ValueError("interaction order k is required")
        design = NodeDesign(samples, r, k)
    n, p = samples.n, samples.p
    log_n = math.log(n) if n > 1 else 0.0
    scored: list[BicScore] = []
    warm: SparseCoefVector | None = None
    for c in reversed(grid):
        lam = lambda_practice(n, p, design.k, c)
        coef = solve_l1(samples, design.r, lam, opts=opts, design=design,
                        init=warm)
        warm = coef
        loss = pseudo_loss(coef, samples, design.r, design.k, design=design)
        df = len(coef.entries)
        scored.append(BicScore(c=c, lam=lam, bic=2.0 * n * loss + df * log_n,
                               df=df, loss=loss))
    scored.reverse()  # ascending c
    best = scored[0]
    for s in scored[1:]:
        if s.bic < best.bic:
            best = s
    return BicSelection(lambda_star=best.lam, c_star=best.c,
                        scores=tuple(scored))
