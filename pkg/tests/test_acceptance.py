"""Whole-system acceptance suite: ten checks, one scoreboard line each.

Every test exercises a shipped guarantee end to end at stated tolerances
and appends an ACCEPTANCE line to the scoreboard printed after the run
(see conftest.pytest_terminal_summary).  Checks 6 and 7 re-run the frozen
scaling experiments single-core and take a few minutes each; everything
else finishes in seconds.  Fixtures are seeded so every number here is
reproducible bit for bit.
"""

import time
from itertools import combinations
from math import factorial, log

import numpy as np
from scipy.special import expit

import hyperising.cli as cli
from conftest import (ACCEPTANCE_LINES, oracle_all_states, oracle_design,
                      oracle_energies, oracle_ista, oracle_objective,
                      oracle_systematic_sweep, random_tensor, tv_distance)
from hyperising import InteractionTensor
from hyperising.diagnostics import (concentration_probe, dependency_constants,
                                    incoherence, population_fisher, score_sup)
from hyperising.regression import (SparseCoefVector, kkt_residual,
                                   lambda_practice, lambda_theory, pseudo_grad,
                                   pseudo_loss, solve_l1)
from hyperising.sampler import GibbsConfig, draw_samples, exact_sample
from hyperising.sweep import SweepConfig, run_sweep
from hyperising.tensor import conditional_prob, exact_distribution, exact_moment

# c-grid handed to the per-trial penalty selection in the scaling runs;
# wide enough that the selected multiplier sits in the interior.
WIDE_C = tuple(round(0.5 * i, 1) for i in range(1, 17))

SCALING_BASE = dict(p_list=(32,), k=3, d=3, trials=20, lambda_mode="practice",
                    c_grid=WIDE_C, rule="and_strict", sign_mode="all_plus",
                    base_seed=0, workers=1)


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(
        f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"acceptance check {num} failed: {detail}"


def batch_se(col: np.ndarray, batches: int = 100) -> float:
    """Batch-means standard error; spaced Gibbs draws are not i.i.d."""
    m = len(col) // batches * batches
    means = col[:m].reshape(batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(batches))


def test_criterion_01_conditionals_match_enumeration():
    """50 random tensors, every state and vertex: max abs error < 1e-12."""
    t0 = time.time()
    rng = np.random.default_rng(11)
    worst, calls = 0.0, 0
    for i in range(50):
        k = (2, 3, 4)[i % 3]
        p = int(rng.integers(max(k + 1, 4), 9))
        ten = random_tensor(rng, p, k, low=-0.5, high=0.5)
        states = oracle_all_states(p)
        h = oracle_energies(ten, states)
        for r in range(p):
            flipped = states.copy()
            flipped[:, r] *= -1
            want = expit(h - oracle_energies(ten, flipped))
            for row in range(states.shape[0]):
                got = conditional_prob(ten, states[row], r,
                                       int(states[row, r]))
                worst = max(worst, abs(got - want[row]))
                calls += 1
    elapsed = time.time() - t0
    record(1, worst < 1e-12 and elapsed < 60,
           f"max |conditional - enumeration| {worst:.2e} over {calls} "
           f"state-vertex pairs (tol 1e-12, {elapsed:.1f}s)")


def test_criterion_02_gibbs_stationarity():
    """Kernel fixes the exact law (TV < 1e-12); moments within 4 SE."""
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst_tv, worst_z = 0.0, 0.0
    for i in range(10):
        k = 2 if i % 2 == 0 else 3
        lim = 0.4 if k == 2 else 0.2
        dens = 0.4 if k == 2 else 0.2
        ten = random_tensor(rng, 6, k, low=-lim, high=lim, density=dens)
        probs = exact_distribution(ten).probs
        worst_tv = max(worst_tv,
                       tv_distance(oracle_systematic_sweep(ten, probs), probs))
        s = draw_samples(ten, 100_000, GibbsConfig(
            burn_in_sweeps=1000, spacing_sweeps=5, seed=1000 + i))
        x = s.data.astype(float)
        for e in ten.edges:
            prod = np.prod(x[:, list(e)], axis=1)
            z = abs(prod.mean() - exact_moment(ten, e)) / batch_se(prod)
            worst_z = max(worst_z, z)
    elapsed = time.time() - t0
    record(2, worst_tv < 1e-12 and worst_z < 4.0 and elapsed < 300,
           f"sweep-kernel TV {worst_tv:.2e} (tol 1e-12), worst moment "
           f"|z| {worst_z:.2f} (gate 4 SE, {elapsed:.0f}s)")


def test_criterion_03_gradient_matches_finite_differences():
    """50 instances, central differences h=1e-5: relative error < 1e-6."""
    t0 = time.time()
    rng = np.random.default_rng(23)
    worst = 0.0
    for i in range(50):
        k = (2, 3)[i % 2]
        p = int(rng.integers(k + 2, 8))
        ten = random_tensor(rng, p, k, low=-0.4, high=0.4)
        s = exact_sample(ten, 40, seed=500 + i)
        r = int(rng.integers(p))
        groups = list(combinations([v for v in range(p) if v != r], k - 1))
        point = {g: float(v) for g, v in
                 zip(groups, rng.uniform(-0.3, 0.3, len(groups)))}
        g = pseudo_grad(SparseCoefVector(r=r, k=k, entries=point), s, r, k)
        h = 1e-5
        fd = np.zeros(len(groups))
        for j, grp in enumerate(groups):
            up = dict(point)
            up[grp] += h
            dn = dict(point)
            dn[grp] -= h
            fd[j] = (pseudo_loss(SparseCoefVector(r=r, k=k, entries=up),
                                 s, r, k)
                     - pseudo_loss(SparseCoefVector(r=r, k=k, entries=dn),
                                   s, r, k)) / (2 * h)
        denom = np.maximum(np.abs(fd), 1e-9)
        worst = max(worst, float(np.max(np.abs(g - fd) / denom)))
    elapsed = time.time() - t0
    record(3, worst < 1e-6 and elapsed < 60,
           f"max per-coordinate relative error {worst:.2e} "
           f"(tol 1e-6, {elapsed:.1f}s)")


def test_criterion_04_solver_agrees_with_slow_reference():
    """20 instances: certified KKT < 1e-6, objective within 1e-8 of ISTA."""
    t0 = time.time()
    worst_kkt, worst_gap = 0.0, 0.0
    for seed in range(20):
        p = (8, 10, 12, 16)[seed % 4]
        rng = np.random.default_rng(200 + seed)
        ten = random_tensor(rng, p, 3, low=-0.3, high=0.3, density=0.05)
        s = exact_sample(ten, 300, seed=300 + seed)
        r = seed % p
        lam = lambda_practice(300, p, 3, 1.0)
        fit = solve_l1(s, r, lam, k=3)
        worst_kkt = max(worst_kkt, kkt_residual(fit, s, r, lam, k=3))
        Z, groups, y = oracle_design(s.data, r, 3)
        lam_theta = lam / (2 * factorial(3))
        theta_ref = oracle_ista(Z, y, lam_theta)
        f_ref = oracle_objective(Z, y, theta_ref, lam_theta)
        jvec = np.array([fit.entries.get(g, 0.0) for g in groups])
        f_pkg = oracle_objective(Z, y, 2 * factorial(3) * jvec, lam_theta)
        worst_gap = max(worst_gap, abs(f_pkg - f_ref))
    elapsed = time.time() - t0
    record(4, worst_kkt < 1e-6 and worst_gap < 1e-8 and elapsed < 600,
           f"max KKT residual {worst_kkt:.2e} (tol 1e-6), max objective "
           f"gap {worst_gap:.2e} (tol 1e-8, {elapsed:.0f}s)")


def test_criterion_05_interaction_free_closed_forms():
    """J = 0: Fisher block (k!)^2 I, constants ((k!)^2, 1), incoherence 0."""
    details = []
    ok = True
    for k in (2, 3):
        p = k + 3
        ten = InteractionTensor(p, k, {})
        support = list(combinations(range(1, p), k - 1))
        blocks = population_fisher(ten, 0, support)
        kf2 = factorial(k) ** 2
        dev = float(np.max(np.abs(blocks.q_ss - kf2 * np.eye(len(support)))))
        cmin, dmax = dependency_constants(blocks, tensor=ten)
        inc = incoherence(blocks)
        ok = ok and dev < 1e-12 and abs(cmin - kf2) < 1e-12 \
            and abs(dmax - 1.0) < 1e-12 and inc == 0.0
        details.append(f"k={k}: |Q - (k!)^2 I| {dev:.1e}, "
                       f"C_min {cmin:g}, D_max {dmax:g}, incoherence {inc:g}")
    record(5, ok, "; ".join(details))


def test_criterion_06_recovery_rate_grows_with_sample_scale():
    """Desk-scale rate curve: rate(2.0) - rate(0.4) >= 0.3, rate(2.0) >= 0.75."""
    t0 = time.time()
    res = run_sweep(SweepConfig(alpha_grid=(0.4, 0.8, 1.2, 1.6, 2.0),
                                divisor=6e6, **SCALING_BASE))
    rates = [g.mean_rate for g in res.aggregates()]
    elapsed = time.time() - t0
    record(6, rates[-1] - rates[0] >= 0.3 and rates[-1] >= 0.75
           and elapsed < 1800,
           "mean rates " + "/".join(f"{v:.4f}" for v in rates)
           + f" over alpha 0.4..2.0 (gap {rates[-1] - rates[0]:.3f} >= 0.3, "
           f"top {rates[-1]:.4f} >= 0.75, {elapsed:.0f}s)")


def test_criterion_07_success_fraction_grows_with_sample_scale():
    """Desk-scale success curve: non-decreasing up to one inversion, max at 2.0."""
    t0 = time.time()
    res = run_sweep(SweepConfig(alpha_grid=(0.5, 1.0, 1.5, 2.0),
                                divisor=1.5e6, **SCALING_BASE))
    succ = [g.success_fraction for g in res.aggregates()]
    inversions = sum(1 for a, b in zip(succ, succ[1:]) if b < a)
    elapsed = time.time() - t0
    record(7, inversions <= 1 and succ[-1] == max(succ) and elapsed < 2700,
           "success fractions " + "/".join(f"{v:.2f}" for v in succ)
           + f" over alpha 0.5..2.0 ({inversions} inversion(s) <= 1, "
           f"max at 2.0, {elapsed:.0f}s)")


def test_criterion_08_score_concentration_bound():
    """200 exact-sample replications: exceedance frequency <= tail bound."""
    t0 = time.time()
    p, k, n, alpha = 8, 3, 500, 1.0
    ten = InteractionTensor(p, k, {(0, 1, 2): 0.4})
    lam = lambda_theory(n, p, k, alpha)
    n_features = len(list(combinations(range(1, p), k - 1)))
    bound = 2.0 * np.exp(
        -n * alpha ** 2 * lam ** 2
        / (128.0 * (2 - alpha) ** 2 * factorial(k) ** 2) + log(n_features))
    assert bound < 1.0  # the check is vacuous otherwise
    threshold = alpha * lam / (4.0 * (2 - alpha))
    exceed = sum(score_sup(exact_sample(ten, n, seed=9000 + rep), 0, ten)
                 >= threshold for rep in range(200))
    elapsed = time.time() - t0
    record(8, exceed / 200 <= bound and elapsed < 600,
           f"exceedance {exceed}/200 <= bound {bound:.4f} at "
           f"lambda {lam:.4f} (threshold {threshold:.4f}, {elapsed:.0f}s)")


def test_criterion_09_fisher_constants_concentrate():
    """Median deviations of (C_min, D_max, incoherence) strictly shrink in n."""
    t0 = time.time()
    ten = InteractionTensor(6, 3, {(0, 1, 2): 0.4})
    grid = (100, 1000, 10_000, 100_000)
    devs = {"c_min": [], "d_max": [], "incoherence": []}
    for seed in range(10):
        table = concentration_probe(ten, 0, grid, seed=seed)
        devs["c_min"].append([row.dev_c_min for row in table.rows])
        devs["d_max"].append([row.dev_d_max for row in table.rows])
        devs["incoherence"].append([row.dev_incoherence for row in table.rows])
    medians = {name: np.median(np.array(vals), axis=0)
               for name, vals in devs.items()}
    ok = all(m[i + 1] < m[i] for m in medians.values()
             for i in range(len(grid) - 1))
    elapsed = time.time() - t0
    record(9, ok and elapsed < 600,
           "median deviations over n=1e2..1e5: "
           + "; ".join(f"{name} " + "/".join(f"{v:.3g}" for v in m)
                       for name, m in medians.items())
           + f" (strictly decreasing, {elapsed:.0f}s)")


def test_criterion_10_sweep_outputs_deterministic(tmp_path):
    """Same config and seed, 1 vs 2 workers: byte-identical CSV and SVG."""
    outputs = []
    for workers, name in ((1, "a"), (2, "b")):
        out_dir = tmp_path / name
        code = cli.main(["sweep", "--p", "6", "--k", "3", "--d", "1",
                         "--n-grid", "50,80", "--trials", "3",
                         "--lambda-mode", "fixed", "--lam", "0.5",
                         "--burn-in", "40", "--spacing", "2", "--seed", "3",
                         "--workers", str(workers), "--out-dir", str(out_dir)])
        assert code == 0
        outputs.append(((out_dir / "sweep.csv").read_bytes(),
                        (out_dir / "sweep.svg").read_bytes()))
    csv_same = outputs[0][0] == outputs[1][0]
    svg_same = outputs[0][1] == outputs[1][1]
    record(10, csv_same and svg_same,
           f"workers 1 vs 2: CSV identical {csv_same}, "
           f"SVG identical {svg_same} "
           f"({len(outputs[0][0])} / {len(outputs[0][1])} bytes)")
