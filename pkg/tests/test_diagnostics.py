"""Fisher-matrix diagnostics, score concentration, uniqueness certificates."""

import itertools
import math

import numpy as np
import pytest
from scipy.special import expit

from hyperising import (
    DiagnosticError,
    InteractionTensor,
    SampleMatrix,
    concentration_probe,
    dependency_constants,
    diagnose_node,
    exact_sample,
    incoherence,
    local_field,
    population_fisher,
    pseudo_grad,
    sample_fisher_blocks,
    score_sup,
    solve_l1,
    uniqueness_certificate,
)
from hyperising.diagnostics import eta, _node_features
from hyperising.regression import SparseCoefVector

from conftest import oracle_design, oracle_joint, random_tensor


def single_edge(p=5, coeff=0.4):
    return InteractionTensor(p, 3, {(0, 1, 2): coeff})


def oracle_eta(tensor, x, r):
    # (k!)^2 / cosh^2(k m) written without the package's t-substitution.
    kfact = math.factorial(tensor.k)
    m = local_field(tensor, x, r)
    return kfact * kfact / math.cosh(tensor.k * m) ** 2


# ---------------------------------------------------------------------------
# Fisher weight.

def test_eta_matches_cosh_form_and_range():
    rng = np.random.default_rng(71)
    for p, k in [(5, 2), (6, 3), (6, 4)]:
        ten = random_tensor(rng, p, k, density=0.5)
        kfact = math.factorial(k)
        for _ in range(8):
            x = rng.choice([-1, 1], size=p).astype(np.int8)
            for r in range(p):
                got = eta(ten, x, r)
                assert got == pytest.approx(oracle_eta(ten, x, r), abs=1e-12)
                assert 0.0 < got <= kfact * kfact + 1e-12


def test_eta_extreme_field_underflows_to_zero_gracefully():
    ten = InteractionTensor(4, 3, {(0, 1, 2): 200.0})
    x = np.ones(4, dtype=np.int8)
    val = eta(ten, x, 0)
    assert 0.0 <= val < 1e-100
    assert math.isfinite(val)


# ---------------------------------------------------------------------------
# Population Fisher blocks.

def test_interaction_free_blocks_are_scaled_identity():
    for k in (2, 3):
        p = 6
        zero = InteractionTensor.zero(p, k)
        saturated = _node_features(p, 0, k)
        blocks = population_fisher(zero, 0, support=saturated)
        kfact = math.factorial(k)
        want = kfact * kfact * np.eye(len(saturated))
        assert np.max(np.abs(blocks.q_ss - want)) < 1e-12
        assert blocks.q_scs.shape == (0, len(saturated))
        c_min, d_max = dependency_constants(blocks, tensor=zero)
        assert c_min == pytest.approx(kfact * kfact, abs=1e-12)
        assert d_max == pytest.approx(1.0, abs=1e-12)
        assert incoherence(blocks) == 0.0


def test_population_q_ss_matches_direct_integrand():
    ten = single_edge()
    blocks = population_fisher(ten, 0)
    assert blocks.support == [(1, 2)]
    states, probs = oracle_joint(ten)
    total = 0.0
    for x, pr in zip(states, probs):
        z = float(x[1] * x[2])
        total += pr * oracle_eta(ten, x, 0) * z * z
    assert blocks.q_ss[0, 0] == pytest.approx(total, abs=1e-12)


def test_population_cross_block_matches_direct_integrand():
    ten = single_edge()
    blocks = population_fisher(ten, 0)
    states, probs = oracle_joint(ten)
    for i, comp_f in enumerate(blocks.complement):
        total = 0.0
        for x, pr in zip(states, probs):
            z_c = float(np.prod(x[list(comp_f)]))
            z_s = float(x[1] * x[2])
            total += pr * oracle_eta(ten, x, 0) * z_c * z_s
        assert blocks.q_scs[i, 0] == pytest.approx(total, abs=1e-12)


def test_population_fisher_validation():
    ten = single_edge()
    with pytest.raises(ValueError):
        population_fisher(ten, 9)
    with pytest.raises(ValueError):
        population_fisher(ten, 0, support=[(0, 1)])  # contains r
    with pytest.raises(ValueError):
        population_fisher(ten, 0, support=[(1, 2), (1, 2)])


# ---------------------------------------------------------------------------
# Sample Fisher blocks.

def test_sample_blocks_at_zero_reference_are_scaled_gram():
    ten = single_edge()
    samples = exact_sample(ten, 300, seed=41)
    support = [(1, 2), (1, 3)]
    zero_ref = SparseCoefVector(r=0, k=3)
    blocks = sample_fisher_blocks(samples, 0, zero_ref, support)
    Z, groups, _ = oracle_design(samples.data, 0, 3)
    sup_idx = [groups.index(f) for f in support]
    comp_idx = [j for j in range(len(groups)) if j not in sup_idx]
    Zs = Z[:, sup_idx]
    want_ss = 36.0 * (Zs.T @ Zs) / samples.n
    assert np.max(np.abs(blocks.q_ss - want_ss)) < 1e-12
    want_cross = 36.0 * (Z[:, comp_idx].T @ Zs) / samples.n
    assert np.max(np.abs(blocks.q_scs - want_cross)) < 1e-12


def test_sample_blocks_concentrate_on_population():
    ten = single_edge()
    pop = population_fisher(ten, 0)
    samples = exact_sample(ten, 40_000, seed=43)
    blocks = sample_fisher_blocks(samples, 0, ten, pop.support)
    assert abs(blocks.q_ss[0, 0] - pop.q_ss[0, 0]) < 0.05 * 36.0
    assert np.max(np.abs(blocks.q_scs - pop.q_scs)) < 0.05 * 36.0


def test_sample_blocks_validation():
    ten = single_edge()
    samples = exact_sample(ten, 50, seed=2)
    with pytest.raises(ValueError):
        sample_fisher_blocks(samples, 0, ten, [(0, 1)])
    with pytest.raises(ValueError):
        sample_fisher_blocks(samples, 0, ten, [(1, 2)], k=2)
    with pytest.raises(ValueError):
        sample_fisher_blocks(samples, 0, {(1, 2): 0.4}, [(1, 2)])


# ---------------------------------------------------------------------------
# Dependency constants and incoherence.

def test_c_min_matches_dense_eigenvalue():
    rng = np.random.default_rng(73)
    ten = random_tensor(rng, 6, 3, density=0.3)
    r = 0
    blocks = population_fisher(ten, r)
    if blocks.q_ss.shape[0] == 0:
        pytest.skip("random tensor left r isolated")
    c_min, _ = dependency_constants(blocks, tensor=ten)
    assert c_min == pytest.approx(
        float(np.linalg.eigvalsh(blocks.q_ss)[0]), abs=1e-12)


def test_d_max_matrix_free_matches_dense():
    ten = single_edge()
    samples = exact_sample(ten, 400, seed=47)
    blocks = sample_fisher_blocks(samples, 0, ten, [(1, 2)])
    _, d_max = dependency_constants(blocks, samples=samples)
    Z, _, _ = oracle_design(samples.data, 0, 3)
    dense = float(np.linalg.eigvalsh(Z.T @ Z / samples.n)[-1])
    assert d_max == pytest.approx(dense, rel=1e-6)


def test_d_max_population_on_uniform_is_identity_eigenvalue():
    zero = InteractionTensor.zero(5, 2)
    sat = _node_features(5, 0, 2)
    blocks = population_fisher(zero, 0, support=sat)
    _, d_max = dependency_constants(blocks, tensor=zero)
    assert d_max == 1.0


def test_dependency_constants_validation():
    ten = single_edge()
    blocks = population_fisher(ten, 0)
    samples = exact_sample(ten, 50, seed=3)
    with pytest.raises(ValueError):
        dependency_constants(blocks)
    with pytest.raises(ValueError):
        dependency_constants(blocks, samples=samples, tensor=ten)
    empty = population_fisher(InteractionTensor.zero(5, 3), 0, support=[])
    with pytest.raises(ValueError):
        dependency_constants(empty, tensor=ten)


def test_incoherence_matches_dense_inverse_route():
    rng = np.random.default_rng(79)
    ten = InteractionTensor(6, 3, {(0, 1, 2): 0.5, (0, 3, 4): -0.3})
    blocks = population_fisher(ten, 0)
    got = incoherence(blocks)
    dense = np.abs(blocks.q_scs @ np.linalg.inv(blocks.q_ss))
    want = float(dense.sum(axis=1).max())
    assert got == pytest.approx(want, abs=1e-10)
    assert 0.0 <= got


def test_incoherence_empty_conventions_and_singularity():
    zero = InteractionTensor.zero(5, 3)
    empty_sup = population_fisher(zero, 0, support=[])
    assert incoherence(empty_sup) == 0.0
    sat = population_fisher(zero, 0, support=_node_features(5, 0, 3))
    assert incoherence(sat) == 0.0
    # One sample cannot support a rank-2 Q_SS.
    ten = single_edge()
    one = exact_sample(ten, 1, seed=5)
    blocks = sample_fisher_blocks(one, 0, ten, [(1, 2), (1, 3)])
    with pytest.raises(DiagnosticError):
        incoherence(blocks)


# ---------------------------------------------------------------------------
# Score at the truth.

def test_population_score_vanishes_at_truth():
    # E[z (x_r - tanh(k m_r))] = 0 for every feature, by enumeration.
    ten = single_edge()
    states, probs = oracle_joint(ten)
    feats = _node_features(5, 0, 3)
    for f in feats:
        total = 0.0
        for x, pr in zip(states, probs):
            z = float(np.prod(x[list(f)]))
            m = local_field(ten, x, 0)
            total += pr * z * (float(x[0]) - math.tanh(3.0 * m))
        assert abs(total) < 1e-12


def test_score_sup_is_grad_sup_and_shrinks():
    ten = single_edge()
    small = exact_sample(ten, 200, seed=7)
    big = exact_sample(ten, 20_000, seed=7)
    w_small = score_sup(small, 0, ten)
    w_big = score_sup(big, 0, ten)
    assert w_small == pytest.approx(
        float(np.max(np.abs(pseudo_grad(ten, small, 0, k=3)))), abs=0.0)
    assert w_big < w_small
    # sup of q=6 near-centered averages, each with per-sample scale k! = 6.
    assert w_big < 4.0 * 6.0 * math.sqrt(math.log(6.0) / big.n)


# ---------------------------------------------------------------------------
# Uniqueness certificate.

def test_uniqueness_certificate_on_planted_fit():
    ten = single_edge(coeff=0.8)
    samples = exact_sample(ten, 1500, seed=11)
    coef = solve_l1(samples, 0, 0.2, k=3)
    assert set(coef.entries) == {(1, 2)}
    cert = uniqueness_certificate(coef, samples, 0, 0.2)
    assert cert.dual_strict and cert.hessian_pd


def test_uniqueness_certificate_flags_non_optimum():
    ten = single_edge(coeff=0.8)
    samples = exact_sample(ten, 1500, seed=11)
    at_origin = SparseCoefVector(r=0, k=3)
    cert = uniqueness_certificate(at_origin, samples, 0, lam=1e-4)
    assert not cert.dual_strict


def test_uniqueness_certificate_vacuous_and_validation():
    ten = single_edge()
    samples = exact_sample(ten, 200, seed=13)
    empty = SparseCoefVector(r=0, k=3)
    cert = uniqueness_certificate(empty, samples, 0, lam=50.0)
    assert cert.dual_strict and cert.hessian_pd
    with pytest.raises(ValueError):
        uniqueness_certificate(empty, samples, 0, lam=0.0)


# ---------------------------------------------------------------------------
# Concentration probe.

def test_probe_population_row_and_deviation_shrink():
    ten = single_edge()
    table = concentration_probe(ten, 0, (100, 10_000), seed=0)
    pop = population_fisher(ten, 0)
    c_pop, d_pop = dependency_constants(pop, tensor=ten)
    assert table.population["c_min"] == pytest.approx(c_pop, abs=0.0)
    assert table.population["d_max"] == pytest.approx(d_pop, abs=0.0)
    assert table.population["incoherence"] == pytest.approx(
        incoherence(pop), abs=0.0)
    assert [row.n for row in table.rows] == [100, 10_000]
    assert table.rows[1].dev_c_min < table.rows[0].dev_c_min
    assert table.rows[1].dev_incoherence < table.rows[0].dev_incoherence


def test_probe_csv_layout():
    ten = single_edge()
    table = concentration_probe(ten, 0, (50, 100), seed=1)
    lines = table.to_csv().splitlines()
    assert lines[0] == "# concentration-probe v1"
    assert lines[1].startswith("source,n,c_min,d_max,incoherence")
    assert lines[2].startswith("population,,")
    assert lines[3].startswith("sample,50,")
    assert lines[4].startswith("sample,100,")
    assert len(lines) == 5


def test_probe_validation():
    ten = single_edge()
    with pytest.raises(ValueError):
        concentration_probe(ten, 4, (100,))  # isolated vertex
    with pytest.raises(ValueError):
        concentration_probe(ten, 0, ())
    with pytest.raises(ValueError):
        concentration_probe(ten, 0, (0,))


def test_probe_seed_replay():
    ten = single_edge()
    a = concentration_probe(ten, 0, (200,), seed=9).to_csv()
    b = concentration_probe(ten, 0, (200,), seed=9).to_csv()
    assert a == b


# ---------------------------------------------------------------------------
# Q_SS structure and the end-to-end node report.

def test_q_ss_symmetric_psd():
    rng = np.random.default_rng(83)
    ten = InteractionTensor(6, 3, {(0, 1, 2): 0.5, (0, 3, 4): -0.3,
                                   (0, 1, 5): 0.2})
    blocks = population_fisher(ten, 0)
    q = blocks.q_ss
    assert np.max(np.abs(q - q.T)) < 1e-14
    assert float(np.linalg.eigvalsh(q)[0]) > 0.0


def test_diagnose_node_end_to_end():
    ten = single_edge()
    report = diagnose_node(ten, 0, n=2000, seed=0, lam=0.3)
    assert report.c_min > 0.0
    assert report.d_max >= 1.0 - 1e-9
    assert 0.0 <= report.incoherence < 1.0
    assert report.alpha_implied == pytest.approx(1.0 - report.incoherence)
    assert report.w_sup >= 0.0
    assert isinstance(report.dual_strict, bool)
    assert isinstance(report.hessian_pd, bool)
    d = report.to_dict()
    assert d["lambda"] == 0.3
    assert d["n"] == 2000
    with pytest.raises(ValueError):
        diagnose_node(ten, 4, n=100)
