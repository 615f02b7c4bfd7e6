"""End-to-end acceptance checks, one headline requirement per test.

Each test prints a single PASS/FAIL line with the measured numbers
(visible under ``pytest -s`` and in failure output) and then asserts the
stated tolerance.  The per-module test files hold the fast unit oracles;
this file runs the full experimental protocols, so it is the slow part
of the suite (several minutes total).
"""

import json
from collections import deque

import numpy as np
import pytest
from numpy.random import default_rng
from scipy import stats

from pmp.data_io import build_deconv_graph, gen_deconv_dataset
from pmp.evaluation import (
    empirical_joint,
    enumerate_states,
    exact_distribution,
    exact_log_partition,
    exact_map_perturbed,
    exact_marginals,
    mmd2,
    perturbed_objective,
    pmap_logZ_upper_bound,
    total_variation,
)
from pmp.experiments import rerun_manifest, run_deconv, run_rbm, run_toy
from pmp.graph import (
    Factor,
    FactorGraph,
    IsingEdge,
    binary_pairwise_graph,
    ising_graph,
    rbm_graph,
)
from pmp.learning import TrainConfig, train_ising_spin
from pmp.lp_export import (
    full_bipartite_objective,
    full_bipartite_violations,
    full_lp_objective,
    full_lp_violations,
    map_reduced_to_full,
    map_reduced_to_full_rbm,
    reduced_lp_ising,
    reduced_lp_rbm,
    sample_feasible_reduced_ising,
    sample_feasible_reduced_rbm,
)
from pmp.perturb import EULER_GAMMA, PersistentGumbel, draw_gumbel
from pmp.samplers import (
    DeconvPosterior,
    ising_gibbs_run,
    ising_pmp_sample,
    pmp_sample,
    rbm_pmp_sample,
    spin_kernel_params,
)


def _report(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# -- 1: single-edge toy model, learned parameter and KLs ---------------------

def test_01_toy_model_learning_and_sampling():
    m = run_toy(seed=0)["metrics"]
    ok = (0.30 <= m["theta_hat"] <= 0.36
          and 0.10 <= m["kl_model"] <= 0.14
          and m["kl_sampler"] <= 0.02
          and m["eval_samples_used"] == 1_000_000)
    _report("toy learning", ok,
            f"theta_hat={m['theta_hat']:.4f} (want [0.30, 0.36]), "
            f"kl_model={m['kl_model']:.4f} (want [0.10, 0.14]), "
            f"kl_sampler={m['kl_sampler']:.4f} (want <= 0.02)")


# -- 2: unary-only models are sampled exactly --------------------------------

def test_02_unary_only_models_match_softmax():
    rng = default_rng(42)
    worst = 0.0
    done = 0
    while done < 20:
        nv = int(rng.integers(1, 6))
        cards = [int(rng.integers(2, 5)) for _ in range(nv)]
        if np.prod(cards) > 32:
            continue
        unaries = [rng.normal(0.0, 1.0, k) for k in cards]
        graph = FactorGraph(cards, [], unaries)
        xs = pmp_sample(graph, sweeps=1, rng=rng, n_samples=100_000)
        tv = total_variation(empirical_joint(xs, cards, smoothing=0.0),
                             exact_distribution(graph))
        worst = max(worst, tv)
        done += 1
    _report("unary exactness", worst < 0.01,
            f"worst TV over 20 models = {worst:.4f} (want < 0.01)")


# -- 3: trees solved exactly in diameter+2 sweeps ----------------------------

def _random_tree(rng, n: int, chain: bool):
    edges = [(i - 1 if chain else int(rng.integers(0, i)), i)
             for i in range(1, n)]
    factors = [Factor((a, b), IsingEdge(float(rng.normal(0.0, 1.0))))
               for a, b in edges]
    unaries = [rng.normal(0.0, 1.0, 2) for _ in range(n)]
    return FactorGraph([2] * n, factors, unaries), edges


def _diameter(n: int, edges) -> int:
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)

    def farthest(src):
        dist = [-1] * n
        dist[src] = 0
        q = deque([src])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    q.append(w)
        far = int(np.argmax(dist))
        return far, dist[far]

    far, _ = farthest(0)
    return farthest(far)[1]


def test_03_tree_perturbed_map_is_exact():
    rng = default_rng(7)
    hits = 0
    for trial in range(100):
        n = int(rng.integers(2, 13))
        graph, edges = _random_tree(rng, n, chain=(trial % 2 == 0))
        eps = draw_gumbel(rng, (1, 2 * n))
        sweeps = _diameter(n, edges) + 2
        x = pmp_sample(graph, sweeps, rng=None, damping=1.0, eps=eps)
        x_star, _ = exact_map_perturbed(graph, eps)
        hits += int(np.array_equal(x, x_star))
    _report("tree exactness", hits == 100, f"{hits}/100 exact perturbed MAPs")


# -- 4: specialized kernels match the generic dense engine -------------------

def test_04_kernels_match_generic_engine():
    rng = default_rng(5)
    worst = 0.0
    for _ in range(50):  # Ising matrix kernel
        n = 6
        A = rng.normal(0.0, 0.6, (n, n))
        J = np.triu(A, 1) + np.triu(A, 1).T
        h = rng.normal(0.0, 0.4, n)
        eps = draw_gumbel(rng, (1, n, 2))
        xk = ising_pmp_sample(J, h, 1, 30, rng=None, eps=eps)
        graph = binary_pairwise_graph(*spin_kernel_params(J, h))
        xg = pmp_sample(graph, 30, rng=None, n_samples=1,
                        eps=eps.reshape(1, -1))
        assert np.array_equal(xk, xg)
        gap = abs(perturbed_objective(graph, xk, eps.reshape(1, -1))[0]
                  - perturbed_objective(graph, xg, eps.reshape(1, -1))[0])
        worst = max(worst, gap)
    for _ in range(50):  # RBM block kernel
        m, n = 3, 4
        W = rng.normal(0.0, 0.8, (m, n))
        b = rng.normal(0.0, 0.5, m)
        c = rng.normal(0.0, 0.5, n)
        eps = draw_gumbel(rng, (1, m + n, 2))
        v, hid = rbm_pmp_sample(W, b, c, 1, 30, rng=None, eps=eps)
        xg = pmp_sample(rbm_graph(W, b, c), 30, rng=None, n_samples=1,
                        eps=eps.reshape(1, -1))
        assert np.array_equal(hid, xg[:, :m]) and np.array_equal(v, xg[:, m:])
    for _ in range(50):  # OR and AND scalar kernels (deconvolution posterior)
        truth = gen_deconv_dataset(1, 2, 2, 2, 2, 2, 0.5, 0.3, rng)
        post = DeconvPosterior(truth.X, 2, 2, 2)
        eps = post.draw_eps(rng)
        Wk, Sk = post.sample(12, rng=None, eps=eps)
        graph = build_deconv_graph(truth.X, 2, 2, 2)
        xg = pmp_sample(graph, 12, rng=None, n_samples=1,
                        eps=eps.reshape(1, -1))[0]
        assert np.array_equal(Wk.ravel(), xg[:post.n_w])
        assert np.array_equal(Sk.ravel(), xg[post.n_w:post.n_w + post.n_s])
    _report("kernel equivalence", worst <= 1e-9,
            f"150/150 state matches, worst objective gap = {worst:.2e}")


# -- 5: perturbed-MAP upper bound on log Z -----------------------------------

def test_05_log_partition_bound():
    rng = default_rng(19)
    gaps = []
    for trial in range(50):
        n = int(rng.integers(3, 9))
        graph, _ = _random_tree(rng, n, chain=(trial % 2 == 0))
        est, _ = pmap_logZ_upper_bound(graph, 30, rng, map_solver="exact")
        gaps.append(est - exact_log_partition(graph))
    p_val = stats.ttest_1samp(gaps, 0.0, alternative="greater").pvalue

    side = 4
    J = np.zeros((side * side, side * side))
    for r in range(side):
        for c in range(side):
            i = r * side + c
            if c + 1 < side:
                J[i, i + 1] = J[i + 1, i] = 0.1
            if r + 1 < side:
                J[i, i + side] = J[i + side, i] = 0.1
    lattice = ising_graph(J, np.zeros(side * side))
    exact = exact_log_partition(lattice)
    est, _ = pmap_logZ_upper_bound(lattice, 500, rng, map_solver="pmp",
                                   sweeps=200, damping=0.5)
    rel = abs(est - exact) / abs(exact)
    ok = p_val < 0.05 and rel < 0.05
    _report("logZ bound", ok,
            f"tree gap mean={np.mean(gaps):.3f}, one-sided p={p_val:.2e} "
            f"(want < 0.05); lattice rel err={rel:.4f} (want < 0.05)")


# -- 6: Gibbs baseline matches enumerated marginals --------------------------

def test_06_gibbs_marginals_match_enumeration():
    rng = default_rng(11)
    worst = 0.0
    for _ in range(10):
        n = 5
        A = rng.normal(0.0, 0.5, (n, n))
        J = np.triu(A, 1) + np.triu(A, 1).T
        h = rng.normal(0.0, 0.3, n)
        exact = np.array([m[1] for m in exact_marginals(ising_graph(J, h))])
        x0 = (rng.random((1, n)) < 0.5).astype(np.int8)
        _, occ = ising_gibbs_run(J, h, x0, 100_000, rng, burn=1000)
        worst = max(worst, np.abs(occ - exact).max())
    _report("gibbs baseline", worst < 0.01,
            f"worst marginal gap over 10 models = {worst:.4f} (want < 0.01)")


# -- 7: fully observed Ising learning recovers the data moments --------------

def test_07_ising_learning_matches_data_moments():
    rng = default_rng(3)
    n = 6
    A = rng.normal(0.0, 0.4, (n, n))
    J_true = np.triu(A, 1) + np.triu(A, 1).T
    h_true = rng.normal(0.0, 0.2, n)
    p = exact_distribution(ising_graph(J_true, h_true))
    states = enumerate_states([2] * n)
    X = states[rng.choice(p.size, size=1200, p=p)].astype(np.int8)
    X_train, X_held = X[:1000], X[1000:]

    coarse = TrainConfig(iters=300, lr=0.02, minibatch=200, sweeps=20,
                         damping=0.5, optimizer="adam", init_sigma=0.0)
    fine = TrainConfig(iters=400, lr=0.005, minibatch=500, sweeps=20,
                       damping=0.5, optimizer="adam", avg_tail=0.5)
    stage1 = train_ising_spin(X_train, coarse, rng)
    fit = train_ising_spin(X_train, fine, rng, J0=stage1.J, h0=stage1.h)

    xs = ising_pmp_sample(fit.J, fit.h, 50_000, 20, rng, damping=0.5)

    def moments(x01):
        s = 2.0 * np.asarray(x01, dtype=np.float64) - 1.0
        second = s.T @ s / s.shape[0]
        np.fill_diagonal(second, 0.0)
        return second, s.mean(axis=0)

    m2s, m1s = moments(xs)
    m2d, m1d = moments(X_train)
    gap = max(np.abs(m2s - m2d).max(), np.abs(m1s - m1d).max())

    mmd_pmp = mmd2(xs[:2000], X_held)
    uniform = (rng.random((2000, n)) < 0.5).astype(np.int8)
    mmd_uni = mmd2(uniform, X_held)
    factor = mmd_uni / mmd_pmp
    ok = gap < 0.03 and factor >= 5.0
    _report("ising learning", ok,
            f"moment gap = {gap:.4f} (want < 0.03), "
            f"MMD2 uniform/PMP = {factor:.1f} (want >= 5)")


# -- 8: RBM training beats untrained and matches Gibbs-reset -----------------

def test_08_rbm_training_quality():
    m = run_rbm(seed=0, method="pmp", optimizer="sgd", lr=0.02, iters=1000,
                chains=100, sweeps=30, damping=0.5, avg_tail=0.4,
                n_images=2000, eval_sweeps=(100,), eval_samples=1600)["metrics"]
    ok = m["log_gap_untrained"] >= 2.0 and m["log_gap_gibbs"] >= 0.0
    _report("rbm training", ok,
            f"log MMD2 gap vs untrained = {m['log_gap_untrained']:.3f} nats "
            f"(want >= 2), vs gibbs-reset = {m['log_gap_gibbs']:+.3f} "
            f"(want >= 0)")


# -- 9: blind deconvolution reconstructs the images --------------------------

def test_09_blind_deconvolution_reconstruction():
    scores = [run_deconv(seed=s)["metrics"]["pixel_agreement"]
              for s in range(5)]
    ok = min(scores) >= 0.95
    _report("deconvolution", ok,
            "pixel agreement by seed = "
            + ", ".join(f"{a:.4f}" for a in scores) + " (want all >= 0.95)")


# -- 10: reduced LP maps onto the standard local-polytope LP -----------------

def test_10_lp_equivalence_and_counts():
    for n in range(2, 21):
        lp = reduced_lp_ising(np.zeros((n, n)), np.zeros(n))
        assert len(lp.names) == n * n
        assert len(lp.rows) == 4 * n * n - 3 * n

    rng = default_rng(23)
    worst = 0.0
    for k in range(50):
        n = 2 + k % 5
        A = rng.normal(0.0, 1.0, (n, n))
        W = np.triu(A, 1) + np.triu(A, 1).T
        b = rng.normal(0.0, 1.0, n)
        z = sample_feasible_reduced_ising(n, rng)
        assert not reduced_lp_ising(W, b).violations(z)
        p, q = map_reduced_to_full(z, n)
        assert not full_lp_violations(p, q)
        worst = max(worst, abs(full_lp_objective(W, b, p, q)
                               - reduced_lp_ising(W, b).objective @ z))
    for _ in range(50):
        m = n = 3
        W = rng.normal(0.0, 1.0, (m, n))
        b = rng.normal(0.0, 1.0, m)
        c = rng.normal(0.0, 1.0, n)
        z = sample_feasible_reduced_rbm(m, n, rng)
        assert not reduced_lp_rbm(W, b, c).violations(z)
        p_h, p_v, q = map_reduced_to_full_rbm(z, m, n)
        assert not full_bipartite_violations(p_h, p_v, q)
        worst = max(worst, abs(full_bipartite_objective(W, b, c, p_h, p_v, q)
                               - reduced_lp_rbm(W, b, c).objective @ z))
    _report("lp equivalence", worst <= 1e-10,
            f"100/100 mapped points feasible, worst objective gap = "
            f"{worst:.2e} (want <= 1e-10)")


# -- 11: persistent noise keeps the correct marginal law ---------------------

def test_11_persistent_noise_marginals():
    rng = default_rng(8)
    p_values = {}
    for rho in (0.0, 0.5, 0.9):
        pg = PersistentGumbel(rho, (100_000,))
        for _ in range(4):
            draws = pg.step(rng)
        p_values[rho] = stats.kstest(
            draws, stats.gumbel_r(loc=-EULER_GAMMA).cdf).pvalue
    frozen = PersistentGumbel(1.0, (1000,))
    first = frozen.step(rng).copy()
    identical = np.array_equal(first, frozen.step(rng))
    ok = all(p > 0.01 for p in p_values.values()) and identical
    _report("persistent noise", ok,
            "KS p-values " + ", ".join(f"rho={r}: {p:.3f}"
                                       for r, p in p_values.items())
            + f" (want all > 0.01); rho=1 draws identical: {identical}")


# -- 12: manifests reproduce runs bit-exactly --------------------------------

def test_12_manifest_rerun_is_bit_exact(tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    run_toy(seed=5, iters=4, chains=10, sweeps=3, eval_samples=2000,
            out=first)
    rerun_manifest(first / "manifest.json", second)
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    diffs = [name for name in names
             if name != "timings.csv"
             and (first / name).read_bytes() != (second / name).read_bytes()]
    _report("determinism", not diffs,
            f"{len(names) - 1} regenerated files bit-identical "
            f"(wall-clock timings.csv excluded); mismatches: {diffs or 'none'}")
