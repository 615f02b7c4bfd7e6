"""Experiment drivers: deterministic runs, manifests, bit-exact reruns.

Each ``run_*`` function is a pure function of its parameters (all random
state derives from ``seed``), so re-running the manifest written by a run
reproduces every deterministic output byte for byte.  Wall-clock timings
are segregated into ``timings.csv``, which is excluded from that guarantee.

Outputs per run directory:
    manifest.json   command, full parameter set, config content hash
    metrics.json    scalar results
    <table>.csv     per-row results (learning curves, per-instance errors)
    <name>.bin      binary sample arrays (see data_io.save_samples)
    timings.csv     wall-clock diagnostics (non-deterministic)
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np
from numpy.random import default_rng

from .data_io import (deconv_forward, gen_deconv_dataset, save_samples,
                      striped_patterns, synthetic_contour_images)
from .evaluation import (cyclic_lattice_logZ, empirical_joint, exact_log_partition,
                         kl_divergence, mmd2, pmap_logZ_upper_bound)
from .graph import GraphError, ising_graph
from .learning import TrainConfig, init_rbm, train_ising_spin, train_rbm
from .perturb import draw_gumbel
from .samplers import (DeconvPosterior, block_gibbs_rbm_sweep, ising_gibbs_run,
                       ising_pmp_sample, rbm_pmp_sample)

# Tied coupling recovered by long-run Gibbs moment matching on the 4-spin
# toy model (prior-work reference value; data generated at theta = 0.5).
GIBBS_REFERENCE_THETA = 0.331


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("pmp")
    except Exception:
        return "0.1.0"


# ---------------------------------------------------------------------------
# manifest and output plumbing
# ---------------------------------------------------------------------------

def content_hash(data: bytes) -> str:
    """Git-style blob hash of a byte string."""
    h = hashlib.sha1()
    h.update(b"blob %d\x00" % len(data))
    h.update(data)
    return h.hexdigest()


def config_hash(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return content_hash(canon.encode())


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        writer = csv.writer(fh)
        fields = list(rows[0].keys())
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fields])


def write_run(out, command: str, params: dict, metrics: dict, tables: dict,
              timings: list, arrays: dict = None) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    params = _clean(params)
    manifest = {"format": "pmp-manifest-v1", "command": command,
                "params": params, "config_hash": config_hash(params),
                "version": _version()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")
    (out / "metrics.json").write_text(json.dumps(_clean(metrics), indent=2,
                                                 sort_keys=True) + "\n")
    for name, rows in tables.items():
        _write_csv(out / f"{name}.csv", rows)
    _write_csv(out / "timings.csv", timings)
    for name, arr in (arrays or {}).items():
        save_samples(out / f"{name}.bin", arr)
    return out


def _split_timings(rows: list, table: str):
    """Pull wall_ms out of metric rows into a separate timing table."""
    det, tim = [], []
    for r in rows:
        r = dict(r)
        ms = r.pop("wall_ms", None)
        det.append(r)
        if ms is not None:
            tim.append({"table": table, "iteration": r.get("iteration", 0),
                        "wall_ms": ms})
    return det, tim


# ---------------------------------------------------------------------------
# toy model (4 spins, one tied coupling)
# ---------------------------------------------------------------------------

def _toy_phi(x01: np.ndarray) -> np.ndarray:
    """sum_{i<j} s_i s_j per row, using sum s_i s_j = ((sum s)^2 - n) / 2."""
    s = 2.0 * np.asarray(x01, dtype=np.float64) - 1.0
    return (s.sum(axis=-1) ** 2 - s.shape[-1]) / 2.0


def toy_distribution(theta: float):
    """Exact distribution of the 4-spin tied model over the 16 states."""
    states = ((np.arange(16)[:, None] >> np.arange(3, -1, -1)[None, :]) & 1)
    phi = _toy_phi(states)
    logits = theta * phi
    p = np.exp(logits - logits.max())
    return p / p.sum(), phi, states


def run_toy(seed: int = 0, iters: int = 200, chains: int = 100,
            sweeps: int = 100, lr: float = 0.01, damping: float = 0.5,
            data_theta: float = 0.5, eval_samples: int = 1_000_000,
            tail_frac: float = 0.25, budget_secs: float = None,
            out=None) -> dict:
    """Learn the tied coupling from exact data moments, then score it.

    Protocol: Adam on the single parameter, the positive phase is the
    exact data moment at ``data_theta``, the negative phase is the mean
    statistic over ``chains`` PMP samples per iteration.  The reported
    estimate averages the final ``tail_frac`` of the iterate trajectory.
    Scores: exact KL(p(data_theta) || p(theta_hat)), the same KL against
    the long-run Gibbs reference parameter, and KL against the empirical
    distribution of ``eval_samples`` PMP samples drawn at theta_hat.
    """
    params = dict(seed=seed, iters=iters, chains=chains, sweeps=sweeps,
                  lr=lr, damping=damping, data_theta=data_theta,
                  eval_samples=eval_samples, tail_frac=tail_frac,
                  budget_secs=budget_secs)
    rng = default_rng(seed)
    p_data, phi16, _ = toy_distribution(data_theta)
    mu = float(p_data @ phi16)

    theta = 0.1 * rng.standard_normal()
    m = v = 0.0
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    off_diag = 1.0 - np.eye(4)
    rows, timings = [], []
    truncated = False
    t0 = time.perf_counter()
    for it in range(iters):
        tick = time.perf_counter()
        xs = ising_pmp_sample(theta * off_diag, np.zeros(4), chains, sweeps,
                              rng, damping=damping)
        g = mu - _toy_phi(xs).mean()
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        theta += lr * (m / (1 - beta1 ** (it + 1))) / \
            (np.sqrt(v / (1 - beta2 ** (it + 1))) + eps_adam)
        rows.append({"iteration": it, "theta": theta, "grad": g})
        timings.append({"table": "learning", "iteration": it,
                        "wall_ms": 1000.0 * (time.perf_counter() - tick)})
        if budget_secs is not None and time.perf_counter() - t0 > budget_secs:
            truncated = True
            break
    if rows:
        tail = max(1, int(tail_frac * len(rows)))
        theta_hat = float(np.mean([r["theta"] for r in rows[-tail:]]))
    else:
        theta_hat = float(theta)

    p_hat, _, _ = toy_distribution(theta_hat)
    p_ref, _, _ = toy_distribution(GIBBS_REFERENCE_THETA)
    kl_model = kl_divergence(p_data, p_hat)
    kl_ref = kl_divergence(p_data, p_ref)

    n_eval = eval_samples if not truncated else min(eval_samples, 100_000)
    counts = np.zeros(16)
    weights = 1 << np.arange(3, -1, -1)
    done = 0
    while done < n_eval:
        block = min(100_000, n_eval - done)
        xs = ising_pmp_sample(theta_hat * off_diag, np.zeros(4), block,
                              sweeps, rng, damping=damping)
        counts += np.bincount(xs @ weights, minlength=16)
        done += block
    q = (counts + 0.5) / (counts + 0.5).sum()
    kl_sampler = kl_divergence(p_data, q)

    metrics = {"theta_hat": theta_hat, "data_moment": mu,
               "kl_model": kl_model, "kl_gibbs_reference": kl_ref,
               "kl_sampler": kl_sampler, "eval_samples_used": int(done),
               "truncated": truncated}
    result = {"metrics": metrics, "tables": {"learning": rows}}
    if out is not None:
        write_run(out, "toy", params, metrics, result["tables"], timings)
    return result


# ---------------------------------------------------------------------------
# log-partition bound
# ---------------------------------------------------------------------------

def _torus_couplings(rows: int, cols: int, theta: float) -> np.ndarray:
    n = rows * cols
    J = np.zeros((n, n))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for j in (r * cols + (c + 1) % cols, ((r + 1) % rows) * cols + c):
                J[i, j] = J[j, i] = theta
    return J


def _kernel_bound(J, h, draws, sweeps, damping, rng):
    """PMP estimate of E[max perturbed objective] via the matrix kernel."""
    graph = ising_graph(J, h)
    n = h.shape[0]
    eps = draw_gumbel(rng, (draws, n, 2))
    x = ising_pmp_sample(J, h, draws, sweeps, rng=None, damping=damping, eps=eps)
    from .evaluation import perturbed_objective
    vals = perturbed_objective(graph, x, eps.reshape(draws, 2 * n))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(draws))


def run_bound(seed: int = 0, kind: str = "lattice", rows: int = 5,
              cols: int = 5, theta: float = 0.1, n: int = 10,
              instances: int = 100, w_lo: float = -2.0, w_hi: float = 2.0,
              b_lo: float = -0.1, b_hi: float = 0.1, draws: int = 500,
              sweeps: int = 200, damping: float = 0.5,
              budget_secs: float = None, out=None) -> dict:
    """Exact log Z vs the perturb-and-MAP upper-bound estimate.

    Kinds: "lattice" (toroidal, tied coupling; exact value by transfer
    matrix), "random" (fully connected spin models, exact by enumeration,
    one row per instance), "unary" (factorless control; the estimate is
    exact in expectation).
    """
    params = dict(seed=seed, kind=kind, rows=rows, cols=cols, theta=theta,
                  n=n, instances=instances, w_lo=w_lo, w_hi=w_hi, b_lo=b_lo,
                  b_hi=b_hi, draws=draws, sweeps=sweeps, damping=damping,
                  budget_secs=budget_secs)
    rng = default_rng(seed)
    table, timings = [], []
    truncated = False
    t0 = time.perf_counter()
    if kind == "lattice":
        exact = cyclic_lattice_logZ(rows, cols, theta)
        J = _torus_couplings(rows, cols, theta)
        est, se = _kernel_bound(J, np.zeros(rows * cols), draws, sweeps,
                                damping, rng)
        table.append({"instance": 0, "exact_logZ": exact, "estimate": est,
                      "std_err": se, "signed_error": est - exact})
    elif kind == "random":
        for k in range(instances):
            tick = time.perf_counter()
            J = rng.uniform(w_lo, w_hi, size=(n, n))
            J = np.triu(J, 1)
            J = J + J.T
            h = rng.uniform(b_lo, b_hi, size=n)
            exact = exact_log_partition(ising_graph(J, h))
            est, se = _kernel_bound(J, h, draws, sweeps, damping, rng)
            table.append({"instance": k, "exact_logZ": exact, "estimate": est,
                          "std_err": se, "signed_error": est - exact})
            timings.append({"table": "bound", "iteration": k,
                            "wall_ms": 1000.0 * (time.perf_counter() - tick)})
            if budget_secs is not None and \
                    time.perf_counter() - t0 > budget_secs:
                truncated = True
                break
    elif kind == "unary":
        from .graph import FactorGraph
        from .samplers import pmp_sample
        from .evaluation import perturbed_objective
        unaries = [rng.normal(size=2) for _ in range(n)]
        graph = FactorGraph([2] * n, (), unaries)
        exact = exact_log_partition(graph)
        eps = draw_gumbel(rng, (draws, 2 * n))
        x = pmp_sample(graph, sweeps, rng=None, damping=damping,
                       n_samples=draws, eps=eps)
        vals = perturbed_objective(graph, x, eps)
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(draws))
        table.append({"instance": 0, "exact_logZ": exact, "estimate": est,
                      "std_err": se, "signed_error": est - exact})
    else:
        raise GraphError(f"unknown bound kind {kind!r}")
    errors = np.array([r["signed_error"] for r in table])
    rel = np.array([abs(r["signed_error"]) / max(abs(r["exact_logZ"]), 1e-12)
                    for r in table])
    metrics = {"mean_signed_error": float(errors.mean()),
               "mean_abs_rel_error": float(rel.mean()),
               "instances": len(table), "truncated": truncated}
    result = {"metrics": metrics, "tables": {"bound": table}}
    if out is not None:
        write_run(out, "bound", params, metrics, result["tables"], timings)
    return result


# ---------------------------------------------------------------------------
# Ising learning on contour images
# ---------------------------------------------------------------------------

def run_ising(seed: int = 0, method: str = "pmp", n_images: int = 200,
              side: int = 12, holdout_frac: float = 0.2, iters: int = 150,
              lr: float = 0.01, optimizer: str = "adam", chains: int = 50,
              sweeps: int = 30, damping: float = 0.5, l1: float = 0.0,
              eval_sweeps=(1, 10, 50), eval_samples: int = 200,
              budget_secs: float = None, out=None) -> dict:
    """Train a fully connected spin model on synthetic contour images.

    Holds out a fraction of the images, trains with the requested
    negative-phase sampler, then reports MMD^2 against the held-out set
    for PMP and Gibbs-reset sampling at several sweep counts, plus a
    uniform-random baseline row.
    """
    params = dict(seed=seed, method=method, n_images=n_images, side=side,
                  holdout_frac=holdout_frac, iters=iters, lr=lr,
                  optimizer=optimizer, chains=chains, sweeps=sweeps,
                  damping=damping, l1=l1, eval_sweeps=list(eval_sweeps),
                  eval_samples=eval_samples, budget_secs=budget_secs)
    rng = default_rng(seed)
    imgs = synthetic_contour_images(n_images, side, rng).images
    flat = imgs.reshape(n_images, -1)
    perm = rng.permutation(n_images)
    n_hold = int(round(holdout_frac * n_images))
    held, train_set = flat[perm[:n_hold]], flat[perm[n_hold:]]

    cfg = TrainConfig(iters=iters, lr=lr, minibatch=chains, sweeps=sweeps,
                      damping=damping, optimizer=optimizer, l1=l1,
                      init_sigma=0.0, budget_secs=budget_secs)
    res = train_ising_spin(train_set, cfg, rng, method=method)
    learning, timings = _split_timings(res.metrics, "learning")

    n = flat.shape[1]
    mmd_rows = []
    for t_eval in eval_sweeps:
        xs = ising_pmp_sample(res.J, res.h, eval_samples, int(t_eval), rng,
                              damping=damping)
        mmd_rows.append({"sampler": "pmp", "sweeps": int(t_eval),
                         "mmd2": mmd2(xs, held)})
        x0 = (rng.random((eval_samples, n)) < 0.5).astype(np.int8)
        xg, _ = ising_gibbs_run(res.J, res.h, x0, int(t_eval), rng)
        mmd_rows.append({"sampler": "gibbs-reset", "sweeps": int(t_eval),
                         "mmd2": mmd2(xg, held)})
    xu = (rng.random((eval_samples, n)) < 0.5).astype(np.int8)
    mmd_rows.append({"sampler": "uniform", "sweeps": 0, "mmd2": mmd2(xu, held)})

    metrics = {"final_grad_norm": learning[-1]["grad_norm"] if learning else None,
               "mmd2_pmp_max_sweeps": mmd_rows[-3]["mmd2"],
               "mmd2_uniform": mmd_rows[-1]["mmd2"],
               "truncated": res.truncated}
    result = {"metrics": metrics,
              "tables": {"learning": learning, "mmd": mmd_rows}}
    if out is not None:
        write_run(out, "ising", params, metrics, result["tables"], timings,
                  arrays={"J": _quantize_params(res.J),
                          "train_images": imgs.astype(np.uint8)})
        np.save(Path(out) / "J.npy", res.J)
        np.save(Path(out) / "h.npy", res.h)
    return result


def _quantize_params(J: np.ndarray) -> np.ndarray:
    """Coarse u8 preview of a weight matrix for the binary sample format."""
    lo, hi = J.min(), J.max()
    span = hi - lo if hi > lo else 1.0
    return np.round(255 * (J - lo) / span).astype(np.uint8)


# ---------------------------------------------------------------------------
# RBM on striped patterns
# ---------------------------------------------------------------------------

def run_rbm(seed: int = 0, method: str = "pmp", n_hidden: int = 32,
            side: int = 8, n_images: int = 2000, holdout_frac: float = 0.2,
            iters: int = 600, lr: float = 0.01, optimizer: str = "sgd",
            chains: int = 100, sweeps: int = 30, damping: float = 0.5,
            pcd_sweeps: int = 1, avg_tail: float = 0.4,
            eval_sweeps=(10, 100), eval_samples: int = 800,
            budget_secs: float = None, out=None) -> dict:
    """Train an RBM on stripe images; compare samplers by MMD^2.

    The evaluation table scores the trained model with PMP and
    Gibbs-reset sampling at each sweep count, and the untrained
    initialization with PMP (the baseline a trained model must beat).
    """
    params = dict(seed=seed, method=method, n_hidden=n_hidden, side=side,
                  n_images=n_images, holdout_frac=holdout_frac, iters=iters,
                  lr=lr, optimizer=optimizer, chains=chains, sweeps=sweeps,
                  damping=damping, pcd_sweeps=pcd_sweeps, avg_tail=avg_tail,
                  eval_sweeps=list(eval_sweeps), eval_samples=eval_samples,
                  budget_secs=budget_secs)
    rng = default_rng(seed)
    flat = striped_patterns(n_images, side, rng).images.reshape(n_images, -1)
    perm = rng.permutation(n_images)
    n_hold = int(round(holdout_frac * n_images))
    held, train_set = flat[perm[:n_hold]], flat[perm[n_hold:]]
    n_vis = flat.shape[1]

    W0, b0, c0 = init_rbm(n_hidden, n_vis, rng)
    cfg = TrainConfig(iters=iters, lr=lr, minibatch=chains, sweeps=sweeps,
                      damping=damping, optimizer=optimizer,
                      avg_tail=avg_tail, budget_secs=budget_secs)
    res = train_rbm(train_set, W0, b0, c0, cfg, rng, method=method,
                    pcd_sweeps=pcd_sweeps)
    learning, timings = _split_timings(res.metrics, "learning")

    mmd_rows = []
    for t_eval in eval_sweeps:
        t_eval = int(t_eval)
        v, _ = rbm_pmp_sample(res.W, res.b, res.c, eval_samples, t_eval, rng,
                              damping=damping)
        mmd_rows.append({"model": "trained", "sampler": "pmp",
                         "sweeps": t_eval, "mmd2": mmd2(v, held)})
        vg = (rng.random((eval_samples, n_vis)) < 0.5).astype(np.int8)
        hg = np.zeros((eval_samples, n_hidden), dtype=np.int8)
        for _ in range(t_eval):
            vg, hg = block_gibbs_rbm_sweep(res.W, res.b, res.c, (vg, hg), rng)
        mmd_rows.append({"model": "trained", "sampler": "gibbs-reset",
                         "sweeps": t_eval, "mmd2": mmd2(vg, held)})
        vu, _ = rbm_pmp_sample(W0, b0, c0, eval_samples, t_eval, rng,
                               damping=damping)
        mmd_rows.append({"model": "untrained", "sampler": "pmp",
                         "sweeps": t_eval, "mmd2": mmd2(vu, held)})

    by_key = {(r["model"], r["sampler"], r["sweeps"]): r["mmd2"]
              for r in mmd_rows}
    t_max = int(max(eval_sweeps))
    metrics = {"mmd2_pmp": by_key[("trained", "pmp", t_max)],
               "mmd2_gibbs_reset": by_key[("trained", "gibbs-reset", t_max)],
               "mmd2_untrained": by_key[("untrained", "pmp", t_max)],
               "log_gap_untrained": float(np.log(by_key[("untrained", "pmp", t_max)])
                                          - np.log(by_key[("trained", "pmp", t_max)])),
               "log_gap_gibbs": float(np.log(by_key[("trained", "gibbs-reset", t_max)])
                                      - np.log(by_key[("trained", "pmp", t_max)])),
               "truncated": res.truncated}
    result = {"metrics": metrics,
              "tables": {"learning": learning, "mmd": mmd_rows}}
    if out is not None:
        write_run(out, "rbm", params, metrics, result["tables"], timings)
        np.save(Path(out) / "W.npy", res.W)
        np.save(Path(out) / "b.npy", res.b)
        np.save(Path(out) / "c.npy", res.c)
    return result


# ---------------------------------------------------------------------------
# blind deconvolution
# ---------------------------------------------------------------------------

def run_deconv(seed: int = 0, n_images: int = 20, n_feat_true: int = 3,
               fh: int = 3, fw: int = 3, s_h: int = 10, s_w: int = 10,
               slots: int = 4, infer_fh: int = None, infer_fw: int = None,
               feature_density: float = 0.5,
               location_density: float = 0.01, sweeps: int = 1000,
               damping: float = 0.5, prior_w: float = -3.0,
               prior_s: float = -3.0, budget_secs: float = None,
               out=None) -> dict:
    """Posterior-sample (W, S) from OR-convolution images; score X recovery.

    Generates ground truth, runs the vectorized PMP posterior for the
    requested sweeps, regenerates X from the sampled (W, S) through the
    forward model, and reports pixel agreement with the observed X.
    Inference may assume more slots than the true feature count and, via
    ``infer_fh``/``infer_fw``, larger feature windows; X is then
    zero-padded bottom/right so the placement grid keeps its size.
    """
    params = dict(seed=seed, n_images=n_images, n_feat_true=n_feat_true,
                  fh=fh, fw=fw, s_h=s_h, s_w=s_w, slots=slots,
                  infer_fh=infer_fh, infer_fw=infer_fw,
                  feature_density=feature_density,
                  location_density=location_density, sweeps=sweeps,
                  damping=damping, prior_w=prior_w, prior_s=prior_s,
                  budget_secs=budget_secs)
    rng = default_rng(seed)
    truth = gen_deconv_dataset(n_images, n_feat_true, fh, fw, s_h, s_w,
                               feature_density, location_density, rng)
    ifh = fh if infer_fh is None else infer_fh
    ifw = fw if infer_fw is None else infer_fw
    if ifh < fh or ifw < fw:
        raise GraphError("inference feature window smaller than generation")
    X = np.pad(truth.X, ((0, 0), (0, ifh - fh), (0, ifw - fw)))
    post = DeconvPosterior(X, slots, ifh, ifw, prior_w=prior_w,
                           prior_s=prior_s)
    tick = time.perf_counter()
    w_hat, s_hat = post.sample(sweeps, rng, damping=damping)
    wall = 1000.0 * (time.perf_counter() - tick)
    x_hat = deconv_forward(w_hat, s_hat)
    agree = (x_hat == X).mean(axis=(1, 2))
    table = [{"image": int(i), "pixel_agreement": float(a)}
             for i, a in enumerate(agree)]
    metrics = {"pixel_agreement": float(agree.mean()),
               "min_image_agreement": float(agree.min()),
               "n_latent": post.n_latent,
               "total_variables": post.total_variables(),
               "truncated": False}
    timings = [{"table": "deconv", "iteration": 0, "wall_ms": wall}]
    result = {"metrics": metrics, "tables": {"deconv": table}}
    if out is not None:
        write_run(out, "deconv", params, metrics, result["tables"], timings,
                  arrays={"X": X, "W_hat": w_hat.astype(np.uint8),
                          "S_hat": s_hat.astype(np.uint8),
                          "X_hat": x_hat.astype(np.uint8)})
    return result


# ---------------------------------------------------------------------------
# LP export
# ---------------------------------------------------------------------------

def run_lp_export(seed: int = 0, model: str = "ising", n: int = 6,
                  m: int = 3, w_scale: float = 1.0, budget_secs: float = None,
                  out=None) -> dict:
    """Build the reduced LP of a random model and serialize it."""
    from .lp_export import parse_lp, reduced_lp_ising, reduced_lp_rbm, serialize_lp
    params = dict(seed=seed, model=model, n=n, m=m, w_scale=w_scale,
                  budget_secs=budget_secs)
    rng = default_rng(seed)
    if model == "ising":
        W = rng.uniform(-w_scale, w_scale, size=(n, n))
        W = np.triu(W, 1)
        W = W + W.T
        b = rng.uniform(-w_scale, w_scale, size=n)
        lp = reduced_lp_ising(W, b)
    elif model == "rbm":
        W = rng.uniform(-w_scale, w_scale, size=(m, n))
        lp = reduced_lp_rbm(W, rng.uniform(-1, 1, size=m),
                            rng.uniform(-1, 1, size=n))
    else:
        raise GraphError(f"unknown LP model {model!r}")
    text = serialize_lp(lp)
    back = parse_lp(text)
    roundtrip_ok = (back.names == lp.names
                    and np.array_equal(back.objective, lp.objective)
                    and len(back.rows) == len(lp.rows))
    metrics = {"n_vars": lp.n_vars, "n_rows": lp.n_rows,
               "roundtrip_ok": bool(roundtrip_ok), "truncated": False}
    result = {"metrics": metrics, "tables": {}, "lp_text": text}
    if out is not None:
        write_run(out, "lp-export", params, metrics, {}, [])
        (Path(out) / "model.lp").write_text(text)
    return result


COMMANDS = {"toy": run_toy, "bound": run_bound, "ising": run_ising,
            "rbm": run_rbm, "deconv": run_deconv, "lp-export": run_lp_export}


def rerun_manifest(manifest_path, out=None) -> dict:
    """Re-execute a recorded run; deterministic outputs match byte-exactly."""
    manifest = json.loads(Path(manifest_path).read_text())
    if manifest.get("format") != "pmp-manifest-v1":
        raise GraphError("not a run manifest")
    command = manifest["command"]
    if command not in COMMANDS:
        raise GraphError(f"unknown command {command!r} in manifest")
    return COMMANDS[command](out=out, **manifest["params"])
