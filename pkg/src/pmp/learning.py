"""Maximum-likelihood learning by PMP moment matching.

The log-likelihood gradient of an exponential-family model is the moment
gap E_data[Phi] - E_model[Phi].  Both expectations are estimated with S
samples per iteration: the positive phase clamps a random data row and
samples the hidden remainder (for fully observed models this is just the
data statistics), the negative phase samples the unclamped model.  Updates
ascend with SGD or Adam; an optional L1 penalty is applied as a post-step
soft-threshold on pairwise weights only (biases and unaries are never
shrunk).

Minibatches draw data rows with replacement.  Positive and negative
samples use independent noise draws.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graph import FactorGraph, GraphError
from .perturb import PersistentGumbel
from .samplers import (block_gibbs_rbm_sweep, ising_gibbs_run,
                       ising_pmp_sample, pmp_posterior_sample, pmp_sample,
                       rbm_pmp_sample, _sigmoid)


@dataclass
class TrainConfig:
    iters: int = 100
    lr: float = 0.01
    minibatch: int = 1            # sample pairs per iteration (S)
    sweeps: int = 50              # message/Gibbs sweeps per sample (T)
    damping: float = 0.5
    optimizer: str = "adam"       # adam | sgd
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    l1: float = 0.0
    init_sigma: float = 0.1       # theta ~ N(0, init_sigma^2)
    rho: float = None             # persistent-noise correlation (None = fresh)
    budget_secs: float = None
    avg_tail: float = 0.0         # Polyak-average params over final fraction

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise GraphError(f"unknown optimizer {self.optimizer!r}")
        if self.iters < 0 or self.minibatch < 1 or self.sweeps < 0:
            raise GraphError("iters/minibatch/sweeps out of range")
        if not 0.0 < self.damping <= 1.0:
            raise GraphError("damping must lie in (0, 1]")
        if self.l1 < 0.0:
            raise GraphError("l1 strength must be >= 0")
        if not 0.0 <= self.avg_tail <= 1.0:
            raise GraphError("avg_tail must lie in [0, 1]")


@dataclass
class TrainState:
    theta: np.ndarray
    m: np.ndarray = None
    v: np.ndarray = None
    step: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros_like(self.theta)
        if self.v is None:
            self.v = np.zeros_like(self.theta)


def sgd_step(state: TrainState, grad: np.ndarray, config: TrainConfig) -> TrainState:
    return TrainState(theta=state.theta + config.lr * grad,
                      m=state.m, v=state.v, step=state.step + 1)


def adam_step(state: TrainState, grad: np.ndarray, config: TrainConfig) -> TrainState:
    t = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1 ** t)
    v_hat = v / (1.0 - config.beta2 ** t)
    theta = state.theta + config.lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return TrainState(theta=theta, m=m, v=v, step=t)


def take_step(state: TrainState, grad: np.ndarray, config: TrainConfig,
              l1_mask: np.ndarray = None) -> TrainState:
    step = adam_step if config.optimizer == "adam" else sgd_step
    state = step(state, grad, config)
    if config.l1 > 0.0 and l1_mask is not None:
        th = state.theta.copy()
        sel = th[l1_mask]
        th[l1_mask] = np.sign(sel) * np.maximum(np.abs(sel) - config.lr * config.l1, 0.0)
        state = TrainState(theta=th, m=state.m, v=state.v, step=state.step)
    return state


# ---------------------------------------------------------------------------
# generic factor-graph training
# ---------------------------------------------------------------------------

def grad_estimate(graph: FactorGraph, data: np.ndarray, config: TrainConfig,
                  rng, visible_vars=None) -> np.ndarray:
    """Moment-gap estimate from S positive/negative sample pairs.

    ``data`` rows cover ``visible_vars`` (all variables when None).  When
    the data is fully observed the positive phase is the data statistics
    themselves; no sampler runs (clamping everything returns the data).
    """
    data = np.atleast_2d(np.asarray(data))
    if visible_vars is None:
        visible_vars = list(range(graph.n_vars))
    fully_observed = len(visible_vars) == graph.n_vars
    rows = rng.integers(0, data.shape[0], size=config.minibatch)
    pos = np.zeros(graph.theta_size)
    for r in rows:
        if fully_observed:
            x = data[r]
        else:
            evidence = {v: int(data[r, k]) for k, v in enumerate(visible_vars)}
            x = pmp_posterior_sample(graph, evidence, config.sweeps, rng,
                                     damping=config.damping)[0]
        pos += graph.sufficient_stats(x)
    neg_x = pmp_sample(graph, config.sweeps, rng, damping=config.damping,
                       n_samples=config.minibatch)
    neg = np.zeros(graph.theta_size)
    for x in neg_x:
        neg += graph.sufficient_stats(x)
    return (pos - neg) / config.minibatch


def train(graph: FactorGraph, data: np.ndarray, config: TrainConfig, rng,
          visible_vars=None, init_theta: np.ndarray = None):
    """Algorithm: repeat { estimate moment gap, ascend }.  Returns
    (trained graph, TrainState, metrics rows)."""
    if init_theta is None:
        theta0 = config.init_sigma * rng.standard_normal(graph.theta_size)
    else:
        theta0 = np.asarray(init_theta, dtype=np.float64)
    state = TrainState(theta=theta0)
    mask = graph.pairwise_weight_mask
    metrics = []
    t0 = time.perf_counter()
    for it in range(config.iters):
        g = graph.with_theta(state.theta)
        tick = time.perf_counter()
        grad = grad_estimate(g, data, config, rng, visible_vars)
        state = take_step(state, grad, config, l1_mask=mask)
        metrics.append({"iteration": it,
                        "grad_norm": float(np.linalg.norm(grad)),
                        "wall_ms": 1000.0 * (time.perf_counter() - tick)})
        if config.budget_secs is not None and \
                time.perf_counter() - t0 > config.budget_secs:
            break
    return graph.with_theta(state.theta), state, metrics


def exact_moment_train(graph: FactorGraph, target_moments: np.ndarray,
                       config: TrainConfig, rng, init_theta: np.ndarray = None):
    """Moment matching against a fixed target vector (infinite-data limit)."""
    target = np.asarray(target_moments, dtype=np.float64)
    if target.shape != (graph.theta_size,):
        raise GraphError(f"target moments must have shape ({graph.theta_size},)")
    if init_theta is None:
        theta0 = config.init_sigma * rng.standard_normal(graph.theta_size)
    else:
        theta0 = np.asarray(init_theta, dtype=np.float64)
    state = TrainState(theta=theta0)
    mask = graph.pairwise_weight_mask
    metrics = []
    for it in range(config.iters):
        g = graph.with_theta(state.theta)
        tick = time.perf_counter()
        neg_x = pmp_sample(g, config.sweeps, rng, damping=config.damping,
                           n_samples=config.minibatch)
        neg = np.zeros(graph.theta_size)
        for x in neg_x:
            neg += g.sufficient_stats(x)
        grad = target - neg / config.minibatch
        state = take_step(state, grad, config, l1_mask=mask)
        metrics.append({"iteration": it,
                        "grad_norm": float(np.linalg.norm(grad)),
                        "wall_ms": 1000.0 * (time.perf_counter() - tick)})
    return graph.with_theta(state.theta), state, metrics


# ---------------------------------------------------------------------------
# spin Ising trainer (matrix kernels, fully observed data)
# ---------------------------------------------------------------------------

def _spin_moments(x01: np.ndarray):
    s = 2.0 * np.asarray(x01, dtype=np.float64) - 1.0
    second = s.T @ s / s.shape[0]
    np.fill_diagonal(second, 0.0)
    return second, s.mean(axis=0)


@dataclass
class IsingTrainResult:
    J: np.ndarray
    h: np.ndarray
    metrics: list
    truncated: bool = False


def train_ising_spin(data01: np.ndarray, config: TrainConfig, rng,
                     method: str = "pmp", learn_bias: bool = True,
                     J0: np.ndarray = None, h0: np.ndarray = None) -> IsingTrainResult:
    """Learn a fully connected spin model E = -sum_{i<j} J_ij s_i s_j - h's.

    data01: (N, n) binary rows (0 codes spin -1).  Methods: "pmp"
    (fresh-noise PMP, ``sweeps`` message sweeps), "gibbs" (persistent
    chains, ``sweeps`` Gibbs sweeps per iteration), "gibbs-reset"
    (uniform restart each iteration).  The L1 penalty shrinks J only.
    """
    if method not in ("pmp", "gibbs", "gibbs-reset"):
        raise GraphError(f"unknown Ising training method {method!r}")
    data01 = np.asarray(data01)
    n = data01.shape[1]
    chains = config.minibatch
    J = (config.init_sigma * rng.standard_normal((n, n))) if J0 is None else J0.copy()
    J = (J + J.T) / 2.0
    np.fill_diagonal(J, 0.0)
    h = np.zeros(n) if h0 is None else h0.copy()
    mJ, vJ = np.zeros_like(J), np.zeros_like(J)
    mh, vh = np.zeros_like(h), np.zeros_like(h)
    pg = PersistentGumbel(config.rho, (chains, n, 2)) if config.rho is not None else None
    gibbs_x = (rng.random((chains, n)) < 0.5).astype(np.int8)
    metrics, truncated = [], False
    tail_start = config.iters - max(1, round(config.avg_tail * config.iters))
    Jsum, hsum, tail_n = np.zeros_like(J), np.zeros_like(h), 0
    t0 = time.perf_counter()
    for it in range(config.iters):
        tick = time.perf_counter()
        rows = rng.integers(0, data01.shape[0], size=chains)
        pos2, pos1 = _spin_moments(data01[rows])
        if method == "pmp":
            eps = pg.step(rng) if pg is not None else None
            xs = ising_pmp_sample(J, h, chains, config.sweeps, rng,
                                  damping=config.damping, eps=eps)
        else:
            if method == "gibbs-reset":
                gibbs_x = (rng.random((chains, n)) < 0.5).astype(np.int8)
            gibbs_x, _ = ising_gibbs_run(J, h, gibbs_x, config.sweeps, rng)
            xs = gibbs_x
        neg2, neg1 = _spin_moments(xs)
        gJ, gh = pos2 - neg2, pos1 - neg1
        t = it + 1
        if config.optimizer == "adam":
            mJ = config.beta1 * mJ + (1 - config.beta1) * gJ
            vJ = config.beta2 * vJ + (1 - config.beta2) * gJ * gJ
            J = J + config.lr * (mJ / (1 - config.beta1 ** t)) / \
                (np.sqrt(vJ / (1 - config.beta2 ** t)) + config.adam_eps)
            if learn_bias:
                mh = config.beta1 * mh + (1 - config.beta1) * gh
                vh = config.beta2 * vh + (1 - config.beta2) * gh * gh
                h = h + config.lr * (mh / (1 - config.beta1 ** t)) / \
                    (np.sqrt(vh / (1 - config.beta2 ** t)) + config.adam_eps)
        else:
            J = J + config.lr * gJ
            if learn_bias:
                h = h + config.lr * gh
        if config.l1 > 0.0:
            J = np.sign(J) * np.maximum(np.abs(J) - config.lr * config.l1, 0.0)
        np.fill_diagonal(J, 0.0)
        if config.avg_tail > 0.0 and it >= tail_start:
            Jsum += J
            hsum += h
            tail_n += 1
        metrics.append({"iteration": it,
                        "grad_norm": float(np.sqrt((gJ ** 2).sum() + (gh ** 2).sum())),
                        "wall_ms": 1000.0 * (time.perf_counter() - tick)})
        if config.budget_secs is not None and \
                time.perf_counter() - t0 > config.budget_secs:
            truncated = True
            break
    if tail_n > 0:
        J, h = Jsum / tail_n, hsum / tail_n
    return IsingTrainResult(J=J, h=h, metrics=metrics, truncated=truncated)


# ---------------------------------------------------------------------------
# RBM trainer
# ---------------------------------------------------------------------------

@dataclass
class RbmTrainResult:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    metrics: list
    truncated: bool = False


def init_rbm(n_hidden: int, n_visible: int, rng, weight_sigma: float = 0.1,
             bias_sigma: float = 1.0):
    """W ~ N(0, 0.01), biases ~ N(0, 1)."""
    W = weight_sigma * rng.standard_normal((n_hidden, n_visible))
    b = bias_sigma * rng.standard_normal(n_hidden)
    c = bias_sigma * rng.standard_normal(n_visible)
    return W, b, c


def train_rbm(data01: np.ndarray, W, b, c, config: TrainConfig, rng,
              method: str = "pmp", pcd_sweeps: int = 1) -> RbmTrainResult:
    """Train an RBM by moment matching.

    Methods: "pmp" (fresh-noise PMP for both phases), "gibbs-reset"
    (block Gibbs from uniform restarts, ``sweeps`` sweeps), "pcd"
    (persistent chains advanced ``pcd_sweeps`` block sweeps per
    iteration).  Gradients: dW = E+[h v'] - E-[h v'], db/dc likewise.
    """
    if method not in ("pmp", "gibbs-reset", "pcd"):
        raise GraphError(f"unknown RBM training method {method!r}")
    data01 = np.asarray(data01)
    W, b, c = W.copy(), b.copy(), c.copy()
    m, n = W.shape
    chains = config.minibatch
    pg = PersistentGumbel(config.rho, (chains, m + n, 2)) if config.rho is not None else None
    pcd_v = (rng.random((chains, n)) < 0.5).astype(np.int8)
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    mb, vb = np.zeros_like(b), np.zeros_like(b)
    mc, vc = np.zeros_like(c), np.zeros_like(c)
    metrics, truncated = [], False
    tail_start = config.iters - max(1, round(config.avg_tail * config.iters))
    Wsum, bsum, csum = np.zeros_like(W), np.zeros_like(b), np.zeros_like(c)
    tail_n = 0
    t0 = time.perf_counter()
    for it in range(config.iters):
        tick = time.perf_counter()
        rows = rng.integers(0, data01.shape[0], size=chains)
        v_pos = data01[rows].astype(np.float64)
        if method == "pmp":
            _, h_pos = rbm_pmp_sample(W, b, c, chains, config.sweeps, rng,
                                      damping=config.damping, clamp_v=v_pos)
            eps = pg.step(rng) if pg is not None else None
            v_neg, h_neg = rbm_pmp_sample(W, b, c, chains, config.sweeps, rng,
                                          damping=config.damping, eps=eps)
        else:
            p_h = _sigmoid(b + v_pos @ W.T)
            h_pos = (rng.random(p_h.shape) < p_h).astype(np.int8)
            if method == "gibbs-reset":
                v_neg = (rng.random((chains, n)) < 0.5).astype(np.int8)
                h_neg = np.zeros((chains, m), dtype=np.int8)
                for _ in range(config.sweeps):
                    v_neg, h_neg = block_gibbs_rbm_sweep(W, b, c, (v_neg, h_neg), rng)
            else:  # pcd
                h_neg = np.zeros((chains, m), dtype=np.int8)
                for _ in range(pcd_sweeps):
                    pcd_v, h_neg = block_gibbs_rbm_sweep(W, b, c, (pcd_v, h_neg), rng)
                v_neg = pcd_v
        h_pos = np.asarray(h_pos, dtype=np.float64)
        h_neg = np.asarray(h_neg, dtype=np.float64)
        v_neg = np.asarray(v_neg, dtype=np.float64)
        gW = h_pos.T @ v_pos / chains - h_neg.T @ v_neg / chains
        gb = h_pos.mean(axis=0) - h_neg.mean(axis=0)
        gc = v_pos.mean(axis=0) - v_neg.mean(axis=0)
        t = it + 1
        if config.optimizer == "adam":
            for g, mm, vv, target in ((gW, mW, vW, "W"), (gb, mb, vb, "b"),
                                      (gc, mc, vc, "c")):
                mm *= config.beta1
                mm += (1 - config.beta1) * g
                vv *= config.beta2
                vv += (1 - config.beta2) * g * g
                upd = config.lr * (mm / (1 - config.beta1 ** t)) / \
                    (np.sqrt(vv / (1 - config.beta2 ** t)) + config.adam_eps)
                if target == "W":
                    W += upd
                elif target == "b":
                    b += upd
                else:
                    c += upd
        else:
            W += config.lr * gW
            b += config.lr * gb
            c += config.lr * gc
        if config.l1 > 0.0:
            W = np.sign(W) * np.maximum(np.abs(W) - config.lr * config.l1, 0.0)
        if config.avg_tail > 0.0 and it >= tail_start:
            Wsum += W
            bsum += b
            csum += c
            tail_n += 1
        metrics.append({"iteration": it,
                        "grad_norm": float(np.sqrt((gW ** 2).sum() + (gb ** 2).sum()
                                                   + (gc ** 2).sum())),
                        "wall_ms": 1000.0 * (time.perf_counter() - tick)})
        if config.budget_secs is not None and \
                time.perf_counter() - t0 > config.budget_secs:
            truncated = True
            break
    if tail_n > 0:
        W, b, c = Wsum / tail_n, bsum / tail_n, csum / tail_n
    return RbmTrainResult(W=W, b=b, c=c, metrics=metrics, truncated=truncated)
