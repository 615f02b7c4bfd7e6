"""Samplers: perturb-and-max-product plus Gibbs baselines.

A PMP sample is the decode of damped parallel max-product run on the model
with Gumbel-perturbed unaries:

    x ~ argmax_x [ sum_a phi_a(x_a) + sum_i (theta_i + eps_i)[x_i] ],
    eps ~ Gumbel(-gamma, 1) i.i.d. per (variable, state),

with the argmax taken approximately by T message-passing sweeps.  Posterior
samples clamp the observed variables first; the clamp sentinel dominates
the bounded noise, so posterior samples always agree with the evidence.

Besides the generic engine there are matrix-form fast paths for fully
dense binary pairwise (Ising) models and RBMs, a numba Gibbs kernel for
spin models, and a vectorized engine for the OR/AND deconvolution graphs.

Reproducibility: chain-indexed entry points draw chain c's noise from
``chain_rng(master_seed, c)``, so a chain's sample does not depend on which
other chains run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .graph import FactorGraph, GraphError, NEG_LARGE, clamp
from .maxprod import (SweepConfig, and_factor_messages, decode, ising_decode,
                      ising_sweep_matrix, or_messages_segmented, rbm_decode,
                      rbm_sweep, run_max_product)
from .perturb import chain_rng, draw_gumbel, perturb, split_flat


@dataclass
class SamplerSpec:
    """How to sample a model: method, sweep count, damping, persistence."""

    method: str = "pmp"          # pmp | gibbs | gibbs-reset | pcd
    sweeps: int = 50
    damping: float = 0.5
    persistent: bool = False
    chains: int = 1

    def __post_init__(self):
        if self.method not in ("pmp", "gibbs", "gibbs-reset", "pcd"):
            raise GraphError(f"unknown sampling method {self.method!r}")
        if not 0.0 < self.damping <= 1.0:
            raise GraphError("damping must lie in (0, 1]")
        if self.sweeps < 0 or self.chains < 1:
            raise GraphError("sweeps must be >= 0 and chains >= 1")


# ---------------------------------------------------------------------------
# generic factor-graph sampling
# ---------------------------------------------------------------------------

def pmp_sample(graph: FactorGraph, sweeps: int, rng, damping: float = 0.5,
               n_samples: int = 1, eps: np.ndarray = None,
               return_eps: bool = False):
    """Draw PMP samples; returns an int array of shape (n_samples, n_vars).

    ``eps`` may supply the noise explicitly as a (n_samples, sum of
    cardinalities) array (variable-major, states within a variable
    contiguous); otherwise it is drawn from ``rng``.
    """
    total = sum(graph.cards)
    if eps is None:
        eps = draw_gumbel(rng, (n_samples, total))
    else:
        eps = np.asarray(eps, dtype=np.float64)
        if eps.ndim == 1:
            eps = eps[np.newaxis]
        if eps.shape != (n_samples, total):
            raise GraphError(f"eps must have shape ({n_samples}, {total})")
    theta_p = perturb(graph.unaries, split_flat(eps, graph.cards))
    compiled, state = run_max_product(graph, theta_p,
                                      SweepConfig(sweeps, damping))
    x = decode(compiled, state, theta_p)
    return (x, eps) if return_eps else x


def pmp_posterior_sample(graph: FactorGraph, evidence, sweeps: int, rng,
                         damping: float = 0.5, n_samples: int = 1,
                         eps: np.ndarray = None):
    """PMP sample of the clamped model; always agrees with the evidence."""
    x = pmp_sample(clamp(graph, evidence), sweeps, rng, damping=damping,
                   n_samples=n_samples, eps=eps)
    for v, s in evidence.items():
        x[:, v] = s  # clamp guarantees this already; keep it exact
    return x


def pmp_sample_chains(graph: FactorGraph, sweeps: int, master_seed: int,
                      chain_ids, damping: float = 0.5) -> np.ndarray:
    """One PMP sample per chain id, each from its own noise stream."""
    total = sum(graph.cards)
    eps = np.stack([draw_gumbel(chain_rng(master_seed, c), total)
                    for c in chain_ids])
    return pmp_sample(graph, sweeps, rng=None, damping=damping,
                      n_samples=len(list(chain_ids)), eps=eps)


def gibbs_sweep(graph: FactorGraph, x: np.ndarray, rng) -> np.ndarray:
    """One systematic-scan Gibbs sweep with exact single-site conditionals.

    Variables are resampled in ascending id order from
    p(x_i = c | rest) ~ exp(theta_i[c] + sum_{a owning i} phi_a(..., c, ...)).
    """
    x = np.array(x, dtype=np.int64)
    for i in range(graph.n_vars):
        logits = graph.unaries[i].copy()
        for a in _var_factors(graph)[i]:
            for c in range(graph.cards[i]):
                x[i] = c
                logits[c] += graph.factor_score(a, x)
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        x[i] = int(rng.choice(graph.cards[i], p=p))
    return x


def _var_factors(graph: FactorGraph):
    cached = getattr(graph, "_var_factors", None)
    if cached is None:
        cached = [[] for _ in range(graph.n_vars)]
        for a, f in enumerate(graph.factors):
            for v in f.vars:
                cached[v].append(a)
        graph._var_factors = cached
    return cached


# ---------------------------------------------------------------------------
# fully dense binary pairwise (spin Ising) fast path
# ---------------------------------------------------------------------------

def spin_kernel_params(J: np.ndarray, h: np.ndarray):
    """Map the spin model E = -sum_{i<j} J_ij s_i s_j - h's to the 0/1 kernel.

    With s = 2x - 1 the same distribution is E = -x'Wx/2 - b'x + const for
    W = 4J and b = 2h - 2 J 1.  The decode is coding-independent.
    """
    J = np.asarray(J, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return 4.0 * J, 2.0 * h - 2.0 * J.sum(axis=1)


def ising_pmp_sample(J: np.ndarray, h: np.ndarray, n_samples: int, sweeps: int,
                     rng, damping: float = 0.5, eps: np.ndarray = None,
                     return_eps: bool = False):
    """Matrix-kernel PMP samples of a spin Ising model.

    Returns states in {0,1} coding (0 -> spin -1), shape (n_samples, n).
    ``eps`` has shape (n_samples, n, 2): per-variable noise on states 0/1.
    """
    W, b = spin_kernel_params(J, h)
    n = b.shape[0]
    if eps is None:
        eps = draw_gumbel(rng, (n_samples, n, 2))
    b_eff = b + eps[..., 1] - eps[..., 0]
    N = np.zeros((n_samples, n, n))
    for _ in range(sweeps):
        fresh = ising_sweep_matrix(N, W, b_eff)
        N = (1.0 - damping) * N + damping * fresh
    x = ising_decode(N, b_eff)
    return (x, eps) if return_eps else x


def ising_pmp_sample_chains(J, h, master_seed: int, chain_ids, sweeps: int,
                            damping: float = 0.5):
    n = np.asarray(h).shape[0]
    eps = np.stack([draw_gumbel(chain_rng(master_seed, c), (n, 2))
                    for c in chain_ids])
    return ising_pmp_sample(J, h, eps.shape[0], sweeps, rng=None,
                            damping=damping, eps=eps)


@nb.njit(cache=True)
def _spin_gibbs_kernel(J, h, x, u, burn):
    """Systematic-scan Gibbs over chains; accumulates occupancy after burn-in.

    x: (chains, n) int8 in {0,1}; u: (sweeps, chains, n) uniforms.
    Mutates x in place; returns summed occupancy counts (n,).
    """
    n_sweeps = u.shape[0]
    n_chains, n = x.shape
    counts = np.zeros(n)
    field = np.zeros((n_chains, n))
    for c in range(n_chains):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += J[i, j] * (2.0 * x[c, j] - 1.0)
            field[c, i] = acc
    for t in range(n_sweeps):
        for c in range(n_chains):
            for i in range(n):
                loc = 2.0 * field[c, i] + 2.0 * h[i]
                p1 = 1.0 / (1.0 + np.exp(-loc))
                new = 1 if u[t, c, i] < p1 else 0
                if new != x[c, i]:
                    delta = 2.0 * (new - x[c, i])
                    x[c, i] = new
                    for j in range(n):
                        field[c, j] += J[i, j] * delta
        if t >= burn:
            for c in range(n_chains):
                for i in range(n):
                    counts[i] += x[c, i]
    return counts


def ising_gibbs_run(J, h, x0: np.ndarray, sweeps: int, rng, burn: int = 0):
    """Run Gibbs sweeps on a spin model; returns (final states, occupancy).

    ``occupancy`` is the mean of each variable (0/1 coding) over all chains
    and all post-burn-in sweeps.
    """
    J = np.ascontiguousarray(np.asarray(J, dtype=np.float64))
    h = np.ascontiguousarray(np.asarray(h, dtype=np.float64))
    x = np.ascontiguousarray(np.asarray(x0, dtype=np.int8).copy())
    u = rng.random((sweeps, x.shape[0], x.shape[1]))
    counts = _spin_gibbs_kernel(J, h, x, u, burn)
    denom = max(sweeps - burn, 1) * x.shape[0]
    return x, counts / denom


# ---------------------------------------------------------------------------
# RBM fast path
# ---------------------------------------------------------------------------

def _clamp_logodds(values: np.ndarray) -> np.ndarray:
    """Scalar log-odds of a clamped binary unary: +/- sentinel."""
    return np.where(np.asarray(values) > 0, -NEG_LARGE, NEG_LARGE)


def rbm_pmp_sample(W, b, c, n_samples: int, sweeps: int, rng,
                   damping: float = 0.5, clamp_v: np.ndarray = None,
                   eps: np.ndarray = None):
    """Matrix-kernel PMP samples of an RBM; returns (v, h) in {0,1}.

    ``clamp_v`` (n_samples, n) pins the visibles (posterior sampling over
    the hiddens); the returned v then equals clamp_v exactly.  Pinned
    visibles decouple the hiddens, so that case is solved in closed form:
    h_j = [b_j + (W v)_j + eps1 - eps0 > 0] is the exact perturbed argmax.
    ``eps`` has shape (n_samples, m + n, 2), hidden blocks first.
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = W.shape
    if eps is None:
        eps = draw_gumbel(rng, (n_samples, m + n, 2))
    d = eps[..., 1] - eps[..., 0]
    b_eff = b + d[:, :m]
    if clamp_v is not None:
        v = np.asarray(clamp_v, dtype=np.int8)
        h = (b_eff + v @ W.T > 0).astype(np.int8)
        return v, h
    c_eff = c + d[:, m:]
    M_hv = np.zeros((n_samples, m, n))
    M_vh = np.zeros((n_samples, m, n))
    for _ in range(sweeps):
        fresh_hv, fresh_vh = rbm_sweep(M_hv, M_vh, W, b_eff, c_eff)
        M_hv = (1.0 - damping) * M_hv + damping * fresh_hv
        M_vh = (1.0 - damping) * M_vh + damping * fresh_vh
    h, v = rbm_decode(M_hv, M_vh, b_eff, c_eff)
    return v, h


def block_gibbs_rbm_sweep(W, b, c, state, rng):
    """One block-Gibbs sweep, hidden given visible first: state is (v, h)."""
    W = np.asarray(W, dtype=np.float64)
    v, h = state
    v = np.atleast_2d(v).astype(np.float64)
    p_h = _sigmoid(b + v @ W.T)
    h = (rng.random(p_h.shape) < p_h).astype(np.int8)
    p_v = _sigmoid(c + h @ W)
    v = (rng.random(p_v.shape) < p_v).astype(np.int8)
    return v, h


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# deconvolution posterior engine (OR/AND graphs, vectorized)
# ---------------------------------------------------------------------------

class DeconvPosterior:
    """PMP posterior over features W and placements S given binary images X.

    The model: X[m, r, c] = OR over (f, y, x, u, v) with y+u=r, x+v=c of
    (W[f, u, v] AND S[m, f, y, x]).  Each W x S product is one AND factor
    whose output is an auxiliary variable feeding the pixel's OR factor;
    the OR bottom is the observed pixel (clamped).  Priors on W and S are
    Bernoulli, given as log-odds.

    Variable order for the perturbation field (and for the matching
    factor-graph construction in data_io): W entries, S entries, AND
    outputs, X pixels.  All messages are scalar log-odds; only factor-to-
    variable messages are damped, like everywhere else.
    """

    def __init__(self, X: np.ndarray, n_feat: int, fh: int, fw: int,
                 prior_w: float = -3.0, prior_s: float = -3.0):
        X = np.asarray(X)
        if X.ndim != 3:
            raise GraphError("X must be (n_images, H, W)")
        n_img, H, Wd = X.shape
        s_h, s_w = H - fh + 1, Wd - fw + 1
        if s_h < 1 or s_w < 1:
            raise GraphError("feature larger than the image")
        self.X = X.astype(np.int8)
        self.n_img, self.H, self.Wd = n_img, H, Wd
        self.n_feat, self.fh, self.fw = n_feat, fh, fw
        self.s_h, self.s_w = s_h, s_w
        self.n_w = n_feat * fh * fw
        self.n_s = n_img * n_feat * s_h * s_w
        self.prior_w, self.prior_s = float(prior_w), float(prior_s)

        # AND factor k <-> (m, f, y, x, u, v), row-major
        m, f, y, x, u, v = np.unravel_index(
            np.arange(n_img * n_feat * s_h * s_w * fh * fw),
            (n_img, n_feat, s_h, s_w, fh, fw))
        self.n_and = m.size
        self.and_w = np.ravel_multi_index((f, u, v), (n_feat, fh, fw))
        self.and_s = np.ravel_multi_index((m, f, y, x), (n_img, n_feat, s_h, s_w))
        self.and_pix = np.ravel_multi_index((m, y + u, x + v), (n_img, H, Wd))
        self.n_pix = n_img * H * Wd

        # contiguous OR segments: edges sorted by pixel, stable in AND order
        order = np.argsort(self.and_pix, kind="stable")
        self.or_edge_and = order
        counts = np.bincount(self.and_pix, minlength=self.n_pix)
        if np.any((counts == 0) & (self.X.ravel() == 1)):
            raise GraphError("an ON pixel has no contributing placements")
        self.seg_starts = np.concatenate([[0], np.cumsum(counts)])
        self.x_logodds = _clamp_logodds(self.X.ravel())

    @property
    def n_latent(self) -> int:
        """Free binary variables of the model itself (W and S entries)."""
        return self.n_w + self.n_s

    def total_variables(self) -> int:
        """All graph variables including AND outputs and clamped pixels."""
        return self.n_w + self.n_s + self.n_and + self.n_pix

    def draw_eps(self, rng) -> np.ndarray:
        return draw_gumbel(rng, (self.n_w + self.n_s + self.n_and + self.n_pix, 2))

    def sample(self, sweeps: int, rng, damping: float = 0.5,
               eps: np.ndarray = None):
        """Run PMP; returns (W, S) binary arrays in model shape."""
        if eps is None:
            eps = self.draw_eps(rng)
        d = eps[:, 1] - eps[:, 0]
        th_w = self.prior_w + d[:self.n_w]
        th_s = self.prior_s + d[self.n_w:self.n_w + self.n_s]
        th_aux = d[self.n_w + self.n_s:self.n_w + self.n_s + self.n_and]
        th_x = self.x_logodds + d[self.n_w + self.n_s + self.n_and:]

        def sum_of_others(idx, vals, size, base):
            """base + sum of vals in each group, excluding self, per edge.

            Clamped pixels can push AND-to-top messages to sentinel size;
            summing those together with O(1) terms and subtracting self
            would erase the finite part.  Finite and sentinel-scale
            contributions are therefore accumulated separately, so a lone
            huge term cancels itself exactly.
            """
            big = np.abs(vals) >= 1e15
            fin = np.where(big, 0.0, vals)
            hug = np.where(big, vals, 0.0)
            fin_tot = np.bincount(idx, weights=fin, minlength=size)
            hug_tot = np.bincount(idx, weights=hug, minlength=size)
            return (base + fin_tot)[idx] - fin + hug_tot[idx] - hug

        and2w = np.zeros(self.n_and)
        and2s = np.zeros(self.n_and)
        and2aux = np.zeros(self.n_and)
        or2aux = np.zeros(self.n_and)
        for _ in range(sweeps):
            # variable -> factor, from the previous factor -> variable snapshot
            w2and = sum_of_others(self.and_w, and2w, self.n_w, th_w)
            s2and = sum_of_others(self.and_s, and2s, self.n_s, th_s)
            aux2and = th_aux + or2aux        # aux has exactly two neighbors;
            aux2or = th_aux + and2aux        # direct sums keep sentinels exact
            # fresh factor -> variable
            f_w, f_s, f_aux = and_factor_messages(w2and, s2and, aux2and)
            vals = aux2or[self.or_edge_and]
            to_tops, _ = or_messages_segmented(vals, self.seg_starts, th_x)
            f_or = np.empty(self.n_and)
            f_or[self.or_edge_and] = to_tops
            and2w = (1.0 - damping) * and2w + damping * f_w
            and2s = (1.0 - damping) * and2s + damping * f_s
            and2aux = (1.0 - damping) * and2aux + damping * f_aux
            or2aux = (1.0 - damping) * or2aux + damping * f_or
        w_in = np.bincount(self.and_w, weights=and2w, minlength=self.n_w)
        s_in = np.bincount(self.and_s, weights=and2s, minlength=self.n_s)
        W = (th_w + w_in > 0).astype(np.int8)
        S = (th_s + s_in > 0).astype(np.int8)
        return (W.reshape(self.n_feat, self.fh, self.fw),
                S.reshape(self.n_img, self.n_feat, self.s_h, self.s_w))
