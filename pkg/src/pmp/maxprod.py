"""Damped parallel max-product message passing.

All messages live in log space.  One sweep recomputes every
variable-to-factor message from the previous factor-to-variable messages,
then every factor-to-variable message from those (Jacobi scheduling), and
blends old and fresh factor-to-variable messages:

    m_new = (1 - alpha) * m_old + alpha * fresh,      alpha in (0, 1]

Only factor-to-variable messages are damped.  After blending, each
factor-to-variable message vector is normalized so its max entry is exactly
0.  Decoding reads x_i = argmax of the variable belief (perturbed unary plus
all incoming factor messages), with ties broken toward the lowest state
index.  There is no convergence test: the sweep count is fixed and the
procedure is anytime.

The generic engine works on dense per-factor tables.  RbmBlock factors are
expanded into their pairwise units at compile time, which is exactly their
semantics (one pairwise factor per (hidden, visible) pair), so the block
kernels and the generic engine walk the same factor graph.

For all-binary models the message vector (m0, m1) is summarized by the
scalar n = m1 - m0, which is invariant under normalization.  The
matrix-form Ising and RBM kernels and the OR/AND kernels below operate on
these scalars and must agree with the dense pipeline; the tests enforce
this against brute-force oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (CapacityError, FactorGraph, FACTOR_STATE_BUDGET,
                    GraphError, RbmBlock)


@dataclass
class SweepConfig:
    sweeps: int = 50
    damping: float = 0.5

    def __post_init__(self):
        if self.sweeps < 0:
            raise GraphError("sweeps must be >= 0")
        if not 0.0 < self.damping <= 1.0:
            raise GraphError("damping must lie in (0, 1]")


# ---------------------------------------------------------------------------
# generic dense engine
# ---------------------------------------------------------------------------

@dataclass
class _Unit:
    vars: tuple
    table: np.ndarray


class CompiledGraph:
    """Message structure for a factor graph: units, tables and adjacency."""

    def __init__(self, graph: FactorGraph):
        units = []
        for a, f in enumerate(graph.factors):
            if isinstance(f.kind, RbmBlock):
                m, n = f.kind.weights.shape
                hid, vis = f.vars[:m], f.vars[m:]
                for i in range(m):
                    for j in range(n):
                        w = f.kind.weights[i, j]
                        units.append(_Unit((hid[i], vis[j]),
                                           np.array([[0.0, 0.0], [0.0, w]])))
            else:
                cards = tuple(graph.cards[v] for v in f.vars)
                if int(np.prod(cards)) > FACTOR_STATE_BUDGET:
                    raise CapacityError(
                        f"factor {a}: {int(np.prod(cards))} joint states exceed "
                        f"the {FACTOR_STATE_BUDGET} budget")
                units.append(_Unit(f.vars, graph.local_table(a)))
        self.units = units
        self.cards = graph.cards
        adj = [[] for _ in range(graph.n_vars)]
        for u, unit in enumerate(units):
            for s, v in enumerate(unit.vars):
                adj[v].append((u, s))
        self.adj = adj


@dataclass
class MessageState:
    """Per-(unit, slot) message arrays of shape (batch, cardinality)."""

    f2v: list
    v2f: list
    sweep_count: int = 0


def init_messages(compiled: CompiledGraph, batch: int = 1) -> MessageState:
    f2v = [[np.zeros((batch, compiled.cards[v])) for v in u.vars]
           for u in compiled.units]
    v2f = [[np.zeros((batch, compiled.cards[v])) for v in u.vars]
           for u in compiled.units]
    return MessageState(f2v=f2v, v2f=v2f)


def var_to_factor_update(compiled: CompiledGraph, f2v: list, theta_p: list) -> list:
    """m_{i->a} = perturbed unary + sum of factor messages from b != a.

    The sum runs directly over the other neighbors (no total-minus-self
    shortcut) so that sentinel-sized clamp values cannot swallow the finite
    contributions of the remaining messages.
    """
    out = []
    for u, unit in enumerate(compiled.units):
        msgs = []
        for s, i in enumerate(unit.vars):
            acc = theta_p[i]
            for g, r in compiled.adj[i]:
                if g == u and r == s:
                    continue
                acc = acc + f2v[g][r]
            if acc is theta_p[i]:
                acc = acc.copy()
            msgs.append(acc)
        out.append(msgs)
    return out


def factor_to_var_update_dense(compiled: CompiledGraph, v2f: list) -> list:
    """Fresh (undamped, unnormalized) factor-to-variable max-marginals.

    For unit a and recipient slot s:
        fresh(x_s) = max_{x_others} [ table(x) + sum_{k != s} m_{k->a}(x_k) ]
    computed as a full max over the joint table with all incoming messages
    added, minus the recipient's own contribution (a constant w.r.t. the
    maximized axes, so subtracting it afterwards is exact).
    """
    out = []
    for u, unit in enumerate(compiled.units):
        k = len(unit.vars)
        scores = unit.table[np.newaxis]
        for s in range(k):
            card = compiled.cards[unit.vars[s]]
            shape = [-1] + [1] * k
            shape[1 + s] = card
            scores = scores + v2f[u][s].reshape(shape)
        msgs = []
        for s in range(k):
            axes = tuple(ax for ax in range(1, k + 1) if ax != s + 1)
            fresh = scores.max(axis=axes) if axes else scores
            msgs.append(fresh - v2f[u][s])
        out.append(msgs)
    return out


def damped_sweep(compiled: CompiledGraph, state: MessageState, theta_p: list,
                 damping: float = 0.5):
    """One parallel sweep; returns (new state, max absolute message change)."""
    v2f = var_to_factor_update(compiled, state.f2v, theta_p)
    fresh = factor_to_var_update_dense(compiled, v2f)
    f2v = []
    max_delta = 0.0
    for u in range(len(compiled.units)):
        msgs = []
        for s in range(len(compiled.units[u].vars)):
            blended = (1.0 - damping) * state.f2v[u][s] + damping * fresh[u][s]
            blended = blended - blended.max(axis=-1, keepdims=True)
            delta = np.abs(blended - state.f2v[u][s]).max()
            if delta > max_delta:
                max_delta = float(delta)
            msgs.append(blended)
        f2v.append(msgs)
    return MessageState(f2v=f2v, v2f=v2f, sweep_count=state.sweep_count + 1), max_delta


def decode(compiled: CompiledGraph, state: MessageState, theta_p: list) -> np.ndarray:
    """Per-variable argmax of beliefs; shape (batch, n_vars), ties -> lowest."""
    cols = []
    for i in range(len(compiled.cards)):
        belief = theta_p[i]
        for u, s in compiled.adj[i]:
            belief = belief + state.f2v[u][s]
        cols.append(np.argmax(belief, axis=-1))
    return np.stack(cols, axis=-1)


def run_max_product(graph: FactorGraph, theta_p: list, config: SweepConfig):
    """Compile, run ``config.sweeps`` damped sweeps, return (compiled, state)."""
    compiled = CompiledGraph(graph)
    batch = theta_p[0].shape[0] if theta_p[0].ndim == 2 else 1
    theta_p = [np.atleast_2d(t) for t in theta_p]
    state = init_messages(compiled, batch)
    for _ in range(config.sweeps):
        state, _ = damped_sweep(compiled, state, theta_p, config.damping)
    return compiled, state


# ---------------------------------------------------------------------------
# matrix-form kernels for fully dense binary pairwise models
# ---------------------------------------------------------------------------

def _check_sym_zero_diag(W: np.ndarray, name: str):
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise GraphError(f"{name} must be square")
    if not np.allclose(W, W.T):
        raise GraphError(f"{name} must be symmetric")
    if np.any(np.diag(W) != 0.0):
        raise GraphError(f"{name} must have a zero diagonal")


def ising_sweep_matrix(N: np.ndarray, W: np.ndarray, b_eff: np.ndarray) -> np.ndarray:
    """One undamped sweep of scalar messages for E(x) = -x'Wx/2 - b'x, x in {0,1}.

    N[..., i, j] is the scalar log-odds message from variable i to variable
    j through their pairwise factor.  With P_ij = b_i + sum_{k != j} N_kj->i:

        N'_ij = max(0, P_ij + W_ij) - max(0, P_ij)

    evaluated for all pairs at once via P = (1'N)' 1' - N' + b 1'.  Damping
    is applied by the caller.  The diagonal stays exactly zero because
    W_ii = 0.  b_eff is the bias plus the per-variable perturbation
    difference eps_i(1) - eps_i(0); clamping enters as +/- sentinel there.
    """
    _check_sym_zero_diag(W, "W")
    incoming = N.sum(axis=-2)                      # (..., n): sum_k N_ki
    P = incoming[..., :, None] - np.swapaxes(N, -1, -2) + b_eff[..., :, None]
    return np.maximum(P + W, 0.0) - np.maximum(P, 0.0)


def ising_decode(N: np.ndarray, b_eff: np.ndarray) -> np.ndarray:
    """x_i = 1 iff b_i + sum_k N_ki > 0 (ties decode to 0)."""
    return (b_eff + N.sum(axis=-2) > 0.0).astype(np.int8)


def rbm_sweep(M_hv: np.ndarray, M_vh: np.ndarray, W: np.ndarray,
              b_eff: np.ndarray, c_eff: np.ndarray):
    """One undamped sweep of scalar messages for an RBM, matrix form.

    M_hv[..., i, j] is the message from hidden i to visible j, M_vh[..., i, j]
    the message from visible j to hidden i; both have shape (..., m, n).
    Both fresh matrices are computed from the previous snapshot (parallel
    update); damping is applied by the caller.
    """
    if W.ndim != 2:
        raise GraphError("W must be a matrix")
    row_in = M_vh.sum(axis=-1)                     # (..., m): into hidden i
    P_hv = b_eff[..., :, None] + row_in[..., :, None] - M_vh
    fresh_hv = np.maximum(P_hv + W, 0.0) - np.maximum(P_hv, 0.0)
    col_in = M_hv.sum(axis=-2)                     # (..., n): into visible j
    P_vh = c_eff[..., None, :] + col_in[..., None, :] - M_hv
    fresh_vh = np.maximum(P_vh + W, 0.0) - np.maximum(P_vh, 0.0)
    return fresh_hv, fresh_vh


def rbm_decode(M_hv: np.ndarray, M_vh: np.ndarray, b_eff: np.ndarray,
               c_eff: np.ndarray):
    h = (b_eff + M_vh.sum(axis=-1) > 0.0).astype(np.int8)
    v = (c_eff + M_hv.sum(axis=-2) > 0.0).astype(np.int8)
    return h, v


# ---------------------------------------------------------------------------
# logical factor kernels (scalar log-odds, binary variables)
# ---------------------------------------------------------------------------

def and_factor_messages(n_t1, n_t2, n_b):
    """Outgoing messages of the AND constraint (bottom == t1 AND t2).

    Inputs are incoming variable-to-factor scalars (elementwise over any
    shape).  Returns (to_t1, to_t2, to_bottom):

        to_t1    = max(n_b + n_t2, 0) - max(n_t2, 0)
        to_t2    = max(n_b + n_t1, 0) - max(n_t1, 0)
        to_bottom = min(n_t1 + n_t2, n_t1, n_t2)
    """
    n_t1 = np.asarray(n_t1, dtype=np.float64)
    n_t2 = np.asarray(n_t2, dtype=np.float64)
    n_b = np.asarray(n_b, dtype=np.float64)
    to_t1 = np.maximum(n_b + n_t2, 0.0) - np.maximum(n_t2, 0.0)
    to_t2 = np.maximum(n_b + n_t1, 0.0) - np.maximum(n_t1, 0.0)
    to_b = np.minimum(n_t1 + n_t2, np.minimum(n_t1, n_t2))
    return to_t1, to_t2, to_b


def or_factor_messages(n_tops: np.ndarray, n_b: float):
    """Outgoing messages of one OR constraint (bottom == OR of the tops).

    With t1 the lowest-index argmax of the incoming top scalars (recomputed
    excluding the recipient when sending to the argmax itself):

        to_top_i  = min( n_b + sum_{j != i} max(0, n_j),
                         max(0, n_{t1}) - n_{t1} )
        to_bottom = n_{t1} + sum_{j != t1} max(0, n_j)
    """
    n_tops = np.asarray(n_tops, dtype=np.float64)
    if n_tops.ndim != 1 or n_tops.size < 1:
        raise GraphError("OR factor needs a 1-D vector of >= 1 top messages")
    seg = np.array([0, n_tops.size])
    to_tops, to_b = or_messages_segmented(n_tops, seg, np.array([float(n_b)]))
    return to_tops, float(to_b[0])


def or_messages_segmented(vals: np.ndarray, seg_starts: np.ndarray,
                          n_bottom: np.ndarray):
    """Vectorized OR messages over many factors stored as contiguous segments.

    ``vals`` holds the incoming top scalars of all factors back to back,
    segment k occupying vals[seg_starts[k]:seg_starts[k+1]] (>= 1 entry
    each); ``n_bottom`` holds each factor's incoming bottom scalar.  Returns
    (to_tops aligned with vals, to_bottom per factor).

    Per-recipient excluded maxima come from a top-2 pass: the lowest-index
    argmax a1 per segment, then the max with a1 masked out.  For a
    single-top factor the second max is -inf, making the capped arm +inf,
    i.e. to_top = n_bottom exactly (the factor degenerates to equality).
    """
    vals = np.asarray(vals, dtype=np.float64)
    seg_starts = np.asarray(seg_starts, dtype=np.int64)
    n_bottom = np.asarray(n_bottom, dtype=np.float64)
    starts = seg_starts[:-1]
    counts = np.diff(seg_starts)
    if np.any(counts < 1):
        raise GraphError("every OR factor needs at least one top")
    n_fac = starts.size
    n_edge = vals.size
    group = np.repeat(np.arange(n_fac), counts)

    pos = np.maximum(vals, 0.0)
    sum_pos = np.add.reduceat(pos, starts)
    m1 = np.maximum.reduceat(vals, starts)
    idx = np.arange(n_edge)
    cand = np.where(vals == m1[group], idx, n_edge)
    a1 = np.minimum.reduceat(cand, starts)
    masked = np.where(idx == a1[group], -np.inf, vals)
    m2 = np.maximum.reduceat(masked, starts)
    exc = np.where(idx == a1[group], m2[group], m1[group])

    arm_bottom = n_bottom[group] + (sum_pos[group] - pos)
    arm_cap = np.maximum(exc, 0.0) - exc
    to_tops = np.minimum(arm_bottom, arm_cap)
    to_bottom = m1 + sum_pos - np.maximum(m1, 0.0)
    return to_tops, to_bottom
