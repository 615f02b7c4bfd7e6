"""Evaluation utilities: exact enumeration oracles, MMD, log-Z bounds.

Exact quantities (partition function, marginals, moments, MAP) come from
brute-force enumeration of the joint state space, chunked so memory stays
bounded; the total joint-state budget is 2^24.  States are enumerated in
mixed-radix order with variable 0 most significant (numpy unravel_index
convention), and empirical joint distributions use the same indexing.

The perturb-and-MAP log-partition estimate

    <max_x [ sum_a phi_a(x_a) + sum_i (theta_i + eps_i)[x_i] ]>_eps

upper-bounds log Z in expectation when the inner maximization is exact;
with message passing as the approximate maximizer it is only an estimate.

MMD^2 between binary sample sets uses the average-Hamming kernel
k(x, x') = exp(-(1/D) sum_d [x_d != x'_d]) and the biased V-statistic
mean K_XX + mean K_YY - 2 mean K_XY, which is non-negative by
construction.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .graph import CapacityError, FactorGraph, GraphError
from .maxprod import CompiledGraph

ENUM_BUDGET = 2 ** 24
_CHUNK = 2 ** 18


def _joint_size(cards) -> int:
    k = 1
    for c in cards:
        k *= int(c)
        if k > ENUM_BUDGET:
            raise CapacityError(
                f"joint state space exceeds the 2^24 enumeration budget")
    return k


def _state_chunks(cards, chunk=_CHUNK):
    k = _joint_size(cards)
    for lo in range(0, k, chunk):
        idx = np.arange(lo, min(k, lo + chunk))
        yield np.stack(np.unravel_index(idx, cards), axis=1)


def _chunk_scores(graph: FactorGraph, states: np.ndarray) -> np.ndarray:
    """-E(x) for a chunk of assignments, vectorized over rows."""
    compiled = getattr(graph, "_score_units", None)
    if compiled is None:
        compiled = CompiledGraph(graph)
        graph._score_units = compiled
    s = np.zeros(states.shape[0])
    for i in range(graph.n_vars):
        s += graph.unaries[i][states[:, i]]
    for unit in compiled.units:
        s += unit.table[tuple(states[:, v] for v in unit.vars)]
    return s


def enumerate_states(cards) -> np.ndarray:
    """All joint assignments, shape (prod cards, n_vars)."""
    return np.concatenate(list(_state_chunks(cards)), axis=0)


def exact_log_partition(graph: FactorGraph) -> float:
    """log Z by enumeration (joint size capped at 2^24)."""
    parts = [logsumexp(_chunk_scores(graph, st))
             for st in _state_chunks(graph.cards)]
    return float(logsumexp(parts))


def exact_distribution(graph: FactorGraph) -> np.ndarray:
    """p(x) over all joint states, indexed in enumeration order."""
    scores = np.concatenate([_chunk_scores(graph, st)
                             for st in _state_chunks(graph.cards)])
    scores -= scores.max()
    p = np.exp(scores)
    return p / p.sum()


def exact_marginals(graph: FactorGraph) -> list:
    """Per-variable marginal vectors by enumeration."""
    out = [np.zeros(c) for c in graph.cards]
    logz = exact_log_partition(graph)
    for states in _state_chunks(graph.cards):
        p = np.exp(_chunk_scores(graph, states) - logz)
        for i in range(graph.n_vars):
            out[i] += np.bincount(states[:, i], weights=p,
                                  minlength=graph.cards[i])
    return out


def exact_moments(graph: FactorGraph) -> np.ndarray:
    """E_p[Phi(x)], the moment-matching target under the model itself."""
    mu = np.zeros(graph.theta_size)
    logz = exact_log_partition(graph)
    for states in _state_chunks(graph.cards):
        p = np.exp(_chunk_scores(graph, states) - logz)
        for row, w in zip(states, p):
            mu += w * graph.sufficient_stats(row)
    return mu


def _eps_offsets(cards):
    return np.concatenate([[0], np.cumsum(cards)])[:-1]


def exact_map_perturbed(graph: FactorGraph, eps: np.ndarray):
    """Brute-force argmax of the perturbed objective.

    eps: (n_draws, sum cards).  Returns (states (n_draws, n_vars),
    values (n_draws,)) where value includes the noise contribution.
    """
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    off = _eps_offsets(graph.cards)
    best_val = np.full(eps.shape[0], -np.inf)
    best_x = np.zeros((eps.shape[0], graph.n_vars), dtype=np.int64)
    for states in _state_chunks(graph.cards):
        base = _chunk_scores(graph, states)
        pert = np.zeros((eps.shape[0], states.shape[0]))
        for i in range(graph.n_vars):
            pert += eps[:, off[i] + states[:, i]]
        total = base[np.newaxis, :] + pert
        arg = np.argmax(total, axis=1)
        val = total[np.arange(eps.shape[0]), arg]
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_x[better] = states[arg[better]]
    return best_x, best_val


def perturbed_objective(graph: FactorGraph, x: np.ndarray,
                        eps: np.ndarray) -> np.ndarray:
    """sum_a phi_a + sum_i (theta_i + eps_i)[x_i] at given assignments."""
    x = np.atleast_2d(x)
    eps = np.atleast_2d(eps)
    off = _eps_offsets(graph.cards)
    vals = np.array([-graph.energy(row) for row in x])
    rows = np.arange(x.shape[0])
    for i in range(graph.n_vars):
        vals += eps[rows, off[i] + x[:, i]]
    return vals


def pmap_logZ_upper_bound(graph: FactorGraph, n_draws: int, rng,
                          map_solver="exact", sweeps: int = 100,
                          damping: float = 0.5):
    """Estimate <max of the perturbed objective>; returns (mean, std_err).

    ``map_solver`` is "exact" (enumeration), "pmp" (message passing with
    the given sweeps/damping), or a callable (graph, eps) -> states.
    """
    from .perturb import draw_gumbel
    from .samplers import pmp_sample

    total = sum(graph.cards)
    eps = draw_gumbel(rng, (n_draws, total))
    if map_solver == "exact":
        _, vals = exact_map_perturbed(graph, eps)
    else:
        if map_solver == "pmp":
            x = pmp_sample(graph, sweeps, rng=None, damping=damping,
                           n_samples=n_draws, eps=eps)
        else:
            x = map_solver(graph, eps)
        vals = perturbed_objective(graph, x, eps)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_draws))


def cyclic_lattice_logZ(rows: int, cols: int, theta: float) -> float:
    """Exact log Z for a toroidal spin lattice E = -theta sum_<ij> s_i s_j.

    Transfer-matrix computation over row configurations: Z = tr(M^rows)
    with M[r, r'] = exp(intra-row score of r + inter-row score of (r, r')).
    Sides must be >= 3 so the cyclic wrap does not double an edge; the
    column count is capped at 14 to keep the 2^cols matrix tractable.
    """
    if rows < 3 or cols < 3:
        raise GraphError("cyclic lattice needs both sides >= 3")
    if cols > 14:
        raise CapacityError("transfer matrix capped at 2^14 row states")
    k = 1 << cols
    spins = 2.0 * ((np.arange(k)[:, None] >> np.arange(cols)[None, :]) & 1) - 1.0
    intra = theta * (spins * np.roll(spins, -1, axis=1)).sum(axis=1)
    inter = theta * (spins @ spins.T)
    # symmetrize: M = diag(e^intra) P  ->  S = diag(e^{intra/2}) P diag(e^{intra/2})
    log_s = 0.5 * intra[:, None] + inter + 0.5 * intra[None, :]
    shift = log_s.max()
    lam = np.linalg.eigvalsh(np.exp(log_s - shift))
    powered = np.sign(lam) ** rows * np.exp(rows * np.log(np.maximum(np.abs(lam), 1e-300)))
    return float(rows * shift + np.log(powered.sum()))


# ---------------------------------------------------------------------------
# divergences and sample-quality metrics
# ---------------------------------------------------------------------------

def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats; infinite when q vanishes where p does not."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise GraphError("distributions must have equal length")
    mask = p > 0
    if np.any(q[mask] == 0):
        return float("inf")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def empirical_joint(samples: np.ndarray, cards, smoothing: float = 0.5) -> np.ndarray:
    """Smoothed empirical joint distribution in enumeration order.

    ``smoothing`` pseudo-counts are added to every joint state (0.5 by
    default, the Jeffreys choice), so the result has full support.
    """
    k = _joint_size(cards)
    idx = np.ravel_multi_index(tuple(np.asarray(samples).T), cards)
    counts = np.bincount(idx, minlength=k).astype(np.float64) + float(smoothing)
    return counts / counts.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def hamming_kernel(x: np.ndarray, y: np.ndarray) -> float:
    """exp(-(fraction of disagreeing coordinates))."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise GraphError("kernel arguments must have equal shape")
    return float(np.exp(-np.mean(x != y)))


def _kernel_sum(X: np.ndarray, Y: np.ndarray, block: int = 2048) -> float:
    """Sum of exp(-hamming/D) over all pairs, blockwise."""
    D = X.shape[1]
    binary = X.max(initial=0) <= 1 and Y.max(initial=0) <= 1
    total = 0.0
    if binary:
        Xf = X.astype(np.float64)
        Yf = Y.astype(np.float64)
        for lo in range(0, Xf.shape[0], block):
            xb = Xf[lo:lo + block]
            mism = xb @ (1.0 - Yf).T + (1.0 - xb) @ Yf.T
            total += float(np.exp(-mism / D).sum())
    else:
        for lo in range(0, X.shape[0], block):
            xb = X[lo:lo + block]
            mism = (xb[:, None, :] != Y[None, :, :]).sum(axis=2)
            total += float(np.exp(-mism / D).sum())
    return total


def mmd2(X: np.ndarray, Y: np.ndarray) -> float:
    """Biased V-statistic MMD^2 with the average-Hamming kernel (>= 0)."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise GraphError("sample sets must be 2-D with equal dimension")
    a, b = X.shape[0], Y.shape[0]
    return (_kernel_sum(X, X) / (a * a) + _kernel_sum(Y, Y) / (b * b)
            - 2.0 * _kernel_sum(X, Y) / (a * b))


def rmse_params(true: np.ndarray, est: np.ndarray) -> float:
    """Root-mean-square error over all entries (diagonal included)."""
    true = np.asarray(true, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if true.shape != est.shape:
        raise GraphError("parameter arrays must have equal shape")
    return float(np.sqrt(np.mean((true - est) ** 2)))
