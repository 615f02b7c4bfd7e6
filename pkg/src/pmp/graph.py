"""Discrete energy-based models represented as factor graphs.

A model over discrete variables x = (x_0, ..., x_{I-1}) with cardinalities
c_i is given by unary log-potentials theta_i (one vector of length c_i per
variable) and factors phi_a over subsets of variables:

    E(x) = - sum_a phi_a(x_a) - sum_i theta_i[x_i],      p(x) ~ exp(-E(x))

Parameterized factor kinds score their neighborhood bilinearly, so that

    E(x) = - <theta, sufficient_stats(x)>

with theta the flat parameter vector (unary blocks in variable order, then
one block per factor).  This identity is what moment-matching gradients rely
on; it holds exactly on assignments that satisfy all hard constraint
factors (Or/And carry no parameters and score 0 when satisfied).

Factor kinds
------------
DenseTable   explicit log-potential table, one parameter per joint state.
IsingEdge    weight w on the product of +/-1 coded binary variables
             (state 0 -> spin -1, state 1 -> spin +1).
RbmBlock     weight matrix W between a hidden group and a visible group of
             binary variables; one parameter per (hidden, visible) pair,
             statistic h_i * v_j with 0/1 coding.
OrFactor     hard constraint bottom == OR(tops); neighbor order is
             (t_1, ..., t_n, bottom).
AndFactor    hard constraint bottom == t_1 AND t_2; neighbor order is
             (t_1, t_2, bottom).

Observations are imposed with :func:`clamp`, which overwrites the unary of
an observed variable with 0 at the observed state and a large negative
sentinel elsewhere.  The sentinel is finite (-1e30) so message arithmetic
stays NaN-free; it dominates any bounded perturbation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

# Finite stand-in for -inf in the log-potential domain.  Large enough to
# dominate any realistic score, small enough that sums of a few of them
# stay far from float overflow.
NEG_LARGE = -1e30

# Per-factor joint-state budget for dense enumeration (tables, messages).
FACTOR_STATE_BUDGET = 2 ** 20


class GraphError(ValueError):
    """Structural problem: bad shapes, ids out of range, invalid states."""


class CapacityError(RuntimeError):
    """An exact/dense computation would exceed its configured budget."""


@dataclass(frozen=True)
class VariableSpec:
    """A discrete variable: an integer id and a cardinality >= 2."""

    id: int
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 2:
            raise GraphError(f"variable {self.id}: cardinality must be >= 2")


@dataclass(frozen=True)
class DenseTable:
    """Explicit log-potential table; shape must match neighbor cardinalities."""

    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "table", np.asarray(self.table, dtype=np.float64))


@dataclass(frozen=True)
class IsingEdge:
    """Pairwise weight on the product of +/-1 coded binary neighbors."""

    weight: float


@dataclass(frozen=True)
class RbmBlock:
    """Bipartite weight matrix between binary hidden and visible groups.

    Neighbors are (hidden_0..hidden_{m-1}, visible_0..visible_{n-1}) and
    ``weights`` has shape (m, n).  Semantically the block is the collection
    of m*n pairwise factors with log-potential w_ij * h_i * v_j (0/1
    coding), which is also how the generic message engine treats it.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise GraphError("RbmBlock weights must be a 2-D matrix")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class OrFactor:
    """Hard constraint: bottom variable equals OR of the top variables."""


@dataclass(frozen=True)
class AndFactor:
    """Hard constraint: bottom variable equals AND of the two top variables."""


FactorKind = Union[DenseTable, IsingEdge, RbmBlock, OrFactor, AndFactor]


@dataclass(frozen=True)
class Factor:
    vars: tuple
    kind: FactorKind

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(int(v) for v in self.vars))


def _check_binary(cards, factor_index):
    if any(c != 2 for c in cards):
        raise GraphError(f"factor {factor_index}: all neighbors must be binary")


class FactorGraph:
    """Immutable container for variables, unaries and factors.

    Parameters
    ----------
    cardinalities : sequence of int, one per variable (ids are 0..I-1).
    factors : sequence of Factor.
    unaries : optional list of per-variable log-potential vectors; zero if
        omitted.
    """

    def __init__(self, cardinalities: Sequence[int], factors: Iterable[Factor] = (),
                 unaries=None):
        self.cards = tuple(int(c) for c in cardinalities)
        for i, c in enumerate(self.cards):
            if c < 2:
                raise GraphError(f"variable {i}: cardinality must be >= 2")
        self.n_vars = len(self.cards)
        self.factors = tuple(factors)
        if unaries is None:
            self.unaries = [np.zeros(c) for c in self.cards]
        else:
            unaries = [np.asarray(u, dtype=np.float64) for u in unaries]
            if len(unaries) != self.n_vars:
                raise GraphError("need one unary vector per variable")
            for i, u in enumerate(unaries):
                if u.shape != (self.cards[i],):
                    raise GraphError(f"unary {i}: expected shape ({self.cards[i]},)")
            self.unaries = unaries
        self._validate_factors()

    # -- validation ---------------------------------------------------------

    def _validate_factors(self):
        for a, f in enumerate(self.factors):
            if len(set(f.vars)) != len(f.vars):
                raise GraphError(f"factor {a}: repeated neighbor variable")
            for v in f.vars:
                if not 0 <= v < self.n_vars:
                    raise GraphError(f"factor {a}: variable id {v} out of range")
            cards = [self.cards[v] for v in f.vars]
            k = f.kind
            if isinstance(k, DenseTable):
                if k.table.shape != tuple(cards):
                    raise GraphError(
                        f"factor {a}: table shape {k.table.shape} does not match "
                        f"neighbor cardinalities {tuple(cards)}")
            elif isinstance(k, IsingEdge):
                if len(f.vars) != 2:
                    raise GraphError(f"factor {a}: IsingEdge needs two neighbors")
                _check_binary(cards, a)
            elif isinstance(k, RbmBlock):
                m, n = k.weights.shape
                if len(f.vars) != m + n:
                    raise GraphError(
                        f"factor {a}: RbmBlock with shape {(m, n)} needs {m + n} "
                        f"neighbors, got {len(f.vars)}")
                _check_binary(cards, a)
            elif isinstance(k, AndFactor):
                if len(f.vars) != 3:
                    raise GraphError(f"factor {a}: AndFactor needs (t1, t2, bottom)")
                _check_binary(cards, a)
            elif isinstance(k, OrFactor):
                if len(f.vars) < 2:
                    raise GraphError(f"factor {a}: OrFactor needs >= 1 top + bottom")
                _check_binary(cards, a)
            else:
                raise GraphError(f"factor {a}: unknown kind {type(k).__name__}")

    # -- scoring ------------------------------------------------------------

    def factor_score(self, a: int, x: np.ndarray) -> float:
        """Log-potential phi_a evaluated at assignment x (full-length vector)."""
        f = self.factors[a]
        xa = [int(x[v]) for v in f.vars]
        k = f.kind
        if isinstance(k, DenseTable):
            return float(k.table[tuple(xa)])
        if isinstance(k, IsingEdge):
            s = 2 * np.asarray(xa) - 1
            return float(k.weight * s[0] * s[1])
        if isinstance(k, RbmBlock):
            m, n = k.weights.shape
            h = np.asarray(xa[:m], dtype=np.float64)
            v = np.asarray(xa[m:], dtype=np.float64)
            return float(h @ k.weights @ v)
        if isinstance(k, AndFactor):
            t1, t2, b = xa
            return 0.0 if b == (t1 & t2) else NEG_LARGE
        if isinstance(k, OrFactor):
            tops, b = xa[:-1], xa[-1]
            return 0.0 if b == int(any(tops)) else NEG_LARGE
        raise GraphError(f"unknown factor kind {type(k).__name__}")

    def energy(self, x) -> float:
        """E(x) = -sum_a phi_a(x_a) - sum_i theta_i[x_i].

        Assignments violating a hard constraint factor come out at
        ~ +1e30 per violated factor (the negated sentinel).
        """
        x = self._check_assignment(x)
        e = 0.0
        for i in range(self.n_vars):
            e -= self.unaries[i][x[i]]
        for a in range(len(self.factors)):
            e -= self.factor_score(a, x)
        return float(e)

    def _check_assignment(self, x):
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.n_vars,):
            raise GraphError(f"assignment must have shape ({self.n_vars},)")
        if np.any(x < 0) or np.any(x >= np.asarray(self.cards)):
            raise GraphError("assignment state out of range")
        return x

    # -- sufficient statistics / parameter vector ---------------------------

    def _param_blocks(self):
        """(start, size) per block: unary blocks first, then factor blocks."""
        sizes = [c for c in self.cards]
        for f in self.factors:
            k = f.kind
            if isinstance(k, DenseTable):
                sizes.append(k.table.size)
            elif isinstance(k, IsingEdge):
                sizes.append(1)
            elif isinstance(k, RbmBlock):
                sizes.append(k.weights.size)
            else:  # Or/And carry no parameters
                sizes.append(0)
        starts = np.concatenate([[0], np.cumsum(sizes)])
        return starts, sizes

    @property
    def theta_size(self) -> int:
        starts, _ = self._param_blocks()
        return int(starts[-1])

    @property
    def theta(self) -> np.ndarray:
        """Flat parameter vector: unary blocks, then factor parameter blocks."""
        parts = [u for u in self.unaries]
        for f in self.factors:
            k = f.kind
            if isinstance(k, DenseTable):
                parts.append(k.table.ravel())
            elif isinstance(k, IsingEdge):
                parts.append(np.array([k.weight]))
            elif isinstance(k, RbmBlock):
                parts.append(k.weights.ravel())
            else:
                parts.append(np.zeros(0))
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_theta(self, theta: np.ndarray) -> "FactorGraph":
        """A copy of this graph with parameters taken from the flat vector."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.theta_size,):
            raise GraphError(f"theta must have shape ({self.theta_size},)")
        starts, _ = self._param_blocks()
        unaries = [theta[starts[i]:starts[i + 1]].copy() for i in range(self.n_vars)]
        factors = []
        for a, f in enumerate(self.factors):
            lo, hi = starts[self.n_vars + a], starts[self.n_vars + a + 1]
            block = theta[lo:hi]
            k = f.kind
            if isinstance(k, DenseTable):
                k = DenseTable(block.reshape(k.table.shape).copy())
            elif isinstance(k, IsingEdge):
                k = IsingEdge(float(block[0]))
            elif isinstance(k, RbmBlock):
                k = RbmBlock(block.reshape(k.weights.shape).copy())
            factors.append(Factor(f.vars, k))
        return FactorGraph(self.cards, factors, unaries)

    @property
    def pairwise_weight_mask(self) -> np.ndarray:
        """Boolean mask over theta selecting IsingEdge / RbmBlock weights.

        This is the coordinate set the optional L1 penalty shrinks.
        """
        starts, _ = self._param_blocks()
        mask = np.zeros(self.theta_size, dtype=bool)
        for a, f in enumerate(self.factors):
            if isinstance(f.kind, (IsingEdge, RbmBlock)):
                mask[starts[self.n_vars + a]:starts[self.n_vars + a + 1]] = True
        return mask

    def sufficient_stats(self, x) -> np.ndarray:
        """Phi(x): indicator unary blocks plus per-factor statistic blocks."""
        x = self._check_assignment(x)
        phi = np.zeros(self.theta_size)
        starts, _ = self._param_blocks()
        for i in range(self.n_vars):
            phi[starts[i] + x[i]] = 1.0
        for a, f in enumerate(self.factors):
            lo = starts[self.n_vars + a]
            k = f.kind
            xa = [int(x[v]) for v in f.vars]
            if isinstance(k, DenseTable):
                phi[lo + int(np.ravel_multi_index(tuple(xa), k.table.shape))] = 1.0
            elif isinstance(k, IsingEdge):
                phi[lo] = (2 * xa[0] - 1) * (2 * xa[1] - 1)
            elif isinstance(k, RbmBlock):
                m, n = k.weights.shape
                h = np.asarray(xa[:m], dtype=np.float64)
                v = np.asarray(xa[m:], dtype=np.float64)
                phi[lo:lo + m * n] = np.outer(h, v).ravel()
        return phi

    # -- local dense tables (for the generic engine and oracles) ------------

    def local_table(self, a: int) -> np.ndarray:
        """Dense log-potential table for factor a (RbmBlock not supported;
        the engine expands blocks into their pairwise units instead)."""
        f = self.factors[a]
        cards = tuple(self.cards[v] for v in f.vars)
        k = f.kind
        if isinstance(k, DenseTable):
            return k.table
        if isinstance(k, IsingEdge):
            w = k.weight
            return np.array([[w, -w], [-w, w]])
        if isinstance(k, AndFactor):
            t = np.full((2, 2, 2), NEG_LARGE)
            for t1 in range(2):
                for t2 in range(2):
                    t[t1, t2, t1 & t2] = 0.0
            return t
        if isinstance(k, OrFactor):
            n_tops = len(f.vars) - 1
            if np.prod(cards) > FACTOR_STATE_BUDGET:
                raise CapacityError(
                    f"factor {a}: OR with {n_tops} tops exceeds the dense budget")
            t = np.full(cards, NEG_LARGE)
            for idx in np.ndindex(*cards):
                tops, b = idx[:-1], idx[-1]
                if b == int(any(tops)):
                    t[idx] = 0.0
            return t
        raise CapacityError(f"factor {a}: no dense table for {type(k).__name__}")

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        factors = []
        for f in self.factors:
            k = f.kind
            d = {"vars": list(f.vars)}
            if isinstance(k, DenseTable):
                d["kind"] = "dense"
                d["table"] = k.table.tolist()
            elif isinstance(k, IsingEdge):
                d["kind"] = "ising_edge"
                d["weight"] = k.weight
            elif isinstance(k, RbmBlock):
                d["kind"] = "rbm_block"
                d["n_hidden"] = k.weights.shape[0]
                d["weights"] = k.weights.tolist()
            elif isinstance(k, OrFactor):
                d["kind"] = "or"
            elif isinstance(k, AndFactor):
                d["kind"] = "and"
            factors.append(d)
        doc = {
            "format": "pmp-factor-graph-v1",
            "cardinalities": list(self.cards),
            "unaries": [u.tolist() for u in self.unaries],
            "factors": factors,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "FactorGraph":
        doc = json.loads(text)
        if doc.get("format") != "pmp-factor-graph-v1":
            raise GraphError("unrecognized graph document format")
        factors = []
        for d in doc["factors"]:
            kind_name = d["kind"]
            if kind_name == "dense":
                kind = DenseTable(np.array(d["table"], dtype=np.float64))
            elif kind_name == "ising_edge":
                kind = IsingEdge(float(d["weight"]))
            elif kind_name == "rbm_block":
                kind = RbmBlock(np.array(d["weights"], dtype=np.float64))
            elif kind_name == "or":
                kind = OrFactor()
            elif kind_name == "and":
                kind = AndFactor()
            else:
                raise GraphError(f"unknown factor kind {kind_name!r}")
            factors.append(Factor(tuple(d["vars"]), kind))
        unaries = [np.array(u, dtype=np.float64) for u in doc["unaries"]]
        return cls(doc["cardinalities"], factors, unaries)


def clamp(graph: FactorGraph, evidence: Mapping[int, int]) -> FactorGraph:
    """Pin observed variables: unary 0 at the observed state, -1e30 elsewhere.

    Clamping replaces the variable's unary entirely (the observation carries
    no score of its own), is idempotent, and dominates any bounded
    perturbation added later.  MAP solutions of the clamped graph agree with
    the evidence on all clamped variables.
    """
    unaries = [u.copy() for u in graph.unaries]
    for v, s in evidence.items():
        v, s = int(v), int(s)
        if not 0 <= v < graph.n_vars:
            raise GraphError(f"evidence variable {v} out of range")
        if not 0 <= s < graph.cards[v]:
            raise GraphError(f"evidence state {s} out of range for variable {v}")
        u = np.full(graph.cards[v], NEG_LARGE)
        u[s] = 0.0
        unaries[v] = u
    return FactorGraph(graph.cards, graph.factors, unaries)


# -- builders for the model families used throughout -------------------------

def ising_graph(J: np.ndarray, h: np.ndarray) -> FactorGraph:
    """Spin Ising model E(s) = -sum_{i<j} J_ij s_i s_j - sum_i h_i s_i.

    J is symmetric with zero diagonal and each unordered edge is counted
    once (the i<j upper triangle).  State 0 codes spin -1, state 1 spin +1,
    so the unary vector is (-h_i, +h_i).
    """
    J = np.asarray(J, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    if J.shape != (n, n):
        raise GraphError("J must be square and match h")
    if not np.allclose(J, J.T) or np.any(np.diag(J) != 0):
        raise GraphError("J must be symmetric with zero diagonal")
    factors = [Factor((i, j), IsingEdge(float(J[i, j])))
               for i in range(n) for j in range(i + 1, n) if J[i, j] != 0.0]
    unaries = [np.array([-h[i], h[i]]) for i in range(n)]
    return FactorGraph([2] * n, factors, unaries)


def binary_pairwise_graph(W: np.ndarray, b: np.ndarray) -> FactorGraph:
    """0/1-coded pairwise model E(x) = -1/2 x^T W x - b^T x.

    One DenseTable [[0,0],[0,W_ij]] per upper-triangle pair; this is the
    exact parameterization the matrix-form Ising kernel sweeps, so the two
    pipelines are message-for-message comparable.
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if W.shape != (n, n) or not np.allclose(W, W.T) or np.any(np.diag(W) != 0):
        raise GraphError("W must be symmetric with zero diagonal")
    factors = [Factor((i, j), DenseTable(np.array([[0.0, 0.0], [0.0, W[i, j]]])))
               for i in range(n) for j in range(i + 1, n) if W[i, j] != 0.0]
    unaries = [np.array([0.0, b[i]]) for i in range(n)]
    return FactorGraph([2] * n, factors, unaries)


def rbm_graph(W: np.ndarray, b: np.ndarray, c: np.ndarray) -> FactorGraph:
    """RBM E(h, v) = -h^T W v - b^T h - c^T v with 0/1 units.

    Variables are hidden 0..m-1 then visible m..m+n-1, matching the row and
    column order of W.
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = W.shape
    if b.shape != (m,) or c.shape != (n,):
        raise GraphError("b and c must match the rows/columns of W")
    factors = [Factor(tuple(range(m + n)), RbmBlock(W))]
    unaries = [np.array([0.0, b[i]]) for i in range(m)] + \
              [np.array([0.0, c[j]]) for j in range(n)]
    return FactorGraph([2] * (m + n), factors, unaries)
