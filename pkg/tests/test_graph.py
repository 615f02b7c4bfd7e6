"""Factor graph container: validation, scoring, parameter vector, builders.

Every derived quantity is checked against an independent enumeration
oracle written directly in the test (no shared helper code with the
library's scoring path beyond the public API under test).
"""

import itertools

import numpy as np
import pytest

from pmp.graph import (AndFactor, CapacityError, DenseTable, Factor,
                       FactorGraph, GraphError, IsingEdge, NEG_LARGE,
                       OrFactor, RbmBlock, binary_pairwise_graph, clamp,
                       ising_graph, rbm_graph)
from pmp.samplers import spin_kernel_params


def _all_states(cards):
    return [np.array(s) for s in itertools.product(*[range(c) for c in cards])]


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------

def test_rejects_cardinality_below_two():
    with pytest.raises(GraphError):
        FactorGraph([2, 1])


def test_rejects_wrong_unary_count_and_shape():
    with pytest.raises(GraphError):
        FactorGraph([2, 3], unaries=[np.zeros(2)])
    with pytest.raises(GraphError):
        FactorGraph([2, 3], unaries=[np.zeros(2), np.zeros(2)])


def test_rejects_bad_factor_wiring():
    with pytest.raises(GraphError):  # repeated neighbor
        FactorGraph([2, 2], [Factor((0, 0), IsingEdge(1.0))])
    with pytest.raises(GraphError):  # id out of range
        FactorGraph([2, 2], [Factor((0, 5), IsingEdge(1.0))])
    with pytest.raises(GraphError):  # table shape mismatch
        FactorGraph([2, 3], [Factor((0, 1), DenseTable(np.zeros((2, 2))))])
    with pytest.raises(GraphError):  # IsingEdge arity
        FactorGraph([2, 2, 2], [Factor((0, 1, 2), IsingEdge(1.0))])
    with pytest.raises(GraphError):  # IsingEdge on non-binary vars
        FactorGraph([2, 3], [Factor((0, 1), IsingEdge(1.0))])
    with pytest.raises(GraphError):  # AND needs exactly three neighbors
        FactorGraph([2, 2], [Factor((0, 1), AndFactor())])
    with pytest.raises(GraphError):  # OR needs at least top + bottom
        FactorGraph([2], [Factor((0,), OrFactor())])
    with pytest.raises(GraphError):  # RbmBlock neighbor count
        FactorGraph([2, 2, 2], [Factor((0, 1, 2), RbmBlock(np.zeros((2, 2))))])


def test_default_unaries_are_zero():
    g = FactorGraph([2, 3])
    assert all(np.all(u == 0) for u in g.unaries)
    assert g.energy([1, 2]) == 0.0


# ---------------------------------------------------------------------------
# energy against a from-scratch oracle
# ---------------------------------------------------------------------------

def _oracle_energy(cards, unaries, factors, x):
    """Independent re-implementation of the scoring conventions."""
    e = -sum(unaries[i][x[i]] for i in range(len(cards)))
    for f in factors:
        xa = [x[v] for v in f.vars]
        k = f.kind
        if isinstance(k, DenseTable):
            e -= k.table[tuple(xa)]
        elif isinstance(k, IsingEdge):
            e -= k.weight * (2 * xa[0] - 1) * (2 * xa[1] - 1)
        elif isinstance(k, RbmBlock):
            m, _ = k.weights.shape
            for i in range(m):
                for j in range(k.weights.shape[1]):
                    e -= k.weights[i, j] * xa[i] * xa[m + j]
        elif isinstance(k, AndFactor):
            if xa[2] != (xa[0] and xa[1]):
                e -= NEG_LARGE
        elif isinstance(k, OrFactor):
            if xa[-1] != int(any(xa[:-1])):
                e -= NEG_LARGE
    return e


def test_energy_matches_oracle_on_mixed_graph():
    rng = np.random.default_rng(0)
    cards = [2, 3, 2, 2, 2, 2]
    unaries = [rng.normal(size=c) for c in cards]
    factors = [
        Factor((0, 1), DenseTable(rng.normal(size=(2, 3)))),
        Factor((0, 2), IsingEdge(0.7)),
        Factor((2, 3, 4), AndFactor()),
        Factor((2, 4, 5), OrFactor()),
        Factor((3, 4, 5), RbmBlock(rng.normal(size=(1, 2)))),
    ]
    g = FactorGraph(cards, factors, unaries)
    for x in _all_states(cards):
        assert g.energy(x) == pytest.approx(
            _oracle_energy(cards, unaries, factors, x), rel=1e-12)


def test_energy_of_violated_hard_constraint_is_huge():
    g = FactorGraph([2, 2, 2], [Factor((0, 1, 2), AndFactor())])
    assert g.energy([1, 1, 0]) > 1e29
    assert g.energy([1, 1, 1]) == 0.0


def test_assignment_validation():
    g = FactorGraph([2, 3])
    with pytest.raises(GraphError):
        g.energy([0])
    with pytest.raises(GraphError):
        g.energy([0, 3])
    with pytest.raises(GraphError):
        g.energy([-1, 0])


# ---------------------------------------------------------------------------
# flat parameters and sufficient statistics
# ---------------------------------------------------------------------------

def test_theta_phi_inner_product_equals_negative_energy():
    # E(x) = -<theta, Phi(x)> whenever no hard factor is violated
    rng = np.random.default_rng(1)
    cards = [2, 3, 2, 2]
    g = FactorGraph(cards, [
        Factor((0, 1), DenseTable(rng.normal(size=(2, 3)))),
        Factor((2, 3), IsingEdge(-0.4)),
        Factor((0, 2, 3), RbmBlock(rng.normal(size=(1, 2)))),
    ], [rng.normal(size=c) for c in cards])
    theta = g.theta
    assert theta.shape == (g.theta_size,)
    for x in _all_states(cards):
        assert float(theta @ g.sufficient_stats(x)) == pytest.approx(
            -g.energy(x), rel=1e-12, abs=1e-12)


def test_theta_size_counts_blocks():
    g = FactorGraph([2, 3, 2], [
        Factor((0, 1), DenseTable(np.zeros((2, 3)))),
        Factor((0, 2), OrFactor()),   # carries no parameters
    ])
    assert g.theta_size == 2 + 3 + 2 + 6 + 0


def test_with_theta_roundtrip_and_update():
    rng = np.random.default_rng(2)
    g = ising_graph(np.array([[0.0, 0.5], [0.5, 0.0]]), np.array([0.1, -0.2]))
    g2 = g.with_theta(g.theta)
    for x in _all_states([2, 2]):
        assert g2.energy(x) == pytest.approx(g.energy(x))
    new = rng.normal(size=g.theta_size)
    g3 = g.with_theta(new)
    assert np.allclose(g3.theta, new)
    with pytest.raises(GraphError):
        g.with_theta(np.zeros(g.theta_size + 1))


def test_pairwise_weight_mask_selects_edge_blocks():
    g = FactorGraph([2, 2, 2], [
        Factor((0, 1), IsingEdge(1.0)),
        Factor((1, 2), DenseTable(np.zeros((2, 2)))),
        Factor((0, 1, 2), RbmBlock(np.zeros((1, 2)))),
    ])
    mask = g.pairwise_weight_mask
    # unary blocks (6) unmasked, IsingEdge (1) masked, table (4) not, block (2) masked
    assert mask.sum() == 3
    assert not mask[:6].any()
    assert mask[6] and not mask[7:11].any() and mask[11:13].all()


# ---------------------------------------------------------------------------
# local tables
# ---------------------------------------------------------------------------

def test_local_tables_match_factor_score():
    rng = np.random.default_rng(3)
    cards = [2, 2, 2, 2]
    factors = [
        Factor((0, 1), IsingEdge(0.3)),
        Factor((0, 1, 2), AndFactor()),
        Factor((1, 2, 3), OrFactor()),
        Factor((2, 3), DenseTable(rng.normal(size=(2, 2)))),
    ]
    g = FactorGraph(cards, factors)
    for a, f in enumerate(factors):
        table = g.local_table(a)
        for idx in itertools.product(*[range(2)] * len(f.vars)):
            x = np.zeros(len(cards), dtype=int)
            for v, s in zip(f.vars, idx):
                x[v] = s
            assert table[idx] == pytest.approx(g.factor_score(a, x))


def test_wide_or_local_table_hits_capacity():
    n = 22
    g = FactorGraph([2] * n, [Factor(tuple(range(n)), OrFactor())])
    with pytest.raises(CapacityError):
        g.local_table(0)


def test_rbm_block_has_no_local_table():
    g = rbm_graph(np.ones((1, 1)), np.zeros(1), np.zeros(1))
    with pytest.raises(CapacityError):
        g.local_table(0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_json_roundtrip_preserves_energies():
    rng = np.random.default_rng(4)
    cards = [2, 2, 2, 2]
    g = FactorGraph(cards, [
        Factor((0, 1), DenseTable(rng.normal(size=(2, 2)))),
        Factor((1, 2), IsingEdge(-0.9)),
        Factor((0, 1, 2), AndFactor()),
        Factor((1, 2, 3), OrFactor()),
        Factor((0, 3), RbmBlock(rng.normal(size=(1, 1)))),
    ], [rng.normal(size=c) for c in cards])
    g2 = FactorGraph.from_json(g.to_json())
    for x in _all_states(cards):
        assert g2.energy(x) == pytest.approx(g.energy(x), rel=1e-12)


def test_from_json_rejects_unknown_format():
    with pytest.raises(GraphError):
        FactorGraph.from_json('{"format": "something-else"}')


# ---------------------------------------------------------------------------
# clamping
# ---------------------------------------------------------------------------

def test_clamp_pins_evidence_and_is_idempotent():
    g = FactorGraph([2, 3], unaries=[np.array([1.0, 2.0]),
                                     np.array([0.0, 5.0, 1.0])])
    c1 = clamp(g, {1: 2})
    assert c1.unaries[1][2] == 0.0
    assert np.all(c1.unaries[1][[0, 1]] == NEG_LARGE)
    assert np.array_equal(c1.unaries[0], g.unaries[0])
    c2 = clamp(c1, {1: 2})
    assert np.array_equal(c2.unaries[1], c1.unaries[1])


def test_clamp_validates_evidence():
    g = FactorGraph([2, 2])
    with pytest.raises(GraphError):
        clamp(g, {5: 0})
    with pytest.raises(GraphError):
        clamp(g, {0: 2})


# ---------------------------------------------------------------------------
# model family builders
# ---------------------------------------------------------------------------

def test_ising_graph_energy_convention():
    # E(s) = -sum_{i<j} J_ij s_i s_j - h's with state 0 coding spin -1
    J = np.array([[0.0, 0.5, -0.2],
                  [0.5, 0.0, 0.0],
                  [-0.2, 0.0, 0.0]])
    h = np.array([0.3, -0.1, 0.0])
    g = ising_graph(J, h)
    for x in _all_states([2, 2, 2]):
        s = 2 * np.asarray(x) - 1
        e = -(np.triu(J, 1) * np.outer(s, s)).sum() - h @ s
        assert g.energy(x) == pytest.approx(e, rel=1e-12)


def test_ising_graph_validates_shape_and_symmetry():
    with pytest.raises(GraphError):
        ising_graph(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(GraphError):
        ising_graph(np.array([[0.0, 1.0], [0.5, 0.0]]), np.zeros(2))
    with pytest.raises(GraphError):
        ising_graph(np.eye(2), np.zeros(2))


def test_binary_pairwise_graph_energy_convention():
    W = np.array([[0.0, 1.5], [1.5, 0.0]])
    b = np.array([-0.3, 0.8])
    g = binary_pairwise_graph(W, b)
    for x in _all_states([2, 2]):
        xf = np.asarray(x, dtype=float)
        assert g.energy(x) == pytest.approx(-0.5 * xf @ W @ xf - b @ xf)


def test_rbm_graph_energy_convention():
    W = np.array([[1.0, -2.0], [0.5, 0.0]])
    b = np.array([0.1, 0.2])
    c = np.array([-0.4, 0.3])
    g = rbm_graph(W, b, c)
    for x in _all_states([2, 2, 2, 2]):
        hh, vv = np.asarray(x[:2], float), np.asarray(x[2:], float)
        assert g.energy(x) == pytest.approx(-(hh @ W @ vv) - b @ hh - c @ vv)


def test_spin_to_binary_reparameterization_shifts_energy_by_constant():
    # the two codings must induce the same distribution: energy difference
    # constant across all states
    rng = np.random.default_rng(5)
    n = 4
    A = rng.normal(size=(n, n))
    J = np.triu(A, 1) + np.triu(A, 1).T
    h = rng.normal(size=n)
    W, b = spin_kernel_params(J, h)
    gs = ising_graph(J, h)
    gb = binary_pairwise_graph(W, b)
    diffs = [gs.energy(x) - gb.energy(x) for x in _all_states([2] * n)]
    assert np.ptp(diffs) < 1e-10
