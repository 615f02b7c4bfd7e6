"""Reduced-LP tests: counts, integer-point objectives, full-table mapping,
and bit-exact LP text round trips.

Objective oracle: at an integer point x the reduced Ising objective must
equal x'Wx + b'x with the ordered-pair (double counting) convention.
"""

import numpy as np
import pytest

from pmp.graph import GraphError
from pmp.lp_export import (LinearProgram, Row, full_bipartite_objective,
                           full_bipartite_violations, full_lp_objective,
                           full_lp_violations, ising_q_index,
                           map_reduced_to_full, map_reduced_to_full_rbm,
                           parse_lp, reduced_lp_ising, reduced_lp_rbm,
                           sample_feasible_reduced_ising,
                           sample_feasible_reduced_rbm, serialize_lp)


def _random_ising(rng, n):
    A = rng.normal(0, 1, (n, n))
    W = np.triu(A, 1) + np.triu(A, 1).T
    return W, rng.normal(0, 1, n)


# ---------------------------------------------------------------------------
# construction and counts
# ---------------------------------------------------------------------------

def test_row_and_program_validation():
    with pytest.raises(GraphError):
        Row("r", {0: 1.0}, "<", 0.0)
    with pytest.raises(GraphError):
        LinearProgram(names=["a", "b"], objective=np.zeros(3))
    with pytest.raises(GraphError):
        LinearProgram(names=["a", "a"], objective=np.zeros(2))
    with pytest.raises(GraphError):
        LinearProgram(names=["a"], objective=np.zeros(1), bounds=[])
    with pytest.raises(GraphError):
        LinearProgram(names=["a"], objective=np.zeros(1),
                      rows=[Row("r", {3: 1.0}, "<=", 0.0)])


@pytest.mark.parametrize("n", [2, 3, 7, 20])
def test_reduced_ising_counts(n):
    W, b = _random_ising(np.random.default_rng(n), n)
    lp = reduced_lp_ising(W, b)
    assert lp.n_vars == n * n
    assert lp.n_rows == 4 * n * n - 3 * n


def test_reduced_ising_validation():
    with pytest.raises(GraphError):
        reduced_lp_ising(np.array([[0.0, 1.0], [0.5, 0.0]]), np.zeros(2))
    with pytest.raises(GraphError):
        reduced_lp_ising(np.eye(2), np.zeros(2))


def test_ising_q_index_hand_values():
    assert ising_q_index(3, 0, 1) == 3
    assert ising_q_index(3, 0, 2) == 4
    assert ising_q_index(3, 1, 0) == 5
    assert ising_q_index(3, 2, 1) == 8
    with pytest.raises(GraphError):
        ising_q_index(3, 1, 1)


def test_reduced_rbm_counts():
    m, n = 3, 4
    rng = np.random.default_rng(0)
    lp = reduced_lp_rbm(rng.normal(0, 1, (m, n)), rng.normal(0, 1, m),
                        rng.normal(0, 1, n))
    assert lp.n_vars == m + n + m * n
    assert lp.n_rows == 4 * m * n + m + n
    with pytest.raises(GraphError):
        reduced_lp_rbm(np.zeros((2, 2)), np.zeros(2), np.zeros(3))


# ---------------------------------------------------------------------------
# objective semantics
# ---------------------------------------------------------------------------

def test_integer_points_score_double_counted_energy():
    rng = np.random.default_rng(1)
    n = 4
    W, b = _random_ising(rng, n)
    lp = reduced_lp_ising(W, b)
    for _ in range(10):
        x = rng.integers(0, 2, n)
        point = np.zeros(n * n)
        point[:n] = x
        for i in range(n):
            for j in range(n):
                if i != j:
                    point[ising_q_index(n, i, j)] = x[i] * x[j]
        assert lp.violations(point) == []
        assert np.isclose(lp.objective @ point, x @ W @ x + b @ x, atol=1e-12)


def test_violations_report_named_rows_and_bounds():
    lp = reduced_lp_ising(np.zeros((2, 2)), np.zeros(2))
    bad_point = np.zeros(4)
    bad_point[ising_q_index(2, 0, 1)] = 0.5  # q above both marginals
    names = lp.violations(bad_point)
    assert "r1_0_1" in names and "r2_0_1" in names
    over = np.zeros(4)
    over[0] = 1.5
    assert "pub_0" in lp.violations(over)


# ---------------------------------------------------------------------------
# reduced -> full mapping
# ---------------------------------------------------------------------------

def test_map_reduced_to_full_feasibility_and_objective():
    rng = np.random.default_rng(2)
    n = 5
    W, b = _random_ising(rng, n)
    lp = reduced_lp_ising(W, b)
    for _ in range(10):
        x = sample_feasible_reduced_ising(n, rng)
        assert lp.violations(x) == []
        p, q = map_reduced_to_full(x, n)
        assert full_lp_violations(p, q) == []
        assert np.isclose(full_lp_objective(W, b, p, q), lp.objective @ x,
                          atol=1e-12)


def test_map_reduced_to_full_rejects_infeasible():
    bad = np.zeros(4)
    bad[ising_q_index(2, 0, 1)] = 0.5
    with pytest.raises(GraphError, match="r1_0_1"):
        map_reduced_to_full(bad, 2)
    with pytest.raises(GraphError, match="length"):
        map_reduced_to_full(np.zeros(5), 2)


def test_map_reduced_to_full_rbm_feasibility_and_objective():
    rng = np.random.default_rng(3)
    m, n = 3, 3
    W = rng.normal(0, 1, (m, n))
    b = rng.normal(0, 1, m)
    c = rng.normal(0, 1, n)
    lp = reduced_lp_rbm(W, b, c)
    for _ in range(10):
        x = sample_feasible_reduced_rbm(m, n, rng)
        assert lp.violations(x) == []
        p_h, p_v, q = map_reduced_to_full_rbm(x, m, n)
        assert full_bipartite_violations(p_h, p_v, q) == []
        assert np.isclose(full_bipartite_objective(W, b, c, p_h, p_v, q),
                          lp.objective @ x, atol=1e-12)
    with pytest.raises(GraphError):
        map_reduced_to_full_rbm(np.zeros(2), m, n)


# ---------------------------------------------------------------------------
# LP text serialization
# ---------------------------------------------------------------------------

def test_serialize_parse_roundtrip_bitexact():
    rng = np.random.default_rng(4)
    W, b = _random_ising(rng, 3)
    lp = reduced_lp_ising(W, b)
    text = serialize_lp(lp)
    back = parse_lp(text)
    assert back.names == lp.names
    assert back.maximize == lp.maximize
    assert np.array_equal(back.objective, lp.objective)
    assert len(back.rows) == len(lp.rows)
    for r1, r2 in zip(lp.rows, back.rows):
        assert (r1.name, r1.sense, r1.rhs) == (r2.name, r2.sense, r2.rhs)
        assert r1.coeffs == r2.coeffs
    assert back.bounds == lp.bounds
    # a second serialization of the parse is byte-identical
    assert serialize_lp(back) == text


def test_serialize_emits_nondefault_bounds():
    lp = LinearProgram(names=["a", "b", "c"],
                       objective=np.array([1.0, -2.0, 0.5]),
                       rows=[Row("r0", {0: 1.0, 2: -1.0}, "<=", 2.0)],
                       bounds=[(0.0, None), (None, None), (-1.5, 2.5)],
                       maximize=False)
    text = serialize_lp(lp)
    assert "Minimize" in text and "b free" in text and "-1.5" in text
    back = parse_lp(text)
    assert back.bounds == lp.bounds
    assert not back.maximize
    assert serialize_lp(back) == text


def test_parse_lp_accepts_plain_variants():
    text = """\\ comment line
Minimize
 obj: x + 2 y - 3.5 z
Subject To
 c1: x + y <= 4
 c2: - x + z >= -1
 c3: y = 2
Bounds
 z free
 0.5 <= y <= 3
End
"""
    lp = parse_lp(text)
    assert lp.names == ["x", "y", "z"]
    assert not lp.maximize
    assert np.allclose(lp.objective, [1.0, 2.0, -3.5])
    assert [r.sense for r in lp.rows] == ["<=", ">=", "="]
    assert lp.rows[1].coeffs == {0: -1.0, 2: 1.0}
    assert lp.bounds[2] == (None, None)
    assert lp.bounds[1] == (0.5, 3.0)
    assert lp.bounds[0] == (0.0, None)


def test_parse_lp_errors():
    with pytest.raises(GraphError, match="Maximize or Minimize"):
        parse_lp("Subject To\nEnd\n")
    with pytest.raises(GraphError, match="missing a sense"):
        parse_lp("Maximize\n obj: x\nSubject To\n c1: x y\nEnd\n")
