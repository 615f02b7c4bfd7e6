"""Reduced LP relaxations of binary MAP problems, plus LP-file serialization.

The standard pairwise LP relaxation keeps a full table q_ij(a, b) per edge.
For binary variables the normalization and marginalization constraints make
all but one entry redundant: keeping only p~_i = p_i(1) and q~_ij = q_ij(1,1)
gives an equivalent program with n^2 variables and 4n^2 - 3n constraints
(Ising; the RBM analogue keeps h~, v~, z~).  ``map_reduced_to_full``
reconstructs the full tables from a feasible reduced point.

Conventions.  The Ising objective sums over ordered pairs (i != j), so each
symmetric weight is counted twice; at an integer point x the objective is
x'Wx + b'x.  The full-LP checkers below use the same ordered-pair convention
so reduced and mapped objectives agree exactly.

LP solving is out of scope: ``serialize_lp`` emits the textual LP file
format (Maximize / Subject To / Bounds / End) for external solvers, and
``parse_lp`` reads it back.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphError


@dataclass(frozen=True)
class Row:
    """One constraint: sum_i coeffs[i] * x_i  <sense>  rhs."""
    name: str
    coeffs: dict          # var index -> coefficient
    sense: str            # one of <=, >=, =
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise GraphError(f"bad constraint sense {self.sense!r}")


@dataclass
class LinearProgram:
    """maximize (or minimize) objective'x subject to rows and bounds.

    ``bounds[i] = (lo, hi)`` with None meaning unbounded; the default
    (0, None) matches the LP file format's implicit bounds.
    """
    names: list
    objective: np.ndarray
    rows: list = field(default_factory=list)
    bounds: list = None
    maximize: bool = True

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        n = len(self.names)
        if self.objective.shape != (n,):
            raise GraphError("objective length does not match variable count")
        if len(set(self.names)) != n:
            raise GraphError("variable names must be unique")
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if len(self.bounds) != n:
            raise GraphError("bounds length does not match variable count")
        for row in self.rows:
            if row.coeffs and max(row.coeffs) >= n:
                raise GraphError(f"row {row.name} references unknown variable")

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def violations(self, x: np.ndarray, tol: float = 1e-9) -> list:
        """Names of rows/bounds the point x violates beyond tol."""
        x = np.asarray(x, dtype=np.float64)
        bad = []
        for row in self.rows:
            lhs = sum(c * x[i] for i, c in row.coeffs.items())
            if row.sense == "<=" and lhs > row.rhs + tol:
                bad.append(row.name)
            elif row.sense == ">=" and lhs < row.rhs - tol:
                bad.append(row.name)
            elif row.sense == "=" and abs(lhs - row.rhs) > tol:
                bad.append(row.name)
        for i, (lo, hi) in enumerate(self.bounds):
            if lo is not None and x[i] < lo - tol:
                bad.append(f"lb({self.names[i]})")
            if hi is not None and x[i] > hi + tol:
                bad.append(f"ub({self.names[i]})")
        return bad


# ---------------------------------------------------------------------------
# reduced constructions
# ---------------------------------------------------------------------------

def _ordered_pairs(n: int):
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def ising_q_index(n: int, i: int, j: int) -> int:
    """Flat index of q~_ij in the reduced-LP variable order (p block first)."""
    if i == j:
        raise GraphError("q~ is defined for i != j only")
    return n + i * (n - 1) + (j if j < i else j - 1)


def reduced_lp_ising(W: np.ndarray, b: np.ndarray) -> LinearProgram:
    """Reduced MAP LP for E = -x'Wx - b'x over x in {0,1}^n (ordered pairs).

    Variables: p~_0..p~_{n-1}, then q~_ij for all ordered i != j (n^2 total).
    Constraints: per ordered pair q~_ij <= p~_i, q~_ij <= p~_j,
    p~_i + p~_j - 1 <= q~_ij; plus p~ <= 1 and q~ >= 0 (4n^2 - 3n rows).
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if W.shape != (n, n) or not np.allclose(W, W.T) or np.any(np.diag(W) != 0.0):
        raise GraphError("W must be symmetric with zero diagonal")
    names = [f"p{i}" for i in range(n)]
    obj = list(b)
    for i, j in _ordered_pairs(n):
        names.append(f"q{i}_{j}")
        obj.append(W[i, j])
    rows = []
    for i, j in _ordered_pairs(n):
        q = ising_q_index(n, i, j)
        rows.append(Row(f"r1_{i}_{j}", {q: 1.0, i: -1.0}, "<=", 0.0))
        rows.append(Row(f"r2_{i}_{j}", {q: 1.0, j: -1.0}, "<=", 0.0))
        rows.append(Row(f"r3_{i}_{j}", {i: 1.0, j: 1.0, q: -1.0}, "<=", 1.0))
    for i in range(n):
        rows.append(Row(f"pub_{i}", {i: 1.0}, "<=", 1.0))
    for i, j in _ordered_pairs(n):
        rows.append(Row(f"qlb_{i}_{j}", {ising_q_index(n, i, j): 1.0}, ">=", 0.0))
    return LinearProgram(names=names, objective=np.array(obj), rows=rows)


def reduced_lp_rbm(W: np.ndarray, b: np.ndarray, c: np.ndarray) -> LinearProgram:
    """Reduced MAP LP for E = -h'Wv - b'h - c'v, W of shape (m, n).

    Variables: h~_0..h~_{m-1}, v~_0..v~_{n-1}, then z~_ij row-major.
    """
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = b.shape[0], c.shape[0]
    if W.shape != (m, n):
        raise GraphError(f"W must have shape ({m}, {n}), got {W.shape}")
    names = [f"h{i}" for i in range(m)] + [f"v{j}" for j in range(n)]
    obj = list(b) + list(c)
    for i in range(m):
        for j in range(n):
            names.append(f"z{i}_{j}")
            obj.append(W[i, j])
    rows = []
    for i in range(m):
        for j in range(n):
            z = m + n + i * n + j
            rows.append(Row(f"r1_{i}_{j}", {z: 1.0, i: -1.0}, "<=", 0.0))
            rows.append(Row(f"r2_{i}_{j}", {z: 1.0, m + j: -1.0}, "<=", 0.0))
            rows.append(Row(f"r3_{i}_{j}", {i: 1.0, m + j: 1.0, z: -1.0}, "<=", 1.0))
    for k in range(m + n):
        rows.append(Row(f"ub_{names[k]}", {k: 1.0}, "<=", 1.0))
    for i in range(m):
        for j in range(n):
            rows.append(Row(f"zlb_{i}_{j}", {m + n + i * n + j: 1.0}, ">=", 0.0))
    return LinearProgram(names=names, objective=np.array(obj), rows=rows)


# ---------------------------------------------------------------------------
# reduced -> full mapping and full-LP checkers
# ---------------------------------------------------------------------------

def _pair_table(pi: float, pj: float, qij: float) -> np.ndarray:
    # rows indexed by x_i, cols by x_j
    return np.array([[1.0 - pi - pj + qij, pj - qij],
                     [pi - qij, qij]])


def map_reduced_to_full(reduced_solution: np.ndarray, n: int):
    """Expand a feasible reduced Ising point into full standard-LP tables.

    Returns (p, q): p[i] = (p_i(0), p_i(1)) and q[i, j] the 2x2 table for
    each ordered pair, with q[i, j, a, b] = q_ij(x_i=a, x_j=b).  Raises
    GraphError naming a violated constraint when the input is infeasible.
    """
    x = np.asarray(reduced_solution, dtype=np.float64)
    if x.shape != (n * n,):
        raise GraphError(f"reduced solution must have length n^2 = {n * n}")
    lp = reduced_lp_ising(np.zeros((n, n)), np.zeros(n))
    bad = lp.violations(x)
    if bad:
        raise GraphError(f"infeasible reduced point: violates {bad[0]}")
    p = np.stack([1.0 - x[:n], x[:n]], axis=1)
    q = np.zeros((n, n, 2, 2))
    for i, j in _ordered_pairs(n):
        q[i, j] = _pair_table(x[i], x[j], x[ising_q_index(n, i, j)])
    return p, q


def map_reduced_to_full_rbm(reduced_solution: np.ndarray, m: int, n: int):
    """RBM analogue of :func:`map_reduced_to_full` over hidden-visible pairs.

    Returns (p_h, p_v, q) with q[i, j] the 2x2 table for pair (h_i, v_j).
    """
    x = np.asarray(reduced_solution, dtype=np.float64)
    if x.shape != (m + n + m * n,):
        raise GraphError(f"reduced solution must have length {m + n + m * n}")
    lp = reduced_lp_rbm(np.zeros((m, n)), np.zeros(m), np.zeros(n))
    bad = lp.violations(x)
    if bad:
        raise GraphError(f"infeasible reduced point: violates {bad[0]}")
    p_h = np.stack([1.0 - x[:m], x[:m]], axis=1)
    p_v = np.stack([1.0 - x[m:m + n], x[m:m + n]], axis=1)
    q = np.zeros((m, n, 2, 2))
    for i in range(m):
        for j in range(n):
            q[i, j] = _pair_table(x[i], x[m + j], x[m + n + i * n + j])
    return p_h, p_v, q


def full_lp_violations(p: np.ndarray, q: np.ndarray, tol: float = 1e-9,
                       pairs=None) -> list:
    """Standard-LP feasibility check on full tables.

    Verifies non-negativity, normalization sum_a p_i(a) = 1, and both
    marginalization constraints of every pair table.  ``pairs`` defaults
    to all ordered (i, j), i != j, with p indexing both sides; pass
    explicit (i, j) pairs plus a second marginal array via q of shape
    (len(p), len(p_v), 2, 2) for bipartite models.
    """
    bad = []
    if np.any(p < -tol):
        bad.append("p >= 0")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > tol):
        bad.append("sum_a p(a) = 1")
    n = p.shape[0]
    if pairs is None:
        pairs = _ordered_pairs(n)
    for i, j in pairs:
        t = q[i, j]
        if np.any(t < -tol):
            bad.append(f"q[{i},{j}] >= 0")
        if np.any(np.abs(t.sum(axis=1) - p[i]) > tol):
            bad.append(f"sum_b q[{i},{j}](a,b) = p[{i}](a)")
        if np.any(np.abs(t.sum(axis=0) - p[j]) > tol):
            bad.append(f"sum_a q[{i},{j}](a,b) = p[{j}](b)")
    return bad


def full_bipartite_violations(p_h, p_v, q, tol: float = 1e-9) -> list:
    bad = []
    for p in (p_h, p_v):
        if np.any(p < -tol):
            bad.append("p >= 0")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > tol):
            bad.append("sum_a p(a) = 1")
    m, n = p_h.shape[0], p_v.shape[0]
    for i in range(m):
        for j in range(n):
            t = q[i, j]
            if np.any(t < -tol):
                bad.append(f"q[{i},{j}] >= 0")
            if np.any(np.abs(t.sum(axis=1) - p_h[i]) > tol):
                bad.append(f"row marginal q[{i},{j}]")
            if np.any(np.abs(t.sum(axis=0) - p_v[j]) > tol):
                bad.append(f"col marginal q[{i},{j}]")
    return bad


def full_lp_objective(W: np.ndarray, b: np.ndarray, p: np.ndarray,
                      q: np.ndarray) -> float:
    """Ordered-pair objective sum_{i!=j} W_ij q_ij(1,1) + sum_i b_i p_i(1)."""
    n = b.shape[0]
    total = float(np.dot(b, p[:, 1]))
    for i, j in _ordered_pairs(n):
        total += W[i, j] * q[i, j, 1, 1]
    return total


def full_bipartite_objective(W, b, c, p_h, p_v, q) -> float:
    total = float(np.dot(b, p_h[:, 1]) + np.dot(c, p_v[:, 1]))
    total += float((np.asarray(W) * q[:, :, 1, 1]).sum())
    return total


def sample_feasible_reduced_ising(n: int, rng) -> np.ndarray:
    """A random interior-ish feasible point of the reduced Ising polytope."""
    x = np.zeros(n * n)
    x[:n] = rng.random(n)
    for i, j in _ordered_pairs(n):
        lo = max(0.0, x[i] + x[j] - 1.0)
        hi = min(x[i], x[j])
        x[ising_q_index(n, i, j)] = lo + (hi - lo) * rng.random()
    return x


def sample_feasible_reduced_rbm(m: int, n: int, rng) -> np.ndarray:
    x = np.zeros(m + n + m * n)
    x[:m + n] = rng.random(m + n)
    for i in range(m):
        for j in range(n):
            lo = max(0.0, x[i] + x[m + j] - 1.0)
            hi = min(x[i], x[m + j])
            x[m + n + i * n + j] = lo + (hi - lo) * rng.random()
    return x


# ---------------------------------------------------------------------------
# LP file serialization
# ---------------------------------------------------------------------------

def _num(v: float) -> str:
    return format(float(v), ".17g")


def _wrap_terms(parts, indent: str = "     ", width: int = 200) -> list:
    lines, cur = [], ""
    for part in parts:
        if cur and len(cur) + len(part) + 1 > width:
            lines.append(cur)
            cur = indent + part
        else:
            cur = part if not cur else cur + " " + part
    if cur:
        lines.append(cur)
    return lines


def _expr_parts(coeffs: dict, names: list) -> list:
    parts = []
    for i in sorted(coeffs):
        c = coeffs[i]
        sign = "-" if c < 0 else "+"
        parts.extend([sign, _num(abs(c)), names[i]])
    if parts and parts[0] == "+":
        parts = parts[1:]
    return parts


def serialize_lp(lp: LinearProgram) -> str:
    """Emit the textual LP file format; :func:`parse_lp` inverts it.

    Coefficients are printed with 17 significant digits, so a round trip
    reproduces every float bit-exactly.
    """
    out = ["\\ reduced MAP linear program", "Maximize" if lp.maximize else "Minimize"]
    obj = {i: c for i, c in enumerate(lp.objective) if c != 0.0}
    out.extend(_wrap_terms([" obj:"] + _expr_parts(obj, lp.names)))
    out.append("Subject To")
    for row in lp.rows:
        parts = [f" {row.name}:"] + _expr_parts(row.coeffs, lp.names)
        parts.extend([row.sense, _num(row.rhs)])
        out.extend(_wrap_terms(parts))
    bound_lines = []
    for i, (lo, hi) in enumerate(lp.bounds):
        if lo is None and hi is None:
            bound_lines.append(f" {lp.names[i]} free")
        elif (lo, hi) != (0.0, None):
            lo_s = "-inf" if lo is None else _num(lo)
            hi_s = "+inf" if hi is None else _num(hi)
            bound_lines.append(f" {lo_s} <= {lp.names[i]} <= {hi_s}")
    if bound_lines:
        out.append("Bounds")
        out.extend(bound_lines)
    out.append("End")
    return "\n".join(out) + "\n"


def _tokenize_lp(text: str) -> list:
    lines = []
    for line in text.splitlines():
        body = line.split("\\", 1)[0]
        if body.strip():
            lines.append(body)
    joined = " ".join(lines)
    # pad relational operators in one pass so "<=" is never re-split at "="
    joined = re.sub(r"<=|>=|(?<![<>])=", lambda m: f" {m.group(0)} ", joined)
    return joined.split()


def _parse_number(tok: str):
    if tok in ("+inf", "inf", "+infinity", "infinity"):
        return None
    if tok in ("-inf", "-infinity"):
        return None
    try:
        return float(tok)
    except ValueError:
        return "NAME"


def parse_lp(text: str) -> LinearProgram:
    """Parse the subset of the LP file format emitted by serialize_lp."""
    toks = _tokenize_lp(text)
    pos = 0

    def section(*kw):
        return pos < len(toks) and toks[pos].lower() in kw

    if not section("maximize", "minimize", "max", "min"):
        raise GraphError("LP text must start with Maximize or Minimize")
    maximize = toks[pos].lower().startswith("max")
    pos += 1
    names, name_idx, obj_coeffs = [], {}, {}

    def var(tok):
        if tok not in name_idx:
            name_idx[tok] = len(names)
            names.append(tok)
        return name_idx[tok]

    def read_expr(stop):
        """Read sign/coef/name terms until a stop token; returns coeffs."""
        nonlocal pos
        coeffs, sign, coef = {}, 1.0, None
        while pos < len(toks):
            tok = toks[pos]
            if tok in stop or tok.endswith(":"):
                break
            if tok == "+":
                sign, pos = 1.0, pos + 1
            elif tok == "-":
                sign, pos = -sign, pos + 1
            elif _parse_number(tok) != "NAME" and _parse_number(tok) is not None:
                coef, pos = float(tok), pos + 1
            else:
                i = var(tok)
                val = sign * (1.0 if coef is None else coef)
                coeffs[i] = coeffs.get(i, 0.0) + val
                sign, coef, pos = 1.0, None, pos + 1
        return coeffs

    stops = {"subject", "bounds", "end", "<=", ">=", "=", "st", "s.t.",
             "Subject", "Bounds", "End"}
    if pos < len(toks) and toks[pos].endswith(":"):
        pos += 1
    obj_coeffs = read_expr(stops)
    if section("subject"):
        pos += 2  # Subject To
    elif section("st", "s.t.", "st."):
        pos += 1
    rows = []
    while pos < len(toks) and not section("bounds", "end"):
        name = toks[pos][:-1] if toks[pos].endswith(":") else f"c{len(rows)}"
        if toks[pos].endswith(":"):
            pos += 1
        coeffs = read_expr(stops)
        if pos >= len(toks) or toks[pos] not in ("<=", ">=", "="):
            raise GraphError(f"constraint {name} is missing a sense")
        sense = toks[pos]
        pos += 1
        rhs = float(toks[pos])
        pos += 1
        rows.append(Row(name, coeffs, sense, rhs))
    bounds = {}
    if section("bounds"):
        pos += 1
        while pos < len(toks) and not section("end"):
            a = toks[pos]
            if pos + 1 < len(toks) and toks[pos + 1].lower() == "free":
                bounds[var(a)] = (None, None)
                pos += 2
            elif toks[pos + 1] == "<=" and pos + 4 < len(toks) and toks[pos + 3] == "<=":
                lo = _parse_number(a)
                name = toks[pos + 2]
                hi = _parse_number(toks[pos + 4])
                bounds[var(name)] = (lo, hi)
                pos += 5
            elif toks[pos + 1] in ("<=", ">=", "="):
                sense, val = toks[pos + 1], float(toks[pos + 2])
                i = var(a)
                cur = bounds.get(i, (0.0, None))
                if sense == "<=":
                    bounds[i] = (cur[0], val)
                elif sense == ">=":
                    bounds[i] = (val, cur[1])
                else:
                    bounds[i] = (val, val)
                pos += 3
            else:
                raise GraphError(f"cannot parse bound near {a!r}")
    objective = np.zeros(len(names))
    for i, c in obj_coeffs.items():
        objective[i] = c
    bound_list = [bounds.get(i, (0.0, None)) for i in range(len(names))]
    return LinearProgram(names=names, objective=objective, rows=rows,
                         bounds=bound_list, maximize=maximize)
