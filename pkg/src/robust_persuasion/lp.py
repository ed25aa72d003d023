"""Backend-agnostic linear programs.

Every solver in the package assembles a :class:`LinearProgram` (always a
maximization) and hands it to :func:`solve`. Two backends exist:

``"highs"``
    scipy's HiGHS interface; the default, and the only sensible choice for
    the large LPs of the exact and QPTAS solvers.
``"simplex"``
    a bundled dense two-phase tableau simplex with Bland's anti-cycling rule
    (see ``_kernels``), so the package can solve small LPs with no external
    solver at all.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import _kernels
from .errors import DimensionMismatch

DEFAULT_TOL = 1e-8
# the dense backend refuses tableaus larger than this many entries
SIMPLEX_MAX_ENTRIES = 4_000_000

LE, EQ, GE = -1, 0, 1
_REL_SYMBOL = {LE: "<=", EQ: "=", GE: ">="}


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``maximize objective @ x`` subject to ``matrix @ x  (rel)  rhs`` and bounds.

    ``relations`` holds ``LE``/``EQ``/``GE`` per row. Lower bounds default to
    0 and upper bounds to +inf.
    """

    num_vars: int
    objective: np.ndarray
    matrix: sp.csr_matrix
    relations: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: tuple[str, ...] | None = None

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def constraints(self) -> Iterator[tuple[dict[int, float], str, float]]:
        """Rows as ``(sparse row, relation symbol, rhs)``; for debugging, not speed."""
        A = self.matrix
        for i in range(A.shape[0]):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            row = dict(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))
            yield row, _REL_SYMBOL[int(self.relations[i])], float(self.rhs[i])


class LpSolution(NamedTuple):
    status: Status
    objective_value: float | None
    primal: np.ndarray | None
    message: str = ""


class FeasibilityReport(NamedTuple):
    feasible: bool
    worst_violation: float
    worst_row: str | None


class LpBuilder:
    """Accumulates variables and constraint blocks in COO form."""

    def __init__(self):
        self._lower: list[np.ndarray] = []
        self._upper: list[np.ndarray] = []
        self._names: list[str | None] = []
        self.num_vars = 0
        self._obj_idx: list[np.ndarray] = []
        self._obj_val: list[np.ndarray] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._rel: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self.num_rows = 0

    def add_variables(self, count: int, lower=0.0, upper=math.inf, names: Sequence[str] | None = None) -> int:
        start = self.num_vars
        self._lower.append(np.broadcast_to(np.asarray(lower, dtype=float), (count,)).copy())
        self._upper.append(np.broadcast_to(np.asarray(upper, dtype=float), (count,)).copy())
        if names is None:
            self._names.extend([None] * count)
        else:
            if len(names) != count:
                raise DimensionMismatch("one name per variable")
            self._names.extend(str(x) for x in names)
        self.num_vars += count
        return start

    def add_objective(self, indices, coeffs) -> None:
        self._obj_idx.append(np.asarray(indices, dtype=np.int64).ravel())
        self._obj_val.append(np.broadcast_to(np.asarray(coeffs, dtype=float), np.shape(indices)).ravel())

    def add_row(self, indices, coeffs, relation: int, rhs: float) -> int:
        idx = np.asarray(indices, dtype=np.int64).ravel()
        return self.add_rows(
            np.zeros(idx.size, dtype=np.int64), idx, np.asarray(coeffs, dtype=float).ravel(), [relation], [rhs]
        )

    def add_rows(self, local_rows, cols, vals, relations, rhs) -> int:
        """Append a block of rows given COO triplets with block-local row ids."""
        rel = np.asarray(relations, dtype=np.int8).ravel()
        rhs = np.asarray(rhs, dtype=float).ravel()
        if rel.size != rhs.size:
            raise DimensionMismatch("one relation per right-hand side")
        start = self.num_rows
        self._rows.append(np.asarray(local_rows, dtype=np.int64).ravel() + start)
        self._cols.append(np.asarray(cols, dtype=np.int64).ravel())
        self._vals.append(np.asarray(vals, dtype=float).ravel())
        self._rel.append(rel)
        self._rhs.append(rhs)
        self.num_rows += rel.size
        return start

    def build(self) -> LinearProgram:
        n = self.num_vars
        obj = np.zeros(n)
        if self._obj_idx:
            np.add.at(obj, np.concatenate(self._obj_idx), np.concatenate(self._obj_val))
        cat = lambda parts, dt: np.concatenate(parts) if parts else np.zeros(0, dtype=dt)  # noqa: E731
        rows, cols, vals = cat(self._rows, np.int64), cat(self._cols, np.int64), cat(self._vals, float)
        if cols.size and (cols.min() < 0 or cols.max() >= n):
            raise DimensionMismatch("constraint references a variable index out of range")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(obj)):
            raise ValueError("NaN/Inf coefficient in linear program")
        keep = vals != 0.0
        A = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(self.num_rows, n))
        A.sum_duplicates()
        return LinearProgram(
            num_vars=n,
            objective=obj,
            matrix=A,
            relations=cat(self._rel, np.int8),
            rhs=cat(self._rhs, float),
            lower=cat(self._lower, float),
            upper=cat(self._upper, float),
            var_names=(
                tuple(x if x is not None else f"x{j}" for j, x in enumerate(self._names))
                if any(x is not None for x in self._names)
                else None
            ),
        )


# ---------------------------------------------------------------------------
# feasibility check
# ---------------------------------------------------------------------------

def check_feasible(lp: LinearProgram, point, tolerance: float = DEFAULT_TOL) -> FeasibilityReport:
    x = np.asarray(point, dtype=float)
    if x.shape != (lp.num_vars,):
        raise DimensionMismatch(f"point has shape {x.shape}, LP has {lp.num_vars} variables")
    worst, where = 0.0, None
    if lp.num_vars:
        lo_v = np.where(np.isfinite(lp.lower), lp.lower - x, 0.0)
        hi_v = np.where(np.isfinite(lp.upper), x - lp.upper, 0.0)
        for viol, kind in ((lo_v, "lower"), (hi_v, "upper")):
            j = int(np.argmax(viol))
            if viol[j] > worst:
                worst, where = float(viol[j]), f"{kind} bound of {_var_name(lp, j)}"
    if lp.num_rows:
        act = lp.matrix @ x
        diff = act - lp.rhs
        viol = np.where(lp.relations == LE, diff, np.where(lp.relations == GE, -diff, np.abs(diff)))
        i = int(np.argmax(viol))
        if viol[i] > worst:
            worst, where = float(viol[i]), f"row {i}"
    return FeasibilityReport(worst <= tolerance, worst, where)


def _var_name(lp: LinearProgram, j: int) -> str:
    return lp.var_names[j] if lp.var_names else f"x{j}"


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def solve(lp: LinearProgram, tolerance: float = DEFAULT_TOL, backend: str = "highs") -> LpSolution:
    """Solve ``lp``; never raises on solver breakdown (reports ``NUMERICAL_FAILURE``)."""
    if backend == "highs":
        sol = _solve_highs(lp, tolerance)
    elif backend == "simplex":
        sol = _solve_simplex(lp, tolerance)
    else:
        raise ValueError(f"unknown LP backend {backend!r}")
    if sol.status is not Status.OPTIMAL:
        return sol
    x = np.clip(sol.primal, lp.lower, lp.upper)
    report = check_feasible(lp, x, tolerance)
    if not report.feasible:
        return LpSolution(
            Status.NUMERICAL_FAILURE,
            None,
            None,
            f"solution violates {report.worst_row} by {report.worst_violation:.3g}",
        )
    return LpSolution(Status.OPTIMAL, float(lp.objective @ x), x, sol.message)


def _solve_highs(lp: LinearProgram, tolerance: float) -> LpSolution:
    A = lp.matrix
    rel = lp.relations
    le, ge, eq = rel == LE, rel == GE, rel == EQ
    A_ub = b_ub = A_eq = b_eq = None
    if le.any() or ge.any():
        sign = np.where(ge, -1.0, 1.0)[le | ge]
        A_ub = sp.diags(sign) @ A[le | ge]
        b_ub = sign * lp.rhs[le | ge]
    if eq.any():
        A_eq, b_eq = A[eq], lp.rhs[eq]
    bounds = np.column_stack([lp.lower, lp.upper])
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi) for lo, hi in bounds]
    if lp.num_vars == 0:
        return LpSolution(Status.OPTIMAL, 0.0, np.zeros(0))
    feas_tol = max(min(tolerance * 0.1, 1e-7), 1e-10)
    try:
        res = linprog(
            -lp.objective,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=bounds,
            method="highs-ds",
            options={"primal_feasibility_tolerance": feas_tol, "dual_feasibility_tolerance": feas_tol},
        )
    except (ValueError, MemoryError) as exc:  # backend breakdown surfaces as a status
        return LpSolution(Status.NUMERICAL_FAILURE, None, None, str(exc))
    if res.status == 0:
        return LpSolution(Status.OPTIMAL, float(-res.fun), np.asarray(res.x, dtype=float), res.message)
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, None, None, res.message)
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED, None, None, res.message)
    return LpSolution(Status.NUMERICAL_FAILURE, None, None, res.message)


def _standard_form(lp: LinearProgram):
    """Map to ``min c y s.t. E y = f, y >= 0, f >= 0`` plus a recovery map for x."""
    n = lp.num_vars
    A = lp.matrix.toarray()
    cols, recover = [], []  # recover: list of (var, column, sign)
    shift = np.zeros(n)
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            recover.append((j, len(cols), 1.0))
            cols.append(j)
        elif np.isfinite(hi):
            shift[j] = hi
            recover.append((j, len(cols), -1.0))
            cols.append(j)
        else:
            recover.append((j, len(cols), 1.0))
            cols.append(j)
            recover.append((j, len(cols), -1.0))
            cols.append(j)
    signs = np.array([s for _, _, s in recover])
    base = A[:, cols] * signs
    cost = -lp.objective[cols] * signs
    rhs = lp.rhs - A @ shift
    rows = [base]
    rels = list(lp.relations)
    rhs_list = list(rhs)
    # finite upper bounds on lower-bounded variables become rows
    extra = []
    for j in range(n):
        if np.isfinite(lp.lower[j]) and np.isfinite(lp.upper[j]):
            e = np.zeros(len(cols))
            e[[c for v, c, _ in recover if v == j]] = 1.0
            extra.append(e)
            rels.append(LE)
            rhs_list.append(lp.upper[j] - lp.lower[j])
    if extra:
        rows.append(np.array(extra))
    E = np.vstack(rows) if rows[0].size or extra else np.zeros((0, len(cols)))
    rels = np.array(rels, dtype=np.int8)
    f = np.array(rhs_list, dtype=float)
    slack_cols = []
    for i, r in enumerate(rels):
        if r != EQ:
            col = np.zeros(E.shape[0])
            col[i] = 1.0 if r == LE else -1.0
            slack_cols.append(col)
    if slack_cols:
        E = np.hstack([E, np.array(slack_cols).T])
        cost = np.concatenate([cost, np.zeros(len(slack_cols))])
    neg = f < 0
    E[neg] *= -1.0
    f[neg] *= -1.0
    return E, f, cost, recover, shift


def _solve_simplex(lp: LinearProgram, tolerance: float) -> LpSolution:
    if lp.num_vars == 0:
        return LpSolution(Status.OPTIMAL, 0.0, np.zeros(0))
    E, f, cost, recover, shift = _standard_form(lp)
    if E.size > SIMPLEX_MAX_ENTRIES:
        return LpSolution(Status.NUMERICAL_FAILURE, None, None, f"dense tableau too large ({E.shape})")
    if E.shape[0] == 0:
        if np.any(cost < 0):
            return LpSolution(Status.UNBOUNDED, None, None, "no constraints")
        y = np.zeros(E.shape[1])
        code = _kernels.SIMPLEX_OPTIMAL
    else:
        code, y, _ = _kernels.simplex(E, f, cost, min(tolerance, 1e-9))
    if code == _kernels.SIMPLEX_INFEASIBLE:
        return LpSolution(Status.INFEASIBLE, None, None, "phase 1 ended with positive infeasibility")
    if code == _kernels.SIMPLEX_UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, None, None, "unbounded ray found")
    if code != _kernels.SIMPLEX_OPTIMAL:
        return LpSolution(Status.NUMERICAL_FAILURE, None, None, "iteration limit")
    x = shift.copy()
    for var, col, sign in recover:
        x[var] += sign * y[col]
    return LpSolution(Status.OPTIMAL, float(lp.objective @ x), x, "dense simplex")


# ---------------------------------------------------------------------------
# LP-format export
# ---------------------------------------------------------------------------

_NAME_OK = re.compile(r"[^A-Za-z0-9_.]")


def to_lp_format(lp: LinearProgram) -> str:
    """Render ``lp`` in the CPLEX LP text format (see README for the layout)."""
    names, seen = [], set()
    for j in range(lp.num_vars):
        name = _lp_name(_var_name(lp, j), j)
        if name in seen:
            name = f"{name}_{j}"
        seen.add(name)
        names.append(name)

    def expr(pairs) -> str:
        terms = [f"{'-' if c < 0 else '+'} {abs(c):.17g} {names[j]}" for j, c in pairs]
        if not terms:
            return "0 " + (names[0] if names else "")
        s = " ".join(terms)
        return s[2:] if s.startswith("+ ") else s

    out = ["\\ generated by robust_persuasion", "Maximize", " obj: " + expr((j, c) for j, c in enumerate(lp.objective) if c != 0)]
    out.append("Subject To")
    for i, (row, rel, rhs) in enumerate(lp.constraints):
        out.append(f" c{i}: {expr(sorted(row.items()))} {rel} {rhs:.17g}")
    out.append("Bounds")
    for j in range(lp.num_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            out.append(f" {names[j]} free")
        elif lo == 0.0 and not np.isfinite(hi):
            continue
        else:
            lo_s = "-inf" if not np.isfinite(lo) else f"{lo:.17g}"
            hi_s = "+inf" if not np.isfinite(hi) else f"{hi:.17g}"
            out.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    out.append("End")
    return "\n".join(out) + "\n"


def _lp_name(name: str, j: int) -> str:
    clean = _NAME_OK.sub("_", name)
    if not clean or clean[0].isdigit() or clean[0] in ".eE":
        clean = f"x{j}_{clean}"
    return clean
