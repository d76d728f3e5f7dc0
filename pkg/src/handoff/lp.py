"""Sparse linear programs and a two-phase revised simplex solver.

Pricing is Dantzig's rule; after a run of degenerate pivots the solver
switches to Bland's smallest-index rule for both entering and leaving
variables until the objective moves again, which rules out cycling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import csc_matrix

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_STREAK = 30
HARRIS_TOL = 1e-9
PIVOT_REL = 1e-7  # pivots smaller than this times the column's largest entry are avoided
GROWTH_LIMIT = 1e6  # refactor when an update inflates the inverse by more than this

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    """The simplex method could not finish (singular basis, iteration cap)."""


@dataclass
class Constraint:
    coeffs: dict
    relation: str  # "=", ">=", "<="
    rhs: float
    name: str = ""


class LinearProgram:
    """Variables with lower bounds, a linear objective and sparse constraints."""

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"unknown sense {sense!r}")
        self.sense = sense
        self.variables: dict = {}  # name -> lower bound (None = free)
        self.objective: dict = {}
        self.constraints: list[Constraint] = []

    def add_variable(self, name, lower: float | None = 0.0):
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        self.variables[name] = lower
        return name

    def set_objective(self, coeffs: Mapping, sense: str | None = None):
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError(f"unknown sense {sense!r}")
            self.sense = sense
        self.objective = dict(coeffs)

    def add_constraint(self, coeffs: Mapping, relation: str, rhs: float, name: str = ""):
        if relation not in ("=", ">=", "<="):
            raise ValueError(f"unknown relation {relation!r}")
        self.constraints.append(Constraint(dict(coeffs), relation, float(rhs), name or f"c{len(self.constraints)}"))

    def check(self):
        for name, coef in self.objective.items():
            if name not in self.variables:
                raise ValueError(f"objective references undeclared variable {name!r}")
            if not math.isfinite(coef):
                raise ValueError(f"non-finite objective coefficient for {name!r}")
        for con in self.constraints:
            for name, coef in con.coeffs.items():
                if name not in self.variables:
                    raise ValueError(f"constraint {con.name} references undeclared variable {name!r}")
                if not math.isfinite(coef):
                    raise ValueError(f"constraint {con.name} has non-finite coefficient")
            if not math.isfinite(con.rhs):
                raise ValueError(f"constraint {con.name} has non-finite right-hand side")


@dataclass
class LpSolution:
    status: str
    objective: float = float("nan")
    values: dict = field(default_factory=dict)
    duals: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Standard:
    """``min c.x  s.t.  A x = b, x >= 0`` with ``b >= 0``, plus the map back."""

    def __init__(self, lp: LinearProgram):
        lp.check()
        names = list(lp.variables)
        col_of = {}
        cols_pos, cols_neg, shift = [], [], {}
        ncol = 0
        for name in names:
            lb = lp.variables[name]
            col_of[name] = ncol
            cols_pos.append(ncol)
            ncol += 1
            if lb is None:
                cols_neg.append((name, ncol))
                ncol += 1
            else:
                shift[name] = float(lb)
        self.names = names
        self.col_of = col_of
        self.neg_col = dict(cols_neg)
        self.shift = shift
        n_struct = ncol
        m = len(lp.constraints)
        rows, cols, vals = [], [], []
        b = np.zeros(m)
        self.row_sign = np.ones(m)
        slack_col = {}
        for i, con in enumerate(lp.constraints):
            rhs = con.rhs
            for name, coef in con.coeffs.items():
                if coef == 0:
                    continue
                rhs -= coef * shift.get(name, 0.0)
                rows.append(i)
                cols.append(col_of[name])
                vals.append(coef)
                if name in self.neg_col:
                    rows.append(i)
                    cols.append(self.neg_col[name])
                    vals.append(-coef)
            if con.relation != "=":
                slack_col[i] = ncol
                rows.append(i)
                cols.append(ncol)
                vals.append(1.0 if con.relation == "<=" else -1.0)
                ncol += 1
            b[i] = rhs
        A = csc_matrix((vals, (rows, cols)), shape=(m, ncol))
        sign = np.where(b < 0, -1.0, 1.0)
        self.row_sign = sign
        from scipy.sparse import diags

        self.A = csc_matrix(diags(sign) @ A)
        self.b = b * sign
        c = np.zeros(ncol)
        flip = -1.0 if lp.sense == "max" else 1.0
        self.const = 0.0
        for name, coef in lp.objective.items():
            c[col_of[name]] += flip * coef
            if name in self.neg_col:
                c[self.neg_col[name]] -= flip * coef
            self.const += coef * shift.get(name, 0.0)
        self.c = c
        self.n_struct = n_struct
        self.slack_col = slack_col
        self.sense = lp.sense
        self.m, self.n = m, ncol

    def unit_slacks(self) -> dict:
        """Row -> slack column whose entry is +1 after sign normalisation."""
        out = {}
        for i, j in self.slack_col.items():
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            if hi - lo == 1 and self.A.data[lo] > 0:
                out[i] = j
        return out


class _Simplex:
    def __init__(self, A: csc_matrix, b: np.ndarray, basis: list[int], banned: np.ndarray, max_iter: int):
        self.A = A
        self.AT = A.T.tocsr()
        self.b = b
        self.m, self.n = A.shape
        self.basis = list(basis)
        self.banned = banned
        self.max_iter = max_iter
        self.iterations = 0
        self.refactor()

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        return self.A.indices[lo:hi], self.A.data[lo:hi]

    def refactor(self):
        B = np.zeros((self.m, self.m))
        for r, j in enumerate(self.basis):
            idx, val = self.column(j)
            B[idx, r] = val
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular basis after {self.iterations} iterations") from exc
        self.xB = self.Binv @ self.b
        resid = np.abs(B @ self.xB - self.b).max(initial=0.0)
        if resid > 1e-6 * (1.0 + np.abs(self.b).max(initial=0.0)):
            raise SolverError(f"ill-conditioned basis (residual {resid:.3g}) after {self.iterations} iterations")
        self.xB[(self.xB < 1e-13) & (self.xB > -FEAS_TOL)] = 0.0
        self._since = 0

    def run(self, c: np.ndarray) -> str:
        """Minimise ``c`` from the current basis; returns a status string."""
        bland = False
        streak = 0
        rejected: set = set()  # entering columns whose only pivots were tiny
        in_basis = np.zeros(self.n, dtype=bool)
        in_basis[self.basis] = True
        while True:
            if self._since >= REFACTOR_EVERY:
                self.refactor()
            y = c[self.basis] @ self.Binv
            d = c - self.AT @ y
            d[in_basis] = 0.0
            d[self.banned] = 0.0
            scale = 1.0 + np.abs(y).max(initial=0.0)
            neg = np.flatnonzero(d < -OPT_TOL * scale)
            if neg.size == 0:
                # confirm on a fresh factorisation before declaring optimality
                if self._since:
                    self.refactor()
                    continue
                return OPTIMAL
            if self.iterations >= self.max_iter:
                raise SolverError(f"iteration limit {self.max_iter} reached")
            eligible = [j for j in neg if j not in rejected] if rejected else neg
            if len(eligible) == 0:
                rejected.clear()
                eligible = neg
            eligible = np.asarray(eligible)
            q = int(eligible[0]) if bland else int(eligible[np.argmin(d[eligible])])
            idx, val = self.column(q)
            alpha = self.Binv[:, idx] @ val
            pos = np.flatnonzero(alpha > PIVOT_TOL)
            if pos.size == 0:
                if self._since:
                    self.refactor()  # rule out drift before reporting unboundedness
                    continue
                return UNBOUNDED
            r = self._ratio_test(alpha, pos, bland)
            if alpha[r] < PIVOT_REL * np.abs(alpha).max() and q not in rejected and len(eligible) > 1:
                rejected.add(q)
                continue
            theta = max(self.xB[r] / alpha[r], 0.0)
            if theta <= 1e-12:
                streak += 1
                if streak >= DEGENERATE_STREAK:
                    bland = True
            else:
                streak = 0
                bland = False
            rejected.clear()
            self.xB -= theta * alpha
            self.xB[r] = theta
            pivot_row = self.Binv[r] / alpha[r]
            before = np.abs(self.Binv).max()
            self.Binv -= np.outer(alpha, pivot_row)
            self.Binv[r] = pivot_row
            in_basis[self.basis[r]] = False
            in_basis[q] = True
            self.basis[r] = q
            self.iterations += 1
            self._since += 1
            if self.xB.min() < -FEAS_TOL or np.abs(pivot_row).max() > GROWTH_LIMIT * max(before, 1.0):
                self.refactor()
            else:
                self.xB[self.xB < 0] = 0.0

    def _ratio_test(self, alpha: np.ndarray, pos: np.ndarray, bland: bool) -> int:
        ratios = self.xB[pos] / alpha[pos]
        if bland:
            ties = pos[ratios <= ratios.min() + 1e-12]
            return int(min(ties, key=lambda i: self.basis[i]))
        # Harris two-pass: among near-minimal ratios take the largest pivot
        relaxed = ((self.xB[pos] + HARRIS_TOL) / alpha[pos]).min()
        cand = pos[ratios <= relaxed]
        return int(cand[np.argmax(alpha[cand])])

    def primal(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.basis] = self.xB
        return x


def solve(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Solve ``lp``; raises :class:`SolverError` on numerical breakdown."""
    sf = _Standard(lp)
    m, n = sf.m, sf.n
    if m == 0:
        if np.any(sf.c < -OPT_TOL):
            return LpSolution(UNBOUNDED)
        values = {name: sf.shift.get(name, 0.0) for name in sf.names}
        return LpSolution(OPTIMAL, sf.const, values, {}, 0)
    max_iter = max_iter or 50 * (m + n) + 1000

    slacks = sf.unit_slacks()
    art_rows = [i for i in range(m) if i not in slacks]
    n_art = len(art_rows)
    from scipy.sparse import hstack

    if n_art:
        art = csc_matrix((np.ones(n_art), (art_rows, np.arange(n_art))), shape=(m, n_art))
        A = csc_matrix(hstack([sf.A, art]))
    else:
        A = sf.A
    art_pos = {i: n + k for k, i in enumerate(art_rows)}
    basis = [slacks.get(i, art_pos.get(i)) for i in range(m)]
    banned = np.zeros(n + n_art, dtype=bool)
    sx = _Simplex(A, sf.b, basis, banned, max_iter)

    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = 1.0
        sx.run(c1)
        infeas = sx.xB[np.asarray(sx.basis) >= n].sum()
        if infeas > FEAS_TOL * (1.0 + np.abs(sf.b).max()):
            return LpSolution(INFEASIBLE, iterations=sx.iterations)
        _drive_out_artificials(sx, n)
        banned[n:] = True
    c2 = np.concatenate([sf.c, np.zeros(n_art)])
    status = sx.run(c2)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=sx.iterations)

    x = sx.primal()[:n]
    resid = np.abs(sf.A @ x - sf.b).max(initial=0.0)
    if resid > FEAS_TOL * (1.0 + np.abs(sf.b).max()) or x.min(initial=0.0) < -FEAS_TOL:
        raise SolverError(f"final point violates constraints (residual {resid:.3g}, min {x.min():.3g})")
    x = np.maximum(x, 0.0)
    y = c2[sx.basis] @ sx.Binv
    values = {}
    for name in sf.names:
        val = x[sf.col_of[name]] + sf.shift.get(name, 0.0)
        if name in sf.neg_col:
            val -= x[sf.neg_col[name]]
        values[name] = float(val)
    obj = sum(coef * values[name] for name, coef in lp.objective.items())
    flip = -1.0 if lp.sense == "max" else 1.0
    duals = {}
    for i, con in enumerate(lp.constraints):
        duals[con.name] = float(flip * y[i] * sf.row_sign[i])
    return LpSolution(OPTIMAL, float(obj), values, duals, sx.iterations)


def _drive_out_artificials(sx: _Simplex, n_struct: int):
    """Pivot zero-level artificials out of the basis; drop redundant rows."""
    for r in range(sx.m):
        if sx.basis[r] < n_struct:
            continue
        row = sx.AT[:n_struct] @ sx.Binv[r]
        basic = set(sx.basis)
        cand = [j for j in np.flatnonzero(np.abs(row) > 1e-7) if j not in basic]
        if not cand:
            continue  # redundant row; artificial stays basic at zero
        q = int(cand[np.argmax(np.abs(row[cand]))])
        idx, val = sx.column(q)
        alpha = sx.Binv[:, idx] @ val
        pivot_row = sx.Binv[r] / alpha[r]
        sx.Binv -= np.outer(alpha, pivot_row)
        sx.Binv[r] = pivot_row
        sx.basis[r] = q
        sx.refactor()


def write_lp(lp: LinearProgram, path) -> None:
    """Dump ``lp`` in CPLEX LP text format for cross-checking with other solvers."""
    ids = {name: f"x{i}" for i, name in enumerate(lp.variables)}

    def expr(coeffs: Mapping) -> str:
        terms = [f"{'+' if c >= 0 else '-'} {abs(c):.17g} {ids[v]}" for v, c in coeffs.items() if c != 0]
        return " ".join(terms) if terms else "0 x0"

    lines = ["\\ variable map: " + ", ".join(f"{ids[v]}={v}" for v in lp.variables)]
    lines.append("Minimize" if lp.sense == "min" else "Maximize")
    lines.append(f" obj: {expr(lp.objective)}")
    lines.append("Subject To")
    rel = {"=": "=", ">=": ">=", "<=": "<="}
    for i, con in enumerate(lp.constraints):
        lines.append(f" r{i}: {expr(con.coeffs)} {rel[con.relation]} {con.rhs:.17g}")
    lines.append("Bounds")
    for v, lb in lp.variables.items():
        lines.append(f" {ids[v]} free" if lb is None else f" {ids[v]} >= {lb:.17g}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
