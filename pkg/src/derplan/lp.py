"""Bounded-variable revised simplex over sparse rows.

Solves  min c.x  s.t.  rows (<=, =, >=), lower <= x <= upper  using a
two-phase method: slack crash basis plus artificials for the rows the
crash cannot cover, then Dantzig pricing with a dense basis inverse
updated per pivot and refactorized periodically.  Bland's rule engages
after a run of degenerate pivots so cycling cannot occur.

The MilpModel container defined here is shared with the branch-and-bound
layer and the model builder; integrality is ignored by solve_lp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

LE = "<="
EQ = "="
GE = ">="

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time_limit"
ITERATION_LIMIT = "iteration_limit"

INF = math.inf

# nonbasic-at-lower, nonbasic-at-upper, nonbasic-free (at zero), basic
_NB_LO, _NB_UP, _NB_FREE, _BASIC = 0, 1, 2, 3

_REFACTOR_EVERY = 500
_BLAND_AFTER = 1000
_DJ_TOL = 1e-9  # reduced-cost (dual feasibility) tolerance


class NumericalBreakdown(RuntimeError):
    """Pivot below tolerance even after a fresh refactorization."""


class ModelError(ValueError):
    """Constraint references an undeclared variable, or similar misuse."""


@dataclass
class MilpModel:
    """Variables, sparse constraint rows, and a minimization objective.

    Mutable while being assembled; treated as immutable once handed to a
    solver.  ``var_index`` maps semantic names (``size[pv]``,
    ``prod[grid,17]``) to variable ids.
    """

    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    binary: list = field(default_factory=list)
    obj: list = field(default_factory=list)
    rows: list = field(default_factory=list)      # (coefs dict, sense, rhs)
    offset: float = 0.0
    var_index: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)      # builder annotations, not solved

    @property
    def n_vars(self) -> int:
        return len(self.lower)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name=None, lower=0.0, upper=INF, obj=0.0,
                binary=False) -> int:
        if binary:
            lower, upper = max(0.0, lower), min(1.0, upper)
        j = len(self.lower)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.binary.append(bool(binary))
        self.obj.append(float(obj))
        if name is not None:
            if name in self.var_index:
                raise ModelError(f"duplicate variable name {name!r}")
            self.var_index[name] = j
        return j

    def add_obj(self, j: int, coef: float):
        self.obj[j] += coef

    def add_row(self, coefs: dict, sense: str, rhs: float):
        if sense not in (LE, EQ, GE):
            raise ModelError(f"bad sense {sense!r}")
        n = self.n_vars
        clean = {}
        for j, a in coefs.items():
            if not 0 <= j < n:
                raise ModelError(f"row references undeclared variable {j}")
            if a != 0.0:
                clean[int(j)] = clean.get(int(j), 0.0) + float(a)
        self.rows.append((clean, sense, float(rhs)))

    def var_name(self, j: int) -> str:
        for name, idx in self.var_index.items():
            if idx == j:
                return name
        return f"x{j}"

    def check_well_formed(self):
        for name, j in self.var_index.items():
            if not 0 <= j < self.n_vars:
                raise ModelError(f"var_index entry {name!r} out of range")
        if len(set(self.var_index.values())) != len(self.var_index):
            raise ModelError("var_index maps two names to one variable")

    def constraint_violation(self, x) -> float:
        """Largest absolute row/bound violation at point x."""
        worst = 0.0
        for j in range(self.n_vars):
            worst = max(worst, self.lower[j] - x[j], x[j] - self.upper[j])
        for coefs, sense, rhs in self.rows:
            lhs = sum(a * x[j] for j, a in coefs.items())
            if sense == LE:
                worst = max(worst, lhs - rhs)
            elif sense == GE:
                worst = max(worst, rhs - lhs)
            else:
                worst = max(worst, abs(lhs - rhs))
        return worst


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int = 0


def _solve_unconstrained(c, lo, hi, offset):
    x = np.zeros(len(c))
    obj = offset
    for j, cj in enumerate(c):
        if cj > 0:
            if lo[j] == -INF:
                return LpSolution(UNBOUNDED, None, None)
            x[j] = lo[j]
        elif cj < 0:
            if hi[j] == INF:
                return LpSolution(UNBOUNDED, None, None)
            x[j] = hi[j]
        else:
            x[j] = lo[j] if lo[j] > 0 else (hi[j] if hi[j] < 0 else 0.0)
        obj += cj * x[j]
    return LpSolution(OPTIMAL, x, obj)


class _Simplex:
    """One solve: standard-form arrays plus basis state."""

    def __init__(self, model: MilpModel, bounds, pivot_tol, max_iter):
        n = model.n_vars
        m = model.n_rows
        self.n_struct = n
        self.m = m
        self.pivot_tol = pivot_tol
        self.max_iter = max_iter

        lo = np.array(model.lower, dtype=float)
        hi = np.array(model.upper, dtype=float)
        if bounds:
            for j, (a, b) in bounds.items():
                lo[j], hi[j] = a, b

        # slack per inequality row; equality rows get artificials only
        slack_of_row = np.full(m, -1, dtype=int)
        cols_i = []
        cols_j = []
        cols_a = []
        ext_lo = [*lo]
        ext_hi = [*hi]
        for i, (coefs, sense, rhs) in enumerate(model.rows):
            for j, a in coefs.items():
                cols_i.append(i)
                cols_j.append(j)
                cols_a.append(a)
            if sense != EQ:
                sj = len(ext_lo)
                slack_of_row[i] = sj
                cols_i.append(i)
                cols_j.append(sj)
                cols_a.append(1.0)
                if sense == LE:
                    ext_lo.append(0.0)
                    ext_hi.append(INF)
                else:
                    ext_lo.append(-INF)
                    ext_hi.append(0.0)
        n_ext = len(ext_lo)

        # one artificial per row, fixed at zero unless its crash uses it
        for i in range(m):
            cols_i.append(i)
            cols_j.append(n_ext + i)
            cols_a.append(1.0)
        self.n_total = n_ext + m
        self.n_ext = n_ext
        self.A = sparse.csc_matrix(
            (cols_a, (cols_i, cols_j)), shape=(m, self.n_total))
        self.At = self.A.T.tocsr()
        self.b = np.array([r[2] for r in model.rows], dtype=float)

        self.lo = np.concatenate([ext_lo, np.zeros(m)])
        self.hi = np.concatenate([ext_hi, np.zeros(m)])
        self.c = np.concatenate(
            [np.array(model.obj, dtype=float), np.zeros(self.n_total - n)])

        self.slack_of_row = slack_of_row
        self.iterations = 0
        self.degenerate_run = 0
        self.bland = False

    # ---------------------------------------------------------- start basis

    def crash(self):
        n_ext, m = self.n_ext, self.m
        self.vstat = np.empty(self.n_total, dtype=np.int8)
        self.xval = np.zeros(self.n_total)
        for j in range(n_ext):
            lo, hi = self.lo[j], self.hi[j]
            if lo == -INF and hi == INF:
                self.vstat[j] = _NB_FREE
                self.xval[j] = 0.0
            elif lo != -INF and (abs(lo) <= abs(hi) or hi == INF):
                self.vstat[j] = _NB_LO
                self.xval[j] = lo
            else:
                self.vstat[j] = _NB_UP
                self.xval[j] = hi

        resid = self.b - self.A[:, :n_ext] @ self.xval[:n_ext]

        self.basis = np.empty(m, dtype=int)
        self.c1 = np.zeros(self.n_total)
        for i in range(m):
            sj = self.slack_of_row[i]
            r = resid[i]
            if sj >= 0 and self.lo[sj] - 1e-12 <= r <= self.hi[sj] + 1e-12:
                self.basis[i] = sj
                self.xval[sj] = r
            else:
                aj = n_ext + i
                self.basis[i] = aj
                self.xval[aj] = r
                if r >= 0:
                    self.hi[aj] = INF
                    self.c1[aj] = 1.0
                else:
                    self.lo[aj] = -INF
                    self.c1[aj] = -1.0
        self.vstat[self.basis] = _BASIC
        self.binv = np.eye(m)
        self.since_refactor = 0

    # ------------------------------------------------------------- numerics

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis") from exc
        self.recompute_basics()
        self.since_refactor = 0

    def recompute_basics(self):
        nb_mask = self.vstat != _BASIC
        nb = np.flatnonzero(nb_mask)
        rhs = self.b - self.A[:, nb] @ self.xval[nb]
        self.xval[self.basis] = self.binv @ rhs

    # ------------------------------------------------------------ iteration

    def price(self, cost):
        y = self.binv.T @ cost[self.basis]
        d = cost - self.At @ y
        return d

    def pick_entering(self, d):
        movable = (self.vstat != _BASIC) & (self.lo != self.hi)
        down = movable & (self.vstat != _NB_UP) & (d < -_DJ_TOL)  # can increase
        up = movable & (self.vstat != _NB_LO) & (d > _DJ_TOL)     # can decrease
        cand = np.flatnonzero(down | up)
        if cand.size == 0:
            return -1, 0
        if self.bland:
            e = int(cand[0])
        else:
            e = int(cand[np.argmax(np.abs(d[cand]))])
        sigma = 1 if d[e] < 0 else -1
        return e, sigma

    def ratio_test(self, e, sigma, w):
        """Step length along entering direction; returns (t, leaving_row,
        leaving_to_upper) with leaving_row = -1 for a bound flip."""
        t_best = self.hi[e] - self.lo[e]  # flip to the opposite bound
        leave = -1
        leave_up = False
        piv = self.pivot_tol
        for i in range(self.m):
            wi = sigma * w[i]
            j = self.basis[i]
            if wi > piv:
                limit = self.lo[j]
                if limit == -INF:
                    continue
                t = (self.xval[j] - limit) / wi
                hits_upper = False
            elif wi < -piv:
                limit = self.hi[j]
                if limit == INF:
                    continue
                t = (self.xval[j] - limit) / wi
                hits_upper = True
            else:
                continue
            if t < -1e-12:
                t = 0.0
            better = t < t_best - 1e-12
            tie = abs(t - t_best) <= 1e-12
            prefer = (self.bland and tie and leave >= 0
                      and j < self.basis[leave])
            stable = (tie and leave >= 0
                      and abs(wi) > abs(sigma * w[leave]))
            if better or prefer or (stable and not self.bland):
                t_best = t
                leave = i
                leave_up = hits_upper
        return t_best, leave, leave_up

    def pivot(self, e, sigma, w, t, leave, leave_up):
        m = self.m
        if t != 0.0:
            self.xval[self.basis] -= sigma * t * w
        if leave < 0:
            # bound flip: entering variable crosses to its other bound
            self.xval[e] = self.hi[e] if sigma > 0 else self.lo[e]
            self.vstat[e] = _NB_UP if sigma > 0 else _NB_LO
            return
        lv = self.basis[leave]
        self.xval[lv] = self.hi[lv] if leave_up else self.lo[lv]
        self.vstat[lv] = _NB_UP if leave_up else _NB_LO
        if lv >= self.n_ext:
            # artificial leaves: freeze it out of the problem
            self.lo[lv] = self.hi[lv] = 0.0
            self.xval[lv] = 0.0
        start = (self.lo[e] if self.vstat[e] == _NB_LO
                 else self.hi[e] if self.vstat[e] == _NB_UP else 0.0)
        self.xval[e] = start + sigma * t
        self.vstat[e] = _BASIC
        self.basis[leave] = e
        # elementary update of the explicit inverse
        wr = w[leave]
        row = self.binv[leave, :] / wr
        self.binv -= np.outer(w, row)
        self.binv[leave, :] = row
        self.since_refactor += 1

    def run_phase(self, cost, max_iter):
        """Iterate to optimality for the given cost vector."""
        while True:
            if self.iterations >= max_iter:
                return ITERATION_LIMIT
            if self.since_refactor >= _REFACTOR_EVERY:
                self.refactor()
            d = self.price(cost)
            e, sigma = self.pick_entering(d)
            if e < 0:
                return OPTIMAL
            w = self.binv @ self.A[:, [e]].toarray().ravel()
            t, leave, leave_up = self.ratio_test(e, sigma, w)
            if leave < 0 and not np.isfinite(t):
                return UNBOUNDED
            if leave >= 0 and abs(w[leave]) < self.pivot_tol:
                # suspicious pivot: refactor once and retry the iteration
                if self.since_refactor == 0:
                    raise NumericalBreakdown(
                        f"pivot {w[leave]:.2e} below tolerance after refactor")
                self.refactor()
                continue
            self.iterations += 1
            if t <= 1e-12:
                self.degenerate_run += 1
                if self.degenerate_run >= _BLAND_AFTER:
                    self.bland = True
            else:
                self.degenerate_run = 0
            self.pivot(e, sigma, w, t, leave, leave_up)

    def drive_out_artificials(self):
        """Pivot basic artificials (at zero) onto structural columns where
        possible; rows that stay artificial are redundant."""
        for i in range(self.m):
            if self.basis[i] < self.n_ext:
                continue
            # row i of B^-1 A restricted to real columns
            row = (self.At @ self.binv[i, :])[:self.n_ext]
            cand = np.flatnonzero(
                (np.abs(row) > 1e-7) & (self.vstat[:self.n_ext] != _BASIC)
                & (self.lo[:self.n_ext] != self.hi[:self.n_ext]))
            if cand.size == 0:
                continue
            e = int(cand[0])
            w = self.binv @ self.A[:, [e]].toarray().ravel()
            if abs(w[i]) < 1e-9:
                continue
            lv = self.basis[i]
            self.lo[lv] = self.hi[lv] = 0.0
            self.xval[lv] = 0.0
            self.vstat[lv] = _NB_LO
            start = (self.lo[e] if self.vstat[e] == _NB_LO
                     else self.hi[e] if self.vstat[e] == _NB_UP else 0.0)
            self.xval[e] = start
            self.vstat[e] = _BASIC
            self.basis[i] = e
            wr = w[i]
            row2 = self.binv[i, :] / wr
            self.binv -= np.outer(w, row2)
            self.binv[i, :] = row2
            self.since_refactor += 1


def solve_lp(model: MilpModel, *, bounds=None, feas_tol=1e-7,
             pivot_tol=1e-9, max_iter=None) -> LpSolution:
    """LP relaxation solve; integrality marks are ignored.

    ``bounds`` optionally overrides {var id: (lower, upper)} without
    touching the model (used by branch-and-bound).
    """
    lo = np.array(model.lower, dtype=float)
    hi = np.array(model.upper, dtype=float)
    if bounds:
        for j, (a, b) in bounds.items():
            lo[j], hi[j] = a, b
    if np.any(lo > hi):
        return LpSolution(INFEASIBLE, None, None)

    if model.n_rows == 0:
        return _solve_unconstrained(
            np.array(model.obj, dtype=float), lo, hi, model.offset)

    if max_iter is None:
        max_iter = 2000 + 60 * (model.n_rows + model.n_vars)

    sx = _Simplex(model, bounds, pivot_tol, max_iter)
    sx.crash()

    status = sx.run_phase(sx.c1, max_iter)
    if status == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, None, None, sx.iterations)
    sx.refactor()
    phase1 = float(sx.c1 @ sx.xval)
    if phase1 > feas_tol:
        return LpSolution(INFEASIBLE, None, None, sx.iterations)

    # freeze artificials at zero and clear them from the basis where we can
    art = np.arange(sx.n_ext, sx.n_total)
    sx.lo[art] = 0.0
    sx.hi[art] = 0.0
    nonbasic_art = art[sx.vstat[art] != _BASIC]
    sx.xval[nonbasic_art] = 0.0
    sx.vstat[nonbasic_art] = _NB_LO
    sx.drive_out_artificials()
    sx.recompute_basics()

    status = sx.run_phase(sx.c, max_iter)
    if status == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, None, None, sx.iterations)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, None, sx.iterations)
    sx.refactor()

    x = sx.xval[:model.n_vars].copy()
    obj = float(np.dot(model.obj, x)) + model.offset
    return LpSolution(OPTIMAL, x, obj, sx.iterations)
