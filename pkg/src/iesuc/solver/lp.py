"""Linear relaxation solves.

Two engines sit behind :func:`solve_lp`:

* ``"simplex"``: a dense bounded-variable revised simplex (two phases,
  Dantzig pricing, Bland's rule after a run of degenerate pivots). Meant
  for small programs and for auditing.
* ``"highs"``: the HiGHS dual simplex through ``highspy``. An
  :class:`LpSession` keeps the model alive between solves so that bound
  changes (branching) and appended cuts warm-start from the last basis.
  Used for the unit-commitment models, where a pure-Python pivot loop is
  too slow.
* ``"scipy"``: the same HiGHS solver through :func:`scipy.optimize.milp`,
  rebuilt from scratch on each call.
"""

from __future__ import annotations

import highspy
import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .program import ConicProgram, SolveResult, SolverError

FEAS_TOL = 1e-9
OPT_TOL = 1e-9


class CutPool:
    """Linear cuts ``coefs @ x <= rhs`` accumulated by outer approximation."""

    def __init__(self, n: int):
        self.n = n
        self._rows: list[tuple[tuple[int, ...], tuple[float, ...], float]] = []
        self._matrix = None

    def __len__(self) -> int:
        return len(self._rows)

    def add(self, cols, coefs, rhs: float) -> None:
        self._rows.append((tuple(cols), tuple(coefs), float(rhs)))
        self._matrix = None

    def matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        if self._matrix is None:
            rows, cols, vals = [], [], []
            for r, (cc, vv, _) in enumerate(self._rows):
                rows.extend([r] * len(cc))
                cols.extend(cc)
                vals.extend(vv)
            A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self._rows), self.n))
            rhs = np.array([r[2] for r in self._rows])
            self._matrix = (A, rhs)
        return self._matrix


def _stack(p: ConicProgram, cuts: CutPool | None):
    A, lo, hi = p.A, p.row_lo, p.row_hi
    if cuts is not None and len(cuts):
        Ac, rhs = cuts.matrix()
        A = sp.vstack([A, Ac], format="csr")
        lo = np.concatenate([lo, np.full(rhs.size, -np.inf)])
        hi = np.concatenate([hi, rhs])
    return A, lo, hi


LP_ENGINES = ("highs", "scipy", "simplex")


def _result(p: ConicProgram, status: str, x) -> SolveResult:
    if status != "optimal":
        val = np.inf if status == "infeasible" else -np.inf
        return SolveResult(status, None, val, val, np.inf, lp_solves=1)
    obj = p.objective(x)
    return SolveResult("optimal", x, obj, obj, 0.0, lp_solves=1)


def solve_lp(p: ConicProgram, lb=None, ub=None, cuts: CutPool | None = None,
             engine: str = "highs") -> SolveResult:
    """Solve the LP relaxation of ``p`` (integrality dropped, cones replaced by ``cuts``)."""
    if engine == "highs":
        return LpSession(p, cuts, engine).solve(lb, ub)
    if engine not in LP_ENGINES:
        raise ValueError(f"unknown LP engine {engine!r}; available: {', '.join(LP_ENGINES)}")
    lb = p.lb if lb is None else lb
    ub = p.ub if ub is None else ub
    if np.any(lb > ub + FEAS_TOL):
        return _result(p, "infeasible", None)
    A, lo, hi = _stack(p, cuts)
    if engine == "scipy":
        status, x = _solve_highs(p.c, A, lo, hi, lb, ub)
    else:
        status, x = revised_simplex(p.c, A.toarray(), lo, hi, lb, ub)
    return _result(p, status, x)


class LpSession:
    """One LP kept alive across solves; new rows of ``cuts`` are appended lazily.

    With the ``"highs"`` engine the HiGHS model persists, so each solve after
    a bound change or a new cut starts from the previous basis. Other engines
    fall back to stateless :func:`solve_lp` calls.
    """

    def __init__(self, p: ConicProgram, cuts: CutPool | None = None, engine: str = "highs"):
        if engine not in LP_ENGINES:
            raise ValueError(f"unknown LP engine {engine!r}; available: {', '.join(LP_ENGINES)}")
        self.p = p
        self.cuts = cuts
        self.engine = engine
        self._h: highspy.Highs | None = None
        self._synced = 0

    def _build(self) -> highspy.Highs:
        p = self.p
        h = highspy.Highs()
        for key, val in (("output_flag", False), ("threads", 1), ("presolve", "off"),
                         ("primal_feasibility_tolerance", FEAS_TOL),
                         ("dual_feasibility_tolerance", OPT_TOL)):
            h.setOptionValue(key, val)
        A = p.A.tocsc()
        lp = highspy.HighsLp()
        lp.num_col_, lp.num_row_ = p.n, p.m
        lp.col_cost_ = p.c
        lp.col_lower_, lp.col_upper_ = p.lb, p.ub
        lp.row_lower_, lp.row_upper_ = p.row_lo, p.row_hi
        lp.offset_ = p.c0
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        h.passModel(lp)
        return h

    def _sync_cuts(self, h: highspy.Highs) -> None:
        if self.cuts is None or len(self.cuts) == self._synced:
            return
        rows = self.cuts._rows[self._synced:]
        starts, idx, vals = [], [], []
        for cols, coefs, _ in rows:
            starts.append(len(idx))
            idx.extend(cols)
            vals.extend(coefs)
        h.addRows(len(rows), np.full(len(rows), -np.inf), np.array([r[2] for r in rows]),
                  len(idx), np.array(starts, dtype=np.int32), np.array(idx, dtype=np.int32),
                  np.array(vals, dtype=float))
        self._synced = len(self.cuts)

    def solve(self, lb=None, ub=None) -> SolveResult:
        p = self.p
        lb = p.lb if lb is None else lb
        ub = p.ub if ub is None else ub
        if self.engine != "highs":
            return solve_lp(p, lb, ub, self.cuts, self.engine)
        if np.any(lb > ub + FEAS_TOL):
            return _result(p, "infeasible", None)
        if self._h is None:
            self._h = self._build()
        h = self._h
        self._sync_cuts(h)
        h.changeColsBounds(p.n, np.arange(p.n, dtype=np.int32), np.asarray(lb, float),
                           np.asarray(ub, float))
        h.run()
        status = h.getModelStatus()
        S = highspy.HighsModelStatus
        if status == S.kOptimal:
            return _result(p, "optimal", np.array(h.getSolution().col_value))
        if status == S.kInfeasible:
            return _result(p, "infeasible", None)
        # unbounded, ambiguous or numerically troubled: settle it from scratch
        A, lo, hi = _stack(p, self.cuts)
        st, x = _solve_highs(p.c, A, lo, hi, lb, ub)
        self._h = None
        self._synced = 0
        return _result(p, st, x)


def _solve_highs(c, A, lo, hi, lb, ub):
    constraints = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    res = milp(c, constraints=constraints, bounds=Bounds(lb, ub),
               integrality=np.zeros(c.size), options={"presolve": True})
    if res.status == 0:
        return "optimal", np.asarray(res.x, dtype=float)
    if res.status == 2:
        return "infeasible", None
    if res.status == 3:
        return "unbounded", None
    # HiGHS may report "infeasible or unbounded" without presolve resolution
    if "unbounded" in res.message.lower() or "infeasible" in res.message.lower():
        return _disambiguate(c, A, lo, hi, lb, ub)
    raise SolverError(f"HiGHS failed: {res.message}")


def _disambiguate(c, A, lo, hi, lb, ub):
    constraints = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
    feas = milp(np.zeros_like(c), constraints=constraints, bounds=Bounds(lb, ub),
                integrality=np.zeros(c.size))
    if feas.status == 2:
        return "infeasible", None
    if feas.status == 0:
        return "unbounded", None
    raise SolverError(f"HiGHS failed: {feas.message}")


def revised_simplex(c, A, row_lo, row_hi, lb, ub, max_iter: int = 50_000,
                    degenerate_limit: int = 50):
    """Bounded-variable revised simplex on ``row_lo <= A x <= row_hi, lb <= x <= ub``.

    Returns ``(status, x)`` with status in {optimal, infeasible, unbounded}.
    Rows become equalities ``A x - s = 0`` over slacks ``s`` bounded by the row
    range; phase I drives one artificial per row to zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if m == 0:
        return _box_only(np.asarray(c, float), np.asarray(lb, float), np.asarray(ub, float))
    # columns: x (n) | slacks (m) | artificials (m)
    lo = np.concatenate([lb, row_lo, np.zeros(m)]).astype(float)
    up = np.concatenate([ub, row_hi, np.full(m, np.inf)]).astype(float)
    if np.any(lo > up + FEAS_TOL):
        return "infeasible", None
    M = np.hstack([A, -np.eye(m), np.zeros((m, m))])

    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))
    art = np.arange(n + m, n + 2 * m)
    x[art] = 0.0
    resid = -(M @ x)
    sign = np.where(resid >= 0, 1.0, -1.0)
    M[np.arange(m), art] = sign
    x[art] = np.abs(resid)
    basis = art.copy()

    cost1 = np.zeros(n + 2 * m)
    cost1[art] = 1.0
    status = _iterate(M, cost1, lo, up, x, basis, max_iter, degenerate_limit)
    if status != "optimal":
        raise SolverError(f"phase I ended with status {status}")
    if x[art].sum() > 1e-8:
        return "infeasible", None

    up[art] = 0.0
    x[art] = np.where(np.isin(art, basis), x[art], 0.0)
    cost2 = np.concatenate([np.asarray(c, float), np.zeros(2 * m)])
    status = _iterate(M, cost2, lo, up, x, basis, max_iter, degenerate_limit)
    if status != "optimal":
        return status, None
    return "optimal", x[:n].copy()


def _box_only(c, lb, ub):
    x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb,
                                                         np.where(np.isfinite(ub), ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return "unbounded", None
    return "optimal", x


def _iterate(M, cost, lo, up, x, basis, max_iter, degenerate_limit):
    m, N = M.shape
    in_basis = np.zeros(N, dtype=bool)
    in_basis[basis] = True
    degenerate_run = 0
    for _ in range(max_iter):
        B = M[:, basis]
        try:
            lu = la.lu_factor(B)
        except (la.LinAlgError, ValueError) as exc:
            raise SolverError(f"singular basis: {exc}") from None
        nonbasic = ~in_basis
        xN = np.where(nonbasic, x, 0.0)
        x[basis] = la.lu_solve(lu, -(M @ xN))
        y = la.lu_solve(lu, cost[basis], trans=1)
        d = cost - M.T @ y
        d[basis] = 0.0

        at_lo = nonbasic & np.isclose(x, lo) & (d < -OPT_TOL) & (up > lo)
        at_up = nonbasic & np.isclose(x, up) & (d > OPT_TOL) & (up > lo)
        free = nonbasic & ~np.isfinite(lo) & ~np.isfinite(up) & (np.abs(d) > OPT_TOL)
        # nonbasic strictly between bounds (only free columns start there)
        mid = nonbasic & ~np.isclose(x, lo) & ~np.isclose(x, up) & (np.abs(d) > OPT_TOL)
        eligible = at_lo | at_up | free | mid
        if not eligible.any():
            return "optimal"
        bland = degenerate_run >= degenerate_limit
        cand = np.flatnonzero(eligible)
        j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
        direction = -1.0 if d[j] > 0 else 1.0

        w = la.lu_solve(lu, M[:, j])
        dw = direction * w  # basic values move by -t * dw
        t_best = up[j] - lo[j]
        leave = -1
        with np.errstate(divide="ignore", invalid="ignore"):
            dec = dw > 1e-11
            inc = dw < -1e-11
            ratio = np.full(m, np.inf)
            ratio[dec] = (x[basis][dec] - lo[basis][dec]) / dw[dec]
            ratio[inc] = (up[basis][inc] - x[basis][inc]) / -dw[inc]
        ratio = np.maximum(ratio, 0.0)
        if m:
            r_min = ratio.min()
            if r_min < t_best:
                ties = np.flatnonzero(ratio <= r_min + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(dw[ties]))])
                t_best = r_min
        if not np.isfinite(t_best):
            return "unbounded"
        degenerate_run = degenerate_run + 1 if t_best <= 1e-12 else 0

        x[j] += direction * t_best
        x[basis] -= t_best * dw
        if leave < 0:
            continue  # bound flip
        out = basis[leave]
        x[out] = lo[out] if dw[leave] > 0 else up[out]
        in_basis[out] = False
        in_basis[j] = True
        basis[leave] = j
    raise SolverError("simplex iteration limit reached")
