"""Independent reference answers used by the tests."""

from __future__ import annotations

import itertools
import warnings

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from iesuc.solver import Affine, ConicProgram, SocConstraint


def _affine_expr(a: Affine, x):
    if not a.cols:
        return a.const
    return a.const + np.array(a.coefs) @ x[list(a.cols)]


class ContinuousOracle:
    """Optimal value of ``p`` at given variable bounds with integrality dropped.

    Programs without cones go through ``linprog``; cone programs through a
    cvxpy problem compiled once with the bounds as parameters.
    """

    def __init__(self, p: ConicProgram):
        self.p = p
        A = p.A.tocsr()
        fin_hi, fin_lo = np.isfinite(p.row_hi), np.isfinite(p.row_lo)
        self._prob = None
        if not p.cones:
            self.A_ub = sp.vstack([A[fin_hi], -A[fin_lo]]) if p.m else None
            self.b_ub = np.concatenate([p.row_hi[fin_hi], -p.row_lo[fin_lo]]) if p.m else None
            return
        x = cp.Variable(p.n)
        self.fin_lb, self.fin_ub = np.isfinite(p.lb), np.isfinite(p.ub)
        self.lb = cp.Parameter(int(self.fin_lb.sum()))
        self.ub = cp.Parameter(int(self.fin_ub.sum()))
        cons = [x[self.fin_lb] >= self.lb, x[self.fin_ub] <= self.ub]
        Ad = A.toarray()
        if fin_hi.any():
            cons.append(Ad[fin_hi] @ x <= p.row_hi[fin_hi])
        if fin_lo.any():
            cons.append(Ad[fin_lo] @ x >= p.row_lo[fin_lo])
        for cone in p.cones:
            u = cp.hstack([_affine_expr(m, x) for m in cone.members])
            cons.append(cp.SOC(_affine_expr(cone.bound, x), u))
        self._prob = cp.Problem(cp.Minimize(p.c @ x + p.c0), cons)

    def __call__(self, lb: np.ndarray, ub: np.ndarray) -> float:
        p = self.p
        if self._prob is None:
            res = linprog(p.c, A_ub=self.A_ub, b_ub=self.b_ub, bounds=list(zip(lb, ub)),
                          method="highs")
            return res.fun + p.c0 if res.status == 0 else np.inf
        self.lb.value, self.ub.value = lb[self.fin_lb], ub[self.fin_ub]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self._prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10,
                             tol_feas=1e-10)
        status = self._prob.status
        if status in ("infeasible", "infeasible_inaccurate"):
            return np.inf
        if status not in ("optimal", "optimal_inaccurate"):
            raise RuntimeError(f"reference solve failed: {status}")
        return float(self._prob.value)


def enumerate_binaries(p: ConicProgram) -> tuple[float, tuple[int, ...] | None]:
    """Best objective over every 0/1 assignment of the integer columns."""
    oracle = ContinuousOracle(p)
    ints = np.flatnonzero(p.integer)
    best, arg = np.inf, None
    for bits in itertools.product((0, 1), repeat=ints.size):
        lb, ub = p.lb.copy(), p.ub.copy()
        b = np.array(bits, dtype=float)
        if np.any(b < p.lb[ints]) or np.any(b > p.ub[ints]):
            continue
        lb[ints] = ub[ints] = b
        val = oracle(lb, ub)
        if val < best:
            best, arg = val, bits
    return best, arg


def random_instance(rng: np.random.Generator, n_bin: int, n_cont: int, n_rows: int,
                    n_cones: int) -> ConicProgram:
    """Random bounded mixed-binary program that is feasible at a planted point."""
    n = n_bin + n_cont
    lb = np.concatenate([np.zeros(n_bin), np.full(n_cont, -5.0)])
    ub = np.concatenate([np.ones(n_bin), np.full(n_cont, 5.0)])
    x0 = np.concatenate([rng.integers(0, 2, n_bin), rng.uniform(-2, 2, n_cont)])
    A = rng.normal(size=(n_rows, n)) * (rng.random((n_rows, n)) < 0.6)
    ax = A @ x0
    row_hi = ax + rng.uniform(0.0, 2.0, n_rows)
    row_lo = np.where(rng.random(n_rows) < 0.3, ax - rng.uniform(0.0, 2.0, n_rows), -np.inf)
    cones = []
    for k in range(n_cones):
        cols = rng.choice(n, size=3, replace=False)
        members = []
        for _ in range(2):
            coefs = rng.normal(size=3)
            members.append(Affine.of(dict(zip(cols.tolist(), coefs)), float(rng.normal())))
        u0 = np.linalg.norm([m.value(x0) for m in members])
        tc = int(rng.choice([c for c in range(n_bin, n)] or list(range(n))))
        slope = float(rng.uniform(0.2, 1.0))
        const = u0 - slope * x0[tc] + rng.uniform(0.1, 1.0)
        cones.append(SocConstraint(Affine.of({tc: slope}, const), tuple(members), f"k{k}"))
    c = rng.normal(size=n)
    return ConicProgram(c, sp.csr_matrix(A), row_lo, row_hi, lb, ub,
                        np.arange(n) < n_bin, cones)
