"""Branch-and-bound for mixed-integer programs with second-order cone rows.

Every node relaxation is an LP over the original rows plus a global pool of
outer-approximation cuts; the LP is re-solved until no cone is violated by
more than ``cone_tol``. Cuts are valid for the whole feasible set, so the
pool is shared across the tree. Nodes are evaluated when created and kept in
a best-bound heap (ties: deeper first, then creation order); branching picks
the most fractional integer column, lowest index on ties.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cones import separate_cone
from .lp import CutPool, LpSession
from .program import ConicProgram, NodeEvent, SolveResult, SolverOptions

log = logging.getLogger(__name__)


@dataclass
class _Stats:
    lp_solves: int = 0
    unresolved: int = 0
    oa_history: list[list[float]] = field(default_factory=list)


@dataclass
class Relaxation:
    status: str
    x: np.ndarray | None
    objective: float
    cone_feasible: bool
    rounds: list[float]


def solve_relaxation(p: ConicProgram, lb, ub, pool: CutPool, opts: SolverOptions,
                     stats: _Stats | None = None, session: LpSession | None = None) -> Relaxation:
    """LP + outer-approximation loop at fixed variable bounds."""
    session = session or LpSession(p, pool, opts.lp_engine)
    rounds: list[float] = []
    for _ in range(opts.max_oa_rounds):
        res = session.solve(lb, ub)
        if stats is not None:
            stats.lp_solves += 1
        if res.status != "optimal":
            return Relaxation(res.status, None, res.objective, False, rounds)
        rounds.append(res.objective)
        added = 0
        for cone in p.cones:
            cut = separate_cone(res.x, cone, opts.cone_tol)
            if cut is not None:
                pool.add(cut.cols, cut.coefs, cut.rhs)
                added += 1
        if not added:
            return Relaxation("optimal", res.x, res.objective, True, rounds)
    if stats is not None:
        stats.unresolved += 1
    return Relaxation("optimal", res.x, res.objective, False, rounds)


def _most_fractional(x: np.ndarray, int_cols: np.ndarray, tol: float) -> int:
    if int_cols.size == 0:
        return -1
    v = x[int_cols]
    frac = np.abs(v - np.round(v))
    k = int(np.argmax(frac))
    return int(int_cols[k]) if frac[k] > tol else -1


def _rel_gap(inc: float, bound: float) -> float:
    if not math.isfinite(inc):
        return math.inf
    if inc - bound <= 0:
        return 0.0
    return (inc - bound) / max(abs(inc), 1e-10)


def branch_and_bound(p: ConicProgram, opts: SolverOptions | None = None,
                     pool: CutPool | None = None) -> SolveResult:
    """Solve ``p`` to relative gap ``opts.gap``.

    An optional cut pool may be passed in to reuse cuts from earlier solves
    of programs with identical rows and cones.
    """
    opts = opts or SolverOptions()
    start = time.perf_counter()
    pool = pool if pool is not None else CutPool(p.n)
    stats = _Stats()
    int_cols = np.flatnonzero(p.integer)
    trace: list[NodeEvent] = []

    session = LpSession(p, pool, opts.lp_engine)
    root = solve_relaxation(p, p.lb, p.ub, pool, opts, stats, session)
    stats.oa_history.append(root.rounds)
    if root.status != "optimal":
        status = "unbounded" if root.status == "unbounded" else "infeasible"
        val = -math.inf if status == "unbounded" else math.inf
        return SolveResult(status, None, val, val, math.inf, 1, stats.lp_solves, len(pool))

    inc_x: np.ndarray | None = None
    inc_obj = math.inf

    def try_incumbent(x: np.ndarray) -> None:
        nonlocal inc_x, inc_obj
        lb = p.lb.copy()
        ub = p.ub.copy()
        fixed = np.round(x[int_cols])
        lb[int_cols] = fixed
        ub[int_cols] = fixed
        rel = solve_relaxation(p, lb, ub, pool, opts, stats, session)
        if rel.status == "optimal" and rel.cone_feasible and rel.objective < inc_obj:
            xs = rel.x.copy()
            xs[int_cols] = fixed
            inc_x, inc_obj = xs, p.objective(xs)

    heap: list = []
    seq = 0
    nodes = 1
    # lowest bound among nodes dropped without being fully resolved
    dropped_bound = math.inf

    def prunable(bound: float) -> bool:
        return bound >= inc_obj - opts.gap * max(abs(inc_obj), 1e-10)

    def consider(rel: Relaxation, lb, ub, depth: int) -> None:
        nonlocal seq, dropped_bound
        if prunable(rel.objective):
            dropped_bound = min(dropped_bound, rel.objective)
            return
        j = _most_fractional(rel.x, int_cols, opts.int_tol)
        if j < 0:
            if rel.cone_feasible:
                try_incumbent(rel.x)
            else:
                dropped_bound = min(dropped_bound, rel.objective)
            return
        heapq.heappush(heap, (rel.objective, -depth, seq, j, rel.x[j], lb, ub))
        seq += 1

    def global_bound() -> float:
        return min(heap[0][0] if heap else math.inf, inc_obj)

    if opts.heuristics and int_cols.size:
        x = root.x
        for rounded in (np.ceil(x[int_cols] - opts.int_tol), np.round(x[int_cols])):
            cand = x.copy()
            cand[int_cols] = np.clip(rounded, p.lb[int_cols], p.ub[int_cols])
            try_incumbent(cand)

    consider(root, p.lb.copy(), p.ub.copy(), 0)
    trace.append(NodeEvent(0, 0, root.objective, inc_obj, min(root.objective, inc_obj)))

    status = "optimal"
    while heap:
        if _rel_gap(inc_obj, global_bound()) <= opts.gap:
            break
        if nodes >= opts.node_limit or time.perf_counter() - start > opts.time_limit:
            status = "limit"
            break
        bound, negdepth, _, j, xj, lb, ub = heapq.heappop(heap)
        if prunable(bound):
            dropped_bound = min(dropped_bound, bound)
            continue
        depth = -negdepth + 1
        for side in ("down", "up"):
            clb, cub = lb.copy(), ub.copy()
            if side == "down":
                cub[j] = math.floor(xj)
            else:
                clb[j] = math.ceil(xj)
            rel = solve_relaxation(p, clb, cub, pool, opts, stats, session)
            stats.oa_history.append(rel.rounds)
            nodes += 1
            node_bound = rel.objective if rel.status == "optimal" else math.inf
            if rel.status == "optimal":
                consider(rel, clb, cub, depth)
            trace.append(NodeEvent(nodes - 1, depth, node_bound, inc_obj,
                                   min(global_bound(), bound)))

    bound = min(global_bound(), dropped_bound)
    if inc_x is None:
        failed = status == "limit" or stats.unresolved
        return SolveResult("limit" if failed else "infeasible", None, math.inf,
                           bound if failed else math.inf, math.inf, nodes,
                           stats.lp_solves, len(pool), trace, stats.oa_history)
    gap = _rel_gap(inc_obj, bound)
    if status == "optimal" and gap > opts.gap:
        status = "limit"
    log.debug("bnb: %d nodes, %d LPs, %d cuts, obj %.10g, gap %.2e",
              nodes, stats.lp_solves, len(pool), inc_obj, gap)
    return SolveResult(status, inc_x, inc_obj, bound, gap, nodes, stats.lp_solves,
                       len(pool), trace, stats.oa_history)
