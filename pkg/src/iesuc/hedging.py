"""Progressive hedging over wind scenarios, plus the two baseline methods.

* ``solve_extensive``: one joint program with commitments shared by all scenarios.
* ``solve_deterministic``: commit on a single reference curve, then dispatch every scenario.
* ``run_progressive_hedging``: per-scenario solves coordinated by multipliers; with
  ``epsilon > 0`` the last few undecided commitments are settled by enumeration.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import (COST_GROUPS, ModelInstance, audit_relaxation, build_model,
                    determine_flow_directions, default_gamma)
from .network import IesNetwork
from .scenarios import ScenarioSet
from .solver import SolveResult, SolverOptions, solve

SCENARIO_FAMILIES = ("pdf", "pg", "np", "ng", "sto", "sti", "sl", "wc", "pf", "theta", "pi",
                     "pibar", "m", "gfo", "gfi", "gf", "gc")


class HedgingError(RuntimeError):
    pass


@dataclass
class PhOptions:
    kappa_coeff: float = 1.0
    epsilon: int = 0
    max_iter: int = 150
    binary_tol: float = 1e-4
    workers: int = 1
    rho_update: str = "previous"  # or "current": update with the freshly averaged c
    solver: SolverOptions = field(default_factory=SolverOptions)
    backend: str = "embedded"

    def __post_init__(self):
        if self.epsilon not in (0, 1, 2):
            raise ValueError("epsilon must be 0, 1 or 2")
        if self.kappa_coeff <= 0:
            raise ValueError("kappa coefficient must be > 0")
        if self.rho_update not in ("previous", "current"):
            raise ValueError("rho_update must be 'previous' or 'current'")
        if self.workers < 1 or self.max_iter < 0:
            raise ValueError("workers must be >= 1 and max_iter >= 0")


@dataclass
class TraceRow:
    iteration: int
    ind: int
    objectives: tuple[float, ...]
    cbar: np.ndarray


@dataclass
class PhState:
    iteration: int
    rho: np.ndarray  # (scenarios, G, T)
    c: np.ndarray  # (scenarios, G, T), 0/1
    cbar: np.ndarray  # (G, T)
    cbar0: np.ndarray
    ind: int
    trace: list[TraceRow] = field(default_factory=list)
    wall: list[float] = field(default_factory=list)
    solutions: list[np.ndarray] = field(default_factory=list)


@dataclass
class FixedEvaluation:
    schedule: np.ndarray
    objective: float  # expected cost + pressure penalty
    expected_cost: float
    breakdown: dict[str, float]
    solutions: list[np.ndarray]


@dataclass
class HedgingResult:
    method: str
    status: str  # optimal | limit | infeasible
    schedule: np.ndarray  # (G, T) int
    expected_cost: float
    objective: float
    breakdown: dict[str, float]
    dispatch: dict[str, np.ndarray]  # family -> (entities, T, scenarios)
    audit: np.ndarray  # (pipelines, T, scenarios)
    probabilities: np.ndarray
    trace: list[TraceRow] = field(default_factory=list)
    iterations: int = 0
    ind: int = 0
    cases: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def non_served_power(self) -> np.ndarray:
        """Total non-served energy per scenario, GWh."""
        return self.dispatch["np"].sum(axis=(0, 1))

    @property
    def non_served_gas(self) -> np.ndarray:
        return self.dispatch["ng"].sum(axis=(0, 1))


def kappa_matrix(net: IesNetwork, coeff: float = 1.0) -> np.ndarray:
    """Penalty weight per commitment entry: ``coeff * C_PD * P_min``, shape (G, T)."""
    k = np.array([coeff * g.C_PD * g.P_min for g in net.generators])
    return np.repeat(k[:, None], net.horizon, axis=1)


def inconsistency(cbar: np.ndarray, tol: float = 1e-4) -> int:
    return int(np.count_nonzero(np.minimum(cbar, 1.0 - cbar) > tol))


def penalized_objective(base: np.ndarray, c_cols: np.ndarray, rho: np.ndarray,
                        cbar: np.ndarray, kappa: np.ndarray) -> tuple[np.ndarray, float]:
    """Linear coefficients and constant of ``base + rho c + kappa/2 (c - cbar)^2`` with c^2 -> c."""
    out = np.array(base, dtype=float)
    out[c_cols] += rho + kappa * (0.5 - cbar)
    return out, float(np.sum(kappa * cbar**2) / 2)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _check(res: SolveResult, what: str) -> SolveResult:
    if res.status not in ("optimal", "limit") or res.x is None:
        raise HedgingError(f"{what} is {res.status}")
    return res


def scenario_models(net: IesNetwork, scenarios: ScenarioSet, directions: np.ndarray | None = None,
                    gamma: float | None = None, terminal_linepack: str = "eq") -> list[ModelInstance]:
    """One single-scenario model per scenario, sharing the commitment column layout."""
    gamma = default_gamma(net) if gamma is None else gamma
    if directions is None and net.pipelines:
        directions = determine_flow_directions(net, scenarios, terminal_linepack)
    out = []
    for s in range(len(scenarios)):
        d = directions[:, :, s:s + 1] if directions is not None else None
        out.append(build_model(net, scenarios.single(s), d, gamma, terminal_linepack))
    return out


def _solve_scenario(model: ModelInstance, c: np.ndarray, c0: float,
                    opts: PhOptions) -> SolveResult:
    return solve(model.program.with_objective(c, c0), opts.solver, opts.backend)


def _commitments(model: ModelInstance, x: np.ndarray) -> np.ndarray:
    return np.rint(x[model.c_cols]).astype(np.int8)


def ph_initialize(models: list[ModelInstance], probabilities: np.ndarray, kappa: np.ndarray,
                  opts: PhOptions) -> PhState:
    t0 = time.perf_counter()
    results = _map(lambda m: _check(_solve_scenario(m, m.program.c, 0.0, opts), "scenario subproblem"),
                   models, opts.workers)
    c = np.stack([_commitments(m, r.x) for m, r in zip(models, results)])
    cbar = np.tensordot(probabilities, c, axes=1)
    rho = kappa[None] * (c - cbar[None])
    state = PhState(0, rho, c, cbar, cbar.copy(), inconsistency(cbar, opts.binary_tol),
                    solutions=[r.x for r in results])
    state.trace.append(TraceRow(0, state.ind, tuple(m.program.objective(r.x)
                                                    for m, r in zip(models, results)), cbar.copy()))
    state.wall.append(time.perf_counter() - t0)
    return state


def ph_iteration(state: PhState, models: list[ModelInstance], probabilities: np.ndarray,
                 kappa: np.ndarray, opts: PhOptions) -> PhState:
    t0 = time.perf_counter()

    def run(k: int) -> SolveResult:
        m = models[k]
        c, c0 = penalized_objective(m.program.c, m.c_cols, state.rho[k], state.cbar, kappa)
        return _check(_solve_scenario(m, c, c0, opts), f"scenario {k} subproblem")

    results = _map(run, range(len(models)), opts.workers)
    c = np.stack([_commitments(m, r.x) for m, r in zip(models, results)])
    cbar = np.tensordot(probabilities, c, axes=1)
    ref = state.cbar if opts.rho_update == "previous" else cbar
    rho = state.rho + kappa[None] * (c - ref[None])
    drift = np.tensordot(probabilities, rho, axes=1)
    expected = kappa * (cbar - state.cbar0) if opts.rho_update == "previous" else 0.0
    if not np.allclose(drift, expected, rtol=0.0, atol=1e-9 * max(1.0, float(kappa.max()))):
        raise HedgingError("multiplier average drifted from its expected value")
    new = PhState(state.iteration + 1, rho, c, cbar, state.cbar0,
                  inconsistency(cbar, opts.binary_tol), state.trace, state.wall,
                  [r.x for r in results])
    new.trace.append(TraceRow(new.iteration, new.ind, tuple(m.program.objective(r.x)
                                                          for m, r in zip(models, results)),
                              cbar.copy()))
    new.wall.append(time.perf_counter() - t0)
    return new


def check_termination(state: PhState, opts: PhOptions) -> str:
    """``"terminate"`` once Ind <= epsilon, ``"limit"`` at the iteration cap, else ``"continue"``."""
    if state.ind <= opts.epsilon:
        return "terminate"
    if state.iteration >= opts.max_iter:
        return "limit"
    return "continue"


def evaluate_fixed_uc(schedule: np.ndarray, models: list[ModelInstance],
                      probabilities: np.ndarray, opts: PhOptions) -> FixedEvaluation:
    """Dispatch every scenario with the commitment fixed; probability-weighted totals."""
    schedule = np.asarray(schedule)
    if not np.all(np.isin(schedule, (0, 1))):
        raise ValueError("commitment schedule must be binary")

    def run(m: ModelInstance) -> SolveResult:
        lb, ub = m.program.lb.copy(), m.program.ub.copy()
        lb[m.c_cols] = schedule
        ub[m.c_cols] = schedule
        res = solve(m.program.with_bounds(lb, ub), opts.solver, opts.backend)
        if res.status != "optimal":
            raise HedgingError(f"dispatch at fixed commitment is {res.status}")
        return res

    results = _map(run, models, opts.workers)
    breakdown = {g: 0.0 for g in COST_GROUPS}
    for p, m, r in zip(probabilities, models, results):
        for g, v in m.cost_breakdown(r.x).items():
            breakdown[g] += p * v
    cost = breakdown["generation"] + breakdown["gas"] + breakdown["unserved"]
    return FixedEvaluation(schedule.astype(np.int8), cost + breakdown["penalty"], cost,
                           breakdown, [r.x for r in results])


def mph_enumerate(state: PhState, models: list[ModelInstance], probabilities: np.ndarray,
                  opts: PhOptions) -> tuple[FixedEvaluation, int]:
    """Fix agreed commitments, try all 2^Ind completions, keep the cheapest.

    Ties go to the lexicographically smallest completion. Returns the winner and
    the number of cases solved.
    """
    if state.ind > 2:
        raise HedgingError(f"enumeration needs Ind <= 2, got {state.ind}")
    base = np.rint(state.cbar).astype(np.int8)
    loose = [tuple(ix) for ix in np.argwhere(np.minimum(state.cbar, 1 - state.cbar) > opts.binary_tol)]
    best: FixedEvaluation | None = None
    failures = []
    cases = 0
    for bits in itertools.product((0, 1), repeat=len(loose)):
        sched = base.copy()
        for (i, t), b in zip(loose, bits):
            sched[i, t] = b
        cases += 1
        try:
            ev = evaluate_fixed_uc(sched, models, probabilities, opts)
        except HedgingError as exc:
            failures.append(f"{bits}: {exc}")
            continue
        if best is None or ev.objective < best.objective - 1e-12 * abs(best.objective):
            best = ev
    if best is None:
        raise HedgingError("every enumeration case failed: " + "; ".join(failures))
    return best, cases


# -- assembling results ---------------------------------------------------------

def _stack_dispatch(models: list[ModelInstance], xs: list[np.ndarray]) -> dict[str, np.ndarray]:
    return {f: np.concatenate([m.values(x, f) for m, x in zip(models, xs)], axis=2)
            for f in SCENARIO_FAMILIES}


def _stack_audit(models: list[ModelInstance], xs: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([audit_relaxation(m, x).residuals for m, x in zip(models, xs)], axis=2)


def _from_fixed(method: str, status: str, ev: FixedEvaluation, models, probabilities,
                **extra) -> HedgingResult:
    return HedgingResult(method, status, ev.schedule, ev.expected_cost, ev.objective,
                         ev.breakdown, _stack_dispatch(models, ev.solutions),
                         _stack_audit(models, ev.solutions), np.asarray(probabilities), **extra)


def _status(res: SolveResult) -> str:
    return res.status if res.status in ("optimal", "limit", "infeasible") else "infeasible"


def solve_extensive(net: IesNetwork, scenarios: ScenarioSet, opts: PhOptions | None = None,
                    gamma: float | None = None, directions: np.ndarray | None = None,
                    terminal_linepack: str = "eq") -> HedgingResult:
    """Joint program over all scenarios with one shared commitment."""
    opts = opts or PhOptions()
    t0 = time.perf_counter()
    model = build_model(net, scenarios, directions, gamma, terminal_linepack)
    t1 = time.perf_counter()
    res = solve(model.program, opts.solver, opts.backend)
    t2 = time.perf_counter()
    timings = {"formulation": t1 - t0, "solve": t2 - t1}
    if res.x is None:
        G, T, K = len(net.generators), net.horizon, len(scenarios)
        return HedgingResult("extensive", _status(res), np.zeros((G, T), np.int8), np.nan, np.nan,
                             {g: np.nan for g in COST_GROUPS}, {}, np.zeros((0, T, K)),
                             scenarios.probabilities, timings=timings)
    x = res.x
    bd = model.cost_breakdown(x)
    return HedgingResult(
        "extensive", _status(res), _commitments(model, x), model.expected_cost(x),
        model.expected_cost(x) + bd["penalty"], bd,
        {f: model.values(x, f) for f in SCENARIO_FAMILIES},
        audit_relaxation(model, x).residuals, scenarios.probabilities, timings=timings)


def solve_deterministic(net: IesNetwork, scenarios: ScenarioSet, opts: PhOptions | None = None,
                        gamma: float | None = None, reference: ScenarioSet | None = None,
                        terminal_linepack: str = "eq") -> HedgingResult:
    """Commit on the reference curve (default: probability-weighted mean wind), then dispatch."""
    opts = opts or PhOptions()
    reference = scenarios.mean() if reference is None else reference
    t0 = time.perf_counter()
    ref_model = build_model(net, reference, None, gamma, terminal_linepack)
    models = scenario_models(net, scenarios, None, gamma, terminal_linepack)
    t1 = time.perf_counter()
    res = solve(ref_model.program, opts.solver, opts.backend)
    if res.x is None:
        raise HedgingError(f"reference-scenario commitment is {res.status}")
    ev = evaluate_fixed_uc(_commitments(ref_model, res.x), models, scenarios.probabilities, opts)
    t2 = time.perf_counter()
    return _from_fixed("deterministic", _status(res), ev, models, scenarios.probabilities,
                       timings={"formulation": t1 - t0, "solve": t2 - t1})


def run_progressive_hedging(net: IesNetwork, scenarios: ScenarioSet,
                            opts: PhOptions | None = None, gamma: float | None = None,
                            directions: np.ndarray | None = None,
                            terminal_linepack: str = "eq") -> HedgingResult:
    """Scenario decomposition; ``opts.epsilon = 0`` is plain PH, 1 or 2 adds enumeration."""
    opts = opts or PhOptions()
    t0 = time.perf_counter()
    models = scenario_models(net, scenarios, directions, gamma, terminal_linepack)
    kappa = kappa_matrix(net, opts.kappa_coeff)
    probs = scenarios.probabilities
    t1 = time.perf_counter()
    state = ph_initialize(models, probs, kappa, opts)
    verdict = check_termination(state, opts)
    while verdict == "continue":
        state = ph_iteration(state, models, probs, kappa, opts)
        verdict = check_termination(state, opts)
    method = "mph" if opts.epsilon else "tph"
    if verdict == "terminate" and state.ind > 0:
        ev, cases = mph_enumerate(state, models, probs, opts)
        status = "optimal"
    else:
        # consensus (or best effort at the iteration cap): round the average
        ev = evaluate_fixed_uc(np.rint(state.cbar).astype(np.int8), models, probs, opts)
        cases = 1 if opts.epsilon else 0
        status = "optimal" if verdict == "terminate" else "limit"
    t2 = time.perf_counter()
    return _from_fixed(method, status, ev, models, probs, trace=state.trace,
                       iterations=state.iteration, ind=state.ind, cases=cases,
                       timings={"formulation": t1 - t0, "solve": t2 - t1,
                                "iterations": float(sum(state.wall))})


def write_trace(trace: list[TraceRow], path: str | Path, generators: Sequence[str] = ()) -> None:
    """Columnar convergence trace: iteration, Ind, per-scenario objective, averaged commitments."""
    if not trace:
        Path(path).write_text("iteration ind\n")
        return
    K = len(trace[0].objectives)
    G, T = trace[0].cbar.shape
    gens = list(generators) or [f"g{i}" for i in range(G)]
    head = ["iteration", "ind"] + [f"obj_sc{k}" for k in range(K)]
    head += [f"cbar[{gens[i]},{t + 1}]" for i in range(G) for t in range(T)]
    lines = [" ".join(head)]
    for row in trace:
        vals = [str(row.iteration), str(row.ind)] + [repr(float(v)) for v in row.objectives]
        vals += [repr(float(v)) for v in row.cbar.ravel()]
        lines.append(" ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")
