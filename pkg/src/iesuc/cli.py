"""Command-line entry point: ``iesuc {generate-scenarios,solve,compare,validate}``.

Exit codes: 0 optimal, 2 infeasible, 3 limit reached, 4 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .hedging import (HedgingError, HedgingResult, PhOptions, run_progressive_hedging,
                      solve_deterministic, solve_extensive, write_trace)
from .model import InfeasibleModelError, ModelError, default_gamma
from .network import IesNetwork, NetworkError, ValidationError, compute_cont, load_network, validate
from .scenarios import (ArmaParams, ScenarioError, ScenarioSet, generate_scenarios, load_scenarios,
                        save_scenarios)
from .solver import SolverError, SolverOptions

EXIT_OK, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_CONFIG = 0, 2, 3, 4
METHODS = ("extensive", "deterministic", "tph", "mph")
WORKERS_ENV = "IESUC_WORKERS"


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    network: Path
    scenarios: Path
    method: str = "extensive"
    out: Path = Path("results")
    epsilon: int | None = None
    kappa: float = 1.0
    max_iter: int = 150
    binary_tol: float = 1e-4
    rho_update: str = "previous"
    gap: float = 1e-4
    time_limit: float = float("inf")
    node_limit: int = 100_000
    gamma: float | None = None
    terminal_linepack: str = "eq"
    backend: str = "embedded"
    workers: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}")
        if self.method == "tph":
            if self.epsilon not in (None, 0):
                raise ConfigError("method tph requires epsilon = 0")
            self.epsilon = 0
        elif self.method == "mph":
            self.epsilon = 2 if self.epsilon is None else self.epsilon
            if self.epsilon not in (1, 2):
                raise ConfigError("method mph requires epsilon 1 or 2")
        for label, path in (("network", self.network), ("scenarios", self.scenarios)):
            if not Path(path).is_file():
                raise ConfigError(f"{label} file not found: {path}")

    def resolve_workers(self, n_scenarios: int) -> int:
        """``IESUC_WORKERS`` overrides the flag; default is available cores capped at the scenario count."""
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if self.workers is not None:
            return max(1, self.workers)
        return max(1, min(os.cpu_count() or 1, n_scenarios))

    def ph_options(self, n_scenarios: int) -> PhOptions:
        solver = SolverOptions(gap=self.gap, time_limit=self.time_limit,
                               node_limit=self.node_limit)
        return PhOptions(kappa_coeff=self.kappa, epsilon=self.epsilon or 0,
                         max_iter=self.max_iter, binary_tol=self.binary_tol,
                         workers=self.resolve_workers(n_scenarios), rho_update=self.rho_update,
                         solver=solver, backend=self.backend)


# -- writers ---------------------------------------------------------------------

def _f(v: float) -> str:
    return repr(float(v))


def _table(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [" ".join(header)]
    lines += [" ".join(v if isinstance(v, str) else _f(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def instance_fingerprint(network: Path, scenarios: Path) -> str:
    h = hashlib.sha256()
    h.update(Path(network).read_bytes())
    h.update(b"\0")
    h.update(Path(scenarios).read_bytes())
    return h.hexdigest()[:16]


def write_schedule(res: HedgingResult, net: IesNetwork, path: Path) -> None:
    header = ["unit"] + [f"h{t + 1}" for t in range(net.horizon)]
    lines = [" ".join(header)]
    for g, row in zip(net.generators, res.schedule):
        lines.append(" ".join([g.id] + [str(int(v)) for v in row]))
    path.write_text("\n".join(lines) + "\n")


_DISPATCH = (("pd", "generators"), ("np", "buses"), ("wc", "wind_farms"), ("pf", "branches"),
             ("pg", "wells"), ("ng", "gas_nodes"), ("sto", "storages"), ("sti", "storages"),
             ("sl", "storages"), ("pi", "gas_nodes"), ("gf", "pipelines"), ("m", "pipelines"),
             ("gc", "compressors"))


def _entity_id(e) -> str:
    if getattr(e, "id", ""):
        return e.id
    for a, b in (("a", "b"), ("c", "d"), ("q", "j")):
        if hasattr(e, a):
            return f"{getattr(e, a)}-{getattr(e, b)}"
    return "?"


def write_dispatch(res: HedgingResult, net: IesNetwork, out: Path) -> None:
    """One wide table per scenario: hour by (quantity, entity)."""
    pmin = np.array([g.P_min for g in net.generators])
    pd = pmin[:, None, None] * res.schedule[:, :, None] + res.dispatch["pdf"]
    data = dict(res.dispatch, pd=pd)
    for s in range(len(res.probabilities)):
        header = ["hour"]
        cols = []
        for fam, coll in _DISPATCH:
            for k, ent in enumerate(getattr(net, coll)):
                header.append(f"{fam}[{_entity_id(ent)}]")
                cols.append(data[fam][k, :, s])
        rows = [[str(t + 1)] + [c[t] for c in cols] for t in range(net.horizon)]
        _table(out / f"dispatch_sc{s}.txt", header, rows)


def write_costs(res: HedgingResult, path: Path) -> None:
    b = res.breakdown
    nsp = res.non_served_power
    lines = [
        f"generation {_f(b['generation'])}",
        f"gas_supply {_f(b['gas'])}",
        f"non_served_and_curtailment {_f(b['unserved'])}",
        f"expected_cost {_f(res.expected_cost)}",
        f"pressure_penalty {_f(b['penalty'])}",
        f"objective {_f(res.objective)}",
        f"non_served_power_total {_f(float(res.probabilities @ nsp))}",
    ]
    lines += [f"non_served_power_sc{s} {_f(v)}" for s, v in enumerate(nsp)]
    lines += [f"non_served_gas_sc{s} {_f(v)}" for s, v in enumerate(res.non_served_gas)]
    path.write_text("\n".join(lines) + "\n")


def write_audit(res: HedgingResult, net: IesNetwork, path: Path) -> None:
    r = res.audit
    lines = [f"max_relative_residual {_f(r.max(initial=0.0))}",
             f"mean_relative_residual {_f(r.mean() if r.size else 0.0)}",
             "pipeline cont hour scenario residual"]
    for k, p in enumerate(net.pipelines):
        cont = compute_cont(p, net.constants)
        for t in range(r.shape[1]):
            for s in range(r.shape[2]):
                lines.append(f"{_entity_id(p)} {_f(cont)} {t + 1} {s} {_f(r[k, t, s])}")
    path.write_text("\n".join(lines) + "\n")


def write_summary(res: HedgingResult, cfg: RunConfig, net: IesNetwork, path: Path) -> None:
    doc = {
        "method": res.method,
        "status": res.status,
        "network": net.name,
        "instance": instance_fingerprint(cfg.network, cfg.scenarios),
        "scenarios": int(len(res.probabilities)),
        "expected_cost": float(res.expected_cost),
        "objective": float(res.objective),
        "iterations": int(res.iterations),
        "ind": int(res.ind),
        "enumeration_cases": int(res.cases),
        "epsilon": cfg.epsilon,
        "gamma": float(default_gamma(net) if cfg.gamma is None else cfg.gamma),
        "gap": cfg.gap,
        "constants": {k: float(v) for k, v in vars(net.constants).items()},
    }
    path.write_text(yaml.safe_dump(doc, sort_keys=False))


# -- commands --------------------------------------------------------------------

def _status_code(status: str) -> int:
    return {"optimal": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(status, EXIT_LIMIT)


def cmd_generate_scenarios(args) -> int:
    net = load_network(args.network)
    arma = ArmaParams(args.alpha, args.beta, args.sigma, args.seed)
    sset, _ = generate_scenarios(net, arma, args.paths, args.k, args.mode)
    save_scenarios(sset, args.out)
    print(f"k={len(sset)}  paths={args.paths}  seed={args.seed}  -> {args.out}")
    print("scenario probability " + " ".join(f"energy[{f}]" for f in sset.farms))
    for s, p in enumerate(sset.probabilities):
        energy = " ".join(f"{sset.wind[s, w].sum():.4f}" for w in range(len(sset.farms)))
        print(f"{s} {p:.6f} {energy}")
    return EXIT_OK


def run_method(cfg: RunConfig, net: IesNetwork, sset: ScenarioSet) -> HedgingResult:
    opts = cfg.ph_options(len(sset))
    kw = {"gamma": cfg.gamma, "terminal_linepack": cfg.terminal_linepack}
    if cfg.method == "extensive":
        return solve_extensive(net, sset, opts, **kw)
    if cfg.method == "deterministic":
        return solve_deterministic(net, sset, opts, **kw)
    return run_progressive_hedging(net, sset, opts, **kw)


def cmd_solve(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    net = load_network(cfg.network)
    sset = load_scenarios(cfg.scenarios)
    sset.check_against(net)
    res = run_method(cfg, net, sset)
    total = time.perf_counter() - t0
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_summary(res, cfg, net, out / "summary.yaml")
    if res.status in ("optimal", "limit") and np.isfinite(res.expected_cost):
        write_schedule(res, net, out / "schedule.txt")
        write_dispatch(res, net, out)
        write_costs(res, out / "costs.txt")
        write_audit(res, net, out / "audit.txt")
    if cfg.method in ("tph", "mph"):
        write_trace(res.trace, out / "trace.txt", [g.id for g in net.generators])
    timing = dict(res.timings, total=total)
    (out / "timing.txt").write_text("".join(f"{k} {_f(v)}\n" for k, v in timing.items()))
    print(f"{res.method}: status={res.status} expected_cost={res.expected_cost:.8f} "
          f"objective={res.objective:.8f} non_served={float(res.probabilities @ res.non_served_power):.6f} GWh"
          if res.dispatch else f"{res.method}: status={res.status}")
    return _status_code(res.status)


def _read_run(path: Path) -> dict:
    path = Path(path)
    try:
        summary = yaml.safe_load((path / "summary.yaml").read_text())
        timing = dict(line.split() for line in (path / "timing.txt").read_text().splitlines())
    except (OSError, yaml.YAMLError, ValueError) as exc:
        raise ConfigError(f"{path}: not a completed run ({exc})") from None
    summary["wall"] = float(timing.get("total", "nan"))
    summary["dir"] = str(path)
    return summary


def compare_runs(paths: list[Path]) -> list[list]:
    runs = [_read_run(p) for p in paths]
    if len(runs) < 2:
        raise ConfigError("compare needs at least two runs")
    if len({r["instance"] for r in runs}) > 1:
        raise ConfigError("runs belong to different instances")
    ref = next((r for r in runs if r["method"] == "extensive"), runs[0])
    rows = []
    for r in runs:
        gap = (r["objective"] - ref["objective"]) / abs(ref["objective"]) * 100.0
        rows.append([r["method"], r["wall"], r["expected_cost"], r["objective"], gap])
    return rows


def cmd_compare(args) -> int:
    rows = compare_runs(args.runs)
    header = ["method", "time_s", "expected_cost", "objective", "gap_pct"]
    text = [" ".join(header)]
    for m, t, c, o, g in rows:
        text.append(f"{m} {t:.3f} {c:.8f} {o:.8f} {round(g, 6) + 0.0:.6f}")
    out = "\n".join(text) + "\n"
    if args.out:
        Path(args.out).write_text(out)
    print(out, end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    net = load_network(args.network, check=False)
    report = validate(net)
    if args.scenarios and not report:
        try:
            load_scenarios(args.scenarios).check_against(net)
        except ScenarioError as exc:
            report.append(str(exc))
    for line in report:
        print(line)
    if not report:
        print(f"{net.name}: ok ({len(net.buses)} buses, {len(net.gas_nodes)} gas nodes, "
              f"{len(net.generators)} generators)")
    return EXIT_CONFIG if report else EXIT_OK


# -- parsing ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iesuc", description="Stochastic unit commitment for coupled power and gas systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate-scenarios", help="simulate wind errors and reduce to typical scenarios")
    g.add_argument("--network", required=True, type=Path)
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--alpha", type=float, default=0.8)
    g.add_argument("--beta", type=float, default=0.2)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--paths", type=int, default=1000)
    g.add_argument("--k", type=int, default=4)
    g.add_argument("--mode", choices=("independent", "shared"), default="independent")

    s = sub.add_parser("solve", help="solve the day-ahead commitment")
    s.add_argument("--config", type=Path, help="YAML file with any of the options below")
    s.add_argument("--network", type=Path)
    s.add_argument("--scenarios", type=Path)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--out", type=Path)
    s.add_argument("--epsilon", type=int)
    s.add_argument("--kappa", type=float, help="penalty coefficient (times unit commitment cost)")
    s.add_argument("--max-iter", type=int)
    s.add_argument("--binary-tol", type=float)
    s.add_argument("--rho-update", choices=("previous", "current"))
    s.add_argument("--gap", type=float)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--node-limit", type=int)
    s.add_argument("--gamma", type=float, help="pressure-drop penalty weight")
    s.add_argument("--terminal-linepack", choices=("eq", "geq"))
    s.add_argument("--backend")
    s.add_argument("--workers", type=int, help=f"worker threads (${WORKERS_ENV} takes precedence)")

    c = sub.add_parser("compare", help="tabulate completed runs of one instance")
    c.add_argument("runs", nargs="+", type=Path)
    c.add_argument("--out", type=Path)

    v = sub.add_parser("validate", help="check a network (and optionally a scenario file)")
    v.add_argument("--network", required=True, type=Path)
    v.add_argument("--scenarios", type=Path)
    return p


_SOLVE_KEYS = ("network", "scenarios", "method", "out", "epsilon", "kappa", "max_iter",
               "binary_tol", "rho_update", "gap", "time_limit", "node_limit", "gamma",
               "terminal_linepack", "backend", "workers")


def config_from_args(args) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            raw = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(raw) - set(_SOLVE_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        base = Path(args.config).parent
        for key in ("network", "scenarios", "out"):
            if key in raw:
                raw[key] = base / raw[key]
        values.update(raw)
    for key in _SOLVE_KEYS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    for key in ("network", "scenarios"):
        if key not in values:
            raise ConfigError(f"--{key} is required")
    return RunConfig(**values)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate-scenarios":
            return cmd_generate_scenarios(args)
        if args.command == "solve":
            return cmd_solve(config_from_args(args))
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_validate(args)
    except InfeasibleModelError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print("invalid network:\n  " + "\n  ".join(exc.report), file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, NetworkError, ScenarioError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HedgingError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
