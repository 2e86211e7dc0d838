"""Stochastic unit-commitment model of the coupled power + gas system.

The model is assembled into a :class:`~iesuc.solver.ConicProgram`:

* power side: commitment ``c`` (binary, shared by all scenarios), output
  above minimum ``pdf`` (so ``pd = c * P_min + pdf``), DC flows, angles,
  non-served power and wind curtailment;
* gas side: wells, storages, compressors (pressure coupling plus a
  lossless flow ``gc``), nodal pressures and pipeline linepack;
* each pipeline, period and scenario gets the relaxed Weymouth cone along
  the chosen flow direction, a linear companion cut and a pressure-drop
  penalty in the objective.

Row tags name the constraint family each row encodes (``eq2`` ... ``eq23``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .network import IesNetwork, compute_cont, initial_linepack, linepack_coefficient
from .scenarios import ScenarioSet
from .solver import Affine, ConicProgram, SocConstraint, solve_lp

EQUATION_TAGS = frozenset(
    {"eq2", "eq3", "eq4", "eq6", "eq10", "eq11", "eq12", "eq13", "eq14", "eq15", "eq17",
     "eq18", "eq23"})

# family -> entity collection on the network (None: scenario-free commitment)
_FAMILIES = (
    ("c", "generators"), ("pdf", "generators"), ("pg", "wells"), ("np", "buses"),
    ("ng", "gas_nodes"), ("sto", "storages"), ("sti", "storages"), ("sl", "storages"),
    ("wc", "wind_farms"), ("pf", "branches"), ("theta", "buses"), ("pi", "gas_nodes"),
    ("pibar", "pipelines"), ("m", "pipelines"), ("gfo", "pipelines"), ("gfi", "pipelines"),
    ("gf", "pipelines"), ("gc", "compressors"),
)

COST_GROUPS = ("generation", "gas", "unserved", "penalty")


class ModelError(ValueError):
    pass


class InfeasibleModelError(ModelError):
    """The instance has no feasible point even with commitments relaxed."""


@dataclass
class DecisionCatalog:
    """Column index of every decision variable.

    ``index["c"]`` has shape ``(G, T)``; every other family has shape
    ``(entities, T, scenarios)``.
    """

    index: dict[str, np.ndarray]
    names: list[str]

    @property
    def size(self) -> int:
        return len(self.names)

    def __getitem__(self, family: str) -> np.ndarray:
        return self.index[family]


def build_catalog(net: IesNetwork, n_sc: int) -> DecisionCatalog:
    T = net.horizon
    index: dict[str, np.ndarray] = {}
    names: list[str] = []
    for fam, coll in _FAMILIES:
        ents = getattr(net, coll)
        shape = (len(ents), T) if fam == "c" else (len(ents), T, n_sc)
        start = len(names)
        cols = np.arange(start, start + int(np.prod(shape)), dtype=int).reshape(shape)
        index[fam] = cols
        for pos in np.ndindex(*shape):
            ent = ents[pos[0]]
            eid = getattr(ent, "id", "") or _edge_id(ent)
            rest = ",".join(str(p + 1) if k == 0 else str(p) for k, p in enumerate(pos[1:]))
            names.append(f"{fam}[{eid},{rest}]")
    return DecisionCatalog(index, names)


def _edge_id(ent) -> str:
    for a, b in (("a", "b"), ("c", "d"), ("q", "j")):
        if hasattr(ent, a):
            return f"{getattr(ent, a)}-{getattr(ent, b)}"
    return "?"


def default_gamma(net: IesNetwork) -> float:
    """Pressure-drop penalty weight: 1e-3 x mean well production cost."""
    if not net.wells:
        return 0.0
    return 1e-3 * float(np.mean([w.C_PG for w in net.wells]))


def _islands(net: IesNetwork) -> list[int]:
    """Index of one reference bus per connected component of the power graph."""
    parent = list(range(len(net.buses)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for br in net.branches:
        ra, rb = find(net.bus_index(br.a)), find(net.bus_index(br.b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return sorted({find(k) for k in range(len(net.buses))})


@dataclass
class ModelInstance:
    """A built program plus everything needed to interpret its solutions."""

    net: IesNetwork
    scenarios: ScenarioSet
    catalog: DecisionCatalog
    program: ConicProgram
    costs: dict[str, np.ndarray]
    directions: np.ndarray | None
    gamma: float
    terminal_linepack: str
    weymouth: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def c_cols(self) -> np.ndarray:
        return self.catalog["c"]

    def values(self, x: np.ndarray, family: str) -> np.ndarray:
        return x[self.catalog[family]]

    def cost_breakdown(self, x: np.ndarray) -> dict[str, float]:
        return {g: float(self.costs[g] @ x) for g in COST_GROUPS}

    def expected_cost(self, x: np.ndarray) -> float:
        """Expected operating cost (generation + gas + non-served/curtailment), no penalty."""
        b = self.cost_breakdown(x)
        return b["generation"] + b["gas"] + b["unserved"]

    def power_output(self, x: np.ndarray) -> np.ndarray:
        """``pd[i, t, sc] = c[i, t] * P_min + pdf[i, t, sc]``."""
        pmin = np.array([g.P_min for g in self.net.generators])
        return pmin[:, None, None] * x[self.c_cols][:, :, None] + x[self.catalog["pdf"]]


class ModelBuilder:
    """Accumulates columns, rows and cones for one network + scenario set."""

    def __init__(self, net: IesNetwork, scenarios: ScenarioSet):
        scenarios.check_against(net)
        self.net = net
        self.sc = scenarios
        self.T = net.horizon
        self.K = len(scenarios)
        self.cat = build_catalog(net, self.K)
        n = self.cat.size
        self.lb = np.full(n, -np.inf)
        self.ub = np.full(n, np.inf)
        self.integer = np.zeros(n, dtype=bool)
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self.row_tags: list[str] = []
        self.cones: list[SocConstraint] = []
        self.costs = {g: np.zeros(n) for g in COST_GROUPS}
        self.directions: np.ndarray | None = None
        self._set_bounds()

    # -- helpers -------------------------------------------------------------

    def add_row(self, tag: str, terms: dict[int, float], lo: float, hi: float) -> None:
        r = len(self.row_lo)
        for col, val in terms.items():
            if val != 0.0:
                self._rows.append(r)
                self._cols.append(int(col))
                self._vals.append(float(val))
        self.row_lo.append(lo)
        self.row_hi.append(hi)
        self.row_tags.append(tag)

    def rows_tagged(self, tag: str) -> int:
        return sum(1 for t in self.row_tags if t == tag)

    def _pd_terms(self, i: int, t: int, sc: int, scale: float = 1.0) -> dict[int, float]:
        g = self.net.generators[i]
        return {self.cat["c"][i, t]: scale * g.P_min, self.cat["pdf"][i, t, sc]: scale}

    def _set_bounds(self) -> None:
        net, cat, lb, ub = self.net, self.cat, self.lb, self.ub
        lb[cat["c"]] = 0.0
        ub[cat["c"]] = 1.0
        self.integer[cat["c"].ravel()] = True
        lb[cat["pdf"]] = 0.0
        for i, g in enumerate(net.generators):
            ub[cat["pdf"][i]] = g.P_max - g.P_min
        for k, w in enumerate(net.wells):  # production limits
            lb[cat["pg"][k]] = w.W_min
            ub[cat["pg"][k]] = w.W_max
        lb[cat["np"]] = 0.0
        lb[cat["ng"]] = 0.0
        for k, s in enumerate(net.storages):  # level, withdrawal and injection limits
            lb[cat["sl"][k]] = s.S_min
            ub[cat["sl"][k]] = s.S_max
            lb[cat["sto"][k]] = 0.0
            ub[cat["sto"][k]] = s.WR_max
            lb[cat["sti"][k]] = 0.0
            ub[cat["sti"][k]] = s.IS_max
        for k in range(len(net.wind_farms)):
            lb[cat["wc"][k]] = 0.0
            ub[cat["wc"][k]] = self.sc.wind[:, k, :].T
        for k, br in enumerate(net.branches):  # thermal limits
            lb[cat["pf"][k]] = -br.PF
            ub[cat["pf"][k]] = br.PF
        for ref in _islands(net):
            lb[cat["theta"][ref]] = 0.0
            ub[cat["theta"][ref]] = 0.0
        for k, nd in enumerate(net.gas_nodes):  # pressure limits
            lb[cat["pi"][k]] = nd.Pi_min
            ub[cat["pi"][k]] = nd.Pi_max
        lb[cat["gc"]] = 0.0
        lb[cat["m"]] = 0.0

    # -- objective -----------------------------------------------------------

    def build_objective(self, gamma: float) -> None:
        """Probability-weighted cost with ``pd`` substituted and the pressure-drop penalty."""
        net, cat, prob = self.net, self.cat, self.sc.probabilities
        gen, gas, uns, pen = (self.costs[g] for g in COST_GROUPS)
        for g in COST_GROUPS:
            self.costs[g][:] = 0.0
        for i, g in enumerate(net.generators):
            gen[cat["c"][i]] = g.C_PD * g.P_min * prob.sum()
            gen[cat["pdf"][i]] = g.C_PD * prob
        for k, w in enumerate(net.wells):
            gas[cat["pg"][k]] = w.C_PG * prob
        for k, s in enumerate(net.storages):
            gas[cat["sto"][k]] = s.C_S * prob
        for k, b in enumerate(net.buses):
            uns[cat["np"][k]] = b.C_NP * prob
        for k, nd in enumerate(net.gas_nodes):
            uns[cat["ng"][k]] = nd.C_NG * prob
        for k, w in enumerate(net.wind_farms):
            uns[cat["wc"][k]] = w.C_WC * prob
        if gamma:
            if self.directions is None:
                raise ModelError("pressure penalty needs a flow direction map")
            for k, p in enumerate(net.pipelines):
                ci, di = net.node_index(p.c), net.node_index(p.d)
                for t in range(self.T):
                    for s in range(self.K):
                        w = gamma * prob[s] * self.directions[k, t, s]
                        pen[cat["pi"][ci, t, s]] += w
                        pen[cat["pi"][di, t, s]] -= w

    # -- power ---------------------------------------------------------------

    def add_power_constraints(self) -> None:
        net, cat, T, K = self.net, self.cat, self.T, self.K
        for i, g in enumerate(net.generators):
            for s in range(K):
                for t in range(T):
                    # capacity upper side; lower side is the pdf >= 0 bound
                    self.add_row("eq2", {cat["pdf"][i, t, s]: 1.0,
                                         cat["c"][i, t]: -(g.P_max - g.P_min)}, -math.inf, 0.0)
                for t in range(T):
                    terms = self._pd_terms(i, t, s)
                    shift = 0.0
                    if t == 0:
                        shift = g.initial_output
                    else:
                        for col, v in self._pd_terms(i, t - 1, s, -1.0).items():
                            terms[col] = terms.get(col, 0.0) + v
                    self.add_row("eq3", terms, shift - g.RD, shift + g.RU)
        for k, br in enumerate(net.branches):
            a, b = net.bus_index(br.a), net.bus_index(br.b)
            for t in range(T):
                for s in range(K):
                    self.add_row("eq4", {cat["pf"][k, t, s]: 1.0,
                                         cat["theta"][a, t, s]: -1.0 / br.X,
                                         cat["theta"][b, t, s]: 1.0 / br.X}, 0.0, 0.0)
        wind = self.sc.wind
        for l, bus in enumerate(net.buses):
            gens = [i for i, g in enumerate(net.generators) if g.bus == bus.id]
            farms = [w for w, f in enumerate(net.wind_farms) if f.bus == bus.id]
            inflow = [k for k, br in enumerate(net.branches) if br.b == bus.id]
            outflow = [k for k, br in enumerate(net.branches) if br.a == bus.id]
            for t in range(T):
                for s in range(K):
                    terms: dict[int, float] = {cat["np"][l, t, s]: 1.0}
                    for i in gens:
                        for col, v in self._pd_terms(i, t, s).items():
                            terms[col] = terms.get(col, 0.0) + v
                    for w in farms:
                        terms[cat["wc"][w, t, s]] = -1.0
                    for k in inflow:
                        terms[cat["pf"][k, t, s]] = terms.get(cat["pf"][k, t, s], 0.0) + 1.0
                    for k in outflow:
                        terms[cat["pf"][k, t, s]] = terms.get(cat["pf"][k, t, s], 0.0) - 1.0
                    rhs = bus.L_P[t] - sum(wind[s, w, t] for w in farms)
                    self.add_row("eq6", terms, rhs, rhs)

    # -- gas -----------------------------------------------------------------

    def add_gas_constraints(self) -> None:
        net, cat, T, K = self.net, self.cat, self.T, self.K
        for k, st in enumerate(net.storages):
            for t in range(T):
                for s in range(K):
                    terms = {cat["sl"][k, t, s]: 1.0, cat["sto"][k, t, s]: 1.0,
                             cat["sti"][k, t, s]: -1.0}
                    rhs = st.sl0 if t == 0 else 0.0
                    if t:
                        terms[cat["sl"][k, t - 1, s]] = -1.0
                    self.add_row("eq10", terms, rhs, rhs)
        for k, cm in enumerate(net.compressors):
            q, j = net.node_index(cm.q), net.node_index(cm.j)
            for t in range(T):
                for s in range(K):
                    self.add_row("eq11", {cat["pi"][j, t, s]: 1.0, cat["pi"][q, t, s]: -1.0},
                                 0.0, math.inf)
                    self.add_row("eq11", {cat["pi"][j, t, s]: 1.0, cat["pi"][q, t, s]: -cm.CM},
                                 -math.inf, 0.0)
        for g in net.gas_generators:
            if g.gas_node is None:
                raise ModelError(f"gas-fired generator {g.id} has no gas node")
        for n, nd in enumerate(net.gas_nodes):
            arrive = [k for k, p in enumerate(net.pipelines) if p.d == nd.id]
            leave = [k for k, p in enumerate(net.pipelines) if p.c == nd.id]
            stores = [k for k, st in enumerate(net.storages) if st.node == nd.id]
            wells = [k for k, w in enumerate(net.wells) if w.node == nd.id]
            burners = [i for i, g in enumerate(net.generators)
                       if g.kind == "gas" and g.gas_node == nd.id]
            comp_in = [k for k, c in enumerate(net.compressors) if c.j == nd.id]
            comp_out = [k for k, c in enumerate(net.compressors) if c.q == nd.id]
            for t in range(T):
                for s in range(K):
                    terms: dict[int, float] = {cat["ng"][n, t, s]: 1.0}

                    def acc(col, v):
                        terms[col] = terms.get(col, 0.0) + v

                    for k in arrive:
                        acc(cat["gfo"][k, t, s], 1.0)
                    for k in leave:
                        acc(cat["gfi"][k, t, s], -1.0)
                    for k in stores:
                        acc(cat["sto"][k, t, s], 1.0)
                        acc(cat["sti"][k, t, s], -1.0)
                    for k in wells:
                        acc(cat["pg"][k, t, s], 1.0)
                    for i in burners:
                        for col, v in self._pd_terms(i, t, s, -net.generators[i].GTP).items():
                            acc(col, v)
                    for k in comp_in:
                        acc(cat["gc"][k, t, s], 1.0)
                    for k in comp_out:
                        acc(cat["gc"][k, t, s], -1.0)
                    self.add_row("eq17", terms, nd.L_G[t], nd.L_G[t])

    def add_linepack_constraints(self, terminal: str = "eq") -> None:
        if terminal not in ("eq", "geq"):
            raise ModelError(f"terminal linepack sense must be 'eq' or 'geq', not {terminal!r}")
        net, cat, T, K = self.net, self.cat, self.T, self.K
        m0 = [initial_linepack(net, p) for p in net.pipelines]
        for k, p in enumerate(net.pipelines):
            ci, di = net.node_index(p.c), net.node_index(p.d)
            coef = linepack_coefficient(p, net.constants)
            for t in range(T):
                for s in range(K):
                    self.add_row("eq12", {cat["pibar"][k, t, s]: 1.0, cat["pi"][ci, t, s]: -0.5,
                                          cat["pi"][di, t, s]: -0.5}, 0.0, 0.0)
                    self.add_row("eq12", {cat["m"][k, t, s]: 1.0, cat["pibar"][k, t, s]: -coef},
                                 0.0, 0.0)
                    terms = {cat["m"][k, t, s]: 1.0, cat["gfi"][k, t, s]: -1.0,
                             cat["gfo"][k, t, s]: 1.0}
                    rhs = m0[k] if t == 0 else 0.0
                    if t:
                        terms[cat["m"][k, t - 1, s]] = -1.0
                    self.add_row("eq13", terms, rhs, rhs)
                    self.add_row("eq14", {cat["gf"][k, t, s]: 1.0, cat["gfo"][k, t, s]: -0.5,
                                          cat["gfi"][k, t, s]: -0.5}, 0.0, 0.0)
        if net.pipelines:
            total0 = float(sum(m0))
            for s in range(K):
                terms = {cat["m"][k, T - 1, s]: 1.0 for k in range(len(net.pipelines))}
                self.add_row("eq18", terms, total0, total0 if terminal == "eq" else math.inf)

    # -- Weymouth relaxation ----------------------------------------------------

    def relax_weymouth(self, directions: np.ndarray) -> None:
        net, cat, T, K = self.net, self.cat, self.T, self.K
        directions = np.asarray(directions)
        if directions.shape != (len(net.pipelines), T, K):
            raise ModelError(f"direction map has shape {directions.shape}, "
                             f"expected {(len(net.pipelines), T, K)}")
        self.directions = directions
        for k, p in enumerate(net.pipelines):
            ci, di = net.node_index(p.c), net.node_index(p.d)
            K_ = compute_cont(p, net.constants)
            for t in range(T):
                for s in range(K):
                    gf = cat["gf"][k, t, s]
                    pc, pd = cat["pi"][ci, t, s], cat["pi"][di, t, s]
                    up, down = (pc, pd) if directions[k, t, s] > 0 else (pd, pc)
                    self.cones.append(SocConstraint(
                        Affine.of({up: K_}),
                        (Affine.of({gf: 1.0}), Affine.of({down: K_})),
                        tag=f"eq15:{k},{t},{s}"))
                    terms = {gf: 1.0, pc: -K_, pd: K_}
                    if directions[k, t, s] > 0:
                        self.add_row("eq23", terms, 0.0, math.inf)
                    else:
                        self.add_row("eq23", terms, -math.inf, 0.0)

    # -- assembly ----------------------------------------------------------------

    def finish(self, gamma: float, terminal: str, weymouth: bool,
               relax_integrality: bool = False) -> ModelInstance:
        n = self.cat.size
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(len(self.row_lo), n))
        c = sum(self.costs[g] for g in COST_GROUPS)
        integer = np.zeros(n, dtype=bool) if relax_integrality else self.integer
        prog = ConicProgram(c, A, np.array(self.row_lo), np.array(self.row_hi), self.lb.copy(),
                            self.ub.copy(), integer, list(self.cones), 0.0,
                            list(self.row_tags), self.cat.names)
        return ModelInstance(self.net, self.sc, self.cat, prog,
                             {g: v.copy() for g, v in self.costs.items()},
                             self.directions, gamma, terminal, weymouth)


def build_model(net: IesNetwork, scenarios: ScenarioSet, directions: np.ndarray | None = None,
                gamma: float | None = None, terminal_linepack: str = "eq",
                weymouth: bool = True) -> ModelInstance:
    """Full model. Without ``directions`` the flow direction map is computed first."""
    gamma = default_gamma(net) if gamma is None else gamma
    if weymouth and directions is None and net.pipelines:
        directions = determine_flow_directions(net, scenarios, terminal_linepack)
    b = ModelBuilder(net, scenarios)
    b.add_power_constraints()
    b.add_gas_constraints()
    b.add_linepack_constraints(terminal_linepack)
    if weymouth:
        b.relax_weymouth(directions if directions is not None
                         else np.ones((0, net.horizon, len(scenarios))))
    b.build_objective(gamma if weymouth else 0.0)
    return b.finish(gamma if weymouth else 0.0, terminal_linepack, weymouth,
                    relax_integrality=not weymouth)


def determine_flow_directions(net: IesNetwork, scenarios: ScenarioSet,
                              terminal_linepack: str = "eq") -> np.ndarray:
    """Flow sign per (pipeline, period, scenario) from the Weymouth-free LP relaxation.

    Flows with ``|gf| < 1e-6`` default to ``+1``.
    """
    model = build_model(net, scenarios, gamma=0.0, terminal_linepack=terminal_linepack,
                        weymouth=False)
    p = model.program
    res = solve_lp(p)
    if res.status != "optimal":
        raise InfeasibleModelError(f"direction relaxation is {res.status}: inconsistent network data")
    # Linepack lets flows shift between hours at equal cost, so the optimum is
    # rarely unique. Among optimal points take the one with least total
    # |gf|, which keeps tiny spurious reversals out of the map.
    gf_cols = model.catalog["gf"].ravel()
    k = gf_cols.size
    n = p.n
    rows = sp.vstack([
        sp.hstack([p.A, sp.csr_matrix((p.m, k))]),
        sp.hstack([sp.csr_matrix(p.c), sp.csr_matrix((1, k))]),
        sp.hstack([sp.csr_matrix((np.ones(k), (np.arange(k), gf_cols)), shape=(k, n)),
                   sp.identity(k)]),
        sp.hstack([sp.csr_matrix((-np.ones(k), (np.arange(k), gf_cols)), shape=(k, n)),
                   sp.identity(k)]),
    ], format="csr")
    slack = 1e-9 * max(1.0, abs(res.objective))
    lo = np.concatenate([p.row_lo, [-np.inf], np.zeros(2 * k)])
    hi = np.concatenate([p.row_hi, [res.objective + slack], np.full(2 * k, np.inf)])
    second = ConicProgram(np.concatenate([np.zeros(n), np.ones(k)]), rows, lo, hi,
                          np.concatenate([p.lb, np.zeros(k)]),
                          np.concatenate([p.ub, np.full(k, np.inf)]), np.zeros(n + k, bool))
    res2 = solve_lp(second)
    x = res2.x[:n] if res2.status == "optimal" else res.x
    gf = model.values(x, "gf")
    return np.where(gf < -1e-6, -1, 1).astype(np.int8)


@dataclass
class RelaxationAudit:
    residuals: np.ndarray  # (pipelines, T, scenarios)

    @property
    def max(self) -> float:
        return float(self.residuals.max(initial=0.0))

    @property
    def mean(self) -> float:
        return float(self.residuals.mean()) if self.residuals.size else 0.0


def weymouth_residual(gf: float, pi_c: float, pi_d: float, cont: float, pi_max: float,
                      eps: float = 1e-12) -> float:
    """``|gf|gf| - CONT^2 (pi_c^2 - pi_d^2)| / max(CONT^2 pi_max^2, eps)``."""
    return abs(gf * abs(gf) - cont**2 * (pi_c**2 - pi_d**2)) / max(cont**2 * pi_max**2, eps)


def audit_relaxation(model: ModelInstance, x: np.ndarray) -> RelaxationAudit:
    net = model.net
    gf = model.values(x, "gf")
    pi = model.values(x, "pi")
    out = np.zeros(gf.shape)
    for k, p in enumerate(net.pipelines):
        ci, di = net.node_index(p.c), net.node_index(p.d)
        cont = compute_cont(p, net.constants)
        pmax = max(net.gas_nodes[ci].Pi_max, net.gas_nodes[di].Pi_max)
        for t, s in np.ndindex(*gf.shape[1:]):
            out[k, t, s] = weymouth_residual(gf[k, t, s], pi[ci, t, s], pi[di, t, s], cont, pmax)
    return RelaxationAudit(out)


def power_balance_residuals(model: ModelInstance, x: np.ndarray) -> np.ndarray:
    """Signed bus balance residual ``supply - demand`` per (bus, t, scenario), GW."""
    net, sc = model.net, model.scenarios
    pd = model.power_output(x)
    np_ = model.values(x, "np")
    wc = model.values(x, "wc")
    pf = model.values(x, "pf")
    res = np_.copy()
    for l, bus in enumerate(net.buses):
        res[l] -= np.asarray(bus.L_P)[:, None]
        for i, g in enumerate(net.generators):
            if g.bus == bus.id:
                res[l] += pd[i]
        for w, f in enumerate(net.wind_farms):
            if f.bus == bus.id:
                res[l] += sc.wind[:, w, :].T - wc[w]
        for k, br in enumerate(net.branches):
            if br.b == bus.id:
                res[l] += pf[k]
            if br.a == bus.id:
                res[l] -= pf[k]
    return res


def gas_balance_residuals(model: ModelInstance, x: np.ndarray) -> np.ndarray:
    """Signed nodal gas balance residual per (node, t, scenario), MSm3/h."""
    net = model.net
    pd = model.power_output(x)
    v = {f: model.values(x, f) for f in ("ng", "gfo", "gfi", "sto", "sti", "pg", "gc")}
    res = v["ng"].copy()
    for n, nd in enumerate(net.gas_nodes):
        res[n] -= np.asarray(nd.L_G)[:, None]
        for k, p in enumerate(net.pipelines):
            if p.d == nd.id:
                res[n] += v["gfo"][k]
            if p.c == nd.id:
                res[n] -= v["gfi"][k]
        for k, st in enumerate(net.storages):
            if st.node == nd.id:
                res[n] += v["sto"][k] - v["sti"][k]
        for k, w in enumerate(net.wells):
            if w.node == nd.id:
                res[n] += v["pg"][k]
        for i, g in enumerate(net.generators):
            if g.kind == "gas" and g.gas_node == nd.id:
                res[n] -= g.GTP * pd[i]
        for k, c in enumerate(net.compressors):
            if c.j == nd.id:
                res[n] += v["gc"][k]
            if c.q == nd.id:
                res[n] -= v["gc"][k]
    return res
