"""Coupled power + gas network description, file I/O and validation.

Canonical units inside the package: GW, GWh, MSm3, MSm3/h, bar, m and
hourly periods. Files may declare ``units: {power: MW, length: km}``; values
are converted on load and always written back in canonical units.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

HORIZON = 24

# Pipeline geometric volume (m3 at standard conditions) to MSm3.
VOLUME_TO_MSM3 = 1e-6

_POWER_SCALE = {"GW": 1.0, "MW": 1e-3}
_LENGTH_SCALE = {"m": 1.0, "km": 1e3}


class NetworkError(ValueError):
    """Raised for malformed network files."""


class ValidationError(NetworkError):
    """Raised when a network violates its invariants.

    ``report`` holds one message per violation.
    """

    def __init__(self, report: list[str]):
        self.report = list(report)
        super().__init__("; ".join(report))


@dataclass(frozen=True)
class Generator:
    id: str
    kind: str  # "gas" or "coal"
    bus: str
    P_min: float
    P_max: float
    RU: float
    RD: float
    C_PD: float
    gas_node: str | None = None
    GTP: float = 0.0
    c0: int = 0
    pd0: float | None = None

    @property
    def initial_output(self) -> float:
        if self.pd0 is not None:
            return self.pd0
        return self.P_min if self.c0 else 0.0


@dataclass(frozen=True)
class Bus:
    id: str
    L_P: tuple[float, ...]
    C_NP: float


@dataclass(frozen=True)
class Branch:
    a: str
    b: str
    X: float
    PF: float
    id: str = ""


@dataclass(frozen=True)
class WindFarm:
    id: str
    bus: str
    capacity: float
    C_WC: float
    v_cut_in: float
    v_rated: float
    v_cut_out: float
    forecast: tuple[float, ...] = ()


@dataclass(frozen=True)
class GasNode:
    id: str
    Pi_min: float
    Pi_max: float
    C_NG: float
    L_G: tuple[float, ...]
    pi0: float


@dataclass(frozen=True)
class Pipeline:
    c: str
    d: str
    D: float
    L: float
    id: str = ""


@dataclass(frozen=True)
class Compressor:
    q: str
    j: str
    CM: float
    id: str = ""


@dataclass(frozen=True)
class GasWell:
    id: str
    node: str
    W_min: float
    W_max: float
    C_PG: float


@dataclass(frozen=True)
class GasStorage:
    id: str
    node: str
    S_min: float
    S_max: float
    WR_max: float
    IS_max: float
    C_S: float
    sl0: float


@dataclass(frozen=True)
class PhysicalConstants:
    rho: float
    F: float
    R: float
    T: float
    Z: float


@dataclass(frozen=True)
class IesNetwork:
    name: str
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    wind_farms: tuple[WindFarm, ...]
    gas_nodes: tuple[GasNode, ...]
    pipelines: tuple[Pipeline, ...]
    compressors: tuple[Compressor, ...]
    wells: tuple[GasWell, ...]
    storages: tuple[GasStorage, ...]
    constants: PhysicalConstants
    horizon: int = HORIZON
    _bus_index: dict = field(init=False, repr=False, compare=False)
    _node_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_bus_index", {b.id: k for k, b in enumerate(self.buses)})
        object.__setattr__(self, "_node_index", {n.id: k for k, n in enumerate(self.gas_nodes)})

    def bus_index(self, bus_id: str) -> int:
        return self._bus_index[bus_id]

    def node_index(self, node_id: str) -> int:
        return self._node_index[node_id]

    @property
    def gas_generators(self) -> list[Generator]:
        return [g for g in self.generators if g.kind == "gas"]


def compute_cont(p: Pipeline, k: PhysicalConstants) -> float:
    """Weymouth constant: flow (MSm3/h) per bar of pressure, squared-law."""
    return math.sqrt(0.617 * p.D**5 / (p.L * k.F * k.R * k.T * k.Z * k.rho**2))


def linepack_coefficient(p: Pipeline, k: PhysicalConstants) -> float:
    """Stored gas (MSm3) per bar of average pipeline pressure."""
    return 0.78 * p.D**2 * p.L / (k.rho * k.R * k.T * k.Z) * VOLUME_TO_MSM3


def initial_linepack(net: IesNetwork, p: Pipeline) -> float:
    pi_c = net.gas_nodes[net.node_index(p.c)].pi0
    pi_d = net.gas_nodes[net.node_index(p.d)].pi0
    return linepack_coefficient(p, net.constants) * 0.5 * (pi_c + pi_d)


def _connected(nodes: list[str], edges: list[tuple[str, str]]) -> bool:
    if len(nodes) <= 1:
        return True
    adj = defaultdict(set)
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen >= set(nodes)


def validate(net: IesNetwork) -> list[str]:
    """Return one message per violated invariant; empty when the network is valid."""
    report: list[str] = []
    T = net.horizon
    bus_ids = {b.id for b in net.buses}
    node_ids = {n.id for n in net.gas_nodes}

    for label, items in (("bus", net.buses), ("generator", net.generators),
                         ("wind farm", net.wind_farms), ("gas node", net.gas_nodes),
                         ("well", net.wells), ("storage", net.storages)):
        ids = [x.id for x in items]
        for dup in sorted({i for i in ids if ids.count(i) > 1}):
            report.append(f"duplicate {label} id {dup!r}")

    for b in net.buses:
        if len(b.L_P) != T:
            report.append(f"bus {b.id}: demand length {len(b.L_P)} != horizon {T}")
        if any(v < 0 for v in b.L_P):
            report.append(f"bus {b.id}: negative demand")
        if b.C_NP < 0:
            report.append(f"bus {b.id}: negative non-served power cost")
    for br in net.branches:
        name = br.id or f"{br.a}-{br.b}"
        for end in (br.a, br.b):
            if end not in bus_ids:
                report.append(f"branch {name}: unknown bus {end!r}")
        if br.X <= 0:
            report.append(f"branch {name}: reactance must be > 0")
        if br.PF < 0:
            report.append(f"branch {name}: capacity must be >= 0")
    for g in net.generators:
        if g.bus not in bus_ids:
            report.append(f"generator {g.id}: unknown bus {g.bus!r}")
        if g.kind not in ("gas", "coal"):
            report.append(f"generator {g.id}: kind must be 'gas' or 'coal'")
        if not 0 <= g.P_min <= g.P_max:
            report.append(f"generator {g.id}: requires 0 <= P_min <= P_max")
        if g.RU < 0 or g.RD < 0:
            report.append(f"generator {g.id}: negative ramp limit")
        if g.c0 not in (0, 1):
            report.append(f"generator {g.id}: c0 must be 0 or 1")
        pd0 = g.initial_output
        if not (pd0 == 0 or g.P_min <= pd0 <= g.P_max):
            report.append(f"generator {g.id}: pd0 outside {{0}} U [P_min, P_max]")
        if g.kind == "gas":
            if g.gas_node is None:
                report.append(f"generator {g.id}: gas-fired unit has no gas node")
            elif g.gas_node not in node_ids:
                report.append(f"generator {g.id}: unknown gas node {g.gas_node!r}")
            if g.GTP <= 0:
                report.append(f"generator {g.id}: GTP must be > 0 for gas-fired units")
    for w in net.wind_farms:
        if w.bus not in bus_ids:
            report.append(f"wind farm {w.id}: unknown bus {w.bus!r}")
        if not 0 < w.v_cut_in < w.v_rated < w.v_cut_out:
            report.append(f"wind farm {w.id}: requires 0 < cut-in < rated < cut-out")
        if w.capacity < 0:
            report.append(f"wind farm {w.id}: negative capacity")
        if w.forecast and len(w.forecast) != T:
            report.append(f"wind farm {w.id}: forecast length {len(w.forecast)} != horizon {T}")
        if any(v < 0 for v in w.forecast):
            report.append(f"wind farm {w.id}: negative forecast speed")
    for n in net.gas_nodes:
        if not 0 < n.Pi_min <= n.pi0 <= n.Pi_max:
            report.append(f"gas node {n.id}: requires 0 < Pi_min <= pi0 <= Pi_max")
        if len(n.L_G) != T:
            report.append(f"gas node {n.id}: demand length {len(n.L_G)} != horizon {T}")
        if any(v < 0 for v in n.L_G):
            report.append(f"gas node {n.id}: negative demand")
    for p in net.pipelines:
        name = p.id or f"{p.c}-{p.d}"
        for end in (p.c, p.d):
            if end not in node_ids:
                report.append(f"pipeline {name}: unknown gas node {end!r}")
        if p.D <= 0 or p.L <= 0:
            report.append(f"pipeline {name}: diameter and length must be > 0")
    for cm in net.compressors:
        name = cm.id or f"{cm.q}-{cm.j}"
        for end in (cm.q, cm.j):
            if end not in node_ids:
                report.append(f"compressor {name}: unknown gas node {end!r}")
        if cm.CM < 1:
            report.append(f"compressor {name}: compression factor < 1")
    for w in net.wells:
        if w.node not in node_ids:
            report.append(f"well {w.id}: unknown gas node {w.node!r}")
        if not 0 <= w.W_min <= w.W_max:
            report.append(f"well {w.id}: requires 0 <= W_min <= W_max")
    for s in net.storages:
        if s.node not in node_ids:
            report.append(f"storage {s.id}: unknown gas node {s.node!r}")
        if not 0 <= s.S_min <= s.sl0 <= s.S_max:
            report.append(f"storage {s.id}: requires 0 <= S_min <= sl0 <= S_max")
        if s.WR_max < 0 or s.IS_max < 0:
            report.append(f"storage {s.id}: negative withdrawal/injection limit")
    k = net.constants
    for name in ("rho", "F", "R", "T", "Z"):
        if not getattr(k, name) > 0:
            report.append(f"constant {name} must be > 0")

    if not net.generators:
        report.append("network has no generator")
    if not net.wells:
        report.append("network has no gas well")
    if not _connected([b.id for b in net.buses], [(br.a, br.b) for br in net.branches]):
        report.append("power graph not connected")
    gas_edges = [(p.c, p.d) for p in net.pipelines] + [(c.q, c.j) for c in net.compressors]
    if not _connected([n.id for n in net.gas_nodes], gas_edges):
        report.append("gas graph not connected")
    return report


# --- file format -----------------------------------------------------------

_SECTIONS = {
    "buses": Bus,
    "branches": Branch,
    "generators": Generator,
    "wind_farms": WindFarm,
    "gas_nodes": GasNode,
    "pipelines": Pipeline,
    "compressors": Compressor,
    "wells": GasWell,
    "storages": GasStorage,
}

# Fields scaled by the declared power unit (GW) and length unit (m).
_POWER_FIELDS = {
    Generator: ("P_min", "P_max", "RU", "RD", "pd0"),
    Bus: ("L_P",),
    Branch: ("PF",),
    WindFarm: ("capacity",),
}
_LENGTH_FIELDS = {Pipeline: ("L",)}
# Cost fields are per GW / GWh; converting power units rescales them inversely.
_PER_POWER_FIELDS = {
    Generator: ("C_PD",),
    Bus: ("C_NP",),
    WindFarm: ("C_WC",),
}
# GTP is MSm3 per GWh.
_GTP_FIELDS = {Generator: ("GTP",)}


def _scale(value, factor):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(float(v) * factor for v in value)
    return float(value) * factor


def _make(cls, raw: dict, power: float, length: float, where: str):
    known = {f.name for f in fields(cls) if f.init}
    unknown = set(raw) - known
    if unknown:
        raise NetworkError(f"{where}: unknown field(s) {sorted(unknown)}")
    data = dict(raw)
    for name in _POWER_FIELDS.get(cls, ()):
        if name in data:
            data[name] = _scale(data[name], power)
    for name in _LENGTH_FIELDS.get(cls, ()):
        if name in data:
            data[name] = _scale(data[name], length)
    for name in _PER_POWER_FIELDS.get(cls, ()) + _GTP_FIELDS.get(cls, ()):
        if name in data:
            data[name] = _scale(data[name], 1.0 / power)
    for name in ("L_G", "forecast"):
        if name in data:
            data[name] = tuple(float(v) for v in data[name])
    for key in ("id", "bus", "a", "b", "c", "d", "q", "j", "node", "gas_node"):
        if data.get(key) is not None:
            data[key] = str(data[key])
    try:
        return cls(**data)
    except TypeError as exc:
        raise NetworkError(f"{where}: {exc}") from None


def network_from_dict(raw: dict[str, Any], check: bool = True) -> IesNetwork:
    if not isinstance(raw, dict):
        raise NetworkError("network file must contain a mapping at top level")
    units = raw.get("units") or {}
    try:
        power = _POWER_SCALE[units.get("power", "GW")]
        length = _LENGTH_SCALE[units.get("length", "m")]
    except KeyError as exc:
        raise NetworkError(f"unsupported unit {exc.args[0]!r}") from None
    if "constants" not in raw:
        raise NetworkError("missing 'constants' section")
    try:
        constants = PhysicalConstants(**{k: float(v) for k, v in raw["constants"].items()})
    except TypeError as exc:
        raise NetworkError(f"constants: {exc}") from None
    sections = {}
    for key, cls in _SECTIONS.items():
        items = raw.get(key) or []
        if not isinstance(items, list):
            raise NetworkError(f"section {key!r} must be a list")
        sections[key] = tuple(
            _make(cls, item, power, length, f"{key}[{n}]") for n, item in enumerate(items)
        )
    net = IesNetwork(
        name=str(raw.get("name", "network")),
        constants=constants,
        horizon=int(raw.get("horizon", HORIZON)),
        **sections,
    )
    if check:
        report = validate(net)
        if report:
            raise ValidationError(report)
    return net


def _plain(obj):
    out = {}
    for f in fields(obj):
        if not f.init:
            continue
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def network_to_dict(net: IesNetwork) -> dict[str, Any]:
    out: dict[str, Any] = {"name": net.name, "horizon": net.horizon,
                           "units": {"power": "GW", "length": "m"}}
    for key in _SECTIONS:
        out[key] = [_plain(x) for x in getattr(net, key)]
    out["constants"] = asdict(net.constants)
    return out


def load_network(path: str | Path, check: bool = True) -> IesNetwork:
    """Read and validate a YAML network file."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise NetworkError(f"{path}: parse error: {exc}") from None
    return network_from_dict(raw, check=check)


def save_network(net: IesNetwork, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(network_to_dict(net), sort_keys=False))

