"""Regenerate the bundled desk-scale fixtures in src/iesuc/data."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

DATA = Path(__file__).resolve().parents[1] / "src" / "iesuc" / "data"
T = 24

CONSTANTS = {"rho": 0.7156, "F": 0.01, "R": 5.183e-3, "T": 281.15, "Z": 0.8}


class _Dumper(yaml.SafeDumper):
    pass


def _list(dumper, data):
    flow = all(isinstance(v, (int, float)) for v in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _list)


def dump(doc: dict, path: Path) -> None:
    path.write_text(yaml.dump(doc, Dumper=_Dumper, sort_keys=False, width=120))


def profile(low: float, high: float, peak_hour: float = 18.0) -> list[float]:
    """Smooth daily shape between ``low`` and ``high``."""
    h = np.arange(T)
    shape = 0.5 * (1 + np.cos(2 * math.pi * (h - peak_hour) / T))
    return [round(float(v), 4) for v in low + (high - low) * shape]


def wind_curve(level: float, swing: float, phase: float = 3.0) -> list[float]:
    h = np.arange(T)
    return [round(float(max(0.0, v)), 4)
            for v in level + swing * np.cos(2 * math.pi * (h - phase) / T)]


def gas_side(extra_load: float = 0.0) -> dict:
    return {
        "gas_nodes": [
            {"id": "N0", "Pi_min": 40.0, "Pi_max": 60.0, "C_NG": 2.0, "L_G": [0.0] * T, "pi0": 50.0},
            {"id": "N1", "Pi_min": 40.0, "Pi_max": 70.0, "C_NG": 2.0, "L_G": [0.0] * T, "pi0": 60.0},
            {"id": "N2", "Pi_min": 35.0, "Pi_max": 70.0, "C_NG": 2.0,
             "L_G": profile(0.05 + extra_load, 0.12 + extra_load, 8.0), "pi0": 55.0},
            {"id": "N3", "Pi_min": 30.0, "Pi_max": 70.0, "C_NG": 2.0,
             "L_G": profile(0.08, 0.16, 9.0), "pi0": 50.0},
        ],
        "pipelines": [
            {"id": "P12", "c": "N1", "d": "N2", "D": 0.6, "L": 50000.0},
            {"id": "P23", "c": "N2", "d": "N3", "D": 0.6, "L": 40000.0},
        ],
        "compressors": [{"id": "K01", "q": "N0", "j": "N1", "CM": 1.4}],
        "wells": [{"id": "W0", "node": "N0", "W_min": 0.0, "W_max": 0.6, "C_PG": 0.2}],
        "storages": [{"id": "S3", "node": "N3", "S_min": 0.2, "S_max": 2.0, "WR_max": 0.1,
                      "IS_max": 0.1, "C_S": 0.25, "sl0": 1.0}],
        "constants": dict(CONSTANTS),
    }


def power_side(gens: list[dict], loads: dict[str, list[float]], wind_capacity: float) -> dict:
    buses = ["B1", "B2", "B3", "B4"]
    return {
        "buses": [{"id": b, "L_P": loads.get(b, [0.0] * T), "C_NP": 1.0} for b in buses],
        "branches": [
            {"id": "L12", "a": "B1", "b": "B2", "X": 0.1, "PF": 0.6},
            {"id": "L23", "a": "B2", "b": "B3", "X": 0.1, "PF": 0.6},
            {"id": "L34", "a": "B3", "b": "B4", "X": 0.1, "PF": 0.6},
            {"id": "L14", "a": "B1", "b": "B4", "X": 0.15, "PF": 0.6},
        ],
        "generators": gens,
        "wind_farms": [{"id": "WF1", "bus": "B2", "capacity": wind_capacity, "C_WC": 0.1,
                        "v_cut_in": 3.0, "v_rated": 12.0, "v_cut_out": 25.0,
                        "forecast": wind_curve(8.0, 2.5)}],
    }


def scenarios(curves: list[list[float]], probs: list[float]) -> dict:
    return {"farms": ["WF1"], "horizon": T,
            "scenarios": [{"probability": p, "wind": {"WF1": c}} for c, p in zip(curves, probs)]}


BASE_UNIT = {"id": "G1", "kind": "coal", "bus": "B1", "P_min": 0.15, "P_max": 0.5, "RU": 0.25,
             "RD": 0.25, "C_PD": 0.02, "c0": 1, "pd0": 0.3}
LOADS = {"B2": profile(0.2, 0.4), "B3": profile(0.15, 0.3)}
# Wind stays below (lowest load - base unit minimum) so the base unit never
# wants to run under its minimum output.
THREE_DAYS = ([wind_curve(0.14, 0.06), wind_curve(0.09, 0.04), wind_curve(0.04, 0.02)],
              [0.3, 0.5, 0.2])


def _hedging_units() -> list[dict]:
    return [
        dict(BASE_UNIT),
        {"id": "G2", "kind": "gas", "bus": "B3", "P_min": 0.05, "P_max": 0.3, "RU": 0.2,
         "RD": 0.2, "C_PD": 0.01, "gas_node": "N2", "GTP": 0.2},
        {"id": "G3", "kind": "coal", "bus": "B4", "P_min": 0.1, "P_max": 0.3, "RU": 0.3,
         "RD": 0.3, "C_PD": 0.09},
    ]


def fixture_hedging() -> tuple[dict, dict]:
    """Well-separated unit prices; plain PH reaches consensus on its own."""
    net = {"name": "desk-hedging", "horizon": T, **power_side(_hedging_units(), LOADS, 0.3),
           **gas_side()}
    return net, scenarios(*THREE_DAYS)


def fixture_stall() -> tuple[dict, dict]:
    """Two gas units with identical unit costs: scenarios keep trading hours between them."""
    pair = {"kind": "gas", "bus": "B3", "gas_node": "N2", "GTP": 0.2, "C_PD": 0.01,
            "RU": 0.2, "RD": 0.2}
    gens = [dict(BASE_UNIT),
            {"id": "G2", **pair, "P_min": 0.04, "P_max": 0.15},
            {"id": "G3", **pair, "P_min": 0.1, "P_max": 0.3}]
    net = {"name": "desk-stall", "horizon": T, **power_side(gens, LOADS, 0.3), **gas_side()}
    return net, scenarios(*THREE_DAYS)


def fixture_tail() -> tuple[dict, dict]:
    """Mostly breezy day with a 10% chance of an almost calm one."""
    net = {"name": "desk-tail", "horizon": T, **power_side(_hedging_units(), LOADS, 0.3),
           **gas_side()}
    sc = scenarios([wind_curve(0.14, 0.06), wind_curve(0.11, 0.05), wind_curve(0.07, 0.04),
                    wind_curve(0.02, 0.01)], [0.3, 0.35, 0.25, 0.1])
    return net, sc


def fixture_minimal() -> tuple[dict, dict]:
    """Normative schema example: 2 buses, 2 gas nodes, 1 unit, 1 well, 1 pipeline."""
    net = {
        "name": "minimal",
        "horizon": T,
        "units": {"power": "GW", "length": "m"},
        "buses": [{"id": "B1", "L_P": [0.0] * T, "C_NP": 1.0},
                  {"id": "B2", "L_P": profile(0.1, 0.2), "C_NP": 1.0}],
        "branches": [{"id": "L12", "a": "B1", "b": "B2", "X": 0.1, "PF": 0.3}],
        "generators": [{"id": "G1", "kind": "gas", "bus": "B1", "P_min": 0.05, "P_max": 0.3,
                        "RU": 0.2, "RD": 0.2, "C_PD": 0.01, "gas_node": "N1", "GTP": 0.2,
                        "c0": 1, "pd0": 0.1}],
        "wind_farms": [{"id": "WF1", "bus": "B2", "capacity": 0.1, "C_WC": 0.1,
                        "v_cut_in": 3.0, "v_rated": 12.0, "v_cut_out": 25.0,
                        "forecast": wind_curve(8.0, 2.0)}],
        "gas_nodes": [
            {"id": "N0", "Pi_min": 40.0, "Pi_max": 60.0, "C_NG": 2.0, "L_G": [0.0] * T, "pi0": 55.0},
            {"id": "N1", "Pi_min": 30.0, "Pi_max": 60.0, "C_NG": 2.0, "L_G": [0.05] * T, "pi0": 50.0},
        ],
        "pipelines": [{"id": "P01", "c": "N0", "d": "N1", "D": 0.6, "L": 50000.0}],
        "compressors": [],
        "wells": [{"id": "W0", "node": "N0", "W_min": 0.0, "W_max": 0.5, "C_PG": 0.2}],
        "storages": [],
        "constants": dict(CONSTANTS),
    }
    sc = scenarios([wind_curve(0.06, 0.03), wind_curve(0.03, 0.02)], [0.5, 0.5])
    return net, sc


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    for name, (net, sc) in {"minimal": fixture_minimal(), "hedging": fixture_hedging(),
                       "stall": fixture_stall(), "tail": fixture_tail()}.items():
        dump(net, DATA / f"{name}_network.yaml")
        dump(sc, DATA / f"{name}_scenarios.yaml")


if __name__ == "__main__":
    main()
