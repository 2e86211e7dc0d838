import copy
import sys
from pathlib import Path

import pytest

from iesuc.network import network_from_dict

DATA = Path(__file__).resolve().parents[1] / "src" / "iesuc" / "data"

CONSTANTS = {"rho": 0.7156, "F": 0.01, "R": 5.183e-3, "T": 281.15, "Z": 0.8}


def tiny_dict(T: int = 2) -> dict:
    """Two buses, two gas nodes, one gas-fired and one coal unit, one wind farm."""
    return {
        "name": "tiny",
        "horizon": T,
        "buses": [{"id": "B1", "L_P": [0.2] * T, "C_NP": 1.0},
                  {"id": "B2", "L_P": [0.3] * T, "C_NP": 1.0}],
        "branches": [{"id": "L12", "a": "B1", "b": "B2", "X": 0.1, "PF": 0.5}],
        "generators": [
            {"id": "G1", "kind": "coal", "bus": "B1", "P_min": 0.1, "P_max": 0.4, "RU": 0.3,
             "RD": 0.3, "C_PD": 0.03},
            {"id": "G2", "kind": "gas", "bus": "B2", "P_min": 0.05, "P_max": 0.3, "RU": 0.3,
             "RD": 0.3, "C_PD": 0.01, "gas_node": "N2", "GTP": 0.2},
        ],
        "wind_farms": [{"id": "WF", "bus": "B2", "capacity": 0.2, "C_WC": 0.1, "v_cut_in": 3.0,
                        "v_rated": 12.0, "v_cut_out": 25.0, "forecast": [8.0] * T}],
        "gas_nodes": [
            {"id": "N1", "Pi_min": 40.0, "Pi_max": 70.0, "C_NG": 2.0, "L_G": [0.0] * T, "pi0": 60.0},
            {"id": "N2", "Pi_min": 30.0, "Pi_max": 70.0, "C_NG": 2.0, "L_G": [0.1] * T, "pi0": 50.0},
        ],
        "pipelines": [{"id": "P12", "c": "N1", "d": "N2", "D": 0.6, "L": 50000.0}],
        "compressors": [],
        "wells": [{"id": "W1", "node": "N1", "W_min": 0.0, "W_max": 0.5, "C_PG": 0.2}],
        "storages": [{"id": "S2", "node": "N2", "S_min": 0.0, "S_max": 1.0, "WR_max": 0.05,
                      "IS_max": 0.05, "C_S": 0.25, "sl0": 0.5}],
        "constants": dict(CONSTANTS),
    }


@pytest.fixture
def tiny_raw():
    return copy.deepcopy(tiny_dict())


@pytest.fixture
def tiny_net():
    return network_from_dict(tiny_dict())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
