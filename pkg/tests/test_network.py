import math
from dataclasses import replace

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from iesuc.network import (NetworkError, PhysicalConstants, Pipeline, ValidationError,
                           compute_cont, initial_linepack, linepack_coefficient, load_network,
                           network_from_dict, network_to_dict, save_network, validate)

from conftest import DATA, tiny_dict


def test_minimal_fixture_loads():
    net = load_network(DATA / "minimal_network.yaml")
    assert len(net.buses) == 2 and len(net.gas_nodes) == 2
    assert len(net.generators) == 1 and len(net.wells) == 1 and len(net.pipelines) == 1
    assert net.horizon == 24


@pytest.mark.parametrize("name", ["hedging", "stall", "tail"])
def test_bundled_fixtures_validate(name):
    net = load_network(DATA / f"{name}_network.yaml")
    assert validate(net) == []
    assert len(net.buses) <= 6 and len(net.gas_nodes) <= 5


def test_pmin_above_pmax_names_generator(tiny_raw):
    tiny_raw["generators"][0]["P_min"] = 0.5
    with pytest.raises(ValidationError) as exc:
        network_from_dict(tiny_raw)
    assert any("G1" in msg and "P_min" in msg for msg in exc.value.report)


def test_unknown_bus_on_branch(tiny_raw):
    tiny_raw["branches"][0]["b"] = "B9"
    with pytest.raises(ValidationError, match="unknown bus 'B9'"):
        network_from_dict(tiny_raw)


def test_unknown_field_is_parse_error(tiny_raw):
    tiny_raw["buses"][0]["voltage"] = 1.0
    with pytest.raises(NetworkError, match="unknown field"):
        network_from_dict(tiny_raw)


def test_malformed_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("buses: [unclosed\n")
    with pytest.raises(NetworkError, match="parse error"):
        load_network(path)


def test_validate_reports_compression_factor(tiny_raw):
    tiny_raw["compressors"] = [{"q": "N1", "j": "N2", "CM": 0.9}]
    net = network_from_dict(tiny_raw, check=False)
    assert any("compression factor < 1" in m for m in validate(net))


def test_validate_reports_disconnected_gas_node(tiny_raw):
    tiny_raw["gas_nodes"].append({"id": "N3", "Pi_min": 30.0, "Pi_max": 60.0, "C_NG": 2.0,
                                  "L_G": [0.0, 0.0], "pi0": 40.0})
    net = network_from_dict(tiny_raw, check=False)
    assert "gas graph not connected" in validate(net)


def test_validate_clean_fixture(tiny_net):
    assert validate(tiny_net) == []


def test_round_trip(tmp_path, tiny_net):
    path = tmp_path / "net.yaml"
    save_network(tiny_net, path)
    again = load_network(path)
    assert again == tiny_net
    assert validate(again) == []


def test_unit_conversion_megawatt_kilometre(tiny_raw):
    raw = tiny_dict()
    raw["units"] = {"power": "MW", "length": "km"}
    for g in raw["generators"]:
        for key in ("P_min", "P_max", "RU", "RD"):
            g[key] *= 1000
        g["C_PD"] /= 1000
        g["GTP"] = g.get("GTP", 0.0) / 1000
    for b in raw["buses"]:
        b["L_P"] = [v * 1000 for v in b["L_P"]]
        b["C_NP"] /= 1000
    raw["branches"][0]["PF"] *= 1000
    raw["wind_farms"][0]["capacity"] *= 1000
    raw["wind_farms"][0]["C_WC"] /= 1000
    raw["pipelines"][0]["L"] /= 1000
    converted = network_from_dict(raw)
    reference = network_from_dict(tiny_raw)
    for a, b in zip(converted.generators, reference.generators):
        assert a.P_max == pytest.approx(b.P_max)
        assert a.C_PD == pytest.approx(b.C_PD)
        assert a.GTP == pytest.approx(b.GTP)
    assert converted.pipelines[0].L == pytest.approx(50000.0)
    assert converted.buses[1].L_P == pytest.approx(reference.buses[1].L_P)


def test_default_initial_output(tiny_net):
    g = tiny_net.generators[0]
    assert g.initial_output == 0.0
    assert replace(g, c0=1).initial_output == g.P_min
    assert replace(g, c0=1, pd0=0.3).initial_output == 0.3


K = PhysicalConstants(rho=0.7156, F=0.01, R=0.0577, T=281.15, Z=0.8)


def test_cont_scalar_oracle():
    p = Pipeline("a", "b", D=0.6, L=5e4)
    expected = (0.617 * 0.6**5 / (5e4 * 0.01 * 0.0577 * 281.15 * 0.8 * 0.7156**2)) ** 0.5
    assert compute_cont(p, K) == pytest.approx(expected, rel=1e-15)


def test_cont_scaling():
    p = Pipeline("a", "b", D=0.6, L=5e4)
    base = compute_cont(p, K)
    assert compute_cont(replace(p, D=1.2), K) / base == pytest.approx(2**2.5)
    assert compute_cont(replace(p, L=2e5), K) / base == pytest.approx(0.5)


pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(D=pos, L=pos, F=pos, R=pos, T=pos, Z=pos, rho=pos, factor=st.floats(1.01, 10.0))
def test_cont_monotone(D, L, F, R, T, Z, rho, factor):
    p = Pipeline("a", "b", D=D, L=L)
    k = PhysicalConstants(rho=rho, F=F, R=R, T=T, Z=Z)
    base = compute_cont(p, k)
    assert compute_cont(replace(p, D=D * factor), k) > base
    assert compute_cont(replace(p, L=L * factor), k) < base
    for name in ("F", "R", "T", "Z", "rho"):
        bigger = replace(k, **{name: getattr(k, name) * factor})
        assert compute_cont(p, bigger) < base


def test_initial_linepack_uses_mean_initial_pressure(tiny_net):
    p = tiny_net.pipelines[0]
    coef = linepack_coefficient(p, tiny_net.constants)
    assert initial_linepack(tiny_net, p) == pytest.approx(coef * 55.0)
    volume = 0.78 * 0.6**2 * 50000.0
    k = tiny_net.constants
    assert coef == pytest.approx(volume / (k.rho * k.R * k.T * k.Z) * 1e-6)


def test_schema_doc_mentions_every_section():
    doc = (DATA / "README.md").read_text()
    raw = yaml.safe_load((DATA / "minimal_network.yaml").read_text())
    for section in raw:
        assert section in doc
