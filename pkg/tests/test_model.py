import numpy as np
import pytest

from iesuc.model import (COST_GROUPS, EQUATION_TAGS, ModelBuilder, ModelError, audit_relaxation,
                         build_model, default_gamma, determine_flow_directions,
                         gas_balance_residuals, power_balance_residuals, weymouth_residual)
from iesuc.network import compute_cont, initial_linepack, network_from_dict
from iesuc.scenarios import ScenarioSet
from iesuc.solver import SolverOptions, solve, solve_lp

from conftest import tiny_dict
from oracles import enumerate_binaries


def wind(T, *levels, probs=None):
    probs = probs or [1.0 / len(levels)] * len(levels)
    return ScenarioSet(("WF",), probs, np.array([[[lv] * T] for lv in levels]))


def net_of(raw, check=True):
    return network_from_dict(raw, check=check)


def solved(model, gap=1e-9):
    res = solve(model.program, SolverOptions(gap=gap))
    assert res.status == "optimal"
    return res.x


def only_coal(T):
    raw = tiny_dict(T)
    raw["generators"] = raw["generators"][:1]
    return raw


# -- objective ---------------------------------------------------------------------

def test_objective_single_generator_single_period():
    net = net_of(only_coal(1))
    m = build_model(net, wind(1, 0.05), gamma=0.0)
    g = net.generators[0]
    c = m.program.c
    assert c[m.catalog["c"][0, 0]] == pytest.approx(g.C_PD * g.P_min, abs=1e-15)
    assert c[m.catalog["pdf"][0, 0, 0]] == pytest.approx(g.C_PD, abs=1e-15)


def test_objective_equiprobable_scenarios():
    net = net_of(only_coal(2))
    m = build_model(net, wind(2, 0.05, 0.1), gamma=0.0)
    g = net.generators[0]
    pdf = m.program.c[m.catalog["pdf"][0]]
    assert np.allclose(pdf, 0.5 * g.C_PD, rtol=0, atol=1e-15)
    assert np.allclose(m.program.c[m.catalog["c"][0]], g.C_PD * g.P_min)


def test_gamma_zero_has_no_pressure_terms():
    net = net_of(tiny_dict())
    m0 = build_model(net, wind(2, 0.05, 0.1), gamma=0.0)
    assert not np.any(m0.costs["penalty"])
    assert not np.any(m0.program.c[m0.catalog["pi"]])
    m1 = build_model(net, wind(2, 0.05, 0.1), gamma=0.01, directions=m0.directions)
    pi = m1.program.c[m1.catalog["pi"]]
    # upstream N1 gets +gamma P, downstream N2 gets -gamma P
    assert np.allclose(pi[0], 0.005) and np.allclose(pi[1], -0.005)
    assert np.allclose(m1.program.c - m1.costs["penalty"], m0.program.c)


def test_cost_groups_sum_to_objective():
    net = net_of(tiny_dict())
    m = build_model(net, wind(2, 0.05, 0.1))
    x = solved(m)
    b = m.cost_breakdown(x)
    assert set(b) == set(COST_GROUPS)
    assert sum(b.values()) == pytest.approx(m.program.objective(x), abs=1e-12)
    assert m.expected_cost(x) == pytest.approx(b["generation"] + b["gas"] + b["unserved"])


def test_default_gamma_scales_with_well_cost():
    net = net_of(tiny_dict())
    assert default_gamma(net) == pytest.approx(1e-3 * 0.2)


# -- power rows ------------------------------------------------------------------------

def test_row_counts_one_generator():
    net = net_of(only_coal(2))
    b = ModelBuilder(net, wind(2, 0.05))
    b.add_power_constraints()
    # each row is ranged, so it stands for a lower/upper pair
    assert b.rows_tagged("eq2") == 2
    assert b.rows_tagged("eq3") == 2
    assert b.rows_tagged("eq4") == 2
    assert b.rows_tagged("eq6") == 4


def test_first_period_ramp_uses_initial_output():
    raw = only_coal(2)
    raw["generators"][0].update(c0=1, pd0=0.2, RU=0.05, RD=0.05)
    net = net_of(raw)
    m = build_model(net, wind(2, 0.0))
    x = solved(m)
    pd = m.power_output(x)[0, :, 0]
    assert 0.15 - 1e-9 <= pd[0] <= 0.25 + 1e-9
    assert abs(pd[1] - pd[0]) <= 0.05 + 1e-9


def test_isolated_bus_served_by_slack():
    raw = tiny_dict()
    raw["buses"].append({"id": "B3", "L_P": [1.0, 1.0], "C_NP": 1.0})
    net = net_of(raw, check=False)
    m = build_model(net, wind(2, 0.05))
    x = solved(m)
    assert np.allclose(m.values(x, "np")[2], 1.0, atol=1e-9)


def test_zero_capacity_branch_carries_nothing():
    raw = tiny_dict()
    raw["branches"][0]["PF"] = 0.0
    m = build_model(net_of(raw), wind(2, 0.05))
    cols = m.catalog["pf"][0].ravel()
    assert np.all(m.program.lb[cols] == 0.0) and np.all(m.program.ub[cols] == 0.0)


def test_reference_bus_per_island():
    raw = tiny_dict()
    raw["buses"].append({"id": "B3", "L_P": [0.0, 0.0], "C_NP": 1.0})
    m = build_model(net_of(raw, check=False), wind(2, 0.05))
    th = m.catalog["theta"]
    fixed = [k for k in range(3) if np.all(m.program.ub[th[k]] == 0) and np.all(m.program.lb[th[k]] == 0)]
    assert fixed == [0, 2]


# -- gas rows ---------------------------------------------------------------------------

def test_storage_without_injection_never_rises():
    raw = tiny_dict(4)
    raw["storages"][0].update(sl0=1.0, S_max=1.0, IS_max=0.0)
    m = build_model(net_of(raw), wind(4, 0.05))
    x = solved(m)
    sl = m.values(x, "sl")[0, :, 0]
    assert np.all(np.diff(np.concatenate([[1.0], sl])) <= 1e-12)


def _with_compressor(cm=1.5):
    raw = tiny_dict()
    raw["gas_nodes"].insert(0, {"id": "N0", "Pi_min": 50.0, "Pi_max": 50.0, "C_NG": 2.0,
                                "L_G": [0.0, 0.0], "pi0": 50.0})
    raw["gas_nodes"][1]["Pi_max"] = 90.0
    raw["compressors"] = [{"id": "K01", "q": "N0", "j": "N1", "CM": cm}]
    return net_of(raw)


def test_compressor_pressure_window():
    net = _with_compressor(1.5)
    m = build_model(net, wind(2, 0.05), terminal_linepack="geq")
    p = m.program
    col = m.catalog["pi"][1, 0, 0]
    lo_c = np.zeros(p.n)
    lo_c[col] = 1.0
    assert solve_lp(p.with_objective(lo_c, 0.0)).objective == pytest.approx(50.0, abs=1e-7)
    assert solve_lp(p.with_objective(-lo_c, 0.0)).objective == pytest.approx(-75.0, abs=1e-7)


def test_gas_node_without_supply_uses_slack():
    raw = tiny_dict()
    raw["gas_nodes"].append({"id": "N3", "Pi_min": 30.0, "Pi_max": 70.0, "C_NG": 2.0,
                             "L_G": [0.2, 0.2], "pi0": 50.0})
    m = build_model(net_of(raw, check=False), wind(2, 0.05))
    x = solved(m)
    assert np.allclose(m.values(x, "ng")[2], 0.2, atol=1e-9)


def _rows(m, tag):
    idx = [k for k, t in enumerate(m.program.row_tags) if t == tag]
    return m.program.A[idx], m.program.row_lo[idx], m.program.row_hi[idx]


def test_flow_average_row():
    m = build_model(net_of(tiny_dict()), wind(2, 0.05))
    A, lo, hi = _rows(m, "eq14")
    x = np.zeros(m.program.n)
    x[m.catalog["gfo"][0, 0, 0]] = 2.0
    x[m.catalog["gfi"][0, 0, 0]] = 4.0
    x[m.catalog["gf"][0, 0, 0]] = 3.0
    assert np.allclose(A @ x, 0.0) and np.all(lo == 0) and np.all(hi == 0)


def test_balanced_pipeline_keeps_linepack_constant():
    net = net_of(tiny_dict(3))
    m = build_model(net, wind(3, 0.05))
    A, lo, hi = _rows(m, "eq13")
    m0 = initial_linepack(net, net.pipelines[0])
    x = np.zeros(m.program.n)
    x[m.catalog["gfi"]] = 0.7
    x[m.catalog["gfo"]] = 0.7
    x[m.catalog["m"]] = m0
    assert np.allclose(A @ x, lo) and np.allclose(lo, hi)


def test_linepack_link_is_homogeneous():
    m = build_model(net_of(tiny_dict()), wind(2, 0.05))
    A, lo, hi = _rows(m, "eq12")
    x = solved(m)
    assert np.allclose(A @ x, 0.0, atol=1e-9)
    y = np.zeros_like(x)
    for fam in ("pi", "pibar", "m"):
        y[m.catalog[fam]] = 2 * x[m.catalog[fam]]
    assert np.allclose(A @ y, 0.0, atol=1e-9)


@pytest.mark.parametrize("sense", ["eq", "geq"])
def test_terminal_linepack_sense(sense):
    net = net_of(tiny_dict(3))
    m = build_model(net, wind(3, 0.05), terminal_linepack=sense)
    x = solved(m)
    end = m.values(x, "m")[:, -1, :].sum(axis=0)
    start = sum(initial_linepack(net, p) for p in net.pipelines)
    if sense == "eq":
        assert np.allclose(end, start, atol=1e-9)
    else:
        assert np.all(end >= start - 1e-9)


def test_bad_terminal_sense_and_direction_shape():
    net = net_of(tiny_dict())
    with pytest.raises(ModelError, match="terminal"):
        build_model(net, wind(2, 0.05), terminal_linepack="leq")
    with pytest.raises(ModelError, match="shape"):
        build_model(net, wind(2, 0.05), directions=np.ones((2, 2, 1)))


# -- Weymouth relaxation and audit ------------------------------------------------------------

def _unit_cont_net():
    raw = tiny_dict()
    raw["constants"] = {"rho": 1.0, "F": 1.0, "R": 1.0, "T": 1.0, "Z": 1.0}
    raw["pipelines"][0].update(D=1.0, L=0.617)
    return net_of(raw)


def _point(m, gf, pc, pd):
    x = np.zeros(m.program.n)
    x[m.catalog["gf"][0, 0, 0]] = gf
    x[m.catalog["pi"][0, 0, 0]] = pc
    x[m.catalog["pi"][1, 0, 0]] = pd
    return x


def test_three_four_five_identity_is_exact():
    net = _unit_cont_net()
    assert compute_cont(net.pipelines[0], net.constants) == 1.0
    m = build_model(net, wind(2, 0.05), directions=np.ones((1, 2, 1), np.int8))
    cone = m.program.cones[0]
    assert cone.tag == "eq15:0,0,0"
    x = _point(m, 3.0, 5.0, 4.0)
    assert cone.residual(x) == 0.0
    A, lo, hi = _rows(m, "eq23")
    assert (A @ x)[0] == 2.0 and lo[0] == 0.0
    assert weymouth_residual(3.0, 5.0, 4.0, 1.0, 5.0) == 0.0


def test_equal_pressures_force_zero_flow():
    m = build_model(_unit_cont_net(), wind(2, 0.05), directions=np.ones((1, 2, 1), np.int8))
    cone = m.program.cones[0]
    A, lo, _ = _rows(m, "eq23")
    assert cone.residual(_point(m, 0.1, 4.0, 4.0)) > 0
    assert (A @ _point(m, -0.1, 4.0, 4.0))[0] < lo[0]
    x = _point(m, 0.0, 4.0, 4.0)
    assert cone.residual(x) <= 0 and (A @ x)[0] >= lo[0]


def test_zero_flow_with_pressure_drop_violates_linear_row():
    m = build_model(_unit_cont_net(), wind(2, 0.05), directions=np.ones((1, 2, 1), np.int8))
    x = _point(m, 0.0, 5.0, 4.0)
    A, lo, _ = _rows(m, "eq23")
    assert m.program.cones[0].residual(x) <= 0
    assert (A @ x)[0] < lo[0]


def test_reverse_direction_mirrors_rows():
    m = build_model(_unit_cont_net(), wind(2, 0.05), directions=-np.ones((1, 2, 1), np.int8))
    cone = m.program.cones[0]
    assert cone.residual(_point(m, -3.0, 4.0, 5.0)) == 0.0
    A, lo, hi = _rows(m, "eq23")
    assert np.isinf(lo[0]) and hi[0] == 0.0


def test_audit_examples():
    assert weymouth_residual(0.0, 4.0, 4.0, 0.3, 70.0) == 0.0
    assert weymouth_residual(-3.0, 4.0, 5.0, 1.0, 5.0) == 0.0
    assert weymouth_residual(1.0, 4.0, 4.0, 1.0, 5.0) == pytest.approx(1 / 25)


def test_audit_shape_and_bounds_at_optimum():
    m = build_model(net_of(tiny_dict()), wind(2, 0.05, 0.1))
    audit = audit_relaxation(m, solved(m))
    assert audit.residuals.shape == (1, 2, 2)
    assert 0 <= audit.mean <= audit.max


def test_row_and_cone_tags_are_known():
    net = _with_compressor()
    m = build_model(net, wind(2, 0.05))
    assert set(m.program.row_tags) <= EQUATION_TAGS
    assert all(c.tag.split(":")[0] == "eq15" for c in m.program.cones)
    assert m.catalog.names[m.catalog["pdf"][0, 0, 0]] == "pdf[G1,1,0]"


# -- flow directions ---------------------------------------------------------------------------

def test_direction_well_to_load_is_forward():
    dirs = determine_flow_directions(net_of(tiny_dict(4)), wind(4, 0.05, 0.1))
    assert dirs.shape == (1, 4, 2) and np.all(dirs == 1)


def test_direction_defaults_without_gas_demand():
    raw = only_coal(3)
    for nd in raw["gas_nodes"]:
        nd["L_G"] = [0.0] * 3
    dirs = determine_flow_directions(net_of(raw), wind(3, 0.05))
    assert np.all(dirs == 1)


def test_direction_follows_moving_demand():
    T = 6
    raw = only_coal(T)
    raw["gas_nodes"][0]["L_G"] = [0.0] * 3 + [0.08] * 3
    raw["gas_nodes"][1]["L_G"] = [0.08] * 3 + [0.0] * 3
    raw["wells"] = [{"id": "W1", "node": "N1", "W_min": 0.0, "W_max": 0.04, "C_PG": 0.2},
                    {"id": "W2", "node": "N2", "W_min": 0.0, "W_max": 0.04, "C_PG": 0.2}]
    raw["storages"] = []
    net = net_of(raw)
    model = build_model(net, wind(T, 0.05), weymouth=False)
    x = solve_lp(model.program).x
    gf = model.values(x, "gf")[0, :, 0]
    dirs = determine_flow_directions(net, wind(T, 0.05))[0, :, 0]
    assert np.all(dirs[:3] == 1) and np.all(dirs[3:] == -1)
    assert np.all(np.sign(gf[np.abs(gf) > 1e-6]) == dirs[np.abs(gf) > 1e-6])


# -- whole-model properties -----------------------------------------------------------------------

def test_balances_and_storage_telescoping_at_optimum():
    net = net_of(tiny_dict(4))
    m = build_model(net, wind(4, 0.02, 0.15))
    x = solved(m)
    assert np.abs(power_balance_residuals(m, x)).max() <= 1e-6
    assert np.abs(gas_balance_residuals(m, x)).max() <= 1e-6
    sl, sto, sti = (m.values(x, f)[0] for f in ("sl", "sto", "sti"))
    s0 = net.storages[0].sl0
    assert np.allclose(sl[-1], s0 + (sti - sto).sum(axis=0), atol=1e-9)


def test_relaxed_region_is_convex():
    m = build_model(net_of(tiny_dict(3)), wind(3, 0.05))
    p = m.program.relaxed()
    rng = np.random.default_rng(0)
    pts = []
    for _ in range(2):
        res = solve(p.with_objective(rng.normal(size=p.n) * 0.01 + p.c, 0.0))
        assert res.status == "optimal"
        pts.append(res.x)
    mid = 0.5 * (pts[0] + pts[1])
    assert p.max_row_violation(mid) <= 1e-7
    assert p.max_cone_violation(mid) <= 1e-6


def test_single_scenario_uc_matches_enumeration():
    net = net_of(tiny_dict())
    m = build_model(net, wind(2, 0.12))
    ref, bits = enumerate_binaries(m.program)
    res = solve(m.program, SolverOptions(gap=1e-9))
    assert res.objective == pytest.approx(ref, abs=1e-6)
