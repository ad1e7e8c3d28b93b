"""End-to-end acceptance gates.

One test per criterion; each prints a single greppable verdict line.  The
ensemble criteria run on a reduced slice of the default scenario: trajectory
seeds depend only on the cell parameters and the trajectory index, never on
the cell roster, so the sliced runs reproduce the full study's numbers
exactly while staying fast.
"""

import csv
import dataclasses
import hashlib
import itertools
import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besspp.architectures import SPARSE_LAYER, build_lshippp
from besspp.designer import (
    derive_seed,
    design_layer1,
    enumerate_placements,
    tradeoff_curve,
)
from besspp.flows import ConverterEdge, FlowNetwork, max_deliverable_energy
from besspp.metrics import MetricReport, system_efficiency
from besspp.plaza import (
    ArrivalModel,
    BessMonolith,
    DemandModel,
    GridProfile,
    evaluate_cycle,
    simulate_day,
)
from besspp.scenario import default_scenario
from besspp.studies import run_ensemble, run_tradeoff
from besspp.supply import BatteryModule, flatten_distribution, sample_pack

from test_flows import random_network, vertex_oracle

TOL = 1e-8


@contextmanager
def criterion(number: int, label: str):
    try:
        yield
    except BaseException:
        print(f"criterion {number} [{label}]: FAIL")
        raise
    print(f"criterion {number} [{label}]: PASS")


# ---------------------------------------------------------------------------
# Shared heavyweight computations


R_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)


@pytest.fixture(scope="module")
def tradeoff_points():
    scenario = default_scenario()
    pack_seeds = [
        derive_seed(scenario.seed, "tradeoff-packs", i) for i in range(100)
    ]
    curves = {}
    for kind in ("lshippp", "cppp", "fpp"):
        points = tradeoff_curve(
            kind,
            scenario.supply,
            list(R_GRID),
            100,
            scenario.seed,
            n_modules=scenario.n_modules,
            n_layer1=scenario.n_layer1,
            rated_power_kw=scenario.rated_power_kw,
            pack_seeds=pack_seeds,
        )
        curves[kind] = {round(p.rating_r, 6): p for p in points}
    return curves


@pytest.fixture(scope="module")
def exemplar_ensemble(tmp_path_factory):
    # Slice the default scenario down to its exemplar demand cell.  The
    # per-trajectory seeds are derived from (mean, std, rate, index), so the
    # numbers below are identical to the same cell inside the full study.
    scenario = dataclasses.replace(
        default_scenario(),
        demand_means_kwh=(50.0,),
        demand_stds_kwh=(25.0,),
        arrival_rates_per_h=(2.0,),
        n_trajectories=33,
    )
    out = tmp_path_factory.mktemp("acceptance-ensemble")
    result = run_ensemble(scenario, out, workers=2)
    out_dir = Path(result.out_dir)
    reports = {
        kind: MetricReport.from_json(
            (out_dir / f"metrics_{kind}.json").read_text()
        )
        for kind in ("lshippp", "cppp")
    }
    with (out_dir / "cells.csv").open(newline="") as fh:
        cells = {row["kind"]: row for row in csv.DictReader(fh)}
    return reports, cells


# ---------------------------------------------------------------------------
# 1. Headline utilization at R = 0.2


def test_criterion_1_headline_utilization(tradeoff_points):
    with criterion(1, "headline utilization at R=0.2"):
        ls = tradeoff_points["lshippp"][0.2].utilization_mean
        c = tradeoff_points["cppp"][0.2].utilization_mean
        f = tradeoff_points["fpp"][0.2].utilization_mean
        assert ls >= 0.90, f"sparse-hierarchical mean {ls:.4f} < 0.90"
        assert 0.70 <= c <= 0.85, f"adjacent-ladder mean {c:.4f} outside band"
        assert 0.18 <= f <= 0.28, f"dedicated mean {f:.4f} outside band"


# ---------------------------------------------------------------------------
# 2. Dominance ordering across the rating sweep


def test_criterion_2_dominance_ordering(tradeoff_points):
    with criterion(2, "utilization dominance over R sweep"):
        for r in R_GRID:
            ls = tradeoff_points["lshippp"][r].utilization_mean
            c = tradeoff_points["cppp"][r].utilization_mean
            f = tradeoff_points["fpp"][r].utilization_mean
            assert ls >= c - 1e-12, f"R={r}: {ls:.4f} < {c:.4f}"
            assert c >= f - 1e-12, f"R={r}: {c:.4f} < {f:.4f}"
            if r <= 0.3:
                assert ls > c, f"R={r}: ordering not strict ({ls} vs {c})"
                assert c > f, f"R={r}: ordering not strict ({c} vs {f})"


# ---------------------------------------------------------------------------
# 3. System efficiency closed form


def test_criterion_3_system_efficiency():
    with criterion(3, "system efficiency closed form"):
        assert system_efficiency(0.85, 0.15) == 0.9775
        assert system_efficiency(0.85, 1.0) == 0.85


# ---------------------------------------------------------------------------
# 4. LP versus vertex-enumeration oracle


def test_criterion_4_lp_oracle_equivalence():
    def chain(cap: float) -> FlowNetwork:
        return FlowNetwork(
            tuple(BatteryModule(c, 1.0) for c in (3.0, 4.0, 5.0)),
            (ConverterEdge(0, 1, cap), ConverterEdge(1, 2, cap)),
        )

    with criterion(4, "flow LP matches vertex enumeration"):
        assert max_deliverable_energy(chain(1.0)).total_output == pytest.approx(
            12.0, abs=TOL
        )
        assert max_deliverable_energy(chain(0.5)).total_output == pytest.approx(
            10.5, abs=TOL
        )
        rng = np.random.Generator(
            np.random.Philox(key=derive_seed(20240915, "acceptance-oracle"))
        )
        for _ in range(200):
            net = random_network(rng)
            got = max_deliverable_energy(net).total_output
            want = vertex_oracle(net)
            assert got == pytest.approx(want, rel=1e-8, abs=1e-8)


# ---------------------------------------------------------------------------
# 5. Invariant property suite (>= 1000 randomized cases each)


def _module_strategy(min_n=2, max_n=4):
    return st.integers(min_n, max_n).flatmap(
        lambda n: st.tuples(
            st.lists(
                st.floats(0.0, 10.0, allow_nan=False), min_size=n, max_size=n
            ),
            st.lists(
                st.sampled_from([0.5, 1.0, 2.0]), min_size=n, max_size=n
            ),
        )
    )


def _edges_for(n, caps_range=(0.0, 5.0)):
    pairs = list(itertools.combinations(range(n), 2))
    return st.lists(st.sampled_from(pairs), max_size=3, unique=True).flatmap(
        lambda chosen: st.tuples(
            st.just(chosen),
            st.lists(
                st.floats(*caps_range, allow_nan=False),
                min_size=len(chosen),
                max_size=len(chosen),
            ),
        )
    )


def _network_with_edges():
    return _module_strategy().flatmap(
        lambda mv: _edges_for(len(mv[0])).map(
            lambda ec: FlowNetwork(
                tuple(
                    BatteryModule(c, v) for c, v in zip(mv[0], mv[1])
                ),
                tuple(
                    ConverterEdge(i, j, cap)
                    for (i, j), cap in zip(ec[0], ec[1])
                ),
            )
        )
    )


@settings(max_examples=1000)
@given(net=_network_with_edges())
def prop_flow_conservation(net):
    sol = max_deliverable_energy(net)
    assert sum(sol.extraction) == pytest.approx(sol.total_output, abs=1e-6)
    outflow = [0.0] * len(net.batteries)
    for edge, flow in zip(net.converter_edges, sol.edge_flows):
        outflow[edge.from_battery] += flow
        outflow[edge.to_battery] -= flow
        assert abs(flow) <= edge.energy_cap_kwh + TOL
    for j, battery in enumerate(net.batteries):
        assert sol.extraction[j] == pytest.approx(
            sol.string_energy[j] + outflow[j], abs=1e-7
        )
        assert sol.extraction[j] <= battery.capacity_kwh + TOL


@settings(max_examples=1000)
@given(data=_module_strategy(), n_zero_edges=st.integers(0, 3))
def prop_zero_cap_matches_series_string(data, n_zero_edges):
    caps, volts = data
    batteries = tuple(BatteryModule(c, v) for c, v in zip(caps, volts))
    pairs = list(itertools.combinations(range(len(caps)), 2))
    edges = tuple(
        ConverterEdge(i, j, 0.0) for i, j in pairs[:n_zero_edges]
    )
    got = max_deliverable_energy(FlowNetwork(batteries, edges)).total_output
    charge = min(b.capacity_kwh / b.voltage_v for b in batteries)
    want = charge * sum(b.voltage_v for b in batteries)
    assert got == pytest.approx(want, abs=1e-7)


@settings(max_examples=1000)
@given(data=_module_strategy())
def prop_saturated_caps_reach_full_energy(data):
    caps, volts = data
    batteries = tuple(BatteryModule(c, v) for c, v in zip(caps, volts))
    big = sum(caps) + 1.0
    edges = tuple(
        ConverterEdge(j, j + 1, big) for j in range(len(caps) - 1)
    )
    got = max_deliverable_energy(FlowNetwork(batteries, edges)).total_output
    assert got == pytest.approx(sum(caps), abs=1e-6)


@settings(max_examples=1000)
@given(net=_network_with_edges(), scale=st.floats(0.0, 1.0, allow_nan=False))
def prop_cap_monotonicity(net, scale):
    shrunk = FlowNetwork(
        net.batteries,
        tuple(
            ConverterEdge(e.from_battery, e.to_battery, e.energy_cap_kwh * scale)
            for e in net.converter_edges
        ),
    )
    full = max_deliverable_energy(net).total_output
    small = max_deliverable_energy(shrunk).total_output
    assert small <= full + 1e-7


@settings(max_examples=1000)
@given(
    pack_seed=st.integers(0, 2**32 - 1),
    lambda_h=st.floats(0.0, 3.0, allow_nan=False),
)
def prop_sparse_layer_flows_within_ratings(pack_seed, lambda_h):
    scenario = default_scenario()
    expected = flatten_distribution(scenario.supply, scenario.n_modules)
    layer1 = design_layer1(expected, scenario.n_layer1, 2.25)
    modules = sample_pack(scenario.supply, scenario.n_modules, pack_seed)
    net = build_lshippp(modules, layer1, lambda_h, 2.25)
    sol = max_deliverable_energy(net)
    cap1 = layer1.rating_kw * 2.25
    cap2 = lambda_h * len(layer1.edges) * cap1 / (len(modules) - 1)
    for edge, flow in zip(net.converter_edges, sol.edge_flows):
        limit = cap1 if edge.layer == SPARSE_LAYER else cap2
        assert abs(flow) <= limit + 1e-7


@settings(max_examples=1000)
@given(
    capacity=st.floats(0.0, 100.0, allow_nan=False),
    grid=st.floats(0.0, 200.0, allow_nan=False),
    demand=st.floats(0.0, 300.0, allow_nan=False),
    charger=st.floats(1.0, 300.0, allow_nan=False),
    bess_power=st.floats(0.0, 300.0, allow_nan=False),
)
def prop_cycle_energy_balance(capacity, grid, demand, charger, bess_power):
    phases = evaluate_cycle(capacity, grid, demand, charger, bess_power)
    served = (
        phases.full_power_kw * phases.full_h
        + min(grid, charger) * phases.curtailed_h
    )
    assert served + phases.unmet_kwh == pytest.approx(demand, rel=1e-9, abs=1e-9)
    assert phases.bess_delivered_kwh <= capacity + 1e-9
    assert phases.bess_delivered_kwh == pytest.approx(
        phases.bess_kw * phases.full_h, rel=1e-9, abs=1e-9
    )


@settings(max_examples=1000)
@given(
    seed=st.integers(0, 2**32 - 1),
    capacity=st.floats(1.0, 60.0, allow_nan=False),
    grid=st.floats(0.0, 120.0, allow_nan=False),
    rate=st.floats(0.25, 4.0, allow_nan=False),
    mean=st.floats(5.0, 80.0, allow_nan=False),
    std=st.floats(0.0, 40.0, allow_nan=False),
)
def prop_storage_full_at_cycle_start(seed, capacity, grid, rate, mean, std):
    day = simulate_day(
        BessMonolith.full(capacity, 150.0),
        GridProfile.constant(grid),
        ArrivalModel(rate),
        DemandModel(mean, std),
        150.0,
        24.0,
        seed,
    )
    assert day.bess_kwh[0] == pytest.approx(capacity)
    for cycle in day.cycles:
        # Starting from full is only possible if the previous service and
        # recharge both finished; delivered energy can then never exceed
        # one full capacity.
        assert cycle.bess_delivered_kwh <= capacity + 1e-9
    for prev, nxt in zip(day.cycles, day.cycles[1:]):
        end = prev.start_h + prev.full_h + prev.curtailed_h + prev.recharge_h
        assert nxt.start_h >= end - 1e-9


def test_criterion_5_invariant_suite():
    with criterion(5, "randomized invariant suite"):
        prop_flow_conservation()
        prop_zero_cap_matches_series_string()
        prop_saturated_caps_reach_full_energy()
        prop_cap_monotonicity()
        prop_sparse_layer_flows_within_ratings()
        prop_cycle_energy_balance()
        prop_storage_full_at_cycle_start()


# ---------------------------------------------------------------------------
# 6. Search-space count


def test_criterion_6_search_space_count():
    with criterion(6, "sparse placement count"):
        placements = enumerate_placements(9, 3, 8)
        assert len(placements) == 7140
        assert len(placements) == math.comb(36, 3)


# ---------------------------------------------------------------------------
# 7. Derating and captured value


def test_criterion_7_derating_and_captured_value(exemplar_ensemble):
    with criterion(7, "derating and captured value"):
        reports, _ = exemplar_ensemble
        ls = reports["lshippp"].values
        c = reports["cppp"].values
        assert ls["derating_factor"] > c["derating_factor"]
        assert ls["captured_value_kwh"] > c["captured_value_kwh"]
        assert abs(ls["captured_fraction"] - 0.798) <= 0.08, (
            f"sparse-hierarchical captured fraction {ls['captured_fraction']:.3f}"
        )
        assert abs(c["captured_fraction"] - 0.510) <= 0.08, (
            f"adjacent-ladder captured fraction {c['captured_fraction']:.3f}"
        )


# ---------------------------------------------------------------------------
# 8. Curtailed charging time


def test_criterion_8_curtailed_charging(exemplar_ensemble):
    with criterion(8, "curtailed charging minutes"):
        _, cells = exemplar_ensemble
        ls = float(cells["lshippp"]["curtailed_mean_min"])
        c = float(cells["cppp"]["curtailed_mean_min"])
        assert c >= 1.4 * ls, f"ratio {c / ls:.3f} below 1.4"
        assert abs(ls - 15.0) <= 10.0, f"sparse-hierarchical mean {ls:.2f} min"
        assert abs(c - 25.0) <= 10.0, f"adjacent-ladder mean {c:.2f} min"


# ---------------------------------------------------------------------------
# 9. Byte-level determinism


def _tree_digest(root: Path) -> dict:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "byte-identical reruns and worker counts"):
        scenario = dataclasses.replace(
            default_scenario(),
            demand_means_kwh=(50.0,),
            demand_stds_kwh=(25.0,),
            arrival_rates_per_h=(2.0,),
            r_grid=(0.15, 0.3),
            n_packs=6,
            n_trajectories=8,
        )
        runs = [
            run_ensemble(scenario, tmp_path / "e1", workers=1),
            run_ensemble(scenario, tmp_path / "e2", workers=1),
            run_ensemble(scenario, tmp_path / "e3", workers=3),
        ]
        digests = [_tree_digest(Path(r.out_dir)) for r in runs]
        assert digests[0] == digests[1], "rerun differs"
        assert digests[0] == digests[2], "worker count changed the bytes"
        t1 = run_tradeoff(scenario, tmp_path / "t1", workers=1)
        t2 = run_tradeoff(scenario, tmp_path / "t2", workers=2)
        assert _tree_digest(Path(t1.out_dir)) == _tree_digest(Path(t2.out_dir))
