"""Study drivers behind the CLI: design, tradeoff, day, ensemble.

Every study takes a :class:`~besspp.scenario.Scenario` and an output
directory, writes its artifacts (CSV tables, JSON reports) plus a
``manifest.json`` that fingerprints the scenario and hashes the outputs,
and returns a :class:`StudyResult`.

Determinism contract: all randomness flows from the scenario seed through
``derive_seed`` labels, work is split into tasks whose results do not
depend on scheduling, and floats are serialized with ``repr``.  Running a
study twice with the same scenario, or with different worker counts,
produces byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

import besspp
from besspp.architectures import (
    ArchitectureKind,
    build_cppp,
    build_fpp,
    build_lshippp_for_budget,
    validate_network,
)
from besspp.designer import (
    Layer1Design,
    derive_seed,
    design_layer1,
    design_layer2,
    tradeoff_curve,
)
from besspp.metrics import (
    MetricReport,
    captured_value,
    derating_factor,
    grid_ev_energy_gap,
    system_efficiency,
)
from besspp.plaza import (
    ArrivalModel,
    BessMonolith,
    DemandModel,
    GridProfile,
    curtailed_minutes_per_ev,
    effective_capacity,
    evaluate_cycle,
    simulate_day,
)
from besspp.scenario import Scenario, scenario_to_dict
from besspp.supply import flatten_distribution, sample_pack

__all__ = [
    "StudyResult",
    "scenario_fingerprint",
    "run_design",
    "run_tradeoff",
    "run_day",
    "run_ensemble",
    "validate_scenario",
]

TRADEOFF_HEADER = (
    "kind",
    "R",
    "lambda_h",
    "util_mean",
    "util_std",
    "util_idr",
    "util_p10",
    "util_p90",
)
TRAJECTORY_HEADER = ("t", "p_grid", "p_bess", "e_bess", "p_ev")
DAY_HORIZON_H = 24.0


@dataclass(frozen=True)
class StudyResult:
    study: str
    out_dir: Path
    files: tuple[str, ...]


# ---------------------------------------------------------------------------
# serialization helpers


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def scenario_fingerprint(scenario: Scenario) -> str:
    canonical = json.dumps(
        scenario_to_dict(scenario), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _finish(
    study: str, scenario: Scenario, out_dir: Path, files: list[str]
) -> StudyResult:
    manifest = {
        "study": study,
        "tool_version": besspp.__version__,
        "seed": scenario.seed,
        "scenario_sha256": scenario_fingerprint(scenario),
        "scenario": scenario_to_dict(scenario),
        "outputs": {name: _file_sha256(out_dir / name) for name in sorted(files)},
    }
    _write_json(out_dir / "manifest.json", manifest)
    return StudyResult(study, out_dir, tuple(sorted(files) + ["manifest.json"]))


def _parallel_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# design study


def run_design(scenario: Scenario, out_dir, workers: int = 1) -> StudyResult:
    """Design the sparse layer, then sweep the adjacent-ladder ratio."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    expected = flatten_distribution(scenario.supply, scenario.n_modules)
    horizon = scenario.design_horizon_h
    layer1 = design_layer1(expected, scenario.n_layer1, horizon)

    design_doc = {
        "n_modules": layer1.n_batteries,
        "n_layer1": len(layer1.edges),
        "edges": [list(e) for e in layer1.edges],
        "optimal_flows_kwh": list(layer1.optimal_flows_kwh),
        "rating_kw": layer1.rating_kw,
        "horizon_h": layer1.horizon_h,
        "expected_output_kwh": layer1.expected_output_kwh,
        "expected_utilization": layer1.expected_output_kwh / expected.total_kwh,
        "expected_module_kwh": [b.capacity_kwh for b in expected.batteries],
    }
    _write_json(out_dir / "design.json", design_doc)

    points = design_layer2(
        layer1,
        scenario.supply,
        list(scenario.lambda_grid),
        scenario.n_packs,
        derive_seed(scenario.seed, "design-packs"),
    )
    _write_csv(
        out_dir / "lambda_sweep.csv",
        TRADEOFF_HEADER,
        [_point_row(p) for p in points],
    )
    files = ["design.json", "lambda_sweep.csv"]
    return _finish("design", scenario, out_dir, files)


def _point_row(point) -> tuple:
    return (
        point.kind,
        point.rating_r,
        point.lambda_h,
        point.utilization_mean,
        point.utilization_std,
        point.utilization_idr,
        point.utilization_p10,
        point.utilization_p90,
    )


# ---------------------------------------------------------------------------
# tradeoff study


def _tradeoff_task(args) -> list[tuple]:
    (kind, dist, r, n_packs, seed, n_modules, n_layer1, horizon, layer1) = args
    points = tradeoff_curve(
        kind,
        dist,
        [r],
        n_packs,
        seed,
        n_modules=n_modules,
        n_layer1=n_layer1,
        horizon_h=horizon,
        layer1=layer1,
    )
    return [_point_row(p) for p in points]


def run_tradeoff(scenario: Scenario, out_dir, workers: int = 1) -> StudyResult:
    """Utilization-versus-rating curves for every architecture family."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    expected = flatten_distribution(scenario.supply, scenario.n_modules)
    horizon = scenario.design_horizon_h
    layer1 = design_layer1(expected, scenario.n_layer1, horizon)
    pack_seed = derive_seed(scenario.seed, "tradeoff-packs")

    kinds = []
    for config in scenario.architectures:
        if config.kind not in kinds:
            kinds.append(config.kind)
    tasks = [
        (
            kind.value,
            scenario.supply,
            r,
            scenario.n_packs,
            pack_seed,
            scenario.n_modules,
            scenario.n_layer1,
            horizon,
            layer1 if kind is ArchitectureKind.LSHIPPP else None,
        )
        for kind in kinds
        for r in scenario.r_grid
    ]
    rows: list[tuple] = []
    for chunk in _parallel_map(_tradeoff_task, tasks, workers):
        rows.extend(chunk)
    _write_csv(out_dir / "tradeoff.csv", TRADEOFF_HEADER, rows)
    return _finish("tradeoff", scenario, out_dir, ["tradeoff.csv"])


# ---------------------------------------------------------------------------
# plaza studies (day, ensemble)


@dataclass(frozen=True)
class _PlazaSetup:
    """Per-kind effective capacities for the sampled plaza packs."""

    horizon_h: float
    expected_total_kwh: float
    pack_totals: tuple[float, ...]
    capacities: dict[str, tuple[float, ...]]
    lambda_by_kind: dict[str, float]


def _plaza_setup(scenario: Scenario) -> _PlazaSetup:
    plaza = scenario.plaza
    n = scenario.n_modules
    expected = flatten_distribution(plaza.supply, n)
    horizon = expected.total_kwh / plaza.bess_power_kw
    layer1 = design_layer1(expected, scenario.n_layer1, horizon)
    packs = [
        sample_pack(plaza.supply, n, derive_seed(scenario.seed, "plaza-pack", i))
        for i in range(scenario.n_packs)
    ]
    capacities: dict[str, tuple[float, ...]] = {}
    lambdas: dict[str, float] = {}
    for kind in plaza.kinds:
        caps = []
        lam = math.nan
        for pack in packs:
            if kind is ArchitectureKind.FPP:
                net = build_fpp(
                    pack, plaza.rating_r, horizon,
                    budget_basis_kwh=expected.total_kwh,
                )
            elif kind is ArchitectureKind.CPPP:
                net = build_cppp(
                    pack, plaza.rating_r, horizon,
                    budget_basis_kwh=expected.total_kwh,
                )
            else:
                net, lam = build_lshippp_for_budget(
                    pack, layer1, plaza.rating_r, horizon,
                    budget_basis_kwh=expected.total_kwh,
                )
            caps.append(effective_capacity(net))
        capacities[kind.value] = tuple(caps)
        lambdas[kind.value] = lam
    return _PlazaSetup(
        horizon_h=horizon,
        expected_total_kwh=expected.total_kwh,
        pack_totals=tuple(sum(b.capacity_kwh for b in pack) for pack in packs),
        capacities=capacities,
        lambda_by_kind=lambdas,
    )


def run_day(
    scenario: Scenario, out_dir, workers: int = 1, kinds=None
) -> StudyResult:
    """One exemplar day per architecture kind, on a common sampled pack.

    All kinds replay the same arrival and demand stream against the same
    pack; only the effective monolith capacity differs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plaza = scenario.plaza
    setup = _plaza_setup(scenario)
    if kinds is None:
        kinds = [k.value for k in plaza.kinds]
    else:
        known = {k.value for k in plaza.kinds}
        unknown = [k for k in kinds if k not in known]
        if unknown:
            raise ValueError(
                f"kinds {unknown} are not part of the scenario plaza roster"
            )

    day_seed = derive_seed(scenario.seed, "day")
    files: list[str] = []
    for kind in kinds:
        capacity = setup.capacities[kind][0]
        bess = BessMonolith.full(capacity, plaza.bess_power_kw)
        trajectory = simulate_day(
            bess,
            scenario.grid_profile,
            ArrivalModel(plaza.exemplar_rate_per_h),
            plaza.exemplar_demand,
            plaza.charger_max_kw,
            DAY_HORIZON_H,
            day_seed,
        )
        csv_name = f"day_{kind}.csv"
        json_name = f"day_{kind}.json"
        _write_csv(
            out_dir / csv_name,
            TRAJECTORY_HEADER,
            zip(
                (float(v) for v in trajectory.time_h),
                (float(v) for v in trajectory.grid_kw),
                (float(v) for v in trajectory.bess_kw),
                (float(v) for v in trajectory.bess_kwh),
                (float(v) for v in trajectory.ev_kw),
            ),
        )
        stats = curtailed_minutes_per_ev(trajectory)
        _write_json(
            out_dir / json_name,
            {
                "kind": kind,
                "effective_capacity_kwh": capacity,
                "pack_total_kwh": setup.pack_totals[0],
                "horizon_h": trajectory.horizon_h,
                "dropped_arrivals": trajectory.dropped_arrivals,
                "n_cycles": len(trajectory.cycles),
                "curtailed_mean_min": stats.mean_min,
                "curtailed_max_min": stats.max_min,
                "cycles": [
                    {
                        "index": c.index,
                        "start_h": c.start_h,
                        "demand_kwh": c.demand_kwh,
                        "grid_kw": c.grid_kw,
                        "full_power_kw": c.full_power_kw,
                        "full_h": c.full_h,
                        "curtailed_h": c.curtailed_h,
                        "bess_delivered_kwh": c.bess_delivered_kwh,
                        "recharge_h": c.recharge_h,
                        "unmet_kwh": c.unmet_kwh,
                        "truncated": c.truncated,
                    }
                    for c in trajectory.cycles
                ],
            },
        )
        files.extend([csv_name, json_name])
    return _finish("day", scenario, out_dir, files)


DISPERSION_HEADER = (
    "kind",
    "interval",
    "start_h",
    "demand_kwh",
    "grid_kw",
    "gap_kwh",
    "util_mean",
    "util_std",
    "util_idr",
    "util_p10",
    "util_p90",
    "derating",
)

CELLS_HEADER = (
    "kind",
    "demand_mean_kwh",
    "demand_std_kwh",
    "arrival_rate_per_h",
    "n_trajectories",
    "n_cycles",
    "util_mean",
    "curtailed_mean_min",
    "curtailed_max_min",
    "unmet_mean_kwh",
    "dropped_mean",
    "served_mean",
)


def _reference_schedule(scenario: Scenario) -> list[tuple[float, float, float]]:
    """Exemplar charging intervals from an unconstrained reference day.

    Simulated with an effectively unlimited storage unit so the schedule
    depends only on the scenario (grid, arrivals, demands), never on the
    architecture under test.  Returns ``(start_h, grid_kw, demand_kwh)``
    per completed cycle.
    """
    plaza = scenario.plaza
    reference = BessMonolith.full(math.inf, plaza.bess_power_kw)
    trajectory = simulate_day(
        reference,
        scenario.grid_profile,
        ArrivalModel(plaza.exemplar_rate_per_h),
        plaza.exemplar_demand,
        plaza.charger_max_kw,
        DAY_HORIZON_H,
        derive_seed(scenario.seed, "exemplar-day"),
    )
    return [
        (c.start_h, c.grid_kw, c.demand_kwh)
        for c in trajectory.cycles
        if not c.truncated and c.demand_kwh > 0
    ]


def _dispersion_rows(
    scenario: Scenario, setup: _PlazaSetup
) -> tuple[list[tuple], dict[str, MetricReport]]:
    plaza = scenario.plaza
    schedule = _reference_schedule(scenario)
    if not schedule:
        raise RuntimeError("exemplar day produced no charging intervals")
    gaps = [
        grid_ev_energy_gap(demand, grid_kw, demand / plaza.charger_max_kw)
        for _, grid_kw, demand in schedule
    ]
    worst = int(np.argmax(gaps))

    rows: list[tuple] = []
    reports: dict[str, MetricReport] = {}
    for kind in (k.value for k in plaza.kinds):
        caps = setup.capacities[kind]
        worst_stats: dict[str, float] = {}
        for k_int, (start_h, grid_kw, demand) in enumerate(schedule):
            utils = np.empty(len(caps))
            for i, cap in enumerate(caps):
                phases = evaluate_cycle(
                    cap, grid_kw, demand, plaza.charger_max_kw,
                    plaza.bess_power_kw,
                )
                utils[i] = phases.bess_delivered_kwh / setup.pack_totals[i]
            mean = float(utils.mean())
            p10 = float(np.quantile(utils, 0.1))
            p90 = float(np.quantile(utils, 0.9))
            rating = derating_factor(utils) if mean > 0 else math.nan
            rows.append(
                (
                    kind,
                    k_int,
                    start_h,
                    demand,
                    grid_kw,
                    gaps[k_int],
                    mean,
                    float(utils.std()),
                    p90 - p10,
                    p10,
                    p90,
                    rating,
                )
            )
            if k_int == worst:
                worst_stats = {
                    "derating_factor": rating,
                    "utilization_at_worst_gap": mean,
                    "utilization_idr_at_worst_gap": p90 - p10,
                    "worst_gap_kwh": gaps[k_int],
                    "worst_interval_start_h": start_h,
                }
        d_f = worst_stats["derating_factor"]
        u_e = worst_stats["utilization_at_worst_gap"]
        captured = (
            captured_value(d_f, min(u_e, 1.0), setup.expected_total_kwh)
            if not math.isnan(d_f)
            else math.nan
        )
        eta = next(
            (
                system_efficiency(c.eta_c, c.rating_r)
                for c in scenario.architectures
                if c.kind.value == kind
            ),
            math.nan,
        )
        reports[kind] = MetricReport(
            study=f"ensemble-dispersion-{kind}",
            values={
                **worst_stats,
                "captured_value_kwh": captured,
                "captured_fraction": d_f * u_e,
                "system_efficiency": eta,
                "n_intervals": float(len(schedule)),
                "n_packs": float(len(caps)),
            },
            units={
                "derating_factor": "fraction",
                "utilization_at_worst_gap": "fraction",
                "utilization_idr_at_worst_gap": "fraction",
                "worst_gap_kwh": "kWh",
                "worst_interval_start_h": "h",
                "captured_value_kwh": "kWh",
                "captured_fraction": "fraction",
                "system_efficiency": "fraction",
            },
        )
    return rows, reports


def _cell_task(args) -> tuple:
    (
        kind,
        mean,
        std,
        rate,
        n_traj,
        seed,
        capacities,
        pack_totals,
        grid_segments,
        charger_kw,
        bess_kw,
    ) = args
    grid = GridProfile(grid_segments)
    demand = DemandModel(mean_kwh=mean, std_kwh=std)
    arrivals = ArrivalModel(rate)
    n_packs = len(capacities)

    n_cycles = 0
    utils: list[float] = []
    curtailed: list[float] = []
    unmet_by_traj = np.zeros(n_traj)
    dropped = np.zeros(n_traj)
    served = np.zeros(n_traj)
    for t in range(n_traj):
        pack_idx = t % n_packs
        bess = BessMonolith.full(capacities[pack_idx], bess_kw)
        trajectory = simulate_day(
            bess, grid, arrivals, demand, charger_kw, DAY_HORIZON_H,
            derive_seed(seed, "traj", mean, std, rate, t),
        )
        curtailed.extend(
            c.curtailed_h * 60.0 for c in trajectory.cycles if not c.truncated
        )
        for c in trajectory.cycles:
            if not c.truncated:
                n_cycles += 1
                utils.append(c.bess_delivered_kwh / pack_totals[pack_idx])
        unmet_by_traj[t] = sum(c.unmet_kwh for c in trajectory.cycles)
        dropped[t] = trajectory.dropped_arrivals
        served[t] = len(trajectory.cycles)

    return (
        kind,
        mean,
        std,
        rate,
        n_traj,
        n_cycles,
        float(np.mean(utils)) if utils else math.nan,
        float(np.mean(curtailed)) if curtailed else math.nan,
        float(np.max(curtailed)) if curtailed else math.nan,
        float(unmet_by_traj.mean()),
        float(dropped.mean()),
        float(served.mean()),
    )


def run_ensemble(scenario: Scenario, out_dir, workers: int = 1) -> StudyResult:
    """Dispersion statistics plus the stochastic service-cell sweep."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plaza = scenario.plaza
    setup = _plaza_setup(scenario)

    rows, reports = _dispersion_rows(scenario, setup)
    _write_csv(out_dir / "dispersion.csv", DISPERSION_HEADER, rows)
    files = ["dispersion.csv"]
    for kind, report in reports.items():
        name = f"metrics_{kind}.json"
        (out_dir / name).write_text(report.to_json() + "\n")
        files.append(name)

    cells = [
        (mean, std, rate)
        for mean in scenario.demand_means_kwh
        for std in scenario.demand_stds_kwh
        for rate in scenario.arrival_rates_per_h
    ]
    per_cell = max(1, scenario.n_trajectories // len(cells))
    traj_seed = derive_seed(scenario.seed, "ensemble")
    tasks = [
        (
            kind.value,
            mean,
            std,
            rate,
            per_cell,
            traj_seed,
            setup.capacities[kind.value],
            setup.pack_totals,
            scenario.grid_profile.segments,
            plaza.charger_max_kw,
            plaza.bess_power_kw,
        )
        for kind in plaza.kinds
        for (mean, std, rate) in cells
    ]
    cell_rows = _parallel_map(_cell_task, tasks, workers)
    _write_csv(out_dir / "cells.csv", CELLS_HEADER, cell_rows)
    files.append("cells.csv")
    return _finish("ensemble", scenario, out_dir, files)


def validate_scenario(scenario: Scenario) -> list[str]:
    """Structural check of every architecture the scenario will build."""
    problems: list[str] = []
    expected = flatten_distribution(scenario.supply, scenario.n_modules)
    horizon = scenario.design_horizon_h
    layer1 = design_layer1(expected, scenario.n_layer1, horizon)
    for config in scenario.architectures:
        if config.n_modules != scenario.n_modules:
            problems.append(
                f"{config.kind.value}: n_modules {config.n_modules} does not "
                f"match the supply ({scenario.n_modules})"
            )
            continue
        if config.kind is ArchitectureKind.FPP:
            net = build_fpp(expected.batteries, config.rating_r, horizon)
        elif config.kind is ArchitectureKind.CPPP:
            net = build_cppp(expected.batteries, config.rating_r, horizon)
        else:
            net, _ = build_lshippp_for_budget(
                expected.batteries, layer1, config.rating_r, horizon
            )
        problems.extend(
            f"{config.kind.value}: {issue}" for issue in validate_network(net)
        )
    return problems
