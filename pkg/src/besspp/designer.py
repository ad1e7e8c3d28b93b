"""Sparse-layer design and budget tradeoff sweeps.

Layer 1 placement is an exhaustive search: for every size-``m`` set of
module pairs, solve the uncapped deliverable-energy LP on the expected
(flattened) pack and keep the set with the largest output.  Ties are broken
by the smaller peak flow and then by enumeration order, so designs are
deterministic.  The shared layer-1 converter rating is the peak optimal
flow over the discharge horizon.

Layer 2 sizing is Monte Carlo: with layer-1 flows capped at their designed
optima, sweep the ladder-to-layer-1 aggregate ratio ``lambda_h`` and record
the utilization distribution over sampled packs.

``tradeoff_curve`` evaluates any architecture family on a grid of total
normalized ratings ``R`` with common random packs, so curves for different
families are directly comparable.
"""

from __future__ import annotations

import functools
import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from besspp.architectures import (
    ArchitectureKind,
    build_cppp,
    build_fpp,
    build_lshippp_for_budget,
)
from besspp.flows import (
    ConverterEdge,
    FlowNetwork,
    max_deliverable_energy,
    min_peak_flow,
)
from besspp.supply import (
    BatteryModule,
    ExpectedSet,
    SupplyDistribution,
    flatten_distribution,
    sample_pack,
)

__all__ = [
    "Layer1Design",
    "TradeoffPoint",
    "enumerate_placements",
    "design_layer1",
    "design_layer2",
    "tradeoff_curve",
    "default_lambda_grid",
]

# Relative slack used when comparing candidate objectives during the search.
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class Layer1Design:
    """Designed sparse layer for a given pack size.

    ``optimal_flows_kwh`` are the signed per-edge flows of the minimum-peak
    solution on the expected set; ``rating_kw`` is the identical procured
    converter rating, the peak of those flows over the horizon.
    """

    n_batteries: int
    edges: tuple[tuple[int, int], ...]
    optimal_flows_kwh: tuple[float, ...]
    rating_kw: float
    expected_output_kwh: float
    horizon_h: float


@dataclass(frozen=True)
class TradeoffPoint:
    """Utilization statistics of one architecture at one budget point."""

    kind: str
    rating_r: float
    lambda_h: float
    layer2_rating_kw: float
    utilization_mean: float
    utilization_std: float
    utilization_idr: float
    utilization_p10: float
    utilization_p90: float


def enumerate_placements(
    n_batteries: int, n_edges: int, max_span: int | None = None
) -> list[tuple[tuple[int, int], ...]]:
    """All size-``n_edges`` sets of module pairs, lexicographically ordered.

    Pairs are 0-based ``(i, j)`` with ``i < j`` and ``j - i <= max_span``
    (default: unconstrained).  The search space is ``C(P, n_edges)`` where
    ``P`` is the number of admissible pairs.
    """
    if n_batteries < 2:
        raise ValueError("n_batteries must be >= 2")
    if max_span is None:
        max_span = n_batteries - 1
    if max_span < 1:
        raise ValueError("max_span must be >= 1")
    pairs = [
        (i, j)
        for i in range(n_batteries - 1)
        for j in range(i + 1, min(n_batteries, i + max_span + 1))
    ]
    if not 1 <= n_edges <= len(pairs):
        raise ValueError(
            f"n_edges must be in 1..{len(pairs)} for n_batteries={n_batteries}, "
            f"max_span={max_span}"
        )
    return list(itertools.combinations(pairs, n_edges))


# The search is deterministic in its arguments and all of them are
# hashable, so repeated designs (tradeoff, plaza, validation) hit a cache.
@functools.lru_cache(maxsize=32)
def design_layer1(
    expected: ExpectedSet,
    n_edges: int,
    horizon_h: float,
    max_span: int | None = None,
) -> Layer1Design:
    """Exhaustively place ``n_edges`` uncapped converters on the expected set.

    Keeps the placement maximizing deliverable energy; among optima, the one
    whose minimum-peak flow is smallest, and among those the first in
    enumeration order.
    """
    if horizon_h <= 0:
        raise ValueError("horizon_h must be positive")
    batteries = expected.batteries
    placements = enumerate_placements(len(batteries), n_edges, max_span)

    best_output = -math.inf
    candidates: list[tuple[tuple[int, int], ...]] = []
    for placement in placements:
        net = _uncapped_network(batteries, placement, horizon_h)
        output = max_deliverable_energy(net).total_output
        if not candidates:
            best_output = output
            candidates = [placement]
            continue
        tie = _TIE_RTOL * (1.0 + abs(best_output))
        if output > best_output + tie:
            best_output = output
            candidates = [placement]
        elif output >= best_output - tie:
            candidates.append(placement)

    best_placement = None
    best_flows: tuple[float, ...] = ()
    best_peak = math.inf
    for placement in candidates:
        net = _uncapped_network(batteries, placement, horizon_h)
        sol = min_peak_flow(net, best_output)
        peak = max((abs(f) for f in sol.edge_flows), default=0.0)
        if peak < best_peak * (1 - _TIE_RTOL) - _TIE_RTOL:
            best_peak = peak
            best_placement = placement
            best_flows = sol.edge_flows
    if best_placement is None:  # pragma: no cover - candidates is never empty
        raise RuntimeError("layer-1 search produced no candidate")

    return Layer1Design(
        n_batteries=len(batteries),
        edges=best_placement,
        optimal_flows_kwh=best_flows,
        rating_kw=best_peak / horizon_h,
        expected_output_kwh=best_output,
        horizon_h=horizon_h,
    )


def default_lambda_grid(n_points: int = 20) -> list[float]:
    """Zero plus ``n_points`` log-spaced ladder-to-layer-1 ratios in [0.05, 5]."""
    grid = np.logspace(math.log10(0.05), math.log10(5.0), n_points)
    return [0.0] + [float(v) for v in grid]


def design_layer2(
    layer1: Layer1Design,
    dist: SupplyDistribution,
    lambda_grid: list[float],
    n_packs: int,
    seed: int,
    pack_seeds: list[int] | None = None,
) -> list[TradeoffPoint]:
    """Sweep the adjacent-ladder ratio with layer-1 flows frozen at design.

    Every ``lambda_h`` is evaluated on the same sampled packs (common random
    numbers).  Layer-1 edge caps are the per-edge designed flow magnitudes,
    so no sampled pack can work a layer-1 converter past its designed duty.
    """
    if not lambda_grid:
        raise ValueError("lambda_grid must be nonempty")
    if any(lam < 0 for lam in lambda_grid):
        raise ValueError("lambda_h values must be >= 0")
    if n_packs < 1:
        raise ValueError("n_packs must be >= 1")
    n = layer1.n_batteries
    if pack_seeds is None:
        pack_seeds = [derive_seed(seed, "pack", i) for i in range(n_packs)]
    packs = [sample_pack(dist, n, s) for s in pack_seeds]
    expected_total = flatten_distribution(dist, n).total_kwh

    m = len(layer1.edges)
    horizon = layer1.horizon_h
    layer1_aggregate_kwh = m * layer1.rating_kw * horizon
    points = []
    for lam in lambda_grid:
        cap2 = lam * layer1_aggregate_kwh / (n - 1)
        utils = []
        for pack in packs:
            net = _frozen_layer1_network(pack, layer1, cap2)
            sol = max_deliverable_energy(net)
            for k, flow in enumerate(sol.edge_flows[:m]):
                limit = abs(layer1.optimal_flows_kwh[k]) + 1e-6
                if abs(flow) > limit:  # pragma: no cover - enforced by caps
                    raise RuntimeError(
                        f"layer-1 flow {flow} exceeds its designed duty"
                    )
            utils.append(sol.total_output / sum(b.capacity_kwh for b in pack))
        total_r = (1 + lam) * layer1_aggregate_kwh / expected_total
        points.append(
            _make_point(
                kind=ArchitectureKind.LSHIPPP.value,
                rating_r=total_r,
                lambda_h=lam,
                layer2_kw=cap2 / horizon,
                utils=utils,
            )
        )
    return points


def tradeoff_curve(
    kind: ArchitectureKind | str,
    dist: SupplyDistribution,
    r_grid: list[float],
    n_packs: int,
    seed: int,
    *,
    n_modules: int,
    n_layer1: int = 3,
    horizon_h: float | None = None,
    max_span: int | None = None,
    rated_power_kw: float | None = None,
    layer1: Layer1Design | None = None,
    pack_seeds: list[int] | None = None,
) -> list[TradeoffPoint]:
    """Utilization distribution versus total normalized rating ``R``.

    Packs are drawn once from ``seed`` and reused across the whole grid (and
    across families, when the caller fixes the seed), so curves share their
    random numbers.  Converter caps are sized from the expected pack, i.e.
    hardware is procured once and applied to every sampled pack.

    The discharge horizon defaults to expected pack energy over rated
    power; it only scales energy caps consistently and cancels out of every
    utilization figure.
    """
    kind = ArchitectureKind(kind)
    if not r_grid:
        raise ValueError("r_grid must be nonempty")
    if any(r < 0 for r in r_grid):
        raise ValueError("rating values must be >= 0")
    if n_packs < 1:
        raise ValueError("n_packs must be >= 1")
    expected = flatten_distribution(dist, n_modules)
    if horizon_h is None:
        power = rated_power_kw if rated_power_kw else 150.0
        horizon_h = expected.total_kwh / power
    if kind is ArchitectureKind.LSHIPPP and layer1 is None:
        layer1 = design_layer1(expected, n_layer1, horizon_h, max_span)
    if pack_seeds is None:
        pack_seeds = [derive_seed(seed, "pack", i) for i in range(n_packs)]
    packs = [sample_pack(dist, n_modules, s) for s in pack_seeds]
    basis = expected.total_kwh

    points = []
    for r in r_grid:
        lam = math.nan
        layer2_kw = 0.0
        utils = []
        for pack in packs:
            if kind is ArchitectureKind.FPP:
                net = build_fpp(pack, r, horizon_h, budget_basis_kwh=basis)
                layer2_kw = net.output_caps[0] / horizon_h
            elif kind is ArchitectureKind.CPPP:
                net = build_cppp(pack, r, horizon_h, budget_basis_kwh=basis)
                layer2_kw = net.converter_edges[0].energy_cap_kwh / horizon_h
            else:
                net, lam = build_lshippp_for_budget(
                    pack, layer1, r, horizon_h, budget_basis_kwh=basis
                )
                layer2_kw = net.converter_edges[-1].energy_cap_kwh / horizon_h
            sol = max_deliverable_energy(net)
            utils.append(sol.total_output / sum(b.capacity_kwh for b in pack))
        points.append(
            _make_point(kind.value, float(r), lam, layer2_kw, utils)
        )
    return points


def derive_seed(master: int, *parts: object) -> int:
    """Stable 128-bit stream key from a master seed and a label path."""
    text = "/".join([str(master), *(str(p) for p in parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def _uncapped_network(
    batteries: tuple[BatteryModule, ...],
    placement: tuple[tuple[int, int], ...],
    horizon_h: float,
) -> FlowNetwork:
    edges = tuple(ConverterEdge(i, j, math.inf, layer=1) for i, j in placement)
    return FlowNetwork(batteries, edges, horizon_h)


def _frozen_layer1_network(
    pack: tuple[BatteryModule, ...], layer1: Layer1Design, cap2_kwh: float
) -> FlowNetwork:
    sparse = tuple(
        ConverterEdge(i, j, abs(flow), layer=1)
        for (i, j), flow in zip(layer1.edges, layer1.optimal_flows_kwh)
    )
    ladder = tuple(
        ConverterEdge(j, j + 1, cap2_kwh, layer=2)
        for j in range(layer1.n_batteries - 1)
    )
    return FlowNetwork(pack, sparse + ladder, layer1.horizon_h)


def _make_point(
    kind: str, rating_r: float, lambda_h: float, layer2_kw: float, utils: list[float]
) -> TradeoffPoint:
    arr = np.asarray(utils, dtype=float)
    p10, p90 = (
        (float(np.quantile(arr, 0.1)), float(np.quantile(arr, 0.9)))
        if arr.size
        else (math.nan, math.nan)
    )
    return TradeoffPoint(
        kind=kind,
        rating_r=float(rating_r),
        lambda_h=float(lambda_h),
        layer2_rating_kw=float(layer2_kw),
        utilization_mean=float(arr.mean()),
        utilization_std=float(arr.std()),
        utilization_idr=p90 - p10,
        utilization_p10=p10,
        utilization_p90=p90,
    )
