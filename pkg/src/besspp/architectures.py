"""Converter-network architectures for a second-use pack.

Three families are supported, all normalized by the same converter budget
rule ``R = P * T / E`` (aggregate converter power times discharge horizon
over intrinsic pack energy):

* ``fpp``      - full power processing: one dedicated converter per module,
                 no series string; every module's output is individually
                 capped.
* ``cppp``     - conventional partial power processing: a ladder of
                 converters between adjacent modules in the string, budget
                 split evenly over the N-1 rungs.
* ``lshippp``  - lite-sparse hierarchical partial power processing: a small
                 designed set of high-impact module-to-module converters
                 (layer 1) plus a cheap adjacent ladder (layer 2) whose
                 aggregate rating is ``lambda_h`` times layer 1's.

Converter energy caps are sized from a reference (expected) pack so that
hardware is identical across Monte Carlo packs; pass ``budget_basis_kwh``
to pin that reference when evaluating sampled packs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from besspp.flows import ConverterEdge, FlowNetwork
from besspp.supply import BatteryModule

if TYPE_CHECKING:  # pragma: no cover
    from besspp.designer import Layer1Design

__all__ = [
    "ArchitectureKind",
    "ArchitectureConfig",
    "ConfigurationError",
    "build_fpp",
    "build_cppp",
    "build_lshippp",
    "build_lshippp_for_budget",
    "validate_network",
]

SPARSE_LAYER = 1
ADJACENT_LAYER = 2


class ConfigurationError(ValueError):
    """Architecture parameters are inconsistent."""


class ArchitectureKind(str, Enum):
    FPP = "fpp"
    CPPP = "cppp"
    LSHIPPP = "lshippp"


@dataclass(frozen=True)
class ArchitectureConfig:
    """Declarative architecture description, one-to-one with scenario JSON."""

    kind: ArchitectureKind
    n_modules: int
    rating_r: float
    eta_c: float = 1.0
    n_layer1: int | None = None
    lambda_h: float | None = None
    horizon_h: float | None = None

    def __post_init__(self) -> None:
        kind = ArchitectureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.n_modules < 2:
            raise ConfigurationError("n_modules must be >= 2")
        if self.rating_r < 0:
            raise ConfigurationError("rating_r must be >= 0")
        if not 0 < self.eta_c <= 1:
            raise ConfigurationError("eta_c must be in (0, 1]")
        if self.lambda_h is not None and self.lambda_h < 0:
            raise ConfigurationError("lambda_h must be >= 0")
        if self.horizon_h is not None and self.horizon_h <= 0:
            raise ConfigurationError("horizon_h must be positive")
        if kind is ArchitectureKind.LSHIPPP:
            if self.n_layer1 is None or not 1 <= self.n_layer1 < self.n_modules:
                raise ConfigurationError(
                    "lshippp needs n_layer1 with 1 <= n_layer1 < n_modules"
                )
        elif self.n_layer1 is not None:
            raise ConfigurationError(f"{kind.value} takes no n_layer1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_modules": self.n_modules,
            "n_layer1": self.n_layer1,
            "lambda_h": self.lambda_h,
            "rating_r": self.rating_r,
            "eta_c": self.eta_c,
            "horizon_h": self.horizon_h,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArchitectureConfig":
        known = {
            "kind",
            "n_modules",
            "n_layer1",
            "lambda_h",
            "rating_r",
            "eta_c",
            "horizon_h",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown architecture keys: {sorted(unknown)}")
        return cls(
            kind=ArchitectureKind(data["kind"]),
            n_modules=int(data["n_modules"]),
            rating_r=float(data["rating_r"]),
            eta_c=float(data.get("eta_c", 1.0)),
            n_layer1=None if data.get("n_layer1") is None else int(data["n_layer1"]),
            lambda_h=None if data.get("lambda_h") is None else float(data["lambda_h"]),
            horizon_h=None
            if data.get("horizon_h") is None
            else float(data["horizon_h"]),
        )


def _budget_kwh(
    batteries: tuple[BatteryModule, ...],
    rating_r: float,
    budget_basis_kwh: float | None,
) -> float:
    basis = (
        budget_basis_kwh
        if budget_basis_kwh is not None
        else sum(b.capacity_kwh for b in batteries)
    )
    return rating_r * basis


def build_fpp(
    batteries: tuple[BatteryModule, ...],
    rating_r: float,
    horizon_h: float,
    *,
    budget_basis_kwh: float | None = None,
) -> FlowNetwork:
    """Dedicated converter per module, budget split evenly over all N."""
    n = len(batteries)
    _check_build(n, rating_r, horizon_h)
    per_converter = _budget_kwh(batteries, rating_r, budget_basis_kwh) / n
    return FlowNetwork(
        batteries=tuple(batteries),
        converter_edges=(),
        horizon_h=horizon_h,
        output_caps=(per_converter,) * n,
    )


def build_cppp(
    batteries: tuple[BatteryModule, ...],
    rating_r: float,
    horizon_h: float,
    *,
    budget_basis_kwh: float | None = None,
) -> FlowNetwork:
    """Adjacent converter ladder, budget split evenly over the N-1 rungs."""
    n = len(batteries)
    _check_build(n, rating_r, horizon_h)
    per_converter = _budget_kwh(batteries, rating_r, budget_basis_kwh) / (n - 1)
    edges = tuple(
        ConverterEdge(j, j + 1, per_converter, layer=ADJACENT_LAYER)
        for j in range(n - 1)
    )
    return FlowNetwork(tuple(batteries), edges, horizon_h)


def build_lshippp(
    batteries: tuple[BatteryModule, ...],
    layer1: "Layer1Design",
    lambda_h: float,
    horizon_h: float,
) -> FlowNetwork:
    """Sparse designed layer plus an adjacent ladder scaled by ``lambda_h``.

    All layer-1 converters carry the identical procured rating, so their
    energy caps are ``rating * horizon`` each; the ladder splits an aggregate
    of ``lambda_h`` times the layer-1 aggregate evenly over its N-1 rungs.
    """
    n = len(batteries)
    if layer1.n_batteries != n:
        raise ConfigurationError(
            f"layer-1 design is for {layer1.n_batteries} modules, pack has {n}"
        )
    if lambda_h < 0:
        raise ConfigurationError("lambda_h must be >= 0")
    if horizon_h <= 0:
        raise ConfigurationError("horizon_h must be positive")
    cap1 = layer1.rating_kw * horizon_h
    cap2 = lambda_h * (len(layer1.edges) * cap1) / (n - 1)
    return _assemble_lshippp(batteries, layer1, cap1, cap2, horizon_h)


def build_lshippp_for_budget(
    batteries: tuple[BatteryModule, ...],
    layer1: "Layer1Design",
    rating_r: float,
    horizon_h: float,
    *,
    budget_basis_kwh: float | None = None,
) -> tuple[FlowNetwork, float]:
    """Realize a total budget ``R`` over both layers; returns ``(net, lambda_h)``.

    Layer 1 is funded first.  Below its design point the layer-1 caps are
    scaled down uniformly and the ladder gets nothing; above it, the surplus
    is spread evenly over the ladder and ``lambda_h`` is the resulting
    aggregate ratio.
    """
    n = len(batteries)
    if layer1.n_batteries != n:
        raise ConfigurationError(
            f"layer-1 design is for {layer1.n_batteries} modules, pack has {n}"
        )
    _check_build(n, rating_r, horizon_h)
    budget = _budget_kwh(batteries, rating_r, budget_basis_kwh)
    m = len(layer1.edges)
    design_point = m * layer1.rating_kw * horizon_h
    if budget <= design_point:
        cap1 = budget / m
        lambda_h = 0.0
        cap2 = 0.0
    else:
        cap1 = layer1.rating_kw * horizon_h
        lambda_h = (budget - design_point) / design_point
        cap2 = (budget - design_point) / (n - 1)
    return _assemble_lshippp(batteries, layer1, cap1, cap2, horizon_h), lambda_h


def _assemble_lshippp(
    batteries: tuple[BatteryModule, ...],
    layer1: "Layer1Design",
    cap1: float,
    cap2: float,
    horizon_h: float,
) -> FlowNetwork:
    n = len(batteries)
    sparse = tuple(
        ConverterEdge(i, j, cap1, layer=SPARSE_LAYER) for i, j in layer1.edges
    )
    ladder = tuple(
        ConverterEdge(j, j + 1, cap2, layer=ADJACENT_LAYER) for j in range(n - 1)
    )
    return FlowNetwork(tuple(batteries), sparse + ladder, horizon_h)


def _check_build(n: int, rating_r: float, horizon_h: float) -> None:
    if n < 2:
        raise ConfigurationError("need at least two modules")
    if rating_r < 0:
        raise ConfigurationError("rating_r must be >= 0")
    if horizon_h <= 0:
        raise ConfigurationError("horizon_h must be positive")


def validate_network(net: FlowNetwork) -> list[str]:
    """Collect structural violations; an empty list means the network is valid."""
    problems: list[str] = []
    n = len(net.batteries)
    if n < 1:
        problems.append("network has no batteries")
    if net.horizon_h <= 0:
        problems.append(f"horizon_h must be positive, got {net.horizon_h}")
    for j, battery in enumerate(net.batteries):
        if battery.capacity_kwh < 0:
            problems.append(f"battery {j} has negative capacity")
        if battery.voltage_v <= 0:
            problems.append(f"battery {j} has nonpositive voltage")

    if net.output_caps is not None:
        if net.converter_edges:
            problems.append("dedicated-converter network must not carry edges")
        if len(net.output_caps) != n:
            problems.append(
                f"output_caps has {len(net.output_caps)} entries for {n} modules"
            )
        for j, cap in enumerate(net.output_caps):
            if cap < 0:
                problems.append(f"output cap {j} is negative")
        return problems

    seen: set[tuple[int, int, int]] = set()
    for k, edge in enumerate(net.converter_edges):
        if not (0 <= edge.from_battery < n) or not (0 <= edge.to_battery < n):
            problems.append(f"edge {k} references a module outside 0..{n - 1}")
            continue
        if edge.from_battery == edge.to_battery:
            problems.append(f"edge {k} is a self-loop on module {edge.from_battery}")
        if edge.energy_cap_kwh < 0:
            problems.append(f"edge {k} has a negative energy cap")
        if edge.layer not in (SPARSE_LAYER, ADJACENT_LAYER):
            problems.append(f"edge {k} has unknown layer tag {edge.layer}")
        key = (
            min(edge.from_battery, edge.to_battery),
            max(edge.from_battery, edge.to_battery),
            edge.layer,
        )
        if key in seen:
            problems.append(
                f"duplicate converter between modules {key[0]} and {key[1]} "
                f"in layer {key[2]}"
            )
        seen.add(key)
    return problems
