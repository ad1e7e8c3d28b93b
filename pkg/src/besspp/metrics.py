"""Evaluation metrics for pack output and plaza service quality.

Dispersion statistics use population moments (``ddof=0``) and type-7
linearly interpolated quantiles, numpy's defaults, so frozen expected
values are reproducible bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MetricReport",
    "energy_utilization",
    "normalized_rating",
    "system_efficiency",
    "interdecile_range",
    "grid_ev_energy_gap",
    "derating_factor",
    "captured_value",
]


def energy_utilization(output_kwh: float, batteries) -> float:
    """Delivered energy as a fraction of the pack's usable energy.

    ``batteries`` is either a sequence of modules or the total usable
    energy in kWh.
    """
    if isinstance(batteries, (int, float)):
        total = float(batteries)
    else:
        total = sum(b.capacity_kwh for b in batteries)
    if total <= 0:
        raise ValueError("pack usable energy must be positive")
    if output_kwh < 0:
        raise ValueError("output_kwh must be nonnegative")
    return output_kwh / total


def normalized_rating(
    aggregate_power_kw: float, energy_kwh: float, horizon_h: float
) -> float:
    """Converter budget R: aggregate rating times horizon over pack energy."""
    if energy_kwh <= 0:
        raise ValueError("energy_kwh must be positive")
    if horizon_h <= 0:
        raise ValueError("horizon_h must be positive")
    if aggregate_power_kw < 0:
        raise ValueError("aggregate_power_kw must be nonnegative")
    return aggregate_power_kw * horizon_h / energy_kwh


def system_efficiency(converter_efficiency: float, rating_r: float) -> float:
    """Storage-system efficiency when only a fraction R of power is processed.

    Converter loss applies to the processed share alone, hence
    ``1 - (1 - eta_c) * R``.  The processed share saturates at 1: surplus
    converter rating cannot touch more than all of the power.
    """
    if not 0 < converter_efficiency <= 1:
        raise ValueError("converter_efficiency must be in (0, 1]")
    if rating_r < 0:
        raise ValueError("rating_r must be nonnegative")
    return 1.0 - (1.0 - converter_efficiency) * min(rating_r, 1.0)


def interdecile_range(samples) -> float:
    """p90 - p10 with type-7 interpolation; needs at least 10 samples."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size < 10:
        raise ValueError("interdecile_range needs a flat sample of size >= 10")
    return float(np.quantile(arr, 0.9) - np.quantile(arr, 0.1))


def grid_ev_energy_gap(
    demand_kwh: float, grid_kw: float, interval_h: float
) -> float:
    """Energy the grid cannot supply over a charging interval.

    Positive when the EV wants more than the available grid power can
    deliver in the interval; the storage unit must cover it.
    """
    if demand_kwh < 0:
        raise ValueError("demand_kwh must be nonnegative")
    if interval_h < 0:
        raise ValueError("interval_h must be nonnegative")
    if grid_kw < 0:
        raise ValueError("grid_kw must be nonnegative")
    return demand_kwh - grid_kw * interval_h


def derating_factor(output_samples) -> float:
    """Three-sigma worst-case output as a fraction of the mean, in [0, 1].

    ``(mean - 3 std) / mean`` over an ensemble of output samples, clamped to
    [0, 1]; population standard deviation.
    """
    arr = np.asarray(output_samples, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("derating_factor needs a flat sample of size >= 2")
    mean = float(arr.mean())
    if mean <= 0:
        raise ValueError("derating_factor needs a positive mean output")
    raw = (mean - 3.0 * float(arr.std())) / mean
    return min(1.0, max(0.0, raw))


def captured_value(
    derating: float, utilization: float, intrinsic_kwh: float
) -> float:
    """Dependable delivered energy: derating times utilization times capacity."""
    if not 0 <= derating <= 1:
        raise ValueError("derating must be in [0, 1]")
    if not 0 <= utilization <= 1 + 1e-9:
        raise ValueError("utilization must be in [0, 1]")
    if intrinsic_kwh < 0:
        raise ValueError("intrinsic_kwh must be nonnegative")
    return derating * utilization * intrinsic_kwh


@dataclass(frozen=True)
class MetricReport:
    """Named metric values with units, JSON-serializable deterministically."""

    study: str
    values: dict[str, float] = field(default_factory=dict)
    units: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = set(self.units) - set(self.values)
        if unknown:
            raise ValueError(f"units given for unknown metrics: {sorted(unknown)}")

    def to_json(self) -> str:
        payload = {
            "study": self.study,
            "metrics": {
                name: {"value": float(value), "unit": self.units.get(name, "")}
                for name, value in self.values.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        payload = json.loads(text)
        metrics = payload["metrics"]
        return cls(
            study=payload["study"],
            values={k: float(v["value"]) for k, v in metrics.items()},
            units={k: v["unit"] for k, v in metrics.items() if v["unit"]},
        )
