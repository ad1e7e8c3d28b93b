"""Scenario configuration: one JSON document drives every study.

A scenario pins the supply distribution, the architecture roster, the
plaza environment (grid profile, charger, arrival and demand menus), the
sweep grids, the sample counts, and the master seed.  Loading never falls
back to wall-clock seeding; a scenario without a seed is invalid, so every
run is reproducible by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from besspp.architectures import ArchitectureConfig, ArchitectureKind
from besspp.designer import default_lambda_grid
from besspp.plaza import DemandModel, GridProfile
from besspp.supply import SupplyDistribution

__all__ = [
    "PlazaSettings",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "default_scenario",
    "scenario_to_dict",
]

DEFAULT_RATED_POWER_KW = 150.0

# Available grid power over a day, kW: generous at night, pinched during
# the morning and evening load peaks.
DEFAULT_GRID_SEGMENTS = (
    (0.0, 55.0),
    (6.0, 35.0),
    (9.0, 45.0),
    (12.0, 40.0),
    (14.0, 45.0),
    (17.0, 30.0),
    (21.0, 50.0),
)


class ScenarioError(ValueError):
    """Scenario document is malformed; the message lists every problem."""


@dataclass(frozen=True)
class PlazaSettings:
    """Plaza-side environment shared by the day and ensemble studies.

    The plaza carries its own (typically smaller) module supply: service
    dynamics only become interesting when per-cycle drawdowns are on the
    same scale as the unit's deliverable energy, and every reported service
    metric is either normalized per pack or measured in time units.
    """

    charger_max_kw: float
    bess_power_kw: float
    supply: SupplyDistribution
    rating_r: float
    kinds: tuple[ArchitectureKind, ...]
    exemplar_demand: DemandModel
    exemplar_rate_per_h: float

    def __post_init__(self) -> None:
        if self.charger_max_kw <= 0:
            raise ScenarioError("plaza charger_max_kw must be positive")
        if self.bess_power_kw <= 0:
            raise ScenarioError("plaza bess_power_kw must be positive")
        if self.rating_r < 0:
            raise ScenarioError("plaza rating_r must be nonnegative")
        if not self.kinds:
            raise ScenarioError("plaza needs at least one architecture kind")
        if self.exemplar_rate_per_h <= 0:
            raise ScenarioError("plaza exemplar arrival rate must be positive")


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    supply: SupplyDistribution
    n_modules: int
    n_layer1: int
    rated_power_kw: float
    architectures: tuple[ArchitectureConfig, ...]
    grid_profile: GridProfile
    arrival_rates_per_h: tuple[float, ...]
    demand_means_kwh: tuple[float, ...]
    demand_stds_kwh: tuple[float, ...]
    r_grid: tuple[float, ...]
    lambda_grid: tuple[float, ...]
    n_packs: int
    n_trajectories: int
    plaza: PlazaSettings

    def __post_init__(self) -> None:
        problems = []
        if self.seed < 0:
            problems.append("seed must be a nonnegative integer")
        if self.n_modules < 2:
            problems.append("n_modules must be >= 2")
        if not 1 <= self.n_layer1 < self.n_modules:
            problems.append("n_layer1 must satisfy 1 <= n_layer1 < n_modules")
        if self.rated_power_kw <= 0:
            problems.append("rated_power_kw must be positive")
        if not self.architectures:
            problems.append("architectures must be nonempty")
        for seq, label in [
            (self.arrival_rates_per_h, "arrival_rates_per_h"),
            (self.demand_means_kwh, "demand_means_kwh"),
            (self.demand_stds_kwh, "demand_stds_kwh"),
            (self.r_grid, "r_grid"),
            (self.lambda_grid, "lambda_grid"),
        ]:
            if not seq:
                problems.append(f"{label} must be nonempty")
        if any(r <= 0 for r in self.arrival_rates_per_h):
            problems.append("arrival rates must be positive")
        if any(m <= 0 for m in self.demand_means_kwh):
            problems.append("demand means must be positive")
        if any(s < 0 for s in self.demand_stds_kwh):
            problems.append("demand stds must be nonnegative")
        if any(r < 0 for r in self.r_grid):
            problems.append("r_grid values must be nonnegative")
        if any(v < 0 for v in self.lambda_grid):
            problems.append("lambda_grid values must be nonnegative")
        if self.n_packs < 1:
            problems.append("n_packs must be >= 1")
        if self.n_trajectories < 1:
            problems.append("n_trajectories must be >= 1")
        if problems:
            raise ScenarioError("; ".join(problems))

    @property
    def design_horizon_h(self) -> float:
        """Discharge horizon: expected pack energy over rated output power."""
        from besspp.supply import flatten_distribution

        expected = flatten_distribution(self.supply, self.n_modules)
        return expected.total_kwh / self.rated_power_kw

    @property
    def plaza_horizon_h(self) -> float:
        from besspp.supply import flatten_distribution

        expected = flatten_distribution(self.plaza.supply, self.n_modules)
        return expected.total_kwh / self.plaza.bess_power_kw


def default_scenario() -> Scenario:
    """Built-in scenario used when the CLI is given no --scenario file."""
    supply = SupplyDistribution(mean_kwh=37.5, std_kwh=9.375)
    plaza_supply = SupplyDistribution(mean_kwh=37.5 / 9, std_kwh=9.375 / 9)
    n_r = 20
    r_grid = tuple(0.1 + 0.9 * i / (n_r - 1) for i in range(n_r))
    return Scenario(
        name="default",
        seed=20240915,
        supply=supply,
        n_modules=9,
        n_layer1=3,
        rated_power_kw=DEFAULT_RATED_POWER_KW,
        architectures=(
            ArchitectureConfig(
                kind=ArchitectureKind.LSHIPPP,
                n_modules=9,
                rating_r=0.2,
                eta_c=0.85,
                n_layer1=3,
            ),
            ArchitectureConfig(
                kind=ArchitectureKind.CPPP, n_modules=9, rating_r=0.2, eta_c=0.85
            ),
            ArchitectureConfig(
                kind=ArchitectureKind.FPP, n_modules=9, rating_r=0.2, eta_c=0.85
            ),
        ),
        grid_profile=GridProfile(DEFAULT_GRID_SEGMENTS),
        arrival_rates_per_h=(1 / 0.5, 1 / 1.5, 1 / 2.5),
        demand_means_kwh=(33.0, 50.0),
        demand_stds_kwh=(5.0, 10.0, 15.0, 20.0, 25.0),
        r_grid=r_grid,
        lambda_grid=tuple(default_lambda_grid()),
        n_packs=100,
        n_trajectories=1000,
        plaza=PlazaSettings(
            charger_max_kw=150.0,
            bess_power_kw=150.0,
            supply=plaza_supply,
            rating_r=0.2,
            kinds=(ArchitectureKind.LSHIPPP, ArchitectureKind.CPPP),
            exemplar_demand=DemandModel(mean_kwh=50.0, std_kwh=25.0),
            exemplar_rate_per_h=2.0,
        ),
    )


def _supply_from_dict(data: dict, label: str) -> SupplyDistribution:
    try:
        return SupplyDistribution(
            mean_kwh=float(data["mean_kwh"]),
            std_kwh=float(data["std_kwh"]),
            dod=float(data.get("dod", 1.0)),
            voltage_v=float(data.get("voltage_v", 50.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad {label} supply block: {exc}") from exc


def _grid_from_value(value, base_dir: Path) -> GridProfile:
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ScenarioError(f"grid profile file not found: {path}")
        return GridProfile.from_csv(path)
    if isinstance(value, (list, tuple)):
        return GridProfile(tuple((float(t), float(kw)) for t, kw in value))
    raise ScenarioError("grid_profile must be a CSV path or a segment list")


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")
    if "seed" not in data:
        raise ScenarioError("scenario must pin a seed; wall-clock seeding is not allowed")

    base_dir = path.parent
    supply = _supply_from_dict(data.get("supply", {}), "pack")
    n_modules = int(data.get("supply", {}).get("n_modules", 0))
    n_layer1 = int(data.get("n_layer1", 3))

    arch_entries = data.get("architectures", [])
    architectures = []
    for entry in arch_entries:
        entry = dict(entry)
        entry.setdefault("n_modules", n_modules)
        try:
            architectures.append(ArchitectureConfig.from_dict(entry))
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad architecture entry {entry}: {exc}") from exc

    plaza_data = data.get("plaza", {})
    plaza_supply = (
        _supply_from_dict(plaza_data["supply"], "plaza")
        if "supply" in plaza_data
        else supply
    )
    exemplar = plaza_data.get("exemplar", {})
    try:
        plaza = PlazaSettings(
            charger_max_kw=float(plaza_data.get("charger_max_kw", 150.0)),
            bess_power_kw=float(plaza_data.get("bess_power_kw", 150.0)),
            supply=plaza_supply,
            rating_r=float(plaza_data.get("rating_r", 0.2)),
            kinds=tuple(
                ArchitectureKind(k)
                for k in plaza_data.get("kinds", ["lshippp", "cppp"])
            ),
            exemplar_demand=DemandModel(
                mean_kwh=float(exemplar.get("demand_mean_kwh", 50.0)),
                std_kwh=float(exemplar.get("demand_std_kwh", 25.0)),
            ),
            exemplar_rate_per_h=float(exemplar.get("arrival_rate_per_h", 2.0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad plaza block: {exc}") from exc

    try:
        return Scenario(
            name=str(data.get("name", path.stem)),
            seed=int(data["seed"]),
            supply=supply,
            n_modules=n_modules,
            n_layer1=n_layer1,
            rated_power_kw=float(data.get("rated_power_kw", DEFAULT_RATED_POWER_KW)),
            architectures=tuple(architectures),
            grid_profile=_grid_from_value(
                data.get("grid_profile", list(DEFAULT_GRID_SEGMENTS)), base_dir
            ),
            arrival_rates_per_h=tuple(
                float(v) for v in data.get("arrival_rates_per_h", [])
            ),
            demand_means_kwh=tuple(float(v) for v in data.get("demand_means_kwh", [])),
            demand_stds_kwh=tuple(float(v) for v in data.get("demand_stds_kwh", [])),
            r_grid=tuple(float(v) for v in data.get("r_grid", [])),
            lambda_grid=tuple(float(v) for v in data.get("lambda_grid", [])),
            n_packs=int(data.get("n_packs", 100)),
            n_trajectories=int(data.get("n_trajectories", 1000)),
            plaza=plaza,
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario field: {exc}") from exc


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical JSON form; hashing this defines the scenario fingerprint."""
    def _supply(s: SupplyDistribution) -> dict:
        return {
            "mean_kwh": s.mean_kwh,
            "std_kwh": s.std_kwh,
            "dod": s.dod,
            "voltage_v": s.voltage_v,
        }

    return {
        "name": scenario.name,
        "seed": scenario.seed,
        "supply": {**_supply(scenario.supply), "n_modules": scenario.n_modules},
        "n_layer1": scenario.n_layer1,
        "rated_power_kw": scenario.rated_power_kw,
        "architectures": [a.to_dict() for a in scenario.architectures],
        "grid_profile": [list(seg) for seg in scenario.grid_profile.segments],
        "arrival_rates_per_h": list(scenario.arrival_rates_per_h),
        "demand_means_kwh": list(scenario.demand_means_kwh),
        "demand_stds_kwh": list(scenario.demand_stds_kwh),
        "r_grid": list(scenario.r_grid),
        "lambda_grid": list(scenario.lambda_grid),
        "n_packs": scenario.n_packs,
        "n_trajectories": scenario.n_trajectories,
        "plaza": {
            "charger_max_kw": scenario.plaza.charger_max_kw,
            "bess_power_kw": scenario.plaza.bess_power_kw,
            "rating_r": scenario.plaza.rating_r,
            "kinds": [k.value for k in scenario.plaza.kinds],
            "supply": _supply(scenario.plaza.supply),
            "exemplar": {
                "demand_mean_kwh": scenario.plaza.exemplar_demand.mean_kwh,
                "demand_std_kwh": scenario.plaza.exemplar_demand.std_kwh,
                "arrival_rate_per_h": scenario.plaza.exemplar_rate_per_h,
            },
        },
    }
