import json
import math

import numpy as np
import pytest

from besspp.metrics import (
    MetricReport,
    captured_value,
    derating_factor,
    energy_utilization,
    grid_ev_energy_gap,
    interdecile_range,
    normalized_rating,
    system_efficiency,
)
from besspp.supply import BatteryModule


class TestEnergyUtilization:
    def test_from_total(self):
        assert energy_utilization(270.0, 337.5) == pytest.approx(0.8)

    def test_from_modules(self):
        modules = [BatteryModule(3.0, 50.0), BatteryModule(5.0, 50.0)]
        assert energy_utilization(4.0, modules) == pytest.approx(0.5)

    def test_rejects_zero_capacity(self):
        with pytest.raises(ValueError):
            energy_utilization(1.0, 0.0)


class TestNormalizedRating:
    def test_reference_point(self):
        # 30 kW of converters against 337.5 kWh discharged over 2.25 h.
        assert normalized_rating(30.0, 337.5, 2.25) == pytest.approx(0.2)

    def test_linear_in_power(self):
        assert normalized_rating(60.0, 337.5, 2.25) == pytest.approx(0.4)


class TestSystemEfficiency:
    def test_reference_values(self):
        assert system_efficiency(0.85, 0.15) == pytest.approx(0.9775)
        assert system_efficiency(0.85, 1.0) == pytest.approx(0.85)
        assert system_efficiency(0.85, 0.0) == pytest.approx(1.0)

    def test_exact_linear_form(self):
        for r in np.linspace(0.0, 1.0, 21):
            assert system_efficiency(0.9, float(r)) == 1.0 - (1.0 - 0.9) * float(r)

    def test_processed_share_saturates(self):
        assert system_efficiency(0.85, 1.5) == pytest.approx(0.85)

    def test_validation(self):
        with pytest.raises(ValueError):
            system_efficiency(0.0, 0.5)
        with pytest.raises(ValueError):
            system_efficiency(0.9, -0.1)


class TestInterdecileRange:
    def test_eleven_point_ramp(self):
        # 0..100 in steps of 10: deciles sit on sample points exactly.
        assert interdecile_range(range(0, 101, 10)) == pytest.approx(80.0)

    def test_constant_samples(self):
        assert interdecile_range([5.0] * 12) == 0.0

    def test_needs_ten_samples(self):
        with pytest.raises(ValueError):
            interdecile_range([1.0] * 9)

    def test_matches_numpy_quantiles(self):
        rng = np.random.Generator(np.random.Philox(key=5))
        samples = rng.uniform(0, 1, 97)
        expected = np.quantile(samples, 0.9) - np.quantile(samples, 0.1)
        assert interdecile_range(samples) == pytest.approx(float(expected))


class TestGridEvGap:
    def test_positive_gap(self):
        # 60 kWh wanted over 0.4 h against a 45 kW feeder.
        assert grid_ev_energy_gap(60.0, 45.0, 0.4) == pytest.approx(42.0)

    def test_zero_when_grid_covers(self):
        assert grid_ev_energy_gap(10.0, 50.0, 0.2) == pytest.approx(0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            grid_ev_energy_gap(-1.0, 50.0, 0.2)
        with pytest.raises(ValueError):
            grid_ev_energy_gap(10.0, -1.0, 0.2)


class TestDeratingFactor:
    def test_two_sample_reference(self):
        # mean 100, population std 10: (100 - 30) / 100.
        assert derating_factor([90.0, 110.0]) == pytest.approx(0.7)

    def test_tight_ensemble_near_one(self):
        assert derating_factor([100.0, 100.0, 100.0]) == pytest.approx(1.0)

    def test_clamped_at_zero(self):
        assert derating_factor([1.0, 100.0]) == 0.0

    def test_needs_two_samples_and_positive_mean(self):
        with pytest.raises(ValueError):
            derating_factor([1.0])
        with pytest.raises(ValueError):
            derating_factor([0.0, 0.0])


class TestCapturedValue:
    def test_reference_products(self):
        # Dependable fraction times utilization times the pack energy.
        assert captured_value(0.84, 0.95, 337.5) == pytest.approx(269.33, abs=0.2)
        assert captured_value(0.65, 0.785, 337.5) == pytest.approx(172.2, abs=0.4)

    def test_validation(self):
        with pytest.raises(ValueError):
            captured_value(1.2, 0.5, 100.0)
        with pytest.raises(ValueError):
            captured_value(0.5, -0.1, 100.0)
        with pytest.raises(ValueError):
            captured_value(0.5, 0.5, -1.0)


class TestMetricReport:
    def test_json_roundtrip(self):
        report = MetricReport(
            study="demo",
            values={"alpha": 1.5, "beta": 2.0},
            units={"alpha": "kWh"},
        )
        again = MetricReport.from_json(report.to_json())
        assert again.study == "demo"
        assert again.values == report.values
        assert again.units.get("alpha") == "kWh"

    def test_json_is_sorted_and_stable(self):
        report = MetricReport(study="demo", values={"b": 2.0, "a": 1.0})
        payload = json.loads(report.to_json())
        assert list(payload["metrics"]) == ["a", "b"]
        assert report.to_json() == report.to_json()
