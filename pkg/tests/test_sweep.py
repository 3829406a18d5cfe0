"""Tests for parameter sweeps."""

import pytest

from femto_handover.config import ScenarioConfig
from femto_handover.errors import ConfigurationError
from femto_handover.simulator import run as run_simulation
from femto_handover.sweep import (
    SOLUTION_COLUMNS,
    SweepSpec,
    evaluate_point,
    header,
    resolve_param,
    run_sweep,
    sweep_values,
)


class TestSweepValues:
    """Test sweep_values."""

    def test_aliases(self):
        assert resolve_param("n") == "topology.n_faps"
        assert resolve_param("traffic.alpha") == "traffic.alpha"

    def test_integer_parameter(self):
        assert sweep_values(ScenarioConfig(), "n", 0, 1000, 11) == tuple(range(0, 1001, 100))

    def test_float_parameter(self):
        assert sweep_values(ScenarioConfig(), "alpha", 0, 1, 5) == (0.0, 0.25, 0.5, 0.75, 1.0)

    def test_single_point(self):
        assert sweep_values(ScenarioConfig(), "K", 6, 9, 1) == (6,)

    @pytest.mark.parametrize("param", ["nosuch", "topology.nosuch", "cac.restore_qos", "cac.macro_model"])
    def test_rejected(self, param):
        with pytest.raises(ConfigurationError):
            sweep_values(ScenarioConfig(), param, 0, 1, 3)

    def test_points(self):
        with pytest.raises(ConfigurationError):
            sweep_values(ScenarioConfig(), "n", 0, 1, 0)


class TestSweep:
    """Test analytic and paired sweeps."""

    def test_header(self):
        analytic = header(SweepSpec("n", (1,)))
        paired = header(SweepSpec("n", (1,), seeds=(0,)))
        assert analytic == ["param", "value"] + SOLUTION_COLUMNS
        assert "sim_p_b_m_ci" in paired
        assert paired[-1] == "analytic_alpha"

    def test_analytic_rows_in_order(self):
        spec = SweepSpec("n", (1000, 0, 500))
        rows = run_sweep(ScenarioConfig(), spec)
        assert [row["value"] for row in rows] == [1000, 0, 500]
        assert all(row["converged"] for row in rows)
        assert all(row["param"] == "n" for row in rows)

    def test_invalid_point_is_configuration_error(self):
        with pytest.raises(ConfigurationError):
            evaluate_point(ScenarioConfig(), SweepSpec("n", (20000,)), 20000)

    def test_paired_point(self):
        config = ScenarioConfig().with_overrides({"sim.horizon_s": 400.0})
        row = evaluate_point(config, SweepSpec("n", (100,), seeds=(0, 1)), 100)
        assert row["sim_seeds"] == 2
        assert row["sim_conserved"]
        assert row["sim_ledger_violations"] == 0
        assert row["analytic_alpha"] == 0.5
        assert set(header(SweepSpec("n", (100,), seeds=(0,)))) <= set(row)

    def test_alpha_feedback(self):
        """The analytic columns take the measured alpha when feedback is on."""
        config = ScenarioConfig().with_overrides({"sim.alpha_feedback": True})
        row = evaluate_point(config, SweepSpec("n", (800,), seeds=(0,), horizon_s=2000.0), 800)
        if row["sim_measured_alpha"] is not None:
            assert row["alpha"] == pytest.approx(row["sim_measured_alpha"])
            assert row["analytic_alpha"] == row["alpha"]

    def test_parallel_matches_serial(self):
        spec = SweepSpec("alpha", (0.0, 0.5, 1.0))
        serial = run_sweep(ScenarioConfig(), spec)
        parallel = run_sweep(ScenarioConfig(), spec, jobs=2)
        assert parallel == serial


def reduced_macrocell(**overrides) -> ScenarioConfig:
    """Twenty channels, one guard channel and two-call FAPs under a load that congests the bare macrocell."""
    values = {
        "cac.macro_model": "channels",
        "traffic.n_channels": 20,
        "traffic.s_channels": 1,
        "topology.fap_capacity": 2,
        "traffic.total_arrival_rate": 0.3,
    }
    values.update(overrides)
    return ScenarioConfig().with_overrides(values)


class TestForcedTerminationTrend:
    """Femtocells lower forced termination at a fixed total load."""

    def test_analytic_non_increasing(self):
        rows = run_sweep(reduced_macrocell(), SweepSpec("n", (0, 250, 500, 750, 1000)))
        values = [row["forced_termination"] for row in rows]
        assert all(row["converged"] for row in rows)
        assert values[-1] < values[0]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_simulated_direction_per_seed(self):
        """Each seed sees fewer forced terminations with 1000 FAPs than with none."""
        lower = 0
        for seed in range(10):
            bare = run_simulation(reduced_macrocell(**{"topology.n_faps": 0, "sim.horizon_s": 5000.0}), seed)
            dense = run_simulation(reduced_macrocell(**{"topology.n_faps": 1000, "sim.horizon_s": 5000.0}), seed)
            assert bare.forced_termination.successes > 0
            assert bare.conserved and dense.conserved
            lower += dense.forced_termination.value < bare.forced_termination.value
        assert lower >= 9


class TestCrossValidation:
    """Simulated macro blocking and femto handover failure track the fixed point."""

    @pytest.fixture(scope="class")
    def row(self):
        config = ScenarioConfig().with_overrides(
            {
                "topology.fap_capacity": 2,
                "cac.macro_model": "channels",
                "traffic.n_channels": 10,
                "traffic.s_channels": 4,
                "sim.alpha_feedback": True,
            }
        )
        return evaluate_point(config, SweepSpec("n", (10,), seeds=tuple(range(10)), horizon_s=4000.0), 10)

    @staticmethod
    def close(simulated, analytic) -> bool:
        return abs(simulated - analytic) <= max(0.01, 0.15 * analytic)

    def test_macro_blocking(self, row):
        assert row["sim_p_b_m_n"] > 1000
        assert self.close(row["sim_p_b_m"], row["p_b_m"])

    def test_femto_handover_failure(self, row):
        if row["sim_p_d_f"] is not None:
            assert self.close(row["sim_p_d_f"], row["p_d_f"])

    def test_macro_dropping(self, row):
        assert row["sim_p_d_m_n"] > 0
        assert self.close(row["sim_p_d_m"], row["p_d_m"])

    def test_runs_are_clean(self, row):
        assert row["sim_conserved"]
        assert row["sim_ledger_violations"] == 0
