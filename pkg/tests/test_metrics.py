"""Tests for counters and ratio estimates."""

import pytest

from femto_handover.metrics import Estimate, SimCounters, estimate


class TestEstimate:
    """Test Estimate."""

    def test_normal_approximation(self):
        est = Estimate(50, 100)
        assert est.value == 0.5
        assert est.half_width == pytest.approx(0.098, abs=1e-3)

    def test_rule_of_three(self):
        """No successes (or all successes) falls back to 3/n."""
        assert Estimate(0, 300).half_width == pytest.approx(0.01)
        assert Estimate(300, 300).half_width == pytest.approx(0.01)

    def test_undefined(self):
        est = Estimate(0, 0)
        assert not est.defined
        assert est.value is None
        assert est.half_width is None
        assert str(est) == "undefined (n=0)"

    def test_text(self):
        assert str(Estimate(1, 4)).startswith("0.250000 ± ")
        assert str(Estimate(1, 4)).endswith("(n=4)")


class TestEstimateReport:
    """Test estimate() on hand-filled counters."""

    def counters(self) -> SimCounters:
        counters = SimCounters()
        counters.macro_new_attempts = 200
        counters.macro_new_blocked = 4
        counters.macro_ho_attempts = 50
        counters.macro_ho_dropped = 1
        counters.admitted = 180
        counters.dropped = 3
        counters.handovers.update({"F2M": 2, "F2F": 1})
        counters.macro_handovers = 7
        counters.signaling_completed.update({"F2M": 2, "F2F": 1})
        counters.signaling_messages.update({"F2M": 60, "F2F": 25})
        counters.signaling_latency_ms.update({"F2M": 200.0, "F2F": 85.0})
        counters.proposed_sizes.extend([2, 4])
        counters.traditional_sizes.extend([5, 7])
        counters.macro_releases = 10
        counters.macro_channel_seconds = 1000.0
        counters.tally("adaptive", "femto", "arrivals", 5)
        counters.tally("adaptive", "femto", "ended", 3)
        counters.tally("adaptive", "femto", "dropped", 1)
        counters.tally("adaptive", "femto", "active", 1)
        return counters

    def test_probabilities(self):
        report = estimate(self.counters(), seed=3, horizon_s=500.0)
        assert report.p_b_m.value == pytest.approx(0.02)
        assert report.p_d_m.value == pytest.approx(0.02)
        assert report.forced_termination.value == pytest.approx(3 / 180)
        assert not report.p_b_f.defined

    def test_signaling_means_per_completed_trace(self):
        report = estimate(self.counters())
        assert report.signaling_messages == {"F2M": 30.0, "F2F": 25.0}
        assert report.signaling_latency_ms["F2M"] == pytest.approx(100.0)

    def test_list_sizes_and_release_rate(self):
        report = estimate(self.counters())
        assert report.neighbor_list_sizes["proposed_mean"] == 3.0
        assert report.neighbor_list_sizes["traditional_max"] == 7.0
        assert report.macro_channel_release_rate == pytest.approx(0.01)

    def test_no_macro_time(self):
        report = estimate(SimCounters())
        assert report.macro_channel_release_rate is None
        assert report.neighbor_list_sizes == {"samples": 0.0}

    def test_conservation(self):
        counters = self.counters()
        assert estimate(counters).conserved
        counters.tally("adaptive", "femto", "arrivals")
        assert not estimate(counters).conserved

    def test_handed_out_calls_balance(self):
        counters = self.counters()
        counters.tally("adaptive", "neighbor_cell", "arrivals", 4)
        counters.tally("adaptive", "neighbor_cell", "handed_out", 3)
        counters.tally("adaptive", "neighbor_cell", "dropped", 1)
        report = estimate(counters)
        assert report.conservation["adaptive/neighbor_cell"]["handed_out"] == 3
        assert report.conservation["adaptive/femto"]["handed_out"] == 0
        assert report.conserved

    def test_row_and_text(self):
        report = estimate(self.counters(), seed=3, horizon_s=500.0)
        row = report.as_row()
        assert row["seed"] == 3
        assert row["p_b_m_n"] == 200
        assert row["handovers_M2M"] == 7
        assert row["p_b_f"] is None
        text = report.to_text()
        assert "handovers.F2M = 2" in text
        assert "handovers.M2M = 7" in text
        assert "p_b_f = undefined (n=0)" in text
        assert "conserved = True" in text
