"""Tests for the handover call flows."""

from pathlib import Path

import pytest

from femto_handover.config import SignalingSection
from femto_handover.errors import ConfigurationError
from femto_handover.signaling import (
    Flow,
    Gate,
    HandoverContext,
    format_trace,
    golden_rows,
    load_golden,
    run_f2f,
    run_f2m,
    run_flow,
    run_m2f,
    signaling_cost,
    trace_summary,
)

DATA = Path(__file__).parent / "data"


class TestCompletedFlows:
    """Completed traces match the reference call flows."""

    @pytest.mark.parametrize(
        "flow, fixture",
        [(Flow.F2M, "golden_f2m.txt"), (Flow.M2F, "golden_m2f.txt"), (Flow.F2F, "golden_f2f.txt")],
    )
    def test_matches_golden(self, flow, fixture):
        assert golden_rows(run_flow(flow)) == load_golden(DATA / fixture)

    def test_step_counts(self):
        assert len(run_f2m().steps) == 33
        assert len(run_m2f().steps) == 34
        assert len(run_f2f().steps) == 29

    def test_message_totals(self):
        """Local processing steps are not messages."""
        assert signaling_cost(run_f2m())["messages_total"] == 30
        assert signaling_cost(run_m2f())["messages_total"] == 31
        assert signaling_cost(run_f2f())["messages_total"] == 25

    def test_per_entity_counts(self):
        cost = signaling_cost(run_f2m())
        assert cost["per_entity"]["MS"] == 10
        assert sum(cost["per_entity"].values()) == 2 * cost["messages_total"]

    def test_f2f_skips_core_network(self):
        """Femto-to-femto signaling stays behind the FGW."""
        kinds = {step.sender.kind.value for step in run_f2f().steps}
        kinds |= {step.receiver.kind.value for step in run_f2f().steps}
        assert "CN" not in kinds
        assert "RNC" not in kinds

    def test_indices_are_sequential(self):
        trace = run_m2f()
        assert [step.index for step in trace.steps] == list(range(1, 35))

    def test_switch_step(self):
        trace = run_f2f()
        assert trace.completed
        assert trace.switch_step == 20
        assert trace.attachment_switched


class TestAbortedFlows:
    """A failing gate ends the trace at its step."""

    @pytest.mark.parametrize(
        "flow, context, reason, step",
        [
            (Flow.F2M, HandoverContext(preauth_ok=False), Gate.PREAUTH, 6),
            (Flow.F2M, HandoverContext(cac_ok=False), Gate.CAC, 12),
            (Flow.M2F, HandoverContext(preauth_ok=False), Gate.PREAUTH, 5),
            (Flow.M2F, HandoverContext(authorization_ok=False), Gate.AUTH, 12),
            (Flow.M2F, HandoverContext(cac_ok=False), Gate.CAC, 13),
            (Flow.M2F, HandoverContext(interference_ok=False), Gate.INTERFERENCE, 13),
            (Flow.F2F, HandoverContext(preauth_ok=False), Gate.PREAUTH, 6),
            (Flow.F2F, HandoverContext(authorization_ok=False), Gate.AUTH, 11),
            (Flow.F2F, HandoverContext(cac_ok=False), Gate.CAC, 12),
        ],
    )
    def test_abort_step(self, flow, context, reason, step):
        trace = run_flow(flow, context)
        assert not trace.completed
        assert trace.abort_reason is reason
        assert trace.abort_step == step
        assert len(trace.steps) == step
        assert not trace.attachment_switched

    def test_aborted_prefix_matches_completed(self):
        full = golden_rows(run_f2m())
        aborted = golden_rows(run_f2m(HandoverContext(cac_ok=False)))
        assert aborted == full[:12]

    def test_outcome_text(self):
        trace = run_f2f(HandoverContext(cac_ok=False))
        assert trace.outcome == "aborted(cac_reject, 12)"
        assert run_f2f().outcome == "completed"


class TestLatency:
    """Test per-step latency."""

    def test_default_delays(self):
        """Ten air-interface messages at 1 ms and fifteen backhaul messages at 5 ms."""
        assert run_f2f().latency_ms == pytest.approx(85.0)

    def test_aborted_latency(self):
        assert run_f2f(HandoverContext(preauth_ok=False)).latency_ms == pytest.approx(9.0)

    def test_custom_delays(self):
        delays = SignalingSection(air_delay_ms=0.0, backhaul_delay_ms=1.0, self_delay_ms=2.0)
        assert run_f2f(delays=delays).latency_ms == pytest.approx(15.0 + 4 * 2.0)


class TestFormatting:
    """Test trace rendering."""

    def test_text_one_line_per_step(self):
        text = format_trace(run_f2f())
        lines = text.splitlines()
        assert len(lines) == 29
        assert "measurement_report" in lines[0]
        assert "(local)" in lines[2]

    def test_csv(self):
        rows = format_trace(run_m2f(), "csv").splitlines()
        assert rows[0] == "index,from,to,label"
        assert rows[1] == "1,MS,MBS,measurement_report"
        assert len(rows) == 35

    def test_unknown_format(self):
        with pytest.raises(ConfigurationError):
            format_trace(run_f2f(), "xml")

    def test_summary(self):
        assert trace_summary(run_f2f()) == "F2F handover: completed, 29 steps, 85.0 ms"
