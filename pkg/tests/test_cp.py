"""The online policy: case dispatch, commitments, lookahead, fallbacks."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings

from bdsched import Instance, chain_family, opt_full, profit, run_cp, trace_to_jsonl, validate_instance
from conftest import mk
from test_offline import small_instances


def labels(trace):
    return [(rec.t, rec.case) for rec in trace.steps]


class TestHandSimulations:
    def test_expiring_best_sent_first(self):
        # both packets are best-in-buffer on their last slot
        sched, trace = run_cp(mk((0, 0, 5), (0, 1, 3)))
        assert labels(trace) == [(0, "1.1"), (1, "1.1")]
        assert dict(sched.slots) == {0: 0, 1: 1}

    def test_weaker_expiring_packet_banked(self):
        # packet 1 dies at 0, packet 0 can wait: send 1 now, commit 0
        inst = mk((0, 1, 5), (0, 0, 4))
        sched, trace = run_cp(inst)
        assert labels(trace) == [(0, "1.2.1"), (1, "commit")]
        assert dict(sched.slots) == {0: 1, 1: 0}
        assert profit(sched, inst) == 9

    def test_two_flexible_packets(self):
        inst = mk((0, 1, 5), (0, 1, 3))
        sched, trace = run_cp(inst)
        assert labels(trace) == [(0, "1.2.2"), (1, "commit")]
        assert profit(sched, inst) == 8

    def test_empty_instance(self):
        sched, trace = run_cp(Instance(()))
        assert dict(sched.slots) == {} and trace.steps == []

    def test_idle_gap_between_bursts(self):
        inst = mk((0, 0, 1), (3, 3, 1))
        sched, trace = run_cp(inst)
        assert [rec.case for rec in trace.steps] == ["1.1", "idle", "idle", "1.1"]
        assert dict(sched.slots) == {0: 0, 3: 1}

    def test_hedges_with_banked_packet(self):
        # guard ratio (1 + 8/5 + 13/8) / (8/5 + 13/8) exceeds the bound:
        # the policy banks the expiring packet instead of being greedy
        inst = mk((0, 0, 1), (0, 1, "8/5"), (1, 2, "13/8"))
        sched, trace = run_cp(inst)
        assert labels(trace) == [(0, "1.2.3.4"), (1, "2.1"), (2, "commit")]
        assert dict(sched.slots) == {0: 0, 1: 1, 2: 2}
        assert profit(sched, inst) == Fraction(169, 40)

    def test_near_threshold_ratio_witness(self):
        # low-value slot gain: send the flexible best now (guard below alpha)
        inst = mk((0, 0, 1), (0, 1, 2), (1, 2, 2))
        sched, trace = run_cp(inst)
        assert labels(trace) == [(0, "1.2.3.2"), (1, "commit"), (2, "idle")]
        assert profit(sched, inst) == 4


class TestCaseChains:
    """Each deep branch of the case tree is pinned by one ladder instance."""

    @pytest.mark.parametrize(
        "variant,expected",
        [
            ("2.1", ["1.2.3.4", "2.1", "commit"]),
            ("2.2.1", ["1.2.3.4", "2.2.1", "commit"]),
            ("2.2.2.1", ["1.2.3.4", "2.2.2.1", "1.2.2", "commit"]),
            ("2.2.2.2", ["1.2.3.4", "2.2.2.2", "commit", "idle"]),
            ("2.2.2.3+3.1", ["1.2.3.4", "2.2.2.3", "3.1", "commit"]),
            ("3.2.1", ["1.2.3.4", "2.2.2.3", "3.2.1", "commit"]),
            ("3.2.2", ["1.2.3.4", "2.2.2.3", "3.2.2", "1.2.1", "commit"]),
            ("3.2.3", ["1.2.3.4", "2.2.2.3", "3.2.3", "commit", "idle"]),
        ],
    )
    def test_chain_reaches_branch(self, variant, expected):
        inst = chain_family(variant)
        assert validate_instance(inst) == []
        _, trace = run_cp(inst)
        assert [rec.case for rec in trace.steps] == expected

    def test_tmp_markers_follow_their_cases(self):
        _, trace = run_cp(chain_family("3.2.3"))
        by_t = {rec.t: rec for rec in trace.steps}
        assert str(by_t[0].committed) == "tmp1"
        assert str(by_t[1].committed) == "tmp2"


class TestStateMachineInvariants:
    @given(small_instances(max_packets=8, max_release=5))
    @settings(max_examples=300, deadline=None)
    def test_schedule_feasible_and_deterministic(self, inst):
        sched1, trace1 = run_cp(inst)
        sched2, trace2 = run_cp(inst)
        profit(sched1, inst)  # raises if infeasible
        assert dict(sched1.slots) == dict(sched2.slots)
        assert trace_to_jsonl(trace1) == trace_to_jsonl(trace2)

    @given(small_instances(max_packets=8, max_release=5))
    @settings(max_examples=300, deadline=None)
    def test_lookahead_never_exceeded(self, inst):
        _, trace = run_cp(inst)
        assert trace.max_lookahead() <= 1
        for now, t, t_arr, _t_slot in trace.queries:
            assert t_arr <= now + 1

    @given(small_instances(max_packets=8, max_release=5))
    @settings(max_examples=300, deadline=None)
    def test_commitments_honored(self, inst):
        sched, trace = run_cp(inst)
        for rec in trace.steps:
            if rec.committed is not None and rec.committed.kind == "commit":
                assert sched.packet_at(rec.t + 1) == rec.committed.packet_id

    @given(small_instances(max_packets=8, max_release=5))
    @settings(max_examples=300, deadline=None)
    def test_case_family_chaining(self, inst):
        _, trace = run_cp(inst)
        by_t = {rec.t: rec for rec in trace.steps}
        for rec in trace.steps:
            if rec.case.startswith("2."):
                prev = by_t[rec.t - 1]
                assert prev.case == "1.2.3.4" and not prev.fallback
            if rec.case.startswith("3."):
                prev = by_t[rec.t - 1]
                assert prev.case == "2.2.2.3"
        for rec in trace.steps:
            if rec.case == "1.2.3.4" and not rec.fallback:
                assert by_t[rec.t + 1].case.startswith("2.")
            if rec.case == "2.2.2.3":
                assert by_t[rec.t + 1].case.startswith("3.")


class TestFallbacks:
    def test_m1_absent_sends_best_without_commitment(self):
        inst = mk((0, 1, 5))
        sched, trace = run_cp(inst)
        rec = trace.steps[0]
        assert rec.case == "1.2.2" and rec.fallback == "m1-absent"
        assert rec.committed is None
        assert dict(sched.slots) == {0: 0}

    def test_unreleased_slot_gain_defers(self):
        # the slot-gain packet arrives only at t+1; policy must not name it at t
        inst = mk((0, 1, 10), (1, 2, 9), (1, 2, 8))
        sched, trace = run_cp(inst)
        rec = trace.steps[0]
        assert rec.case == "1.2.3.1" and rec.fallback == "q1-unreleased"
        assert rec.transmitted == 0 and rec.committed is None
        # nothing is lost: all three packets still go out
        assert profit(sched, inst) == 27

    def test_unreleased_slot_gain_collects_everything(self):
        # the slot-gain packet is a one-shot arriving at t+1 above the
        # alpha threshold; deferring still collects the full optimum
        inst = mk((0, 1, 1), (1, 2, 1), (1, 1, "3/5"))
        sched, trace = run_cp(inst)
        assert trace.steps[0].case == "1.2.3.1"
        assert trace.steps[0].fallback == "q1-unreleased"
        assert profit(sched, inst) == Fraction(13, 5)
        assert profit(sched, inst) == opt_full(inst)[1]

    @given(small_instances(max_packets=8, max_release=5))
    @settings(max_examples=300, deadline=None)
    def test_fallbacks_never_commit(self, inst):
        _, trace = run_cp(inst)
        for rec in trace.fallback_events():
            assert rec.committed is None


class TestTraceSerialization:
    def test_jsonl_fields(self):
        import json

        _, trace = run_cp(mk((0, 1, 5), (0, 0, 4)))
        lines = [json.loads(line) for line in trace_to_jsonl(trace).splitlines()]
        assert lines[0]["t"] == 0
        assert lines[0]["case"] == "1.2.1"
        assert lines[0]["transmitted"] == 1
        assert lines[0]["committed"] == 0
        assert {v["name"] for v in lines[0]["m"]} == {"m0", "m1"}
        assert lines[1] == {"t": 1, "case": "commit", "transmitted": 0, "committed": None, "m": [], "q": []}
