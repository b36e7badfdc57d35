"""Partial and full offline optima, checked against the enumeration oracle."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdsched import (
    BufferState,
    Instance,
    OracleSizeError,
    Packet,
    PartialQuery,
    brute_force_partial,
    m_packet,
    opt_full,
    p_set,
    q_packet,
    solve_partial,
)
from conftest import mk

B0 = BufferState(0, ())


def small_instances(max_packets=6, max_release=3):
    """Hypothesis strategy for little 2-bounded instances."""
    packet = st.tuples(
        st.integers(min_value=0, max_value=max_release),
        st.integers(min_value=0, max_value=1),
        st.sampled_from([Fraction(1), Fraction(5, 4), Fraction(13, 8), Fraction(2), Fraction(3)]),
    )
    return st.lists(packet, min_size=0, max_size=max_packets).map(
        lambda shapes: Instance(
            Packet(id=i, release=r, deadline=r + off, value=v) for i, (r, off, v) in enumerate(shapes)
        )
    )


class TestSolvePartial:
    def test_single_slot_prefers_max_value(self):
        inst = mk((0, 0, 5), (0, 1, 3))
        ps = solve_partial(PartialQuery(0, 0, 0), inst)
        assert ps.member_set == {0} and ps.total_value == 5

    def test_two_slots_take_both(self):
        inst = mk((0, 1, 5), (1, 1, 10))
        ps = solve_partial(PartialQuery(0, 1, 1), inst)
        assert ps.member_set == {0, 1}
        assert ps.total_value == 15
        assert dict(ps.assignment) == {0: 0, 1: 1}

    def test_extra_slot_may_stay_empty(self):
        inst = mk((0, 0, 5))
        ps = solve_partial(PartialQuery(0, 0, 1), inst)
        assert ps.member_set == {0} and ps.total_value == 5
        assert dict(ps.assignment) == {0: 0}

    def test_base_buffer_feeds_the_pool(self):
        # packet 0 released at 0 sits in the buffer at time 1
        inst = mk((0, 1, 5), (1, 1, 3))
        ps = solve_partial(PartialQuery(1, 1, 1, base_buffer=(0,)), inst)
        assert ps.member_set == {0}

    def test_query_order_enforced(self):
        with pytest.raises(ValueError):
            PartialQuery(2, 1, 3)

    def test_assignment_earliest_deadline_then_id(self):
        inst = mk((0, 1, 1), (0, 1, 2))
        ps = solve_partial(PartialQuery(0, 1, 1), inst)
        assert dict(ps.assignment) == {0: 0, 1: 1}


class TestBruteForceOracle:
    def test_empty_pool(self):
        ps = brute_force_partial(PartialQuery(0, 0, 0), Instance(()))
        assert ps.member_set == set() and ps.total_value == 0

    def test_matches_solver_on_example(self):
        inst = mk((0, 1, 5), (1, 1, 10))
        q = PartialQuery(0, 1, 1)
        assert brute_force_partial(q, inst).member_set == solve_partial(q, inst).member_set
        assert brute_force_partial(q, inst).total_value == 15

    def test_size_guard(self):
        inst = Instance(Packet(i, 0, 1, Fraction(1)) for i in range(21))
        with pytest.raises(OracleSizeError):
            brute_force_partial(PartialQuery(0, 0, 1), inst)

    @given(small_instances())
    @settings(max_examples=300, deadline=None)
    def test_solver_equals_oracle(self, inst):
        horizon = max(inst.horizon, 0)
        for t_arr in range(0, horizon + 1):
            for t_slot in range(t_arr, min(t_arr + 2, horizon + 1) + 1):
                q = PartialQuery(0, t_arr, t_slot)
                fast = solve_partial(q, inst)
                slow = brute_force_partial(q, inst)
                assert fast.member_set == slow.member_set
                assert fast.total_value == slow.total_value

    @given(small_instances())
    @settings(max_examples=150, deadline=None)
    def test_solver_assignment_always_feasible(self, inst):
        from bdsched import Schedule, profit

        horizon = max(inst.horizon, 0)
        q = PartialQuery(0, horizon, horizon)
        ps = solve_partial(q, inst)
        assert profit(Schedule(dict(ps.assignment)), inst) == ps.total_value


class TestPSetConventions:
    def test_degenerate_query_is_empty(self):
        inst = mk((0, 0, 5))
        assert p_set(inst, B0, 0, -1, -1).member_set == set()

    def test_p_set_uses_buffer_time_guard(self):
        inst = mk((0, 0, 5))
        with pytest.raises(ValueError):
            p_set(inst, BufferState(1, ()), 0, 0, 0)

    def test_simple_p_set(self):
        inst = mk((0, 0, 5), (0, 1, 3))
        assert p_set(inst, B0, 0, 0, 0).member_set == {0}


class TestSelectors:
    def test_m0_is_best_pending(self):
        inst = mk((0, 0, 5), (0, 1, 3))
        assert m_packet(inst, B0, 0, 0).id == 0

    def test_m1_is_the_marginal_packet(self):
        # widening to one more slot lets the weaker packet in
        inst = mk((0, 1, 5), (0, 0, 4))
        assert m_packet(inst, B0, 0, 0).id == 0
        assert m_packet(inst, B0, 0, 1).id == 1

    def test_q1_slot_gain(self):
        # P(0,1,1) = {0, 1}; the extra slot admits the expiring packet 2
        inst = mk((0, 1, 5), (1, 2, 4), (0, 0, 3))
        assert q_packet(inst, B0, 0, 1).id == 2

    def test_absent_selector_is_none(self):
        inst = mk((0, 0, 5))
        assert m_packet(inst, B0, 0, 1) is None
        assert q_packet(inst, B0, 0, 1) is None

    @given(small_instances())
    @settings(max_examples=200, deadline=None)
    def test_monotone_value_in_both_windows(self, inst):
        horizon = max(inst.horizon, 0)
        values = {}
        for t_arr in range(0, horizon + 1):
            for t_slot in range(t_arr, horizon + 2):
                values[(t_arr, t_slot)] = solve_partial(PartialQuery(0, t_arr, t_slot), inst).total_value
        for (t_arr, t_slot), v in values.items():
            if (t_arr + 1, t_slot) in values:
                assert values[(t_arr + 1, t_slot)] >= v
            if (t_arr, t_slot + 1) in values:
                assert values[(t_arr, t_slot + 1)] >= v


class TestOptFull:
    def test_forced_order(self):
        inst = mk((0, 0, 1), (0, 1, 2))
        sched, value = opt_full(inst)
        assert value == 3
        assert dict(sched.slots) == {0: 0, 1: 1}

    def test_tie_broken_by_id(self):
        inst = mk((0, 1, 1), (0, 1, 2))
        sched, value = opt_full(inst)
        assert value == 3
        assert dict(sched.slots) == {0: 0, 1: 1}

    def test_empty(self):
        sched, value = opt_full(Instance(()))
        assert value == 0 and dict(sched.slots) == {}

    @given(small_instances())
    @settings(max_examples=150, deadline=None)
    def test_opt_at_least_any_single_packet(self, inst):
        _, value = opt_full(inst)
        for p in inst.packets:
            assert value >= p.value
