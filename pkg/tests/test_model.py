"""Exact arithmetic, domain types, validation and the instance file format."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdsched import (
    ALPHA,
    InfeasibleScheduleError,
    Instance,
    InstanceFormatError,
    Packet,
    Quad17,
    R,
    Schedule,
    dump_instance,
    instance_hash,
    load_instance,
    parse_value,
    profit,
    quad_cmp,
    render_decimal,
    render_value,
    validate_instance,
)
from conftest import mk

rationals = st.fractions(
    min_value=-(10**6), max_value=10**6, max_denominator=10**4
)


class TestRat:
    def test_parse_integer_and_fraction_strings(self):
        assert parse_value("3") == 3
        assert parse_value("3/2") == Fraction(3, 2)
        assert parse_value(7) == 7
        assert parse_value("-4/6") == Fraction(-2, 3)

    def test_floats_rejected(self):
        with pytest.raises(InstanceFormatError):
            parse_value(1.5)
        with pytest.raises(InstanceFormatError):
            parse_value("1.5")
        with pytest.raises(InstanceFormatError):
            parse_value(True)

    @given(rationals)
    def test_render_parse_round_trip(self, x):
        assert parse_value(render_value(x)) == x

    def test_render_decimal(self):
        assert render_decimal(Fraction(3, 2)) == "1.500000000000"
        assert render_decimal(Fraction(-1, 3)) == "-0.333333333333"
        assert render_decimal(Fraction(2)) == "2.000000000000"


class TestQuad17:
    def test_constants(self):
        assert R.a == Fraction(1, 4) and R.b == Fraction(1, 4)
        assert ALPHA.a == Fraction(-3, 2) and ALPHA.b == Fraction(1, 2)

    def test_distinguished_identities_exact(self):
        # 2 = R * (ALPHA + 1) and ALPHA + 2 = 2 R, both exactly
        prod = R * (ALPHA + 1)
        assert prod.a == 2 and prod.b == 0
        assert quad_cmp(ALPHA + 2, R * 2) == 0

    def test_cmp_r_against_five_fourths(self):
        # sign of (1+sqrt17)/4 - 5/4 is the sign of sqrt17 - 4: positive
        assert quad_cmp(R, Fraction(5, 4)) > 0

    def test_cmp_alpha_below_r(self):
        # (-3+sqrt17)/2 < (1+sqrt17)/4 reduces to sqrt17 < 7
        assert quad_cmp(ALPHA, R) < 0

    def test_cmp_equal(self):
        x = Quad17(Fraction(2, 3), Fraction(-1, 5))
        assert quad_cmp(x, x) == 0

    def test_division(self):
        assert quad_cmp((R * ALPHA) / ALPHA, R) == 0
        two_over_r = Quad17.of(2) / R
        assert two_over_r.a == Fraction(-1, 2) and two_over_r.b == Fraction(1, 2)

    @given(rationals, rationals, rationals, rationals, rationals, rationals)
    @settings(max_examples=200)
    def test_field_distributivity(self, a, b, c, d, e, f):
        x, y, z = Quad17(a, b), Quad17(c, d), Quad17(e, f)
        assert (x + y) * z == x * z + y * z

    @given(rationals, rationals, rationals, rationals)
    @settings(max_examples=200)
    def test_sign_agrees_with_floats_when_clear(self, a, b, c, d):
        x, y = Quad17(a, b), Quad17(c, d)
        approx = x.to_float() - y.to_float()
        if abs(approx) > 1e-9:
            assert quad_cmp(x, y) == (1 if approx > 0 else -1)

    def test_sign_all_quadrants(self):
        assert Quad17(Fraction(0), Fraction(0)).sign() == 0
        assert Quad17(Fraction(1), Fraction(1)).sign() == 1
        assert Quad17(Fraction(-1), Fraction(-1)).sign() == -1
        # 5 - sqrt17 > 0 but 4 - sqrt17 < 0
        assert Quad17(Fraction(5), Fraction(-1)).sign() == 1
        assert Quad17(Fraction(4), Fraction(-1)).sign() == -1
        assert Quad17(Fraction(-4), Fraction(1)).sign() == 1
        assert Quad17(Fraction(-5), Fraction(1)).sign() == -1


class TestValidation:
    def test_not_two_bounded(self):
        inst = mk((0, 2, 1))
        reasons = [v.reason for v in validate_instance(inst)]
        assert reasons == ["not 2-bounded"]

    def test_non_positive_value(self):
        inst = mk((0, 0, 0))
        reasons = [v.reason for v in validate_instance(inst)]
        assert "non-positive value" in reasons

    def test_valid_instance(self):
        assert validate_instance(mk((0, 1, 3), (1, 1, 2))) == []

    def test_duplicate_ids(self):
        inst = Instance([Packet(0, 0, 0, Fraction(1)), Packet(0, 1, 1, Fraction(1))])
        assert any(v.reason == "duplicate packet id" for v in validate_instance(inst))

    def test_deadline_before_release(self):
        inst = Instance([Packet(0, 3, 2, Fraction(1))])
        assert any(v.reason == "deadline before release" for v in validate_instance(inst))


class TestProfit:
    def test_empty_schedule(self):
        assert profit(Schedule({}), mk((0, 0, 5))) == 0

    def test_sum(self):
        inst = mk((0, 0, 5), (0, 1, 3))
        assert profit(Schedule({0: 0, 1: 1}), inst) == 8

    def test_before_release_rejected(self):
        inst = mk((1, 1, 5))
        with pytest.raises(InfeasibleScheduleError, match="slot 0"):
            profit(Schedule({0: 0}), inst)

    def test_after_deadline_rejected(self):
        inst = mk((0, 0, 5))
        with pytest.raises(InfeasibleScheduleError, match="slot 1"):
            profit(Schedule({1: 0}), inst)

    def test_double_transmission_rejected(self):
        inst = mk((0, 1, 5))
        with pytest.raises(InfeasibleScheduleError, match="twice"):
            profit(Schedule({0: 0, 1: 0}), inst)


class TestInstanceFormat:
    def test_round_trip(self):
        inst = mk((0, 0, 1), (0, 1, "3/2"), (1, 2, 2))
        again = load_instance(dump_instance(inst))
        assert again == inst
        assert instance_hash(again) == instance_hash(inst)

    def test_reject_float_value(self):
        with pytest.raises(InstanceFormatError, match="float"):
            load_instance('{"packets": [{"release": 0, "deadline": 0, "value": 1.5}]}')

    def test_reject_bad_json_with_line(self):
        with pytest.raises(InstanceFormatError, match="line"):
            load_instance('{"packets": [,]}')

    def test_default_ids_from_position(self):
        inst = load_instance('{"packets": [{"release": 0, "deadline": 1, "value": "2"}]}')
        assert inst.packets[0].id == 0

    def test_duplicate_explicit_ids_rejected(self):
        doc = (
            '{"packets": ['
            '{"id": 1, "release": 0, "deadline": 0, "value": 1},'
            '{"id": 1, "release": 0, "deadline": 1, "value": 1}]}'
        )
        with pytest.raises(InstanceFormatError, match="unique"):
            load_instance(doc)

    def test_horizon(self):
        assert mk((0, 1, 1), (2, 3, 1)).horizon == 3
        assert Instance(()).horizon == -1
