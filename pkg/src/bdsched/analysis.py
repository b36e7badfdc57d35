"""Interval partition of a run and executable per-instance bound checks.

The policy's timeline [0, tau] (tau = its last transmission) is cut into
intervals whose length is dictated by the case chain that started them; the
optimum's timeline is cut into shifted counterparts.  Comparing the two
profit streams interval by interval is what turns the global competitive
bound into finitely many exact rational-vs-Q(sqrt17) comparisons:

* per interval, opt profit <= R * policy profit;
* per interval, opt profit is bounded by a partial-optimum value whose
  query shape depends on whether the interval's last transmission was a
  freshly released packet with one slot of slack (a "2_t packet");
* whenever case 2.2.2.1 (resp. 3.2.2) fires, the canonical optimum is
  forced to transmit specific selector packets at specific times;
* the partial-optimum sets of neighbouring queries nest.

A failed check is reported as a finding (data, not an exception): on any
violation the instance is emitted for triage rather than silently patched.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import Instance, Quad17, R, Rat, Schedule, render_value
from .offline import p_set
from .cp import CaseTrace, StepRecord

__all__ = [
    "Interval",
    "PartitionError",
    "partition_cp",
    "partition_opt",
    "IntervalReport",
    "interval_report",
    "Finding",
    "check_lemma_bounds",
    "check_forced_opt",
    "check_inclusions",
]

#: Case labels that start a one-step interval.
_SINGLE = {"1.1"}
#: Case labels that start a two-step interval (commit follows at t+1).
_PAIR = {"1.2.1", "1.2.2", "1.2.3.1", "1.2.3.2", "1.2.3.3"}
#: Continuations after 1.2.3.4 at t: case at t+1 -> interval end offset.
_FAMILY2_END = {"2.1": 2, "2.2.1": 2, "2.2.2.2": 2, "2.2.2.1": 1}
#: Continuations after 2.2.2.3 at t+1: case at t+2 -> interval end offset.
_FAMILY3_END = {"3.1": 3, "3.2.1": 3, "3.2.3": 3, "3.2.2": 2}


class PartitionError(RuntimeError):
    """The trace's case chain matches no known interval pattern."""


@dataclass(frozen=True)
class Interval:
    """One segment of the comparison.

    cp_span covers the policy's timeline, opt_span the (possibly shifted)
    optimum's; v_cp / v_opt are the exact profits earned inside them.
    """

    cp_span: tuple[int, int]
    opt_span: tuple[int, int]
    v_cp: Rat
    v_opt: Rat
    trigger: str

    @property
    def within_bound(self) -> bool:
        """Exact check v_opt <= R * v_cp in Q(sqrt17)."""
        return Quad17.of(self.v_opt) <= R * self.v_cp

    @property
    def is_idle(self) -> bool:
        return self.trigger == "idle"


def _span_records(trace: CaseTrace) -> dict[int, StepRecord]:
    return {rec.t: rec for rec in trace.steps}


def partition_cp(trace: CaseTrace) -> list[tuple[int, int, str]]:
    """Cut [0, tau] into (start, end, trigger) spans.

    Interval lengths follow the case chain: a 1.1 step stands alone;
    1.2.x cases incorporate their committed follow-up step; a 1.2.3.4 step
    absorbs the family-2 step after it, and family 3 after that, per the
    continuation tables.  Steps where a documented fallback replaced the
    case action stand alone (they commit nothing).  Idle steps inside
    [0, tau] become zero-profit singleton spans.
    """
    recs = _span_records(trace)
    tau = max((rec.t for rec in trace.steps if rec.transmitted is not None), default=None)
    if tau is None:
        return []
    spans: list[tuple[int, int, str]] = []
    t = 0
    while t <= tau:
        rec = recs.get(t)
        if rec is None:
            raise PartitionError(f"no record at time {t}")
        if rec.case == "idle":
            spans.append((t, t, "idle"))
            t += 1
            continue
        if rec.case == "commit":
            raise PartitionError(f"interval starts on a committed transmission at t={t}")
        if rec.fallback:
            spans.append((t, t, f"{rec.case}[{rec.fallback}]"))
            t += 1
            continue
        if rec.case in _SINGLE:
            spans.append((t, t, rec.case))
            t += 1
            continue
        if rec.case in _PAIR:
            spans.append((t, t + 1, rec.case))
            t += 2
            continue
        if rec.case == "1.2.3.4":
            follow = recs.get(t + 1)
            if follow is None or follow.case not in _FAMILY2_END:
                if follow is not None and follow.case == "2.2.2.3":
                    third = recs.get(t + 2)
                    if third is None or third.case not in _FAMILY3_END:
                        raise PartitionError(f"unrecognized family-3 continuation at t={t + 2}")
                    end = t + _FAMILY3_END[third.case]
                    spans.append((t, end, f"1.2.3.4+2.2.2.3+{third.case}"))
                    t = end + 1
                    continue
                raise PartitionError(f"unrecognized family-2 continuation at t={t + 1}")
            end = t + _FAMILY2_END[follow.case]
            spans.append((t, end, f"1.2.3.4+{follow.case}"))
            t = end + 1
            continue
        raise PartitionError(f"interval cannot start with case {rec.case} at t={t}")
    return spans


def _is_two_packet_sent(inst: Instance, sched: Schedule, t: int) -> int | None:
    """Id of the packet sent at t if it was released at t with deadline t+1."""
    pid = sched.packet_at(t)
    if pid is None:
        return None
    p = inst.by_id(pid)
    return pid if p.is_two_packet_at(t) else None


def partition_opt(
    spans: Sequence[tuple[int, int, str]],
    cp_sched: Schedule,
    opt_sched: Schedule,
    inst: Instance,
) -> list[tuple[int, int]]:
    """Shifted counterpart spans on the optimum's timeline.

    For a span (t, t'): the start moves to t+1 when the policy sent a
    freshly released one-slack packet at t-1 and the optimum sends that
    same packet at t; the end moves to t'+1 under the mirrored condition
    at t'.  The two rules dovetail, so consecutive shifted spans stay
    disjoint.
    """
    out: list[tuple[int, int]] = []
    for start, end, _trigger in spans:
        new_start = start
        if start >= 1:
            pid = _is_two_packet_sent(inst, cp_sched, start - 1)
            if pid is not None and opt_sched.packet_at(start) == pid:
                new_start = start + 1
        new_end = end
        pid = _is_two_packet_sent(inst, cp_sched, end)
        if pid is not None and opt_sched.packet_at(end + 1) == pid:
            new_end = end + 1
        out.append((new_start, new_end))
    return out


@dataclass(frozen=True)
class IntervalReport:
    """All intervals of one run plus the global exact comparisons."""

    intervals: tuple[Interval, ...]
    v_cp: Rat
    v_opt: Rat

    @property
    def global_within_bound(self) -> bool:
        return Quad17.of(self.v_opt) <= R * self.v_cp

    @property
    def opt_covered(self) -> bool:
        """Whole-run sanity: total optimum profit <= sum of interval v_opt."""
        return self.v_opt <= sum((iv.v_opt for iv in self.intervals), Fraction(0))

    @property
    def worst_interval(self) -> Interval | None:
        worst = None
        for iv in self.intervals:
            if iv.v_cp == 0:
                if iv.v_opt > 0:
                    return iv
                continue
            if worst is None or iv.v_opt * worst.v_cp > worst.v_opt * iv.v_cp:
                worst = iv
        return worst


def build_intervals(
    inst: Instance,
    trace: CaseTrace,
    cp_sched: Schedule,
    opt_sched: Schedule,
    v_cp: Rat,
    v_opt: Rat,
) -> IntervalReport:
    """Assemble Interval objects from precomputed runs."""
    spans = partition_cp(trace)
    opt_spans = partition_opt(spans, cp_sched, opt_sched, inst)
    cp_values = {t: inst.by_id(pid).value for t, pid in cp_sched.slots.items()}
    opt_values = {t: inst.by_id(pid).value for t, pid in opt_sched.slots.items()}

    intervals = []
    claimed: set[int] = set()
    for (start, end, trigger), (o_start, o_end) in zip(spans, opt_spans):
        vi = sum((cp_values.get(t, Fraction(0)) for t in range(start, end + 1)), Fraction(0))
        vo = Fraction(0)
        for t in range(o_start, o_end + 1):
            if t in opt_values and t not in claimed:  # earliest span wins an overlap
                claimed.add(t)
                vo += opt_values[t]
        intervals.append(Interval((start, end), (o_start, o_end), vi, vo, trigger))
    return IntervalReport(tuple(intervals), v_cp, v_opt)


def interval_report(inst: Instance) -> IntervalReport:
    """Run everything needed and report per-interval and global comparisons."""
    from .cp import run_cp
    from .offline import opt_full
    from .model import profit

    cp_sched, trace = run_cp(inst)
    opt_sched, v_opt = opt_full(inst)
    v_cp = profit(cp_sched, inst)
    return build_intervals(inst, trace, cp_sched, opt_sched, v_cp, v_opt)


@dataclass(frozen=True)
class Finding:
    """One violated inequality, serializable for triage."""

    kind: str  # "interval-bound", "partial-bound", "forced-opt", "inclusion", "coverage"
    detail: str
    lhs: str
    rhs: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail, "lhs": self.lhs, "rhs": self.rhs}


def check_interval_bounds(report: IntervalReport) -> list[Finding]:
    """Exact v_opt <= R * v_cp per interval, plus the global bound."""
    out = []
    for i, iv in enumerate(report.intervals):
        if not iv.within_bound:
            out.append(
                Finding(
                    "interval-bound",
                    f"interval {i} {iv.trigger} cp_span={iv.cp_span} opt_span={iv.opt_span}",
                    render_value(iv.v_opt),
                    f"R*{render_value(iv.v_cp)}",
                )
            )
    if not report.global_within_bound:
        out.append(Finding("interval-bound", "global", render_value(report.v_opt), f"R*{render_value(report.v_cp)}"))
    if not report.opt_covered:
        out.append(
            Finding(
                "coverage",
                "interval opt-profits do not cover the optimum",
                render_value(report.v_opt),
                render_value(sum((iv.v_opt for iv in report.intervals), Fraction(0))),
            )
        )
    return out


def check_lemma_bounds(inst: Instance, trace: CaseTrace, report: IntervalReport) -> list[Finding]:
    """Per-interval partial-optimum bounds.

    For an interval (t, t'): if the packet the policy sent at t' still had a
    slot of slack (released at t' with deadline t'+1), the optimum profit of
    the shifted span is bounded by the partial optimum allowed one extra
    slot, V(t, t', t'+1); otherwise by V(t, t', t').  Idle spans are skipped.
    """
    out = []
    sched_values = {rec.t: rec.transmitted for rec in trace.steps}
    for i, iv in enumerate(report.intervals):
        if iv.is_idle:
            continue
        start, end = iv.cp_span
        pid = sched_values.get(end)
        if pid is None:
            continue
        sent_last = inst.by_id(pid)
        slack = sent_last.is_two_packet_at(end)
        slot_end = end + 1 if slack else end
        bound = p_set(inst, trace.buffers[start], start, end, slot_end).total_value
        if iv.v_opt > bound:
            out.append(
                Finding(
                    "partial-bound",
                    f"interval {i} {iv.trigger} span={iv.cp_span} "
                    f"{'one-slack' if slack else 'no-slack'} V({start},{end},{slot_end})",
                    render_value(iv.v_opt),
                    render_value(bound),
                )
            )
    return out


def check_forced_opt(inst: Instance, trace: CaseTrace, opt_sched: Schedule) -> list[Finding]:
    """Forced transmissions of the canonical optimum.

    When case 2.2.2.1 fires at u, the optimum must send the two packets
    gained at base time u-1 exactly at u-1 and u; when 3.2.2 fires at u,
    the three packets gained at base u-2 go at u-2, u-1, u.

    The claim presumes the optimum's slot at the base time is free.  If the
    policy sent a one-slack packet at base-1 and the optimum replays that
    same packet at the base time (the start-shift situation of the interval
    comparison), the optimum's first slot is already spoken for and the
    forced layout does not apply; such firings are skipped.
    """
    from .offline import m_packet

    sent = {rec.t: rec.transmitted for rec in trace.steps if rec.transmitted is not None}

    def start_shifted(base: int) -> bool:
        prev = sent.get(base - 1)
        if prev is None:
            return False
        return inst.by_id(prev).is_two_packet_at(base - 1) and opt_sched.packet_at(base) == prev

    out = []
    for rec in trace.steps:
        if rec.case == "2.2.2.1":
            base = rec.t - 1
            count = 2
        elif rec.case == "3.2.2":
            base = rec.t - 2
            count = 3
        else:
            continue
        if start_shifted(base):
            continue
        expected = [m_packet(inst, trace.buffers[base], base, i) for i in range(count)]
        for offset, pkt in enumerate(expected):
            if pkt is None:
                out.append(Finding("forced-opt", f"case {rec.case} at t={rec.t}: selector {offset} absent", "-", "-"))
                continue
            got = opt_sched.packet_at(base + offset)
            if got != pkt.id:
                out.append(
                    Finding(
                        "forced-opt",
                        f"case {rec.case} at t={rec.t}: optimum sends {got} at {base + offset}",
                        str(got),
                        str(pkt.id),
                    )
                )
    return out


def check_inclusions(inst: Instance, trace: CaseTrace, window: int = 3) -> list[Finding]:
    """Nesting of neighbouring partial-optimum sets along a run.

    With P(t, t', t'') the canonical partial-optimum member set computed
    from the run's genuine buffers B(t):

      (1) P(t, t', t')   is contained in P(t, t'+1, t'+1)
      (2) P(t, t', t')   is contained in P(t, t', t'+1)
      (3) P(t+1, t', t') is contained in P(t, t', t')

    and each same-base inclusion (1)/(2) adds at most one packet.  The
    cross-base relation (3) presumes that everything the base-t optimum
    counted on is still present at t+1: if a member of P(t, t', t') was
    transmitted at t or expired at t, the base-t+1 optimum may legitimately
    refill with a previously rejected packet, so for those pairs only the
    unconditional consequence V(t+1, t', t') <= V(t, t', t') is required.
    The value inequality is checked for every pair either way.

    Checked for every recorded t and t' up to `window` steps ahead.
    """
    out = []
    times = sorted(trace.buffers)
    sent = {rec.t: rec.transmitted for rec in trace.steps if rec.transmitted is not None}

    def query(t: int, t_arr: int, t_slot: int):
        return p_set(inst, trace.buffers[t], t, t_arr, t_slot)

    for t in times:
        sent_at_t = {sent[t]} if t in sent else set()
        for t_arr in range(t, t + window + 1):
            narrow_ps = query(t, t_arr, t_arr)
            narrow = narrow_ps.member_set
            grown_arr = query(t, t_arr + 1, t_arr + 1).member_set
            grown_slot = query(t, t_arr, t_arr + 1).member_set
            if not narrow <= grown_arr:
                out.append(
                    Finding("inclusion", f"P({t},{t_arr},{t_arr}) !<= P({t},{t_arr + 1},{t_arr + 1})",
                            str(sorted(narrow)), str(sorted(grown_arr)))
                )
            if not narrow <= grown_slot:
                out.append(
                    Finding("inclusion", f"P({t},{t_arr},{t_arr}) !<= P({t},{t_arr},{t_arr + 1})",
                            str(sorted(narrow)), str(sorted(grown_slot)))
                )
            if len(grown_arr) - len(narrow) > 1:
                out.append(Finding("inclusion", f"P({t},{t_arr + 1},{t_arr + 1}) adds >1 over P({t},{t_arr},{t_arr})",
                                   str(sorted(narrow)), str(sorted(grown_arr))))
            if len(grown_slot) - len(narrow) > 1:
                out.append(Finding("inclusion", f"P({t},{t_arr},{t_arr + 1}) adds >1 over P({t},{t_arr},{t_arr})",
                                   str(sorted(narrow)), str(sorted(grown_slot))))
            if t + 1 in trace.buffers and t_arr >= t + 1:
                later_ps = query(t + 1, t_arr, t_arr)
                if later_ps.total_value > narrow_ps.total_value:
                    out.append(
                        Finding("inclusion", f"V({t + 1},{t_arr},{t_arr}) > V({t},{t_arr},{t_arr})",
                                render_value(later_ps.total_value), render_value(narrow_ps.total_value))
                    )
                members_left = any(
                    pid in sent_at_t or inst.by_id(pid).deadline == t for pid in narrow
                )
                if not members_left and not later_ps.member_set <= narrow:
                    out.append(
                        Finding("inclusion", f"P({t + 1},{t_arr},{t_arr}) !<= P({t},{t_arr},{t_arr})",
                                str(sorted(later_ps.member_set)), str(sorted(narrow)))
                    )
    return out
