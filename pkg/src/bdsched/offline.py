"""Offline optima: the full clairvoyant optimum and the partial solver.

The partial solver answers queries "seeded with buffer B at time t, fed the
arrivals of [t, t'], transmitting only in slots [t, t''], what is the best
packet set?".  Feasible packet sets form a transversal matroid (packets
matchable into distinct slots of their availability windows), so a greedy
sweep in one fixed canonical order, accepting a packet whenever the kept
set stays matchable, is optimal.  The single global canonical order --
value descending, deadline ascending, release ascending, id ascending --
also pins down every tie, which makes the nesting relations between
neighbouring queries and the uniqueness of their set differences hold by
construction rather than by luck.

``brute_force_partial`` is the independent oracle: straight enumeration of
packet subsets with a backtracking matcher, sharing no code path with the
greedy solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .model import BufferState, Instance, Packet, Rat, Schedule

__all__ = [
    "PartialQuery",
    "PSet",
    "SelectorError",
    "OracleSizeError",
    "canonical_key",
    "solve_partial",
    "brute_force_partial",
    "p_set",
    "m_packet",
    "q_packet",
    "opt_full",
    "opt_schedule",
]

#: Guard for the enumeration oracle.
BRUTE_FORCE_LIMIT = 20


class SelectorError(RuntimeError):
    """A set difference that must be a singleton had two or more packets."""


class OracleSizeError(ValueError):
    """brute_force_partial refused a query with too many eligible packets."""


def canonical_key(p: Packet) -> tuple:
    """The one tie-breaking order used everywhere: value desc, deadline asc,
    release asc, id asc."""
    return (-p.value, p.deadline, p.release, p.id)


@dataclass(frozen=True)
class PartialQuery:
    """A partial-optimum query.

    start:       first transmission slot t (the seeded buffer is B(t))
    arrival_end: last arrival time t' fed to the solver (t <= t')
    slot_end:    last transmission slot t'' (t' <= t'')
    base_buffer: packet ids pending immediately before the arrivals at t
    """

    start: int
    arrival_end: int
    slot_end: int
    base_buffer: frozenset[int]

    def __init__(self, start: int, arrival_end: int, slot_end: int, base_buffer: Iterable[int] = ()):
        if not (start <= arrival_end <= slot_end):
            raise ValueError(f"query out of order: t={start}, t'={arrival_end}, t''={slot_end}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "arrival_end", arrival_end)
        object.__setattr__(self, "slot_end", slot_end)
        object.__setattr__(self, "base_buffer", frozenset(base_buffer))


@dataclass(frozen=True)
class PSet:
    """Result of a partial-optimum query.

    members:     kept packet ids in canonical order
    assignment:  slot -> packet id, earliest-deadline-first within members
    total_value: exact sum of member values
    """

    members: tuple[int, ...]
    assignment: tuple[tuple[int, int], ...]
    total_value: Rat

    @property
    def member_set(self) -> frozenset[int]:
        return frozenset(self.members)

    def __len__(self) -> int:
        return len(self.members)


_EMPTY_PSET = PSet(members=(), assignment=(), total_value=Fraction(0))


def _eligible(q: PartialQuery, inst: Instance) -> list[Packet]:
    """Packets the query may transmit, in canonical order.

    A packet can only ever occupy a slot in [max(t, release), min(t'', deadline)];
    packets with an empty window are dropped here.
    """
    pool: list[Packet] = []
    for p in inst.packets:
        if p.id in q.base_buffer or q.start <= p.release <= q.arrival_end:
            if max(q.start, p.release) <= min(q.slot_end, p.deadline):
                pool.append(p)
    pool.sort(key=canonical_key)
    return pool


def _window(p: Packet, q: PartialQuery) -> range:
    return range(max(q.start, p.release), min(q.slot_end, p.deadline) + 1)


def _edf_assignment(kept: Sequence[Packet], q: PartialQuery) -> dict[int, int]:
    """Assign kept packets to slots: sweep slots in time order, at each slot
    transmit the available packet with the earliest deadline (ties by id).

    Availability windows are contiguous, so this realizes an assignment
    whenever one exists.
    """
    unassigned = {p.id: p for p in kept}
    out: dict[int, int] = {}
    for s in range(q.start, q.slot_end + 1):
        best: Packet | None = None
        for p in unassigned.values():
            if max(q.start, p.release) <= s <= p.deadline:
                if best is None or (p.deadline, p.id) < (best.deadline, best.id):
                    best = p
        if best is not None:
            out[s] = best.id
            del unassigned[best.id]
    if unassigned:
        raise AssertionError(f"earliest-deadline assignment failed for {sorted(unassigned)}")
    return out


def solve_partial(q: PartialQuery, inst: Instance) -> PSet:
    """Canonical maximum-value feasible packet set for a partial query.

    Greedy over the canonical order with an augmenting-path feasibility
    test; the kept set is then laid out earliest-deadline-first.
    """
    pool = _eligible(q, inst)
    matching: dict[int, Packet] = {}  # slot -> packet

    def try_place(p: Packet, visited: set[int]) -> bool:
        for s in _window(p, q):
            if s in visited:
                continue
            visited.add(s)
            occupant = matching.get(s)
            if occupant is None or try_place(occupant, visited):
                matching[s] = p
                return True
        return False

    kept: list[Packet] = []
    for p in pool:
        if try_place(p, set()):
            kept.append(p)
    assignment = _edf_assignment(kept, q)
    return PSet(
        members=tuple(p.id for p in kept),
        assignment=tuple(sorted(assignment.items())),
        total_value=sum((p.value for p in kept), Fraction(0)),
    )


def _matchable(packets: Sequence[Packet], slots: Sequence[int], lo: int) -> dict[int, int] | None:
    """Backtracking exact matcher used only by the enumeration oracle.

    Tries every slot choice for every packet, in (packet id, slot) order;
    returns a slot->id assignment or None.
    """
    slot_free = {s: True for s in slots}
    ordered = sorted(packets, key=lambda p: p.id)
    chosen: dict[int, int] = {}

    def place(i: int) -> bool:
        if i == len(ordered):
            return True
        p = ordered[i]
        for s in slots:
            if slot_free[s] and max(lo, p.release) <= s <= p.deadline:
                slot_free[s] = False
                chosen[s] = p.id
                if place(i + 1):
                    return True
                slot_free[s] = True
                del chosen[s]
        return False

    return dict(chosen) if place(0) else None


def brute_force_partial(q: PartialQuery, inst: Instance) -> PSet:
    """Independent oracle: enumerate every packet subset, keep the feasible
    one of maximum total value, ties resolved by the canonical order.

    Refuses queries with more than BRUTE_FORCE_LIMIT eligible packets.
    """
    pool = _eligible(q, inst)
    if len(pool) > BRUTE_FORCE_LIMIT:
        raise OracleSizeError(f"{len(pool)} eligible packets exceeds the oracle limit of {BRUTE_FORCE_LIMIT}")
    slots = list(range(q.start, q.slot_end + 1))
    positions = {p.id: i for i, p in enumerate(pool)}

    best_subset: tuple[Packet, ...] | None = None
    best_value = Fraction(-1)
    best_rank: tuple[int, ...] = ()
    best_assignment: dict[int, int] = {}
    max_size = min(len(pool), len(slots))
    for size in range(0, max_size + 1):
        for subset in combinations(pool, size):
            assignment = _matchable(subset, slots, q.start)
            if assignment is None:
                continue
            value = sum((p.value for p in subset), Fraction(0))
            rank = tuple(sorted(positions[p.id] for p in subset))
            if value > best_value or (value == best_value and best_subset is not None and rank < best_rank):
                best_subset, best_value, best_rank = subset, value, rank
                best_assignment = assignment
    if best_subset is None or not best_subset:
        return _EMPTY_PSET
    ordered = sorted(best_subset, key=canonical_key)
    return PSet(
        members=tuple(p.id for p in ordered),
        assignment=tuple(sorted(best_assignment.items())),
        total_value=best_value,
    )


def p_set(inst: Instance, buffer: BufferState, t: int, arrival_end: int, slot_end: int) -> PSet:
    """Partial optimum seeded with the online buffer B(t).

    The degenerate query (t, t-1, t-1) is the empty set by convention.
    """
    if buffer.time != t:
        raise ValueError(f"buffer snapshot is for time {buffer.time}, query starts at {t}")
    if arrival_end == t - 1 and slot_end == t - 1:
        return _EMPTY_PSET
    return solve_partial(PartialQuery(t, arrival_end, slot_end, buffer.pending), inst)


def _single(diff: frozenset[int], what: str, inst: Instance) -> Packet | None:
    if not diff:
        return None
    if len(diff) > 1:
        raise SelectorError(f"{what} has {len(diff)} packets {sorted(diff)}; expected at most one")
    return inst.by_id(next(iter(diff)))


def m_packet(inst: Instance, buffer: BufferState, t: int, i: int) -> Packet | None:
    """The packet gained by widening both the arrival and slot windows from
    t+i-1 to t+i; None if nothing is gained."""
    if i < 0:
        raise ValueError("selector index must be >= 0")
    wide = p_set(inst, buffer, t, t + i, t + i)
    narrow = p_set(inst, buffer, t, t + i - 1, t + i - 1)
    return _single(wide.member_set - narrow.member_set, f"m_{i}({t})", inst)


def q_packet(inst: Instance, buffer: BufferState, t: int, i: int) -> Packet | None:
    """The packet gained by one extra transmission slot beyond the arrival
    window, t+i+1 instead of t+i; None if nothing is gained."""
    if i < 0:
        raise ValueError("selector index must be >= 0")
    wide = p_set(inst, buffer, t, t + i, t + i + 1)
    narrow = p_set(inst, buffer, t, t + i, t + i)
    return _single(wide.member_set - narrow.member_set, f"q_{i}({t})", inst)


def opt_full(inst: Instance) -> tuple[Schedule, Rat]:
    """Canonical clairvoyant optimum over slots [0, horizon]."""
    if not inst.packets:
        return Schedule({}), Fraction(0)
    q = PartialQuery(0, inst.horizon, inst.horizon, ())
    ps = solve_partial(q, inst)
    return Schedule(dict(ps.assignment)), ps.total_value


def opt_schedule(inst: Instance) -> Schedule:
    return opt_full(inst)[0]
