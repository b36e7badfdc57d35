"""Core domain types and exact arithmetic.

Everything downstream (the online policy, the offline solvers, the
certification harness) works over these types.  Two rules keep the whole
artifact bit-exact:

* packet values, profits and ratios are arbitrary-precision rationals
  (`fractions.Fraction`, aliased ``Rat``), never floats;
* threshold comparisons against the irrational constants R = (1+sqrt17)/4
  and alpha = (-3+sqrt17)/2 happen in the quadratic field Q(sqrt17) via
  :class:`Quad17`, whose sign computation is exact integer arithmetic.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "Rat",
    "parse_value",
    "render_value",
    "render_decimal",
    "Quad17",
    "R",
    "ALPHA",
    "quad_cmp",
    "Packet",
    "Instance",
    "Schedule",
    "BufferState",
    "Violation",
    "validate_instance",
    "profit",
    "InfeasibleScheduleError",
    "InstanceFormatError",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "dump_instance",
    "instance_hash",
]

Rat = Fraction

_VALUE_RE = re.compile(r"^-?\d+(/\d+)?$")


class InstanceFormatError(ValueError):
    """Raised when an instance file or dict is malformed."""


class InfeasibleScheduleError(ValueError):
    """Raised when a schedule violates release/deadline/uniqueness rules."""


def parse_value(raw: object) -> Rat:
    """Parse a packet value: a JSON integer or a "num" / "num/den" string.

    Floats are rejected outright so no binary rounding can sneak into the
    exact pipeline.
    """
    if isinstance(raw, bool):
        raise InstanceFormatError(f"value must be an integer or fraction string, got {raw!r}")
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, float):
        raise InstanceFormatError(f"float values are not accepted (got {raw!r}); use 'num/den' strings")
    if isinstance(raw, str):
        if not _VALUE_RE.match(raw.strip()):
            raise InstanceFormatError(f"cannot parse value {raw!r}; expected 'n' or 'n/d'")
        return Fraction(raw.strip())
    raise InstanceFormatError(f"value must be an integer or fraction string, got {type(raw).__name__}")


def render_value(x: Rat) -> str:
    """Render a rational as 'n' or 'n/d'; parse_value(render_value(x)) == x."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def render_decimal(x: Rat, digits: int = 12) -> str:
    """Round-half-even decimal rendering with a fixed number of places.

    Purely presentational: verdicts are never derived from this output.
    """
    scaled = round(x * 10**digits)  # Fraction rounding is exact (banker's)
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


@dataclass(frozen=True)
class Quad17:
    """An element a + b*sqrt(17) of the real quadratic field Q(sqrt17).

    Addition, subtraction and multiplication are closed and exact; the sign
    of an element is decided by comparing a^2 against 17*b^2, so ordering
    against rationals and other field elements never touches a float.
    """

    a: Rat
    b: Rat = Fraction(0)

    @staticmethod
    def of(x: "Quad17 | Rat | int") -> "Quad17":
        if isinstance(x, Quad17):
            return x
        return Quad17(Fraction(x))

    def __add__(self, other: "Quad17 | Rat | int") -> "Quad17":
        o = Quad17.of(other)
        return Quad17(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other: "Quad17 | Rat | int") -> "Quad17":
        o = Quad17.of(other)
        return Quad17(self.a - o.a, self.b - o.b)

    def __rsub__(self, other: "Quad17 | Rat | int") -> "Quad17":
        return Quad17.of(other) - self

    def __neg__(self) -> "Quad17":
        return Quad17(-self.a, -self.b)

    def __mul__(self, other: "Quad17 | Rat | int") -> "Quad17":
        o = Quad17.of(other)
        return Quad17(self.a * o.a + 17 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __truediv__(self, other: "Quad17 | Rat | int") -> "Quad17":
        o = Quad17.of(other)
        norm = o.a * o.a - 17 * o.b * o.b  # (a+b*s)(a-b*s)
        if norm == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt17)")
        conj = Quad17(o.a / norm, -o.b / norm)
        return self * conj

    def sign(self) -> int:
        """Exact sign of a + b*sqrt(17): -1, 0 or +1."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # mixed signs: |a| vs |b|*sqrt(17)  <=>  a^2 vs 17 b^2
        lhs, rhs = a * a, 17 * b * b
        if a > 0:  # b < 0
            return 1 if lhs > rhs else (-1 if lhs < rhs else 0)
        return -1 if lhs > rhs else (1 if lhs < rhs else 0)

    def __lt__(self, other: "Quad17 | Rat | int") -> bool:
        return (self - other).sign() < 0

    def __le__(self, other: "Quad17 | Rat | int") -> bool:
        return (self - other).sign() <= 0

    def __gt__(self, other: "Quad17 | Rat | int") -> bool:
        return (self - other).sign() > 0

    def __ge__(self, other: "Quad17 | Rat | int") -> bool:
        return (self - other).sign() >= 0

    def to_float(self) -> float:
        """Approximate value; for display and sanity cross-checks only."""
        return float(self.a) + float(self.b) * 17.0**0.5

    def __repr__(self) -> str:
        return f"Quad17({render_value(self.a)} + {render_value(self.b)}*sqrt17)"


#: Competitive-ratio constant (1 + sqrt17) / 4, approx. 1.2808.
R = Quad17(Fraction(1, 4), Fraction(1, 4))

#: Threshold constant (-3 + sqrt17) / 2, approx. 0.5616.
ALPHA = Quad17(Fraction(-3, 2), Fraction(1, 2))


def quad_cmp(x: Quad17 | Rat | int, y: Quad17 | Rat | int) -> int:
    """Exact three-way comparison of two field elements: -1, 0 or +1."""
    return (Quad17.of(x) - Quad17.of(y)).sign()


@dataclass(frozen=True, slots=True)
class Packet:
    """One packet: transmittable at integer slots in [release, deadline].

    All instances here are 2-bounded: deadline - release is 0 or 1, i.e.
    each packet has at most two chances to be sent.
    """

    id: int
    release: int
    deadline: int
    value: Rat

    def is_two_packet_at(self, t: int) -> bool:
        """True if this packet is released at t with deadline t+1."""
        return self.release == t and self.deadline == t + 1


@dataclass(frozen=True)
class Instance:
    """An immutable input: a sequence of packets, ids unique."""

    packets: tuple[Packet, ...]

    def __init__(self, packets: Iterable[Packet]):
        object.__setattr__(self, "packets", tuple(packets))

    @property
    def horizon(self) -> int:
        """Largest deadline; -1 for the empty instance."""
        return max((p.deadline for p in self.packets), default=-1)

    def by_id(self, pid: int) -> Packet:
        return self._id_map[pid]

    @property
    def _id_map(self) -> dict[int, Packet]:
        cached = self.__dict__.get("_id_map_cache")
        if cached is None:
            cached = {p.id: p for p in self.packets}
            self.__dict__["_id_map_cache"] = cached
        return cached

    @property
    def arrivals(self) -> dict[int, tuple[Packet, ...]]:
        """Packets grouped by release time."""
        cached = self.__dict__.get("_arrivals_cache")
        if cached is None:
            grouped: dict[int, list[Packet]] = {}
            for p in self.packets:
                grouped.setdefault(p.release, []).append(p)
            cached = {t: tuple(ps) for t, ps in grouped.items()}
            self.__dict__["_arrivals_cache"] = cached
        return cached

    def __len__(self) -> int:
        return len(self.packets)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Transmissions of one algorithm: time slot -> packet id."""

    slots: Mapping[int, int]

    def __init__(self, slots: Mapping[int, int]):
        object.__setattr__(self, "slots", dict(slots))

    def packet_at(self, t: int) -> int | None:
        return self.slots.get(t)

    def times(self) -> list[int]:
        return sorted(self.slots)

    def last_time(self) -> int | None:
        """Time of the last transmission, None if nothing was sent."""
        return max(self.slots) if self.slots else None

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schedule) and dict(self.slots) == dict(other.slots)


@dataclass(frozen=True)
class BufferState:
    """The pending set immediately before the arrival subphase at `time`.

    Every pending packet was released strictly before `time`, has not been
    transmitted, and has deadline >= time; packets released exactly at
    `time` join during the arrival subphase, not here.
    """

    time: int
    pending: frozenset[int]

    def __init__(self, time: int, pending: Iterable[int]):
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "pending", frozenset(pending))


@dataclass(frozen=True)
class Violation:
    """One broken invariant found by validate_instance."""

    packet_id: int | None
    reason: str


def validate_instance(inst: Instance) -> list[Violation]:
    """Check all packet and instance invariants; empty list means valid."""
    out: list[Violation] = []
    seen: set[int] = set()
    for p in inst.packets:
        if p.id in seen:
            out.append(Violation(p.id, "duplicate packet id"))
        seen.add(p.id)
        if p.value <= 0:
            out.append(Violation(p.id, "non-positive value"))
        if p.release < 0:
            out.append(Violation(p.id, "negative release time"))
        if p.deadline < p.release:
            out.append(Violation(p.id, "deadline before release"))
        elif p.deadline - p.release > 1:
            out.append(Violation(p.id, "not 2-bounded"))
    return out


def profit(sched: Schedule, inst: Instance) -> Rat:
    """Exact total value of the scheduled packets.

    Raises InfeasibleScheduleError (naming the offending slot) if the
    schedule repeats a packet or places one outside [release, deadline].
    """
    ids = inst._id_map
    seen: set[int] = set()
    total = Fraction(0)
    for t in sorted(sched.slots):
        pid = sched.slots[t]
        if pid not in ids:
            raise InfeasibleScheduleError(f"slot {t}: unknown packet id {pid}")
        if pid in seen:
            raise InfeasibleScheduleError(f"slot {t}: packet {pid} transmitted twice")
        seen.add(pid)
        p = ids[pid]
        if not (p.release <= t <= p.deadline):
            raise InfeasibleScheduleError(
                f"slot {t}: packet {pid} outside its window [{p.release}, {p.deadline}]"
            )
        total += p.value
    return total


# ---------------------------------------------------------------------------
# Instance file format (JSON)
# ---------------------------------------------------------------------------

def instance_from_dict(doc: object) -> Instance:
    """Build an Instance from the JSON document structure.

    Expected shape: {"packets": [{"id": 0, "release": 0, "deadline": 1,
    "value": "3/2"}, ...]}.  The "id" field is optional and defaults to the
    position in the list; explicit ids must be unique.
    """
    if not isinstance(doc, dict) or "packets" not in doc:
        raise InstanceFormatError("expected an object with a 'packets' array")
    raw_packets = doc["packets"]
    if not isinstance(raw_packets, list):
        raise InstanceFormatError("'packets' must be an array")
    packets: list[Packet] = []
    for idx, entry in enumerate(raw_packets):
        if not isinstance(entry, dict):
            raise InstanceFormatError(f"packet #{idx}: expected an object")
        try:
            release = entry["release"]
            deadline = entry["deadline"]
            value = entry["value"]
        except KeyError as exc:
            raise InstanceFormatError(f"packet #{idx}: missing field {exc.args[0]!r}") from None
        pid = entry.get("id", idx)
        for name, v in (("id", pid), ("release", release), ("deadline", deadline)):
            if not isinstance(v, int) or isinstance(v, bool):
                raise InstanceFormatError(f"packet #{idx}: {name} must be an integer")
        packets.append(Packet(id=pid, release=release, deadline=deadline, value=parse_value(value)))
    inst = Instance(packets)
    if len({p.id for p in inst.packets}) != len(inst.packets):
        raise InstanceFormatError("packet ids are not unique")
    return inst


def instance_to_dict(inst: Instance) -> dict:
    return {
        "packets": [
            {"id": p.id, "release": p.release, "deadline": p.deadline, "value": render_value(p.value)}
            for p in inst.packets
        ]
    }


def load_instance(text: str) -> Instance:
    """Parse an instance from JSON text; errors carry line context."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(doc)


def dump_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n"


def instance_hash(inst: Instance) -> str:
    """Stable short hash of the canonical instance serialization."""
    canonical = json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
