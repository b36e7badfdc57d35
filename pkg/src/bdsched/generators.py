"""Instance sources: exhaustive grids, seeded fuzzing, structured families,
and a no-lookahead greedy baseline for contrast.

The exhaustive enumerator is the workhorse of desk-scale certification: it
streams every instance over a small release/value grid exactly once (up to
packet relabeling), so a sweep over it is a finite proof surface.  Value
grids deliberately include rationals sitting close to the guard thresholds
(5/4, 8/5, 13/8 straddle the interesting ratios), which pushes the observed
worst case toward the bound much faster than round numbers do.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement

from .model import Instance, Packet, Rat, Schedule

__all__ = [
    "GridSpec",
    "enumerate_instances",
    "count_instances",
    "RandomConfig",
    "gen_random",
    "greedy_baseline",
    "greedy_killer",
    "chain_family",
    "DEFAULT_VALUE_GRID",
]

#: Default value ladder; near-threshold rationals included on purpose.
DEFAULT_VALUE_GRID: tuple[Rat, ...] = (
    Fraction(1),
    Fraction(5, 4),
    Fraction(13, 8),
    Fraction(2),
    Fraction(3),
)


@dataclass(frozen=True)
class GridSpec:
    """Exhaustive grid: releases in [0, horizon], deadline offsets {0, 1},
    values from value_grid, at most max_packets packets per instance."""

    horizon: int
    max_packets: int
    value_grid: tuple[Rat, ...]
    allow_multi: bool = True

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not self.value_grid:
            raise ValueError("value grid must be non-empty")
        if any(v <= 0 for v in self.value_grid):
            raise ValueError("value grid must be positive")


def _universe(spec: GridSpec) -> list[tuple[int, int, Rat]]:
    """All packet shapes (release, deadline, value) in canonical order."""
    values = sorted(set(spec.value_grid))
    return [
        (r, r + off, v)
        for r in range(spec.horizon + 1)
        for off in (0, 1)
        for v in values
    ]


def enumerate_instances(spec: GridSpec):
    """Deterministic, duplicate-free stream of grid instances.

    Instances are multisets of packet shapes (ids are assigned in canonical
    order), so two inputs differing only by packet relabeling appear once.
    A zero packet budget yields just the empty instance; otherwise every
    instance carries between 1 and max_packets packets.
    """
    universe = _universe(spec)
    if spec.max_packets == 0:
        yield Instance(())
        return
    chooser = combinations_with_replacement if spec.allow_multi else combinations
    for size in range(1, spec.max_packets + 1):
        for combo in chooser(universe, size):
            yield Instance(
                Packet(id=i, release=r, deadline=d, value=v) for i, (r, d, v) in enumerate(combo)
            )


def count_instances(spec: GridSpec) -> int:
    """Closed-form size of the enumerate_instances stream."""
    u = len(_universe(spec))
    if spec.max_packets == 0:
        return 1
    if spec.allow_multi:
        return sum(math.comb(u + k - 1, k) for k in range(1, spec.max_packets + 1))
    return sum(math.comb(u, k) for k in range(1, spec.max_packets + 1))


@dataclass(frozen=True)
class RandomConfig:
    """Knobs for the seeded fuzzer."""

    horizon: int = 6
    arrival_rate: float = 1.2  # expected packets per time step
    max_per_step: int = 3
    value_grid: tuple[Rat, ...] = DEFAULT_VALUE_GRID

    def __post_init__(self):
        if self.horizon < 0 or self.max_per_step < 1:
            raise ValueError("bad fuzz config")
        if self.arrival_rate < 0 or self.arrival_rate > self.max_per_step:
            raise ValueError("arrival_rate must lie in [0, max_per_step]")


def gen_random(seed: int, config: RandomConfig = RandomConfig()) -> Instance:
    """Reproducible random instance: same seed, same instance."""
    rng = random.Random(seed)
    prob = config.arrival_rate / config.max_per_step
    packets: list[Packet] = []
    for t in range(config.horizon + 1):
        for _ in range(config.max_per_step):
            if rng.random() < prob:
                offset = rng.choice((0, 1))
                value = rng.choice(config.value_grid)
                packets.append(Packet(id=len(packets), release=t, deadline=t + offset, value=value))
    return Instance(packets)


def greedy_baseline(inst: Instance) -> Schedule:
    """No-lookahead contrast algorithm: at each step transmit the pending
    packet of maximum value (ties: deadline ascending, then id)."""
    arrivals = inst.arrivals
    pending: dict[int, Packet] = {}
    slots: dict[int, int] = {}
    for t in range(0, inst.horizon + 1):
        for p in arrivals.get(t, ()):
            pending[p.id] = p
        if pending:
            best = min(pending.values(), key=lambda p: (-p.value, p.deadline, p.id))
            slots[t] = best.id
            del pending[best.id]
        pending = {pid: p for pid, p in pending.items() if p.deadline > t}
    return Schedule(slots)


def greedy_killer() -> Instance:
    """Two packets that trick the greedy baseline into nearly halving its
    profit while a lookahead policy (and the optimum) collects both."""
    return Instance(
        (
            Packet(id=0, release=0, deadline=0, value=Fraction(1)),
            Packet(id=1, release=0, deadline=1, value=Fraction(101, 100)),
        )
    )


def chain_family(variant: str) -> Instance:
    """Hand-built instances that force the deep case chains.

    Reaching the family-2/3 cases needs an escalating ladder of arrivals
    (each new marginal packet large enough to beat the guard ratio), which
    random fuzzing hits only rarely; these fixed instances pin each branch.

    Variants: "2.1", "2.2.1", "2.2.2.1", "2.2.2.2", "2.2.2.3+3.1",
    "3.2.1", "3.2.2", "3.2.3".
    """
    F = Fraction
    # Shared prologue: q1(0,0), m0(0,1), m1(1,2) drive 1.2.3.4 at t=0.
    base = [
        (0, 0, F(1)),       # banked at t=0 by 1.2.3.4
        (0, 1, F(8, 5)),    # best pending at t=0
        (1, 2, F(13, 8)),   # marginal packet seen through lookahead
    ]
    if variant == "2.1":
        extra = []  # no big follow-up: family 2 settles immediately
    elif variant == "2.2.1":
        extra = [(2, 2, F(3))]  # huge one-shot arrival at t=2
    elif variant == "2.2.2.1":
        extra = [(2, 3, F(3)), (2, 3, F(2))]  # second t=2 arrival changes the slot-gain packet
    elif variant == "2.2.2.2":
        extra = [(2, 3, F(7, 2))]
    elif variant == "2.2.2.3+3.1":
        extra = [(2, 3, F(3))]
    elif variant == "3.2.1":
        extra = [(2, 3, F(3)), (3, 3, F(9))]
    elif variant == "3.2.2":
        extra = [(2, 3, F(3)), (3, 4, F(9)), (3, 3, F(2))]
    elif variant == "3.2.3":
        extra = [(2, 3, F(3)), (3, 4, F(9))]
    else:
        raise ValueError(f"unknown chain variant {variant!r}")
    shapes = base + extra
    return Instance(Packet(id=i, release=r, deadline=d, value=v) for i, (r, d, v) in enumerate(shapes))
