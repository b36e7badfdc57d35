from __future__ import annotations

from fractions import Fraction

from bdsched import Instance, Packet


def mk(*shapes) -> Instance:
    """Build an instance from (release, deadline, value) shapes; ids follow
    the argument order."""
    return Instance(
        Packet(id=i, release=r, deadline=d, value=Fraction(v)) for i, (r, d, v) in enumerate(shapes)
    )
