"""Netlist value type and its line-oriented text form.

Text form::

    * sketch2netlist v1
    V1 N1 N2
    R1 N1 N2

Net ``k`` (dense, zero-based) is written ``N{k+1}``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .detection import ComponentClass
from .geometry import Point

HEADER = "* sketch2netlist v1"


class NetlistFormatError(ValueError):
    pass


@dataclass(frozen=True)
class NetlistComponent:
    cls: ComponentClass
    designator: str
    net_a: int
    net_b: int


@dataclass(frozen=True)
class Netlist:
    components: tuple[NetlistComponent, ...]
    net_points: tuple[Point, ...] = field(default_factory=tuple)

    def __post_init__(self):
        names = [c.designator for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("duplicate designators")
        used = {n for c in self.components for n in (c.net_a, c.net_b)}
        if used and used != set(range(max(used) + 1)):
            raise ValueError(f"net ids are not dense: {sorted(used)}")

    @property
    def net_count(self) -> int:
        used = {n for c in self.components for n in (c.net_a, c.net_b)}
        return len(used)


def net_name(net_id: int) -> str:
    return f"N{net_id + 1}"


def format_netlist(nl: Netlist) -> str:
    lines = [HEADER]
    for c in nl.components:
        lines.append(f"{c.designator} {net_name(c.net_a)} {net_name(c.net_b)}")
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> Netlist:
    """Read the text form back. Net names may be any token; ids are re-densified."""
    comps = []
    ids: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise NetlistFormatError(f"line {lineno}: expected 'NAME NET NET', got {raw!r}")
        name, a, b = parts
        if not name[:1].isalpha():
            raise NetlistFormatError(f"line {lineno}: bad designator {name!r}")
        try:
            cls = ComponentClass.from_prefix(name[0].upper())
        except ValueError as exc:
            raise NetlistFormatError(f"line {lineno}: {exc}") from None
        for net in (a, b):
            ids.setdefault(net, len(ids))
        comps.append(NetlistComponent(cls, name, ids[a], ids[b]))
    try:
        return Netlist(tuple(comps))
    except ValueError as exc:
        raise NetlistFormatError(str(exc)) from None


def read_netlist(path: str | os.PathLike) -> Netlist:
    with open(path, "r", encoding="utf-8") as f:
        return parse_netlist(f.read())


def write_netlist(path: str | os.PathLike, nl: Netlist) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_netlist(nl))
