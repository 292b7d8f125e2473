"""Flat adjacency arrays for the event engines.

Neighbor lists are expanded by multiplicity so a uniform slot pick realizes
the jump law r_{x,y} / r(x) for both rate conventions.
"""

from __future__ import annotations

from .errors import ParameterOutOfRange, TotalUnitOnIrregular
from .graphs import Graph


class FlatGraph:
    """Graph unpacked into plain lists for tight loops."""

    __slots__ = ("n", "off", "nbr", "deg", "rate", "r_max", "r_min", "regular", "r0")

    def __init__(self, g: Graph, convention: str = "per_edge_unit"):
        self.n = g.n
        off = [0]
        nbr: list[int] = []
        for u in range(g.n):
            for v, m in g.adjacency[u]:
                nbr.extend([v] * m)
            off.append(len(nbr))
        self.off = off
        self.nbr = nbr
        self.deg = [off[i + 1] - off[i] for i in range(g.n)]
        if convention == "per_edge_unit":
            self.rate = [float(d) for d in self.deg]
        elif convention == "total_unit":
            if len(set(self.deg)) != 1:
                raise TotalUnitOnIrregular("total-unit walk needs a regular graph")
            self.rate = [1.0] * g.n
        else:
            raise ParameterOutOfRange(f"unknown rate convention {convention!r}")
        self.r_max = max(self.rate)
        self.r_min = min(self.rate)
        self.regular = len(set(self.rate)) == 1
        self.r0 = self.rate[0] if self.regular else 0.0

    def neighbor(self, x: int, u: float) -> int:
        """Neighbor of x picked by a uniform variate u in [0, 1)."""
        base = self.off[x]
        return self.nbr[base + int(u * (self.off[x + 1] - base))]
