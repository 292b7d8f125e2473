"""Graph construction: configuration model, truncated unimodular trees,
and deterministic transitive families.

All graphs are finite undirected multigraphs in compressed adjacency form.
Multiplicities are kept explicitly; a multi-edge of multiplicity m acts as
jump rate m for the walk built on top of the graph.  Self-loops produced by
half-edge matching are deleted (a loop ring moves nothing).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfeasibleDegreeSequence,
    NotConnectedAfterRetries,
    ParameterOutOfRange,
    TooLargeForExact,
    ZeroMean,
)

__all__ = [
    "DegreeDistribution",
    "Graph",
    "size_biased",
    "sample_configuration_model",
    "sample_ugt",
    "make_transitive",
    "cycle_graph",
    "torus_graph",
    "complete_graph",
    "hypercube_graph",
    "path_graph",
    "is_connected",
    "vertex_expansion_exact",
    "write_graph",
    "read_graph",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class DegreeDistribution:
    """Degree law given by explicit support ``[(degree, probability), ...]``."""

    support: tuple[tuple[int, float], ...]
    mean: float = field(init=False)

    def __post_init__(self):
        if not self.support:
            raise ParameterOutOfRange("empty degree support")
        total = 0.0
        for deg, p in self.support:
            if deg < 1:
                raise ParameterOutOfRange(f"supported degree {deg} < 1")
            if p < 0.0 or p > 1.0:
                raise ParameterOutOfRange(f"probability {p} outside [0, 1]")
            total += p
        if abs(total - 1.0) > _PROB_TOL:
            raise ParameterOutOfRange(f"probabilities sum to {total}, not 1")
        object.__setattr__(
            self, "mean", float(sum(d * p for d, p in self.support))
        )

    @classmethod
    def from_pairs(cls, pairs) -> "DegreeDistribution":
        return cls(tuple((int(d), float(p)) for d, p in sorted(pairs)))

    @classmethod
    def delta(cls, degree: int) -> "DegreeDistribution":
        """Point mass at one degree."""
        return cls(((int(degree), 1.0),))

    @classmethod
    def uniform(cls, degrees) -> "DegreeDistribution":
        degs = sorted(set(int(d) for d in degrees))
        p = 1.0 / len(degs)
        return cls(tuple((d, p) for d in degs))

    @property
    def min_degree(self) -> int:
        return min(d for d, _ in self.support)

    @property
    def max_degree(self) -> int:
        return max(d for d, _ in self.support)

    @property
    def cm_safe(self) -> bool:
        """True when the minimum supported degree is >= 3 (expander regime)."""
        return self.min_degree >= 3

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        degs = np.array([d for d, _ in self.support], dtype=np.int64)
        probs = np.array([p for _, p in self.support], dtype=float)
        probs = probs / probs.sum()
        return rng.choice(degs, size=n, p=probs)


def size_biased(dist: DegreeDistribution) -> DegreeDistribution:
    """Size-biased offspring law: D*(k) = (k+1) D(k+1) / mean(D)."""
    if dist.mean <= 0.0:
        raise ZeroMean("degree distribution has zero mean")
    pairs = [(d - 1, d * p / dist.mean) for d, p in dist.support if d >= 1]
    pairs = [(d, p) for d, p in pairs if p > 0.0]
    if any(d < 1 for d, _ in pairs):
        # degree-1 atoms bias down to 0 offspring; keep them as explicit support
        raise ParameterOutOfRange("size-biased law leaves the degree-1 support")
    return DegreeDistribution.from_pairs(pairs)


@dataclass(frozen=True)
class Graph:
    """Finite multigraph in compressed adjacency form.

    adjacency[v] is a sorted tuple of (neighbor, multiplicity) pairs with no
    self-loop entries; the pair (u, v, m) appears from both endpoints.
    ``family`` tags deterministic built-ins, e.g. ("cycle", 4), and implies
    vertex transitivity for the named families.
    """

    n: int
    adjacency: tuple[tuple[tuple[int, int], ...], ...]
    root: int | None = None
    family: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterOutOfRange("graph needs at least one vertex")

    @classmethod
    def from_edges(cls, n, edges, root=None, family=None) -> "Graph":
        """Build from an iterable of (u, v) or (u, v, multiplicity)."""
        mult: dict[tuple[int, int], int] = {}
        for e in edges:
            u, v = e[0], e[1]
            m = e[2] if len(e) > 2 else 1
            if u == v:
                continue  # self-loops are dropped on normalization
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterOutOfRange(f"edge ({u},{v}) outside vertex range")
            if m < 1:
                raise ParameterOutOfRange("edge multiplicity must be positive")
            key = (u, v) if u < v else (v, u)
            mult[key] = mult.get(key, 0) + int(m)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for (u, v), m in mult.items():
            adj[u].append((v, m))
            adj[v].append((u, m))
        return cls(
            n=n,
            adjacency=tuple(tuple(sorted(a)) for a in adj),
            root=root,
            family=family,
        )

    @property
    def degrees(self) -> np.ndarray:
        """Per-vertex total degree, counting multiplicities."""
        return np.array(
            [sum(m for _, m in nbrs) for nbrs in self.adjacency], dtype=np.int64
        )

    @property
    def d_max(self) -> int:
        return int(self.degrees.max())

    @property
    def edge_total(self) -> int:
        """Number of edges counted with multiplicity."""
        return int(self.degrees.sum()) // 2

    @property
    def transitive(self) -> bool:
        return self.family is not None and self.family[0] in (
            "cycle",
            "torus",
            "complete",
            "hypercube",
        )

    def edge_list(self) -> list[tuple[int, int, int]]:
        """Undirected edges as (u, v, mult) with u < v, sorted."""
        out = []
        for u, nbrs in enumerate(self.adjacency):
            for v, m in nbrs:
                if u < v:
                    out.append((u, v, m))
        return sorted(out)

    def is_regular(self) -> bool:
        degs = self.degrees
        return bool((degs == degs[0]).all())

    def rate_matrix(self) -> np.ndarray:
        """Dense symmetric matrix of edge multiplicities (zero diagonal)."""
        r = np.zeros((self.n, self.n))
        for u, nbrs in enumerate(self.adjacency):
            for v, m in nbrs:
                r[u, v] = m
        return r


def is_connected(g: Graph) -> bool:
    """Breadth-first reachability of every vertex from vertex 0."""
    if g.n == 1:
        return True
    seen = bytearray(g.n)
    seen[0] = 1
    stack = [0]
    count = 1
    adj = g.adjacency
    while stack:
        u = stack.pop()
        for v, _ in adj[u]:
            if not seen[v]:
                seen[v] = 1
                count += 1
                stack.append(v)
    return count == g.n


def sample_configuration_model(
    D: DegreeDistribution,
    n: int,
    rng: np.random.Generator,
    require_connected: bool = False,
    max_retries: int = 200,
    collapse_multiedges: bool = False,
) -> Graph:
    """Random multigraph by uniform matching of half edges.

    Degrees are i.i.d. from D, resampled as a whole sequence until their sum
    is even.  Self-loops are deleted; parallel edges are kept with
    multiplicity unless ``collapse_multiedges``.  With ``require_connected``
    the entire graph is rejection-resampled until connected.
    """
    if n < 2:
        raise ParameterOutOfRange("configuration model needs n >= 2")
    if D.mean <= 0.0:
        raise ZeroMean("degree distribution has zero mean")
    if require_connected and not D.cm_safe:
        warnings.warn(
            "require_connected with minimum degree < 3 may reject many samples",
            stacklevel=2,
        )

    def draw_even_degrees():
        for _ in range(max_retries):
            degs = D.sample(n, rng)
            if int(degs.sum()) % 2 == 0:
                return degs
        raise InfeasibleDegreeSequence(
            f"no even degree sum within {max_retries} draws"
        )

    for _ in range(max_retries):
        degs = draw_even_degrees()
        stubs = np.repeat(np.arange(n, dtype=np.int64), degs)
        rng.shuffle(stubs)
        us = stubs[0::2]
        vs = stubs[1::2]
        mult: dict[tuple[int, int], int] = {}
        for u, v in zip(us.tolist(), vs.tolist()):
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            mult[key] = mult.get(key, 0) + 1
        edges = [
            (u, v, 1 if collapse_multiedges else m) for (u, v), m in mult.items()
        ]
        g = Graph.from_edges(n, edges, family=None)
        if not require_connected or is_connected(g):
            return g
    raise NotConnectedAfterRetries(
        f"no connected sample within {max_retries} attempts"
    )


def sample_ugt(
    D: DegreeDistribution, depth: int, rng: np.random.Generator
) -> Graph:
    """Rooted tree cut at ``depth``: root offspring ~ D, interior offspring
    from the size-biased law, leaves at the cut depth."""
    if depth < 0:
        raise ParameterOutOfRange("depth must be >= 0")
    edges: list[tuple[int, int]] = []
    if depth == 0:
        return Graph.from_edges(1, edges, root=0)
    Dstar = size_biased(D)
    next_id = 1
    frontier = [(0, 0)]  # (vertex, depth)
    while frontier:
        v, d = frontier.pop()
        if d >= depth:
            continue
        law = D if v == 0 else Dstar
        k = int(law.sample(1, rng)[0])
        for _ in range(k):
            edges.append((v, next_id))
            frontier.append((next_id, d + 1))
            next_id += 1
    return Graph.from_edges(next_id, edges, root=0)


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ParameterOutOfRange("cycle needs n >= 3")
    edges = [(i, (i + 1) % n) for i in range(n)]
    return Graph.from_edges(n, edges, family=("cycle", n))


def path_graph(n: int) -> Graph:
    """Simple path; the 2-path is the smallest connected test chain."""
    if n < 2:
        raise ParameterOutOfRange("path needs n >= 2")
    edges = [(i, i + 1) for i in range(n - 1)]
    return Graph.from_edges(n, edges, family=None)


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise ParameterOutOfRange("complete graph needs n >= 2")
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return Graph.from_edges(n, edges, family=("complete", n))


def torus_graph(d: int, L: int) -> Graph:
    """d-dimensional discrete torus of side L, lexicographic labeling."""
    if d < 1 or L < 3:
        raise ParameterOutOfRange("torus needs d >= 1 and L >= 3")
    n = L**d
    strides = [L ** (d - 1 - j) for j in range(d)]

    def idx(coords):
        return sum(c * s for c, s in zip(coords, strides))

    edges = []
    for v in range(n):
        coords = []
        rem = v
        for s in strides:
            coords.append(rem // s)
            rem %= s
        for j in range(d):
            up = list(coords)
            up[j] = (up[j] + 1) % L
            edges.append((v, idx(up)))
    return Graph.from_edges(n, edges, family=("torus", d, L))


def hypercube_graph(d: int) -> Graph:
    if d < 1:
        raise ParameterOutOfRange("hypercube needs d >= 1")
    n = 1 << d
    edges = [
        (v, v ^ (1 << j)) for v in range(n) for j in range(d) if v < v ^ (1 << j)
    ]
    return Graph.from_edges(n, edges, family=("hypercube", d))


def make_transitive(family: str, *params: int) -> Graph:
    """Dispatch on family name: cycle(n), torus(d, L), complete(n), hypercube(d)."""
    builders = {
        "cycle": cycle_graph,
        "torus": torus_graph,
        "complete": complete_graph,
        "hypercube": hypercube_graph,
    }
    if family not in builders:
        raise ParameterOutOfRange(f"unknown transitive family {family!r}")
    return builders[family](*params)


def vertex_expansion_exact(g: Graph) -> float:
    """Exhaustive vertex expansion: min over nonempty S with |S| <= n/2 of
    |boundary(S)| / |S|, boundary = outside vertices adjacent to S."""
    n = g.n
    if n > 20:
        raise TooLargeForExact("vertex expansion enumeration capped at n = 20")
    if n < 2:
        raise ParameterOutOfRange("expansion needs n >= 2")
    nbr_mask = [0] * n
    for u, nbrs in enumerate(g.adjacency):
        m = 0
        for v, _ in nbrs:
            m |= 1 << v
        nbr_mask[u] = m
    half = n // 2
    best = float("inf")
    full = (1 << n) - 1
    for s in range(1, 1 << n):
        size = s.bit_count()
        if size > half:
            continue
        reach = 0
        ss = s
        while ss:
            v = (ss & -ss).bit_length() - 1
            reach |= nbr_mask[v]
            ss &= ss - 1
        boundary = (reach & ~s & full).bit_count()
        ratio = boundary / size
        if ratio < best:
            best = ratio
    return best


def write_graph(g: Graph, path) -> None:
    """Version-tagged text format, exact round-trip."""
    lines = g.edge_list()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"crwgraph v1 {g.n} {len(lines)}\n")
        for u, v, m in lines:
            fh.write(f"{u} {v} {m}\n")


def read_graph(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "crwgraph" or header[1] != "v1":
            raise ParameterOutOfRange(f"{path}: not a crwgraph v1 file")
        n, m_lines = int(header[2]), int(header[3])
        edges = []
        for _ in range(m_lines):
            u, v, m = fh.readline().split()
            edges.append((int(u), int(v), int(m)))
    return Graph.from_edges(n, edges)
