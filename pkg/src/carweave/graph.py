"""Undirected areal adjacency graphs and degree-constrained spanning subgraphs.

Vertices are dense 0-based integer indices. Adjacency is stored as sorted
per-vertex neighbour tuples so that all iteration over neighbours is
deterministic; the edge-deletion search depends on that ordering.
"""

from __future__ import annotations

from collections.abc import Iterable

from .errors import ValidationError

__all__ = [
    "Graph",
    "FeasibleSubgraph",
    "canonical_edge",
    "lattice_graph",
    "connected_components",
]

EdgePair = tuple[int, int]


def canonical_edge(u: int, v: int) -> EdgePair:
    """Return the unordered pair {u, v} as (min, max)."""
    return (u, v) if u < v else (v, u)


def _build_neighbour_lists(vertex_count: int, edges: frozenset[EdgePair]) -> tuple[tuple[int, ...], ...]:
    nbrs: list[list[int]] = [[] for _ in range(vertex_count)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return tuple(tuple(sorted(lst)) for lst in nbrs)


class Graph:
    """Simple undirected graph; immutable after construction.

    Isolated vertices are legal here (but not in FeasibleSubgraph).
    """

    __slots__ = ("vertex_count", "edges", "_nbrs")

    def __init__(self, vertex_count: int, edges: Iterable[EdgePair]):
        if vertex_count < 1:
            raise ValidationError(f"vertex_count must be >= 1, got {vertex_count}")
        canon = set()
        for u, v in edges:
            if u == v:
                raise ValidationError(f"self-loop at vertex {u}")
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise ValidationError(f"edge ({u},{v}) out of range for {vertex_count} vertices")
            canon.add(canonical_edge(u, v))
        self.vertex_count = int(vertex_count)
        self.edges: frozenset[EdgePair] = frozenset(canon)
        self._nbrs = _build_neighbour_lists(self.vertex_count, self.edges)

    @classmethod
    def from_edge_list(cls, vertex_count: int, pairs: Iterable[EdgePair]) -> Graph:
        """Construct from a list of (u, v) pairs; duplicates and orientation collapse."""
        return cls(vertex_count, pairs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.vertex_count:
            raise ValidationError(f"vertex {v} out of range for {self.vertex_count} vertices")

    def degree(self, v: int) -> int:
        self._check_vertex(v)
        return len(self._nbrs[v])

    def neighbours(self, v: int) -> tuple[int, ...]:
        """Sorted neighbours of v, excluding v itself."""
        self._check_vertex(v)
        return self._nbrs[v]

    def has_edge(self, u: int, v: int) -> bool:
        return canonical_edge(u, v) in self.edges

    def min_degree(self) -> int:
        return min(len(n) for n in self._nbrs)

    def sorted_edges(self) -> list[EdgePair]:
        return sorted(self.edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.vertex_count == other.vertex_count and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.vertex_count, self.edges))

    def __repr__(self) -> str:
        return f"Graph(vertex_count={self.vertex_count}, edges={self.edge_count})"


class FeasibleSubgraph:
    """Spanning subgraph of a base graph with minimum degree one.

    Edges may only ever be removed relative to the base; this is the search
    space of the edge-deletion optimiser.
    """

    __slots__ = ("base", "kept_edges", "_nbrs")

    def __init__(self, base: Graph, kept_edges: Iterable[EdgePair]):
        kept = frozenset(canonical_edge(u, v) for u, v in kept_edges)
        extra = kept - base.edges
        if extra:
            raise ValidationError(f"kept edges not present in base graph: {sorted(extra)[:5]}")
        nbrs = _build_neighbour_lists(base.vertex_count, kept)
        for v, lst in enumerate(nbrs):
            if not lst:
                raise ValidationError(f"vertex {v} would have degree 0")
        self.base = base
        self.kept_edges: frozenset[EdgePair] = kept
        self._nbrs = nbrs

    @classmethod
    def full(cls, base: Graph) -> FeasibleSubgraph:
        """The subgraph keeping every base edge; base must have min degree >= 1."""
        return cls(base, base.edges)

    @property
    def vertex_count(self) -> int:
        return self.base.vertex_count

    @property
    def edge_count(self) -> int:
        return len(self.kept_edges)

    @property
    def deleted_edges(self) -> frozenset[EdgePair]:
        return self.base.edges - self.kept_edges

    def degree(self, v: int) -> int:
        self.base._check_vertex(v)
        return len(self._nbrs[v])

    def neighbours(self, v: int) -> tuple[int, ...]:
        self.base._check_vertex(v)
        return self._nbrs[v]

    def has_edge(self, u: int, v: int) -> bool:
        return canonical_edge(u, v) in self.kept_edges

    def remove_edges(self, pairs: Iterable[EdgePair]) -> FeasibleSubgraph:
        """Return a new subgraph with the given kept edges removed."""
        drop = {canonical_edge(u, v) for u, v in pairs}
        missing = drop - self.kept_edges
        if missing:
            raise ValidationError(f"edges not present: {sorted(missing)[:5]}")
        return FeasibleSubgraph(self.base, self.kept_edges - drop)

    def as_graph(self) -> Graph:
        return Graph(self.base.vertex_count, self.kept_edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeasibleSubgraph):
            return NotImplemented
        return self.base == other.base and self.kept_edges == other.kept_edges

    def __repr__(self) -> str:
        return (
            f"FeasibleSubgraph(vertices={self.vertex_count}, "
            f"kept={self.edge_count}/{self.base.edge_count})"
        )


def lattice_graph(rows: int, cols: int) -> Graph:
    """Rook adjacency on a rows x cols grid; vertex index is row*cols + col."""
    if rows < 1 or cols < 1:
        raise ValidationError("rows and cols must be >= 1")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph(rows * cols, edges)


def connected_components(g: Graph | FeasibleSubgraph) -> list[set[int]]:
    """Partition of the vertex set into maximal connected sets.

    Components are ordered by their smallest vertex; isolated vertices form
    singletons.
    """
    n = g.vertex_count
    seen = [False] * n
    out: list[set[int]] = []
    for start in range(n):
        if seen[start]:
            continue
        comp = {start}
        seen[start] = True
        stack = [start]
        while stack:
            v = stack.pop()
            for w in g.neighbours(v):
                if not seen[w]:
                    seen[w] = True
                    comp.add(w)
                    stack.append(w)
        out.append(comp)
    return out
