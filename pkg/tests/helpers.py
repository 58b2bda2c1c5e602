"""Shared test utilities: random feasible subgraphs and small instances."""

from __future__ import annotations

import numpy as np

from carweave import FeasibleSubgraph, Graph, connected_components, lattice_graph
from carweave.errors import ValidationError


def p3() -> Graph:
    return Graph.from_edge_list(3, [(0, 1), (1, 2)])


def p4() -> Graph:
    return Graph.from_edge_list(4, [(0, 1), (1, 2), (2, 3)])


def c4() -> Graph:
    return Graph.from_edge_list(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


def star(leaves: int) -> Graph:
    return Graph.from_edge_list(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def random_feasible_subgraph(
    g: Graph, rng: np.random.Generator, drop_prob: float = 0.3
) -> FeasibleSubgraph:
    """Randomly delete edges while keeping every degree >= 1."""
    sub = FeasibleSubgraph.full(g)
    edges = sorted(g.edges)
    for idx in rng.permutation(len(edges)):
        if rng.random() < drop_prob:
            edge = edges[int(idx)]
            try:
                sub = sub.remove_edges([edge])
            except ValidationError:
                continue
    return sub


def random_connected_feasible_graph(
    rng: np.random.Generator, edge_cap: int = 12
) -> Graph:
    """Random connected min-degree-1 planar graph with at most edge_cap edges.

    Built as a random spanning subgraph of a small lattice, so planarity is
    by construction.
    """
    shapes = [
        (r, c)
        for r in (1, 2, 3)
        for c in (2, 3, 4)
        if 2 * r * c - r - c <= edge_cap and r * c >= 3
    ]
    rows, cols = shapes[rng.integers(len(shapes))]
    g = lattice_graph(rows, cols)
    sub = FeasibleSubgraph.full(g)
    edges = sorted(g.edges)
    for idx in rng.permutation(len(edges)):
        if rng.random() < 0.3:
            edge = edges[int(idx)]
            if edge not in sub.kept_edges:
                continue
            try:
                cand = sub.remove_edges([edge])
            except ValidationError:
                continue
            if len(connected_components(cand)) == 1:
                sub = cand
    return sub.as_graph()
