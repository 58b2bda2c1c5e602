"""Edge-deletion search for a data-adaptive neighbourhood graph.

local_search runs the iterative per-vertex procedure: visit feasible
vertices in ascending index order, and for each still-feasible neighbour u
of the visited vertex v decide whether deleting the edge uv raises the
objective. The decision compares, at both endpoints, the best adjusted
contribution achievable by any deletion subset of the feasible
neighbourhood that keeps the edge against the best that drops it; the edge
goes when dropping wins strictly and both endpoints keep degree >= 1.
Passes repeat until one completes with no improvement; the state before
that final pass is returned.

The hot loop lives in a compiled extension when available, with a
pure-Python twin selected at import time otherwise (set
CARWEAVE_PURE_PYTHON=1 to force the fallback). brute_force_optimum is the
exact oracle for small instances.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from math import log, log1p
from typing import Sequence

import numpy as np

from . import _kernels_py
from .errors import DegreeCapError, ValidationError
from .graph import FeasibleSubgraph, Graph, canonical_edge
from .objective import (
    EPSILON,
    ObjectiveValue,
    objective,
    weighted_discrepancy_sum,
)

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_FORCE_PURE = os.environ.get("CARWEAVE_PURE_PYTHON", "") == "1"
_BACKEND = _compiled if (_compiled is not None and not _FORCE_PURE) else _kernels_py

__all__ = [
    "SearchConfig",
    "SearchTrace",
    "backend_name",
    "local_search",
    "brute_force_optimum",
    "best_subset_score",
]


def backend_name() -> str:
    """Which kernel lane local_search dispatches to: 'compiled' or 'python'."""
    return _BACKEND.backend_name()


@dataclass(frozen=True)
class SearchConfig:
    max_passes: int = 1000
    degree_cap: int = 25
    vertex_order: str = "ascending_index"
    single_edge_fallback: bool = False

    def __post_init__(self):
        if self.max_passes < 1:
            raise ValidationError("max_passes must be >= 1")
        if self.degree_cap < 1:
            raise ValidationError("degree_cap must be >= 1")
        if self.vertex_order != "ascending_index":
            raise ValidationError(f"unsupported vertex_order {self.vertex_order!r}")


@dataclass(frozen=True)
class SearchTrace:
    """Record of one search run.

    pass_objectives holds the objective after each accepted (improving)
    pass, so it is strictly increasing; deletions from the final
    non-improving pass are rolled back and never reported. passes counts
    every pass run, including that final one.
    """

    initial_objective: float
    pass_objectives: tuple[float, ...]
    deleted_edges: tuple[tuple[int, int], ...]
    passes: int
    terminated_by: str  # "no_improvement" | "pass_cap"


def _flat_adjacency(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(g.vertex_count + 1, dtype=np.int64)
    chunks = []
    for v in range(g.vertex_count):
        nbrs = g.neighbours(v)
        indptr[v + 1] = indptr[v] + len(nbrs)
        chunks.extend(nbrs)
    return indptr, np.asarray(chunks, dtype=np.int64)


def local_search(
    g: Graph, phi: Sequence[float], cfg: SearchConfig | None = None
) -> tuple[FeasibleSubgraph, SearchTrace]:
    """Search for an objective-maximising spanning subgraph of g.

    g must have minimum degree >= 1 and phi one value per vertex. The
    result never scores below the input graph; identical inputs and config
    give identical outputs.
    """
    if cfg is None:
        cfg = SearchConfig()
    if g.min_degree() < 1:
        raise ValidationError("input graph has an isolated vertex")
    if len(phi) != g.vertex_count:
        raise ValidationError(
            f"surface length {len(phi)} != vertex count {g.vertex_count}"
        )
    phi_arr = np.ascontiguousarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi_arr)):
        raise ValidationError("surface contains a non-finite value")

    indptr, nbrs = _flat_adjacency(g)
    deleted, pass_objectives, initial, passes, hit_cap = _BACKEND.run_local_search(
        indptr,
        nbrs,
        phi_arr,
        cfg.max_passes,
        cfg.degree_cap,
        cfg.single_edge_fallback,
        EPSILON,
    )
    kept = g.edges - {canonical_edge(u, v) for u, v in deleted}
    result = FeasibleSubgraph(g, kept)
    trace = SearchTrace(
        initial_objective=initial,
        pass_objectives=tuple(pass_objectives),
        deleted_edges=tuple((int(u), int(v)) for u, v in deleted),
        passes=passes,
        terminated_by="pass_cap" if hit_cap else "no_improvement",
    )
    return result, trace


def best_subset_score(
    v: int,
    u: int,
    include_u: bool,
    h: FeasibleSubgraph,
    href: FeasibleSubgraph,
    phi: Sequence[float],
    feasible: set[int],
    degree_cap: int = 25,
) -> float:
    """Best adjusted contribution of v over admissible deletion subsets.

    Subsets range over v's neighbours in h that lie in `feasible`; with
    include_u=True the subset must keep u, otherwise it must delete u.
    Subsets leaving v with degree 0 are inadmissible. Reference
    discrepancy totals come from href.

    This is the readable reference for the kernel's inner enumeration; it
    is not the hot path.
    """
    nbrs = h.neighbours(v)
    if u not in nbrs:
        raise ValidationError(f"{u} is not a neighbour of {v}")
    cand = [w for w in nbrs if w in feasible]
    if len(cand) > degree_cap:
        raise DegreeCapError(
            f"vertex {v} has {len(cand)} feasible neighbours; "
            f"exact enumeration capped at {degree_cap}"
        )
    if not include_u and u not in cand:
        raise ValidationError(f"deleting {u} requires it to be feasible")

    half_k = 0.5 * h.vertex_count
    s_ref = weighted_discrepancy_sum(href, phi)
    d0 = h.degree(v)
    t0 = sum(phi[w] for w in nbrs)
    best = float("-inf")
    for r in range(len(cand) + 1):
        for combo in itertools.combinations(cand, r):
            if include_u and u in combo:
                continue
            if not include_u and u not in combo:
                continue
            dp = d0 - r
            if dp == 0:
                continue
            mean = (t0 - sum(phi[w] for w in combo)) / dp
            diff = phi[v] - mean
            x_term = dp * (diff * diff)
            denom = s_ref - x_term
            if denom < EPSILON:
                denom = EPSILON
            score = 0.5 * log(dp) - half_k * log1p(x_term / denom)
            if score > best:
                best = score
    return best


def brute_force_optimum(
    g: Graph, phi: Sequence[float], edge_cap: int = 20
) -> tuple[FeasibleSubgraph, ObjectiveValue]:
    """Exact optimum over all feasible spanning subgraphs of g.

    Enumerates every deletion subset of the edge set, so g must have at
    most edge_cap edges. Ties break toward more retained edges, then the
    lexicographically smallest kept edge list.
    """
    if g.min_degree() < 1:
        raise ValidationError("input graph has an isolated vertex")
    edges = g.sorted_edges()
    m = len(edges)
    if m > edge_cap:
        raise ValidationError(f"{m} edges exceeds edge_cap={edge_cap}")
    k = g.vertex_count
    phi_arr = np.ascontiguousarray(phi, dtype=np.float64)
    if phi_arr.shape != (k,):
        raise ValidationError(f"surface length {phi_arr.size} != vertex count {k}")
    if not np.all(np.isfinite(phi_arr)):
        raise ValidationError("surface contains a non-finite value")

    # Per-edge contributions to degree and neighbour-phi sums; removing a
    # mask of edges is then a couple of matrix products per chunk.
    inc = np.zeros((m, k))
    nsum_delta = np.zeros((m, k))
    for i, (a, b) in enumerate(edges):
        inc[i, a] = 1.0
        inc[i, b] = 1.0
        nsum_delta[i, a] = phi_arr[b]
        nsum_delta[i, b] = phi_arr[a]
    deg_full = inc.sum(axis=0)
    nsum_full = nsum_delta.sum(axis=0)

    bit_id = np.arange(m, dtype=np.uint32)
    chunk = 1 << 14

    def chunk_values(start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        masks = np.arange(start, stop, dtype=np.uint32)
        bits = ((masks[:, None] >> bit_id) & 1).astype(np.float64)
        deg = deg_full - bits @ inc
        feas = (deg >= 1.0).all(axis=1)
        deg_safe = np.where(deg >= 1.0, deg, 1.0)
        nsum = nsum_full - bits @ nsum_delta
        diff = phi_arr - nsum / deg_safe
        s = (deg_safe * diff * diff).sum(axis=1)
        with np.errstate(divide="ignore"):
            val = 0.5 * np.log(deg_safe).sum(axis=1) - 0.5 * k * np.log(
                np.maximum(s, EPSILON)
            )
        val[~feas] = -np.inf
        return val, feas

    best_val = -np.inf
    any_feasible = False
    for start in range(0, 1 << m, chunk):
        stop = min(start + chunk, 1 << m)
        val, feas = chunk_values(start, stop)
        any_feasible = any_feasible or bool(feas.any())
        top = val.max()
        if top > best_val:
            best_val = top
    if not any_feasible:
        raise ValidationError("no feasible spanning subgraph exists")

    tied_masks: list[int] = []
    for start in range(0, 1 << m, chunk):
        stop = min(start + chunk, 1 << m)
        val, _ = chunk_values(start, stop)
        for off in np.nonzero(val == best_val)[0]:
            tied_masks.append(start + int(off))

    def kept_for(mask: int) -> list[tuple[int, int]]:
        return [e for i, e in enumerate(edges) if not (mask >> i) & 1]

    winner = min(tied_masks, key=lambda msk: (bin(msk).count("1"), kept_for(msk)))
    result = FeasibleSubgraph(g, kept_for(winner))
    return result, objective(result, phi_arr)
