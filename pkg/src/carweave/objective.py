"""Profiled pseudo-likelihood objective for degree-constrained spanning subgraphs.

The score of a candidate neighbourhood graph H over a residual surface
phi is

    f(H, phi) = 1/2 * sum_v ln(deg_H(v)) - K/2 * ln(sum_v deg_H(v) * ND_H(v))

where ND_H(v), the neighbourhood discrepancy, is the squared difference
between phi_v and the mean of phi over v's neighbours in H. The second
term is the profiled precision part: the precision that maximises the
un-profiled score has the closed form K / sum_v deg_H(v) * ND_H(v), and
substituting it back leaves the graph-only objective above.

A perfectly fitting subgraph drives the discrepancy sum to zero and the
objective to +infinity; an epsilon floor inside the logarithm keeps such
states finite and flags them as guarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, log1p, sqrt
from typing import Sequence

from .errors import ValidationError
from .graph import FeasibleSubgraph, Graph

__all__ = [
    "EPSILON",
    "ObjectiveValue",
    "CarHyperparams",
    "neighbourhood_discrepancy",
    "weighted_discrepancy_sum",
    "objective",
    "objective_at_tau",
    "tau_mle",
    "contribution",
    "adjusted_contribution",
    "partial_correlation",
]

# Floor applied inside logarithms of the discrepancy sum. Guarded results
# carry a flag so callers can treat perfect-fit subgraphs as maximal
# without propagating infinities.
EPSILON = 1e-12


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    discrepancy_sum: float
    guarded: bool


@dataclass(frozen=True)
class CarHyperparams:
    """Dependence (rho) and precision (tau) of the Leroux-form random field."""

    rho: float
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.tau > 0.0:
            raise ValidationError(f"tau must be positive, got {self.tau}")


def _check_surface(h: FeasibleSubgraph | Graph, phi: Sequence[float]) -> None:
    if len(phi) != h.vertex_count:
        raise ValidationError(
            f"surface length {len(phi)} != vertex count {h.vertex_count}"
        )
    for x in phi:
        if x != x or x in (float("inf"), float("-inf")):
            raise ValidationError("surface contains a non-finite value")


def neighbourhood_discrepancy(h: FeasibleSubgraph, phi: Sequence[float], v: int) -> float:
    """Squared gap between phi_v and the mean of phi over v's neighbours in h."""
    _check_surface(h, phi)
    nbrs = h.neighbours(v)
    if not nbrs:
        raise ValidationError(f"vertex {v} has degree 0")
    s = 0.0
    for w in nbrs:
        s += phi[w]
    diff = phi[v] - s / len(nbrs)
    return diff * diff


def weighted_discrepancy_sum(h: FeasibleSubgraph, phi: Sequence[float]) -> float:
    """sum_v deg(v) * ND(v) over all vertices, in ascending vertex order."""
    _check_surface(h, phi)
    total = 0.0
    for v in range(h.vertex_count):
        nbrs = h.neighbours(v)
        s = 0.0
        for w in nbrs:
            s += phi[w]
        diff = phi[v] - s / len(nbrs)
        total += len(nbrs) * (diff * diff)
    return total


def _sum_ln_deg(h: FeasibleSubgraph) -> float:
    t = 0.0
    for v in range(h.vertex_count):
        t += log(h.degree(v))
    return t


def objective(h: FeasibleSubgraph, phi: Sequence[float]) -> ObjectiveValue:
    """Evaluate the profiled objective; guarded when the discrepancy sum underflows."""
    s = float(weighted_discrepancy_sum(h, phi))
    half_k = 0.5 * h.vertex_count
    guarded = s < EPSILON
    value = 0.5 * _sum_ln_deg(h) - half_k * log(s if not guarded else EPSILON)
    return ObjectiveValue(value=float(value), discrepancy_sum=s, guarded=bool(guarded))


def objective_at_tau(h: FeasibleSubgraph, phi: Sequence[float], tau: float) -> float:
    """Un-profiled objective with the precision still explicit.

    Maximising this over tau > 0 and substituting the maximiser recovers
    objective() up to a surface-independent additive constant.
    """
    if not tau > 0.0:
        raise ValidationError(f"tau must be positive, got {tau}")
    s = weighted_discrepancy_sum(h, phi)
    k = h.vertex_count
    return 0.5 * k * log(tau) + 0.5 * _sum_ln_deg(h) - 0.5 * tau * s


def tau_mle(h: FeasibleSubgraph, phi: Sequence[float]) -> float:
    """Closed-form precision maximiser K / (sum_v deg(v) * ND(v))."""
    s = weighted_discrepancy_sum(h, phi)
    if s <= 0.0:
        raise ValidationError("discrepancy sum is zero; precision estimate diverges")
    return h.vertex_count / s


def contribution(v: int, h: FeasibleSubgraph, phi: Sequence[float]) -> float:
    """Per-vertex share of the objective.

    Summed over vertices this reproduces the objective up to additive
    constants; the denominator is the weighted discrepancy total excluding
    v's own term, floored at EPSILON.
    """
    _check_surface(h, phi)
    d = h.degree(v)
    if d < 1:
        raise ValidationError(f"vertex {v} has degree 0")
    half_k = 0.5 * h.vertex_count
    own = d * neighbourhood_discrepancy(h, phi, v)
    rest = weighted_discrepancy_sum(h, phi) - own
    if rest < EPSILON:
        rest = EPSILON
    return 0.5 * log(d) - half_k * log1p(own / rest)


def adjusted_contribution(
    v: int,
    h: FeasibleSubgraph,
    href: FeasibleSubgraph,
    phi: Sequence[float],
) -> float:
    """Contribution of v in h with the denominator taken from a reference graph.

    The denominator is href's weighted discrepancy total minus v's own term
    in h, floored at EPSILON when non-positive; intended for h differing
    from href only in edges incident to v.
    """
    _check_surface(h, phi)
    d = h.degree(v)
    if d < 1:
        raise ValidationError(f"vertex {v} has degree 0")
    half_k = 0.5 * h.vertex_count
    own = d * neighbourhood_discrepancy(h, phi, v)
    denom = weighted_discrepancy_sum(href, phi) - own
    if denom < EPSILON:
        denom = EPSILON
    return 0.5 * log(d) - half_k * log1p(own / denom)


def partial_correlation(g: Graph, hp: CarHyperparams, k: int, j: int) -> float:
    """Partial autocorrelation between units k and j implied by the random field.

    Zero for non-adjacent pairs (conditional independence) and for rho = 0.
    """
    if k == j:
        raise ValidationError("partial correlation requires two distinct vertices")
    w_kj = 1.0 if g.has_edge(k, j) else 0.0
    rho = hp.rho
    dk = rho * g.degree(k) + 1.0 - rho
    dj = rho * g.degree(j) + 1.0 - rho
    return rho * w_kj / sqrt(dk * dj)
