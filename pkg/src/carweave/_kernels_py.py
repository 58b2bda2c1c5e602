"""Pure-Python local-search kernel; fallback for the compiled extension.

Keep this file and _kernels.pyx in lock-step: both implement exactly the
same pass structure with the same floating-point operation order, so the
two lanes produce identical results on identical inputs.

Adjacency is a flat slot array: vertex v's neighbours occupy
nbrs[indptr[v]:indptr[v+1]] in ascending order, with deleted slots set to
-1. Edges are only ever deleted, so surviving slots stay sorted and every
neighbourhood scan is deterministic.
"""

from __future__ import annotations

from math import log, log1p

from .errors import DegreeCapError, NumericalError

# Incremental vs recomputed discrepancy totals must agree this tightly at
# the end of every pass.
_SYNC_TOL = 1e-9


def backend_name() -> str:
    return "python"


def run_local_search(indptr_arr, nbrs_arr, phi_arr, max_passes, degree_cap,
                     single_edge_fallback, eps):
    """One full local-search run over a feasible graph.

    Returns (accepted_deletions, pass_objectives, initial_objective,
    total_passes, hit_pass_cap). Deletions are canonical (min, max) pairs in
    acceptance order; deletions from a final non-improving pass are rolled
    back and not reported.
    """
    indptr = [int(x) for x in indptr_arr]
    slots = [int(x) for x in nbrs_arr]
    phi = [float(x) for x in phi_arr]
    k = len(indptr) - 1
    half_k = 0.5 * k

    deg = [indptr[v + 1] - indptr[v] for v in range(k)]
    nd = [0.0] * k
    in_w = [0] * k

    def nd_of(v):
        s = 0.0
        for i in range(indptr[v], indptr[v + 1]):
            w = slots[i]
            if w >= 0:
                s += phi[w]
        diff = phi[v] - s / deg[v]
        return diff * diff

    def refresh_all():
        total = 0.0
        for v in range(k):
            nd[v] = nd_of(v)
            total += deg[v] * nd[v]
        return total

    def objective_from(s_total):
        t = 0.0
        for v in range(k):
            t += log(deg[v])
        return 0.5 * t - half_k * log(s_total if s_total >= eps else eps)

    def live_phi_sum(v):
        s = 0.0
        for i in range(indptr[v], indptr[v + 1]):
            w = slots[i]
            if w >= 0:
                s += phi[w]
        return s

    def candidates(v):
        out = []
        for i in range(indptr[v], indptr[v + 1]):
            w = slots[i]
            if w >= 0 and in_w[w]:
                out.append(w)
        return out

    def best_pair_scores(x, special, cand, s_ref):
        # Max adjusted contribution of x over deletion subsets of cand,
        # split by whether the subset contains `special`. Subsets that
        # would leave x with degree 0 are inadmissible.
        c = len(cand)
        if c > degree_cap:
            if not single_edge_fallback:
                raise DegreeCapError(
                    f"vertex {x} has {c} feasible neighbours; "
                    f"exact enumeration capped at {degree_cap}"
                )
            masks = [0] + [1 << j for j in range(c)]
        else:
            masks = range(1 << c)
        d0 = deg[x]
        t0 = live_phi_sum(x)
        phix = phi[x]
        best_with = float("-inf")
        best_without = float("-inf")
        for mask in masks:
            b = 0
            ssum = 0.0
            has_special = False
            for j in range(c):
                if (mask >> j) & 1:
                    b += 1
                    w = cand[j]
                    ssum += phi[w]
                    if w == special:
                        has_special = True
            dp = d0 - b
            if dp == 0:
                continue
            mean = (t0 - ssum) / dp
            diff = phix - mean
            x_term = dp * (diff * diff)
            denom = s_ref - x_term
            if denom < eps:
                denom = eps
            score = 0.5 * log(dp) - half_k * log1p(x_term / denom)
            if has_special:
                if score > best_without:
                    best_without = score
            else:
                if score > best_with:
                    best_with = score
        return best_with, best_without

    state = {"s": 0.0}

    def delete_edge(a, b):
        s = state["s"]
        s -= deg[a] * nd[a]
        s -= deg[b] * nd[b]
        for i in range(indptr[a], indptr[a + 1]):
            if slots[i] == b:
                slots[i] = -1
                break
        deg[a] -= 1
        for i in range(indptr[b], indptr[b + 1]):
            if slots[i] == a:
                slots[i] = -1
                break
        deg[b] -= 1
        if deg[a] < 1 or deg[b] < 1:
            raise NumericalError("deletion produced an isolated vertex")
        nd[a] = nd_of(a)
        nd[b] = nd_of(b)
        s += deg[a] * nd[a]
        s += deg[b] * nd[b]
        state["s"] = s

    state["s"] = refresh_all()
    initial_objective = objective_from(state["s"])
    old_score = float("-inf")
    new_score = initial_objective
    accepted = []
    pass_objectives = []
    passes = 0
    hit_cap = False

    while old_score < new_score:
        if passes >= max_passes:
            hit_cap = True
            break
        old_score = new_score
        this_pass = []
        for v in range(k):
            in_w[v] = 1 if deg[v] > 1 else 0
        order = [v for v in range(k) if in_w[v]]
        for v in order:
            if not in_w[v]:
                continue
            u_list = candidates(v)
            s_ref = state["s"]  # reference graph frozen per vertex visit
            for u in u_list:
                if not in_w[v]:
                    break
                if not in_w[u]:
                    continue
                bw_v, bo_v = best_pair_scores(v, u, candidates(v), s_ref)
                bw_u, bo_u = best_pair_scores(u, v, candidates(u), s_ref)
                if bw_v + bw_u < bo_v + bo_u and deg[v] > 1 and deg[u] > 1:
                    delete_edge(v, u)
                    this_pass.append((v, u) if v < u else (u, v))
                    if deg[u] == 1:
                        in_w[u] = 0
                    if deg[v] == 1:
                        in_w[v] = 0
        passes += 1
        s_full = refresh_all()
        if abs(state["s"] - s_full) > _SYNC_TOL * max(1.0, abs(s_full)):
            raise NumericalError(
                "incremental discrepancy total drifted from full recomputation: "
                f"{state['s']!r} vs {s_full!r}"
            )
        state["s"] = s_full
        new_score = objective_from(s_full)
        if new_score > old_score:
            pass_objectives.append(new_score)
            accepted.extend(this_pass)

    return accepted, pass_objectives, initial_objective, passes, hit_cap
