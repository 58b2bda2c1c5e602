# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled local-search kernel.

Mirror of _kernels_py.run_local_search: same pass structure, same
floating-point operation order. Keep the two files in lock-step.
"""

from libc.math cimport INFINITY, log, log1p

import numpy as np

from .errors import DegreeCapError, NumericalError

cdef double SYNC_TOL = 1e-9


def backend_name():
    return "compiled"


cdef struct PairScores:
    double best_with
    double best_without


cdef inline double _nd_of(long long v, long long[::1] indptr, long long[::1] slots,
                          long long[::1] deg, double[::1] phi) noexcept nogil:
    cdef double s = 0.0
    cdef double diff
    cdef Py_ssize_t i
    cdef long long w
    for i in range(indptr[v], indptr[v + 1]):
        w = slots[i]
        if w >= 0:
            s += phi[w]
    diff = phi[v] - s / deg[v]
    return diff * diff


cdef inline double _refresh_all(long long[::1] indptr, long long[::1] slots,
                                long long[::1] deg, double[::1] nd,
                                double[::1] phi, Py_ssize_t k) noexcept nogil:
    cdef double total = 0.0
    cdef Py_ssize_t v
    for v in range(k):
        nd[v] = _nd_of(v, indptr, slots, deg, phi)
        total += deg[v] * nd[v]
    return total


cdef inline double _objective_from(double s_total, long long[::1] deg,
                                   Py_ssize_t k, double half_k, double eps) noexcept nogil:
    cdef double t = 0.0
    cdef Py_ssize_t v
    for v in range(k):
        t += log(<double> deg[v])
    return 0.5 * t - half_k * log(s_total if s_total >= eps else eps)


cdef inline double _live_phi_sum(long long v, long long[::1] indptr,
                                 long long[::1] slots, double[::1] phi) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    cdef long long w
    for i in range(indptr[v], indptr[v + 1]):
        w = slots[i]
        if w >= 0:
            s += phi[w]
    return s


cdef inline Py_ssize_t _candidates(long long v, long long[::1] indptr,
                                   long long[::1] slots, signed char[::1] in_w,
                                   long long[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n = 0
    cdef long long w
    for i in range(indptr[v], indptr[v + 1]):
        w = slots[i]
        if w >= 0 and in_w[w]:
            out[n] = w
            n += 1
    return n


cdef inline PairScores _best_pair_scores(long long x, long long special,
                                         long long[::1] cand, Py_ssize_t c,
                                         bint fallback_mode,
                                         long long[::1] indptr, long long[::1] slots,
                                         long long[::1] deg, double[::1] phi,
                                         double s_ref, double half_k,
                                         double eps) noexcept nogil:
    cdef PairScores out
    cdef long long n_masks, idx, mask, d0, dp, b, w
    cdef Py_ssize_t j
    cdef double t0, phix, ssum, mean, diff, x_term, denom, score
    cdef bint has_special
    out.best_with = -INFINITY
    out.best_without = -INFINITY
    if fallback_mode:
        n_masks = c + 1
    else:
        n_masks = 1LL << c
    d0 = deg[x]
    t0 = _live_phi_sum(x, indptr, slots, phi)
    phix = phi[x]
    for idx in range(n_masks):
        if fallback_mode:
            mask = 0 if idx == 0 else 1LL << (idx - 1)
        else:
            mask = idx
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
        score = 0.5 * log(<double> dp) - half_k * log1p(x_term / denom)
        if has_special:
            if score > out.best_without:
                out.best_without = score
        else:
            if score > out.best_with:
                out.best_with = score
    return out


cdef inline double _delete_edge(long long a, long long b, double s,
                                long long[::1] indptr, long long[::1] slots,
                                long long[::1] deg, double[::1] nd,
                                double[::1] phi) noexcept nogil:
    cdef Py_ssize_t i
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
    nd[a] = _nd_of(a, indptr, slots, deg, phi)
    nd[b] = _nd_of(b, indptr, slots, deg, phi)
    s += deg[a] * nd[a]
    s += deg[b] * nd[b]
    return s


def run_local_search(indptr_arr, nbrs_arr, phi_arr, max_passes, degree_cap,
                     single_edge_fallback, eps):
    """Compiled twin of _kernels_py.run_local_search; see that module."""
    cdef long long[::1] indptr = np.ascontiguousarray(indptr_arr, dtype=np.int64)
    cdef long long[::1] slots = np.array(nbrs_arr, dtype=np.int64, copy=True)
    cdef double[::1] phi = np.ascontiguousarray(phi_arr, dtype=np.float64)
    cdef Py_ssize_t k = indptr.shape[0] - 1
    cdef double half_k = 0.5 * k
    cdef long long cap = degree_cap
    cdef bint fallback = bool(single_edge_fallback)
    cdef double epsv = eps
    cdef long long maxp = max_passes

    deg_arr = np.empty(k, dtype=np.int64)
    nd_arr = np.zeros(k, dtype=np.float64)
    in_w_arr = np.zeros(k, dtype=np.int8)
    cdef long long[::1] deg = deg_arr
    cdef double[::1] nd = nd_arr
    cdef signed char[::1] in_w = in_w_arr

    cdef Py_ssize_t v
    cdef long long maxdeg = 0
    for v in range(k):
        deg[v] = indptr[v + 1] - indptr[v]
        if deg[v] > maxdeg:
            maxdeg = deg[v]
        if deg[v] < 1:
            raise NumericalError("input graph has an isolated vertex")

    u_snap_arr = np.empty(maxdeg, dtype=np.int64)
    cand_v_arr = np.empty(maxdeg, dtype=np.int64)
    cand_u_arr = np.empty(maxdeg, dtype=np.int64)
    order_arr = np.empty(k, dtype=np.int64)
    cdef long long[::1] u_snap = u_snap_arr
    cdef long long[::1] cand_v = cand_v_arr
    cdef long long[::1] cand_u = cand_u_arr
    cdef long long[::1] order = order_arr

    cdef double s = _refresh_all(indptr, slots, deg, nd, phi, k)
    cdef double initial_objective = _objective_from(s, deg, k, half_k, epsv)
    cdef double old_score = -INFINITY
    cdef double new_score = initial_objective
    cdef double s_ref, s_full
    accepted = []
    pass_objectives = []
    this_pass = []
    cdef long long passes = 0
    cdef bint hit_cap = False
    cdef bint fb_v, fb_u
    cdef Py_ssize_t n_order, oi, ui, n_u, cv, cu
    cdef long long u, vv
    cdef PairScores sv, su

    while old_score < new_score:
        if passes >= maxp:
            hit_cap = True
            break
        old_score = new_score
        this_pass = []
        for v in range(k):
            in_w[v] = 1 if deg[v] > 1 else 0
        n_order = 0
        for v in range(k):
            if in_w[v]:
                order[n_order] = v
                n_order += 1
        for oi in range(n_order):
            vv = order[oi]
            if not in_w[vv]:
                continue
            n_u = _candidates(vv, indptr, slots, in_w, u_snap)
            s_ref = s  # reference graph frozen per vertex visit
            for ui in range(n_u):
                u = u_snap[ui]
                if not in_w[vv]:
                    break
                if not in_w[u]:
                    continue
                cv = _candidates(vv, indptr, slots, in_w, cand_v)
                fb_v = cv > cap
                if fb_v and not fallback:
                    raise DegreeCapError(
                        f"vertex {vv} has {cv} feasible neighbours; "
                        f"exact enumeration capped at {cap}"
                    )
                sv = _best_pair_scores(vv, u, cand_v, cv, fb_v, indptr, slots,
                                       deg, phi, s_ref, half_k, epsv)
                cu = _candidates(u, indptr, slots, in_w, cand_u)
                fb_u = cu > cap
                if fb_u and not fallback:
                    raise DegreeCapError(
                        f"vertex {u} has {cu} feasible neighbours; "
                        f"exact enumeration capped at {cap}"
                    )
                su = _best_pair_scores(u, vv, cand_u, cu, fb_u, indptr, slots,
                                       deg, phi, s_ref, half_k, epsv)
                if (sv.best_with + su.best_with < sv.best_without + su.best_without
                        and deg[vv] > 1 and deg[u] > 1):
                    s = _delete_edge(vv, u, s, indptr, slots, deg, nd, phi)
                    if deg[vv] < 1 or deg[u] < 1:
                        raise NumericalError("deletion produced an isolated vertex")
                    if vv < u:
                        this_pass.append((int(vv), int(u)))
                    else:
                        this_pass.append((int(u), int(vv)))
                    if deg[u] == 1:
                        in_w[u] = 0
                    if deg[vv] == 1:
                        in_w[vv] = 0
        passes += 1
        s_full = _refresh_all(indptr, slots, deg, nd, phi, k)
        if abs(s - s_full) > SYNC_TOL * max(1.0, abs(s_full)):
            raise NumericalError(
                "incremental discrepancy total drifted from full recomputation: "
                f"{s!r} vs {s_full!r}"
            )
        s = s_full
        new_score = _objective_from(s_full, deg, k, half_k, epsv)
        if new_score > old_score:
            pass_objectives.append(new_score)
            accepted.extend(this_pass)

    return accepted, pass_objectives, initial_objective, int(passes), hit_cap
