"""Fused per-trial kernels for the Monte Carlo engine.

A trial = CSI quantization -> fairness rotation -> phase-limited Hopcroft-Karp
on the implicitly expanded graph -> random completion -> per-user outage bits.
The function below is written in plain-loop style so numba can compile it; the
uncompiled function is the fallback and behaves identically.  All randomness
enters through pre-drawn arrays (band gain powers and a per-trial uniform
row), which keeps results independent of chunking and worker count.

Traversal order rules (must stay in lockstep with fmatchlab.graph /
fmatchlab.pver2hk, which the tests enforce):
  * left vertices are visited in post-rotation clone order,
  * subchannel scans are ascending,
  * the path DFS is leftmost-first with permanent vertex locking.
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly by which path runs
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


def aux_row_width(total_clones: int, num_subchannels: int) -> int:
    """Uniforms consumed per trial: rotation block then fill block."""
    return 1 + total_clones + num_subchannels


@njit(cache=True, nogil=True)
def _fmatch_trials_impl(
    gsq,  # (T, M, L) float64, |g|^2 per user/band
    aux,  # (T, 1 + P + N) float64 uniforms
    caps,  # (M,) int64 per-user degree caps = allocation targets
    tau,  # float64, CSI outage threshold on |g|^2
    rates,  # (M,) float64 per-user target rates (nats/frame)
    gamma,  # float64 linear SNR
    n_c,  # int64 subchannels per band
    l_star,  # float64 phase depth cap (np.inf for exact matching)
    outage,  # (T, M) uint8 output
    k_out,  # (T, M) int16 output, matched counts
):
    T, M, L = gsq.shape
    N = n_c * L
    P = 0
    for m in range(M):
        P += caps[m]
    n_groups = caps[0]
    for m in range(M):
        if caps[m] < n_groups:
            n_groups = caps[m]

    owner = np.empty(P, dtype=np.int64)
    p = 0
    for m in range(M):
        for _ in range(caps[m]):
            owner[p] = m
            p += 1

    # static round-robin striping of clones into groups, in (group, user) order
    bucket_of = np.empty(P, dtype=np.int64)
    p = 0
    for m in range(M):
        for j in range(caps[m]):
            bucket_of[p] = j % n_groups
            p += 1
    bucket_len = np.zeros(n_groups, dtype=np.int64)
    for p in range(P):
        bucket_len[bucket_of[p]] += 1
    buckets = np.empty((n_groups, P), dtype=np.int64)
    fill_ptr = np.zeros(n_groups, dtype=np.int64)
    for p in range(P):
        g = bucket_of[p]
        buckets[g, fill_ptr[g]] = p
        fill_ptr[g] += 1

    csi = np.empty((M, L), dtype=np.uint8)
    order = np.empty(P, dtype=np.int64)
    scratch = np.empty(P, dtype=np.int64)
    match_l = np.empty(P, dtype=np.int64)
    match_r = np.empty(N, dtype=np.int64)
    right_level = np.empty(N, dtype=np.int64)
    left_lvl = np.empty(P, dtype=np.int64)
    frontier = np.empty(P, dtype=np.int64)
    nxt_frontier = np.empty(P, dtype=np.int64)
    next_right = np.empty(N, dtype=np.int64)
    used_left = np.empty(P, dtype=np.uint8)
    used_right = np.empty(N, dtype=np.uint8)
    stack_left = np.empty(P + 1, dtype=np.int64)
    stack_right = np.empty(P + 1, dtype=np.int64)
    cursor = np.empty(P + 1, dtype=np.int64)
    fill_list = np.empty(N, dtype=np.int64)

    for t in range(T):
        for m in range(M):
            for l in range(L):
                csi[m, l] = 1 if gsq[t, m, l] >= tau else 0

        # --- fairness rotation (uniforms aux[t, 0 : 1 + P]) ---
        shift = int(aux[t, 0] * n_groups)
        if shift > n_groups - 1:
            shift = n_groups - 1
        ptr = 1
        pos = 0
        for g in range(n_groups):
            src = (g + shift) % n_groups
            blen = bucket_len[src]
            for i in range(blen):
                scratch[i] = buckets[src, i]
            for i in range(blen - 1, 0, -1):
                j = int(aux[t, ptr] * (i + 1))
                if j > i:
                    j = i
                ptr += 1
                tmp = scratch[i]
                scratch[i] = scratch[j]
                scratch[j] = tmp
            for i in range(blen):
                order[pos] = scratch[i]
                pos += 1

        # --- phase-limited Hopcroft-Karp on the implicit expanded graph ---
        for u in range(P):
            match_l[u] = -1
        for n in range(N):
            match_r[n] = -1
        while True:
            for n in range(N):
                right_level[n] = -1
            for u in range(P):
                left_lvl[u] = -1
            fcount = 0
            for oi in range(P):
                u = order[oi]
                if match_l[u] < 0:
                    frontier[fcount] = u
                    fcount += 1
                    left_lvl[u] = 1
            depth = 1
            found_l = -1
            while fcount > 0:
                if depth > l_star:
                    break
                nr_count = 0
                found_free = False
                for fi in range(fcount):
                    u = frontier[fi]
                    mu = owner[u]
                    for n in range(N):
                        if csi[mu, n // n_c] == 0:
                            continue
                        if match_l[u] == n:
                            continue
                        if right_level[n] < 0:
                            right_level[n] = depth
                            next_right[nr_count] = n
                            nr_count += 1
                            if match_r[n] < 0:
                                found_free = True
                if nr_count == 0:
                    break
                if found_free:
                    found_l = depth
                    break
                nf = 0
                for ri in range(nr_count):
                    n = next_right[ri]
                    w = match_r[n]
                    if left_lvl[w] < 0:
                        left_lvl[w] = depth + 2
                        nxt_frontier[nf] = w
                        nf += 1
                for i in range(nf):
                    frontier[i] = nxt_frontier[i]
                fcount = nf
                depth += 2
            if found_l < 0:
                break

            # leftmost-first locking DFS for a maximal disjoint path set
            for u in range(P):
                used_left[u] = 0
            for n in range(N):
                used_right[n] = 0
            n_paths = 0
            for oi in range(P):
                u0 = order[oi]
                if match_l[u0] >= 0 or used_left[u0] == 1:
                    continue
                top = 0
                stack_left[0] = u0
                cursor[0] = 0
                accepted = False
                while top >= 0:
                    u = stack_left[top]
                    d = left_lvl[u]
                    mu = owner[u]
                    advanced = False
                    n = cursor[top]
                    while n < N:
                        cursor[top] = n + 1
                        if csi[mu, n // n_c] == 1 and right_level[n] == d and used_right[n] == 0:
                            if d == found_l and match_r[n] < 0:
                                # accept: rewire along the stack
                                used_right[n] = 1
                                for i in range(top):
                                    used_left[stack_left[i]] = 1
                                used_left[u] = 1
                                last = n
                                for i in range(top, -1, -1):
                                    v = stack_left[i]
                                    match_l[v] = last
                                    match_r[last] = v
                                    if i > 0:
                                        last = stack_right[i - 1]
                                accepted = True
                                break
                            if d < found_l:
                                w = match_r[n]
                                if w >= 0 and used_left[w] == 0 and left_lvl[w] == d + 2:
                                    used_right[n] = 1
                                    top += 1
                                    stack_left[top] = w
                                    stack_right[top - 1] = n
                                    cursor[top] = 0
                                    advanced = True
                                    break
                        n += 1
                    if accepted:
                        break
                    if not advanced:
                        used_left[u] = 1
                        top -= 1
                if accepted:
                    n_paths += 1
            if n_paths == 0:
                break

        # --- completion: top up to caps[m] from unmatched subchannels ---
        k_trial = np.zeros(M, dtype=np.int64)
        for n in range(N):
            if match_r[n] >= 0:
                k_trial[owner[match_r[n]]] += 1
        fcount = 0
        for n in range(N):
            if match_r[n] < 0:
                fill_list[fcount] = n
                fcount += 1
        base = 1 + P
        for i in range(fcount - 1, 0, -1):
            j = int(aux[t, base + fcount - 1 - i] * (i + 1))
            if j > i:
                j = i
            tmp = fill_list[i]
            fill_list[i] = fill_list[j]
            fill_list[j] = tmp

        fptr = 0
        for m in range(M):
            rate = 0.0
            for n in range(N):
                if match_r[n] >= 0 and owner[match_r[n]] == m:
                    rate += math.log1p(gamma * gsq[t, m, n // n_c])
            need = caps[m] - k_trial[m]
            for _ in range(need):
                n = fill_list[fptr]
                fptr += 1
                rate += math.log1p(gamma * gsq[t, m, n // n_c])
            rate /= n_c
            outage[t, m] = 1 if rate < rates[m] else 0
            k_out[t, m] = k_trial[m]


def fmatch_trials(
    gsq: np.ndarray,
    aux: np.ndarray,
    caps: np.ndarray,
    tau: float,
    rates: np.ndarray,
    gamma: float,
    n_c: int,
    l_star: float = np.inf,
) -> tuple[np.ndarray, np.ndarray]:
    """Run coded-f-matching trials; returns (outage bits, matched counts)."""
    T, M, L = gsq.shape
    outage = np.empty((T, M), dtype=np.uint8)
    k_out = np.empty((T, M), dtype=np.int16)
    _fmatch_trials_impl(
        np.ascontiguousarray(gsq, dtype=np.float64),
        np.ascontiguousarray(aux, dtype=np.float64),
        np.asarray(caps, dtype=np.int64),
        float(tau),
        np.asarray(rates, dtype=np.float64),
        float(gamma),
        int(n_c),
        float(l_star),
        outage,
        k_out,
    )
    return outage, k_out
