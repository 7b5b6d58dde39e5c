"""Jitted hot loops. Everything here works on plain arrays; see walk.compile_env.

Conventions shared with the pure-Python engine in :mod:`vrrw.walk`:
local times live in a dense buffer indexed by ``site + off``; a step goes right
iff ``u < p_right``; clock ``c`` fires at the first step where
``Z[site_c] >= thr_c``; a race ``(winner, loser)`` is won iff the winner fires
strictly before the loser (ties lose).
"""

import numba as nb
import numpy as np

from .rng import kernel_uniform, new_kernel_stream, reset_kernel_stream

OCC, REF, AMB = 1, 0, 2


@nb.njit(cache=True, inline="always")
def _w(x, k, default, left, ov_lo, ov_map, ov_tab):
    j = x - ov_lo
    if 0 <= j < ov_map.shape[0]:
        r = ov_map[j]
        if r >= 0:
            return ov_tab[r, k]
    if x < 0:
        return left[k]
    return default[k]


@nb.njit(cache=True, inline="always")
def _p_right(Z, off, pos, default, left, ov_lo, ov_map, ov_tab):
    wl = _w(pos - 1, Z[pos - 1 + off], default, left, ov_lo, ov_map, ov_tab)
    wr = _w(pos + 1, Z[pos + 1 + off], default, left, ov_lo, ov_map, ov_tab)
    return wr / (wl + wr)


@nb.njit(cache=True, inline="always")
def _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab):
    p = _p_right(Z, off, pos, default, left, ov_lo, ov_map, ov_tab)
    if kernel_uniform(st) < p:
        pos += 1
    else:
        pos -= 1
    Z[pos + off] += 1
    return pos


def _chunks(n, nchunks):
    nchunks = max(1, min(n, nchunks))
    bounds = np.linspace(0, n, nchunks + 1).astype(np.int64)
    return bounds


@nb.njit(cache=True)
def trajectory(default, left, ov_lo, ov_map, ov_tab, seed, stream, horizon):
    """Positions X_0..X_horizon of one replica."""
    off = horizon + 1
    Z = np.zeros(2 * horizon + 3, dtype=np.int64)
    Z[off] = 1
    st = new_kernel_stream(np.uint64(seed), np.uint64(stream))
    out = np.zeros(horizon + 1, dtype=np.int64)
    pos = 0
    for n in range(1, horizon + 1):
        pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
        out[n] = pos
    return out


@nb.njit(cache=True, parallel=True)
def endpoint_batch(default, left, ov_lo, ov_map, ov_tab, seed, stream0, bounds, horizon):
    ntrials = bounds[-1]
    out = np.zeros(ntrials, dtype=np.int64)
    for c in nb.prange(bounds.shape[0] - 1):
        off = horizon + 1
        Z = np.zeros(2 * horizon + 3, dtype=np.int32)
        st = new_kernel_stream(np.uint64(seed), np.uint64(0))
        for r in range(bounds[c], bounds[c + 1]):
            reset_kernel_stream(st, np.uint64(seed), np.uint64(stream0 + r))
            Z[:] = 0
            Z[off] = 1
            pos = 0
            for n in range(horizon):
                pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
            out[r] = pos
    return out


@nb.njit(cache=True, inline="always")
def _race_status(fired, race_win, race_lose):
    """1 all races won, 0 some race lost, 2 still open."""
    status = OCC
    for j in range(race_win.shape[0]):
        fa = fired[race_win[j]]
        fb = fired[race_lose[j]]
        if fa >= 0 and (fb < 0 or fa < fb):
            continue
        if fb >= 0:
            return REF
        status = AMB
    return status


@nb.njit(cache=True, parallel=True)
def race_batch(default, left, ov_lo, ov_map, ov_tab, seed, stream0, bounds, cap,
               clock_site, clock_thr, race_win, race_lose):
    """Classify each replica as occurred / refuted / ambiguous; also return the deciding step."""
    ntrials = bounds[-1]
    nclk = clock_site.shape[0]
    outcome = np.zeros(ntrials, dtype=np.int8)
    steps = np.zeros(ntrials, dtype=np.int64)
    for c in nb.prange(bounds.shape[0] - 1):
        off = cap + 1
        Z = np.zeros(2 * cap + 3, dtype=np.int32)
        fired = np.empty(nclk, dtype=np.int64)
        st = new_kernel_stream(np.uint64(seed), np.uint64(0))
        for r in range(bounds[c], bounds[c + 1]):
            reset_kernel_stream(st, np.uint64(seed), np.uint64(stream0 + r))
            Z[off] = 1
            lo = 0
            hi = 0
            for i in range(nclk):
                fired[i] = 0 if (clock_site[i] == 0 and clock_thr[i] <= 1) else -1
            status = _race_status(fired, race_win, race_lose)
            pos = 0
            n = 0
            while status == AMB and n < cap:
                pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
                n += 1
                if pos < lo:
                    lo = pos
                elif pos > hi:
                    hi = pos
                z = Z[pos + off]
                hit = False
                for i in range(nclk):
                    if fired[i] < 0 and clock_site[i] == pos and z >= clock_thr[i]:
                        fired[i] = n
                        hit = True
                if hit:
                    status = _race_status(fired, race_win, race_lose)
            outcome[r] = status
            steps[r] = n
            Z[lo + off:hi + off + 1] = 0
    return outcome, steps


@nb.njit(cache=True, parallel=True)
def window_batch(default, left, ov_lo, ov_map, ov_tab, seed, stream0, bounds, horizon, window_start):
    """Min and max position over steps window_start..horizon of each replica."""
    ntrials = bounds[-1]
    wmin = np.zeros(ntrials, dtype=np.int64)
    wmax = np.zeros(ntrials, dtype=np.int64)
    for c in nb.prange(bounds.shape[0] - 1):
        off = horizon + 1
        Z = np.zeros(2 * horizon + 3, dtype=np.int32)
        st = new_kernel_stream(np.uint64(seed), np.uint64(0))
        for r in range(bounds[c], bounds[c + 1]):
            reset_kernel_stream(st, np.uint64(seed), np.uint64(stream0 + r))
            Z[off] = 1
            lo = 0
            hi = 0
            pos = 0
            for n in range(1, window_start + 1):
                pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
                if pos < lo:
                    lo = pos
                elif pos > hi:
                    hi = pos
            a = pos
            b = pos
            for n in range(window_start + 1, horizon + 1):
                pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
                if pos < a:
                    a = pos
                elif pos > b:
                    b = pos
            lo = min(lo, a)
            hi = max(hi, b)
            wmin[r] = a
            wmax[r] = b
            Z[lo + off:hi + off + 1] = 0
    return wmin, wmax


@nb.njit(cache=True, parallel=True)
def edge_profile_batch(default, left, ov_lo, ov_map, ov_tab, seed, stream0, bounds, cap, levels, depth):
    """Local times at leftmost+i (i=0..depth) the first time Z(leftmost) reaches each level.

    Rows for levels not reached within ``cap`` steps stay at -1.
    """
    ntrials = bounds[-1]
    nlev = levels.shape[0]
    out = np.full((ntrials, nlev, depth + 1), -1, dtype=np.int64)
    for c in nb.prange(bounds.shape[0] - 1):
        off = cap + 1
        Z = np.zeros(2 * cap + depth + 3, dtype=np.int32)
        st = new_kernel_stream(np.uint64(seed), np.uint64(0))
        for r in range(bounds[c], bounds[c + 1]):
            reset_kernel_stream(st, np.uint64(seed), np.uint64(stream0 + r))
            Z[off] = 1
            lo = 0
            hi = 0
            pos = 0
            ptr = 0
            while ptr < nlev and Z[lo + off] >= levels[ptr]:
                for i in range(depth + 1):
                    out[r, ptr, i] = Z[lo + i + off]
                ptr += 1
            n = 0
            while ptr < nlev and n < cap:
                pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
                n += 1
                if pos < lo:
                    lo = pos
                elif pos > hi:
                    hi = pos
                if pos == lo:
                    while ptr < nlev and Z[lo + off] >= levels[ptr]:
                        for i in range(depth + 1):
                            out[r, ptr, i] = Z[lo + i + off]
                        ptr += 1
            Z[lo + off:hi + off + 1] = 0
    return out


@nb.njit(cache=True, parallel=True)
def diagnostics_batch(default, left, ov_lo, ov_map, ov_tab, seed, stream0, bounds, horizon, probes):
    """Returns to the origin (Z(0) - 1) and range width at each probe time (probes sorted)."""
    ntrials = bounds[-1]
    nprobe = probes.shape[0]
    returns = np.zeros((ntrials, nprobe), dtype=np.int64)
    width = np.zeros((ntrials, nprobe), dtype=np.int64)
    for c in nb.prange(bounds.shape[0] - 1):
        off = horizon + 1
        Z = np.zeros(2 * horizon + 3, dtype=np.int32)
        st = new_kernel_stream(np.uint64(seed), np.uint64(0))
        for r in range(bounds[c], bounds[c + 1]):
            reset_kernel_stream(st, np.uint64(seed), np.uint64(stream0 + r))
            Z[off] = 1
            lo = 0
            hi = 0
            pos = 0
            ptr = 0
            while ptr < nprobe and probes[ptr] == 0:
                returns[r, ptr] = 0
                width[r, ptr] = 1
                ptr += 1
            for n in range(1, horizon + 1):
                pos = _advance(Z, off, pos, st, default, left, ov_lo, ov_map, ov_tab)
                if pos < lo:
                    lo = pos
                elif pos > hi:
                    hi = pos
                while ptr < nprobe and probes[ptr] == n:
                    returns[r, ptr] = Z[off] - 1
                    width[r, ptr] = hi - lo + 1
                    ptr += 1
            Z[lo + off:hi + off + 1] = 0
    return returns, width
