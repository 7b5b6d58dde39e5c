"""Vertex-reinforced random walk on the integers.

From site x the walk steps to x+1 with probability

    w(x+1, Z_n(x+1)) / (w(x-1, Z_n(x-1)) + w(x+1, Z_n(x+1)))

where Z_n(y) counts the indices m <= n with X_m = y (time 0 included, so
Z_0(0) = 1). This module holds the step-by-step reference engine; the batch
drivers at the bottom dispatch to the jitted kernels, which follow the same
conventions and consume the same random streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels as K
from .rng import RngStream
from .weights import Environment, weight_table


class PreconditionError(ValueError):
    """A documented precondition of an operation was violated."""


@dataclass
class WalkState:
    """Position, step count and dense local times over the visited interval.

    ``z[i]`` is the local time of site ``min_site + i``; the visited set is
    always the interval ``[min_site, max_site]``.
    """

    position: int = 0
    step_count: int = 0
    min_site: int = 0
    z: list = field(default_factory=lambda: [1])

    @property
    def max_site(self):
        return self.min_site + len(self.z) - 1

    @property
    def range(self):
        return (self.min_site, self.max_site)

    def local_time(self, y):
        i = y - self.min_site
        if 0 <= i < len(self.z):
            return self.z[i]
        return 0

    def local_times(self):
        return {self.min_site + i: c for i, c in enumerate(self.z)}

    def copy(self):
        return WalkState(self.position, self.step_count, self.min_site, list(self.z))

    def check(self):
        assert sum(self.z) == self.step_count + 1, "local times must sum to n + 1"
        assert all(c >= 1 for c in self.z), "visited set must be an interval"
        assert self.min_site <= 0 <= self.max_site
        assert self.local_time(self.position) >= 1


def init_walk(env: Environment | None = None) -> WalkState:
    """X_0 = 0 with Z_0(0) = 1."""
    return WalkState()


def local_time(state, y):
    return state.local_time(y)


def step_probability_right(state, env):
    x = state.position
    wl = env.weight(x - 1, state.local_time(x - 1))
    wr = env.weight(x + 1, state.local_time(x + 1))
    return wr / (wl + wr)


def apply_move(state, right):
    """Move one site right (``right=True``) or left and update local times."""
    if right:
        state.position += 1
        if state.position > state.max_site:
            state.z.append(0)
    else:
        state.position -= 1
        if state.position < state.min_site:
            state.z.insert(0, 0)
            state.min_site -= 1
    state.z[state.position - state.min_site] += 1
    state.step_count += 1
    return state


def step(state, env, rng, debug=False):
    """One step of the walk; consumes exactly one uniform and moves right iff u < p_right."""
    p = step_probability_right(state, env)
    u = rng.uniform()
    apply_move(state, u < p)
    if debug:
        state.check()
    return state


class StoppingClock:
    """Online record of T_x(k) = inf{n : Z_n(x) >= k}.

    Watch items are ``(x, k)`` pairs; a plain hitting time T_y is ``(y, 1)``.
    Items already satisfied when the clock is armed on a fresh walk fire at 0.
    """

    def __init__(self, items=()):
        self.watched = []
        self.fired = {}
        for item in items:
            self.watch(*item)

    def watch(self, x, k=1):
        if k < 1:
            raise PreconditionError(f"threshold must be >= 1, got {k}")
        item = (int(x), int(k))
        if item not in self.watched:
            self.watched.append(item)
        return item

    def arm(self, state):
        for x, k in self.watched:
            if (x, k) not in self.fired and state.local_time(x) >= k:
                if state.step_count != 0:
                    raise PreconditionError(
                        f"T_{x}({k}) was already reached before step {state.step_count}; arm clocks at n = 0"
                    )
                self.fired[(x, k)] = 0

    def update(self, state):
        """Record items fired by the step that produced ``state``; return them."""
        x = state.position
        z = state.local_time(x)
        new = []
        for item in self.watched:
            if item[0] == x and item not in self.fired and z >= item[1]:
                self.fired[item] = state.step_count
                new.append(item)
        return new

    def time(self, x, k=1):
        return self.fired.get((x, k))


def run_until(state, env, rng, clock, cap):
    """Step until some watched item fires or ``cap`` steps have been taken.

    Returns ``(state, clock, outcome)`` with outcome the list of items fired
    by the last step, or the string ``"cap-hit"``.
    """
    if cap < 1:
        raise PreconditionError(f"cap must be >= 1, got {cap}")
    clock.arm(state)
    for _ in range(cap):
        step(state, env, rng)
        new = clock.update(state)
        if new:
            return state, clock, new
    return state, clock, "cap-hit"


# --- kernel plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class CompiledEnv:
    default: np.ndarray
    left: np.ndarray
    ov_lo: int
    ov_map: np.ndarray
    ov_tab: np.ndarray

    def args(self):
        return (self.default, self.left, self.ov_lo, self.ov_map, self.ov_tab)


def compile_env(env, max_local_time):
    """Weight tables covering local times 0..max_local_time for the kernels."""
    n = max_local_time + 1
    default = weight_table(env.default, n)
    left = default if env.left is None else weight_table(env.left, n)
    if env.overrides:
        sites = sorted(env.overrides)
        lo = sites[0]
        ov_map = np.full(sites[-1] - lo + 1, -1, dtype=np.int64)
        ov_tab = np.empty((len(sites), n))
        for r, x in enumerate(sites):
            ov_map[x - lo] = r
            ov_tab[r] = weight_table(env.overrides[x], n)
    else:
        lo = 0
        ov_map = np.zeros(0, dtype=np.int64)
        ov_tab = np.zeros((0, n))
    return CompiledEnv(default, left, lo, ov_map, ov_tab)


def thread_count():
    return numba.get_num_threads()


def set_threads(n):
    if n is None:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


def chunk_bounds(trials, chunks=None):
    """Replica partition for the parallel kernels. Results never depend on it."""
    if chunks is None:
        chunks = 4 * thread_count()
    return K._chunks(int(trials), int(chunks))


def kernel_trajectory(env, seed, stream, horizon):
    ce = compile_env(env, horizon + 1)
    return K.trajectory(*ce.args(), np.uint64(seed), np.uint64(stream), int(horizon))


def simulate_trajectory(env, seed, stream, horizon):
    """Positions X_0..X_horizon from the reference engine (slow, for checking)."""
    rng = RngStream(seed, stream)
    state = init_walk(env)
    out = [0]
    for _ in range(horizon):
        step(state, env, rng)
        out.append(state.position)
    return np.array(out, dtype=np.int64), state


def endpoints(env, horizon, trials, seed, stream0=0, chunks=None):
    """X_horizon for replicas ``stream0 .. stream0 + trials - 1``."""
    if horizon < 0 or trials < 1:
        raise PreconditionError("need horizon >= 0 and trials >= 1")
    ce = compile_env(env, horizon + 1)
    return K.endpoint_batch(*ce.args(), np.uint64(seed), np.int64(stream0),
                            chunk_bounds(trials, chunks), int(horizon))


def empirical_endpoint_distribution(env, horizon, trials, seed, stream0=0, chunks=None):
    pos = endpoints(env, horizon, trials, seed, stream0, chunks)
    sites, counts = np.unique(pos, return_counts=True)
    return {int(s): c / trials for s, c in zip(sites, counts)}


