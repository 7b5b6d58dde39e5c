"""Exact enumeration of the walk up to a finite horizon.

Two arithmetic modes. ``"rational"`` uses Fractions and needs every queried
weight to be rational. ``"interval"`` carries float brackets ``(lo, hi)``,
widened by one ulp after every operation, so the true probability always lies
inside. ``"auto"`` picks rational whenever the environment allows it.

:func:`enumerate_paths` walks all 2**n sign sequences. The endpoint and event
routines instead merge paths that reach the same state (position, local-time
profile and, for events, which races are already won); the walk's future only
depends on that state, so merging is exact and much cheaper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .events import OCCURRED, REFUTED, UNDECIDED, classify_path
from .walk import PreconditionError

DEFAULT_LIMIT = 24


class HorizonError(PreconditionError):
    pass


def _down(x):
    return math.nextafter(x, -math.inf)


def _up(x):
    return math.nextafter(x, math.inf)


class _RationalArith:
    name = "rational"
    one = Fraction(1)
    zero = Fraction(0)

    def __init__(self, env):
        self.env = env

    def step_probs(self, x, zl, zr):
        wl = self.env.weight_exact(x - 1, zl)
        wr = self.env.weight_exact(x + 1, zr)
        s = wl + wr
        return wl / s, wr / s

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def add(a, b):
        return a + b

    @staticmethod
    def bracket(a):
        return a, a


class _IntervalArith:
    name = "interval"
    one = (1.0, 1.0)
    zero = (0.0, 0.0)

    def __init__(self, env):
        self.env = env

    def step_probs(self, x, zl, zr):
        wl = self.env.weight(x - 1, zl)
        wr = self.env.weight(x + 1, zr)
        wl_lo, wl_hi = _down(wl), _up(wl)
        wr_lo, wr_hi = _down(wr), _up(wr)
        # p_right = 1 / (1 + wl/wr), increasing in wr and decreasing in wl
        pr_lo = _down(1.0 / _up(1.0 + _up(wl_hi / wr_lo)))
        pr_hi = _up(1.0 / _down(1.0 + _down(wl_lo / wr_hi)))
        pl_lo = _down(1.0 / _up(1.0 + _up(wr_hi / wl_lo)))
        pl_hi = _up(1.0 / _down(1.0 + _down(wr_lo / wl_hi)))
        return (max(pl_lo, 0.0), min(pl_hi, 1.0)), (max(pr_lo, 0.0), min(pr_hi, 1.0))

    @staticmethod
    def mul(a, b):
        return _down(a[0] * b[0]), _up(a[1] * b[1])

    @staticmethod
    def add(a, b):
        return _down(a[0] + b[0]), _up(a[1] + b[1])

    @staticmethod
    def bracket(a):
        return a


def _arith(env, mode):
    if mode == "auto":
        mode = "rational" if env.is_exact else "interval"
    if mode == "rational":
        if not env.is_exact:
            raise PreconditionError("rational mode needs rational weights (integer alpha or rational tables)")
        return _RationalArith(env)
    if mode == "interval":
        return _IntervalArith(env)
    raise ValueError(f"unknown arithmetic mode {mode!r}")


def _check_horizon(horizon, limit):
    if horizon < 0:
        raise HorizonError(f"horizon must be >= 0, got {horizon}")
    if horizon > limit:
        raise HorizonError(f"horizon {horizon} exceeds the enumeration limit {limit}")


@dataclass(frozen=True)
class PathAtom:
    path: tuple  # steps, each +1 or -1
    probability: object  # Fraction, or (lo, hi) floats

    def positions(self):
        out = [0]
        for s in self.path:
            out.append(out[-1] + s)
        return out


def enumerate_paths(env, horizon, mode="auto", limit=DEFAULT_LIMIT):
    """Yield every length-``horizon`` path with its probability, depth first."""
    _check_horizon(horizon, limit)
    ar = _arith(env, mode)
    z = {0: 1}
    steps = []

    def rec(x, prob):
        if len(steps) == horizon:
            yield PathAtom(tuple(steps), prob)
            return
        pl, pr = ar.step_probs(x, z.get(x - 1, 0), z.get(x + 1, 0))
        for s, p in ((-1, pl), (1, pr)):
            y = x + s
            z[y] = z.get(y, 0) + 1
            steps.append(s)
            yield from rec(y, ar.mul(prob, p))
            steps.pop()
            z[y] -= 1

    yield from rec(0, ar.one)


def _successors(ar, state, prob):
    x, lo, z = state
    i = x - lo
    zl = z[i - 1] if i > 0 else 0
    zr = z[i + 1] if i + 1 < len(z) else 0
    pl, pr = ar.step_probs(x, zl, zr)
    # left
    if i == 0:
        zz = (1,) + z
        yield (x - 1, lo - 1, zz), ar.mul(prob, pl)
    else:
        zz = z[: i - 1] + (z[i - 1] + 1,) + z[i:]
        yield (x - 1, lo, zz), ar.mul(prob, pl)
    # right
    if i + 1 == len(z):
        zz = z + (1,)
    else:
        zz = z[: i + 1] + (z[i + 1] + 1,) + z[i + 2:]
    yield (x + 1, lo, zz), ar.mul(prob, pr)


def state_distribution(env, horizon, mode="auto", limit=DEFAULT_LIMIT):
    """Law of (X_n, local-time profile) as ``{(x, min_site, z_tuple): prob}``."""
    _check_horizon(horizon, limit)
    ar = _arith(env, mode)
    layer = {(0, 0, (1,)): ar.one}
    for _ in range(horizon):
        nxt = {}
        for state, prob in layer.items():
            for s2, p2 in _successors(ar, state, prob):
                nxt[s2] = ar.add(nxt[s2], p2) if s2 in nxt else p2
        layer = nxt
    return layer, ar


def endpoint_distribution(env, horizon, mode="auto", limit=DEFAULT_LIMIT):
    """``{site: probability}`` for X_horizon; values are Fractions or (lo, hi) brackets."""
    layer, ar = state_distribution(env, horizon, mode, limit)
    out = {}
    for (x, _, _), prob in layer.items():
        out[x] = ar.add(out[x], prob) if x in out else prob
    return dict(sorted(out.items()))


def total_mass(env, horizon, mode="auto", limit=DEFAULT_LIMIT, merged=False):
    """Sum of all path probabilities (1 exactly in rational mode)."""
    ar = _arith(env, mode)
    if merged:
        layer, _ = state_distribution(env, horizon, mode, limit)
        probs = layer.values()
    else:
        probs = (a.probability for a in enumerate_paths(env, horizon, mode, limit))
    total = ar.zero
    for p in probs:
        total = ar.add(total, p)
    return total


@dataclass(frozen=True)
class EventProbabilityBracket:
    lower: object
    upper: object
    horizon: int
    mode: str

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, p):
        return self.lower <= p <= self.upper


def _status_from_state(race, state_z, lo, won):
    fired = []
    for s, t in race.clocks:
        i = s - lo
        fired.append(0 <= i < len(state_z) and state_z[i] >= t)
    status = OCCURRED
    for j, (a, b) in enumerate(race.races):
        if won >> j & 1:
            continue
        if fired[b]:
            return REFUTED, won
        if fired[a]:
            won |= 1 << j
            continue
        status = UNDECIDED
    return status, won


def event_probability(env, horizon, event, mode="auto", limit=DEFAULT_LIMIT, prune=True):
    """Bracket ``[lower, upper]`` for P[event].

    ``lower`` is the mass of paths on which the event is decided as occurred
    by the horizon; ``upper`` adds the still-undecided mass. With
    ``prune=True`` decided states are not extended; ``prune=False`` is the
    brute-force route (every full path, classified by a post-hoc scan).
    """
    _check_horizon(horizon, limit)
    ar = _arith(env, mode)
    race = event.compile()
    if not prune:
        occ, und = ar.zero, ar.zero
        for atom in enumerate_paths(env, horizon, ar.name, limit):
            st = classify_path(race, atom.positions())
            if st == OCCURRED:
                occ = ar.add(occ, atom.probability)
            elif st == UNDECIDED:
                und = ar.add(und, atom.probability)
        return _bracket(ar, occ, und, horizon)

    # A step only fires clocks at the site it lands on, and from that site's
    # local time alone we know whether they fired now. Races with both clocks
    # firing at once cannot happen (one site moves per step) except at n = 0.
    status, won = _status_from_state(race, (1,), 0, 0)
    occ, und = ar.zero, ar.zero
    if status == OCCURRED:
        return _bracket(ar, ar.one, ar.zero, horizon)
    if status == REFUTED:
        return _bracket(ar, ar.zero, ar.zero, horizon)
    layer = {((0, 0, (1,)), won): ar.one}
    for _ in range(horizon):
        nxt = {}
        for (state, won), prob in layer.items():
            for s2, p2 in _successors(ar, state, prob):
                st, won2 = _status_from_state(race, s2[2], s2[1], won)
                if st == OCCURRED:
                    occ = ar.add(occ, p2)
                elif st == UNDECIDED:
                    key = (s2, won2)
                    nxt[key] = ar.add(nxt[key], p2) if key in nxt else p2
        layer = nxt
    for prob in layer.values():
        und = ar.add(und, prob)
    return _bracket(ar, occ, und, horizon)


def _bracket(ar, occ, und, horizon):
    lo = ar.bracket(occ)[0]
    hi = ar.bracket(ar.add(occ, und))[1]
    if ar.name == "interval":
        hi = min(hi, 1.0)
    return EventProbabilityBracket(lo, hi, horizon, ar.name)


@dataclass(frozen=True)
class InvarianceResult:
    equal: bool
    max_discrepancy: object
    continuations: int
    prefix_probability_a: object
    prefix_probability_b: object


def _agree_on_nonnegative(env_a, env_b, horizon):
    # Sites >= 0 reachable within the horizon, local times up to horizon + 1.
    for x in range(0, horizon + 2):
        for k in range(0, horizon + 2):
            a = env_a.weight_exact(x, k)
            b = env_b.weight_exact(x, k)
            if a is None or b is None:
                a, b = env_a.weight(x, k), env_b.weight(x, k)
            if a != b:
                return False, x, k
    return True, None, None


def env_invariance_check(env_a, env_b, horizon, prefix, mode="auto", limit=DEFAULT_LIMIT):
    """Compare the conditional laws of positive-staying continuations under two environments.

    ``prefix`` is a path of positions ``x_0 = 0, ..., x_M`` with ``x_M > 0``.
    For every continuation of length ``horizon - M`` staying at sites >= 1
    the product of its step probabilities is computed under both
    environments; such a continuation only ever queries weights at sites >= 0,
    so the two must coincide when the environments agree there.
    """
    ok, x_bad, k_bad = _agree_on_nonnegative(env_a, env_b, horizon)
    if not ok:
        raise PreconditionError(f"environments differ at site {x_bad}, local time {k_bad} (must agree on x >= 0)")
    prefix = list(prefix)
    if not prefix or prefix[0] != 0:
        raise PreconditionError("prefix must start at 0")
    if any(abs(b - a) != 1 for a, b in zip(prefix, prefix[1:])):
        raise PreconditionError("prefix must be a nearest-neighbour path")
    if prefix[-1] <= 0:
        raise PreconditionError("prefix must end at a positive site")
    m = len(prefix) - 1
    _check_horizon(horizon, limit)
    if m > horizon:
        raise PreconditionError("prefix longer than the horizon")
    if mode == "auto":
        mode = "rational" if (env_a.is_exact and env_b.is_exact) else "interval"
    ar_a, ar_b = _arith(env_a, mode), _arith(env_b, mode)

    z = {}
    for y in prefix:
        z[y] = z.get(y, 0) + 1
    pa, pb = ar_a.one, ar_b.one
    for i, (a, b) in enumerate(zip(prefix, prefix[1:])):
        zi = {}
        for y in prefix[: i + 1]:
            zi[y] = zi.get(y, 0) + 1
        la, ra = ar_a.step_probs(a, zi.get(a - 1, 0), zi.get(a + 1, 0))
        lb, rb = ar_b.step_probs(a, zi.get(a - 1, 0), zi.get(a + 1, 0))
        pa = ar_a.mul(pa, ra if b > a else la)
        pb = ar_b.mul(pb, rb if b > a else lb)

    worst = 0
    count = 0
    equal = True

    def rec(x, depth, qa, qb):
        nonlocal worst, count, equal
        if depth == horizon:
            count += 1
            if mode == "rational":
                d = abs(qa - qb)
            else:
                d = max(abs(qa[0] - qb[0]), abs(qa[1] - qb[1]))
            if d != 0:
                equal = False
            worst = max(worst, d)
            return
        la, ra = ar_a.step_probs(x, z.get(x - 1, 0), z.get(x + 1, 0))
        lb, rb = ar_b.step_probs(x, z.get(x - 1, 0), z.get(x + 1, 0))
        for s, fa, fb in ((-1, la, lb), (1, ra, rb)):
            y = x + s
            if y < 1:
                continue
            z[y] = z.get(y, 0) + 1
            rec(y, depth + 1, ar_a.mul(qa, fa), ar_b.mul(qb, fb))
            z[y] -= 1

    rec(prefix[-1], m, ar_a.one, ar_b.one)
    return InvarianceResult(equal, worst, count, pa, pb)
