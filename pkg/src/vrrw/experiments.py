"""Monte Carlo estimates of stopping-time events and walk phenomenology.

Replica ``r`` of a call always uses stream ``stream0 + r`` of the master seed,
whatever the thread count, so every estimate is reproducible bit for bit.
Runs that hit the step cap with their race still open are *ambiguous*: they
are reported separately and only ever widen the bracket.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .events import OCCURRED, REFUTED, UNDECIDED, EventSpec, race_status
from .rng import RngStream
from .walk import (
    PreconditionError,
    StoppingClock,
    chunk_bounds,
    compile_env,
    init_walk,
    step,
)
from .weights import power_alpha

CI_LEVEL = 0.99


def clopper_pearson(successes, trials, level=CI_LEVEL):
    """Exact binomial interval for ``successes`` out of ``trials``."""
    a = 1 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(a / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - a / 2, successes + 1, trials - successes))
    return lo, hi


@dataclass
class Estimate:
    occurred: int
    refuted: int
    ambiguous: int
    seed: int
    event: str = ""
    x: int = 0
    level: float | None = None
    cap: int | None = None
    stream0: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise PreconditionError("an estimate needs at least one trial")

    @property
    def trials(self):
        return self.occurred + self.refuted + self.ambiguous

    @property
    def p_lo(self):
        return self.occurred / self.trials

    @property
    def p_hi(self):
        return (self.occurred + self.ambiguous) / self.trials

    @property
    def point(self):
        return self.p_lo

    def ci(self, level=CI_LEVEL):
        """Lower end from the occurred count, upper end from occurred + ambiguous."""
        lo, _ = clopper_pearson(self.occurred, self.trials, level)
        _, hi = clopper_pearson(self.occurred + self.ambiguous, self.trials, level)
        return lo, hi

    def ci_contains(self, p, level=CI_LEVEL):
        lo, hi = self.ci(level)
        return lo <= p <= hi

    def ci_overlaps(self, lo, hi, level=CI_LEVEL):
        a, b = self.ci(level)
        return a <= hi and lo <= b


def _require_trials(trials):
    if trials < 1:
        raise PreconditionError(f"trials must be >= 1, got {trials}")


def race_outcomes(env, event, trials, seed, cap, stream0=0, chunks=None):
    """Per-replica status codes (1 occurred, 0 refuted, 2 ambiguous) and stop steps."""
    _require_trials(trials)
    if cap < 1:
        raise PreconditionError(f"cap must be >= 1, got {cap}")
    race = event.compile()
    ce = compile_env(env, cap + 1)
    sites, thr, win, lose = race.arrays()
    return K.race_batch(*ce.args(), np.uint64(seed), np.int64(stream0),
                        chunk_bounds(trials, chunks), int(cap), sites, thr, win, lose)


def estimate_event(env, event: EventSpec, trials, master_seed, cap=10_000, stream0=0, chunks=None):
    out, _ = race_outcomes(env, event, trials, master_seed, cap, stream0, chunks)
    counts = np.bincount(out, minlength=3)
    return Estimate(
        occurred=int(counts[OCCURRED]),
        refuted=int(counts[REFUTED]),
        ambiguous=int(counts[UNDECIDED]),
        seed=int(master_seed),
        event=event.label,
        x=event.x,
        level=event.level,
        cap=cap,
        stream0=stream0,
        meta={"thresholds": event.thresholds()},
    )


def reference_event_run(env, event, seed, stream, cap):
    """One replica through the step-by-step engine; the slow twin of :func:`race_outcomes`."""
    race = event.compile()
    clock = StoppingClock(race.clocks)
    state = init_walk(env)
    rng = RngStream(seed, stream)
    clock.arm(state)

    def status():
        return race_status([clock.time(*c) for c in race.clocks], race.races)

    st = status()
    while st == UNDECIDED and state.step_count < cap:
        step(state, env, rng)
        if clock.update(state):
            st = status()
    return st, state.step_count


def lemma_bound(k, alpha, epsilon, c=1.0):
    """exp(-c k^(1-alpha) / |ln eps|^(1/(1-alpha))) with an explicit, arbitrary c."""
    return math.exp(-c * k ** (1 - alpha) / abs(math.log(epsilon)) ** (1 / (1 - alpha)))


def estimate_A0(env, x, k, gamma, epsilon, trials, seed, cap=100_000, alpha=None, c=1.0,
                stream0=0, chunks=None):
    """Estimate P[T_{x+1}(k^g) < T_x(k) and T_{x+1}(k^g) < T_{x+2}(k^g')], g' = (g-1)/alpha + 1 - eps."""
    _require_trials(trials)
    if alpha is None:
        alpha = power_alpha(env)
        if alpha is None:
            raise PreconditionError("pass alpha explicitly for non-power environments")
    alpha = float(alpha)
    if not gamma > 1:
        raise PreconditionError(f"gamma must be > 1, got {gamma}")
    if not 0 < epsilon < alpha:
        raise PreconditionError(f"epsilon must lie in (0, alpha), got {epsilon}")
    gp = (gamma - 1) / alpha + 1 - epsilon
    ev = EventSpec.A0(x, k, gamma, gp)
    est = estimate_event(env, ev, trials, seed, cap, stream0, chunks)
    est.meta.update(gamma_prime=gp, bound=lemma_bound(k, alpha, epsilon, c), bound_c=c)
    return est


@dataclass
class LocalizationProfile:
    horizon: int
    window_start: int
    support_min: np.ndarray
    support_max: np.ndarray

    @property
    def support_size(self):
        return self.support_max - self.support_min + 1

    @property
    def histogram(self):
        return Counter(int(s) for s in self.support_size)

    @property
    def modal_size(self):
        return self.histogram.most_common(1)[0][0]

    def fraction_with_size(self, size):
        return float(np.mean(self.support_size == size))

    def fraction_within(self, size):
        return float(np.mean(self.support_size <= size))


def localization_profile(env, horizon, window_fraction, trials, seed, stream0=0, chunks=None):
    """Sites visited during the last ``window_fraction`` of each run.

    The window covers X_s..X_horizon with s = horizon - round(window_fraction * horizon);
    a nearest-neighbour walk visits every site between its extremes, so the
    support is the interval [min, max].
    """
    if not 0 < window_fraction < 1:
        raise PreconditionError("window_fraction must lie in (0, 1)")
    _require_trials(trials)
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    ws = horizon - max(1, int(round(window_fraction * horizon)))
    ce = compile_env(env, horizon + 1)
    lo, hi = K.window_batch(*ce.args(), np.uint64(seed), np.int64(stream0),
                            chunk_bounds(trials, chunks), int(horizon), int(ws))
    return LocalizationProfile(horizon, ws, lo, hi)


@dataclass
class ExponentProfile:
    levels: np.ndarray
    depth: int
    local_times: np.ndarray  # (trials, levels, depth+1), -1 where the level was never reached

    @property
    def missing(self):
        return self.local_times[:, :, 0] < 0

    @property
    def log_ratios(self):
        """log Z(leftmost + i) / log k; NaN for unreached levels and for unvisited offsets."""
        z = self.local_times.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(z) / np.log(self.levels.astype(float))[None, :, None]
        out[z <= 0] = np.nan
        return out

    @property
    def unvisited(self):
        return self.local_times == 0

    def median_profile(self, level_index=0):
        lr = self.log_ratios[:, level_index, :]
        ok = ~np.all(np.isnan(lr), axis=1)
        if not ok.any():
            return np.full(self.depth + 1, np.nan)
        # unvisited offsets count as 0 for the median: the profile is then a lower envelope
        vals = np.where(np.isnan(lr[ok]), 0.0, lr[ok])
        return np.median(vals, axis=0)


def exponent_profile(env, k_levels, depth, trials, seed, cap=1_000_000, stream0=0, chunks=None):
    """Local-time exponents at the left edge of the range.

    For each level k the run is stopped (in effect) at the first time the
    currently leftmost visited site l has Z(l) = k, and Z(l + i) for
    i = 0..depth is recorded. Runs are unconditioned.
    """
    levels = np.asarray(k_levels, dtype=np.int64)
    if levels.ndim != 1 or levels.size == 0:
        raise PreconditionError("k_levels must be a non-empty list")
    if np.any(levels < 2) or np.any(np.diff(levels) <= 0):
        raise PreconditionError("k_levels must be increasing integers >= 2")
    _require_trials(trials)
    ce = compile_env(env, cap + 1)
    lt = K.edge_profile_batch(*ce.args(), np.uint64(seed), np.int64(stream0),
                              chunk_bounds(trials, chunks), int(cap), levels, int(depth))
    return ExponentProfile(levels, int(depth), lt)


@dataclass
class Diagnostics:
    probes: np.ndarray
    returns: np.ndarray  # (trials, probes): visits to 0 after time 0
    range_width: np.ndarray  # (trials, probes)

    def loglog_slope(self, min_n=10):
        """Slope of log(median returns) against log(n) over probes with n >= min_n."""
        med = np.median(self.returns, axis=0)
        keep = (self.probes >= min_n) & (med > 0)
        if keep.sum() < 2:
            return math.nan
        return float(np.polyfit(np.log(self.probes[keep]), np.log(med[keep]), 1)[0])


def log_probes(horizon, count=30):
    if horizon <= 0:
        return np.zeros(0, dtype=np.int64)
    pts = np.unique(np.round(np.logspace(0, math.log10(horizon), count)).astype(np.int64))
    return pts[(pts >= 1) & (pts <= horizon)]


def recurrence_diagnostics(env, horizon, trials, seed, probes=None, stream0=0, chunks=None):
    """Returns-to-origin counts and range widths over time (descriptive only)."""
    _require_trials(trials)
    probes = log_probes(horizon) if probes is None else np.asarray(sorted(probes), dtype=np.int64)
    if horizon <= 0 or probes.size == 0:
        empty = np.zeros((trials, 0), dtype=np.int64)
        return Diagnostics(np.zeros(0, dtype=np.int64), empty, empty.copy())
    if probes[-1] > horizon or probes[0] < 0:
        raise PreconditionError("probe times must lie in [0, horizon]")
    ce = compile_env(env, horizon + 1)
    ret, width = K.diagnostics_batch(*ce.args(), np.uint64(seed), np.int64(stream0),
                                     chunk_bounds(trials, chunks), int(horizon), probes)
    return Diagnostics(probes, ret, width)


@dataclass(frozen=True)
class DecayFit:
    kappa: float | None
    intercept: float | None
    r_squared: float | None
    n_points: int
    mode: str  # "fit" or "lower-bound-only"
    kappa_lower: float | None = None


def _prob(p):
    if isinstance(p, Estimate):
        return p.point, p
    return float(p), None


def decay_fit(points, r, alpha):
    """Least-squares fit of -log p(m) = kappa * m**(r*alpha) + b.

    ``points`` holds ``(m, Estimate)`` or ``(m, probability)`` pairs. Points
    with zero estimated probability are dropped. If every estimate is zero
    no fit is made; instead the upper CI ends give a lower bound on kappa.
    """
    points = list(points)
    if len(points) < 3:
        raise PreconditionError("decay_fit needs at least 3 points")
    s = r * alpha
    xs, ys = [], []
    for m, p in points:
        pv, _ = _prob(p)
        if pv > 0:
            xs.append(float(m) ** s)
            ys.append(-math.log(pv))
    if not xs:
        bounds = []
        for m, p in points:
            _, est = _prob(p)
            hi = est.ci()[1] if est is not None else 0.0
            if 0 < hi < 1:
                bounds.append(-math.log(hi) / float(m) ** s)
        return DecayFit(None, None, None, 0, "lower-bound-only", min(bounds) if bounds else None)
    if len(xs) < 3:
        raise PreconditionError("decay_fit needs at least 3 non-degenerate estimates")
    x = np.array(xs)
    y = np.array(ys)
    A = np.vstack([x, np.ones_like(x)]).T
    (kappa, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (kappa * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(kappa), float(b), r2, len(xs), "fit")
