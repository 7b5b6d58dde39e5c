"""Exponent recursions and the staging ledger behind the domino argument.

The exponents obey

    g_1 = 1,  g_2 = 1/alpha - e,  g_{i+2} = g_i (1 - e_i) + (g_{i+1} - g_i) / alpha

with either a fixed error ``e_i = eps`` (and ``e = eps``) or the summable
schedule ``e_i = r / i**2`` (and ``e = r``). Passing ``Fraction`` inputs keeps
everything exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .walk import PreconditionError

REL_TOL = 1e-12


def _exact(*xs):
    return all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in xs)


@dataclass(frozen=True)
class GammaParams:
    alpha: float | Fraction
    mode: str = "fixed"  # "fixed" or "theorem"
    epsilon: float | Fraction = 0
    r: float | Fraction = 0
    depth: int = 10

    def __post_init__(self):
        a = self.alpha
        if not 0 < a < 1:
            raise PreconditionError(f"alpha must lie in (0, 1) for the exponent recursion, got {a}")
        if self.mode not in ("fixed", "theorem"):
            raise PreconditionError(f"mode must be 'fixed' or 'theorem', got {self.mode!r}")
        if self.depth < 2:
            raise PreconditionError("depth must be >= 2")
        if self.mode == "fixed" and not 0 <= self.epsilon < a:
            raise PreconditionError(f"epsilon must lie in [0, alpha), got {self.epsilon}")
        if self.mode == "theorem" and self.r < 0:
            raise PreconditionError(f"r must be >= 0, got {self.r}")

    @property
    def exact(self):
        return _exact(self.alpha, self.epsilon if self.mode == "fixed" else self.r)

    def _num(self, x):
        return Fraction(x) if self.exact else float(x)

    @property
    def inv_alpha(self):
        return 1 / self._num(self.alpha)

    @property
    def q(self):
        """Growth factor 1/alpha - 1."""
        return self.inv_alpha - 1

    def eps(self, i):
        if self.mode == "fixed":
            return self._num(self.epsilon)
        return self._num(self.r) / (i * i)

    @property
    def gamma2_offset(self):
        return self._num(self.epsilon if self.mode == "fixed" else self.r)

    def with_depth(self, depth):
        return GammaParams(self.alpha, self.mode, self.epsilon, self.r, depth)


@dataclass(frozen=True)
class GammaSequence:
    params: GammaParams
    values: tuple  # values[i-1] is gamma_i
    increments: tuple  # increments[i-1] = gamma_{i+1} - gamma_i
    first_nonmonotone_index: int | None  # first i with gamma_i <= gamma_{i-1}

    def __getitem__(self, i):
        """1-based access: ``seq[1] == 1``."""
        if i < 1:
            raise IndexError("gamma indices start at 1")
        return self.values[i - 1]

    def __len__(self):
        return len(self.values)

    @property
    def strictly_increasing(self):
        return self.first_nonmonotone_index is None


def gamma_sequence(params: GammaParams) -> GammaSequence:
    one = params._num(1)
    g = [one, params.inv_alpha - params.gamma2_offset]
    for i in range(1, params.depth - 1):
        g.append(g[i - 1] * (one - params.eps(i)) + params.inv_alpha * (g[i] - g[i - 1]))
    g = g[: params.depth]
    inc = tuple(b - a for a, b in zip(g, g[1:]))
    bad = next((j + 2 for j, d in enumerate(inc) if d <= 0), None)
    return GammaSequence(params, tuple(g), inc, bad)


def increment_closed_form(params, i, seq=None):
    """g_{i+2} - g_{i+1} from the unrolled identity

        (g_2 - g_1) q**i - sum_{j=1..i} e_j g_j q**(i-j),   q = 1/alpha - 1.
    """
    if i < 0:
        raise PreconditionError("i must be >= 0")
    if seq is None or len(seq) < i:
        seq = gamma_sequence(params.with_depth(max(i + 2, 2)))
    q = params.q
    total = (seq[2] - seq[1]) * q**i
    for j in range(1, i + 1):
        total -= params.eps(j) * seq[j] * q ** (i - j)
    return total


def geometric_partial_sum(alpha, i):
    """sum_{j=0}^{i-1} (1/alpha - 1)**j, the eps = 0 value of g_i."""
    q = 1 / (Fraction(alpha) if _exact(alpha) else alpha) - 1
    return sum(q**j for j in range(i))


@dataclass(frozen=True)
class GrowthEnvelope:
    ratios: tuple  # gamma_i / q**i for i = 1..depth
    c_lower: float  # min ratio, an empirical lower constant
    c_upper: float  # max ratio, an empirical upper constant
    passed: bool
    first_nonincreasing_increment: int | None  # first i with (g_{i+2}-g_{i+1}) <= (g_{i+1}-g_i)
    first_nonpositive_increment: int | None  # first i with g_{i+1} - g_i <= 0
    note: str = ""


def growth_envelope(params: GammaParams, band=2.0) -> GrowthEnvelope:
    """Check that gamma_i / (1/alpha - 1)**i stays in a positive band.

    The band test is applied to the second half of the computed range; it
    passes when the sequence is strictly increasing and max/min of the tail
    ratios is at most ``band``. For alpha >= 1/2 the growth factor is <= 1,
    ratios are not meaningful as an envelope and the report focuses on where
    the increments stop growing.
    """
    seq = gamma_sequence(params)
    q = params.q
    inc = seq.increments
    first_dec = next((i for i in range(1, len(inc)) if inc[i] <= inc[i - 1]), None)
    first_nonpos = next((i for i in range(1, len(inc) + 1) if inc[i - 1] <= 0), None)
    if q <= 1:
        return GrowthEnvelope((), math.nan, math.nan, False, first_dec, first_nonpos,
                              "1/alpha - 1 <= 1: no exponential envelope")
    ratios = tuple(float(seq[i]) / float(q) ** i for i in range(1, len(seq) + 1))
    tail = ratios[len(ratios) // 2:]
    lo, hi = min(ratios), max(ratios)
    passed = seq.strictly_increasing and lo > 0 and max(tail) <= band * min(tail)
    return GrowthEnvelope(ratios, lo, hi, passed, first_dec, first_nonpos)


def monotone_r_threshold(alpha, depth=50, r_hi=None, tol=1e-10, max_iter=200):
    """Largest r (to ``tol``) keeping the theorem-mode sequence strictly increasing to ``depth``.

    Bisection between r = 0 (geometric, increasing for alpha < 1/2) and
    ``r_hi`` (default 1/alpha - 1, where g_2 = g_1).
    """
    def ok(r):
        return gamma_sequence(GammaParams(alpha, "theorem", r=r, depth=depth)).strictly_increasing

    if not ok(0.0):
        raise PreconditionError("sequence is not increasing even with r = 0")
    hi = float(1 / alpha - 1) if r_hi is None else float(r_hi)
    if ok(hi):
        return hi
    lo = 0.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Staging ledger


def stage_count(alpha, epsilon, rounding="floor"):
    """K = [3 ln(eps) / ln(alpha)]; both logs are negative so the ratio is positive."""
    v = 3 * math.log(epsilon) / math.log(alpha)
    if rounding == "floor":
        return math.floor(v)
    if rounding == "round":
        return round(v)
    if rounding == "ceil":
        return math.ceil(v)
    raise ValueError(f"unknown rounding {rounding!r}")


def _close_ge(a, b):
    return a >= b * (1 - REL_TOL)


@dataclass
class LedgerRow:
    i: int
    level: float  # k^gamma / (K-i+1)^2, the local time at x+1 defining t_i
    N: float
    p: float
    NiPi: float
    lower_bound: float
    ni_floor: float  # k^gamma / (K-i+2)^3
    ok: bool


@dataclass
class DominoLedger:
    k: float
    gamma: float
    alpha: float
    epsilon: float
    c0: float
    C: float
    rounding: str
    gamma_prime: float
    K: int
    rows: list = field(default_factory=list)
    largeness_ok: bool = False  # k >= exp(C / eps)
    final_applicable: bool = False  # eps >= C / ln k
    final_ok: bool = False  # N_K p_K / 2 > k + 1

    @property
    def all_N_positive(self):
        return all(r.N > 0 for r in self.rows)

    @property
    def levels_increasing(self):
        return all(b.level > a.level for a, b in zip(self.rows, self.rows[1:]))

    @property
    def bounds_hold(self):
        return all(r.ok for r in self.rows)

    @property
    def ni_floor_holds(self):
        return all(_close_ge(r.N, r.ni_floor) for r in self.rows)

    @property
    def verified(self):
        return self.largeness_ok and self.all_N_positive and self.levels_increasing and self.bounds_hold


def domino_ledger(k, gamma, alpha, epsilon, c0=0.5, C=1.0, rounding="floor"):
    """Every quantity of the staging argument for one (k, gamma, alpha, eps).

    c0 and C are free constants (the argument only asserts they exist); the
    ledger records what was used. Below the largeness threshold the numbers
    are still computed, with ``largeness_ok`` False.
    """
    if not gamma > 1:
        raise PreconditionError(f"gamma must be > 1, got {gamma}")
    if not 0 < alpha < 1:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 < epsilon < alpha:
        raise PreconditionError(f"epsilon must lie in (0, alpha), got {epsilon}")
    if not 0 < c0 < 1:
        raise PreconditionError(f"c0 must lie in (0, 1), got {c0}")
    K = stage_count(alpha, epsilon, rounding)
    if K < 1:
        raise PreconditionError(f"K = {K} < 1: epsilon too large relative to alpha")
    k = float(k)
    gp = (gamma - 1) / alpha + 1 - epsilon
    kg = k**gamma
    led = DominoLedger(k, gamma, alpha, epsilon, c0, C, rounding, gp, K)
    led.largeness_ok = math.log(k) >= C / epsilon
    led.final_applicable = epsilon >= C / math.log(k) if k > 1 else False
    kpow = k ** (-alpha * gp)
    prev_np = None
    for i in range(1, K + 1):
        level = kg / (K - i + 1) ** 2
        if i == 1:
            N = kg / K**2
            p = c0 * kpow
        else:
            N = level - kg / (K - i + 2) ** 2
            p = c0 * (prev_np / 2) ** alpha * kpow
        np_ = N * p
        geo = sum(alpha**j for j in range(i + 1))
        log_prod = sum(alpha ** (i - j) * math.log(K - j + 2) for j in range(1, i + 1))
        bound = 2 * (c0 / 2) ** geo * math.exp(-3 * log_prod) * k ** (1 - alpha**i + alpha * epsilon)
        floor_ = kg / (K - i + 2) ** 3
        led.rows.append(LedgerRow(i, level, N, p, np_, bound, floor_, _close_ge(np_, bound)))
        prev_np = np_
    led.final_ok = led.rows[-1].NiPi / 2 > k + 1
    return led


@dataclass(frozen=True)
class ProductRow:
    K: int
    product: float  # prod_{j=1}^K (K-j+2)^(alpha^(K-j))
    running_sup: float
    cap: float  # (K+1)^(1/(1-alpha))
    worst_partial_ratio: float  # max_i partial_i / cap
    ok: bool


def product_bound_scan(alpha, K_max):
    """Products prod_{j=1}^i (K-j+2)^(alpha^(i-j)) for all i <= K <= K_max, against (K+1)^(1/(1-alpha)).

    Work is done in logs; a partial product passes when it does not exceed
    the cap (with a 1e-12 relative slack for rounding).
    """
    if not 0 < alpha < 1 or K_max < 1:
        raise PreconditionError("need alpha in (0, 1) and K_max >= 1")
    rows = []
    sup = 0.0
    for K in range(1, K_max + 1):
        logs = [math.log(K - j + 2) for j in range(1, K + 1)]
        log_cap = math.log(K + 1) / (1 - alpha)
        worst = -math.inf
        for i in range(1, K + 1):
            lp = math.fsum(alpha ** (i - j) * logs[j - 1] for j in range(1, i + 1))
            worst = max(worst, lp - log_cap)
        full = math.exp(math.fsum(alpha ** (K - j) * logs[j - 1] for j in range(1, K + 1)))
        sup = max(sup, full)
        rows.append(ProductRow(K, full, sup, math.exp(log_cap), math.exp(worst), worst <= 1e-12))
    return rows
