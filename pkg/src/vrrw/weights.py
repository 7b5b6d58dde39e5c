"""Weight sequences w_k and site-dependent environments w_k(x).

A :class:`WeightSpec` maps a local time ``k >= 0`` to a positive weight. An
:class:`Environment` picks a spec per site: finite overrides first, then an
optional rule for the whole negative half-line, then the default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

KINDS = ("power", "linear", "table", "custom", "shifted")
TAILS = ("constant", "power")


class WeightError(ValueError):
    pass


# name -> (float formula, exact formula or None). Formulas take (k, params).
_FORMULAS: dict[str, tuple[Callable, Callable | None]] = {}


def register_formula(name, func, exact=None):
    """Register a custom weight formula ``func(k, params) -> float``.

    ``exact(k, params)`` may return a Fraction when the formula is rational.
    """
    _FORMULAS[name] = (func, exact)


register_formula(
    "offset_power",
    lambda k, p: p.get("scale", 1.0) * (k + p.get("offset", 1.0)) ** p["alpha"],
)
register_formula("log", lambda k, p: p.get("scale", 1.0) * math.log(k + p.get("offset", math.e)))
register_formula("exp", lambda k, p: math.exp(p.get("rate", 1.0) * k))
register_formula(
    "affine",
    lambda k, p: p.get("slope", 1.0) * k + p.get("intercept", 1.0),
    lambda k, p: Fraction(p.get("slope", 1)) * k + Fraction(p.get("intercept", 1)),
)


def _is_integral(value):
    return float(value).is_integer()


@dataclass(frozen=True)
class WeightSpec:
    """One weight sequence. Build with the ``make_*`` helpers rather than directly."""

    kind: str
    alpha: float | Fraction | None = None
    values: tuple = ()
    tail: str | None = None
    tail_exponent: float | None = None
    formula: str | None = None
    params: tuple = ()
    base: WeightSpec | None = None
    shift: int = 0

    def __call__(self, k):
        return weight_at(self, k)

    def exact(self, k):
        return weight_exact(self, k)

    @property
    def is_exact(self):
        """True when every weight is rational and :func:`weight_exact` returns Fractions."""
        if self.kind == "linear":
            return True
        if self.kind == "power":
            return _is_integral(self.alpha)
        if self.kind == "table":
            if not all(isinstance(v, (int, Fraction)) for v in self.values):
                return False
            return self.tail == "constant" or _is_integral(self.tail_exponent)
        if self.kind == "shifted":
            return self.base.is_exact
        if self.kind == "custom":
            return _FORMULAS[self.formula][1] is not None
        return False

    def to_dict(self):
        if self.kind == "power":
            return {"kind": "power", "alpha": _num_out(self.alpha)}
        if self.kind == "linear":
            return {"kind": "linear"}
        if self.kind == "table":
            d = {"kind": "table", "values": [_num_out(v) for v in self.values], "tail": self.tail}
            if self.tail == "power":
                d["tail_exponent"] = _num_out(self.tail_exponent)
            return d
        if self.kind == "custom":
            return {"kind": "custom", "formula": self.formula, "params": dict(self.params)}
        return {"kind": "shifted", "base": self.base.to_dict(), "shift": self.shift}


def _num_out(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def parse_number(v):
    """Numbers in configs: ints, floats, or exact ``"p/q"`` strings."""
    if isinstance(v, bool):
        raise WeightError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float, Fraction)):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            pass
    raise WeightError(f"expected a number, got {v!r}")


def make_power_weight(alpha):
    """w_k = (k+1)**alpha."""
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float, Fraction)):
        raise WeightError(f"alpha must be a real number, got {alpha!r}")
    if not math.isfinite(alpha) or alpha < 0:
        raise WeightError(f"alpha must be finite and >= 0, got {alpha}")
    return WeightSpec("power", alpha=alpha)


def linear_weight():
    """w_k = k+1, the linearly reinforced walk."""
    return WeightSpec("linear")


def make_table_weight(values, tail, tail_exponent=None):
    """Explicit w_0..w_{L-1} extended by a tail rule.

    ``tail="constant"`` repeats the last value; ``tail="power"`` continues with
    ``w_k = values[-1] * ((k+1)/L)**tail_exponent``. ``tail=None`` is allowed
    but then querying past the table is an error.
    """
    values = tuple(values)
    if not values:
        raise WeightError("table weight needs at least one value")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float, Fraction)):
            raise WeightError(f"table values must be numbers, got {v!r}")
        if not (math.isfinite(v) and v > 0):
            raise WeightError(f"table weights must be positive and finite, got {v}")
    if tail not in (None, *TAILS):
        raise WeightError(f"unknown tail rule {tail!r}")
    if tail == "power":
        if tail_exponent is None or not math.isfinite(tail_exponent):
            raise WeightError("power tail needs a finite tail_exponent")
    return WeightSpec("table", values=values, tail=tail, tail_exponent=tail_exponent)


def make_custom_weight(formula, **params):
    if formula not in _FORMULAS:
        raise WeightError(f"unknown formula {formula!r}; known: {sorted(_FORMULAS)}")
    return WeightSpec("custom", formula=formula, params=tuple(sorted(params.items())))


def shifted_weight(base, shift=1):
    """w'_k = w_{k+shift}, e.g. the half-line environment w'_k(x) = w_{k+1} for x < 0."""
    if shift < 0:
        raise WeightError("shift must be >= 0")
    return WeightSpec("shifted", base=base, shift=int(shift))


def _check_k(k):
    if k < 0:
        raise WeightError(f"local time must be >= 0, got {k}")


def _raw_weight(spec, k):
    kind = spec.kind
    if kind == "power":
        a = spec.alpha
        if a == 0:
            return 1.0
        return float(k + 1) ** float(a)
    if kind == "linear":
        return float(k + 1)
    if kind == "table":
        n = len(spec.values)
        if k < n:
            return float(spec.values[k])
        if spec.tail == "constant":
            return float(spec.values[-1])
        if spec.tail == "power":
            return float(spec.values[-1]) * ((k + 1) / n) ** float(spec.tail_exponent)
        raise WeightError(f"table of length {n} has no tail rule; queried k={k}")
    if kind == "custom":
        return float(_FORMULAS[spec.formula][0](k, dict(spec.params)))
    if kind == "shifted":
        return _raw_weight(spec.base, k + spec.shift)
    raise WeightError(f"unknown weight kind {kind!r}")


def weight_at(spec, k):
    """w_k as a positive float."""
    _check_k(k)
    w = _raw_weight(spec, k)
    if not (math.isfinite(w) and w > 0):
        raise WeightError(f"{spec.kind} weight at k={k} is {w}, not positive and finite")
    return w


def weight_exact(spec, k):
    """w_k as a Fraction, or None when the weight is not rational."""
    _check_k(k)
    kind = spec.kind
    if kind == "linear":
        return Fraction(k + 1)
    if kind == "power":
        if not _is_integral(spec.alpha):
            return None
        return Fraction(k + 1) ** int(spec.alpha)
    if kind == "table":
        if not spec.is_exact:
            return None
        n = len(spec.values)
        if k < n:
            return Fraction(spec.values[k])
        if spec.tail == "constant":
            return Fraction(spec.values[-1])
        if spec.tail == "power":
            return Fraction(spec.values[-1]) * Fraction(k + 1, n) ** int(spec.tail_exponent)
        raise WeightError(f"table of length {n} has no tail rule; queried k={k}")
    if kind == "shifted":
        return weight_exact(spec.base, k + spec.shift)
    if kind == "custom":
        exact = _FORMULAS[spec.formula][1]
        return None if exact is None else Fraction(exact(k, dict(spec.params)))
    return None


@lru_cache(maxsize=32)
def weight_table(spec, n):
    """Read-only array of w_0..w_{n-1}, bit-identical to repeated :func:`weight_at`.

    Built with scalar ``**`` on purpose: numpy's vectorised power can differ
    from libm in the last ulp, which would break engine/step-API agreement.
    """
    if spec.kind == "linear":
        out = np.arange(1, n + 1, dtype=np.float64)
    else:
        out = np.array([_raw_weight(spec, k) for k in range(n)], dtype=np.float64)
    if n and not (np.all(np.isfinite(out)) and np.all(out > 0)):
        raise WeightError(f"{spec.kind} weight table has non-positive or non-finite entries")
    out.setflags(write=False)
    return out


def weight_from_dict(d):
    if not isinstance(d, Mapping):
        raise WeightError(f"weight must be a table, got {d!r}")
    kind = d.get("kind")
    allowed = {
        "power": {"kind", "alpha"},
        "linear": {"kind"},
        "table": {"kind", "values", "tail", "tail_exponent"},
        "custom": {"kind", "formula", "params"},
        "shifted": {"kind", "base", "shift"},
    }
    if kind not in allowed:
        raise WeightError(f"unknown weight kind {kind!r}")
    extra = set(d) - allowed[kind]
    if extra:
        raise WeightError(f"unknown key(s) for {kind} weight: {sorted(extra)}")
    if kind == "power":
        if "alpha" not in d:
            raise WeightError("power weight needs alpha")
        return make_power_weight(parse_number(d["alpha"]))
    if kind == "linear":
        return linear_weight()
    if kind == "table":
        te = d.get("tail_exponent")
        return make_table_weight(
            [parse_number(v) for v in d.get("values", [])],
            d.get("tail"),
            None if te is None else parse_number(te),
        )
    if kind == "custom":
        return make_custom_weight(d.get("formula"), **dict(d.get("params", {})))
    return shifted_weight(weight_from_dict(d.get("base")), d.get("shift", 1))


@dataclass(frozen=True)
class Environment:
    """Site-dependent weights: ``overrides`` beat ``left`` (all x < 0) beat ``default``."""

    default: WeightSpec
    overrides: Mapping[int, WeightSpec] = field(default_factory=dict)
    left: WeightSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "overrides", dict(sorted(self.overrides.items())))

    def __hash__(self):
        return hash((self.default, tuple(self.overrides.items()), self.left))

    def spec_at(self, x):
        spec = self.overrides.get(x)
        if spec is not None:
            return spec
        if x < 0 and self.left is not None:
            return self.left
        return self.default

    def weight(self, x, k):
        return weight_at(self.spec_at(x), k)

    def weight_exact(self, x, k):
        return weight_exact(self.spec_at(x), k)

    @property
    def is_homogeneous(self):
        return not self.overrides and self.left is None

    @property
    def is_exact(self):
        specs = [self.default, *self.overrides.values()]
        if self.left is not None:
            specs.append(self.left)
        return all(s.is_exact for s in specs)

    def to_dict(self):
        d = {"weight": self.default.to_dict()}
        if self.left is not None:
            d["left"] = self.left.to_dict()
        if self.overrides:
            d["override"] = [{"site": x, "weight": s.to_dict()} for x, s in self.overrides.items()]
        return d


def make_site_env(default, overrides=None, left=None):
    """Environment with finite per-site overrides and an optional negative half-line rule.

    Every override is probed at k = 0..63 (and the table length, for tables)
    so a spec that produces a non-positive weight is rejected up front.
    """
    overrides = dict(overrides or {})
    for x, spec in overrides.items():
        if not isinstance(x, int):
            raise WeightError(f"override sites must be integers, got {x!r}")
        _probe(spec, f"override at site {x}")
    _probe(default, "default weight")
    if left is not None:
        _probe(left, "left half-line weight")
    return Environment(default, overrides, left)


def _probe(spec, what):
    n = 64
    if spec.kind == "table" and spec.tail is None:
        n = len(spec.values)
    try:
        for k in range(n):
            weight_at(spec, k)
    except WeightError as exc:
        raise WeightError(f"{what}: {exc}") from None


def homogeneous(spec):
    return Environment(spec)


def power_alpha(env):
    """The reinforcement exponent of a homogeneous power/linear environment, else None."""
    spec = env.default
    if spec.kind == "power":
        return spec.alpha
    if spec.kind == "linear":
        return 1
    return None
