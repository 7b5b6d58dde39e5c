"""Experiment configuration files (TOML).

One file describes one experiment::

    kind = "event"
    seed = 42
    trials = 1000
    cap = 10000

    [weight]
    kind = "power"
    alpha = 0.3

    [params]
    event = "E"
    x = 0
    m = [2, 3, 4]

Optional ``[environment]`` holds ``left`` (a weight for every x < 0) and an
array ``[[environment.override]]`` of ``{site, weight}`` tables. Exact
rationals may be written as strings, e.g. ``alpha = "1/3"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import tomli
import tomli_w

from .weights import WeightError, make_site_env, parse_number, weight_from_dict

KINDS = ("simulate", "oracle", "gamma", "ledger", "event", "localization",
         "exponents", "diagnostics", "decay-fit", "compare")
TOP_KEYS = {"kind", "seed", "trials", "horizon", "cap", "out", "threads", "weight", "environment", "params"}

_NUM = "number"
_INT = "int"
_STR = "str"
_NUMS = "numbers"  # number or list of numbers
_INTS = "ints"
_ANY = "any"

# kind -> (required top-level fields, {param: (type, default)}); default ... means required
_REQUIRED = ...
SCHEMAS = {
    "simulate": ({"horizon", "trials", "seed"}, {"dump_trajectories": (_INT, 0), "probes": (_INTS, [])}),
    "oracle": ({"horizon"}, {"mode": (_STR, "auto"), "limit": (_INT, 24), "event": (_ANY, None)}),
    "gamma": (set(), {"alpha": (_NUM, _REQUIRED), "mode": (_STR, "fixed"), "epsilon": (_NUM, 0),
                      "r": (_NUM, 0), "depth": (_INT, 10)}),
    "ledger": (set(), {"alpha": (_NUM, _REQUIRED), "epsilon": (_NUM, _REQUIRED), "gamma": (_NUM, _REQUIRED),
                       "k": (_NUMS, _REQUIRED), "c0": (_NUM, 0.5), "C": (_NUM, 1.0),
                       "rounding": (_STR, "floor"), "product_kmax": (_INT, 0)}),
    "event": ({"trials", "seed", "cap"}, {"event": (_STR, "E"), "x": (_INT, 0), "m": (_NUMS, None),
                                          "k": (_NUMS, None), "gamma": (_NUM, None), "epsilon": (_NUM, None),
                                          "alpha": (_NUM, None), "depth": (_INT, 6), "r": (_NUM, 0.01),
                                          "gammas": (_NUMS, None), "bound_c": (_NUM, 1.0)}),
    "localization": ({"horizon", "trials", "seed"}, {"window_fraction": (_NUM, _REQUIRED)}),
    "exponents": ({"trials", "seed", "cap"}, {"k_levels": (_INTS, _REQUIRED), "depth": (_INT, 3)}),
    "diagnostics": ({"horizon", "trials", "seed"}, {"probes": (_INTS, None)}),
    "decay-fit": (set(), {"r": (_NUM, _REQUIRED), "alpha": (_NUM, _REQUIRED), "events_csv": (_STR, None),
                          "points": (_ANY, None)}),
    "compare": (set(), {"a": (_STR, _REQUIRED), "b": (_STR, _REQUIRED), "tolerance": (_NUM, 0.0),
                        "mode": (_STR, "columns")}),
}
STOCHASTIC = {"simulate", "event", "localization", "exponents", "diagnostics"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass
class ExperimentConfig:
    kind: str
    weight: dict = field(default_factory=lambda: {"kind": "power", "alpha": 0})
    environment: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int | None = None
    trials: int | None = None
    horizon: int | None = None
    cap: int | None = None
    out: str | None = None
    threads: int | None = None

    def env(self):
        e = self.environment
        overrides = {o["site"]: weight_from_dict(o["weight"]) for o in e.get("override", [])}
        left = weight_from_dict(e["left"]) if "left" in e else None
        return make_site_env(weight_from_dict(self.weight), overrides, left)

    def to_dict(self):
        d = {"kind": self.kind}
        for key in ("seed", "trials", "horizon", "cap", "out", "threads"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        d["weight"] = _plain(self.weight)
        if self.environment:
            d["environment"] = _plain(self.environment)
        if self.params:
            d["params"] = _plain(self.params)
        return d


def _plain(v):
    """Convert Fractions to "p/q" strings and drop None values, recursively."""
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items() if x is not None}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def serialize_config(config: ExperimentConfig) -> str:
    return tomli_w.dumps(config.to_dict())


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check_type(name, v, typ, errors):
    try:
        if typ == _NUM:
            return parse_number(v)
        if typ == _INT:
            if not _is_int(v):
                raise WeightError(f"expected an integer, got {v!r}")
            return v
        if typ == _STR:
            if not isinstance(v, str):
                raise WeightError(f"expected a string, got {v!r}")
            return v
        if typ == _NUMS:
            return [parse_number(x) for x in v] if isinstance(v, list) else parse_number(v)
        if typ == _INTS:
            vals = v if isinstance(v, list) else [v]
            if not all(_is_int(x) for x in vals):
                raise WeightError(f"expected integers, got {v!r}")
            return list(vals)
        return v
    except WeightError as exc:
        errors.append(f"params.{name}: {exc}")
        return None


def config_from_dict(d) -> ExperimentConfig:
    errors = []
    unknown = set(d) - TOP_KEYS
    if unknown:
        errors.append(f"unknown top-level key(s): {sorted(unknown)}")
    kind = d.get("kind")
    if kind not in KINDS:
        errors.append(f"kind must be one of {list(KINDS)}, got {kind!r}")
        raise ConfigError(errors)
    required, schema = SCHEMAS[kind]

    for key in ("seed", "trials", "horizon", "cap", "threads"):
        if key in d and not _is_int(d[key]):
            errors.append(f"{key} must be an integer, got {d[key]!r}")
    for key in sorted(required):
        if key not in d:
            errors.append(f"missing required field {key!r} for kind {kind!r}")
    if "seed" in d and _is_int(d["seed"]) and not 0 <= d["seed"] < 2**64:
        errors.append(f"seed must be an unsigned 64-bit integer, got {d['seed']}")
    if _is_int(d.get("trials")) and d["trials"] < 1:
        errors.append(f"trials must be >= 1, got {d['trials']}")
    if _is_int(d.get("cap")) and d["cap"] < 1:
        errors.append(f"cap must be >= 1, got {d['cap']}")
    if _is_int(d.get("horizon")) and d["horizon"] < 0:
        errors.append(f"horizon must be >= 0, got {d['horizon']}")
    if "out" in d and not isinstance(d["out"], str):
        errors.append("out must be a string")

    weight = d.get("weight", {"kind": "power", "alpha": 0})
    environment = d.get("environment", {})
    try:
        _validate_weight("weight", weight, errors)
        if not isinstance(environment, dict):
            raise WeightError("environment must be a table")
        extra = set(environment) - {"left", "override"}
        if extra:
            errors.append(f"environment: unknown key(s) {sorted(extra)}")
        if "left" in environment:
            _validate_weight("environment.left", environment["left"], errors)
        sites = set()
        for j, o in enumerate(environment.get("override", [])):
            if set(o) != {"site", "weight"} or not _is_int(o.get("site")):
                errors.append(f"environment.override[{j}] needs exactly an integer site and a weight")
                continue
            if o["site"] in sites:
                errors.append(f"environment.override[{j}]: duplicate site {o['site']}")
            sites.add(o["site"])
            _validate_weight(f"environment.override[{j}].weight", o["weight"], errors)
    except WeightError as exc:
        errors.append(str(exc))

    raw = d.get("params", {})
    if not isinstance(raw, dict):
        errors.append("params must be a table")
        raw = {}
    extra = set(raw) - set(schema)
    if extra:
        errors.append(f"params: unknown key(s) for kind {kind!r}: {sorted(extra)}")
    params = {}
    for name, (typ, default) in schema.items():
        if name in raw:
            params[name] = _check_type(name, raw[name], typ, errors)
        elif default is _REQUIRED:
            errors.append(f"params.{name} is required for kind {kind!r}")
        elif default is not None:
            params[name] = default
    _validate_params(kind, params, d, errors)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        kind=kind,
        weight=weight,
        environment=environment,
        params=params,
        seed=d.get("seed"),
        trials=d.get("trials"),
        horizon=d.get("horizon"),
        cap=d.get("cap"),
        out=d.get("out"),
        threads=d.get("threads"),
    )


def _validate_weight(where, w, errors):
    try:
        spec = weight_from_dict(w)
    except (WeightError, TypeError) as exc:
        errors.append(f"{where}: {exc}")
        return
    if spec.kind == "power" and not 0 <= spec.alpha < 1:
        errors.append(
            f"{where}: power weights need alpha in [0, 1), got {spec.alpha}"
            " (use kind = \"linear\" for alpha = 1, or a custom offset_power formula beyond)"
        )


def _lst(v):
    return v if isinstance(v, list) else [v]


def _validate_params(kind, p, d, errors):
    def bad(msg):
        errors.append(f"params: {msg}")

    # a required parameter that failed its type check is already reported
    if any(p.get(k) is None for k, (_, dflt) in SCHEMAS[kind][1].items() if dflt is _REQUIRED):
        return
    if kind == "gamma":
        a = p["alpha"]
        if not 0 < a < 1:
            bad(f"alpha must lie in (0, 1), got {a}")
        elif p["mode"] not in ("fixed", "theorem"):
            bad(f"mode must be fixed or theorem, got {p['mode']!r}")
        elif p["mode"] == "fixed" and not 0 <= p["epsilon"] < a:
            bad(f"epsilon must lie in [0, alpha), got {p['epsilon']}")
        elif p["r"] < 0:
            bad("r must be >= 0")
        if p["depth"] < 2:
            bad("depth must be >= 2")
    elif kind == "ledger":
        a, e = p["alpha"], p["epsilon"]
        if not 0 < a < 1:
            bad(f"alpha must lie in (0, 1), got {a}")
        elif not 0 < e < a:
            bad(f"epsilon must lie in (0, alpha), got {e}")
        if p["gamma"] is not None and not p["gamma"] > 1:
            bad("gamma must be > 1")
        if p["k"] is not None and any(k <= 1 for k in _lst(p["k"])):
            bad("k must be > 1")
        if p["rounding"] not in ("floor", "round", "ceil"):
            bad(f"rounding must be floor, round or ceil, got {p['rounding']!r}")
    elif kind == "event":
        ev = p["event"]
        if ev not in ("E", "Eprime", "A0", "F"):
            bad(f"event must be E, Eprime, A0 or F, got {ev!r}")
        elif ev in ("E", "Eprime", "F") and p.get("m") is None:
            bad(f"event {ev} needs m")
        elif ev == "A0":
            for key in ("k", "gamma", "epsilon"):
                if p.get(key) is None:
                    bad(f"event A0 needs {key}")
        if ev == "F" and p.get("gammas") is None and p.get("alpha") is None and "alpha" not in (d.get("weight") or {}):
            bad("event F needs gammas or alpha")
    elif kind == "localization":
        if not 0 < p["window_fraction"] < 1:
            bad("window_fraction must lie in (0, 1)")
    elif kind == "exponents":
        lv = p["k_levels"]
        if lv is not None and (any(k < 2 for k in lv) or any(b <= a for a, b in zip(lv, lv[1:]))):
            bad("k_levels must be increasing integers >= 2")
    elif kind == "oracle":
        if p["mode"] not in ("auto", "rational", "interval"):
            bad(f"mode must be auto, rational or interval, got {p['mode']!r}")
        if p.get("event") is not None and not isinstance(p["event"], dict):
            bad("event must be a table")
    elif kind == "decay-fit":
        if p.get("events_csv") is None and p.get("points") is None:
            bad("decay-fit needs events_csv or points")
    elif kind == "compare":
        if p["mode"] not in ("columns", "tv"):
            bad(f"mode must be columns or tv, got {p['mode']!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment config; errors carry line numbers where TOML gives them."""
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    return config_from_dict(d)


def load_config(path) -> ExperimentConfig:
    """Read a ``.toml`` config, or the config embedded in a ``manifest.json``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        return config_from_dict(json.loads(text)["config"])
    return parse_config(text)
