"""Command-line entry point and experiment orchestration.

    vrrw <kind> --config FILE [--out DIR] [--seed N] [--threads N]
    vrrw compare A.csv B.csv [--tolerance T] [--mode columns|tv]

Each run writes its CSV outputs into the output directory and a
``manifest.json`` last. Only ``VRRW_OUT`` and ``VRRW_THREADS`` are read from
the environment.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as mc
from . import gamma as ga
from . import oracle
from .config import ConfigError, ExperimentConfig, load_config
from .events import EventSpec
from .rng import RNG_ALGORITHM
from .walk import PreconditionError, empirical_endpoint_distribution, kernel_trajectory, set_threads, thread_count
from .weights import WeightError, power_alpha

log = logging.getLogger("vrrw")

CLI_KINDS = {"gamma": "gamma", "ledger": "ledger", "oracle": "oracle", "simulate": "simulate",
             "event": "event", "localization": "localization", "exponents": "exponents",
             "diagnostics": "diagnostics", "fit": "decay-fit", "decay-fit": "decay-fit", "compare": "compare"}


class SchemaError(ValueError):
    pass


def fmt(v):
    """Canonical CSV text for a value: shortest round-trip floats, exact ints."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if v.is_integer() and abs(v) < 2**53:
            return str(int(v))
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file, no header")
    return rows[0], rows[1:]


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    toolkit_version: str
    rng: str
    wall_time_s: float
    threads: int
    files: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


# --- per-kind runners; each returns the list of files written ----------------


def _lst(v):
    return v if isinstance(v, list) else [v]


def _bracket_text(p):
    return (p, p) if isinstance(p, Fraction) else p


def _run_gamma(cfg, env, out):
    p = cfg.params
    params = ga.GammaParams(p["alpha"], p["mode"], p["epsilon"], p["r"], p["depth"])
    seq = ga.gamma_sequence(params)
    q = params.q
    rows = []
    for i in range(1, len(seq) + 1):
        inc = seq[i] - seq[i - 1] if i >= 2 else None
        closed = ga.increment_closed_form(params, i - 2, seq) if i >= 2 else None
        ratio = seq[i] / q**i if q != 0 else None
        rows.append((i, seq[i], inc, closed, ratio))
    return [write_csv(out / "gamma.csv", ["i", "gamma_i", "increment", "closed_form", "ratio"], rows)]


def _run_ledger(cfg, env, out):
    p = cfg.params
    files = []
    ks = _lst(p["k"])
    for k in ks:
        led = ga.domino_ledger(float(k), float(p["gamma"]), float(p["alpha"]), float(p["epsilon"]),
                               float(p["c0"]), float(p["C"]), p["rounding"])
        name = "ledger.csv" if len(ks) == 1 else f"ledger_k{fmt(k)}.csv"
        rows = [(r.i, r.N, r.p, r.NiPi, r.lower_bound, r.ok) for r in led.rows]
        files.append(write_csv(out / name, ["i", "N_i", "p_i", "NiPi", "lower_bound", "ok"], rows))
        summary = out / name.replace(".csv", "_summary.csv")
        files.append(write_csv(summary, ["k", "gamma", "alpha", "epsilon", "c0", "C", "gamma_prime", "K",
                                         "largeness_ok", "levels_increasing", "all_N_positive",
                                         "final_applicable", "final_ok"],
                               [(k, led.gamma, led.alpha, led.epsilon, led.c0, led.C, led.gamma_prime, led.K,
                                 led.largeness_ok, led.levels_increasing, led.all_N_positive,
                                 led.final_applicable, led.final_ok)]))
    if p.get("product_kmax"):
        rows = ga.product_bound_scan(float(p["alpha"]), p["product_kmax"])
        files.append(write_csv(out / "product_bound.csv",
                               ["K", "product", "running_sup", "cap", "worst_partial_ratio", "ok"],
                               [(r.K, r.product, r.running_sup, r.cap, r.worst_partial_ratio, r.ok) for r in rows]))
    return files


def _event_specs(cfg, env):
    """Expand the configured event sweep in listed order."""
    p = cfg.params
    ev = p["event"]
    x = p["x"]
    if ev in ("E", "Eprime"):
        make = EventSpec.E if ev == "E" else EventSpec.Eprime
        return [make(x, m) for m in _lst(p["m"])]
    if ev == "A0":
        return [("A0", x, k) for k in _lst(p["k"])]
    gammas = p.get("gammas")
    if gammas is None:
        alpha = p.get("alpha", power_alpha(env))
        params = ga.GammaParams(alpha, "theorem", r=p["r"], depth=p["depth"] + 1)
        gammas = ga.gamma_sequence(params).values
    return [EventSpec.F(x, m, gammas, p["depth"]) for m in _lst(p["m"])]


def _run_event(cfg, env, out):
    p = cfg.params
    rows, thr_rows = [], []
    for idx, spec in enumerate(_event_specs(cfg, env)):
        stream0 = idx * cfg.trials
        if isinstance(spec, tuple):
            _, x, k = spec
            est = mc.estimate_A0(env, x, k, float(p["gamma"]), float(p["epsilon"]), cfg.trials, cfg.seed,
                                 cfg.cap, alpha=p.get("alpha"), c=float(p["bound_c"]), stream0=stream0)
        else:
            est = mc.estimate_event(env, spec, cfg.trials, cfg.seed, cfg.cap, stream0=stream0)
        lo, hi = est.ci()
        rows.append((est.event, est.x, est.level, est.trials, est.occurred, est.refuted, est.ambiguous,
                     est.p_lo, est.p_hi, lo, hi))
        for clock, t in est.meta["thresholds"].items():
            thr_rows.append((est.event, est.x, est.level, clock, t))
    header = ["event", "x", "m_or_k", "trials", "occurred", "refuted", "ambiguous", "p_lo", "p_hi", "ci_lo", "ci_hi"]
    return [write_csv(out / "events.csv", header, rows),
            write_csv(out / "event_thresholds.csv", ["event", "x", "m_or_k", "clock", "threshold"], thr_rows)]


def _oracle_event(d):
    kind = d.get("type", "E")
    x = d.get("x", 0)
    if kind == "E":
        return EventSpec.E(x, d["m"])
    if kind == "Eprime":
        return EventSpec.Eprime(x, d["m"])
    if kind == "A0":
        return EventSpec.A0(x, d["k"], d["gamma"], d["gamma_prime"])
    if kind == "hit":
        return EventSpec.hitting_race(d["a"], d["b"])
    raise PreconditionError(f"unsupported oracle event type {kind!r}")


def _run_oracle(cfg, env, out):
    p = cfg.params
    dist = oracle.endpoint_distribution(env, cfg.horizon, p["mode"], p["limit"])
    rows = [(x, *_bracket_text(v)) for x, v in dist.items()]
    files = [write_csv(out / "endpoint.csv", ["site", "probability_lo", "probability_hi"], rows)]
    if p.get("event"):
        ev = _oracle_event(p["event"])
        b = oracle.event_probability(env, cfg.horizon, ev, p["mode"], p["limit"])
        files.append(write_csv(out / "oracle_event.csv", ["event", "x", "m_or_k", "horizon", "p_lo", "p_hi", "mode"],
                               [(ev.label, ev.x, ev.level, cfg.horizon, b.lower, b.upper, b.mode)]))
    return files


def _run_simulate(cfg, env, out):
    p = cfg.params
    dist = empirical_endpoint_distribution(env, cfg.horizon, cfg.trials, cfg.seed)
    files = [write_csv(out / "endpoint.csv", ["site", "probability_lo", "probability_hi"],
                       [(x, v, v) for x, v in dist.items()])]
    for run in range(min(p["dump_trajectories"], cfg.trials)):
        traj = kernel_trajectory(env, cfg.seed, run, cfg.horizon)
        files.append(write_csv(out / f"trajectory_r{run:04d}.csv", ["n", "position"], enumerate(traj)))
        for n in p["probes"]:
            if 0 <= n <= cfg.horizon:
                sites, counts = np.unique(traj[: n + 1], return_counts=True)
                files.append(write_csv(out / f"local_times_r{run:04d}_n{n}.csv", ["site", "count"],
                                       zip(sites, counts)))
    return files


def _run_localization(cfg, env, out):
    prof = mc.localization_profile(env, cfg.horizon, float(cfg.params["window_fraction"]), cfg.trials, cfg.seed)
    rows = [(r, prof.window_start, s, a, b)
            for r, (s, a, b) in enumerate(zip(prof.support_size, prof.support_min, prof.support_max))]
    return [write_csv(out / "localization.csv", ["run", "window_start", "support_size", "support_min", "support_max"],
                      rows)]


def _run_exponents(cfg, env, out):
    p = cfg.params
    prof = mc.exponent_profile(env, p["k_levels"], p["depth"], cfg.trials, cfg.seed, cfg.cap)
    lr = prof.log_ratios
    rows = []
    for run in range(lr.shape[0]):
        for j, k in enumerate(prof.levels):
            for i in range(prof.depth + 1):
                rows.append((run, k, i, lr[run, j, i]))
    return [write_csv(out / "exponents.csv", ["run", "k", "offset", "log_ratio"], rows)]


def _run_diagnostics(cfg, env, out):
    d = mc.recurrence_diagnostics(env, cfg.horizon, cfg.trials, cfg.seed, cfg.params.get("probes"))
    rows = [(r, n, d.returns[r, j], d.range_width[r, j])
            for r in range(d.returns.shape[0]) for j, n in enumerate(d.probes)]
    return [write_csv(out / "diagnostics.csv", ["run", "n", "returns", "range_width"], rows)]


def _run_fit(cfg, env, out, base_dir):
    p = cfg.params
    if p.get("events_csv"):
        path = Path(p["events_csv"])
        if not path.is_absolute():
            path = base_dir / path
        header, rows = read_csv(path)
        col = {h: i for i, h in enumerate(header)}
        points = []
        for row in rows:
            est = mc.Estimate(int(row[col["occurred"]]), int(row[col["refuted"]]), int(row[col["ambiguous"]]),
                              seed=0, event=row[col["event"]])
            points.append((float(row[col["m_or_k"]]), est))
    else:
        points = [(float(m), float(pr)) for m, pr in p["points"]]
    fit = mc.decay_fit(points, float(p["r"]), float(p["alpha"]))
    return [write_csv(out / "fit.csv", ["kappa", "intercept", "r_squared", "n_points", "mode", "kappa_lower"],
                      [(fit.kappa, fit.intercept, fit.r_squared, fit.n_points, fit.mode, fit.kappa_lower)])]


# --- compare ----------------------------------------------------------------


@dataclass
class CompareReport:
    columns: dict
    max_discrepancy: float
    tolerance: float
    passed: bool
    tv: float | None = None


def _num(s):
    try:
        return float(s)
    except ValueError:
        return None


def compare_outputs(path_a, path_b, tolerance=0.0, mode="columns"):
    """Per-column max |a - b| for schema-identical CSVs, or total variation for endpoint tables."""
    ha, ra = read_csv(path_a)
    hb, rb = read_csv(path_b)
    if ha != hb:
        raise SchemaError(f"header mismatch: {ha} vs {hb}")
    if mode == "tv":
        if len(ha) < 2:
            raise SchemaError("tv mode needs a key column and at least one probability column")
        pa = {r[0]: _mid(r) for r in ra}
        pb = {r[0]: _mid(r) for r in rb}
        tv = 0.5 * sum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in set(pa) | set(pb))
        return CompareReport({"tv": tv}, tv, tolerance, tv <= tolerance, tv)
    if len(ra) != len(rb):
        raise SchemaError(f"row count mismatch: {len(ra)} vs {len(rb)}")
    cols = {}
    for j, h in enumerate(ha):
        worst = 0.0
        for x, y in zip(ra, rb):
            a, b = _num(x[j]), _num(y[j])
            if a is None or b is None:
                d = 0.0 if x[j] == y[j] else math.inf
            elif math.isnan(a) or math.isnan(b):
                d = 0.0 if (math.isnan(a) and math.isnan(b)) else math.inf
            else:
                d = abs(a - b)
            worst = max(worst, d)
        cols[h] = worst
    m = max(cols.values()) if cols else 0.0
    return CompareReport(cols, m, tolerance, m <= tolerance)


def _mid(row):
    vals = [float(v) for v in row[1:]]
    return sum(vals) / len(vals)


def _run_compare(cfg, env, out, base_dir):
    p = cfg.params
    a, b = Path(p["a"]), Path(p["b"])
    a = a if a.is_absolute() else base_dir / a
    b = b if b.is_absolute() else base_dir / b
    rep = compare_outputs(a, b, float(p["tolerance"]), p["mode"])
    rows = [(c, d, d <= rep.tolerance) for c, d in rep.columns.items()]
    return [write_csv(out / "compare.csv", ["column", "max_discrepancy", "ok"], rows)]


RUNNERS = {
    "gamma": _run_gamma, "ledger": _run_ledger, "oracle": _run_oracle, "simulate": _run_simulate,
    "event": _run_event, "localization": _run_localization, "exponents": _run_exponents,
    "diagnostics": _run_diagnostics,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads=None, base_dir="."):
    """Run one experiment, write its CSVs and then ``manifest.json``; return the manifest."""
    out = Path(out_dir or cfg.out or "vrrw_out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PreconditionError(f"output directory {out} is not writable: {exc}") from None
    if threads is None:
        threads = cfg.threads
    set_threads(threads)
    env = cfg.env()
    t0 = time.perf_counter()
    try:
        if cfg.kind in RUNNERS:
            files = RUNNERS[cfg.kind](cfg, env, out)
        elif cfg.kind == "decay-fit":
            files = _run_fit(cfg, env, out, Path(base_dir))
        else:
            files = _run_compare(cfg, env, out, Path(base_dir))
    except (PreconditionError, WeightError) as exc:
        raise PreconditionError(f"{cfg.kind} experiment failed: {exc}") from exc
    wall = time.perf_counter() - t0
    manifest = RunManifest(
        config=cfg.to_dict(),
        toolkit_version=__version__,
        rng=RNG_ALGORITHM,
        wall_time_s=round(wall, 6),
        threads=thread_count(),
        files={Path(f).name: sha256(f) for f in files},
    )
    (out / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    log.info("%s: wrote %d file(s) to %s in %.2fs", cfg.kind, len(files), out, wall)
    return manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="vrrw", description="Vertex-reinforced random walk toolkit")
    ap.add_argument("command", choices=sorted(CLI_KINDS))
    ap.add_argument("files", nargs="*", help="for compare: the two CSV files")
    ap.add_argument("--config", help="experiment config (.toml) or a manifest.json to re-run")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="override the master seed")
    ap.add_argument("--threads", type=int, help="worker threads")
    ap.add_argument("--tolerance", type=float, default=0.0, help="compare: pass threshold")
    ap.add_argument("--mode", default="columns", choices=["columns", "tv"], help="compare: discrepancy measure")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "compare" and args.files:
            if len(args.files) != 2:
                print("compare needs exactly two files", file=sys.stderr)
                return 2
            rep = compare_outputs(args.files[0], args.files[1], args.tolerance, args.mode)
            for col, d in rep.columns.items():
                print(f"{col}\t{d!r}")
            print("PASS" if rep.passed else "FAIL", f"max={rep.max_discrepancy!r}", f"tol={rep.tolerance!r}")
            return 0 if rep.passed else 1
        if not args.config:
            print("--config is required", file=sys.stderr)
            return 2
        cfg = load_config(args.config)
        want = CLI_KINDS[args.command]
        if cfg.kind != want:
            print(f"config kind {cfg.kind!r} does not match command {args.command!r}", file=sys.stderr)
            return 2
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out = args.out or os.environ.get("VRRW_OUT")
        threads = args.threads or (int(os.environ["VRRW_THREADS"]) if os.environ.get("VRRW_THREADS") else None)
        manifest = run_experiment(cfg, out, threads, base_dir=Path(args.config).parent)
        for name in manifest.files:
            print(name)
        return 0
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (PreconditionError, SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
