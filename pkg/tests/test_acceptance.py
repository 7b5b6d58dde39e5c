"""Acceptance criteria, each at its stated tolerance. One PASS/FAIL line per criterion."""

import math
import os
import random
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

from vrrw.events import EventSpec
from vrrw.experiments import decay_fit, estimate_event, localization_profile
from vrrw.gamma import (
    GammaParams,
    domino_ledger,
    gamma_sequence,
    growth_envelope,
    increment_closed_form,
    monotone_r_threshold,
    product_bound_scan,
)
from vrrw.oracle import endpoint_distribution, env_invariance_check, event_probability, total_mass
from vrrw.walk import empirical_endpoint_distribution
from vrrw.weights import homogeneous, linear_weight, make_power_weight, make_site_env, make_table_weight, shifted_weight

F = Fraction


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {name}: {detail}")
        assert ok, detail
    return emit


def test_criterion_1_oracle_engine_agreement(report):
    t0 = time.perf_counter()
    tvs = {}
    for alpha in (0, 1):
        env = homogeneous(make_power_weight(alpha))
        exact = endpoint_distribution(env, 12)
        emp = empirical_endpoint_distribution(env, 12, 10**6, 2024 + alpha)
        sites = set(exact) | set(emp)
        tvs[alpha] = 0.5 * sum(abs(float(exact.get(x, 0)) - emp.get(x, 0.0)) for x in sites)
    wall = time.perf_counter() - t0
    ok = max(tvs.values()) <= 0.005 and wall <= 60
    report(1, ok, f"TV(alpha=0)={tvs[0]:.5f} TV(alpha=1)={tvs[1]:.5f} (<= 0.005), wall={wall:.1f}s (<= 60s)")


def test_criterion_2_exact_mass(report):
    envs = {
        "alpha=0": homogeneous(make_power_weight(0)),
        "alpha=1": homogeneous(make_power_weight(1)),
        "table[2,5,5,9]+const": homogeneous(make_table_weight([2, 5, 5, 9], "constant")),
        "table[1]+(k+1)^2": homogeneous(make_table_weight([1], "power", 2)),
    }
    bad = []
    for name, env in envs.items():
        for h in range(17):
            m = total_mass(env, h, mode="rational")
            if not (isinstance(m, Fraction) and m == 1):
                bad.append((name, h, m))
    report(2, not bad, f"total path mass == 1 exactly for h in 0..16 over {len(envs)} environments; failures={bad}")


def test_criterion_3_E_calibration(report):
    env = homogeneous(make_power_weight(0))
    lines, ok = [], True
    for m in (2, 3, 4, 5):
        truth = F(1, 2 ** (m - 1))
        est = estimate_event(env, EventSpec.E(0, m), 10**5, 31, cap=10**6, stream0=m * 10**5)
        br = event_probability(env, 20, EventSpec.E(0, m), mode="rational")
        lo, hi = est.ci()
        good = est.ci_contains(float(truth)) and br.contains(truth)
        ok &= good
        lines.append(f"m={m}: CI=[{lo:.4f},{hi:.4f}] oracle=[{float(br.lower):.4f},{float(br.upper):.4f}] "
                     f"truth={float(truth):.4f} amb={est.ambiguous}")
    report(3, ok, "; ".join(lines))


def test_criterion_4_gamma(report):
    a = gamma_sequence(GammaParams(F(1, 3), depth=5)).values
    ok_a = a == (1, 3, 7, 15, 31) and all(isinstance(v, Fraction) for v in a)

    worst = 0.0
    for alpha in (0.25, 0.4, 0.49):
        for p in (GammaParams(alpha, "fixed", epsilon=0.05, depth=32), GammaParams(alpha, "theorem", r=0.1, depth=32)):
            seq = gamma_sequence(p)
            for i in range(0, 31):
                rec = seq[i + 2] - seq[i + 1]
                cf = increment_closed_form(p, i, seq)
                worst = max(worst, abs(cf - rec) / max(abs(rec), 1e-300))
    ok_b = worst <= 1e-12

    env = growth_envelope(GammaParams(0.5, "theorem", r=0.01, depth=200))
    ok_c = env.first_nonincreasing_increment is not None and not env.passed

    r_star = monotone_r_threshold(0.4, depth=50)
    ok_d = r_star > 0 and gamma_sequence(GammaParams(0.4, "theorem", r=r_star, depth=50)).strictly_increasing

    report("4", ok_a and ok_b and ok_c and ok_d,
           f"(a) {tuple(int(v) for v in a)} exact={ok_a}; (b) max rel err={worst:.2e} (<= 1e-12); "
           f"(c) alpha=0.5 r=0.01 first non-increasing increment at i={env.first_nonincreasing_increment}, "
           f"first non-positive={env.first_nonpositive_increment}; (d) r*={r_star:.6f} > 0")


def test_criterion_5_domino_ledger(report):
    parts, ok = [], True
    for k in (100, 1000):
        led = domino_ledger(k, 2, 0.4, 0.1, c0=0.5)
        good = led.all_N_positive and led.levels_increasing and led.bounds_hold
        ok &= good
        parts.append(f"k={k}: K={led.K} N>0={led.all_N_positive} levels^={led.levels_increasing} "
                     f"NiPi>=bound={led.bounds_hold} (largeness k>=e^(C/eps): {led.largeness_ok})")
    checked = 0
    for alpha in (0.3, 0.4):
        rows = product_bound_scan(alpha, 50)
        checked += sum(r.K for r in rows)
        ok &= all(r.ok for r in rows)
    parts.append(f"partial products <= (K+1)^(1/(1-alpha)) on all {checked} (alpha,K,i) triples")
    report(5, ok, "; ".join(parts))


def _random_table(rng):
    return make_table_weight([F(rng.randint(1, 9), rng.randint(1, 4)) for _ in range(rng.randint(1, 4))],
                             "constant")


def _random_pair(rng):
    base = rng.choice([make_power_weight(0), make_power_weight(1), make_power_weight(2), _random_table(rng)])
    shared = {x: _random_table(rng) for x in range(0, 4) if rng.random() < 0.3}
    neg_a = {x: _random_table(rng) for x in range(-6, 0) if rng.random() < 0.5}
    neg_b = {x: _random_table(rng) for x in range(-6, 0) if rng.random() < 0.5}
    left_b = shifted_weight(base, rng.randint(1, 3)) if rng.random() < 0.5 else None
    return make_site_env(base, {**shared, **neg_a}), make_site_env(base, {**shared, **neg_b}, left_b)


def _random_prefix(rng, max_len):
    while True:
        p = [0]
        for _ in range(rng.randint(1, max_len)):
            p.append(p[-1] + rng.choice((-1, 1)))
        if p[-1] > 0:
            return p


def test_criterion_6_invariance(report):
    rng = random.Random(6)
    n_pairs, total, fails, differing_prefix = 25, 0, 0, 0
    for _ in range(n_pairs):
        a, b = _random_pair(rng)
        res = env_invariance_check(a, b, 8, _random_prefix(rng, 5), mode="rational")
        total += res.continuations
        fails += not (res.equal and res.max_discrepancy == 0)
        differing_prefix += res.prefix_probability_a != res.prefix_probability_b
    report(6, fails == 0 and n_pairs >= 20,
           f"{n_pairs} random pairs, {total} positive continuations, exact equality failures={fails} "
           f"(pairs whose prefix law differs: {differing_prefix})")


def test_criterion_7_localization(report):
    sq = localization_profile(homogeneous(make_table_weight([1], "power", 2)), 10**5, 0.5, 200, 70)
    f2 = sq.fraction_with_size(2)
    lin = localization_profile(homogeneous(linear_weight()), 10**6, 0.1, 100, 71)
    f5 = lin.fraction_within(5)
    report(7, f2 >= 0.9 and f5 >= 0.6,
           f"(k+1)^2: {f2:.1%} of 200 runs with trailing-half support of size 2 (>= 90%); "
           f"linear: {f5:.1%} of 100 runs with trailing-10% support within 5 sites (>= 60%); "
           f"linear sizes {dict(sorted(lin.histogram.items()))}")


def test_criterion_8_decay(report):
    env = homogeneous(make_power_weight(0.3))
    ests = [estimate_event(env, EventSpec.E(0, m), 10**5, 8, cap=10**6, stream0=m * 10**5) for m in (2, 4, 8, 16)]
    trend = True
    for a, b in zip(ests, ests[1:]):
        lo_a, hi_a = a.ci()
        lo_b, hi_b = b.ci()
        trend &= b.point <= a.point or (lo_b <= hi_a and lo_a <= hi_b)
    pts = [(m, math.exp(-2 * m**0.3)) for m in (2, 4, 8, 16)]
    fit = decay_fit(pts, 1, 0.3)
    ok = trend and abs(fit.kappa - 2) <= 1e-6
    report(8, ok, f"P(E_0(m)) m=2,4,8,16: {[round(e.point, 5) for e in ests]} nonincreasing={trend}; "
                  f"synthetic kappa={fit.kappa:.9f}")


CONFIGS = {
    "event": 'kind = "event"\nseed = 9\ntrials = 4000\ncap = 20000\nweight = { kind = "power", alpha = 0.3 }\n'
             '[params]\nevent = "E"\nx = 0\nm = [2, 3, 5]\n',
    "simulate": 'kind = "simulate"\nseed = 9\ntrials = 20000\nhorizon = 40\nweight = { kind = "linear" }\n'
                '[params]\ndump_trajectories = 2\nprobes = [10, 40]\n',
    "localization": 'kind = "localization"\nseed = 9\ntrials = 64\nhorizon = 5000\n'
                    'weight = { kind = "power", alpha = 0.6 }\n[params]\nwindow_fraction = 0.5\n',
    "exponents": 'kind = "exponents"\nseed = 9\ntrials = 64\ncap = 50000\nweight = { kind = "power", alpha = 0.3 }\n'
                 '[params]\nk_levels = [4, 16]\ndepth = 3\n',
    "diagnostics": 'kind = "diagnostics"\nseed = 9\ntrials = 64\nhorizon = 3000\n',
}


def _cli(cmd, cfg, out, threads):
    env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "vrrw.cli", cmd, "--config", str(cfg), "--out", str(out),
                    "--threads", str(threads)], check=True, env=env, capture_output=True)


def _csvs(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).glob("*.csv"))}


def test_criterion_9_determinism(report, tmp_path):
    mismatches, files = [], 0
    for kind, text in CONFIGS.items():
        cfg = tmp_path / f"{kind}.toml"
        cfg.write_text(text)
        _cli(kind, cfg, tmp_path / kind / "t1", 1)
        _cli(kind, cfg, tmp_path / kind / "t4", 4)
        _cli(kind, tmp_path / kind / "t1" / "manifest.json", tmp_path / kind / "rerun", 3)
        ref = _csvs(tmp_path / kind / "t1")
        files += len(ref)
        for other in ("t4", "rerun"):
            if _csvs(tmp_path / kind / other) != ref:
                mismatches.append(f"{kind}/{other}")
    report(9, not mismatches and files > 0,
           f"{files} CSVs over {len(CONFIGS)} stochastic kinds byte-identical across 1/4 threads and "
           f"manifest re-run at 3 threads; mismatches={mismatches}")
