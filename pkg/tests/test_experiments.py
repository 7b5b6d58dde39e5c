import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrrw.events import EventSpec
from vrrw.experiments import (
    Estimate,
    clopper_pearson,
    decay_fit,
    estimate_A0,
    estimate_event,
    exponent_profile,
    lemma_bound,
    localization_profile,
    log_probes,
    race_outcomes,
    recurrence_diagnostics,
)
from vrrw.oracle import event_probability
from vrrw.walk import PreconditionError, simulate_trajectory
from vrrw.weights import homogeneous, linear_weight, make_power_weight, make_table_weight

square = homogeneous(make_table_weight([1], "power", 2))


def test_clopper_pearson_edges():
    lo, hi = clopper_pearson(0, 100)
    assert lo == 0 and 0 < hi < 0.06
    lo, hi = clopper_pearson(100, 100)
    assert hi == 1 and lo > 0.94
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi


def test_estimate_accounting(env03):
    est = estimate_event(env03, EventSpec.E(0, 4), 5000, 12, cap=50)
    assert est.occurred + est.refuted + est.ambiguous == 5000
    assert est.ambiguous > 0
    assert est.p_lo == est.occurred / 5000
    assert est.p_hi == (est.occurred + est.ambiguous) / 5000
    lo, hi = est.ci()
    assert lo <= est.p_lo <= est.p_hi <= hi
    assert est.meta["thresholds"] == {"T_0": 4, "T_-1": 1}


def test_estimate_seed_determinism(env03):
    a = estimate_event(env03, EventSpec.E(0, 3), 3000, 5)
    b = estimate_event(env03, EventSpec.E(0, 3), 3000, 5, chunks=7)
    c = estimate_event(env03, EventSpec.E(0, 3), 3000, 6)
    assert (a.occurred, a.refuted, a.ambiguous) == (b.occurred, b.refuted, b.ambiguous)
    assert (a.occurred, a.refuted) != (c.occurred, c.refuted)


@settings(max_examples=15, deadline=None)
@given(chunks=st.integers(1, 64), seed=st.integers(0, 2**63))
def test_outcomes_independent_of_chunking(chunks, seed):
    env = homogeneous(make_power_weight(0.5))
    ev = EventSpec.Eprime(1, 3)
    a = race_outcomes(env, ev, 300, seed, 2000, chunks=1)
    b = race_outcomes(env, ev, 300, seed, 2000, chunks=chunks)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_replica_offset_is_a_window(env03):
    out, _ = race_outcomes(env03, EventSpec.E(0, 3), 100, 9, 1000, stream0=0)
    tail, _ = race_outcomes(env03, EventSpec.E(0, 3), 60, 9, 1000, stream0=40)
    assert np.array_equal(out[40:], tail)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_constant_weights_E0(const_env, m):
    est = estimate_event(const_env, EventSpec.E(0, m), 20_000, 100 + m, cap=100_000)
    assert est.ci_contains(2.0 ** -(m - 1))


def test_mc_consistent_with_oracle_linear(linear_env):
    ev = EventSpec.A0(-1, 2, 1.5, 1.0)
    b = event_probability(linear_env, 20, ev)
    est = estimate_event(linear_env, ev, 50_000, 1)
    assert est.ci_overlaps(float(b.lower), float(b.upper))


def test_mc_consistent_with_interval_oracle(env03):
    ev = EventSpec.E(1, 3)
    b = event_probability(env03, 18, ev)
    assert b.mode == "interval"
    est = estimate_event(env03, ev, 50_000, 2)
    assert est.ci_overlaps(b.lower, b.upper)


def test_F_event_monotone_in_depth():
    env = homogeneous(make_power_weight(0.3))
    g = [1.0, 1.8, 2.5, 3.1, 3.6, 4.0, 4.3]
    counts = []
    for d in range(1, 6):
        est = estimate_event(env, EventSpec.F(0, 3, g, depth=d), 3000, 44, cap=20_000)
        counts.append(est.occurred)
    assert counts == sorted(counts, reverse=True)


def test_A0_guards(env03, const_env):
    with pytest.raises(PreconditionError):
        estimate_A0(env03, 0, 4, 2.0, 0.5, 100, 1)
    with pytest.raises(PreconditionError):
        estimate_A0(env03, 0, 4, 1.0, 0.1, 100, 1)
    with pytest.raises(PreconditionError):
        estimate_A0(const_env, 0, 4, 2.0, 0.1, 100, 1)
    with pytest.raises(PreconditionError):
        estimate_event(env03, EventSpec.E(0, 2), 0, 1)


def test_A0_records_dual_exponent_and_bound(env03):
    est = estimate_A0(env03, 0, 4, 1.5, 0.1, 500, 3, cap=10_000)
    gp = 0.5 / 0.3 + 0.9
    assert est.meta["gamma_prime"] == pytest.approx(gp)
    assert est.meta["bound"] == pytest.approx(lemma_bound(4, 0.3, 0.1))
    assert est.meta["thresholds"]["T_2"] == math.ceil(4**gp)


def test_A0_probability_decreases_with_k(env03):
    ests = [estimate_A0(env03, 0, k, 1.5, 0.1, 4000, 10 + k, cap=400_000) for k in (2, 8, 32)]
    assert all(e.ambiguous == 0 for e in ests)
    assert ests[0].point > ests[1].point > ests[2].point
    assert ests[2].ci()[1] < ests[0].ci()[0]


def test_lemma_bound_monotone():
    vals = [lemma_bound(k, 0.3, 0.1) for k in (1, 10, 100)]
    assert vals == sorted(vals, reverse=True) and 0 < vals[-1] < 1


def test_localization_window_matches_trajectories(env03):
    prof = localization_profile(env03, 400, 0.25, 8, 17)
    assert prof.window_start == 300
    for r in range(8):
        traj, _ = simulate_trajectory(env03, 17, r, 400)
        w = traj[300:]
        assert (prof.support_min[r], prof.support_max[r]) == (w.min(), w.max())


def test_localization_square_weights_small():
    prof = localization_profile(square, 20_000, 0.5, 40, 3)
    assert prof.fraction_with_size(2) >= 0.8
    assert prof.modal_size == 2
    assert sum(prof.histogram.values()) == 40
    with pytest.raises(PreconditionError):
        localization_profile(square, 100, 1.0, 4, 1)


def test_exponent_profile_rules(env03):
    prof = exponent_profile(env03, [2, 4, 8], 3, 50, 1, cap=50_000)
    lt = prof.local_times
    assert lt.shape == (50, 3, 4)
    reached = ~prof.missing
    assert np.all(lt[:, :, 0][reached] == np.array([2, 4, 8])[None, :].repeat(50, 0)[reached])
    lr = prof.log_ratios
    assert np.all(np.isnan(lr[prof.unvisited]))
    assert np.allclose(lr[:, :, 0][reached], 1.0)
    assert prof.median_profile(0).shape == (4,)
    with pytest.raises(PreconditionError):
        exponent_profile(env03, [1, 4], 3, 5, 1)
    with pytest.raises(PreconditionError):
        exponent_profile(env03, [4, 2], 3, 5, 1)


def test_diagnostics_constant_weights_sqrt_returns(const_env):
    d = recurrence_diagnostics(const_env, 20_000, 2000, 5)
    assert 0.4 <= d.loglog_slope() <= 0.6
    assert np.all(np.diff(d.range_width, axis=1) >= 0)
    empty = recurrence_diagnostics(const_env, 0, 3, 5)
    assert empty.probes.size == 0


def test_log_probes():
    p = log_probes(1000)
    assert p[0] == 1 and p[-1] == 1000 and np.all(np.diff(p) > 0)


def test_decay_fit_synthetic():
    pts = [(m, math.exp(-2 * m**0.3)) for m in (2, 4, 8, 16, 32)]
    fit = decay_fit(pts, 1, 0.3)
    assert abs(fit.kappa - 2) < 1e-9 and fit.mode == "fit"
    assert abs(fit.intercept) < 1e-9


def test_decay_fit_guards_and_zero_estimates():
    with pytest.raises(PreconditionError):
        decay_fit([(2, 0.5), (4, 0.2)], 1, 0.3)
    zeros = [(m, Estimate(0, 1000, 0, 1, "E", 0, m, 100)) for m in (2, 4, 8)]
    fit = decay_fit(zeros, 1, 0.3)
    assert fit.mode == "lower-bound-only" and fit.kappa is None and fit.kappa_lower > 0
