import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracle
from seqsgpv.designs import Alert, NullBoundROE, Prism
from seqsgpv.engine import (
    FixedStream,
    GeneratedStream,
    MonitoringPlan,
    NotEstimable,
    OutcomeModel,
    StopReason,
    estimate_interval,
    prefix_intervals,
    randomize,
    run_on_stream,
    run_trial,
)

ONE = Prism("one-sided", delta_G1=0.15, delta_G2=0.5)
TWO = Prism("two-sided", -0.5, -0.15, 0.15, 0.5)
ROE = NullBoundROE(0.5)
ORACLE_REGIONS = {
    ONE: oracle.prism_one_sided(0.15, 0.5),
    TWO: oracle.prism_two_sided(-0.5, -0.15, 0.15, 0.5),
    ROE: oracle.prism_one_sided(0.0, 0.5),
}


def test_alternating_randomization():
    assert [randomize(i, "alternating") for i in range(1, 5)] == \
        ["control", "treatment", "control", "treatment"]


def test_block_two_randomization_balanced_and_reproducible():
    arms = [randomize(i, "block-two", seed=7) for i in range(1, 41)]
    assert arms == [randomize(i, "block-two", seed=7) for i in range(1, 41)]
    for k in range(0, 40, 2):
        assert sorted(arms[k:k + 2]) == ["control", "treatment"]


def test_estimate_interval_example():
    i = estimate_interval([0, 2], [1, 3])
    half = 1.959963984540054 * math.sqrt(2)
    assert i.lo == pytest.approx(1 - half, rel=1e-12)
    assert i.hi == pytest.approx(1 + half, rel=1e-12)


def test_estimate_interval_swapped_arms_negate():
    a, b = [0.3, 1.1, -0.2], [1.5, 0.7, 2.2, 0.9]
    i, j = estimate_interval(a, b), estimate_interval(b, a)
    assert i.lo == pytest.approx(-j.hi) and i.hi == pytest.approx(-j.lo)


def test_estimate_interval_not_estimable():
    with pytest.raises(NotEstimable):
        estimate_interval([1.0, 1.0], [2.0, 2.0])
    with pytest.raises(NotEstimable):
        estimate_interval([1.0], [2.0, 3.0])


def test_t_interval_wider_than_z():
    c, t = [0.1, 0.5, -0.3], [1.2, 0.4, 0.9]
    z = estimate_interval(c, t)
    tt = estimate_interval(c, t, family="t-pooled")
    assert tt.lo < z.lo and tt.hi > z.hi


def test_prefix_intervals_match_direct_computation():
    rng = np.random.default_rng(11)
    y = rng.normal(3.0, 2.0, 60)
    treat = (np.arange(60) % 2).astype(bool)
    est, lo, hi, ok = prefix_intervals(y, treat)
    assert not ok[:3].any()
    for k in range(4, 61):
        ref = oracle.pooled_interval(y[:k].tolist(), treat[:k].tolist())
        assert lo[k - 1] == pytest.approx(ref[0], abs=1e-10)
        assert hi[k - 1] == pytest.approx(ref[1], abs=1e-10)


def test_generated_stream_prefix_stable():
    a = GeneratedStream(OutcomeModel(theta=0.3), 5)
    b = GeneratedStream(OutcomeModel(theta=0.3), 5)
    a.ensure(10)
    b.ensure(700)
    a.ensure(700)
    np.testing.assert_array_equal(a.y, b.y)


def _stream(seed, n, theta, block=False):
    rng = np.random.default_rng(seed)
    if block:
        first = rng.integers(0, 2, n // 2).astype(bool)
        treat = np.empty(n, dtype=bool)
        treat[0::2], treat[1::2] = first, ~first
    else:
        treat = (np.arange(n) % 2).astype(bool)
    y = rng.normal(0, 1, n) + theta * treat
    return y, treat


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    design=st.sampled_from([ONE, TWO, ROE]),
    W=st.integers(4, 30),
    S=st.integers(1, 7),
    A=st.integers(0, 12),
    N=st.integers(30, 90),
    theta=st.sampled_from([0.0, 0.3, 0.8]),
    mode=st.sampled_from(["forward", "backward"]),
    block=st.booleans(),
)
def test_engine_matches_brute_force_oracle(seed, design, W, S, A, N, theta, mode, block):
    N = max(N, W)
    y, treat = _stream(seed, N + (N % 2), theta, block)
    plan = MonitoringPlan(W=W, S=S, A=A, N=N, affirm_mode=mode)
    res = run_on_stream(design, plan, FixedStream(y, treat))
    n_ref, alert_ref = oracle.monitor(y.tolist(), treat.tolist(), ORACLE_REGIONS[design],
                                      W, S, A, N, mode)
    assert res.n_observed_at_stop == n_ref
    assert int(res.stop_alert) == alert_ref
    expected = StopReason.AFFIRMED_ALERT if alert_ref else StopReason.CAP_REACHED
    assert res.stop_reason is expected


def test_single_look_when_cap_equals_wait():
    plan = MonitoringPlan(W=40, S=1, A=5, N=40)
    for s in range(20):
        res = run_trial(ONE, plan, OutcomeModel(), s, record_looks=True)
        assert res.n_observed_at_stop == 40
        assert list(res.looks) == [40]


def test_forward_equals_backward_without_affirmation():
    for s in range(30):
        f = run_trial(TWO, MonitoringPlan(W=10, S=3, A=0, affirm_mode="forward"), OutcomeModel(), s)
        b = run_trial(TWO, MonitoringPlan(W=10, S=3, A=0, affirm_mode="backward"), OutcomeModel(), s)
        assert f == b


def test_zero_lag_has_no_reversal():
    for s in range(30):
        res = run_trial(ONE, MonitoringPlan(W=20), OutcomeModel(lag=0), s)
        assert not res.reversed
        assert res.n_enrolled_final == res.n_observed_at_stop


def test_lag_does_not_change_stop_and_is_capped():
    for s in range(20):
        base = run_trial(ONE, MonitoringPlan(W=20, N=200), OutcomeModel(), s)
        lagged = run_trial(ONE, MonitoringPlan(W=20, N=200), OutcomeModel(lag=50), s)
        assert lagged.n_observed_at_stop == base.n_observed_at_stop
        assert lagged.n_enrolled_final == min(base.n_observed_at_stop + 50, 200)


def test_run_trial_deterministic():
    plan = MonitoringPlan(W=12, S=2, A=4)
    model = OutcomeModel(theta=0.2, lag=30, randomization="block-two")
    assert run_trial(ONE, plan, model, 99) == run_trial(ONE, plan, model, 99)


def test_constant_pool_never_stops():
    plan = MonitoringPlan(W=10, ceiling=300)
    res = run_trial(ONE, plan, OutcomeModel(kind="bootstrap", pool=(2.5,)), 1)
    assert res.stop_reason is StopReason.NEVER_STOPPED
    assert res.n_observed_at_stop == 300
    assert res.interval_at_stop is None


def test_one_sided_non_rope_stop_rejects_null():
    for s in range(60):
        res = run_trial(ONE, MonitoringPlan(W=20), OutcomeModel(theta=0.4), s)
        if res.stop_alert & Alert.NON_ROPE:
            assert res.interval_at_stop.lo > 0
            assert res.reject_at_stop


def test_huge_effect_stops_quickly():
    for s in range(10):
        res = run_trial(ONE, MonitoringPlan(W=20, A=5), OutcomeModel(theta=10.0), s)
        assert res.stop_reason is StopReason.AFFIRMED_ALERT
        assert res.n_observed_at_stop <= 40
        assert res.reject_at_stop


def test_recorded_stream_too_short():
    # constant outcomes never give an estimable interval, so monitoring runs off the end
    treat = np.arange(10) % 2 == 1
    with pytest.raises(ValueError, match="exhausted"):
        run_on_stream(ONE, MonitoringPlan(W=4), FixedStream(np.ones(10), treat))


@pytest.mark.parametrize("kwargs", [dict(W=3), dict(W=10, S=0), dict(W=10, A=-1),
                                    dict(W=10, N=5), dict(W=10, interval_level=1.0)])
def test_plan_validation(kwargs):
    with pytest.raises(ValueError):
        MonitoringPlan(**kwargs)
