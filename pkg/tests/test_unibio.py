"""UniBiO driver: update semantics, accounting, theory schedule, tracking."""

import dataclasses

import numpy as np
import pytest

from unibio import (
    EpochConfig,
    ProblemConstants,
    StochasticBilevelProblem,
    UniBiOConfig,
    bias_constant,
    epoch_schedule,
    make_example,
    predict_oracle_counts,
    theory_schedule,
    unibio_run,
)

SEED = 20260815

_SMALL_EPOCH = EpochConfig(gamma1=0.5, t1=4, d1=1.0, t_total=12, p=2.0)


def _cfg(**over):
    base = dict(
        eta=0.05, beta=0.9, interval=2, q=5,
        warm=_SMALL_EPOCH, refresh=_SMALL_EPOCH,
    )
    base.update(over)
    return UniBiOConfig(**base)


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "bad",
    [
        {"eta": 0.0},
        {"eta": -0.1},
        {"beta": 1.0},
        {"beta": -0.01},
        {"interval": 0},
        {"q": 0},
    ],
)
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        _cfg(**bad)


def test_run_rejects_bad_t_outer():
    problem = make_example("ex3", p=2)
    with pytest.raises(ValueError):
        unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=0)


# ---------------------------------------------------------------------------
# update semantics read off the recorded trace
# ---------------------------------------------------------------------------


def test_momentum_recursion_from_samples():
    problem = make_example("ex3", p=4, sigma_f=0.3, sigma_g1=0.3, sigma_g2=0.3)
    cfg = _cfg(beta=0.9, interval=100)  # no refresh inside 6 steps
    trace = unibio_run(problem, cfg, x0=[1.0], y0=[1.0], t_outer=6, seed=3)
    s = trace.samples
    beta = 0.9
    # m_t = (1-beta) sum_{j<=t} beta^{t-j} s_j  (m_0 = 0)
    m = np.zeros_like(s[0])
    for t in range(6):
        m = beta * m + (1.0 - beta) * s[t]
        assert trace.m_norm[t] == pytest.approx(
            float(np.linalg.norm(m)), abs=1e-14
        )


def test_step_lengths_are_eta_or_zero():
    problem = make_example("ex3", p=4, sigma_g1=0.2)
    cfg = _cfg(eta=0.03)
    trace = unibio_run(problem, cfg, x0=[1.0], y0=[1.0], t_outer=20, seed=1)
    xs = np.array(trace.xs)
    steps = np.linalg.norm(np.diff(xs, axis=0), axis=1)
    assert np.all(np.isclose(steps, 0.03, atol=1e-12) | (steps == 0.0))


def test_zero_momentum_guard_freezes_x():
    # upper oracles identically zero -> every sample is 0 -> m stays 0 and
    # the normalized step is skipped, not NaN
    constants = ProblemConstants(
        mu=1.0, p=2.0, l0=1.0, l1=1.0, l_g1=1.0, l_g2=0.0,
        l_f0=1.0, l_f1=0.0, cap_c=1.0,
        sigma_f=0.0, sigma_g1=0.0, sigma_g2=0.0, delta_phi=1.0,
    )
    problem = StochasticBilevelProblem(
        name="flat", dx=1, dy=1, constants=constants,
        f_value=lambda x, y: 0.0,
        g_value=lambda x, y: 0.5 * float(y @ y),
        grad_x_f=lambda x, y: np.zeros(1),
        gen_grad_f=lambda x, y: np.zeros(1),
        grad_y_g=lambda x, y: y,
        cross_grad_g=lambda x, y: np.zeros((1, 1)),
        gen_jacobian_g=lambda x, y: np.eye(1),
        meta={},
    )
    trace = unibio_run(problem, _cfg(), x0=[0.7], y0=[0.4], t_outer=8)
    assert np.all(np.array(trace.m_norm) == 0.0)
    assert all(x[0] == 0.7 for x in trace.xs)
    assert np.all(np.isfinite(trace.grad_est))


def test_trace_rows_use_pre_update_iterate():
    # row t must be evaluated at x_t (before the step): grad_true of row 1
    # equals ||grad Phi(x0)||
    problem = make_example("ex3", p=2)
    trace = unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=3)
    expected = float(np.linalg.norm(problem.grad_phi(np.array([1.0]))))
    assert trace.grad_true[0] == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(trace.xs[0], [1.0])


def test_grad_avg_is_prefix_mean_of_grad_true():
    problem = make_example("ex3", p=4, sigma_g1=0.2)
    trace = unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=15, seed=2)
    prefix = np.cumsum(trace.grad_true) / np.arange(1, 16)
    np.testing.assert_allclose(trace.grad_avg, prefix, rtol=1e-13)


# ---------------------------------------------------------------------------
# refresh cadence and oracle accounting
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("t_outer,interval", [(20, 3), (20, 7), (5, 100), (12, 1)])
def test_refresh_cadence_and_counts(t_outer, interval):
    problem = make_example("ex3", p=2, sigma_g1=0.1)
    cfg = _cfg(interval=interval, q=4)
    trace = unibio_run(problem, cfg, x0=[1.0], y0=[1.0], t_outer=t_outer, seed=5)
    predicted = predict_oracle_counts(cfg, t_outer, problem.constants.p)
    assert trace.meta["refreshes"] == t_outer // interval == predicted["refreshes"]
    assert trace.oracle_ul[-1] == predicted["ul"] == 2 * t_outer
    assert trace.oracle_cross[-1] == predicted["cross"] == t_outer
    assert trace.oracle_gen[-1] == predicted["gen"] == 6 * t_outer
    assert trace.oracle_ll[-1] == predicted["ll"]
    # counters are cumulative and non-decreasing
    for col in (trace.oracle_ul, trace.oracle_ll, trace.oracle_cross):
        assert np.all(np.diff(col) >= 0)


def test_warm_start_steps_recorded():
    problem = make_example("ex3", p=2)
    trace = unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=2)
    # schedule(4, 2, 12) = [4, 8]
    assert trace.meta["warm_steps"] == 12
    assert not trace.meta["warm_budget_too_small"]


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------


def test_sigma_zero_runs_identical_across_seeds():
    problem = make_example("ex3", p=4)
    traces = [
        unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=10, seed=s)
        for s in (0, 1, 2, 3, 4)
    ]
    ref = traces[0]
    for other in traces[1:]:
        np.testing.assert_array_equal(ref.grad_true, other.grad_true)
        np.testing.assert_array_equal(ref.grad_est, other.grad_est)
        np.testing.assert_array_equal(ref.m_norm, other.m_norm)
        np.testing.assert_array_equal(np.array(ref.xs), np.array(other.xs))
        np.testing.assert_array_equal(ref.oracle_ll, other.oracle_ll)


def test_noisy_run_replays_bit_for_bit_with_same_seed():
    problem = make_example("ex3", p=4, sigma_f=0.5, sigma_g1=0.5, sigma_g2=0.5)
    a = unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=10, seed=7)
    b = unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=10, seed=7)
    np.testing.assert_array_equal(a.grad_est, b.grad_est)
    np.testing.assert_array_equal(np.array(a.xs), np.array(b.xs))
    np.testing.assert_array_equal(np.array(a.ys), np.array(b.ys))
    c = unibio_run(problem, _cfg(), x0=[1.0], y0=[1.0], t_outer=10, seed=8)
    assert not np.array_equal(a.grad_est, c.grad_est)


# ---------------------------------------------------------------------------
# theory schedule: arithmetic pinned on the catalogued p=2 instance
# ---------------------------------------------------------------------------


def test_theory_schedule_ex3_p2_arithmetic():
    c = make_example("ex3", p=2).constants
    r0 = abs(1.0 - np.sin(1.0))
    sch = theory_schedule(c, 0.3, 0.1, t_cap=70, k_cap=20_000, r0=r0)

    # sigma1^2 = 0 + (3/1)[(0 + 1)(0 + 2*1) + 0] = 6
    assert sch.sigma1_sq == pytest.approx(6.0, abs=1e-15)
    # 1 - beta = min{1, 0.09/6} = 0.015
    assert sch.beta == pytest.approx(0.985, abs=1e-15)
    # interval = ceil(1/0.015) = 67
    assert sch.interval == 67
    # bias constants (L_phi1, L_phi2, l_p) = (8, 4, 2)
    assert (sch.l_phi1, sch.l_phi2, sch.l_p) == (8.0, 4.0, 2.0)
    # eta = min{0.015*0.3/4, 0.3/4, 0.3*min{0.015/8, 2/8, 0.015/8}}
    #     = 0.3 * 0.015/8 = 0.0005625
    assert sch.eta == pytest.approx(0.0005625, abs=1e-18)
    # mu = cap_c = 1: a single Neumann factor inverts exactly
    assert sch.q == 1 and sch.q_degenerate
    # raw T = ceil(8*2/(eta*0.3)) = 94815, capped
    assert sch.t_outer == 70 and sch.t_capped
    # warm start: G0 = (2^(2*2*r0+1) - 1) * 2/4, sigma_g1 = 0 so t1 = 3600
    # and gamma1 = G0*(2 G0)/(24 G0^2) = 1/12
    assert sch.warm.t1 == 3600
    assert sch.warm.gamma1 == pytest.approx(1.0 / 12.0, rel=1e-15)
    assert sch.warm.d1 == pytest.approx(r0, rel=1e-15)  # r0 cap binds
    # refresh: radius min{eps/L_phi2, 1/l1} = min{0.075, 0.5}
    assert sch.refresh.t1 == 3600
    assert sch.refresh.d1 == pytest.approx(0.075, rel=1e-15)
    assert sch.warm.t_total == 20_000 and sch.warm_capped
    assert sch.refresh.t_total == 20_000 and sch.refresh_capped
    # confidence split delta/(T * k_dagger) with the pass-1 k_dagger = 15
    # (the exposed k_dagger is recomputed after the split tightens to 16)
    assert sch.delta_tilde == pytest.approx(0.1 / (70 * 15), rel=1e-15)
    assert sch.k_dagger == 16
    assert sch.delta_tilde < 0.1 / 70


def test_theory_schedule_nondegenerate_q():
    # enlarging the Jacobian bound to C = 2 makes the series genuinely
    # truncated: Q = ceil(ln(mu eps/(4 l_g1 l_f0)) / ln(1 - mu/C))
    #            = ceil(ln 0.05 / ln 0.5) = ceil(4.3219) = 5
    c = dataclasses.replace(make_example("ex3", p=2).constants, cap_c=2.0)
    sch = theory_schedule(c, 0.2, 0.1, t_cap=50, k_cap=1000, r0=0.2)
    assert sch.q == 5
    assert not sch.q_degenerate


def test_theory_schedule_validation():
    c = make_example("ex3", p=2).constants
    with pytest.raises(ValueError):
        theory_schedule(c, 0.0, 0.1)
    with pytest.raises(ValueError):
        theory_schedule(c, 0.1, 1.0)
    with pytest.raises(ValueError):
        theory_schedule(c, 0.1, 0.1, r0=0.0)


def test_theory_schedule_to_config_round_trip():
    c = make_example("ex3", p=2).constants
    sch = theory_schedule(c, 0.3, 0.1, t_cap=70, k_cap=20_000, r0=0.2)
    cfg = sch.to_config()
    assert cfg.eta == sch.eta
    assert cfg.beta == sch.beta
    assert cfg.interval == sch.interval
    assert cfg.q == sch.q
    assert cfg.warm == sch.warm
    assert cfg.refresh == sch.refresh
    assert cfg.cap_c is None  # estimator falls back to the catalogued bound


def test_theory_schedule_momentum_saturates_at_large_eps():
    # c1 eps^2 >= sigma1^2 -> 1 - beta clamps at 1 (no momentum), I = 1
    c = make_example("ex3", p=2).constants
    sch = theory_schedule(c, 3.0, 0.1, t_cap=50, k_cap=1000, r0=0.2)
    assert sch.beta == 0.0
    assert sch.interval == 1


# ---------------------------------------------------------------------------
# lower-level tracking invariant under the theory schedule
# ---------------------------------------------------------------------------


def test_tracking_invariant_under_theory_schedule():
    # With the theory-mode warm start and refresh cadence, the lower-level
    # error ||y_t - y*(x_t)|| must stay within eps/(4 L_phi2) for the
    # overwhelming majority of seeds (here: at least 18 of 20).
    base = make_example("ex3", p=2, sigma_g1=0.1)
    c = base.constants
    eps, delta = 0.2, 0.1
    _, l_phi2, _ = bias_constant(c)
    threshold = eps / (4.0 * l_phi2)  # 0.0125
    sch = theory_schedule(
        c, eps, delta, t_cap=110, k_cap=12_000,
        r0=abs(1.0 - np.sin(1.0)), c1=3.0, c2=0.25,
    )
    cfg = sch.to_config()
    ok = 0
    worst = 0.0
    for seed in range(20):
        trace = unibio_run(
            base, cfg, x0=[1.0], y0=[1.0], t_outer=sch.t_outer, seed=seed
        )
        errs = [
            float(np.linalg.norm(y - base.optimal_y(np.asarray(x))))
            for x, y in zip(trace.xs, trace.ys)
        ]
        m = max(errs)
        worst = max(worst, m)
        ok += m <= threshold
    assert ok >= 18, f"tracking failed: {ok}/20 within {threshold} (worst {worst})"


def test_predicted_counts_match_trace_under_theory_schedule():
    base = make_example("ex3", p=2)
    sch = theory_schedule(
        base.constants, 0.3, 0.1, t_cap=70, k_cap=20_000,
        r0=abs(1.0 - np.sin(1.0)),
    )
    cfg = sch.to_config()
    trace = unibio_run(base, cfg, x0=[1.0], y0=[1.0], t_outer=sch.t_outer)
    predicted = predict_oracle_counts(cfg, sch.t_outer, base.constants.p)
    assert trace.oracle_ul[-1] == predicted["ul"]
    assert trace.oracle_cross[-1] == predicted["cross"]
    assert trace.oracle_gen[-1] == predicted["gen"]
    assert trace.oracle_ll[-1] == predicted["ll"]
    # independent arithmetic: warm epochs are [3600, 7200] within 20000,
    # one refresh at t = 67 with the same budget
    assert epoch_schedule(3600, 2.0, 20_000) == [3600, 7200]
    assert predicted["ll"] == 10_800 + (70 // 67) * 10_800
