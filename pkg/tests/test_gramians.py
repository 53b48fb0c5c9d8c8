import numpy as np
import pytest
import scipy.linalg

import finitefreq as ff
from finitefreq.reference import example_band, example_schedule
from conftest import random_stable_lti

LOW1 = ff.FrequencyRange.low(1.0)


def test_scalar_band_gramian_is_arctan_integral():
    # int_{-1}^{1} dw / (1 + w^2) = pi/2
    W = ff.gramian_lti_ff([[-1.0]], [[1.0]], LOW1)
    assert W[0, 0] == pytest.approx(np.pi / 2.0, abs=1e-6)


def test_zero_input_matrix_gives_zero_gramian():
    W = ff.gramian_lti_ff([[-1.0, 0.5], [0.0, -2.0]], np.zeros((2, 1)), LOW1)
    assert np.allclose(W, 0.0)


def test_wide_band_classical_limit_matches_lyapunov():
    A = np.array([[-1.0]])
    B = np.array([[1.0]])
    W = ff.gramian_lti_ff(A, B, ff.FrequencyRange.low(100.0), quad_nodes=801,
                          classical=True)
    X = scipy.linalg.solve_lyapunov(A, -B @ B.T)
    assert W[0, 0] == pytest.approx(X[0, 0], rel=0.01)


def test_quadrature_richardson_convergence(benchmark_system):
    t1 = np.trace(ff.gramian_lpv_frozen(benchmark_system, [0.15], LOW1, quad_nodes=201))
    t2 = np.trace(ff.gramian_lpv_frozen(benchmark_system, [0.15], LOW1, quad_nodes=402))
    assert abs(t2 - t1) <= 1e-6 * abs(t1)


def test_frozen_benchmark_trace_regression(benchmark_system):
    tr = np.trace(ff.gramian_lpv_frozen(benchmark_system, [0.15], LOW1))
    assert tr == pytest.approx(29.690378, rel=1e-5)
    grid_min = min(np.trace(ff.gramian_lpv_frozen(benchmark_system, p, LOW1, 101))
                   for p in benchmark_system.box.p_grid(11))
    assert grid_min == pytest.approx(26.844868, rel=1e-4)


def test_frozen_zero_coefficients_equals_lti(benchmark_system):
    A, B, _, _ = benchmark_system.frozen([0.12])
    lti = ff.gramian_lti_ff(A, B, LOW1)
    frozen = ff.gramian_lpv_frozen(benchmark_system, [0.12], LOW1)
    assert np.allclose(lti, frozen, atol=1e-12)


def test_gramian_psd_symmetric_monotone_on_random_draws():
    rng = np.random.default_rng(17)
    inner = ff.FrequencyRange.low(0.7)
    outer = ff.FrequencyRange.low(2.0)
    for _ in range(50):
        A, B, _, _ = random_stable_lti(rng)
        Wi = ff.gramian_lti_ff(A, B, inner, quad_nodes=101)
        Wo = ff.gramian_lti_ff(A, B, outer, quad_nodes=101)
        for W in (Wi, Wo):
            assert np.allclose(W, W.T, atol=1e-10)
            assert np.linalg.eigvalsh(W).min() >= -1e-8 * np.trace(W)
        # larger band dominates in the semidefinite order
        assert np.linalg.eigvalsh(Wo - Wi).min() >= -1e-8 * np.trace(Wo)
        assert np.trace(Wo) >= np.trace(Wi)


def test_high_and_entire_band_quadrature():
    A = np.array([[-1.0]])
    B = np.array([[1.0]])
    # int_{|w|>=1} dw/(1+w^2) = pi/2;  whole axis: pi
    Wh = ff.gramian_lti_ff(A, B, ff.FrequencyRange.high(1.0), quad_nodes=401)
    assert Wh[0, 0] == pytest.approx(np.pi / 2.0, rel=1e-8)
    We = ff.gramian_lti_ff(A, B, ff.FrequencyRange.entire(), quad_nodes=401)
    assert We[0, 0] == pytest.approx(np.pi, rel=1e-8)
    Wm = ff.gramian_lti_ff(A, B, ff.FrequencyRange.middle(1.0, 3.0), quad_nodes=201)
    assert Wm[0, 0] == pytest.approx(2.0 * (np.arctan(3.0) - np.arctan(1.0)), rel=1e-10)


def test_state_transition_scalar_exponential():
    sys = ff.LpvSystem.lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    traj = ff.ScheduleTrajectory.constant(np.zeros(0))
    st = ff.state_transition(sys, traj, 0.0, 1.0, 1e-3)
    assert st.phi[-1][0, 0] == pytest.approx(np.exp(-1.0), abs=1e-6)
    st0 = ff.state_transition(sys, traj, 0.0, 0.0, 1e-3)
    assert np.allclose(st0.phi[0], np.eye(1))


def test_state_transition_frozen_matches_expm(benchmark_system):
    traj = ff.ScheduleTrajectory.constant([0.15], box=benchmark_system.box)
    st = ff.state_transition(benchmark_system, traj, 0.0, 1.0, 1e-3)
    target = scipy.linalg.expm(benchmark_system.A([0.15]))
    assert np.abs(st.phi[-1] - target).max() <= 1e-6


def test_state_transition_warns_outside_box(benchmark_system):
    traj = ff.ScheduleTrajectory.constant([0.5], box=benchmark_system.box)
    with pytest.warns(UserWarning, match="parameter box"):
        ff.state_transition(benchmark_system, traj, 0.0, 0.1, 1e-3)


def test_weighted_gramian_t0_is_inner_integral(benchmark_system):
    sched = example_schedule()
    W0 = ff.gramian_lpv_weighted(benchmark_system, sched, 0.0, LOW1)
    inner = ff.gramian_lpv_frozen(benchmark_system, sched.p(0.0), LOW1)
    assert np.allclose(W0, inner, atol=1e-9)


def test_weighted_gramian_decays_for_decaying_system(benchmark_system):
    sched = example_schedule()
    W20 = ff.gramian_lpv_weighted(benchmark_system, sched, 20.0, LOW1, quad_nodes=101)
    Wp = ff.gramian_lpv_frozen(benchmark_system, sched.p(20.0), LOW1, quad_nodes=101)
    assert np.trace(W20) <= 1e-6 * np.trace(Wp)


def test_weighted_gramian_lti_specialization():
    A = np.array([[-1.0, 0.3], [0.0, -2.0]])
    B = np.array([[1.0], [0.5]])
    sys = ff.LpvSystem.lti(A, B, np.zeros((1, 2)), np.zeros((1, 1)))
    traj = ff.ScheduleTrajectory.constant(np.zeros(0))
    t = 0.8
    W = ff.gramian_lpv_weighted(sys, traj, t, LOW1, quad_nodes=101, step=1e-4)
    E = scipy.linalg.expm(A * t)
    target = E @ ff.gramian_lti_ff(A, B, LOW1, quad_nodes=101) @ E.T
    assert np.allclose(W, target, atol=1e-6 * np.trace(target))


def test_shifted_gramian_zero_for_lti():
    A = np.array([[-1.0, 0.3], [0.0, -2.0]])
    B = np.array([[1.0], [0.5]])
    sys = ff.LpvSystem.lti(A, B, np.zeros((1, 2)), np.zeros((1, 1)))
    traj = ff.ScheduleTrajectory.constant(np.zeros(0))
    W1, W2 = ff.gramian_lpv_shifted(sys, traj, 2.0, LOW1, quad_nodes=51, step=1e-3)
    assert np.allclose(W1, 0.0, atol=1e-12) and np.allclose(W2, 0.0, atol=1e-12)


def test_shifted_gramian_zero_for_frozen_schedule(benchmark_system):
    traj = ff.ScheduleTrajectory.constant([0.15], box=benchmark_system.box)
    W1, W2 = ff.gramian_lpv_shifted(benchmark_system, traj, 2.0, LOW1,
                                    quad_nodes=51, step=1e-3)
    assert np.allclose(W1, 0.0, atol=1e-12) and np.allclose(W2, 0.0, atol=1e-12)


def test_shifted_gramian_benchmark_regression(benchmark_system):
    sched = example_schedule()
    W1, W2 = ff.gramian_lpv_shifted(benchmark_system, sched, 20.0, LOW1,
                                    quad_nodes=201, step=1e-3)
    assert np.trace(W1) == pytest.approx(0.015527, rel=1e-3)
    assert np.trace(W2) == pytest.approx(0.000870, rel=2e-3)
    for W in (W1, W2):
        assert np.allclose(W, W.T, atol=1e-10)
        assert np.linalg.eigvalsh(W).min() >= -1e-8 * np.trace(W)


def test_trace_bound_dominates_quadrature(benchmark_system, benchmark_band):
    cert = ff.uas_certificate(benchmark_system, 7.4, 0.5, 0.6)
    bound = ff.shifted_trace_bound(benchmark_system, benchmark_band, cert)
    quad = ff.quadrature_trace_bound(benchmark_system, example_schedule(), 20.0,
                                     benchmark_band, quad_nodes=101)
    assert quad.method == "quadrature"
    assert bound.method == "lyapunov_lmi"
    assert quad.bound_1 <= 1.05 * bound.bound_1
    assert quad.bound_2 <= 1.05 * bound.bound_2


def test_trace_bound_benchmark_values(benchmark_system, benchmark_band):
    cert = ff.uas_certificate(benchmark_system, 7.4, 0.5, 0.6)
    bound = ff.shifted_trace_bound(benchmark_system, benchmark_band, cert)
    # regressions for this implementation (grid sups 16.614 and 0.6466)
    assert bound.m_1 == pytest.approx(16.614, rel=1e-3)
    assert bound.m_2 == pytest.approx(0.6466, rel=1e-3)
    assert bound.bound_1 == pytest.approx(0.629131, rel=1e-3)
    assert bound.bound_2 == pytest.approx(0.024483, rel=1e-3)


def test_trace_bound_zero_for_lti():
    sys = ff.LpvSystem.lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    bound = ff.shifted_trace_bound(sys, LOW1)
    assert bound.bound_1 == 0.0 and bound.bound_2 == 0.0


def test_trace_bound_requires_certificate(benchmark_system, benchmark_band):
    with pytest.raises(ValueError, match="certificate"):
        ff.shifted_trace_bound(benchmark_system, benchmark_band, None)


def test_trace_bound_rate_box_scaling(benchmark_system, benchmark_band):
    cert = ff.uas_certificate(benchmark_system, 7.4, 0.5, 0.6)
    b1 = ff.shifted_trace_bound(benchmark_system, benchmark_band, cert)
    doubled = ff.LpvSystem(
        benchmark_system.A, benchmark_system.B, benchmark_system.C, benchmark_system.D,
        ff.ParameterBox([0.1], [0.2], [0.8], [1.2]))
    b2 = ff.shifted_trace_bound(doubled, benchmark_band, cert)
    # the input-drift integrand enters squared in the rate
    assert b2.bound_2 == pytest.approx(4.0 * b1.bound_2, rel=1e-9)
    assert b2.bound_1 == pytest.approx(b1.bound_1, rel=1e-9)


def test_time_average_state_covariance_approaches_gramian():
    # dense multisine on [0, 1] with |a_i|^2 = 2*dw and horizon 2*pi/dw:
    # every cross term integrates to zero exactly, so the time average of
    # x x^T approaches W(band)/2 up to the O(1/T) transient
    M = 32
    dw = 1.0 / M
    freqs = (np.arange(M) + 0.5) * dw
    rng = np.random.default_rng(4)
    comps = tuple((np.sqrt(2.0 * dw), f, ph)
                  for f, ph in zip(freqs, rng.uniform(0, 2 * np.pi, M)))
    signal = ff.BandLimitedSignal(comps, band=LOW1)
    sys = ff.LpvSystem.lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    traj = ff.ScheduleTrajectory.constant(np.zeros(0))
    T = 2.0 * np.pi / dw  # about 201 s
    res = ff.simulate(sys, traj, signal, T, 2e-3)
    avg = np.trapezoid(res.x[:, 0] ** 2, dx=res.step) / res.times[-1]
    W = ff.gramian_lti_ff([[-1.0]], [[1.0]], LOW1)[0, 0]
    assert 2.0 * avg == pytest.approx(W, rel=0.02)


def test_gramian_set_bundle(benchmark_system):
    gs = ff.gramian_set(benchmark_system, example_schedule(), 5.0, LOW1,
                        quad_nodes=51, step=2e-3)
    tr = gs.traces
    assert tr["W_p"] > 0 and tr["W_dot_p_1"] >= 0 and tr["W_dot_p_2"] >= 0
    assert gs.time == 5.0
