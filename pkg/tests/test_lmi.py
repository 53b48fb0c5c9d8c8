import numpy as np
import pytest

import finitefreq as ff
from finitefreq.lmi import build_problem
from finitefreq.sdp import solve_feasibility
from conftest import inband_sup, random_stable_lti

LOW1 = ff.FrequencyRange.low(1.0)


def _scalar_lti():
    return ff.LpvSystem.lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]])


def test_kyp_scalar_hand_expansion():
    # G(P) = [[-2P + 1, P], [P, -g^2]] for A=-1, B=C=1, D=0
    pi = ff.PerformanceIndex.l2_gain(1.5, 1, 1)
    form = ff.assemble_kyp_lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]], pi)
    assert np.allclose(form.constant_blocks[0], -np.array([[1.0, 0.0], [0.0, -2.25]]))
    assert np.allclose(form.coeff_blocks[0][0], -np.array([[-2.0, 1.0], [1.0, 0.0]]))


def test_kyp_zero_index_feasible_with_zero_certificate():
    pi = ff.PerformanceIndex(np.zeros((2, 2)))
    form = ff.assemble_kyp_lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]], pi)
    res = solve_feasibility(form, 0.0)
    assert res.feasible


def test_kyp_zero_output_feasible_any_gain():
    pi = ff.PerformanceIndex.l2_gain(1e-3, 1, 1)
    form = ff.assemble_kyp_lti([[-1.0]], [[1.0]], [[0.0]], [[0.0]], pi)
    assert solve_feasibility(form, 1e-9).feasible


def test_min_gamma_scalar_unit_gain():
    res = ff.min_gamma(_scalar_lti(), ff.FrequencyRange.entire(), "kyp", bisect_tol=1e-4)
    assert res.gamma_star == pytest.approx(1.0, abs=1e-3)


def test_gkyp_low_band_flip_at_dc_peak():
    # in-band peak of 1/(1+jw) on |w| <= 0.1 sits at w = 0 with value 1
    res = ff.min_gamma(_scalar_lti(), ff.FrequencyRange.low(0.1), "gkyp", bisect_tol=1e-4)
    assert res.gamma_star == pytest.approx(1.0, abs=1e-3)


def test_gkyp_high_band_flip_at_edge():
    res = ff.min_gamma(_scalar_lti(), ff.FrequencyRange.high(10.0), "gkyp", bisect_tol=1e-5)
    assert res.gamma_star == pytest.approx(1.0 / np.sqrt(101.0), rel=1e-3)


def _verdicts(system, rng, mode, gammas, freeze_p=None):
    out = []
    for g in gammas:
        prob = build_problem(system, rng, mode, g, freeze_p=freeze_p)
        out.append(solve_feasibility(prob.form, prob.margin).feasible)
    return out


def test_reduction_gkyp_entire_equals_kyp():
    rng = np.random.default_rng(5)
    A, B, C, D = random_stable_lti(rng)
    sys = ff.LpvSystem.lti(A, B, C, D)
    gstar = inband_sup(A, B, C, D, ff.FrequencyRange.entire())
    probes = gstar * np.array([0.5, 0.7, 0.9, 0.95, 1.05, 1.1, 1.3, 1.7, 2.5, 4.0])
    v_kyp = _verdicts(sys, ff.FrequencyRange.entire(), "kyp", probes)
    v_gkyp = _verdicts(sys, ff.FrequencyRange.entire(), "gkyp", probes)
    assert v_kyp == v_gkyp


def test_reduction_zero_coefficients_equals_gkyp():
    rng = np.random.default_rng(6)
    A, B, C, D = random_stable_lti(rng)
    lti = ff.LpvSystem.lti(A, B, C, D)
    z = np.zeros
    embedded = ff.LpvSystem(
        ff.AffineMatrixFunction(A, (z((2, 2)),)), ff.AffineMatrixFunction(B, (z((2, 1)),)),
        ff.AffineMatrixFunction(C, (z((1, 2)),)), ff.AffineMatrixFunction(D, (z((1, 1)),)),
        ff.ParameterBox([0.1], [0.2], [0.4], [0.6]))
    band = ff.FrequencyRange.low(1.0)
    gstar = inband_sup(A, B, C, D, band)
    probes = gstar * np.array([0.5, 0.8, 0.95, 1.05, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0])
    assert _verdicts(embedded, band, "lpv_ff", probes) == _verdicts(lti, band, "gkyp", probes)


def test_reduction_constant_q_matches_band_condition(benchmark_system):
    # zeroing the Q coefficient turns every enlarged-band block into the
    # constant-Q block: F_t2((P, Q0, Q1=0)) == F_ff((P, Q0)) at each vertex
    band = ff.FrequencyRange.low(5.955)
    pi = ff.PerformanceIndex.l2_gain(4.0, 1, 1)
    rng = np.random.default_rng(2)
    t = 3  # symmetric 2x2 entries per slab
    x_ff = rng.normal(size=3 * t)
    x_t2 = np.concatenate([x_ff[:2 * t], x_ff[2 * t:], np.zeros(t)])
    for vertex in ff.box_vertices(benchmark_system.box):
        f_ff = ff.assemble_lpv_ff(benchmark_system, band, pi, vertex)
        f_t2 = ff.assemble_theorem2(benchmark_system, band, pi, vertex)
        lhs = f_t2.eval_blocks(x_t2)[0]
        rhs = f_ff.eval_blocks(x_ff)[0]
        assert np.allclose(lhs, rhs, atol=1e-10)
    # and the enlarged decision space can only lower the certified gain
    probes = [2.0, 2.8, 3.1, 3.6, 4.2, 5.0, 6.5, 8.0, 10.0, 15.0]
    v_ff = _verdicts(benchmark_system, band, "lpv_ff", probes)
    v_t2 = _verdicts(benchmark_system, band, "theorem2", probes)
    assert all(t2 or not f for f, t2 in zip(v_ff, v_t2))
    assert v_ff[0] is False and v_ff[-1] is True


def test_degenerate_box_reduces_to_frozen(benchmark_system):
    box = ff.ParameterBox([0.15], [0.15], [0.0], [0.0])
    frozen = ff.LpvSystem(benchmark_system.A, benchmark_system.B, benchmark_system.C,
                          benchmark_system.D, box)
    g1 = ff.min_gamma(frozen, LOW1, "lpv_ff", bisect_tol=1e-3).gamma_star
    g2 = ff.min_gamma(benchmark_system, LOW1, "gkyp", bisect_tol=1e-3,
                      freeze_p=[0.15]).gamma_star
    assert g1 == pytest.approx(g2, abs=2e-3)


def test_lpv_ff_benchmark(benchmark_system):
    res = ff.min_gamma(benchmark_system, LOW1, "lpv_ff", bisect_tol=1e-3)
    # regression for this implementation (cross-checked against an
    # interior-point solve of the identical vertex problem: 2.1495)
    assert res.gamma_star == pytest.approx(2.1499, abs=0.02)
    # the published 3.7767 level is indeed feasible (a valid, looser bound)
    prob = build_problem(benchmark_system, LOW1, "lpv_ff", 3.7767)
    assert solve_feasibility(prob.form, prob.margin).feasible
    # monotone feasibility along the bisection trace
    feas_g = [g for g, okay in res.bisection_trace if okay]
    infeas_g = [g for g, okay in res.bisection_trace if not okay]
    assert max(infeas_g) < min(feas_g)


def test_lpv_ef_benchmark(benchmark_system):
    res = ff.min_gamma(benchmark_system, LOW1, "lpv_ef", bisect_tol=1e-3)
    assert res.gamma_star == pytest.approx(4.4233, abs=0.02)
    # the feedthrough pins the floor: gamma >= max |D(p)| over the box
    assert res.gamma_star >= 4.6104 - 0.2 * 1.8747 - 1e-3
    prob = build_problem(benchmark_system, LOW1, "lpv_ef", 5.2445)
    assert solve_feasibility(prob.form, prob.margin).feasible


def test_lpv_ef_unstable_has_no_bound():
    sys = ff.LpvSystem.lti([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(RuntimeError, match="finite bound"):
        ff.min_gamma(sys, LOW1, "lpv_ef", bisect_tol=1e-2, gamma_cap=100.0)


def test_theorem2_benchmark_enlarged(benchmark_system):
    res = ff.min_gamma(benchmark_system, ff.FrequencyRange.low(5.955), "theorem2",
                       bisect_tol=1e-3)
    assert res.gamma_star == pytest.approx(3.326, abs=0.05)
    prob = build_problem(benchmark_system, ff.FrequencyRange.low(5.955), "theorem2", 5.0313)
    assert solve_feasibility(prob.form, prob.margin).feasible


def test_gamma_ordering_in_nested_bands(benchmark_system):
    gs = [ff.min_gamma(benchmark_system, ff.FrequencyRange.low(w), "lpv_ff",
                       bisect_tol=1e-3).gamma_star for w in (0.5, 2.0, 8.0)]
    assert gs[0] <= gs[1] + 2e-3 <= gs[2] + 4e-3


def test_certificate_reverifies(benchmark_system):
    res = ff.min_gamma(benchmark_system, LOW1, "lpv_ef", bisect_tol=1e-2)
    prob = build_problem(benchmark_system, LOW1, "lpv_ef", res.bracket[1])
    assert ff.max_eig_neg(prob.form, res.x) <= -prob.margin / 2


def test_verify_on_grid_flags_corruption(benchmark_system):
    res = ff.min_gamma(benchmark_system, LOW1, "lpv_ef", bisect_tol=1e-2)
    prob = build_problem(benchmark_system, LOW1, "lpv_ef", res.bracket[1])
    assert ff.verify_on_grid(prob, res.x, grid_density=21) == []
    assert res.relaxation_gap_flag is False
    bad = res.x.copy()
    bad[0] += 0.1
    assert len(ff.verify_on_grid(prob, bad, grid_density=21)) > 0


def test_verify_on_grid_lti_exactness():
    rng = np.random.default_rng(9)
    A, B, C, D = random_stable_lti(rng)
    sys = ff.LpvSystem.lti(A, B, C, D)
    res = ff.min_gamma(sys, ff.FrequencyRange.entire(), "kyp", bisect_tol=1e-3)
    assert res.relaxation_gap_flag is False


def test_uas_certificate_benchmark_fixed_scalars(benchmark_system):
    cert = ff.uas_certificate(benchmark_system, 7.4, 0.5, 0.6)
    assert cert.alpha == pytest.approx(1.2)
    assert cert.beta == pytest.approx(7.4 / 1.2, rel=1e-12)
    assert cert.c3 == 7.4  # no failover needed
    # certificate matrices actually sit inside the scalar envelope
    for p in (0.1, 0.15, 0.2):
        P = cert.P[0] + p * cert.P[1]
        ev = np.linalg.eigvalsh(P)
        assert ev.min() >= 0.5 - 1e-6 and ev.max() <= 0.6 + 1e-6


def test_uas_certificate_scalar_boundary():
    sys = ff.LpvSystem.lti([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    cert = ff.uas_certificate(sys, 2.0, 1.0, 1.0)
    assert cert.alpha == pytest.approx(1.0)
    assert cert.beta == pytest.approx(1.0)


def test_uas_certificate_unstable_fails():
    sys = ff.LpvSystem.lti([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(RuntimeError, match="no UAS certificate"):
        ff.uas_certificate(sys, 1.0, 0.5, 0.6)


def test_uas_certificate_c3_failover():
    sys = ff.LpvSystem.lti([[-0.05]], [[1.0]], [[1.0]], [[0.0]])
    cert = ff.uas_certificate(sys, 7.4, 0.5, 1.0)
    assert cert.c3 < 7.4
    assert cert.beta == pytest.approx(cert.c3 / 2.0)


def test_uas_certificate_free_mode(benchmark_system):
    cert = ff.uas_certificate(benchmark_system, 1.0)
    assert cert.c2 == 1.0 and cert.alpha >= 1.0
    assert cert.alpha == pytest.approx(1.0 / cert.c1)


def test_controllability_warning():
    # B in the kernel direction: rank-deficient controllability matrix
    sys = ff.LpvSystem.lti([[-1.0, 0.0], [0.0, -2.0]], [[1.0], [0.0]],
                           [[1.0, 1.0]], [[0.0]])
    with pytest.warns(UserWarning, match="uncontrollable"):
        ff.min_gamma(sys, ff.FrequencyRange.entire(), "kyp", bisect_tol=1e-2)


def test_middle_band_routes_through_real_embedding(benchmark_system):
    band = ff.FrequencyRange.middle(1.0, 3.0)
    prob = build_problem(benchmark_system, band, "lpv_ff", 8.0)
    # complex weight: main blocks are doubled by the real embedding
    assert prob.form.block_sizes[0] == 2 * (benchmark_system.n + benchmark_system.n_inputs)
    res = ff.min_gamma(benchmark_system, band, "lpv_ff", bisect_tol=1e-2)
    assert np.isfinite(res.gamma_star) and res.gamma_star > 0


def test_vertex_outside_box_rejected(benchmark_system):
    pi = ff.PerformanceIndex.l2_gain(1.0, 1, 1)
    with pytest.raises(ValueError, match="outside"):
        ff.assemble_lpv_ff(benchmark_system, LOW1, pi, (np.array([0.5]), np.array([0.4])))
