import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from stepcert.bounds import (
    FINITE_CLASS,
    PAPER_PRODUCT,
    SCOPE_OK,
    SCOPE_OUT,
    CertificateContext,
    OutOfScopeError,
    cg_combined_bound,
    cg_cost_diff_bound,
    cg_eta_inner_max_Fstar,
    cg_eta_sensitivity_H,
    cg_rho_sensitivity_G,
    cg_safe_deltas,
    cg_step_lipschitz_bound,
    cg_traj_lipschitz_F,
    certificate_report,
    cost_spacing,
    d_factor,
    eta_sensitivity_constants,
    g_star,
    geometric_factor,
    gd_cost_safe_delta,
    gd_iter_safe_delta,
    gd_traj_error_bound,
    horizon,
    pseudo_dimension_bound,
    recurrence_roots,
    recurrence_solution,
    rho_sensitivity_constants,
    sample_complexity,
)


def ctx_of(**kw):
    base = dict(L=1.0, Z=1.0, nu=0.1, beta=0.5, rho_interval=(0.5, 0.5))
    base.update(kw)
    return CertificateContext(**base)


def iterate(x0, x1, a, b, n):
    xs = [x0, x1]
    for _ in range(n - 1):
        xs.append(a * xs[-1] + b * xs[-2])
    return xs[n]


@pytest.mark.parametrize("L,rho,expected", [(1, 0.5, 1), (4, 1, 3), (2, 1, 1)])
def test_d_factor(L, rho, expected):
    assert d_factor(rho, L) == expected


def test_horizon_examples():
    assert horizon(ctx_of()) == pytest.approx(3.321928, abs=1e-6)
    assert horizon(ctx_of(nu=0.5)) == pytest.approx(1.0, rel=1e-12)
    assert horizon(ctx_of(L=2.0, nu=1e-3, beta=0.3)) == pytest.approx(math.log(2000) / math.log(1 / 0.7), rel=1e-12)
    assert horizon(ctx_of(L=2.0, nu=1e-3, beta=0.3)) == pytest.approx(21.3104, abs=1e-4)


def test_iteration_count_spacing():
    assert gd_iter_safe_delta(ctx_of(), 0.5) == pytest.approx(0.025)
    ctx = ctx_of(L=1.0)
    H = horizon(ctx)
    # rho = 2.5 gives D = 1.5 with L = 1
    assert gd_iter_safe_delta(ctx, 2.5) == pytest.approx(0.025 * 1.5 ** -H)
    assert gd_iter_safe_delta(ctx, 2.5) == pytest.approx(0.025 * 2 ** (-H * math.log2(1.5)))


def test_trajectory_divergence_bound():
    ctx = ctx_of()
    assert gd_traj_error_bound(ctx, 0.5, 0.5, 3) == 0.0
    assert gd_traj_error_bound(ctx, 0.5, 0.6, 1) == pytest.approx(0.2)
    assert abs((1 - 0.5) - (1 - 0.6)) <= gd_traj_error_bound(ctx, 0.5, 0.6, 1)


def test_primal_integral_spacing():
    ctx = ctx_of()
    assert gd_cost_safe_delta(ctx, 0.5) == pytest.approx(0.015051, abs=1e-6)
    assert gd_cost_safe_delta(ctx.replace(C=0.2), 0.5) == pytest.approx(2 * gd_cost_safe_delta(ctx, 0.5), rel=1e-15)


def test_primal_integral_spacing_is_continuous_at_unit_D():
    H = horizon(ctx_of())
    at_one = cost_spacing(0.5, 1.0, 1.0, 1.0, H, 0.1)
    for D in (1 - 1e-6, 1 + 1e-6):
        assert cost_spacing(0.5, 1.0, 1.0, D, H, 0.1) == pytest.approx(at_one, rel=1e-5)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 3.0), st.floats(1.0, 3.0))
def test_primal_integral_spacing_decreases_in_D(d1, d2):
    lo, hi = sorted((d1, d2))
    H = horizon(ctx_of())
    assert cost_spacing(0.5, 1, 1, hi, H, 0.1) <= cost_spacing(0.5, 1, 1, lo, H, 0.1) * (1 + 1e-12)


def test_recurrence_roots_examples():
    r = recurrence_roots(1.0, 0.0)
    assert (r.r1, r.r2) == (1.0, 0.0)
    r = recurrence_roots(1.2, 0.2)
    assert r.r1 == pytest.approx(1.34833, abs=1e-5) and r.r2 == pytest.approx(-0.14833, abs=1e-5)
    r = recurrence_roots(2.0, 0.5)
    assert r.r1 == pytest.approx(1 + math.sqrt(1.5)) and r.r2 == pytest.approx(1 - math.sqrt(1.5))


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-6, 5))
def test_vieta_identities(a, b):
    r = recurrence_roots(a, b)
    assert r.r1 >= r.r2
    assert r.r1 + r.r2 == pytest.approx(a, abs=1e-12 * (1 + abs(a) + b))
    assert r.r1 * r.r2 == pytest.approx(-b, rel=1e-12)


def test_recurrence_solution_examples():
    fib = recurrence_roots(1.0, 1.0)
    assert recurrence_solution(0.0, 1.0, fib, 6) == pytest.approx(8.0)
    assert recurrence_solution(0.3, -0.7, fib, 0) == pytest.approx(0.3)
    assert recurrence_solution(0.3, -0.7, fib, 1) == pytest.approx(-0.7)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.01, 2.0), st.floats(-2, 2), st.floats(-2, 2))
def test_closed_form_matches_recurrence(a, b, x0, x1):
    r = recurrence_roots(a, b)
    direct = iterate(x0, x1, a, b, 10)
    assert recurrence_solution(x0, x1, r, 10) == pytest.approx(direct, rel=1e-8, abs=1e-8 * max(1, abs(x0), abs(x1)))


def test_step_lipschitz():
    assert cg_step_lipschitz_bound(0.5, 0.0, 1.0, 2.0, 5.0) == 2.0
    assert cg_step_lipschitz_bound(0.5, 0.1, 1.0, 1.0, 1.0) == pytest.approx(1.2)


def test_trajectory_lipschitz_F():
    assert cg_traj_lipschitz_F(0.5, 1e-300, 1.0, 7) == pytest.approx(1.0)
    # rho = 2.5 with L = 1 gives D = 1.5
    roots = recurrence_roots(2.0, 0.5)
    assert cg_traj_lipschitz_F(2.5, 0.5, 1.0, 4) == pytest.approx(recurrence_solution(1.0, 1.5, roots, 4))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.01, 2.0), st.floats(0.5, 4.0))
def test_F_starts_at_one(rho, eta, L):
    assert cg_traj_lipschitz_F(rho, eta, L, 0) == pytest.approx(1.0, rel=1e-12)


def test_rho_sensitivity_worked_example():
    ctx = ctx_of()
    c = rho_sensitivity_constants(ctx, 0.5, 0.2)
    assert c.denominator == pytest.approx(0.55)
    assert c.R0 == pytest.approx(0.45455, abs=1e-5)
    assert c.R1 == pytest.approx(2.22727, abs=1e-5)
    assert iterate(c.R0, c.R1, 1.2, 0.2, 2) == pytest.approx(2.76364, abs=1e-5)
    assert cg_rho_sensitivity_G(ctx, 0.5, 0.2, 2) == pytest.approx(2.6500, abs=1e-4)


def test_rho_sensitivity_rejects_j0():
    with pytest.raises(ValueError):
        cg_rho_sensitivity_G(ctx_of(), 0.5, 0.2, 0)


def test_fstar_worked_example():
    ctx = ctx_of(eta_interval=(1.5, 2.0))
    fs = cg_eta_inner_max_Fstar(ctx, 0.5, 2)
    assert fs.value == pytest.approx(1.5, rel=1e-9)
    assert fs.eta == pytest.approx(2.0) and fs.n == 1
    assert cg_eta_inner_max_Fstar(ctx, 0.5, 1).value == pytest.approx(0.5)


def test_fstar_requires_eta_above_L():
    with pytest.raises(OutOfScopeError):
        cg_eta_inner_max_Fstar(ctx_of(eta_interval=(0.5, 2.0)), 0.5, 2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.01, 1.0), st.integers(1, 10))
def test_fstar_at_least_the_first_gap(rho, gap, j):
    ctx = ctx_of(eta_interval=(1.0 + gap, 1.0 + 2 * gap))
    assert cg_eta_inner_max_Fstar(ctx, rho, j).value >= rho * ctx.L * ctx.Z * (1 - 1e-12)


def test_eta_sensitivity_worked_example():
    ctx = ctx_of(eta_interval=(1.5, 2.0))
    c = eta_sensitivity_constants(ctx, 0.5, 1.5, 1.5)
    assert c.R0 == pytest.approx(0.5) and c.R1 == pytest.approx(4 / 3)
    assert (c.roots.a, c.roots.b) == (2.5, 1.5)
    expected = iterate(0.5, 4 / 3, 2.5, 1.5, 2) - 1.5 / 3
    value = cg_eta_sensitivity_H(ctx, 0.5, 1.5, 2)
    assert value == pytest.approx(expected, rel=1e-9)
    assert value == pytest.approx(3.583333, abs=1e-6)


def test_combined_bound_reductions():
    ctx = ctx_of(eta_interval=(1.5, 2.0))
    eta_only = cg_combined_bound(ctx, 0.5, 0.5, 1.5, 1.6, 3)
    assert eta_only == pytest.approx(0.1 * cg_eta_sensitivity_H(ctx, 0.5, 1.5, 3))
    rho_only = cg_combined_bound(ctx, 0.5, 0.6, 1.5, 1.5, 3)
    assert rho_only == pytest.approx(0.1 * cg_rho_sensitivity_G(ctx, 0.5, 1.5, 3))
    sizes = [cg_combined_bound(ctx, 0.5, 0.5 + t, 1.5, 1.5 + t, 3) for t in (1e-1, 1e-3, 1e-6)]
    assert sizes[0] > sizes[1] > sizes[2] and sizes[2] < 1e-4


def test_eta_term_skipped_outside_scope_when_eta_equal():
    ctx = ctx_of(eta_interval=(0.2, 0.3))
    assert cg_combined_bound(ctx, 0.5, 0.6, 0.2, 0.2, 2) > 0
    with pytest.raises(OutOfScopeError):
        cg_combined_bound(ctx, 0.5, 0.6, 0.2, 0.25, 2)


def test_cost_diff_bound():
    ctx = ctx_of(nu=0.125, eta_interval=(1.5, 2.0))
    assert cg_cost_diff_bound(ctx, 0.5, 0.5, 1.5, 1.5, 3) == 0.0
    with pytest.raises(ValueError, match="horizon"):
        cg_cost_diff_bound(ctx, 0.5, 0.6, 1.5, 1.5, 4)


def test_g_star_worked_example():
    ctx = ctx_of(nu=0.125, eta_interval=(0.2, 0.2))
    r1 = recurrence_roots(1.2, 0.2).r1
    assert geometric_factor(r1, 3) == pytest.approx(r1 + r1**2 + r1**3, rel=1e-12)
    assert geometric_factor(r1, 3) == pytest.approx(5.6176, abs=1e-4)
    gs = g_star(ctx, 0.5, 0.2)
    assert gs == pytest.approx(16.67, abs=5e-3)
    rho_delta, _ = cg_safe_deltas(ctx.replace(C=1.0, eta_interval=(1.5, 2.0)), 0.5, 0.2)
    assert rho_delta == pytest.approx(1 / (2 * gs), rel=1e-12)
    assert rho_delta == pytest.approx(0.0300, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0), st.floats(0.1, 0.9), st.floats(0.5, 5))
def test_g_star_dominates_explicit_sum(beta, eta, rho_frac, Z):
    ctx = ctx_of(Z=Z, nu=Z * 1e-2, beta=beta, rho_interval=(0.1, 1.0))
    assume(horizon(ctx) <= 15)
    rho = rho_frac
    try:
        total = ctx.L * ctx.Z * d_factor(rho, 1.0) / beta + sum(
            cg_rho_sensitivity_G(ctx, rho, eta, j) for j in range(1, math.floor(horizon(ctx)) + 1))
    except OutOfScopeError:
        return
    assert total <= g_star(ctx, rho, eta) * (1 + 1e-9)


def test_safe_deltas_scale_with_C():
    ctx = ctx_of(nu=0.125, eta_interval=(1.5, 2.0))
    a = cg_safe_deltas(ctx, 0.5, 1.5)
    b = cg_safe_deltas(ctx.replace(C=0.2), 0.5, 1.5)
    assert b == pytest.approx((2 * a[0], 2 * a[1]), rel=1e-12)


def test_pseudo_dimension():
    assert pseudo_dimension_bound(1) == 0
    assert pseudo_dimension_bound(1024, FINITE_CLASS) == 10
    ctx = ctx_of()
    assert pseudo_dimension_bound(1024, PAPER_PRODUCT, ctx) == pytest.approx(horizon(ctx) * 10)
    with pytest.raises(ValueError):
        pseudo_dimension_bound(0)


def test_sample_complexity():
    ctx = ctx_of(delta=math.exp(-1))
    assert sample_complexity(ctx, 3, 2.0, epsilon=1.0, k=1.0) == 16
    ctx = ctx_of(delta=0.05)
    assert sample_complexity(ctx, 10, horizon(ctx), epsilon=0.5, k=1.0) == 574


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10.0))
def test_Z_scaling(scale):
    ctx = ctx_of(Z=1.0, nu=0.1)
    scaled = ctx_of(Z=scale, nu=0.1 * scale)
    assert horizon(scaled) == pytest.approx(horizon(ctx), rel=1e-12)
    assert gd_cost_safe_delta(scaled, 0.5) == pytest.approx(gd_cost_safe_delta(ctx, 0.5) / scale, rel=1e-9)


def test_beta_validation():
    with pytest.raises(ValueError):
        ctx_of(beta=0.0)
    with pytest.raises(ValueError):
        ctx_of(nu=2.0)


def test_report_gd_only():
    rep = certificate_report(ctx_of(rho_interval=(0.1, 0.5)))
    assert rep["scope"] == SCOPE_OK and "cg" not in rep
    assert rep["gd"]["D"] == 1.0
    assert rep["gd"]["K_primal_integral"] == pytest.approx(0.015051, abs=1e-6)
    block = rep["gd"]["primal_integral"]
    assert block["net_sizes"] == [29]
    assert set(block["sample_complexity"]) == {FINITE_CLASS, PAPER_PRODUCT}


def test_report_cg_worked_and_out_of_scope():
    rep = certificate_report(ctx_of(nu=0.125, eta_interval=(0.2, 0.3)))
    assert rep["scope"] == SCOPE_OUT
    assert rep["cg"]["G_star"] == pytest.approx(16.67, abs=5e-3)
    assert rep["cg"]["H_star"] is None and rep["cg"]["F_star"] is None
    rep = certificate_report(ctx_of(nu=0.125, eta_interval=(1.5, 2.0)))
    assert rep["scope"] == SCOPE_OK
    assert rep["cg"]["F_star"]["value"] >= 0.5
    assert rep["cg"]["H_star"] > 0 and rep["cg"]["learning"]["net_sizes"][0] >= 1


def test_report_numbers_are_finite():
    rep = certificate_report(ctx_of(nu=0.125, eta_interval=(1.5, 2.0)))

    def walk(x):
        if isinstance(x, dict):
            for v in x.values():
                walk(v)
        elif isinstance(x, (list, tuple)):
            for v in x:
                walk(v)
        elif isinstance(x, float):
            assert np.isfinite(x)

    walk(rep)
