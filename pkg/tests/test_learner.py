import numpy as np
import pytest

from conftest import scalar_instance
from stepcert.bounds import CertificateContext, OutOfScopeError
from stepcert.costs import Measure
from stepcert.instances import InstanceDistribution, generate_instance
from stepcert.iterators import AlgorithmConfig, DivergenceError
from stepcert.learner import (
    PAPER_MAX,
    UNIFORM_MIN,
    batch_costs,
    build_cg_nets,
    build_gd_net,
    build_net,
    cost_table,
    erm_index,
    erm_select,
    learning_experiment,
    net_configs,
    reference_costs,
    scalar_cost_table,
    uniform_convergence_trial,
)

GD_CTX = CertificateContext(L=1.0, Z=1.0, nu=1e-3, beta=0.39, rho_interval=(0.8, 1.2))
GD_DIST = InstanceDistribution(3, 5, (0.5, 1.0), (0.1, 1.0), nu=1e-3)


def test_net_examples():
    assert build_net((0.1, 0.5), 0.1).points == pytest.approx((0.1, 0.2, 0.3, 0.4, 0.5))
    assert len(build_net((0.1, 0.5), 0.1)) == 5
    assert build_net((0.15, 0.45), 0.1).points == pytest.approx((0.15, 0.2, 0.3, 0.4, 0.45))


def test_net_wider_than_interval_keeps_endpoints():
    with pytest.warns(UserWarning, match="endpoints"):
        net = build_net((0.4, 0.5), 1.0)
    assert net.points == (0.4, 0.5)
    assert build_net((0.4, 0.4), 1.0).points == (0.4,)


def test_net_covers_interval_at_spacing():
    net = build_net((0.13, 0.91), 0.07)
    gaps = np.diff(net.points)
    assert gaps.max() <= 0.07 * (1 + 1e-9)
    for x in np.linspace(0.13, 0.91, 50):
        assert abs(net.nearest(x) - x) <= 0.035 + 1e-12


def test_gd_primal_integral_net_count():
    ctx = CertificateContext(L=1, Z=1, nu=0.1, beta=0.5, rho_interval=(0.1, 0.5))
    net = build_gd_net(ctx, Measure.PRIMAL_INTEGRAL)
    assert net.spacing_K == pytest.approx(0.015051, abs=1e-6)
    assert len(net) == 29  # 27 interior multiples and both endpoints


def test_cg_nets_policies():
    ctx = CertificateContext(L=1, Z=1, nu=0.125, beta=0.5, rho_interval=(0.5, 0.5), eta_interval=(1.5, 1.5), C=1.0)
    (r1, e1), (r2, e2) = build_cg_nets(ctx, UNIFORM_MIN), build_cg_nets(ctx, PAPER_MAX)
    assert r1 == r2 and e1 == e2
    with pytest.raises(OutOfScopeError):
        build_cg_nets(ctx.replace(eta_interval=(0.2, 0.2)))


def test_batch_costs_match_scalar_runs():
    configs = [AlgorithmConfig.gd(r) for r in (0.8, 1.0, 1.2)] + [AlgorithmConfig.cg(1.0, e) for e in (0.05, 0.2)]
    insts = [generate_instance(GD_DIST, i) for i in range(12)]
    for measure in Measure:
        fast = cost_table(GD_DIST, configs, measure, 0, 12)
        slow = scalar_cost_table(configs, insts, measure)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)


def test_batch_costs_mark_divergence():
    lam = np.array([[1.0]])
    y0 = np.array([[1.0]])
    table = batch_costs(lam, y0, 0.1, 1.0, [AlgorithmConfig.gd(0.5), AlgorithmConfig.gd(5.0)], "PrimalIntegral")
    assert table[0, 0] == pytest.approx(0.9375)
    assert np.isinf(table[1, 0])


def test_erm_examples():
    single = [AlgorithmConfig.gd(0.7)]
    samples = [scalar_instance(z0=z) for z in (1.0, 0.5, 0.8)]
    out = erm_select(single, samples, "PrimalIntegral")
    assert out.selected_config == single[0]
    assert out.empirical_costs[0] == pytest.approx(np.mean(scalar_cost_table(single, samples, "PrimalIntegral")))
    two = [AlgorithmConfig.gd(0.5), AlgorithmConfig.gd(0.9)]
    assert erm_select(two, samples, "PrimalIntegral").selected_config.rho == 0.9


def test_erm_tie_break_and_all_diverged():
    configs = [AlgorithmConfig.gd(0.9), AlgorithmConfig.gd(0.3)]
    assert erm_index(configs, np.array([[1.0], [1.0]])) == 1
    with pytest.raises(DivergenceError):
        erm_index(configs, np.full((2, 1), np.inf))


def test_uniform_convergence_extremes():
    configs = net_configs(build_net((0.8, 1.2), 0.2))
    ref = reference_costs(GD_DIST, configs, "PrimalIntegral", 20_000)
    assert uniform_convergence_trial(GD_DIST, configs, "PrimalIntegral", 2000, 20, 0.1, ref) == 1.0
    assert uniform_convergence_trial(GD_DIST, configs, "PrimalIntegral", 1, 50, 1e-4, ref) < 0.1


def test_learning_single_instance_distribution():
    # 1-D with one eigenvalue and a vanishing norm range: every draw has the same optimum
    dist = InstanceDistribution(0, 1, (1.0, 1.0), (0.99999, 1.0), nu=1e-3)
    ctx = CertificateContext(L=1.0, Z=1.0, nu=1e-3, beta=0.5, rho_interval=(0.5, 1.0))
    rep = learning_experiment(dist, ctx, "GD", "PrimalIntegral", 5, k=1e-3, reference_samples=50).report
    assert rep["success_frequency"] == 1.0
    assert all(t["excess"] == 0.0 for t in rep["per_trial"])


def test_learning_is_deterministic_and_validates():
    a = learning_experiment(GD_DIST, GD_CTX, "GD", "PrimalIntegral", 5, k=1e-3, reference_samples=2000).report
    b = learning_experiment(GD_DIST, GD_CTX, "GD", "PrimalIntegral", 5, k=1e-3, reference_samples=2000).report
    assert a == b
    assert a["scope"] == "certified" and a["m"] >= 1
    with pytest.raises(ValueError):
        learning_experiment(GD_DIST, GD_CTX, "GD", "PrimalIntegral", 0)
    with pytest.raises(ValueError):
        learning_experiment(GD_DIST, GD_CTX, "Adam", "PrimalIntegral", 1)


def test_out_of_scope_cg_learning_needs_spacings():
    ctx = CertificateContext(L=1.0, Z=1.0, nu=1e-3, beta=0.3, rho_interval=(0.8, 1.0), eta_interval=(0.05, 0.1))
    with pytest.raises(OutOfScopeError):
        learning_experiment(GD_DIST, ctx, "CG", "PrimalIntegral", 2, reference_samples=100)
    rep = learning_experiment(GD_DIST, ctx, "CG", "PrimalIntegral", 2, k=1e-3, reference_samples=500,
                              spacings=(0.1, 0.05)).report
    assert rep["scope"].startswith("empirical only")


def test_default_cap_is_four_horizons():
    from stepcert.bounds import ceil_tol, default_max_iters, horizon

    rep = learning_experiment(GD_DIST, GD_CTX, "GD", "PrimalIntegral", 1, k=1e-3, reference_samples=100).report
    assert rep["max_iters"] == default_max_iters(GD_CTX) == 4 * ceil_tol(horizon(GD_CTX))
