import math

import numpy as np
import pytest

from conftest import scalar_instance
from stepcert.bounds import CertificateContext, ceil_tol, horizon
from stepcert.instances import InstanceDistribution, check_assumption_gd, feasible_beta_strongly_convex, generate_instance
from stepcert.iterators import (
    AlgorithmConfig,
    DivergenceError,
    Termination,
    cg_run,
    cg_step,
    gd_run,
    gd_step,
    pad_iterate,
    read_trajectory_csv,
)


def test_gd_step_examples(unit_instance):
    assert gd_step(unit_instance, np.array([1.0]), 0.5) == pytest.approx([0.5])
    assert gd_step(scalar_instance(q=2.0), np.array([1.0]), 0.5).tolist() == [0.0]
    inst = scalar_instance()
    two = type(inst).from_matrix(np.diag([1.0, 4.0]), np.array([1.0, 1.0]), 0.1, 2.0)
    np.testing.assert_allclose(gd_step(two, np.array([1.0, 1.0]), 0.1), [0.9, 0.6])


def test_gd_run_halving(unit_instance):
    traj = gd_run(unit_instance, 0.5)
    np.testing.assert_allclose(traj.iterates[:, 0], [1, 0.5, 0.25, 0.125, 0.0625])
    assert traj.M == 4
    assert traj.termination is Termination.GRADIENT_BELOW_NU
    assert traj.gradient_norms[-1] <= 0.1 < traj.gradient_norms[-2]


def test_gd_run_at_stability_boundary_hits_cap():
    traj = gd_run(scalar_instance(q=2.0), 1.0, max_iters=50)
    assert traj.termination is Termination.MAX_ITERATIONS
    assert traj.M == 50


def test_gd_divergence_raises():
    with pytest.raises(DivergenceError) as err:
        gd_run(scalar_instance(q=1.0), 5.0)
    assert err.value.step > 0


def test_gd_iteration_count_within_horizon():
    rho, beta = feasible_beta_strongly_convex(1.0, 4.0)
    dist = InstanceDistribution(8, 5, (1.0, 4.0), (0.1, 1.0), nu=1e-3)
    for i in range(20):
        inst = generate_instance(dist, i)
        bound = math.ceil(math.log(inst.nu / (inst.L * np.linalg.norm(inst.z0))) / math.log(1 - beta))
        assert gd_run(inst, rho).M <= bound


def test_cg_step_examples(unit_instance):
    assert cg_step(unit_instance, np.array([0.5]), np.array([1.0]), 0.5, 0.1) == pytest.approx([0.30])
    assert cg_step(unit_instance, np.array([0.30]), np.array([0.5]), 0.5, 0.1) == pytest.approx([0.17])
    z = np.array([0.7])
    np.testing.assert_array_equal(cg_step(unit_instance, z, np.array([3.0]), 0.5, 0.0), gd_step(unit_instance, z, 0.5))


def test_cg_run_scalar_recurrence():
    inst = scalar_instance(nu=0.05)
    traj = cg_run(inst, 0.5, 0.1)
    expected = [1.0, 0.5]
    while abs(expected[-1]) > 0.05:
        expected.append(0.5 * expected[-1] - 0.1 * (expected[-1] - expected[-2]))
    np.testing.assert_allclose(traj.iterates[:, 0], expected, rtol=1e-14)
    assert traj.iterates[2, 0] == pytest.approx(0.30)


def test_cg_with_zero_eta_is_gd():
    dist = InstanceDistribution(1, 4, (0.5, 1.0), (0.2, 1.0))
    for i in range(5):
        inst = generate_instance(dist, i)
        a, b = gd_run(inst, 1.1), cg_run(inst, 1.1, 0.0)
        np.testing.assert_allclose(a.iterates, b.iterates, rtol=0, atol=1e-14)


def test_cg_exact_solve_stops_after_one_step():
    traj = cg_run(scalar_instance(q=2.0), 0.5, 0.3)
    assert traj.M == 1 and traj.iterates[1, 0] == 0.0


def test_pad_iterate(unit_instance):
    traj = gd_run(unit_instance, 0.5)
    assert pad_iterate(traj, 0) == pytest.approx([1.0])
    assert pad_iterate(traj, traj.M) == pytest.approx([0.0625])
    assert pad_iterate(traj, traj.M + 7).tolist() == [0.0]


def test_decay_and_horizon_invariants():
    dist = InstanceDistribution(6, 5, (0.5, 1.0), (0.1, 1.0), nu=1e-3)
    beta = 0.39
    ctx = CertificateContext(L=1.0, Z=1.0, nu=1e-3, beta=beta, rho_interval=(0.8, 1.2))
    for i in range(20):
        inst = generate_instance(dist, i)
        assert check_assumption_gd(inst, ctx.rho_interval, beta).feasible
        for rho in (0.8, 1.0, 1.2):
            traj = gd_run(inst, rho)
            j = np.arange(traj.M + 1)
            r0 = np.linalg.norm(inst.z0)
            assert np.all(traj.norms <= (1 - beta) ** j * r0 + 1e-9)
            assert np.all(traj.gradient_norms <= inst.L * (1 - beta) ** j * r0 + 1e-9)
            assert traj.M <= ceil_tol(horizon(ctx))


def test_config_validation():
    with pytest.raises(ValueError):
        AlgorithmConfig("GD", 0.0)
    with pytest.raises(ValueError):
        AlgorithmConfig.gd(0.5, rho_interval=(0.6, 1.0))
    with pytest.raises(ValueError):
        AlgorithmConfig("GD", 0.5, eta=0.1)
    cfg = AlgorithmConfig.cg(0.5, 0.1, (0.1, 1.0), (0.0, 0.2))
    assert AlgorithmConfig.from_dict(cfg.to_dict()) == cfg


def test_trajectory_csv_round_trip(unit_instance):
    traj = gd_run(unit_instance, 0.5)
    header, rows = read_trajectory_csv(traj.to_csv())
    assert header["M"] == 4 and header["termination"] == "GradientBelowNu"
    assert rows[-1][0] == 4 and rows[-1][2] <= 0.1
    assert [r[1] for r in rows] == pytest.approx(traj.norms.tolist())
