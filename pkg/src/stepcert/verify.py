"""Simulation suites that check each perturbation bound against real runs.

Every suite draws instances from a distribution, keeps those satisfying the
contraction assumption for the suite's context, draws parameters, and
compares measured gaps with the closed-form bound.  Violations are kept with
enough payload to replay them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from stepcert.bounds import (
    CertificateContext,
    ceil_tol,
    cg_combined_bound,
    cg_safe_deltas,
    cg_traj_lipschitz_F,
    gd_cost_safe_delta,
    gd_iter_safe_delta,
    gd_traj_error_bound,
    horizon,
)
from stepcert.costs import iteration_count_cost, primal_integral_cost
from stepcert.instances import (
    InstanceDistribution,
    ProblemInstance,
    check_assumption_cg,
    check_assumption_gd,
    generate_instance,
    worst_contraction_ratio,
)
from stepcert.iterators import cg_orbit, cg_run, gd_orbit, gd_run
from stepcert.seeding import derive_seed, rng_for

REL_TOL = 1e-9
ABS_TOL = 1e-12
COST_TOL = 1e-6
MAX_WITNESSES = 20
PROBES = 8

GD_DEFAULTS = {
    "distribution": {"dimension": 5, "eigenvalue_range": [0.5, 1.0], "norm_range": [0.1, 1.0], "nu": 1e-3},
    "context": {"L": 1.0, "Z": 1.0, "nu": 1e-3, "beta": 0.39, "rho_interval": [0.8, 1.2], "C": 0.1},
}
CG_DEFAULTS = {
    "distribution": {"dimension": 5, "eigenvalue_range": [0.03, 0.045], "norm_range": [0.1, 1.0], "nu": 1e-3},
    "context": {"L": 0.045, "Z": 1.0, "nu": 1e-3, "beta": 0.43, "rho_interval": [18.0, 20.0],
                "eta_interval": [0.05, 0.06], "C": 0.1},
}


@dataclass
class SuiteResult:
    name: str
    status: str
    draws: int
    attempts: int
    checks: int = 0
    violation_count: int = 0
    worst_ratio: float = 0.0
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "draws": self.draws, "attempts": self.attempts,
                "skipped": self.attempts - self.draws, "checks": self.checks,
                "violations": self.violation_count, "worst_ratio": self.worst_ratio,
                "witnesses": self.witnesses}


@dataclass(frozen=True)
class _Setup:
    dist: InstanceDistribution
    ctx: CertificateContext
    J: int


class _Recorder:
    def __init__(self, result: SuiteResult):
        self.result = result

    def check(self, actual: float, bound: float, witness: Callable[[], dict], abs_tol: float = ABS_TOL):
        r = self.result
        r.checks += 1
        if bound > 0:
            r.worst_ratio = max(r.worst_ratio, actual / bound)
        if not actual <= bound * (1 + REL_TOL) + abs_tol:
            r.violation_count += 1
            if len(r.witnesses) < MAX_WITNESSES:
                r.witnesses.append({**witness(), "actual": actual, "bound": bound})


def _uniform_pair(rng, lo, hi):
    a, b = sorted(rng.uniform(lo, hi, size=2))
    return float(a), float(b)


def _step(rng, width):
    # half the draws sit exactly on the spacing, where the bound is tightest
    return float(width if rng.random() < 0.5 else rng.uniform(0.0, width))


def _gd_passes(inst, ctx, rhos) -> bool:
    if not check_assumption_gd(inst, ctx.rho_interval, ctx.beta, PROBES).feasible:
        return False
    return _ratio_ok(inst, ctx, rhos, None)


def _cg_passes(inst, ctx, rhos, etas) -> bool:
    if not check_assumption_cg(inst, ctx.rho_interval, ctx.eta_interval, ctx.beta, PROBES).feasible:
        return False
    return _ratio_ok(inst, ctx, rhos, etas)


def _ratio_ok(inst, ctx, rhos, etas) -> bool:
    steps = 4 * ceil_tol(horizon(ctx)) + 8
    worst = worst_contraction_ratio(inst, np.asarray(rhos), None if etas is None else np.asarray(etas), steps)
    return worst <= (1.0 - ctx.beta) * (1 + 1e-12)


# ---------------------------------------------------------------- draws

def _gd_trajectory_divergence(setup, inst, rng, rec):
    ctx = setup.ctx
    rho, eta = _uniform_pair(rng, *ctx.rho_interval)
    if not _gd_passes(inst, ctx, [rho, eta]):
        return False
    a = gd_orbit(inst, rho, setup.J)
    b = gd_orbit(inst, eta, setup.J)
    for j in range(1, setup.J + 1):
        rec.check(float(np.linalg.norm(a[j] - b[j])), gd_traj_error_bound(ctx, rho, eta, j),
                  lambda: {"instance": inst.to_dict(), "rho": rho, "eta": eta, "j": j})
    return True


def _cg_start_lipschitz(setup, inst, rng, rec):
    ctx = setup.ctx
    rho = float(rng.uniform(*ctx.rho_interval))
    eta = float(rng.uniform(*ctx.eta_interval))
    if not _cg_passes(inst, ctx, [rho], [eta]):
        return False
    direction = rng.standard_normal(inst.dimension)
    y0 = inst.z0 + rng.uniform(0.0, 0.5) * ctx.Z * direction / np.linalg.norm(direction)
    y0 *= min(1.0, ctx.Z / np.linalg.norm(y0))
    w = cg_orbit(inst, rho, eta, setup.J)
    y = cg_orbit(inst, rho, eta, setup.J, z0=y0)
    gap0 = float(np.linalg.norm(w[0] - y[0]))
    for n in range(0, setup.J + 1):
        rec.check(float(np.linalg.norm(w[n] - y[n])), cg_traj_lipschitz_F(rho, eta, ctx.L, n) * gap0,
                  lambda: {"instance": inst.to_dict(), "y0": y0.tolist(), "rho": rho, "eta": eta, "n": n})
    return True


def _cg_parameter_divergence(setup, inst, rng, rec):
    ctx = setup.ctx
    rho1, rho2 = _uniform_pair(rng, *ctx.rho_interval)
    eta1, eta2 = _uniform_pair(rng, *ctx.eta_interval)
    if not _cg_passes(inst, ctx, [rho1, rho2], [eta1, eta2]):
        return False
    a = cg_orbit(inst, rho1, eta1, setup.J + 1)
    b = cg_orbit(inst, rho2, eta2, setup.J + 1)
    for j in range(2, setup.J + 1):
        # the bound at step j compares g^j(z1, z0), i.e. iterate j + 1
        rec.check(float(np.linalg.norm(a[j + 1] - b[j + 1])), cg_combined_bound(ctx, rho1, rho2, eta1, eta2, j),
                  lambda: {"instance": inst.to_dict(), "rho": [rho1, rho2], "eta": [eta1, eta2], "j": j})
    return True


def _gd_spacing_pair(ctx, rng, safe_delta):
    rho = float(rng.uniform(*ctx.rho_interval))
    eta = min(rho + _step(rng, safe_delta(ctx, rho)), ctx.rho_interval[1])
    return rho, eta


def _gd_iteration_count_spacing(setup, inst, rng, rec):
    ctx = setup.ctx
    rho, eta = _gd_spacing_pair(ctx, rng, gd_iter_safe_delta)
    if not _gd_passes(inst, ctx, [rho, eta]):
        return False
    c1 = iteration_count_cost(gd_run(inst, rho)).value
    c2 = iteration_count_cost(gd_run(inst, eta)).value
    rec.check(abs(c1 - c2), 1.0, lambda: {"instance": inst.to_dict(), "rho": rho, "eta": eta, "costs": [c1, c2]})
    return True


def _gd_primal_integral_spacing(setup, inst, rng, rec):
    ctx = setup.ctx
    rho, eta = _gd_spacing_pair(ctx, rng, gd_cost_safe_delta)
    if not _gd_passes(inst, ctx, [rho, eta]):
        return False
    c1 = primal_integral_cost(gd_run(inst, rho)).value
    c2 = primal_integral_cost(gd_run(inst, eta)).value
    rec.check(abs(c1 - c2), ctx.C, lambda: {"instance": inst.to_dict(), "rho": rho, "eta": eta, "costs": [c1, c2]},
              abs_tol=COST_TOL)
    return True


def _cg_primal_integral_spacing(setup, inst, rng, rec):
    ctx = setup.ctx
    rho1 = float(rng.uniform(*ctx.rho_interval))
    eta1 = float(rng.uniform(*ctx.eta_interval))
    d_rho, d_eta = cg_safe_deltas(ctx, rho1, eta1)
    rho2 = min(rho1 + _step(rng, d_rho), ctx.rho_interval[1])
    eta2 = min(eta1 + _step(rng, d_eta), ctx.eta_interval[1])
    if not _cg_passes(inst, ctx, [rho1, rho2], [eta1, eta2]):
        return False
    c1 = primal_integral_cost(cg_run(inst, rho1, eta1)).value
    c2 = primal_integral_cost(cg_run(inst, rho2, eta2)).value
    rec.check(abs(c1 - c2), ctx.C,
              lambda: {"instance": inst.to_dict(), "rho": [rho1, rho2], "eta": [eta1, eta2], "costs": [c1, c2]},
              abs_tol=COST_TOL)
    return True


SUITES = {
    "gd_trajectory_divergence": ("gd", _gd_trajectory_divergence),
    "cg_start_lipschitz": ("cg", _cg_start_lipschitz),
    "cg_parameter_divergence": ("cg", _cg_parameter_divergence),
    "gd_iteration_count_spacing": ("gd", _gd_iteration_count_spacing),
    "gd_primal_integral_spacing": ("gd", _gd_primal_integral_spacing),
    "cg_primal_integral_spacing": ("cg", _cg_primal_integral_spacing),
}


def make_setup(family: str, seed: int, overrides: dict | None = None) -> _Setup:
    base = GD_DEFAULTS if family == "gd" else CG_DEFAULTS
    overrides = overrides or {}
    dist_d = {**base["distribution"], **overrides.get("distribution", {})}
    ctx_d = {**base["context"], **overrides.get("context", {})}
    dist = InstanceDistribution(
        seed=derive_seed(seed, "verify", family),
        dimension=int(dist_d["dimension"]),
        eigenvalue_range=tuple(dist_d["eigenvalue_range"]),
        norm_range=tuple(dist_d["norm_range"]),
        nu=dist_d.get("nu"),
    )
    ctx = CertificateContext.from_dict(ctx_d)
    return _Setup(dist, ctx, ceil_tol(horizon(ctx)))


def run_suite(name: str, draws: int, seed: int = 0, overrides: dict | None = None,
              max_attempts: int | None = None) -> SuiteResult:
    """Run ``draws`` assumption-passing draws of suite ``name``.

    Draws whose instance or parameters fail the contraction check are
    skipped and retried with the next instance, up to ``max_attempts``.
    """
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    if draws < 0:
        raise ValueError("draws must be non-negative")
    family, fn = SUITES[name]
    result = SuiteResult(name, "no draws", 0, 0)
    if draws == 0:
        return result
    setup = make_setup(family, seed, overrides)
    rec = _Recorder(result)
    limit = max_attempts if max_attempts is not None else 20 * draws + 100
    while result.draws < draws and result.attempts < limit:
        idx = result.attempts
        result.attempts += 1
        inst: ProblemInstance = generate_instance(setup.dist, idx)
        if fn(setup, inst, rng_for(seed, "verify", name, idx), rec):
            result.draws += 1
    if result.draws == 0:
        result.status = "no draws"
    else:
        result.status = "pass" if result.violation_count == 0 else "fail"
    return result


def run_suites(spec: dict, seed: int = 0) -> dict:
    """``spec`` maps suite names to ``{"draws": n}``; optional ``gd``/``cg`` blocks override defaults."""
    suites = spec.get("suites", {name: {"draws": 1000} for name in SUITES})
    results = []
    for name, opts in suites.items():
        family = SUITES[name][0] if name in SUITES else None
        overrides = spec.get(family, {}) if family else {}
        results.append(run_suite(name, int(opts.get("draws", 1000)), seed, overrides).to_dict())
    failed = any(r["status"] == "fail" for r in results)
    return {"seed": seed, "status": "fail" if failed else "pass", "suites": results}

