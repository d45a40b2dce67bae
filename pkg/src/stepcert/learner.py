"""Parameter nets, ERM selection, and the sampling experiments built on them.

Batch evaluation works in each instance's eigenbasis: with ``y = U z`` the
GD and CG updates act coordinate-wise (``y <- y - rho * lam * y ...``), the
norms of iterates are unchanged and ``|Q z| = |lam * y|``.  That lets one
array pass score every (config, instance) pair without forming ``Q``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from stepcert.bounds import (
    FINITE_CLASS,
    CertificateContext,
    OutOfScopeError,
    cg_net_spacings,
    default_max_iters,
    gd_cost_safe_delta,
    gd_iter_safe_delta,
    pseudo_dimension_bound,
    sample_complexity,
)
from stepcert.costs import Measure, cost_upper_bound, evaluate
from stepcert.instances import DIVERGENCE_FACTOR, InstanceDistribution, spectral_batch
from stepcert.iterators import DEFAULT_MAX_ITERS, AlgorithmConfig, DivergenceError, Termination, run
from stepcert.seeding import derive_seed

REFERENCE_SAMPLES = 100_000
K_GRID_FACTOR = 2.0 ** 0.25
UNIFORM_MIN = "uniform-min"
PAPER_MAX = "paper-max"
_CHUNK = 8192
# caps each (configs, instances, dim) work array at about 32 MB
_BATCH_ELEMENTS = 1 << 22


# ---------------------------------------------------------------- nets

@dataclass(frozen=True)
class ParameterNet:
    axis: str
    spacing_K: float
    points: tuple[float, ...]
    interval: tuple[float, float]

    def __len__(self):
        return len(self.points)

    def nearest(self, x: float) -> float:
        pts = np.asarray(self.points)
        return float(pts[np.abs(pts - x).argmin()])

    def to_dict(self) -> dict:
        return {"axis": self.axis, "spacing_K": self.spacing_K, "interval": list(self.interval),
                "points": list(self.points)}


def build_net(interval, K: float, axis: str = "rho") -> ParameterNet:
    """All integer multiples of ``K`` in ``interval`` plus both endpoints."""
    lo, hi = map(float, interval)
    if not K > 0:
        raise ValueError(f"spacing must be positive, got {K}")
    if lo > hi:
        raise ValueError(f"empty interval {interval}")
    if K > hi - lo:
        if hi > lo:
            warnings.warn(f"spacing {K:.3g} exceeds interval width {hi - lo:.3g}; net is the endpoints only",
                          stacklevel=2)
        return ParameterNet(axis, float(K), tuple(sorted({lo, hi})), (lo, hi))
    tol = 1e-9
    n_lo = math.ceil(lo / K - tol)
    n_hi = math.floor(hi / K + tol)
    points = [n * K for n in range(n_lo, n_hi + 1)]
    # multiples that land on an endpoint up to rounding are replaced by it
    points = [p for p in points if abs(p - lo) > tol * K and abs(p - hi) > tol * K and lo < p < hi]
    return ParameterNet(axis, float(K), tuple(sorted({lo, hi, *points})), (lo, hi))


def gd_spacing(ctx: CertificateContext, cost_variant) -> float:
    rho_u = ctx.rho_interval[1]
    if Measure.parse(cost_variant) is Measure.ITERATION_COUNT:
        return gd_iter_safe_delta(ctx, rho_u)
    return gd_cost_safe_delta(ctx, rho_u)


def build_gd_net(ctx: CertificateContext, cost_variant) -> ParameterNet:
    """Net whose spacing is the variant's safe perturbation at ``rho_u``."""
    return build_net(ctx.rho_interval, gd_spacing(ctx, cost_variant), "rho")


def build_cg_nets(ctx: CertificateContext, policy: str = UNIFORM_MIN) -> tuple[ParameterNet, ParameterNet]:
    if not ctx.in_cg_scope:
        raise OutOfScopeError("CG nets need eta_l > L (outside certificate scope)")
    sp = cg_net_spacings(ctx)
    if policy == UNIFORM_MIN:
        k_rho, k_eta = sp.rho_uniform_min, sp.eta_uniform_min
    elif policy == PAPER_MAX:
        k_rho, k_eta = sp.rho_paper_max, sp.eta_paper_max
    else:
        raise ValueError(f"unknown net policy {policy!r}")
    return build_net(ctx.rho_interval, k_rho, "rho"), build_net(ctx.eta_interval, k_eta, "eta")


def net_configs(rho_net: ParameterNet, eta_net: ParameterNet | None = None) -> list[AlgorithmConfig]:
    if eta_net is None:
        return [AlgorithmConfig.gd(r, rho_net.interval) for r in rho_net.points]
    return [AlgorithmConfig.cg(r, e, rho_net.interval, eta_net.interval)
            for r in rho_net.points for e in eta_net.points]


# ---------------------------------------------------------------- batch costs

def _config_arrays(configs):
    rhos = np.array([c.rho for c in configs], dtype=float)
    etas = np.array([c.eta if c.method == "CG" else 0.0 for c in configs], dtype=float)
    return rhos, etas


def batch_costs(lam, y0, nu: float, Z: float, configs, measure, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    """``(len(configs), count)`` cost table for instances given in eigen-coordinates.

    Diverged runs cost ``inf``.  A run cut off by ``max_iters`` is scored on
    the iterates it produced (its count is ``max_iters``).
    """
    measure = Measure.parse(measure)
    rhos, etas = _config_arrays(configs)
    rho = rhos[:, None, None]
    eta = etas[:, None, None]
    lam = np.asarray(lam, dtype=float)[None]
    y = np.broadcast_to(np.asarray(y0, dtype=float)[None], (len(configs),) + np.shape(y0)).copy()
    prev = y.copy()
    total = np.zeros(y.shape[:2])
    steps = np.zeros(y.shape[:2], dtype=np.int64)
    diverged = np.zeros(y.shape[:2], dtype=bool)
    active = np.linalg.norm(lam * y, axis=2) > nu
    limit = DIVERGENCE_FACTOR * Z
    for k in range(max_iters):
        if not active.any():
            break
        new = y - rho * lam * y
        if k > 0:
            new -= eta * (y - prev)
        mask = active[..., None]
        prev = np.where(mask, y, prev)
        y = np.where(mask, new, y)
        steps += active
        norm = np.linalg.norm(y, axis=2)
        bad = active & ~(norm <= limit)
        diverged |= bad
        total += np.where(active & ~bad, norm, 0.0)
        active &= ~bad & (np.linalg.norm(lam * y, axis=2) > nu)
    values = steps.astype(float) if measure is Measure.ITERATION_COUNT else total
    return np.where(diverged, np.inf, values)


def cost_table(dist: InstanceDistribution, configs, measure, start: int = 0, count: int | None = None,
               max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    """Costs of ``configs`` on instances ``start .. start+count-1`` of ``dist``."""
    count = 1 if count is None else count
    out = np.empty((len(configs), count))
    chunk = max(1, min(_CHUNK, _BATCH_ELEMENTS // (len(configs) * dist.dimension)))
    for off in range(0, count, chunk):
        n = min(chunk, count - off)
        lam, y0 = spectral_batch(dist, start + off, n)
        out[:, off:off + n] = batch_costs(lam, y0, dist.nu, dist.Z, configs, measure, max_iters)
    return out


def scalar_cost_table(configs, samples, measure, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    """Same table as :func:`batch_costs` from explicit runs in the original basis."""
    measure = Measure.parse(measure)
    out = np.empty((len(configs), len(samples)))
    for i, cfg in enumerate(configs):
        for j, inst in enumerate(samples):
            try:
                traj = run(inst, cfg, max_iters)
            except DivergenceError:
                out[i, j] = np.inf
                continue
            if measure is Measure.ITERATION_COUNT and traj.termination is Termination.MAX_ITERATIONS:
                out[i, j] = float(traj.M)
            else:
                out[i, j] = evaluate(traj, measure).value
    return out


# ---------------------------------------------------------------- ERM

@dataclass(frozen=True)
class LearnOutcome:
    selected_config: AlgorithmConfig
    empirical_costs: tuple[float, ...]
    sample_size_m: int
    holdout_expected_cost: float | None = None
    generalization_gap: float | None = None
    target: tuple[float, float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "selected_config": self.selected_config.to_dict(),
            "empirical_costs": [_json_float(c) for c in self.empirical_costs],
            "sample_size_m": self.sample_size_m,
            "holdout_expected_cost": self.holdout_expected_cost,
            "generalization_gap": self.generalization_gap,
            "target": None if self.target is None else list(self.target),
        }


def _json_float(x):
    return None if not np.isfinite(x) else float(x)


def _tie_order(configs) -> list[int]:
    return sorted(range(len(configs)), key=lambda i: (configs[i].rho, configs[i].eta))


def erm_index(configs, table: np.ndarray) -> int:
    """Index of the smallest row mean; ties go to the smallest ``rho`` then ``eta``."""
    means = np.asarray(table).mean(axis=1)
    if not np.isfinite(means).any():
        raise DivergenceError(-1, float("inf"))
    best = float(np.min(means))
    return next(i for i in _tie_order(configs) if means[i] == best)


def erm_select(net_configs, samples, measure, max_iters: int = DEFAULT_MAX_ITERS) -> LearnOutcome:
    if not net_configs or not samples:
        raise ValueError("ERM needs at least one config and one sample")
    table = scalar_cost_table(net_configs, samples, measure, max_iters)
    idx = erm_index(net_configs, table)
    return LearnOutcome(net_configs[idx], tuple(float(v) for v in table.mean(axis=1)), len(samples))


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class Reference:
    """Monte-Carlo expected cost per config and its ``3 std / sqrt(N)`` noise floor."""

    means: np.ndarray
    stds: np.ndarray
    samples: int

    @property
    def noise(self) -> np.ndarray:
        return 3.0 * self.stds / math.sqrt(self.samples)

    @property
    def noise_floor(self) -> float:
        finite = self.noise[np.isfinite(self.noise)]
        return float(finite.max()) if finite.size else float("inf")


def reference_costs(dist: InstanceDistribution, configs, measure, samples: int = REFERENCE_SAMPLES,
                    max_iters: int = DEFAULT_MAX_ITERS) -> Reference:
    ref_dist = dist.with_seed(derive_seed(dist.seed, "reference"))
    s = np.zeros(len(configs))
    s2 = np.zeros(len(configs))
    for off in range(0, samples, _CHUNK):
        n = min(_CHUNK, samples - off)
        t = cost_table(ref_dist, configs, measure, off, n, max_iters)
        s += t.sum(axis=1)
        s2 += (t * t).sum(axis=1)
    with np.errstate(invalid="ignore"):
        means = s / samples
        var = np.maximum(s2 / samples - means**2, 0.0) * samples / max(samples - 1, 1)
    return Reference(means, np.sqrt(var), samples)


class _TrialPool:
    """Per-trial instance streams whose running sums extend without recomputation."""

    def __init__(self, dist, configs, measure, trials, label, max_iters):
        self.dists = [dist.with_seed(derive_seed(dist.seed, label, t)) for t in range(trials)]
        self.configs = configs
        self.measure = measure
        self.max_iters = max_iters
        self.sums = np.zeros((trials, len(configs)))
        self.size = 0

    def extend_to(self, m: int) -> np.ndarray:
        if m > self.size:
            for t, d in enumerate(self.dists):
                self.sums[t] += cost_table(d, self.configs, self.measure, self.size, m - self.size,
                                           self.max_iters).sum(axis=1)
            self.size = m
        return self.sums / m


def uniform_convergence_trial(dist, net_configs, measure, m: int, trials: int, epsilon: float,
                              reference: Reference | None = None,
                              max_iters: int = DEFAULT_MAX_ITERS) -> float:
    """Fraction of ``trials`` m-samples whose worst per-config gap to the reference is below ``epsilon``."""
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    if reference is None:
        reference = reference_costs(dist, net_configs, measure, max_iters=max_iters)
    pool = _TrialPool(dist, net_configs, measure, trials, "uniform", max_iters)
    return _uc_fraction(pool.extend_to(m), reference, epsilon)


def _uc_fraction(means: np.ndarray, reference: Reference, epsilon: float) -> float:
    gaps = np.abs(means - reference.means[None, :])
    gaps = np.where(np.isfinite(gaps), gaps, np.inf)
    return float((gaps.max(axis=1) < epsilon).mean())


@dataclass
class Calibration:
    k: float | None
    m: int | None
    fraction: float | None
    epsilon: float
    delta: float
    d: float
    range_H: float
    trials: int
    path: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"k": self.k, "m": self.m, "fraction": self.fraction, "epsilon": self.epsilon,
                "delta": self.delta, "d": self.d, "range_H": self.range_H, "trials": self.trials,
                "path": self.path}


def calibrate_k(dist, ctx: CertificateContext, net_configs, measure, trials: int = 200,
                epsilon: float | None = None, reference: Reference | None = None,
                k_min: float = 2.0 ** -16, k_max: float = 4.0,
                max_iters: int | None = None) -> Calibration:
    """Smallest ``k`` on a ``2^(1/4)`` geometric grid whose sample size passes uniform convergence.

    ``m(k)`` uses ``d = log2 |net|`` and the a-priori cost range.  Each trial's
    instance stream is fixed, so larger ``m`` extends earlier samples.
    """
    eps = ctx.epsilon if epsilon is None else epsilon
    max_iters = default_max_iters(ctx) if max_iters is None else max_iters
    if reference is None:
        reference = reference_costs(dist, net_configs, measure, max_iters=max_iters)
    d = pseudo_dimension_bound(len(net_configs), FINITE_CLASS)
    range_H = cost_upper_bound(ctx, measure)
    pool = _TrialPool(dist, net_configs, measure, trials, f"calibrate/{eps!r}", max_iters)
    cal = Calibration(None, None, None, eps, ctx.delta, d, range_H, trials)
    k = k_min
    last_m = 0
    while k <= k_max * (1 + 1e-12):
        m = sample_complexity(ctx, d, range_H, epsilon=eps, k=k)
        if m != last_m:
            frac = _uc_fraction(pool.extend_to(m), reference, eps)
            cal.path.append({"k": k, "m": m, "fraction": frac})
            last_m = m
            if frac >= 1.0 - ctx.delta:
                cal.k, cal.m, cal.fraction = k, m, frac
                return cal
        k *= K_GRID_FACTOR
    return cal


# ---------------------------------------------------------------- learning experiment

@dataclass
class ExperimentResult:
    report: dict
    configs: list
    reference: Reference

    def cost_rows(self):
        """``(rho, eta, expected_cost, noise)`` per net config, for plotting."""
        return [(c.rho, c.eta, float(mu), float(nz))
                for c, mu, nz in zip(self.configs, self.reference.means, self.reference.noise)]


def learning_experiment(dist: InstanceDistribution, ctx: CertificateContext, method: str, cost_variant,
                        trials: int, k=None, policy: str = UNIFORM_MIN,
                        reference_samples: int = REFERENCE_SAMPLES, calibration_trials: int = 200,
                        spacings: tuple[float, float] | None = None,
                        max_iters: int | None = None) -> ExperimentResult:
    """Sample, select by ERM, and score the pick against Monte-Carlo expectations.

    ``k`` defaults to the context's constant; pass ``"calibrate"`` to run
    :func:`calibrate_k` first.  ``max_iters`` defaults to four horizon ceilings.  A trial fails when the pick's expected cost
    exceeds the net optimum by more than the target slack (``C + eps``, or
    ``1 + eps`` for iteration counts) plus the reference noise floor.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    max_iters = default_max_iters(ctx) if max_iters is None else max_iters
    measure = Measure.parse(cost_variant)
    if method == "GD":
        rho_net = build_gd_net(ctx, measure)
        eta_net = None
        scope = "certified"
    elif method == "CG":
        if ctx.in_cg_scope:
            rho_net, eta_net = build_cg_nets(ctx, policy)
            scope = "certified"
        elif spacings is not None:
            rho_net = build_net(ctx.rho_interval, spacings[0], "rho")
            eta_net = build_net(ctx.eta_interval, spacings[1], "eta")
            scope = "empirical only: no net-spacing guarantee"
        else:
            raise OutOfScopeError("eta_l <= L is outside certificate scope; pass explicit net spacings")
        if measure is not Measure.PRIMAL_INTEGRAL:
            scope = "empirical only: no net-spacing guarantee"
    else:
        raise ValueError(f"unknown method {method!r}")
    configs = net_configs(rho_net, eta_net)
    reference = reference_costs(dist, configs, measure, reference_samples, max_iters)

    calibration = None
    if k == "calibrate":
        calibration = calibrate_k(dist, ctx, configs, measure, calibration_trials, reference=reference,
                                  max_iters=max_iters)
        if calibration.k is None:
            raise RuntimeError("calibration found no k on the grid")
        k_used = calibration.k
    else:
        k_used = ctx.k if k is None else float(k)

    d = pseudo_dimension_bound(len(configs), FINITE_CLASS)
    range_H = cost_upper_bound(ctx, measure)
    m = sample_complexity(ctx, d, range_H, k=k_used)
    slack = (1.0 if measure is Measure.ITERATION_COUNT else ctx.C) + ctx.epsilon
    tolerance = slack + reference.noise_floor
    best = float(np.min(reference.means))

    pool = _TrialPool(dist, configs, measure, trials, "learn", max_iters)
    means = pool.extend_to(m)
    outcomes = []
    for t in range(trials):
        idx = erm_index(configs, means[t][:, None])
        excess = float(reference.means[idx] - best)
        outcomes.append({"trial": t, "selected": configs[idx].to_dict(), "empirical_cost": float(means[t, idx]),
                         "expected_cost": float(reference.means[idx]), "excess": excess,
                         "failed": bool(excess > tolerance)})
    failures = sum(o["failed"] for o in outcomes)
    report = {
        "method": method,
        "cost_variant": measure.value,
        "scope": scope,
        "policy": policy if method == "CG" else None,
        "context": ctx.to_dict(),
        "distribution": dist.to_dict(),
        "nets": [n.to_dict() for n in (rho_net, eta_net) if n is not None],
        "net_size": len(configs),
        "pseudo_dimension": d,
        "range_H": range_H,
        "k": k_used,
        "calibration": None if calibration is None else calibration.to_dict(),
        "m": m,
        "trials": trials,
        "max_iters": max_iters,
        "tolerance": tolerance,
        "noise_floor": reference.noise_floor,
        "reference_samples": reference.samples,
        "net_optimum": best,
        "reference_means": [_json_float(x) for x in reference.means],
        "failures": failures,
        "failure_frequency": failures / trials,
        "success_frequency": 1.0 - failures / trials,
        "per_trial": outcomes,
    }
    return ExperimentResult(report, configs, reference)
