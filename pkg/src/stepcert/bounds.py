"""Closed-form certificate constants for GD and CG step-size nets.

Everything here is a pure function of a :class:`CertificateContext` and the
parameters being certified.  The CG sensitivity bounds are built from the
second-order recurrence ``x_n = a x_{n-1} + b x_{n-2}`` with ``a = D(rho) + eta``
and ``b = eta``; its closed form ``c1 r1^n + c2 r2^n`` appears throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

BETA_CAP = 0.999
FSTAR_GRID = 1024
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class OutOfScopeError(ValueError):
    """Raised when a bound's formula is undefined for the given parameters."""


def ceil_tol(x: float, rel: float = 1e-9) -> int:
    """``ceil`` that treats values within ``rel`` of an integer as that integer."""
    r = round(x)
    if abs(x - r) <= rel * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class CertificateContext:
    L: float
    Z: float
    nu: float
    beta: float
    rho_interval: tuple[float, float]
    eta_interval: tuple[float, float] | None = None
    C: float = 0.1
    epsilon: float = 0.1
    delta: float = 0.1
    k: float = 1.0

    def __post_init__(self):
        for name in ("L", "Z", "nu", "C", "epsilon", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.nu < self.L * self.Z:
            raise ValueError(f"need nu < L*Z for a positive horizon, got nu={self.nu}, L*Z={self.L * self.Z}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.beta > BETA_CAP:
            warnings.warn(f"beta={self.beta} capped at {BETA_CAP}", stacklevel=3)
            object.__setattr__(self, "beta", BETA_CAP)
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        lo, hi = self.rho_interval
        if not 0 < lo <= hi:
            raise ValueError(f"need 0 < rho_l <= rho_u, got {self.rho_interval}")
        object.__setattr__(self, "rho_interval", (float(lo), float(hi)))
        if self.eta_interval is not None:
            lo, hi = self.eta_interval
            if not 0 < lo <= hi:
                raise ValueError(f"need 0 < eta_l <= eta_u, got {self.eta_interval}")
            object.__setattr__(self, "eta_interval", (float(lo), float(hi)))

    @property
    def in_cg_scope(self) -> bool:
        """Whether the eta-sensitivity formulas are defined (``eta_l > L``)."""
        return self.eta_interval is not None and self.eta_interval[0] > self.L

    def replace(self, **changes) -> "CertificateContext":
        d = self.to_dict()
        d.update(changes)
        return CertificateContext.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "L": self.L, "Z": self.Z, "nu": self.nu, "beta": self.beta,
            "rho_interval": list(self.rho_interval),
            "eta_interval": None if self.eta_interval is None else list(self.eta_interval),
            "C": self.C, "epsilon": self.epsilon, "delta": self.delta, "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CertificateContext":
        eta = d.get("eta_interval")
        return cls(
            L=float(d["L"]), Z=float(d["Z"]), nu=float(d["nu"]), beta=float(d["beta"]),
            rho_interval=tuple(d["rho_interval"]),
            eta_interval=None if eta is None else tuple(eta),
            C=float(d.get("C", 0.1)), epsilon=float(d.get("epsilon", 0.1)),
            delta=float(d.get("delta", 0.1)), k=float(d.get("k", d.get("uc_constant_k", 1.0))),
        )


# ---------------------------------------------------------------- GD constants

def d_factor(rho: float, L: float) -> float:
    """Per-step expansion ``max(1, L rho - 1)`` of a GD map's Lipschitz constant."""
    return max(1.0, L * rho - 1.0)


def horizon(ctx: CertificateContext) -> float:
    """Real-valued bound ``log(nu / LZ) / log(1 - beta)`` on the iteration count."""
    return math.log(ctx.nu / (ctx.L * ctx.Z)) / math.log1p(-ctx.beta)


def default_max_iters(ctx: CertificateContext) -> int:
    """Iteration cap for runs tied to ``ctx``: four times the horizon ceiling."""
    return max(1, 4 * ceil_tol(horizon(ctx)))


def gd_iter_safe_delta(ctx: CertificateContext, rho: float) -> float:
    """Step-size perturbation that moves the iteration count by at most one."""
    D = d_factor(rho, ctx.L)
    return ctx.nu * ctx.beta**2 / (ctx.L * ctx.Z) * D ** (-horizon(ctx))


def gd_traj_error_bound(ctx: CertificateContext, rho: float, eta: float, j: int) -> float:
    if eta < rho:
        raise ValueError("bound is stated for rho <= eta")
    return (eta - rho) * d_factor(rho, ctx.L) ** j * ctx.L * ctx.Z / ctx.beta


def _geometric_ratio(D: float, H: float) -> float:
    # (1 - D) / (1 - D^H), with the D -> 1 limit 1/H
    if D == 1.0:
        return 1.0 / H
    return (D - 1.0) / math.expm1(H * math.log(D))


def cost_spacing(beta, L, Z, D, H, C) -> float:
    return beta / (L * Z) * _geometric_ratio(D, H) / D * C


def gd_cost_safe_delta(ctx: CertificateContext, rho: float) -> float:
    """Step-size perturbation that moves the primal-integral cost by at most ``C``."""
    D = d_factor(rho, ctx.L)
    return cost_spacing(ctx.beta, ctx.L, ctx.Z, D, horizon(ctx), ctx.C)


# ---------------------------------------------------------------- recurrences

@dataclass(frozen=True)
class RecurrencePair:
    """Roots ``r1 >= r2`` of ``r^2 - a r - b = 0``."""

    a: float
    b: float
    r1: float
    r2: float


def recurrence_roots(a: float, b: float) -> RecurrencePair:
    disc = a * a + 4.0 * b
    if disc < 0:
        raise ValueError(f"complex roots: a^2 + 4b = {disc} < 0 (not reachable with b = eta > 0)")
    s = math.sqrt(disc)
    # take the root that avoids cancellation, recover the other from r1 r2 = -b
    if a >= 0:
        r1 = 0.5 * (a + s)
        r2 = -b / r1 if r1 != 0 else 0.0
    else:
        r2 = 0.5 * (a - s)
        r1 = -b / r2
    return RecurrencePair(a, b, r1, r2)


def recurrence_solution(x0: float, x1: float, roots: RecurrencePair, n: int) -> float:
    """``x_n`` for ``x_n = a x_{n-1} + b x_{n-2}`` from its closed form."""
    r1, r2 = roots.r1, roots.r2
    if r1 == r2:
        raise ValueError("repeated characteristic root")
    c1 = (x1 - x0 * r2) / (r1 - r2)
    c2 = (x0 * r1 - x1) / (r1 - r2)
    return c1 * r1**n + c2 * r2**n


def pair_term(R0: float, R1: float, roots: RecurrencePair, j: int) -> float:
    r1, r2 = roots.r1, roots.r2
    return (R0 * r2 - R1) / (r2 - r1) * r1**j + (R0 * r1 - R1) / (r1 - r2) * r2**j


def pair_star(R0: float, R1: float, roots: RecurrencePair) -> float:
    r1, r2 = roots.r1, roots.r2
    return (R0 * r2 - R1) / (r2 - r1) + abs((R0 * r1 - R1) / (r1 - r2))


def geometric_factor(r1: float, H: float) -> float:
    """``r1 (1 - r1^H) / (1 - r1)``; equals ``r1 + ... + r1^H`` for integer H."""
    if r1 == 1.0:
        raise ValueError("geometric factor undefined at r1 = 1")
    return r1 * (1.0 - r1**H) / (1.0 - r1)


# ---------------------------------------------------------------- CG constants

def cg_step_lipschitz_bound(rho: float, eta: float, L: float, dcurr: float, dprev: float) -> float:
    """Bound on ``|g(w_n, w_{n-1}) - g(y_n, y_{n-1})|`` from the two input gaps."""
    if dcurr < 0 or dprev < 0:
        raise ValueError("distances must be non-negative")
    return (d_factor(rho, L) + eta) * dcurr + eta * dprev


def _cg_roots(rho: float, eta: float, L: float) -> RecurrencePair:
    return recurrence_roots(d_factor(rho, L) + eta, eta)


def cg_traj_lipschitz_F(rho: float, eta: float, L: float, n: int) -> float:
    D = d_factor(rho, L)
    roots = _cg_roots(rho, eta, L)
    r1, r2 = roots.r1, roots.r2
    return (D - r2) / (r1 - r2) * r1**n + (D - r1) / (r2 - r1) * r2**n


@dataclass(frozen=True)
class RhoSensitivity:
    denominator: float
    R0: float
    R1: float
    roots: RecurrencePair


def rho_sensitivity_constants(ctx: CertificateContext, rho1: float, eta: float) -> RhoSensitivity:
    L, Z, beta = ctx.L, ctx.Z, ctx.beta
    D = d_factor(rho1, L)
    q = 1.0 - beta
    denom = (D + eta) * q + eta - q * q
    if not denom > 0:
        raise OutOfScopeError(f"rho-sensitivity denominator {denom} is not positive")
    R0 = L * Z * q**2 / denom
    R1 = D * L * Z / beta + L * Z * q**3 / denom
    return RhoSensitivity(denom, R0, R1, _cg_roots(rho1, eta, L))


def cg_rho_sensitivity_G(ctx: CertificateContext, rho1: float, eta: float, j: int) -> float:
    """Per-unit-``rho`` growth of the gap between two CG runs at step ``j``.

    Stated for ``j >= 2``; ``j = 1`` is evaluated by the same closed form.
    """
    if j < 1:
        raise ValueError("j must be at least 1")
    c = rho_sensitivity_constants(ctx, rho1, eta)
    return pair_term(c.R0, c.R1, c.roots, j) - ctx.L * ctx.Z * (1.0 - ctx.beta) ** (j + 2) / c.denominator


@dataclass(frozen=True)
class FStar:
    """Maximum of the consecutive-gap bound over ``n < j`` and the eta interval."""

    value: float
    eta: float
    n: int
    grid_value: float
    slack: float


def _fstar_phi(n, eta, rho, L, Z):
    return eta**n * (rho * L * Z + rho * Z * L / (eta - L)) - rho * Z / (eta - L) * L ** (n + 1)


def cg_eta_inner_max_Fstar(ctx: CertificateContext, rho: float, j: int, grid: int = FSTAR_GRID) -> FStar:
    """Maximize the gap bound over integer ``n in [0, j)`` and ``eta`` in the interval.

    ``n`` is enumerated; ``eta`` is searched on a ``grid``-point lattice and the
    best cell of every ``n`` is refined by a golden-section search.  ``slack``
    is the largest change of the maximizing row between neighbouring grid
    points, a crude certificate for what the lattice could have missed.
    """
    if ctx.eta_interval is None:
        raise OutOfScopeError("context has no eta interval")
    e_lo, e_hi = ctx.eta_interval
    if not e_lo > ctx.L:
        raise OutOfScopeError(f"eta_l={e_lo} must exceed L={ctx.L}: the bound divides by (eta - L)")
    if j < 1:
        raise ValueError("j must be at least 1")
    L, Z = ctx.L, ctx.Z
    ns = np.arange(j)[:, None].astype(float)
    etas = np.linspace(e_lo, e_hi, grid) if e_hi > e_lo else np.array([e_lo])
    vals = _fstar_phi(ns, etas[None, :], rho, L, Z)
    best_idx = vals.argmax(axis=1)
    grid_best = vals[np.arange(j), best_idx]

    # vectorized golden-section refinement of each row around its best cell
    lo = etas[np.maximum(best_idx - 1, 0)]
    hi = etas[np.minimum(best_idx + 1, etas.size - 1)]
    n_flat = ns[:, 0]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = _fstar_phi(n_flat, x1, rho, L, Z)
    f2 = _fstar_phi(n_flat, x2, rho, L, Z)
    for _ in range(48):
        left = f1 > f2  # maximum lies in [lo, x2]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1 = _fstar_phi(n_flat, x1, rho, L, Z)
        f2 = _fstar_phi(n_flat, x2, rho, L, Z)
    mid = 0.5 * (lo + hi)
    refined = _fstar_phi(n_flat, mid, rho, L, Z)
    use_refined = refined > grid_best
    row_best = np.where(use_refined, refined, grid_best)
    row_eta = np.where(use_refined, mid, etas[best_idx])
    n_star = int(row_best.argmax())
    row = vals[n_star]
    slack = float(np.abs(np.diff(row)).max()) if row.size > 1 else 0.0
    return FStar(float(row_best[n_star]), float(row_eta[n_star]), n_star, float(grid_best.max()), slack)


@dataclass(frozen=True)
class EtaSensitivity:
    fstar: float
    denominator: float
    R0: float
    R1: float
    roots: RecurrencePair


def eta_sensitivity_constants(ctx: CertificateContext, rho: float, eta1: float, fstar: float) -> EtaSensitivity:
    if not eta1 > 0:
        raise ValueError("eta1 must be positive")
    D = d_factor(rho, ctx.L)
    denom = D + 2.0 * eta1 - 1.0
    R0 = fstar / denom
    R1 = fstar / eta1 * (1.0 + 1.0 / denom)
    return EtaSensitivity(fstar, denom, R0, R1, _cg_roots(rho, eta1, ctx.L))


def cg_eta_sensitivity_H(ctx: CertificateContext, rho: float, eta1: float, j: int,
                         fstar: float | None = None) -> float:
    """Per-unit-``eta`` growth of the gap between two CG runs at step ``j``.

    ``fstar`` defaults to :func:`cg_eta_inner_max_Fstar` at the same ``j``.
    """
    if j < 1:
        raise ValueError("j must be at least 1")
    if fstar is None:
        fstar = cg_eta_inner_max_Fstar(ctx, rho, j).value
    c = eta_sensitivity_constants(ctx, rho, eta1, fstar)
    return pair_term(c.R0, c.R1, c.roots, j) - fstar / c.denominator


def cg_combined_bound(ctx: CertificateContext, rho1, rho2, eta1, eta2, j: int) -> float:
    """Gap bound at step ``j`` between CG runs with ``(rho1, eta1)`` and ``(rho2, eta2)``.

    A zero perturbation contributes nothing, so the eta term (and its scope
    requirement) is skipped when ``eta1 == eta2``.
    """
    total = 0.0
    if rho2 != rho1:
        total += abs(rho2 - rho1) * cg_rho_sensitivity_G(ctx, rho1, eta1, j)
    if eta2 != eta1:
        total += abs(eta2 - eta1) * cg_eta_sensitivity_H(ctx, rho1, eta1, j)
    return total


def cg_cost_diff_bound(ctx: CertificateContext, rho1, rho2, eta1, eta2, M: int) -> float:
    """Bound on the primal-integral gap of two CG configurations over ``M`` steps."""
    if M > ceil_tol(horizon(ctx)):
        raise ValueError(f"M={M} exceeds the horizon ceiling {ceil_tol(horizon(ctx))}")
    d_rho, d_eta = abs(rho2 - rho1), abs(eta2 - eta1)
    total = 0.0
    if d_rho:
        g_sum = sum(cg_rho_sensitivity_G(ctx, rho1, eta1, j) for j in range(1, M + 1))
        total += d_rho * (ctx.L * ctx.Z * d_factor(rho1, ctx.L) / ctx.beta + g_sum)
    if d_eta:
        fstar = cg_eta_inner_max_Fstar(ctx, rho1, max(M, 1)).value
        h_sum = sum(cg_eta_sensitivity_H(ctx, rho1, eta1, j, fstar) for j in range(1, M + 1))
        total += d_eta * h_sum
    return total


def g_star(ctx: CertificateContext, rho1: float, eta1: float) -> float:
    """Closed-form upper bound on ``LZ D / beta + sum_{j<=H} G(j)``."""
    c = rho_sensitivity_constants(ctx, rho1, eta1)
    r1 = c.roots.r1
    if r1 == 1.0:
        raise ValueError("r1 = 1 cannot occur for eta > 0")
    H = horizon(ctx)
    return (ctx.L * ctx.Z * d_factor(rho1, ctx.L) / ctx.beta
            + pair_star(c.R0, c.R1, c.roots) * geometric_factor(r1, H))


def h_star_fstar(ctx: CertificateContext, rho1: float) -> FStar:
    return cg_eta_inner_max_Fstar(ctx, rho1, max(ceil_tol(horizon(ctx)), 1))


def h_star(ctx: CertificateContext, rho1: float, eta1: float, fstar: float | None = None) -> float:
    """Closed-form upper bound on ``sum_{j<=H} H(j)``.

    The inner maximum runs over ``n < ceil(H)``, which covers every step the
    sum can reach.
    """
    if fstar is None:
        fstar = h_star_fstar(ctx, rho1).value
    c = eta_sensitivity_constants(ctx, rho1, eta1, fstar)
    return pair_star(c.R0, c.R1, c.roots) * geometric_factor(c.roots.r1, horizon(ctx))


def cg_safe_deltas(ctx: CertificateContext, rho1: float, eta1: float) -> tuple[float, float]:
    return ctx.C / (2.0 * g_star(ctx, rho1, eta1)), ctx.C / (2.0 * h_star(ctx, rho1, eta1))


# ---------------------------------------------------------------- learning theory

FINITE_CLASS = "FiniteClass"
PAPER_PRODUCT = "PaperProduct"


def pseudo_dimension_bound(net_size: int, variant: str = FINITE_CLASS, ctx: CertificateContext | None = None,
                           eta_net_size: int | None = None) -> float:
    """Pseudo-dimension bound for a finite net of configurations.

    ``FiniteClass`` is ``log2`` of the class size (``|N_rho| * |N_eta|`` when
    ``eta_net_size`` is given).  ``PaperProduct`` multiplies the horizon by the
    base-2 log of each net size.
    """
    if net_size < 1 or (eta_net_size is not None and eta_net_size < 1):
        raise ValueError("net sizes must be at least 1")
    if variant == FINITE_CLASS:
        total = net_size * (eta_net_size or 1)
        return math.log2(total)
    if variant == PAPER_PRODUCT:
        if ctx is None:
            raise ValueError("PaperProduct needs a context for the horizon")
        value = horizon(ctx) * math.log2(net_size)
        if eta_net_size is not None:
            value *= math.log2(eta_net_size)
        return value
    raise ValueError(f"unknown variant {variant!r}")


def sample_complexity(ctx: CertificateContext, d: float, range_H: float, epsilon: float | None = None,
                      k: float | None = None) -> int:
    """``ceil(k (range/eps)^2 (d + ln(1/delta)))`` samples for uniform convergence."""
    if d < 0 or not range_H > 0:
        raise ValueError("need d >= 0 and a positive range")
    eps = ctx.epsilon if epsilon is None else epsilon
    kk = ctx.k if k is None else k
    return max(1, ceil_tol(kk * (range_H / eps) ** 2 * (d + math.log(1.0 / ctx.delta))))


@dataclass(frozen=True)
class NetSpacings:
    rho_uniform_min: float
    rho_paper_max: float
    eta_uniform_min: float | None
    eta_paper_max: float | None
    grid: int = field(default=32)


def cg_net_spacings(ctx: CertificateContext, grid: int = 32) -> NetSpacings:
    """``C / (2 G*)`` and ``C / (2 H*)`` over a ``grid x grid`` lattice of the box."""
    if ctx.eta_interval is None:
        raise OutOfScopeError("context has no eta interval")
    rhos = np.linspace(*ctx.rho_interval, grid) if ctx.rho_interval[1] > ctx.rho_interval[0] \
        else np.array([ctx.rho_interval[0]])
    etas = np.linspace(*ctx.eta_interval, grid) if ctx.eta_interval[1] > ctx.eta_interval[0] \
        else np.array([ctx.eta_interval[0]])
    k_rho = np.array([[ctx.C / (2 * g_star(ctx, r, e)) for e in etas] for r in rhos])
    if ctx.in_cg_scope:
        fstars = [h_star_fstar(ctx, r).value for r in rhos]
        k_eta = np.array([[ctx.C / (2 * h_star(ctx, r, e, f)) for e in etas] for r, f in zip(rhos, fstars)])
        eta_min, eta_max = float(k_eta.min()), float(k_eta.max())
    else:
        eta_min = eta_max = None
    return NetSpacings(float(k_rho.min()), float(k_rho.max()), eta_min, eta_max, grid)


# ---------------------------------------------------------------- report

SCOPE_OK = "certified"
SCOPE_OUT = "outside certificate scope"

_PROVENANCE = {
    "D": "max(1, L*rho - 1) at rho_u",
    "H": "log(nu/(L*Z)) / log(1 - beta), real-valued",
    "K_iteration_count": "nu*beta^2/(L*Z) * D^-H",
    "K_primal_integral": "(beta/(L*Z)) * (1-D)/(1-D^H) * C/D, limit 1/H at D = 1",
    "roots": "r^2 - (D+eta) r - eta = 0, r1 >= r2",
    "rho_R0": "L*Z*(1-beta)^2 / Delta, Delta = (D+eta)(1-beta) + eta - (1-beta)^2",
    "rho_R1": "D*L*Z/beta + L*Z*(1-beta)^3 / Delta",
    "rho_Rstar": "(R0 r2 - R1)/(r2 - r1) + |(R0 r1 - R1)/(r1 - r2)|",
    "G_star": "L*Z*D/beta + R* * r1 (1 - r1^H)/(1 - r1)",
    "F_star": "max over n < ceil(H), eta in [eta_l, eta_u] of eta^n (rho L Z + rho Z L/(eta-L)) - rho Z L^(n+1)/(eta-L)",
    "eta_R0": "F* / (D + 2 eta - 1)",
    "eta_R1": "(F*/eta) (1 + 1/(D + 2 eta - 1))",
    "eta_Rstar": "(R0 r2 - R1)/(r2 - r1) + |(R0 r1 - R1)/(r1 - r2)|",
    "H_star": "R*' * r1 (1 - r1^H)/(1 - r1)",
    "delta_rho": "C / (2 G*)",
    "delta_eta": "C / (2 H*)",
    "net_spacing": "C/(2G*), C/(2H*) over a 32x32 grid of the box; uniform-min = min, paper-max = max",
    "pseudo_dimension_FiniteClass": "log2 |net|",
    "pseudo_dimension_PaperProduct": "H * log2|N| (GD), H * log2|N_rho| * log2|N_eta| (CG)",
    "sample_complexity": "ceil(k (range/eps)^2 (d + ln(1/delta))), range = H (counts) or Z*H (primal integral)",
}


def _net_size(interval, K) -> int:
    # mirrors the net builder: multiples inside plus both endpoints
    lo, hi = interval
    if K > hi - lo:
        return 1 if hi == lo else 2
    n_lo = math.ceil(lo / K - 1e-9)
    n_hi = math.floor(hi / K + 1e-9)
    inner = sum(1 for n in range(n_lo, n_hi + 1) if lo < n * K < hi
                and abs(n * K - lo) > 1e-9 * K and abs(n * K - hi) > 1e-9 * K)
    return inner + 2


def _learning_block(ctx, sizes, measure_range):
    d_finite = pseudo_dimension_bound(sizes[0], FINITE_CLASS, eta_net_size=sizes[1] if len(sizes) > 1 else None)
    d_paper = pseudo_dimension_bound(sizes[0], PAPER_PRODUCT, ctx, sizes[1] if len(sizes) > 1 else None)
    return {
        "net_sizes": list(sizes),
        "pseudo_dimension": {FINITE_CLASS: d_finite, PAPER_PRODUCT: d_paper},
        "range": measure_range,
        "sample_complexity": {FINITE_CLASS: sample_complexity(ctx, d_finite, measure_range),
                              PAPER_PRODUCT: sample_complexity(ctx, d_paper, measure_range)},
    }


def certificate_report(ctx: CertificateContext, rho1: float | None = None, eta1: float | None = None) -> dict:
    """Every constant for ``ctx`` with the formula used for each.

    CG constants are evaluated at ``(rho1, eta1)``, defaulting to the lower
    corner of the box.  When ``eta_l <= L`` the eta-side fields are null and
    ``scope`` says so; the rho-side fields do not need that condition.
    """
    H = horizon(ctx)
    rho_u = ctx.rho_interval[1]
    D = d_factor(rho_u, ctx.L)
    k_iter = gd_iter_safe_delta(ctx, rho_u)
    k_cost = gd_cost_safe_delta(ctx, rho_u)
    report = {
        "context": ctx.to_dict(),
        "scope": SCOPE_OK,
        "horizon": {"H": H, "ceil_H": ceil_tol(H)},
        "gd": {
            "D": D,
            "K_iteration_count": k_iter,
            "K_primal_integral": k_cost,
            "iteration_count": _learning_block(ctx, [_net_size(ctx.rho_interval, k_iter)], H),
            "primal_integral": _learning_block(ctx, [_net_size(ctx.rho_interval, k_cost)], ctx.Z * H),
        },
        "provenance": dict(_PROVENANCE),
    }
    if ctx.eta_interval is None:
        return report

    rho1 = ctx.rho_interval[0] if rho1 is None else float(rho1)
    eta1 = ctx.eta_interval[0] if eta1 is None else float(eta1)
    rs = rho_sensitivity_constants(ctx, rho1, eta1)
    gs = g_star(ctx, rho1, eta1)
    cg = {
        "rho1": rho1, "eta1": eta1,
        "D": d_factor(rho1, ctx.L),
        "roots": {"r1": rs.roots.r1, "r2": rs.roots.r2},
        "rho_sensitivity": {"Delta": rs.denominator, "R0": rs.R0, "R1": rs.R1,
                            "R_star": pair_star(rs.R0, rs.R1, rs.roots)},
        "G_star": gs,
        "delta_rho": ctx.C / (2.0 * gs),
        "F_star": None, "eta_sensitivity": None, "H_star": None, "delta_eta": None,
        "net_spacing": None, "learning": None,
    }
    if ctx.in_cg_scope:
        fs = h_star_fstar(ctx, rho1)
        es = eta_sensitivity_constants(ctx, rho1, eta1, fs.value)
        hs = h_star(ctx, rho1, eta1, fs.value)
        sp = cg_net_spacings(ctx)
        cg.update({
            "F_star": {"value": fs.value, "eta": fs.eta, "n": fs.n, "grid_value": fs.grid_value, "slack": fs.slack},
            "eta_sensitivity": {"R0": es.R0, "R1": es.R1, "R_star": pair_star(es.R0, es.R1, es.roots)},
            "H_star": hs,
            "delta_eta": ctx.C / (2.0 * hs),
            "net_spacing": {
                "uniform-min": {"K_rho": sp.rho_uniform_min, "K_eta": sp.eta_uniform_min},
                "paper-max": {"K_rho": sp.rho_paper_max, "K_eta": sp.eta_paper_max},
            },
            "learning": _learning_block(
                ctx, [_net_size(ctx.rho_interval, sp.rho_uniform_min), _net_size(ctx.eta_interval, sp.eta_uniform_min)],
                ctx.Z * H),
        })
    else:
        report["scope"] = SCOPE_OUT
    report["cg"] = cg
    return report
