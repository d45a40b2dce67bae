"""Convex quadratic problem instances and the contraction checks run on them.

Every instance is ``f(z) = 0.5 * z^T Q z`` with ``Q = U^T diag(lam) U``, so the
minimizer is the origin and ``f`` there is zero.  ``U`` is rebuilt from an
integer seed, which keeps serialized instances small.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-12
# relative slack when comparing a contraction ratio against 1 - beta
FEASIBILITY_TOL = 1e-12
DIVERGENCE_FACTOR = 1e12


def orthogonal_matrix(dim: int, seed: int) -> np.ndarray:
    """Seeded random orthogonal matrix (QR of a Gaussian, diag(R) made positive)."""
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A strongly convex quadratic with its certificate constants.

    ``L`` and ``m`` are bounds on the spectrum of ``Q`` (not necessarily
    attained), ``nu`` is the gradient tolerance used as the stopping rule and
    ``Z`` bounds the norm of the initial point.
    """

    Q: np.ndarray
    z0: np.ndarray
    nu: float
    Z: float
    L: float
    m: float
    eigenvalues: np.ndarray
    basis: np.ndarray
    orthogonal_seed: int | None = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_spectrum(cls, eigenvalues, basis, z0, nu, Z, L=None, m=None, orthogonal_seed=None):
        lam = np.asarray(eigenvalues, dtype=float)
        U = np.asarray(basis, dtype=float)
        Q = (U.T * lam) @ U
        Q = 0.5 * (Q + Q.T)
        L = float(lam.max()) if L is None else float(L)
        m = float(lam.min()) if m is None else float(m)
        return cls(Q=Q, z0=np.asarray(z0, dtype=float), nu=float(nu), Z=float(Z), L=L, m=m,
                   eigenvalues=lam, basis=U, orthogonal_seed=orthogonal_seed)

    @classmethod
    def from_matrix(cls, Q, z0, nu, Z, L=None, m=None):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        lam, vecs = np.linalg.eigh(Q)
        L = float(lam.max()) if L is None else float(L)
        m = float(lam.min()) if m is None else float(m)
        return cls(Q=Q, z0=np.atleast_1d(np.asarray(z0, dtype=float)), nu=float(nu), Z=float(Z),
                   L=L, m=m, eigenvalues=lam, basis=vecs.T)

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]

    def gradient(self, z):
        return self.Q @ z

    def eigen_coordinates(self, z=None):
        """Coordinates of ``z`` (default ``z0``) in the eigenbasis of ``Q``."""
        return self.basis @ (self.z0 if z is None else z)

    def validate(self):
        Q = self.Q
        n = Q.shape[0]
        if n == 0 or Q.shape != (n, n):
            raise ValueError(f"Q must be a non-empty square matrix, got shape {Q.shape}")
        if self.z0.shape != (n,):
            raise ValueError(f"z0 has shape {self.z0.shape}, expected ({n},)")
        scale = max(1.0, float(np.abs(Q).max()))
        if np.abs(Q - Q.T).max() > SYMMETRY_TOL * scale:
            raise ValueError("Q is not symmetric")
        if not self.m > 0:
            raise ValueError(f"strong convexity constant must be positive, got m={self.m}")
        if self.m > self.L:
            raise ValueError(f"m={self.m} exceeds L={self.L}")
        lam = self.eigenvalues
        tol = 1e-12 * self.L
        if lam.min() < self.m - tol or lam.max() > self.L + tol:
            raise ValueError(f"eigenvalues [{lam.min()}, {lam.max()}] outside [m, L]=[{self.m}, {self.L}]")
        r = float(np.linalg.norm(self.z0))
        if not (self.nu < r <= self.Z * (1 + 1e-12)):
            raise ValueError(f"need nu < |z0| <= Z, got nu={self.nu}, |z0|={r}, Z={self.Z}")

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "eigenvalues": self.eigenvalues.tolist(),
            "orthogonal_seed": self.orthogonal_seed,
            "z0": self.z0.tolist(),
            "nu": self.nu,
            "Z": self.Z,
            "L": self.L,
            "m": self.m,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        seed = d.get("orthogonal_seed")
        dim = int(d["dimension"])
        if seed is None:
            if dim != 1:
                raise ValueError("instance without orthogonal_seed must be one-dimensional")
            basis = np.eye(1)
        else:
            basis = orthogonal_matrix(dim, int(seed))
        return cls.from_spectrum(d["eigenvalues"], basis, d["z0"], d["nu"], d["Z"],
                                 L=d.get("L"), m=d.get("m"), orthogonal_seed=seed)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class InstanceDistribution:
    """Seeded family of random quadratics.

    Eigenvalues are uniform on ``eigenvalue_range``; for dimension >= 2 both
    endpoints are always included so the range is attained.  ``|z0|`` is
    uniform on ``(norm_range[0], norm_range[1]]`` with a uniform direction.
    """

    seed: int
    dimension: int
    eigenvalue_range: tuple[float, float]
    norm_range: tuple[float, float]
    nu: float | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        m, L = self.eigenvalue_range
        if not 0 < m <= L:
            raise ValueError(f"need 0 < m <= L, got eigenvalue_range={self.eigenvalue_range}")
        lo, Z = self.norm_range
        if self.nu is None:
            object.__setattr__(self, "nu", 1e-3 * Z)
        if not self.nu < Z:
            raise ValueError(f"gradient tolerance nu={self.nu} must be below Z={Z}")
        if not self.nu <= lo < Z:
            raise ValueError(f"need nu <= norm floor < Z, got norm_range={self.norm_range}, nu={self.nu}")
        object.__setattr__(self, "eigenvalue_range", (float(m), float(L)))
        object.__setattr__(self, "norm_range", (float(lo), float(Z)))

    @property
    def L(self) -> float:
        return self.eigenvalue_range[1]

    @property
    def m(self) -> float:
        return self.eigenvalue_range[0]

    @property
    def Z(self) -> float:
        return self.norm_range[1]

    def with_seed(self, seed: int) -> "InstanceDistribution":
        return InstanceDistribution(seed, self.dimension, self.eigenvalue_range, self.norm_range, self.nu)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dimension": self.dimension,
            "eigenvalue_range": list(self.eigenvalue_range),
            "norm_range": list(self.norm_range),
            "nu": self.nu,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceDistribution":
        return cls(int(d["seed"]), int(d["dimension"]), tuple(d["eigenvalue_range"]),
                   tuple(d["norm_range"]), d.get("nu"))


def _draw(dist: InstanceDistribution, index: int):
    rng = np.random.default_rng([dist.seed, index])
    m, L = dist.eigenvalue_range
    n = dist.dimension
    if n == 1:
        lam = rng.uniform(m, L, size=1) if m < L else np.array([L])
    else:
        lam = np.concatenate([[m, L], rng.uniform(m, L, size=n - 2)])
    ortho_seed = int(rng.integers(0, 2**63))
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    lo, Z = dist.norm_range
    radius = Z - rng.random() * (Z - lo)  # in (lo, Z]
    # start point is drawn in eigen-coordinates; z0 = U^T y0 is uniform on the sphere as well
    return lam, ortho_seed, radius * direction


def generate_instance(dist: InstanceDistribution, index: int) -> ProblemInstance:
    """Instance number ``index`` of ``dist``; a pure function of (seed, index)."""
    if index < 0:
        raise ValueError("index must be non-negative")
    lam, ortho_seed, y0 = _draw(dist, index)
    basis = orthogonal_matrix(dist.dimension, ortho_seed)
    z0 = basis.T @ y0
    return ProblemInstance.from_spectrum(lam, basis, z0, dist.nu, dist.Z, L=dist.L, m=dist.m,
                                         orthogonal_seed=ortho_seed)


def spectral_batch(dist: InstanceDistribution, start: int, count: int):
    """Eigenvalues and eigen-coordinates of ``z0`` for a block of instances.

    Returns ``(lam, y0)`` with shape ``(count, dimension)``; row ``i`` matches
    ``generate_instance(dist, start + i)`` without building ``Q``.
    """
    n = dist.dimension
    lam = np.empty((count, n))
    y0 = np.empty((count, n))
    for i in range(count):
        lam[i], _, y0[i] = _draw(dist, start + i)
    return lam, y0


@dataclass(frozen=True)
class AssumptionReport:
    method: str
    rho_interval: tuple[float, float]
    eta_interval: tuple[float, float] | None
    beta_requested: float
    feasible: bool
    worst_violation: float
    worst_ratio: float
    beta_max: float | None = None
    probes: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rho_interval": list(self.rho_interval),
            "eta_interval": None if self.eta_interval is None else list(self.eta_interval),
            "beta_requested": self.beta_requested,
            "feasible": self.feasible,
            "worst_violation": self.worst_violation,
            "worst_ratio": self.worst_ratio,
            "beta_max": self.beta_max,
            "probes": self.probes,
        }


def _probe_grid(interval, count):
    lo, hi = map(float, interval)
    if lo == hi or count == 1:
        return np.array([lo]) if lo == hi else np.array([lo, hi])
    return np.linspace(lo, hi, count)


def _step_budget(inst: ProblemInstance, beta: float) -> int:
    r0 = float(np.linalg.norm(inst.z0))
    ratio = math.log(inst.nu / (inst.L * r0)) / math.log(1.0 - beta)
    return min(max(int(math.ceil(ratio)), 0) + 2, 1_000_000)


def worst_contraction_ratio(inst: ProblemInstance, rhos, etas, max_steps: int) -> float:
    """Largest ``|z_{j+1}| / |z_j|`` along GD (``etas is None``) or CG runs.

    All probe runs are advanced together; each freezes once its gradient norm
    drops to ``nu``.
    """
    rhos = np.asarray(rhos, dtype=float)
    P = rhos.size
    Q = inst.Q
    z = np.tile(inst.z0, (P, 1))
    z_prev = z.copy()
    active = np.linalg.norm(z @ Q, axis=1) > inst.nu
    worst = 0.0
    limit = DIVERGENCE_FACTOR * inst.Z
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(max_steps):
            if not active.any():
                break
            g = z @ Q
            z_new = z - rhos[:, None] * g
            if etas is not None and step > 0:
                z_new -= etas[:, None] * (z - z_prev)
            norms_new = np.linalg.norm(z_new, axis=1)
            ratios = norms_new / np.linalg.norm(z, axis=1)
            ratios = np.where(np.isfinite(ratios), ratios, np.inf)
            worst = max(worst, float(ratios[active].max()))
            z_prev = np.where(active[:, None], z, z_prev)
            z = np.where(active[:, None], z_new, z)
            blown = ~np.isfinite(norms_new) | (norms_new > limit)
            active &= ~blown
            active &= np.linalg.norm(z @ Q, axis=1) > inst.nu
    return worst


def _report(method, rho_interval, eta_interval, beta, worst, probes):
    violation = worst - (1.0 - beta)
    feasible = bool(violation <= FEASIBILITY_TOL * max(1.0, 1.0 - beta))
    return AssumptionReport(
        method=method,
        rho_interval=tuple(map(float, rho_interval)),
        eta_interval=None if eta_interval is None else tuple(map(float, eta_interval)),
        beta_requested=float(beta),
        feasible=feasible,
        worst_violation=float(violation),
        worst_ratio=float(worst),
        beta_max=max(0.0, 1.0 - worst) if feasible else None,
        probes=probes,
    )


def _check_args(rho_interval, beta):
    lo, hi = rho_interval
    if not 0 < lo <= hi:
        raise ValueError(f"need 0 < rho_l <= rho_u, got {rho_interval}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


def check_assumption_gd(inst: ProblemInstance, rho_interval, beta: float, probe_count: int = 32) -> AssumptionReport:
    """Probe ``|z - rho grad f(z)| <= (1 - beta)|z|`` along GD trajectories.

    ``probe_count`` step sizes (endpoints included) are run from ``z0``
    until the stopping rule fires, and every step of every run is checked.
    """
    _check_args(rho_interval, beta)
    rhos = _probe_grid(rho_interval, probe_count)
    worst = worst_contraction_ratio(inst, rhos, None, _step_budget(inst, beta))
    return _report("GD", rho_interval, None, beta, worst, rhos.size)


def check_assumption_cg(inst: ProblemInstance, rho_interval, eta_interval, beta: float,
                        probe_count: int = 32) -> AssumptionReport:
    """CG counterpart of :func:`check_assumption_gd` over a (rho, eta) grid."""
    _check_args(rho_interval, beta)
    e_lo, e_hi = eta_interval
    if not 0 <= e_lo <= e_hi:
        raise ValueError(f"need 0 <= eta_l <= eta_u, got {eta_interval}")
    rr, ee = np.meshgrid(_probe_grid(rho_interval, probe_count), _probe_grid(eta_interval, probe_count),
                         indexing="ij")
    worst = worst_contraction_ratio(inst, rr.ravel(), ee.ravel(), _step_budget(inst, beta))
    return _report("CG", rho_interval, eta_interval, beta, worst, rr.size)


def feasible_beta_strongly_convex(m: float, L: float) -> tuple[float, float]:
    """Step size ``2/(m+L)`` and the contraction constant it guarantees."""
    if not m > 0:
        raise ValueError(f"m must be positive, got {m}")
    if m > L:
        raise ValueError(f"need m <= L, got m={m}, L={L}")
    kappa = L / m
    return 2.0 / (m + L), 1.0 - (kappa - 1.0) / (kappa + 1.0)
