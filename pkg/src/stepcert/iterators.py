"""Fixed-parameter gradient descent and two-step conjugate gradient runs."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass

import numpy as np

from stepcert.instances import DIVERGENCE_FACTOR, ProblemInstance

# cap for runs with no certificate context; contexts use default_max_iters
DEFAULT_MAX_ITERS = 10_000


class Termination(str, enum.Enum):
    GRADIENT_BELOW_NU = "GradientBelowNu"
    MAX_ITERATIONS = "MaxIterations"


class DivergenceError(RuntimeError):
    def __init__(self, step: int, norm: float):
        super().__init__(f"iterate diverged at step {step} (|z| = {norm:.3g})")
        self.step = step
        self.norm = norm


@dataclass(frozen=True)
class AlgorithmConfig:
    """GD step size ``rho`` or CG pair ``(rho, eta)`` plus admissible intervals.

    ``eta = 0`` is accepted for CG as the degenerate mode that reproduces GD.
    """

    method: str
    rho: float
    eta: float = 0.0
    rho_interval: tuple[float, float] | None = None
    eta_interval: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in ("GD", "CG"):
            raise ValueError(f"method must be 'GD' or 'CG', got {self.method!r}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.method == "GD" and self.eta != 0:
            raise ValueError("GD configs carry no conjugate parameter")
        if self.rho_interval is not None:
            lo, hi = self.rho_interval
            if not 0 < lo <= self.rho <= hi:
                raise ValueError(f"rho={self.rho} outside {self.rho_interval}")
        if self.eta_interval is not None:
            lo, hi = self.eta_interval
            if not (lo <= self.eta <= hi):
                raise ValueError(f"eta={self.eta} outside {self.eta_interval}")

    @classmethod
    def gd(cls, rho, rho_interval=None):
        return cls("GD", float(rho), 0.0, rho_interval)

    @classmethod
    def cg(cls, rho, eta, rho_interval=None, eta_interval=None):
        return cls("CG", float(rho), float(eta), rho_interval, eta_interval)

    def to_dict(self) -> dict:
        d = {"method": self.method, "rho": self.rho, "eta": self.eta}
        if self.rho_interval is not None:
            d["rho_interval"] = list(self.rho_interval)
        if self.eta_interval is not None:
            d["eta_interval"] = list(self.eta_interval)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AlgorithmConfig":
        ri = d.get("rho_interval")
        ei = d.get("eta_interval")
        return cls(d.get("method", "GD"), float(d["rho"]), float(d.get("eta", 0.0)),
                   None if ri is None else tuple(ri), None if ei is None else tuple(ei))


@dataclass(frozen=True, eq=False)
class Trajectory:
    iterates: np.ndarray  # (M + 1, n)
    gradient_norms: np.ndarray  # (M + 1,)
    config: AlgorithmConfig
    termination: Termination

    @property
    def M(self) -> int:
        return len(self.iterates) - 1

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.iterates, axis=1)

    def header(self) -> dict:
        return {"config": self.config.to_dict(), "termination": self.termination.value, "M": self.M}

    def to_csv(self) -> str:
        """Header line ``# {json}`` followed by ``step,norm_z,grad_norm`` rows."""
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "norm_z", "grad_norm"])
        for j, (nz, ng) in enumerate(zip(self.norms, self.gradient_norms)):
            w.writerow([j, repr(float(nz)), repr(float(ng))])
        return buf.getvalue()


def read_trajectory_csv(text: str):
    """Inverse of :meth:`Trajectory.to_csv`: ``(header, rows)``."""
    lines = text.splitlines()
    header = json.loads(lines[0][2:])
    rows = [(int(s), float(a), float(b)) for s, a, b in csv.reader(lines[2:])]
    return header, rows


def gd_step(inst: ProblemInstance, z, rho: float):
    return z - rho * (inst.Q @ z)


def cg_step(inst: ProblemInstance, z_curr, z_prev, rho: float, eta: float):
    return z_curr - rho * (inst.Q @ z_curr) - eta * (z_curr - z_prev)


def _guard(inst, z, step):
    norm = float(np.linalg.norm(z))
    if not np.isfinite(norm) or norm > DIVERGENCE_FACTOR * inst.Z:
        raise DivergenceError(step, norm)


def gd_run(inst: ProblemInstance, rho: float, max_iters: int = DEFAULT_MAX_ITERS,
           rho_interval=None) -> Trajectory:
    """Iterate ``z <- z - rho Q z`` while ``|Q z| > nu``, at most ``max_iters`` times."""
    config = AlgorithmConfig.gd(rho, rho_interval)
    z = inst.z0.copy()
    iterates = [z]
    grads = [float(np.linalg.norm(inst.Q @ z))]
    termination = Termination.GRADIENT_BELOW_NU
    while grads[-1] > inst.nu:
        if len(iterates) > max_iters:
            termination = Termination.MAX_ITERATIONS
            break
        z = gd_step(inst, z, rho)
        _guard(inst, z, len(iterates))
        iterates.append(z)
        grads.append(float(np.linalg.norm(inst.Q @ z)))
    return Trajectory(np.array(iterates), np.array(grads), config, termination)


def cg_run(inst: ProblemInstance, rho: float, eta: float, max_iters: int = DEFAULT_MAX_ITERS,
           rho_interval=None, eta_interval=None) -> Trajectory:
    """First step is a plain gradient step; later steps subtract ``eta (z_n - z_{n-1})``."""
    config = AlgorithmConfig.cg(rho, eta, rho_interval, eta_interval)
    z = inst.z0.copy()
    iterates = [z]
    grads = [float(np.linalg.norm(inst.Q @ z))]
    termination = Termination.GRADIENT_BELOW_NU
    while grads[-1] > inst.nu:
        if len(iterates) > max_iters:
            termination = Termination.MAX_ITERATIONS
            break
        if len(iterates) == 1:
            z = gd_step(inst, z, rho)
        else:
            z = cg_step(inst, iterates[-1], iterates[-2], rho, eta)
        _guard(inst, z, len(iterates))
        iterates.append(z)
        grads.append(float(np.linalg.norm(inst.Q @ z)))
    return Trajectory(np.array(iterates), np.array(grads), config, termination)


def run(inst: ProblemInstance, config: AlgorithmConfig, max_iters: int = DEFAULT_MAX_ITERS) -> Trajectory:
    if config.method == "GD":
        return gd_run(inst, config.rho, max_iters, config.rho_interval)
    return cg_run(inst, config.rho, config.eta, max_iters, config.rho_interval, config.eta_interval)


def pad_iterate(traj: Trajectory, j: int):
    """Iterate ``j``, or the optimum (the origin) once the run has stopped."""
    if j < 0:
        raise ValueError("j must be non-negative")
    if j <= traj.M:
        return traj.iterates[j]
    return np.zeros_like(traj.iterates[0])


def gd_orbit(inst: ProblemInstance, rho: float, steps: int, z0=None) -> np.ndarray:
    """``steps + 1`` raw GD iterates with no stopping rule."""
    z = inst.z0 if z0 is None else np.asarray(z0, dtype=float)
    out = [z]
    for _ in range(steps):
        z = gd_step(inst, z, rho)
        out.append(z)
    return np.array(out)


def cg_orbit(inst: ProblemInstance, rho: float, eta: float, steps: int, z0=None) -> np.ndarray:
    """``steps + 1`` raw CG iterates with no stopping rule."""
    z = inst.z0 if z0 is None else np.asarray(z0, dtype=float)
    out = [z]
    for k in range(steps):
        if k == 0:
            z = gd_step(inst, z, rho)
        else:
            z = cg_step(inst, out[-1], out[-2], rho, eta)
        out.append(z)
    return np.array(out)
