"""Experiment configuration: loading, validation, canonical form, manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from stepcert import __version__
from stepcert.bounds import CertificateContext
from stepcert.costs import Measure
from stepcert.instances import InstanceDistribution
from stepcert.iterators import AlgorithmConfig
from stepcert.verify import CG_DEFAULTS, GD_DEFAULTS, SUITES

SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


def load_config(path) -> dict:
    """Read a ``.toml`` or ``.json`` file into a plain dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read ({exc.strerror})") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomli.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (tomli.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a table/object")
    return data


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


# ---------------------------------------------------------------- field helpers

def _get(d: dict, key: str, path: str, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"{path}.{key}" if path else key, "required field missing")
    return default


def _number(value, path, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _interval(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, f"expected [lo, hi], got {value!r}")
    lo, hi = (_number(v, f"{path}[{i}]") for i, v in enumerate(value))
    if lo > hi:
        raise ConfigError(path, f"lo > hi in {value!r}")
    return [lo, hi]


def _wrap(path, fn, *args, **kwargs):
    # lift constructor ValueErrors into path-tagged config errors
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(path, str(exc)) from exc


# ---------------------------------------------------------------- sections

def resolve_distribution(d, path="distribution") -> dict:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a table")
    out = {
        "dimension": _number(_get(d, "dimension", path), f"{path}.dimension", positive=True, integer=True),
        "eigenvalue_range": _interval(_get(d, "eigenvalue_range", path), f"{path}.eigenvalue_range"),
        "norm_range": _interval(_get(d, "norm_range", path), f"{path}.norm_range"),
    }
    if d.get("nu") is not None:
        out["nu"] = _number(d["nu"], f"{path}.nu", positive=True)
    _wrap(path, InstanceDistribution, 0, out["dimension"], tuple(out["eigenvalue_range"]),
          tuple(out["norm_range"]), out.get("nu"))
    return out


def resolve_context(d, path="context") -> dict:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a table")
    out = {}
    for key in ("L", "Z", "nu", "beta"):
        out[key] = _number(_get(d, key, path), f"{path}.{key}", positive=True)
    out["rho_interval"] = _interval(_get(d, "rho_interval", path), f"{path}.rho_interval")
    if d.get("eta_interval") is not None:
        out["eta_interval"] = _interval(d["eta_interval"], f"{path}.eta_interval")
    for key, default in (("C", 0.1), ("epsilon", 0.1), ("delta", 0.1), ("k", 1.0)):
        out[key] = _number(d.get(key, default), f"{path}.{key}", positive=True)
    _wrap(path, CertificateContext.from_dict, out)
    return out


def resolve_algorithm(d, path) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a table")
    return _wrap(path, AlgorithmConfig.from_dict, d).to_dict()


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and return it with defaults filled in, in canonical order.

    Only the sections present are validated, so one file can drive a single
    subcommand.
    """
    cfg: dict = {"seed": _number(raw.get("seed", 0), "seed", integer=True) & SEED_MASK}
    if "distribution" in raw:
        cfg["distribution"] = resolve_distribution(raw["distribution"])
    if "context" in raw:
        cfg["context"] = resolve_context(raw["context"])
    if "gen" in raw:
        g = raw["gen"]
        count = _number(_get(g, "count", "gen"), "gen.count", integer=True)
        if count < 1:
            raise ConfigError("gen.count", "empty generation request")
        cfg["gen"] = {"count": count}
    if "run" in raw:
        r = raw["run"]
        algos = _get(r, "algorithms", "run")
        if not isinstance(algos, list) or not algos:
            raise ConfigError("run.algorithms", "expected a non-empty list")
        measures = r.get("measures", [m.value for m in Measure])
        cfg["run"] = {
            "algorithms": [resolve_algorithm(a, f"run.algorithms[{i}]") for i, a in enumerate(algos)],
            "measures": [_wrap(f"run.measures[{i}]", Measure.parse, m).value for i, m in enumerate(measures)],
        }
        # without an explicit cap, runs use four horizon ceilings of the context (or a fixed cap)
        if r.get("max_iters") is not None:
            cfg["run"]["max_iters"] = _number(r["max_iters"], "run.max_iters", positive=True, integer=True)
        if r.get("instances") is not None:
            cfg["run"]["instances"] = str(r["instances"])
        elif "count" in r:
            cfg["run"]["count"] = _number(r["count"], "run.count", positive=True, integer=True)
    if "learn" in raw:
        cfg["learn"] = _resolve_learn(raw["learn"])
    if "verify" in raw:
        cfg["verify"] = _resolve_verify(raw["verify"])
    return cfg


def _resolve_learn(d) -> dict:
    path = "learn"
    method = _get(d, "method", path)
    if method not in ("GD", "CG"):
        raise ConfigError("learn.method", f"must be 'GD' or 'CG', got {method!r}")
    trials = _number(_get(d, "trials", path), "learn.trials", integer=True)
    if trials < 1:
        raise ConfigError("learn.trials", "must be at least 1")
    k = d.get("k")
    if k is not None and k != "calibrate":
        k = _number(k, "learn.k", positive=True)
    policy = d.get("policy", "uniform-min")
    if policy not in ("uniform-min", "paper-max"):
        raise ConfigError("learn.policy", f"unknown policy {policy!r}")
    out = {
        "method": method,
        "cost_variant": _wrap("learn.cost_variant", Measure.parse, d.get("cost_variant", "PrimalIntegral")).value,
        "trials": trials,
        "k": k,
        "policy": policy,
        "reference_samples": _number(d.get("reference_samples", 100_000), "learn.reference_samples",
                                     positive=True, integer=True),
        "calibration_trials": _number(d.get("calibration_trials", 200), "learn.calibration_trials",
                                      positive=True, integer=True),
    }
    if d.get("spacings") is not None:
        out["spacings"] = [_number(v, f"learn.spacings[{i}]", positive=True) for i, v in enumerate(d["spacings"])]
    return out


def _resolve_verify(d) -> dict:
    suites = d.get("suites", {name: {"draws": 1000} for name in SUITES})
    if not isinstance(suites, dict):
        raise ConfigError("verify.suites", "expected a table of suite names")
    out = {"suites": {}}
    for name, opts in suites.items():
        if name not in SUITES:
            raise ConfigError(f"verify.suites.{name}", f"unknown suite; choose from {sorted(SUITES)}")
        draws = _number((opts or {}).get("draws", 1000), f"verify.suites.{name}.draws", integer=True)
        if draws < 0:
            raise ConfigError(f"verify.suites.{name}.draws", "must be non-negative")
        out["suites"][name] = {"draws": draws}
    for family in ("gd", "cg"):
        if family in d:
            block = d[family]
            # partial overrides are merged over the suite defaults before validation
            base = GD_DEFAULTS if family == "gd" else CG_DEFAULTS
            fam = {}
            if "distribution" in block:
                fam["distribution"] = resolve_distribution({**base["distribution"], **block["distribution"]},
                                                           f"verify.{family}.distribution")
            if "context" in block:
                fam["context"] = resolve_context({**base["context"], **block["context"]},
                                                 f"verify.{family}.context")
            out[family] = fam
    return out


def require(cfg: dict, *sections: str):
    for s in sections:
        if s not in cfg:
            raise ConfigError(s, "required section missing")


def build_distribution(cfg: dict, seed: int) -> InstanceDistribution:
    d = cfg["distribution"]
    return InstanceDistribution(seed, d["dimension"], tuple(d["eigenvalue_range"]), tuple(d["norm_range"]),
                                d.get("nu"))


def build_context(cfg: dict) -> CertificateContext:
    return CertificateContext.from_dict(cfg["context"])


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: int
    artifact_version: str = __version__
    outputs: list = field(default_factory=list)

    def add(self, path: Path, root: Path):
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        self.outputs.append({"path": str(Path(path).relative_to(root)), "sha256": digest})

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "config_digest": self.config_digest, "seed": self.seed,
                           "artifact_version": self.artifact_version, "outputs": self.outputs},
                          indent=2, sort_keys=True) + "\n"
