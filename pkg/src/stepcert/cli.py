"""``stepcert`` command line: gen, run, bounds, learn, verify.

Exit codes: 0 success, 1 configuration error, 2 divergence in a required
computation, 3 a verify suite found a bound violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from stepcert import __version__
from stepcert.bounds import OutOfScopeError, certificate_report, default_max_iters
from stepcert.config import (
    ConfigError,
    RunManifest,
    build_context,
    build_distribution,
    config_digest,
    load_config,
    require,
    resolve,
)
from stepcert.costs import Measure, evaluate
from stepcert.instances import ProblemInstance, generate_instance
from stepcert.iterators import DEFAULT_MAX_ITERS, AlgorithmConfig, DivergenceError, Termination, run
from stepcert.learner import learning_experiment
from stepcert.seeding import derive_seed
from stepcert.verify import run_suites

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_VIOLATION = 0, 1, 2, 3
COST_FIELDS = ["instance_id", "method", "rho", "eta", "measure", "value", "M", "termination"]


class _Session:
    def __init__(self, command, cfg, seed, out: Path, fmt: str, plot: bool):
        self.cfg = cfg
        self.seed = seed
        self.out = out
        self.fmt = fmt
        self.plot = plot
        out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command, config_digest(cfg), seed)

    def write(self, rel: str, text: str) -> Path:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.manifest.add(path, self.out)
        return path

    def record(self, path: Path):
        self.manifest.add(path, self.out)

    def finish(self):
        (self.out / "manifest.json").write_text(self.manifest.to_json())


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, json.dumps(obj)


# ---------------------------------------------------------------- commands

def _instance_dist(s: _Session):
    return build_distribution(s.cfg, derive_seed(s.seed, "instances"))


def cmd_gen(s: _Session) -> int:
    """Write seeded instances as JSON files."""
    require(s.cfg, "distribution", "gen")
    dist = _instance_dist(s)
    for i in range(s.cfg["gen"]["count"]):
        path = s.write(f"instances/instance_{i:05d}.json", generate_instance(dist, i).to_json() + "\n")
        print(path)
    return EXIT_OK


def _load_instances(s: _Session):
    spec = s.cfg["run"]
    if "instances" in spec:
        files = sorted(Path(spec["instances"]).glob("*.json"))
        if not files:
            raise ConfigError("run.instances", f"no instance files in {spec['instances']}")
        out = []
        for f in files:
            try:
                out.append((f.stem, ProblemInstance.from_json(f.read_text())))
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"run.instances/{f.name}", str(exc)) from exc
        return out
    require(s.cfg, "distribution")
    dist = _instance_dist(s)
    count = spec.get("count", s.cfg.get("gen", {}).get("count", 1))
    return [(f"instance_{i:05d}", generate_instance(dist, i)) for i in range(count)]


def cmd_run(s: _Session) -> int:
    """Run every algorithm on every instance and record costs."""
    require(s.cfg, "run")
    spec = s.cfg["run"]
    algos = [AlgorithmConfig.from_dict(a) for a in spec["algorithms"]]
    if "max_iters" in spec:
        max_iters = spec["max_iters"]
    else:
        max_iters = default_max_iters(build_context(s.cfg)) if "context" in s.cfg else DEFAULT_MAX_ITERS
    records = []
    plot_rows = []
    for inst_id, inst in _load_instances(s):
        for k, algo in enumerate(algos):
            base = {"instance_id": inst_id, "method": algo.method, "rho": algo.rho, "eta": algo.eta}
            try:
                traj = run(inst, algo, max_iters)
            except DivergenceError as exc:
                for m in spec["measures"]:
                    records.append({**base, "measure": m, "value": None, "M": exc.step, "termination": "Diverged"})
                continue
            s.write(f"trajectories/{inst_id}_a{k}.csv", traj.to_csv())
            if not plot_rows or plot_rows[0][0].startswith(inst_id + " "):
                plot_rows.append((f"{inst_id} {algo.method} rho={algo.rho:g} eta={algo.eta:g}", traj.norms))
            for m in spec["measures"]:
                undefined = Measure(m) is Measure.ITERATION_COUNT and traj.termination is Termination.MAX_ITERATIONS
                value = None if undefined else evaluate(traj, m).value
                records.append({**base, "measure": m, "value": value, "M": traj.M,
                                "termination": traj.termination.value})
    if s.fmt == "csv":
        s.write("costs.csv", _csv([{**r, "value": "" if r["value"] is None else repr(r["value"])} for r in records],
                                  COST_FIELDS))
    else:
        s.write("costs.json", _dumps(records))
    if s.plot and plot_rows:
        from stepcert.plotting import plot_trajectories

        s.record(plot_trajectories(plot_rows, s.out / "trajectories.png"))
    diverged = sum(r["termination"] == "Diverged" for r in records)
    print(f"{len(records)} cost records, {diverged} diverged")
    return EXIT_OK


def cmd_bounds(s: _Session) -> int:
    """Emit the certificate report for a context."""
    require(s.cfg, "context")
    report = certificate_report(build_context(s.cfg))
    if s.fmt == "csv":
        text = _csv([{"key": k, "value": v} for k, v in _flatten(report)], ["key", "value"])
        s.write("certificate.csv", text)
    else:
        text = _dumps(report)
        s.write("certificate.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_learn(s: _Session) -> int:
    """Run the ERM learning experiment."""
    require(s.cfg, "distribution", "context", "learn")
    spec = s.cfg["learn"]
    dist = build_distribution(s.cfg, derive_seed(s.seed, "learn"))
    result = learning_experiment(
        dist, build_context(s.cfg), spec["method"], spec["cost_variant"], spec["trials"], k=spec["k"],
        policy=spec["policy"], reference_samples=spec["reference_samples"],
        calibration_trials=spec["calibration_trials"], spacings=spec.get("spacings"))
    report = result.report
    picks = {}
    for t in report["per_trial"]:
        key = (t["selected"]["rho"], t["selected"]["eta"])
        picks[key] = picks.get(key, 0) + 1
    rows = [{"rho": repr(r), "eta": repr(e), "expected_cost": repr(mu), "noise": repr(nz),
             "times_selected": picks.get((r, e), 0)} for r, e, mu, nz in result.cost_rows()]
    s.write("cost_table.csv", _csv(rows, ["rho", "eta", "expected_cost", "noise", "times_selected"]))
    if s.fmt == "csv":
        trial_rows = [{"trial": t["trial"], "rho": t["selected"]["rho"], "eta": t["selected"]["eta"],
                       "expected_cost": t["expected_cost"], "excess": t["excess"], "failed": t["failed"]}
                      for t in report["per_trial"]]
        s.write("learn_trials.csv", _csv(trial_rows, list(trial_rows[0])))
    s.write("learn_report.json", _dumps(report))
    if s.plot:
        from stepcert.plotting import plot_excess, plot_expected_costs

        s.record(plot_expected_costs(result, s.out / "expected_costs.png"))
        s.record(plot_excess(report, s.out / "excess.png"))
    summary = {k: report[k] for k in ("method", "cost_variant", "scope", "net_size", "k", "m", "trials",
                                      "failure_frequency", "success_frequency")}
    sys.stdout.write(_dumps(summary))
    return EXIT_OK


def cmd_verify(s: _Session) -> int:
    """Check the perturbation bounds against simulation."""
    require(s.cfg, "verify")
    report = run_suites(s.cfg["verify"], s.seed)
    if s.fmt == "csv":
        fields = ["name", "status", "draws", "attempts", "skipped", "checks", "violations", "worst_ratio"]
        s.write("verify_suites.csv", _csv([{k: r[k] for k in fields} for r in report["suites"]], fields))
    s.write("verify_report.json", _dumps(report))
    if s.plot:
        from stepcert.plotting import plot_verify

        s.record(plot_verify(report, s.out / "verify.png"))
    for r in report["suites"]:
        print(f"{r['name']:32s} {r['status']:8s} draws={r['draws']} violations={r['violations']} "
              f"worst_ratio={r['worst_ratio']:.4g}")
    return EXIT_VIOLATION if report["status"] == "fail" else EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "bounds": cmd_bounds, "learn": cmd_learn, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML or JSON config file")
    common.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--plot", action="store_true", help="also render PNG figures")
    parser = argparse.ArgumentParser(prog="stepcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", "must be a non-negative 64-bit integer")
            raw["seed"] = args.seed
        cfg = resolve(raw)
        session = _Session(args.command, cfg, cfg["seed"], Path(args.out), args.format, args.plot)
        code = COMMANDS[args.command](session)
    except (ConfigError, OutOfScopeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    session.finish()
    return code
