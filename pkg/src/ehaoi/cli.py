"""Command line: ``ehaoi {evaluate,optimize,simulate,sweep}``.

Inputs come from flags, a JSON manifest (``--manifest``), or both; flags win.
Results are JSON, except ``sweep`` which writes CSV. Output goes to ``--out``
(or the manifest's ``output_path``) and to stdout otherwise. Relative output
paths are resolved against ``$EHAOI_OUTPUT_DIR`` when it is set.

Exit status: 0 ok, 2 invalid input, 3 optimizer did not converge, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .optimize import OptimizerOptions, SweepRow, optimize_thresholds, sweep
from .policy import PolicyError, SystemParams, ThresholdPolicy, system_from_dict, validate_policy
from .renewal import average_age
from .simulate import SimulationConfig, simulate

__all__ = ["RunManifest", "ManifestError", "parse_manifest", "run", "main", "sweep_csv", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "EHAOI_OUTPUT_DIR"

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_IO = 0, 2, 3, 4

COMMANDS = ("evaluate", "optimize", "simulate", "sweep")
_ALLOWED = {
    "evaluate": {"params", "policy"},
    "optimize": {"params", "optimizer"},
    "simulate": {"params", "policy", "simulation"},
    "sweep": {"grid", "optimizer"},
}
_REQUIRED = {
    "evaluate": {"params", "policy"},
    "optimize": {"params"},
    "simulate": {"params", "policy"},
    "sweep": {"grid"},
}
_OPTIMIZER_KEYS = {"restarts", "max_evals", "tol", "seed"}
_SIMULATION_KEYS = {"horizon", "cycle_count", "seed", "replications", "initial_battery", "warmup"}


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    params: SystemParams | None = None
    policy: ThresholdPolicy | None = None
    optimizer: OptimizerOptions | None = None
    simulation: SimulationConfig | None = None
    grid: dict = field(default_factory=dict)
    output_path: str | None = None


def _check_keys(section: str, data, allowed: set[str]) -> dict:
    if not isinstance(data, dict):
        raise ManifestError(f"'{section}' must be a JSON object")
    unknown = set(data) - allowed
    if unknown:
        raise ManifestError(f"unknown field(s) in '{section}': {', '.join(sorted(unknown))}")
    return data


def parse_manifest(raw: dict) -> RunManifest:
    """Strictly validate a manifest dict.

    Fields the command does not use are rejected, as are unknown keys.
    """
    raw = _check_keys("manifest", raw, {"command", "params", "policy", "optimizer", "simulation", "grid", "output_path"})
    command = raw.get("command")
    if command not in COMMANDS:
        raise ManifestError(f"'command' must be one of {', '.join(COMMANDS)}, got {command!r}")
    present = set(raw) - {"command", "output_path"}
    extra = present - _ALLOWED[command]
    if extra:
        raise ManifestError(f"field(s) not used by '{command}': {', '.join(sorted(extra))}")
    missing = _REQUIRED[command] - present
    if missing:
        raise ManifestError(f"'{command}' requires field(s): {', '.join(sorted(missing))}")

    manifest = RunManifest(command=command, output_path=raw.get("output_path"))
    if "params" in raw:
        params = _check_keys("params", raw["params"], {"mu_h", "battery"})
        manifest.params, _ = system_from_dict(params)
    if "policy" in raw:
        policy = _check_keys("policy", raw["policy"], {"taus"})
        if "taus" not in policy:
            raise ManifestError("'policy' requires field 'taus'")
        merged = {"mu_h": manifest.params.mu_h, "battery": manifest.params.battery, "taus": policy["taus"]}
        _, manifest.policy = system_from_dict(merged)
    if "optimizer" in raw:
        manifest.optimizer = OptimizerOptions(**_check_keys("optimizer", raw["optimizer"], _OPTIMIZER_KEYS))
    if "simulation" in raw:
        manifest.simulation = SimulationConfig(**_check_keys("simulation", raw["simulation"], _SIMULATION_KEYS))
    if "grid" in raw:
        grid = _check_keys("grid", raw["grid"], {"mu_h", "battery"})
        if set(grid) != {"mu_h", "battery"}:
            raise ManifestError("'grid' requires both 'mu_h' and 'battery' lists")
        manifest.grid = {"mu_h": _as_list(grid["mu_h"], float), "battery": _as_list(grid["battery"], int)}
    return manifest


def _as_list(value, kind):
    if not isinstance(value, list):
        value = [value]
    if not value:
        raise ManifestError("grid lists must be nonempty")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and int(v) != v):
            raise ManifestError(f"bad grid entry {v!r}")
        out.append(kind(v))
    return out


def _csv_numbers(text: str, kind):
    try:
        return [kind(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ManifestError(f"expected a comma-separated list of numbers, got {text!r}") from None


def sweep_csv(rows: list[SweepRow]) -> str:
    """CSV with one column per threshold of the largest battery; shorter rows are padded empty."""
    width = max(r.battery for r in rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["battery", "mu_h", "avg_age"] + [f"tau_{k}" for k in range(1, width + 1)] + ["converged"])
    for r in rows:
        taus = [repr(t) for t in r.taus] + [""] * (width - len(r.taus))
        writer.writerow([r.battery, repr(r.mu_h), repr(r.avg_age)] + taus + ["true" if r.converged else "false"])
    return buf.getvalue()


def run(manifest: RunManifest) -> tuple[int, str]:
    """Execute a manifest; returns ``(exit_status, output_text)``."""
    cmd = manifest.command
    status = EXIT_OK
    if cmd == "evaluate":
        result = average_age(manifest.params, manifest.policy).to_dict()
        text = json.dumps(result, indent=2)
    elif cmd == "optimize":
        report = optimize_thresholds(manifest.params, manifest.optimizer or OptimizerOptions())
        text = json.dumps(report.to_dict(), indent=2)
        if not report.converged:
            status = EXIT_NOT_CONVERGED
    elif cmd == "simulate":
        config = manifest.simulation or SimulationConfig(horizon=1e6 / manifest.params.mu_h, replications=8)
        text = json.dumps(simulate(manifest.params, manifest.policy, config).to_dict(), indent=2)
    else:
        rows = sweep(manifest.grid["mu_h"], manifest.grid["battery"], manifest.optimizer or OptimizerOptions())
        text = sweep_csv(rows)
        if not all(r.converged for r in rows):
            status = EXIT_NOT_CONVERGED
    if not text.endswith("\n"):
        text += "\n"
    return status, text


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehaoi",
        description="Average age of information under threshold policies with an energy-harvesting battery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", help="JSON manifest; flags override its fields")
        p.add_argument("--out", help=f"output file (relative paths resolve against ${OUTPUT_DIR_ENV})")

    def system(p, lists=False):
        if lists:
            p.add_argument("--mu-h", help="comma-separated energy arrival rates")
            p.add_argument("--battery", help="comma-separated battery sizes")
        else:
            p.add_argument("--mu-h", type=float, help="Poisson energy arrival rate")
            p.add_argument("--battery", type=int, help="battery capacity in energy units")

    def policy(p):
        p.add_argument("--taus", help="comma-separated thresholds, battery level 1 first")
        p.add_argument("--policy-file", help='JSON file {"mu_h": .., "battery": .., "taus": [..]}')

    def optimizer(p):
        p.add_argument("--restarts", type=int, help="random restarts (default 8)")
        p.add_argument("--max-evals", type=int, help="objective evaluations per restart (default 4000)")
        p.add_argument("--tol", type=float, help="relative convergence tolerance (default 1e-8)")
        p.add_argument("--seed", type=int, help="random seed (default 0)")

    p = sub.add_parser("evaluate", help="exact average age of a policy")
    system(p), policy(p), common(p)
    p = sub.add_parser("optimize", help="optimal thresholds for one battery size")
    system(p), optimizer(p), common(p)
    p = sub.add_parser("simulate", help="Monte Carlo estimate of the average age")
    system(p), policy(p), common(p)
    p.add_argument("--horizon", type=float, help="simulated time per replication (default 1e6/mu_h)")
    p.add_argument("--cycles", type=int, help="renewal cycles per replication instead of a horizon")
    p.add_argument("--replications", type=int, help="independent replications (default 8)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--warmup", type=float, help="discarded initial time (default 1%% of the run)")
    p.add_argument("--initial-battery", type=int, help="battery level at time 0 (default full)")
    p = sub.add_parser("sweep", help="optimise over a grid of rates and battery sizes; CSV out")
    system(p, lists=True), optimizer(p), common(p)
    return parser


def _merge_flags(args: argparse.Namespace) -> dict:
    """Manifest dict with command-line flags layered on top."""
    raw: dict = {}
    if args.manifest:
        with open(args.manifest, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ManifestError("manifest must be a JSON object")
        if raw.get("command", args.command) != args.command:
            raise ManifestError(f"manifest command {raw.get('command')!r} does not match '{args.command}'")
    raw["command"] = args.command
    if args.out:
        raw["output_path"] = args.out

    cmd = args.command
    if cmd == "sweep":
        grid = dict(raw.get("grid", {}))
        if args.mu_h:
            grid["mu_h"] = _csv_numbers(args.mu_h, float)
        if args.battery:
            grid["battery"] = _csv_numbers(args.battery, int)
        if grid:
            raw["grid"] = grid
    else:
        params = dict(raw.get("params", {}))
        if getattr(args, "policy_file", None):
            with open(args.policy_file, encoding="utf-8") as fh:
                data = json.load(fh)
            system_from_dict(data)
            params.update({k: data[k] for k in ("mu_h", "battery")})
            if "taus" in data:
                raw["policy"] = {"taus": data["taus"]}
        if args.mu_h is not None:
            params["mu_h"] = args.mu_h
        if args.battery is not None:
            params["battery"] = args.battery
        if params:
            raw["params"] = params
        if getattr(args, "taus", None):
            raw["policy"] = {"taus": _csv_numbers(args.taus, float)}

    if cmd in ("optimize", "sweep"):
        opt = dict(raw.get("optimizer", {}))
        for key in ("restarts", "max_evals", "tol", "seed"):
            if getattr(args, key) is not None:
                opt[key] = getattr(args, key)
        if opt:
            raw["optimizer"] = opt
    if cmd == "simulate":
        sim = dict(raw.get("simulation", {}))
        flags = {
            "horizon": args.horizon,
            "cycle_count": args.cycles,
            "replications": args.replications,
            "seed": args.seed,
            "warmup": args.warmup,
            "initial_battery": args.initial_battery,
        }
        if args.horizon is not None:
            sim.pop("cycle_count", None)
        if args.cycles is not None:
            sim.pop("horizon", None)
        sim.update({k: v for k, v in flags.items() if v is not None})
        if sim:
            if "horizon" not in sim and "cycle_count" not in sim and "mu_h" in raw.get("params", {}):
                sim["horizon"] = 1e6 / raw["params"]["mu_h"]
            sim.setdefault("replications", 8)
            raw["simulation"] = sim
    return raw


def _resolve_output(path: str) -> Path:
    out = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not out.is_absolute():
        out = Path(base) / out
    return out


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = parse_manifest(_merge_flags(args))
        status, text = run(manifest)
    except OSError as exc:
        print(f"ehaoi: error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"ehaoi: error: malformed JSON ({exc.msg} at line {exc.lineno} column {exc.colno})", file=sys.stderr)
        return EXIT_INVALID
    except (ManifestError, PolicyError, ValueError, TypeError) as exc:
        print(f"ehaoi: error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if manifest.output_path:
        try:
            out = _resolve_output(manifest.output_path)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"ehaoi: error: cannot write {manifest.output_path}: {exc.strerror or exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    if status == EXIT_NOT_CONVERGED:
        print("ehaoi: warning: optimizer hit max_evals before converging", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
