"""Command-line front end.

    anchorcov structure SCENARIO --out DIR
    anchorcov plan      SCENARIO --out DIR
    anchorcov simulate  SCENARIO --out DIR [--emit-plots] [--dump-policies]
    anchorcov analyze   SCENARIO --out DIR [--trajectory FILE]
    anchorcov all       SCENARIO --out DIR
    anchorcov all --manifest DIR/manifest.json --out OTHER

Exit codes: 0 ok, 1 an analysis check failed, 2 unreadable or malformed
input, 3 invalid geometry, 4 no convergence within ``max_steps`` (outputs are
still written).
"""

import argparse
import datetime
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import analyze
from .errors import CoverageError, GeometryError, ScenarioError, StepError
from .planner import gamma_tilde
from .scenario_io import (
    atomic_write,
    build_scenario,
    dumps,
    errors_csv,
    load_trajectory,
    paths_csv,
    read_json,
    resolve,
    trajectory_csv,
    trajectory_doc,
)
from .simulator import prepare, run
from .structuring import build_structure, validate_structure

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_GEOMETRY, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4

OVERRIDES = ("mode", "eta", "epsilon", "alpha", "beta", "gamma", "M", "max_steps", "tol",
             "seed", "core_mode", "perturb_degenerate", "schedule", "aoc_sampling")


class Outputs:
    """Collects the files written under one output directory."""

    def __init__(self, root):
        self.root = root
        self.files = []

    def write(self, name, data):
        atomic_write(os.path.join(self.root, name), data)
        self.files.append(name)


def _timestamp(manifest):
    if manifest is not None and manifest.get("created"):
        return manifest["created"]
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    secs = int(epoch) if epoch else int(time.time())
    return datetime.datetime.fromtimestamp(secs, datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _load(args):
    """Resolved scenario document, its source path and the manifest (if any)."""
    manifest = None
    if args.manifest:
        manifest = read_json(args.manifest, "manifest")
        if not isinstance(manifest, dict) or "scenario" not in manifest:
            raise ScenarioError("manifest has no 'scenario' entry")
        doc, source = manifest["scenario"], manifest.get("scenario_path")
    elif args.scenario:
        doc, source = read_json(args.scenario), args.scenario
    else:
        raise ScenarioError("a scenario file or --manifest is required")
    overrides = {k: getattr(args, k, None) for k in OVERRIDES}
    if not overrides["perturb_degenerate"]:
        overrides["perturb_degenerate"] = None
    return resolve(doc, overrides), source, manifest


def _write_manifest(out, args, resolved, source, manifest):
    doc = {
        "tool": "anchorcov",
        "version": __version__,
        "command": args.command,
        "scenario_path": source,
        "scenario": resolved,
        "seed": resolved["seed"],
        "created": _timestamp(manifest),
        "outputs": sorted(out.files),
    }
    atomic_write(os.path.join(out.root, "manifest.json"), dumps(doc))


def _structure(out, scenario):
    dnn = build_structure(scenario.config, scenario.core_mode, scenario.targets,
                          scenario.perturb_degenerate, scenario.seed)
    problems = validate_structure(dnn, scenario.config)
    doc = dnn.to_dict()
    doc["M"] = dnn.M
    out.write("structure.json", dumps(doc))
    out.write("structure.dot", dnn.to_dot())
    out.write("validation.txt", "".join(p + "\n" for p in problems) or "valid\n")
    return problems


def _plan(out, dnn, desired):
    G = gamma_tilde(desired, dnn)
    z = desired.z
    doc = desired.to_dict()
    doc["goal_cells"] = {str(i): int(c) for i, c in desired.goal_cells.items()}
    doc["fixed_point_residual"] = float(np.max(np.abs(z - G @ z)))
    out.write("plan.json", dumps(doc))


def _simulate(out, traj, emit_plots, dump_policies):
    out.write("trajectory.csv", trajectory_csv(traj))
    out.write("trajectory.json", dumps(trajectory_doc(traj)))
    if emit_plots:
        out.write("paths.csv", paths_csv(traj))
        out.write("errors.csv", errors_csv(traj))
    if dump_policies:
        out.write("policies.json", dumps([p.to_dict(i) for i, p in traj.policies.items()]))


def _analyze(out, traj, scenario):
    eta = scenario.eta if scenario.mode == "aoc" else None
    report = analyze(traj, eta=eta)
    out.write("report.json", report.to_json() + "\n")
    out.write("report.txt", report.to_text())
    return report


def execute(args):
    resolved, source, manifest = _load(args)
    scenario = build_scenario(resolved)
    out = Outputs(args.out)
    code = EXIT_OK
    cmd = args.command

    if cmd in ("structure", "all"):
        if _structure(out, scenario):
            code = EXIT_GEOMETRY
    if cmd != "structure" and code == EXIT_OK:
        dnn, desired = prepare(scenario)
        _plan(out, dnn, desired)
        traj = None
        if cmd in ("simulate", "all"):
            traj = run(scenario, dnn, desired)
            _simulate(out, traj, args.emit_plots, args.dump_policies)
        elif cmd == "analyze":
            if args.trajectory:
                traj = load_trajectory(read_json(args.trajectory, "trajectory"), scenario)
            else:
                traj = run(scenario, dnn, desired)
        if cmd in ("analyze", "all"):
            report = _analyze(out, traj, scenario)
            if not report.passed:
                code = EXIT_CHECK
        if traj is not None and not traj.converged and cmd != "analyze":
            code = EXIT_NOT_CONVERGED
    _write_manifest(out, args, resolved, source, manifest)
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="anchorcov", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("structure", "layered network from the reference formation"),
                        ("plan", "desired positions from the target set"),
                        ("simulate", "run the coverage dynamics"),
                        ("analyze", "row-stochasticity, contraction and convergence checks"),
                        ("all", "every stage, every export")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario", nargs="?", help="scenario JSON file")
        p.add_argument("--manifest", help="re-run with the scenario recorded in a manifest")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--mode", choices=["ideal", "aoc"])
        p.add_argument("--eta", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--resolution", dest="M", type=int, metavar="M")
        p.add_argument("--max-steps", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--core-mode", choices=["distance", "target-center"])
        p.add_argument("--perturb-degenerate", action="store_true")
        p.add_argument("--schedule", choices=["synchronous", "layered"])
        p.add_argument("--aoc-sampling", choices=["project", "sample"])
        p.add_argument("--emit-plots", action="store_true", help="write paths.csv and errors.csv")
        p.add_argument("--dump-policies", action="store_true", help="write final policies")
        if name == "analyze":
            p.add_argument("--trajectory", help="analyze a saved trajectory.json instead of re-running")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return execute(args)
    except StepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY if isinstance(exc.cause, GeometryError) else EXIT_CHECK
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GeometryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (CoverageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
