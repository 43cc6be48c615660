"""Command-line interface.

Every command writes its outputs plus one ``manifest.json`` into an output
directory.  ``hfrobust rerun MANIFEST`` repeats a run from its manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shlex
import sys
from pathlib import Path

from . import __version__
from .builder import ScenarioError, build, load_scenario, scenario_path
from .centrality import CentralityBasis, ConvergenceError, rank_scores, scores
from .experiments import (CampaignSpec, degradation_cells, DegradationTable, fragments_at,
                          run_campaign, write_rows)
from .graph import GraphError, GraphValidationError, ProcessGraph, parse_graph_csv, write_graph_csv
from .optimizer import OptimizationSpec, optimize
from .percolation import METRICS, AttackPlan, run_attack

OUTPUT_ROOT_ENV = "HFROBUST_OUTPUT_ROOT"
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- inputs ------------------------------------------------------------------------


def _graph_inputs(spec: str) -> tuple[str, list[Path]]:
    """('csv' | 'scenario', files) for a graph directory or a scenario."""
    p = Path(spec)
    if p.is_dir():
        files = [p / "nodes.csv", p / "edges.csv"]
        missing = [str(f) for f in files if not f.is_file()]
        if missing:
            raise UsageError(f"graph directory {spec} lacks {', '.join(missing)}")
        return "csv", files
    try:
        return "scenario", [scenario_path(spec)]
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None


def _load_graph(args) -> ProcessGraph:
    kind, files = _graph_inputs(args.graph)
    if kind == "csv":
        g = parse_graph_csv(*files)
        if args.auto_normalize:
            for node, total in g.normalize_incoming():
                print(f"warning: node {node} incoming weights summed to {total:.12g}; normalised",
                      file=sys.stderr)
        return g.freeze()
    result = build(load_scenario(files[0], auto_normalize=args.auto_normalize))
    for line in result.log:
        if line.startswith("warning"):
            print(line, file=sys.stderr)
    return result.graph


# -- argument parsing -------------------------------------------------------------------


def _plan_flags(p: argparse.ArgumentParser, *, selection: str = "random", seed_flags=("--seed",)):
    d = AttackPlan()
    g = p.add_argument_group("attack plan")
    g.add_argument("--strength", choices=["complete", "partial"], default=d.strength.value)
    g.add_argument("--selection", choices=["random", "targeted"], default=selection)
    g.add_argument("--basis", choices=[b.value for b in CentralityBasis], default=d.basis.value)
    g.add_argument("--ranking-mode", choices=["static", "adaptive"], default=d.ranking_mode.value)
    g.add_argument("--partial-step", "--step", type=float, default=d.partial_step)
    g.add_argument("--random-step", type=float, nargs=2, metavar=("LO", "HI"), default=None)
    g.add_argument("--qof-fraction", type=float, default=d.qof_fraction)
    g.add_argument("--acceptable-service-fraction", type=float, default=None)
    if seed_flags:
        g.add_argument(*seed_flags, dest="seed", type=int, default=d.seed)
    g.add_argument("--stop-at-nodes", type=int, default=d.stop_at_nodes)
    g.add_argument("--allow-any-basis", action="store_true")


def _plan(args, seed: int = 0) -> AttackPlan:
    return AttackPlan(strength=args.strength, selection=args.selection, basis=args.basis,
                      ranking_mode=args.ranking_mode, partial_step=args.partial_step,
                      random_step=tuple(args.random_step) if args.random_step else None,
                      qof_fraction=args.qof_fraction,
                      acceptable_service_fraction=args.acceptable_service_fraction,
                      seed=seed if getattr(args, "seed", None) is None else args.seed,
                      stop_at_nodes=args.stop_at_nodes, allow_any_basis=args.allow_any_basis)


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_metrics(text: str) -> list[str]:
    ms = [x.strip() for x in text.split(",") if x.strip()]
    bad = [m for m in ms if m not in METRICS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown metrics {bad}; choose from {', '.join(METRICS)}")
    return ms


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hfrobust", description=(
        "Robustness analysis of weighted process-dependency graphs of interdependent "
        "urban utility networks."))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        if graph:
            p.add_argument("graph", help="graph directory (nodes.csv + edges.csv), scenario JSON "
                                         "file, or bundled scenario name")
        p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV} or "
                                     "./hfrobust-out, plus the command name)")
        p.add_argument("--auto-normalize", action="store_true",
                       help="rescale incoming weights that do not sum to one instead of failing")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker threads (default: all cores); never changes results")

    p = sub.add_parser("build", help="build graph files from a scenario")
    p.add_argument("scenario", help="scenario JSON file or bundled scenario name")
    common(p, graph=False)

    p = sub.add_parser("attack", help="run one staged attack and write its trace")
    common(p)
    _plan_flags(p)
    p.add_argument("--max-stages", type=int, default=None)

    p = sub.add_parser("campaign", help="Monte-Carlo attack campaign")
    common(p)
    _plan_flags(p, seed_flags=())
    d = CampaignSpec()
    p.add_argument("--trials", type=int, default=d.trials)
    p.add_argument("--metrics", type=_csv_metrics, default=list(d.metrics))
    p.add_argument("--levels", type=_csv_floats, default=list(d.levels))
    p.add_argument("--seed-base", "--seed", dest="seed_base", type=int, default=d.seed_base)
    p.add_argument("--fragment-stages", type=_csv_ints, default=[1, 5, 10],
                   help="stages at which to write component-size histograms of trial 0")

    p = sub.add_parser("optimize", help="search incoming dependency weights")
    common(p)
    _plan_flags(p, selection="targeted", seed_flags=("--attack-seed",))
    o = OptimizationSpec()
    p.add_argument("--objective", choices=list(METRICS), default=o.objective)
    p.add_argument("--level", type=float, default=o.level)
    p.add_argument("--mode", choices=["exhaustive", "random_sampling"], default=o.mode.value)
    p.add_argument("--samples", type=int, default=o.samples)
    p.add_argument("--seed", type=int, default=o.seed, help="sampling seed")
    p.add_argument("--cap", type=int, default=o.cap)

    p = sub.add_parser("centrality", help="score every process by a centrality basis")
    common(p)
    p.add_argument("--basis", choices=[b.value for b in CentralityBasis],
                   default=CentralityBasis.WEIGHTED_OUT_DEGREE.value)

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: <original>-rerun)")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--check", action="store_true",
                   help="exit 1 unless every CSV matches the recorded hash")
    return parser


# -- commands ---------------------------------------------------------------------------


def _outdir(args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, "hfrobust-out")) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolved(args) -> dict:
    skip = {"out", "jobs", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _argv(args) -> list[str]:
    """Canonical argument list that reproduces ``args``."""
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices[args.command]
    argv = [args.command]
    for action in sub._actions:
        if action.dest in ("help", "out", "jobs"):
            continue
        value = getattr(args, action.dest, None)
        if not action.option_strings:
            argv.append(str(value))
        elif isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(action.option_strings[0])
        elif value is not None:
            flag = action.option_strings[0]
            if isinstance(value, (list, tuple)):
                if action.nargs:
                    argv += [flag, *map(repr, value)]
                else:
                    argv += [flag, ",".join(str(x) for x in value)]
            else:
                argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


def _write_manifest(out: Path, args, inputs: list[Path], outputs: list[str], seeds) -> None:
    manifest = {
        "tool": "hfrobust",
        "version": __version__,
        "command": args.command,
        "argv": _argv(args),
        "resolved": _resolved(args),
        "inputs": [{"path": str(p.resolve()), "sha256": _sha256(p)} for p in inputs],
        "seeds": seeds,
        "output_dir": str(out.resolve()),
        "outputs": {name: _sha256(out / name) for name in sorted(outputs)},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def cmd_build(args) -> int:
    try:
        path = scenario_path(args.scenario)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args)
    try:
        result = build(load_scenario(path, auto_normalize=args.auto_normalize))
    except (ScenarioError, GraphError) as exc:
        report = getattr(exc, "problems", None) or [str(exc)]
        (out / "validation_report.txt").write_text("\n".join(report) + "\n", encoding="utf-8")
        for line in report:
            print(f"error: {line}", file=sys.stderr)
        return 2
    g = result.graph
    write_graph_csv(g, out / "nodes.csv", out / "edges.csv")
    write_rows(out / "derived_dependencies.csv", [["source", "target"], *result.derived])
    write_rows(out / "knowledge_matrix.csv", result.knowledge.rows())
    (out / "build_log.txt").write_text("\n".join(result.log) + "\n", encoding="utf-8")
    (out / "validation_report.txt").write_text(
        f"OK: {g.n_original} processes, {len(g.original_edges())} dependencies; "
        "every incoming weight sum equals 1\n", encoding="utf-8")
    for line in result.log:
        if line.startswith("warning"):
            print(line, file=sys.stderr)
    _write_manifest(out, args, [path], ["nodes.csv", "edges.csv", "derived_dependencies.csv",
                                        "knowledge_matrix.csv"], None)
    print(f"{g.n_original} processes, {len(g.original_edges())} dependencies "
          f"({len(result.derived)} derived) -> {out}")
    return 0


def cmd_attack(args) -> int:
    g = _load_graph(args)
    plan = _plan(args)
    trace = run_attack(g, plan, max_stages=args.max_stages)
    out = _outdir(args)
    trace.to_csv(out / "trace.csv")
    _write_manifest(out, args, _graph_inputs(args.graph)[1], ["trace.csv"], [plan.seed])
    last = trace.records[-1]
    print(f"{len(trace.stages)} stages; final lcc={last.lcc} ncc={last.ncc} fr={last.fr:.4f} "
          f"sr={last.sr:.4f} -> {out}")
    return 0


def cmd_campaign(args) -> int:
    g = _load_graph(args)
    plan = _plan(args, seed=args.seed_base)
    spec = CampaignSpec(plan=plan, trials=args.trials, metrics=tuple(args.metrics),
                        levels=tuple(args.levels), seed_base=args.seed_base)
    result = run_campaign(g, spec, jobs=args.jobs)
    out = _outdir(args)
    outputs = ["trajectory.csv", "degradation_table.csv", "trial_stages.csv"]
    write_rows(out / "trajectory.csv", result.trajectory_rows())
    name = plan.selection.value if plan.selection.value == "random" else \
        f"{plan.selection.value}-{plan.basis.value}"
    table = DegradationTable(degradation_cells(result, f"{plan.strength.value}-{name}"))
    write_rows(out / "degradation_table.csv", table.rows())
    write_rows(out / "trial_stages.csv", [["trial", "seed", "stages"]] + [
        [str(k), str(spec.seed_base + k), str(int(n))] for k, n in enumerate(result.lengths)])
    first = AttackPlan.from_dict({**plan.to_dict(), "seed": spec.seed_base})
    for k in sorted(set(args.fragment_stages)):
        hist = fragments_at(g, first, k)
        fname = f"fragments_stage{k}.csv"
        write_rows(out / fname, [["component_size", "count"], *hist.items()])
        outputs.append(fname)
    _write_manifest(out, args, _graph_inputs(args.graph)[1], outputs,
                    {"seed_base": spec.seed_base, "trials": spec.trials})
    print(f"{spec.trials} trials, up to {result.n_stages} stages -> {out}")
    return 0


def cmd_optimize(args) -> int:
    g = _load_graph(args)
    plan = _plan(args)
    spec = OptimizationSpec(objective=args.objective, level=args.level, plan=plan, mode=args.mode,
                            samples=args.samples, seed=args.seed, cap=args.cap)
    result = optimize(g, spec, jobs=args.jobs)
    best = g.with_weights(result.best.weights())
    out = _outdir(args)
    write_rows(out / "best_edges.csv", [["source", "target", "weight"]] +
               [[s, t, repr(w)] for s, t, w in best.original_edges()])
    write_rows(out / "search_log.csv", result.log_rows())
    _write_manifest(out, args, _graph_inputs(args.graph)[1], ["best_edges.csv", "search_log.csv"],
                    {"search_seed": spec.seed, "attack_seed": plan.seed})
    print(f"best objective {result.objective} (current weights: {result.baseline}) over "
          f"{len(result.log)} assignments -> {out}")
    return 0


def cmd_centrality(args) -> int:
    g = _load_graph(args)
    values = scores(g, args.basis)
    out = _outdir(args)
    rows = [["id", "label", "score"]]
    for v in rank_scores(values):
        rows.append([str(v), g.node(v).label, repr(values[v])])
    write_rows(out / "scores.csv", rows)
    _write_manifest(out, args, _graph_inputs(args.graph)[1], ["scores.csv"], None)
    print(f"{len(values)} scores ({args.basis}) -> {out}")
    return 0


def cmd_rerun(args) -> int:
    path = Path(args.manifest)
    if path.is_dir():
        path = path / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    for item in manifest.get("inputs", []):
        p = Path(item["path"])
        if not p.is_file() or _sha256(p) != item["sha256"]:
            print(f"warning: input {p} changed since the original run", file=sys.stderr)
    out = args.out or f"{manifest['output_dir']}-rerun"
    argv += ["--out", out]
    if args.jobs is not None:
        argv += ["--jobs", str(args.jobs)]
    print("rerun:", shlex.join(argv), file=sys.stderr)
    code = main(argv)
    if code or not args.check:
        return code
    mismatched = [name for name, digest in manifest.get("outputs", {}).items()
                  if not (Path(out) / name).is_file() or _sha256(Path(out) / name) != digest]
    for name in mismatched:
        print(f"mismatch: {name}", file=sys.stderr)
    return 1 if mismatched else 0


COMMANDS = {"build": cmd_build, "attack": cmd_attack, "campaign": cmd_campaign,
            "optimize": cmd_optimize, "centrality": cmd_centrality, "rerun": cmd_rerun}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GraphValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, GraphError, ConvergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
