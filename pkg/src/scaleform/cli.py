"""Command-line entry point: ``scaleform <verb> [options]``.

Exit codes: 0 success, 2 validation or parse failure, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DecompositionError, DivergenceError, FormationError, SceneFormatError
from .formation import recover_params
from .graph import decompose_deps
from .pipeline import ValidationReport, validate_scene
from .scenefile import SceneFile, load_scene, parse_states, shipped_scene, write_json, write_trajectory_csv
from .schedule import ManeuverSchedule
from .simulator import SimConfig, Trajectory, compute_errors, run_simulation
from .stabilizer import synthesize_stabilizer, verify_stabilizer
from .svg import errors_svg, paths_svg, write_svg

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGENCE, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _load(args: argparse.Namespace) -> SceneFile:
    if args.scene is None:
        return shipped_scene()
    try:
        return load_scene(args.scene)
    except OSError as exc:
        raise CliError(f"cannot read scene: {exc}", EXIT_IO) from exc


def _sim_config(sf: SceneFile, args: argparse.Namespace) -> SimConfig:
    overrides = {}
    for name in ("seed", "dt", "mode", "t_end", "k_l", "k_f"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return dataclasses.replace(sf.sim, **overrides)


def _out_dir(args: argparse.Namespace, default: str | None = None) -> Path | None:
    out = args.out or default
    if out is None:
        return None
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}", EXIT_IO) from exc
    return path


def cmd_validate(args: argparse.Namespace) -> int:
    sf = _load(args)
    rep = validate_scene(sf, args.mode)
    print(rep.table())
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def cmd_decompose(args: argparse.Namespace) -> int:
    sf = _load(args)
    scene = sf.scene
    try:
        dec = decompose_deps(scene.graph, scene.leaders[:2])
    except DecompositionError as exc:
        print(f"not 2-rooted: {exc} (witness agent {exc.witness})", file=sys.stderr)
        return EXIT_VALIDATION
    doc = {
        "roots": list(dec.roots),
        "deps": [{"entry_i": d.entry_i, "entry_j": d.entry_j, "inner": list(d.inner)} for d in dec.deps],
        "construction_label": {str(k): v for k, v in sorted(dec.construction_label.items())},
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _require_valid(sf: SceneFile, mode: str | None, force: bool = False) -> ValidationReport:
    rep = validate_scene(sf, mode)
    if not rep.passed and not force:
        stage = rep.first_failure
        raise CliError(f"validation failed at {stage.name}: {stage.detail}", EXIT_VALIDATION)
    return rep


def cmd_laplacian(args: argparse.Namespace) -> int:
    sf = _load(args)
    rep = _require_valid(sf, "moving")
    lap = rep.control_lap if args.graph == "control" else rep.lap
    print(f"agents {lap.n}, constraints {len(lap.triples)}, rank(M) {lap.rank} of {3 * lap.n}")
    out = _out_dir(args)
    if out is not None:
        try:
            for p in lap.dump_csv(out):
                print(p)
        except OSError as exc:
            raise CliError(f"cannot write Laplacian CSV: {exc}", EXIT_IO) from exc
    return EXIT_OK


def cmd_stabilize(args: argparse.Namespace) -> int:
    sf = _load(args)
    rep = _require_valid(sf, "moving")
    scene = sf.scene.with_graph(rep.dec.induced_graph())
    rate = None if args.raw else 1.0
    st = synthesize_stabilizer(scene, rep.dec, rep.control_lap, method=args.method, rate=rate)
    spectral = verify_stabilizer(st.D, rep.control_lap)
    doc = {
        "methods": st.methods,
        "D": {str(k): v.tolist() for k, v in st.per_agent(scene.m).items()},
        "min_real_part": st.min_real_part,
        "spectral_abscissa": st.spectral_abscissa,
        "similarity_gap": spectral.similarity_gap,
        "passed": spectral.passed,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK if spectral.passed else EXIT_VALIDATION


def _manifest(sf: SceneFile, config: SimConfig, rep: ValidationReport) -> dict:
    return {
        "scene": sf.name,
        "scene_sha256": sf.sha256,
        "config": config.to_dict(),
        "validation": rep.verdicts(),
        "D": None,
        "spectral_abscissa": None,
        "rates": None,
        "final_errors": None,
        "outputs": [],
    }


def _write_outputs(traj: Trajectory, out: Path, stride: int) -> list[str]:
    names = []
    write_trajectory_csv(traj, out / "trajectory.csv", stride)
    names.append("trajectory.csv")
    if len(traj) > 1:
        write_svg(paths_svg(traj), out / "paths.svg")
        write_svg(errors_svg(traj), out / "errors.svg")
        names += ["paths.svg", "errors.svg"]
    return names


def simulate(sf: SceneFile, config: SimConfig, out: Path, keyframe: int | None = None,
             force: bool = False, stride: int = 10) -> tuple[int, dict]:
    """Validate, run and write artifacts; returns the exit code and manifest."""
    rep = validate_scene(sf, config.mode)
    manifest = _manifest(sf, config, rep)
    if not rep.passed and not force:
        stage = rep.first_failure
        manifest.update(status="validation_failed", reason=f"{stage.name}: {stage.detail}")
        write_json(manifest, out / "manifest.json")
        return EXIT_VALIDATION, manifest

    schedule = sf.schedule
    if keyframe is not None:
        frames = sf.schedule.keyframes
        if not -len(frames) <= keyframe < len(frames):
            raise CliError(f"keyframe index {keyframe} out of range (schedule has {len(frames)})", EXIT_VALIDATION)
        schedule = ManeuverSchedule.constant(frames[keyframe].params)
    if rep.stabilizer is not None:
        manifest["D"] = rep.stabilizer.D.tolist()
        manifest["spectral_abscissa"] = rep.stabilizer.spectral_abscissa

    code = EXIT_OK
    try:
        traj = run_simulation(sf.scene, config, schedule, rep.dec, rep.stabilizer)
        manifest["status"] = "ok"
    except DivergenceError as exc:
        traj = exc.trajectory
        manifest.update(status="diverged", reason=str(exc), diverged_at=exc.time)
        code = EXIT_DIVERGENCE
    except FormationError as exc:
        manifest.update(status="failed", reason=str(exc))
        write_json(manifest, out / "manifest.json")
        return EXIT_VALIDATION, manifest

    if traj is not None and len(traj):
        errs = compute_errors(traj)
        manifest["rates"] = {"leaders": errs.rate_l, "followers": errs.rate_f}
        manifest["final_errors"] = {"leaders": errs.final_l, "followers": errs.final_f}
        manifest["outputs"] = _write_outputs(traj, out, stride)
    manifest["outputs"].append("manifest.json")
    write_json(manifest, out / "manifest.json")
    return code, manifest


def cmd_simulate(args: argparse.Namespace) -> int:
    sf = _load(args)
    config = _sim_config(sf, args)
    out = _out_dir(args, "run")
    try:
        code, manifest = simulate(sf, config, out, args.keyframe, args.force, args.stride)
    except OSError as exc:
        raise CliError(f"cannot write outputs: {exc}", EXIT_IO) from exc
    print(f"status {manifest['status']}")
    if manifest.get("reason"):
        print(f"reason {manifest['reason']}")
    if manifest["final_errors"]:
        fe = manifest["final_errors"]
        print(f"final |delta_l| {fe['leaders']:.6g}  |delta_f| {fe['followers']:.6g}")
    print(f"outputs in {out}")
    return code


def cmd_recover(args: argparse.Namespace) -> int:
    sf = _load(args)
    try:
        text = Path(args.states).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read leader states: {exc}", EXIT_IO) from exc
    states = parse_states(text, sf.scene.m)
    rec = recover_params(states, sf.scene)
    doc = {"s": rec.params.s.tolist(), "tau": rec.params.tau.tolist(), "residual": rec.residual}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    out = _out_dir(args, "batch")
    scenes = args.scenes or [None]
    seeds = args.seeds or [None]
    summary = []
    worst = EXIT_OK
    for scene_path in scenes:
        ns = argparse.Namespace(**vars(args))
        ns.scene = scene_path
        sf = _load(ns)
        stem = Path(scene_path).stem if scene_path else "shipped"
        for seed in seeds:
            ns.seed = seed if seed is not None else args.seed
            config = _sim_config(sf, ns)
            run_dir = out / f"{stem}-seed{config.seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            code, manifest = simulate(sf, config, run_dir, args.keyframe, args.force, args.stride)
            worst = max(worst, code)
            summary.append({"run": run_dir.name, "exit": code, "status": manifest["status"],
                            "final_errors": manifest["final_errors"], "rates": manifest["rates"]})
            print(f"{run_dir.name}: {manifest['status']}")
    write_json(summary, out / "summary.json")
    return worst


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", help="scene JSON file (default: the bundled nine-agent scene)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="initial-state seed")
    common.add_argument("--dt", type=float, help="integration step [s]")
    common.add_argument("--mode", choices=("stationary", "moving"), help="leader mode")
    common.add_argument("--force", action="store_true", help="run even when validation fails")

    parser = argparse.ArgumentParser(prog="scaleform", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", parents=[common], help="run the validation pipeline")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("decompose", parents=[common], help="print a DEP decomposition")
    p.set_defaults(func=cmd_decompose)
    p = sub.add_parser("laplacian", parents=[common], help="assemble M and optionally dump CSV")
    p.add_argument("--graph", choices=("scene", "control"), default="scene",
                   help="full sensing graph or the DEP-induced control graph")
    p.set_defaults(func=cmd_laplacian)
    p = sub.add_parser("stabilize", parents=[common], help="synthesize the diagonal stabilizer")
    p.add_argument("--method", choices=("auto", "closed_form", "search"), default="auto")
    p.add_argument("--raw", action="store_true", help="skip per-block rate normalization")
    p.set_defaults(func=cmd_stabilize)

    for name, func, helptext in (("simulate", cmd_simulate, "simulate one run"),
                                 ("batch", cmd_batch, "simulate several scenes and seeds")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--keyframe", type=int, help="hold this keyframe fixed as the target")
        p.add_argument("--t-end", dest="t_end", type=float, help="simulated duration [s]")
        p.add_argument("--k-l", dest="k_l", type=float, help="leader gain")
        p.add_argument("--k-f", dest="k_f", type=float, help="follower gain")
        p.add_argument("--stride", type=int, default=10, help="CSV row stride")
        if name == "batch":
            p.add_argument("scenes", nargs="*", help="scene files (default: bundled scene)")
            p.add_argument("--seeds", type=int, nargs="+", help="seeds to run for every scene")
        p.set_defaults(func=func)

    p = sub.add_parser("recover", parents=[common], help="recover (s, tau) from leader states")
    p.add_argument("--states", required=True, help="file with 3m reals, one leader pose per line")
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SceneFormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FormationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
