"""Command line: ingest, process, evolve, export, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_settings
from .errors import ConfigError, EvaluationError, GeometryError, IngestionError, MeshFormatError
from .evaluator.reward import PREFERENCES

EXIT_OK = 0
EXIT_NO_CANDIDATES = 1
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_GEOMETRY = 4
EXIT_EVALUATION = 5

log = logging.getLogger("meshbot")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def cmd_ingest(args) -> int:
    from .ingest import PromptSpec, ServiceConfig, ingest_local, ingest_remote

    settings = load_settings(args.config)
    ing = settings.ingestion
    threshold = args.threshold if args.threshold is not None else float(ing["symmetry_threshold"])
    out = Path(args.workspace)
    if args.local:
        reports = ingest_local(args.local, out, threshold)
    else:
        spec = PromptSpec(" ".join(args.description), args.candidates or int(ing["candidates"]))
        kw = {k: ing[k] for k in ("timeout", "workers") if k in ing}
        service = ServiceConfig.from_env(ing.get("endpoint"), **kw)
        log.info("requesting %d candidates for %r", spec.candidate_count, spec.rendered_prompt)
        reports = ingest_remote(spec, service, out, threshold)
    accepted = [r for r in reports if r.accepted]
    _emit({"accepted": [r.path for r in accepted], "rejected": [r.name for r in reports if not r.accepted],
           "report": str(out / "ingest_report.json")})
    if not accepted:
        print("warning: no candidate passed the filters", file=sys.stderr)
        return EXIT_NO_CANDIDATES
    return EXIT_OK


def cmd_process(args) -> int:
    from .pipeline import process_mesh

    manifest = process_mesh(args.mesh, args.workspace, args.name)
    body = json.loads(manifest.read_text())
    _emit({"design": body["source_id"], "variants": len(body["variants"]), "manifest": str(manifest)})
    return EXIT_OK


def _evolution_config(args, settings):
    from .evolution import EvolutionConfig

    s = settings.with_evolution(preference=args.preference, generations=args.generations, seed=args.seed,
                                population_size=args.population_size, budget=args.budget,
                                workers=args.workers, evaluator=args.evaluator)
    if args.smoke:
        for k, v in (("population_size", 20), ("n_elites", 10), ("n_mutants", 5), ("n_children", 5)):
            s.evolution.setdefault(k, v)
    evo = dict(s.evolution)
    if args.endpoint_command:
        evo["endpoint"] = {"kind": "subprocess", "command": args.endpoint_command}
    unknown = set(evo) - set(EvolutionConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown evolution settings: {sorted(unknown)}")
    try:
        return EvolutionConfig(**evo, command=s.command, sim=s.sim, weights=s.weights)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad evolution settings: {exc}") from exc


def cmd_evolve(args) -> int:
    from .pipeline import default_run_dir, evolve

    config = _evolution_config(args, load_settings(args.config))
    run_dir = Path(args.run) if args.run else default_run_dir(args.workspace, config)
    history = evolve(args.workspace, config, run_dir)
    best = history.final_best
    _emit({"run": str(run_dir), "generations": len(history.records) - 1, "best_id": best["id"],
           "best_key": best["key"], "best_fitness": best["fitness"]})
    return EXIT_OK


def cmd_export(args) -> int:
    from .pipeline import export_best

    urdf = export_best(args.run, args.out)
    _emit({"urdf": str(urdf), "summary": str(urdf.parent / "summary.json")})
    return EXIT_OK


def cmd_report(args) -> int:
    from .evolution import write_report
    from .pipeline import NotFoundError

    try:
        csv_path, svg_path = write_report(args.run, args.out)
    except FileNotFoundError as exc:
        raise NotFoundError(str(exc)) from exc
    _emit({"csv": str(csv_path), "svg": str(svg_path)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meshbot", description="Turn quadruped meshes into evolved, walking robots.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, workspace=True):
        p.add_argument("--config", help="TOML file with [sim], [reward], [evolution], [ingestion] tables")
        if workspace:
            p.add_argument("--workspace", default=".", help="workspace directory (default: current)")

    p = sub.add_parser("ingest", help="fetch or load candidate meshes and filter them")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--description", nargs="+", help="one to three words describing the robot")
    src.add_argument("--local", nargs="+", help="mesh files to check instead of calling the service")
    p.add_argument("--candidates", type=int, help="number of candidates to request")
    p.add_argument("--threshold", type=float, help="bilateral symmetry threshold")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("process", help="mesh to articulated robot and its 30-variant bank")
    p.add_argument("mesh")
    p.add_argument("--name", help="design name (default: file stem)")
    common(p)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("evolve", help="evolve morphologies from the processed designs")
    p.add_argument("--preference", choices=PREFERENCES)
    p.add_argument("--generations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--population-size", type=int)
    p.add_argument("--budget", type=int, help="gait evaluations per robot")
    p.add_argument("--workers", type=int)
    p.add_argument("--evaluator", choices=("builtin", "external"))
    p.add_argument("--endpoint-command", nargs="+", help="external evaluator command (subprocess transport)")
    p.add_argument("--smoke", action="store_true", help="20 robots: 10 elites, 5 mutants, 5 children")
    p.add_argument("--run", help="run directory (default: runs/<preference>-seed<seed>)")
    common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("export", help="write the best robot of a run as URDF")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("report", help="CSV and SVG summary of a run")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, FileNotFoundError)):
        return EXIT_CONFIG
    if isinstance(exc, IngestionError):
        return EXIT_INGESTION
    if isinstance(exc, (GeometryError, MeshFormatError)):
        return EXIT_GEOMETRY
    if isinstance(exc, EvaluationError):
        return EXIT_EVALUATION
    raise exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IngestionError, GeometryError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
