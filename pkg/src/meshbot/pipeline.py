"""Workspace-level steps behind the command line.

Workspace layout::

    candidates/            accepted meshes from ingestion, named by content hash
    ingest_report.json
    designs/<id>/          one processed mesh: model.json + meshes/, bank/ with URDFs and manifest
    runs/<name>/           evolution runs (config, history, checkpoints, repository copy)
"""
from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

from .errors import ConfigError, EmptyResultError
from .evolution import DesignRepository, EvolutionConfig, EvolutionHistory, run_evolution
from .mesh import load_mesh, mass_properties, scale_to_volume, validate_and_repair
from .mesh.mass import TARGET_VOLUME
from .model import assemble, export_bank, export_urdf, generate_variant_bank, load_model, save_model
from .segmentation import canonicalize, report_json, segment


class NotFoundError(ConfigError):
    """A command's input (a run, a design) does not exist."""


def design_id(mesh_path, name: str | None = None) -> str:
    path = Path(mesh_path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()[:10]
    stem = "".join(c if c.isalnum() or c in "-_" else "_" for c in (name or path.stem))
    return f"{stem}-{digest}"


def process_mesh(mesh_path, workspace, name: str | None = None, target_volume: float = TARGET_VOLUME) -> Path:
    """repair, orient, scale, segment, assemble and expand into a variant bank.

    Output goes to ``designs/<id>`` where the id hashes the input bytes, so a
    re-run rewrites the same files with the same content. Work happens in a
    scratch folder that replaces the old output only on success.
    """
    mesh_path = Path(mesh_path)
    if not mesh_path.exists():
        raise NotFoundError(f"no such mesh file: {mesh_path}")
    did = design_id(mesh_path, name)
    designs = Path(workspace) / "designs"
    final = designs / did
    scratch = designs / f".{did}.partial"
    shutil.rmtree(scratch, ignore_errors=True)
    try:
        raw = load_mesh(mesh_path)
        repaired, repair = validate_and_repair(raw)
        upright, _ = canonicalize(repaired)
        # scaling about the COM lifts or sinks the feet, so ground again
        scaled, frame = canonicalize(scale_to_volume(upright, target_volume))
        partition = segment(scaled)
        model = assemble(partition, name=did, source_id=did)
        bank = generate_variant_bank(model, did)
        if not bank.models:
            raise EmptyResultError("every leg scale was dropped from the bank")
        save_model(model, scratch / "model.json")
        manifest = export_bank(bank, scratch / "bank")
        (scratch / "segmentation.json").write_text(report_json(partition) + "\n")
        summary = {"id": did, "source": mesh_path.name, "repair": repair.to_dict(),
                   "volume": mass_properties(scaled).volume, "total_mass": model.total_mass,
                   "variants": len(bank.models), "dropped": bank.dropped,
                   "manifest": str(manifest.relative_to(scratch))}
        (scratch / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    shutil.rmtree(final, ignore_errors=True)
    scratch.rename(final)
    return final / "bank" / "manifest.json"


def load_designs(workspace) -> list:
    """Scale-0 models of every processed design, sorted by id."""
    root = Path(workspace) / "designs"
    paths = sorted(root.glob("*/model.json")) if root.exists() else []
    if not paths:
        raise NotFoundError(f"no processed designs under {root}; run `process` first")
    return [load_model(p) for p in paths]


def build_banks(models) -> tuple[DesignRepository, list]:
    repo, banks = DesignRepository(), []
    for m in models:
        bank = generate_variant_bank(m, m.source_id)
        repo.register_bank(bank)
        banks.append(bank)
    return repo, banks


def default_run_dir(workspace, config: EvolutionConfig) -> Path:
    return Path(workspace) / "runs" / f"{config.preference}-seed{config.seed}"


def evolve(workspace, config: EvolutionConfig, run_dir=None, evaluator=None) -> EvolutionHistory:
    repo, banks = build_banks(load_designs(workspace))
    run_dir = Path(run_dir) if run_dir else default_run_dir(workspace, config)
    run_dir.mkdir(parents=True, exist_ok=True)
    repo.save(run_dir / "repository")
    return run_evolution(config, repo, banks, run_dir, evaluator)


def export_best(run_dir, out_dir=None) -> Path:
    """URDF, meshes and a summary for the best genome of a run's last generation."""
    run_dir = Path(run_dir)
    history = EvolutionHistory.load(run_dir) if run_dir.exists() else None
    if history is None or not history.records:
        raise NotFoundError(f"no completed generations in {run_dir}")
    if not (run_dir / "repository" / "repository.json").exists():
        raise NotFoundError(f"{run_dir} has no design repository")
    repo = DesignRepository.load(run_dir / "repository")
    from .evolution import RobotGenome

    best = history.final_best
    genome = RobotGenome.from_dict(best["genome"])
    model = repo.build(genome)
    model.name = best["id"]
    out_dir = Path(out_dir) if out_dir else run_dir / "export"
    urdf = export_urdf(model, out_dir)
    summary = {"member_id": best["id"], "generation": history.records[-1]["generation"],
               "genome": best["genome"], "key": best["key"], "fitness": best["fitness"],
               "mean_episode_reward": best["mean_episode_reward"],
               "velocity_term_sum": best["velocity_term_sum"], "energy_term_sum": best["energy_term_sum"],
               "gait_params": best["gait_params"], "total_mass": model.total_mass, "urdf": urdf.name}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return urdf
