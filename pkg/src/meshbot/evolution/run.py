"""The outer loop: evaluate, record, checkpoint, select, repeat."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..evaluator.external import Endpoint
from ..evaluator.reward import PREFERENCES, CommandProfile, RewardWeights
from ..evaluator.search import DEFAULT_BUDGET
from ..evaluator.sim import SimConfig
from .evaluate import BuiltinEvaluator, ExternalEvaluator
from .genome import DesignRepository
from .population import Population, init_population, step_generation

RECORD_DIR = "history"
CHECKPOINT_DIR = "checkpoints"


@dataclass
class EvolutionConfig:
    generations: int = 20
    preference: str = "none"
    seed: int = 0
    population_size: int | None = None   # initial population; None takes every bank variant
    n_elites: int = 100
    n_mutants: int = 50
    n_children: int = 50
    budget: int = DEFAULT_BUDGET
    evaluator: str = "builtin"           # or "external"
    workers: int = 1
    command: CommandProfile = field(default_factory=CommandProfile)
    sim: SimConfig = field(default_factory=SimConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    endpoint: dict | None = None

    def __post_init__(self):
        if self.preference not in PREFERENCES:
            raise ConfigError(f"preference must be one of {PREFERENCES}")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if self.n_elites < 1 or self.n_mutants < 0 or self.n_children < 0:
            raise ConfigError("elite count must be positive and offspring counts non-negative")
        if self.budget < 1:
            raise ConfigError("evaluation budget must be at least 1")
        if self.evaluator not in ("builtin", "external"):
            raise ConfigError("evaluator must be 'builtin' or 'external'")
        if self.evaluator == "external" and not self.endpoint:
            raise ConfigError("the external evaluator needs an endpoint")

    @classmethod
    def smoke(cls, **kw) -> "EvolutionConfig":
        """The 20-genome layout: 10 elites, 5 mutants, 5 children."""
        base = dict(population_size=20, n_elites=10, n_mutants=5, n_children=5)
        base.update(kw)
        return cls(**base)

    @property
    def population_after_selection(self) -> int:
        return self.n_elites + self.n_mutants + self.n_children

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("command", "sim", "weights")}
        d.update(command=self.command.to_dict(), sim=self.sim.to_dict(), weights=self.weights.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown evolution settings: {sorted(unknown)}")
        try:
            if "command" in d:
                d["command"] = CommandProfile.from_dict(d["command"])
            if "sim" in d:
                d["sim"] = SimConfig.from_dict(d["sim"])
            if "weights" in d:
                d["weights"] = RewardWeights.from_dict(d["weights"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad evolution config: {exc}") from exc


@dataclass
class EvolutionHistory:
    run_dir: Path
    records: list

    @property
    def best_fitness(self) -> list:
        return [r["best"]["fitness"] for r in self.records]

    @property
    def final_best(self) -> dict:
        return self.records[-1]["best"]

    @classmethod
    def load(cls, run_dir) -> "EvolutionHistory":
        run_dir = Path(run_dir)
        paths = sorted((run_dir / RECORD_DIR).glob("gen_*.json"))
        return cls(run_dir, [json.loads(p.read_text()) for p in paths])


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def generation_record(pop: Population, preference: str) -> dict:
    """Everything a report needs about one evaluated generation."""
    ranked = pop.ranked(preference)
    best = ranked[0]
    fits = [m.fitness(preference) for m in pop.members]
    res = best.result
    return {
        "generation": pop.generation,
        "preference": preference,
        "size": len(pop),
        "counts": pop.counts(),
        "flags": pop.flags,
        "best": {"id": best.id, "key": best.genome.key, "genome": best.genome.to_dict(),
                 "fitness": fits[pop.members.index(best)],
                 "mean_episode_reward": res.mean_episode_reward,
                 "velocity_term_sum": res.velocity_term_sum,
                 "energy_term_sum": res.energy_term_sum,
                 "forward_velocity": res.forward_velocity,
                 "gait_params": res.gait_params.to_dict() if res.gait_params else None},
        "mean_fitness": sum(fits) / len(fits),
        "ranking": [m.id for m in ranked],
        "members": [m.to_dict(preference) for m in pop.members],
    }


def make_evaluator(config: EvolutionConfig, repo: DesignRepository, run_dir: Path):
    if config.evaluator == "external":
        return ExternalEvaluator(repo, Endpoint.from_dict(config.endpoint), config.command, config.seed,
                                 run_dir / "urdf")
    return BuiltinEvaluator(repo, config.command, config.budget, config.sim, config.weights, config.seed,
                            config.workers)


def evaluate_population(pop: Population, evaluator) -> None:
    pending = pop.pending
    if not pending:
        return
    results = evaluator.evaluate([m.genome for m in pending])
    for m, res in zip(pending, results):
        m.result = res


def _latest_checkpoint(run_dir: Path):
    paths = sorted((run_dir / CHECKPOINT_DIR).glob("gen_*.json"))
    return paths[-1] if paths else None


def run_evolution(config: EvolutionConfig, repo: DesignRepository, banks, run_dir, evaluator=None,
                  resume: bool = True, stop_after: int | None = None) -> EvolutionHistory:
    """Run ``config.generations`` selection cycles after the initial population.

    ``run_dir`` receives ``config.json``, one record per generation under
    ``history/`` and a checkpoint per generation under ``checkpoints/``. With
    ``resume`` an existing run continues from its newest checkpoint; the
    continuation is identical because every random draw is keyed on the run
    seed and the generation index. ``stop_after`` ends the run early after that
    generation has been written, as an interrupted run would.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = run_dir / "config.json"
    cfg_text = _dump(config.to_dict())
    if cfg_path.exists() and resume:
        if cfg_path.read_text() != cfg_text:
            raise ConfigError(f"{run_dir} holds a run with a different configuration")
    _write(cfg_path, cfg_text)
    evaluator = evaluator or make_evaluator(config, repo, run_dir)

    ckpt = _latest_checkpoint(run_dir) if resume else None
    if ckpt is not None:
        pop = Population.from_dict(json.loads(ckpt.read_text()))
    else:
        for sub in (RECORD_DIR, CHECKPOINT_DIR):
            for old in (run_dir / sub).glob("gen_*.json"):
                old.unlink()
        pop = init_population(banks, config.population_size, config.seed)
        for m in pop.members:
            repo.check(m.genome)
        pop = _finish_generation(pop, config, evaluator, run_dir)

    while pop.generation < config.generations:
        if stop_after is not None and pop.generation >= stop_after:
            break
        pop = step_generation(pop, repo, config.preference, config.n_elites, config.n_mutants, config.n_children)
        pop = _finish_generation(pop, config, evaluator, run_dir)
    return EvolutionHistory.load(run_dir)


def _finish_generation(pop: Population, config: EvolutionConfig, evaluator, run_dir: Path) -> Population:
    evaluate_population(pop, evaluator)
    name = f"gen_{pop.generation:04d}.json"
    _write(run_dir / RECORD_DIR / name, _dump(generation_record(pop, config.preference)))
    _write(run_dir / CHECKPOINT_DIR / name, _dump(pop.to_dict()))
    return pop
