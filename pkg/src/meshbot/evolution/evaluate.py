"""Adapters that score genomes with the built-in or the external evaluator."""
from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..errors import EvaluationError
from ..evaluator.external import Endpoint, external_evaluate
from ..evaluator.reward import CommandProfile, RewardWeights
from ..evaluator.search import DEFAULT_BUDGET, EvaluationResult, failed_result, optimize_gait
from ..evaluator.sim import SimConfig
from .genome import DesignRepository, RobotGenome


def evaluation_seed(run_seed: int, genome: RobotGenome) -> int:
    """Stable per-genome seed, so equal genomes get equal results in any order."""
    digest = hashlib.sha256(f"{run_seed}:{genome.key}".encode()).digest()
    return int.from_bytes(digest[:4], "little") & 0x7FFFFFFF


def _builtin_job(args) -> EvaluationResult:
    model, command, budget, seed, sim, weights = args
    try:
        _, result = optimize_gait(model, command, budget, seed, sim, weights)
    except EvaluationError as exc:
        return failed_result(seed, "none", str(exc))
    return result


class BuiltinEvaluator:
    """Gait search in the bundled simulator; results are cached by genome key."""

    def __init__(self, repo: DesignRepository, command: CommandProfile = CommandProfile(),
                 budget: int = DEFAULT_BUDGET, sim: SimConfig = SimConfig(),
                 weights: RewardWeights = RewardWeights(), run_seed: int = 0, workers: int = 1):
        self.repo, self.command, self.budget = repo, command, budget
        self.sim, self.weights, self.run_seed, self.workers = sim, weights, run_seed, workers
        self.cache: dict = {}

    def _jobs(self, genomes):
        jobs = []
        for g in genomes:
            seed = evaluation_seed(self.run_seed, g)
            try:
                model = self.repo.build(g)
            except Exception as exc:  # a genome that cannot be built scores 0
                jobs.append((g, failed_result(seed, "none", f"build failed: {exc}")))
                continue
            jobs.append((g, (model, self.command, self.budget, seed, self.sim, self.weights)))
        return jobs

    def evaluate(self, genomes: list[RobotGenome]) -> list[EvaluationResult]:
        todo = []
        for g in dict.fromkeys(genomes):
            if g.key not in self.cache:
                todo.append(g)
        jobs = self._jobs(todo)
        runnable = [(g, j) for g, j in jobs if isinstance(j, tuple)]
        for g, j in jobs:
            if isinstance(j, EvaluationResult):
                self.cache[g.key] = j
        if self.workers > 1 and len(runnable) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(_builtin_job, [j for _, j in runnable]))
        else:
            results = [_builtin_job(j) for _, j in runnable]
        for (g, _), res in zip(runnable, results):
            self.cache[g.key] = res
        return [self.cache[g.key] for g in genomes]


class ExternalEvaluator:
    """Sends each genome's URDF to an external evaluator process or directory."""

    def __init__(self, repo: DesignRepository, endpoint: Endpoint, command: CommandProfile = CommandProfile(),
                 run_seed: int = 0, work_dir=None):
        self.repo, self.endpoint, self.command, self.run_seed = repo, endpoint, command, run_seed
        self.work_dir = Path(work_dir) if work_dir else None
        self.cache: dict = {}

    def evaluate(self, genomes: list[RobotGenome]) -> list[EvaluationResult]:
        from concurrent.futures import ThreadPoolExecutor

        todo = [g for g in dict.fromkeys(genomes) if g.key not in self.cache]

        def one(g):
            seed = evaluation_seed(self.run_seed, g)
            try:
                model = self.repo.build(g)
            except Exception as exc:
                return failed_result(seed, "none", f"build failed: {exc}")
            return external_evaluate(model, self.command, "none", self.endpoint, seed, self.work_dir)

        with ThreadPoolExecutor(max_workers=max(1, self.endpoint.max_in_flight)) as pool:
            for g, res in zip(todo, pool.map(one, todo)):
                self.cache[g.key] = res
        return [self.cache[g.key] for g in genomes]
