"""Population bookkeeping, initialization and one selection/variation step."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..evaluator.search import EvaluationResult
from ..model.assembly import AXES
from .genome import DesignRepository, RobotGenome
from .operators import crossover, mutate

ROLES = ("initial", "elite", "mutation", "crossover")


@dataclass
class Member:
    id: str
    genome: RobotGenome
    role: str
    lineage: dict
    result: EvaluationResult | None = None

    @property
    def evaluated(self) -> bool:
        return self.result is not None

    def fitness(self, preference: str) -> float:
        if self.result is None:
            raise ValueError(f"member {self.id} is not evaluated")
        return self.result.rescored(preference).fitness

    def to_dict(self, preference: str | None = None) -> dict:
        d = {"id": self.id, "role": self.role, "genome": self.genome.to_dict(), "key": self.genome.key,
             "lineage": self.lineage, "result": self.result.to_dict() if self.result else None}
        if preference is not None and self.result is not None:
            d["fitness"] = self.fitness(preference)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Member":
        res = EvaluationResult.from_dict(d["result"]) if d.get("result") else None
        return cls(d["id"], RobotGenome.from_dict(d["genome"]), d["role"], d["lineage"], res)


def member_id(n: int) -> str:
    return f"m{n:06d}"


@dataclass
class Population:
    generation: int
    members: list
    rng_seed: int
    next_id: int = 0
    flags: list = field(default_factory=list)

    def __post_init__(self):
        ids = [m.id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate member ids in population")

    def __len__(self):
        return len(self.members)

    @property
    def pending(self) -> list:
        return [m for m in self.members if m.result is None]

    def ranked(self, preference: str) -> list:
        """Best first; equal fitness falls back to ascending member id."""
        return sorted(self.members, key=lambda m: (-m.fitness(preference), m.id))

    def best(self, preference: str) -> Member:
        return self.ranked(preference)[0]

    def counts(self) -> dict:
        return {role: sum(m.role == role for m in self.members) for role in ROLES}

    def to_dict(self, preference: str | None = None) -> dict:
        return {"generation": self.generation, "rng_seed": self.rng_seed, "next_id": self.next_id,
                "flags": list(self.flags), "members": [m.to_dict(preference) for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "Population":
        return cls(int(d["generation"]), [Member.from_dict(m) for m in d["members"]], int(d["rng_seed"]),
                   int(d["next_id"]), list(d.get("flags", [])))


def bank_genomes(banks) -> list[RobotGenome]:
    """Every bank variant as a genome: banks in order, then scale, then axis."""
    out = []
    for bank in banks:
        variants = sorted((m.leg_scale_index, AXES.index(m.axes["shoulder"])) for m in bank.models)
        src = bank.source_id
        out.extend(RobotGenome(src, src, src, src, i, AXES[a], AXES[a]) for i, a in variants)
    return out


def init_population(banks, size: int | None = None, seed: int = 0) -> Population:
    """Genomes enumerating the banks' variants, truncated by seeded sampling to ``size``."""
    genomes = bank_genomes(banks)
    if not genomes:
        raise ConfigError("no bank variants to build an initial population from")
    if size is not None:
        if size < 1:
            raise ConfigError("population size must be positive")
        if size < len(genomes):
            rng = np.random.default_rng([seed, 0, 1])
            keep = np.sort(rng.choice(len(genomes), size=size, replace=False))
            genomes = [genomes[i] for i in keep]
    members = [Member(member_id(k), g, "initial", {"op": "initial"}) for k, g in enumerate(genomes)]
    return Population(0, members, seed, len(members))


def step_generation(pop: Population, repo: DesignRepository, preference: str, n_elites: int = 100,
                    n_mutants: int = 50, n_children: int = 50) -> Population:
    """Elitist selection followed by mutation and crossover of elite parents.

    Members must already be evaluated. The generator is keyed on the run seed
    and the generation index, so a resumed run draws the same numbers.
    """
    if pop.pending:
        raise ValueError(f"{len(pop.pending)} members are not evaluated")
    ranked = pop.ranked(preference)
    flags = []
    if len(ranked) < n_elites:
        flags.append(f"only {len(ranked)} members for {n_elites} elite slots")
    elites = ranked[:n_elites]
    rng = np.random.default_rng([pop.rng_seed, pop.generation + 1])
    next_id = pop.next_id
    members = [Member(m.id, m.genome, "elite", m.lineage, m.result) for m in elites]
    for _ in range(n_mutants):
        parent = elites[int(rng.integers(len(elites)))]
        child, note = mutate(parent.genome, repo, rng)
        members.append(Member(member_id(next_id), child, "mutation",
                              {"op": "mutation", "parents": [parent.id], **note}))
        next_id += 1
    for _ in range(n_children):
        a = elites[int(rng.integers(len(elites)))]
        b = elites[int(rng.integers(len(elites)))]
        child, note = crossover(a.genome, b.genome, rng)
        members.append(Member(member_id(next_id), child, "crossover",
                              {"op": "crossover", "parents": [a.id, b.id], **note}))
        next_id += 1
    return Population(pop.generation + 1, members, pop.rng_seed, next_id, flags)
