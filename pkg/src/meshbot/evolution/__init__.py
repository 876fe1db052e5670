"""Morphology evolution over a repository of harvested robot parts."""
from .evaluate import BuiltinEvaluator, ExternalEvaluator, evaluation_seed
from .genome import JOINT_LEVELS, LIMB_LEVELS, DesignRepository, RobotGenome, genome_symmetric
from .operators import JOINT_SWAP_PROB, MUTATION_CATEGORIES, MUTATION_PROBS, crossover, draw_category, mutate
from .population import Member, Population, bank_genomes, init_population, member_id, step_generation
from .report import report_rows, rows_to_csv, fitness_svg, write_report
from .run import EvolutionConfig, EvolutionHistory, evaluate_population, generation_record, run_evolution

__all__ = [
    "BuiltinEvaluator", "ExternalEvaluator", "evaluation_seed",
    "JOINT_LEVELS", "LIMB_LEVELS", "DesignRepository", "RobotGenome", "genome_symmetric",
    "JOINT_SWAP_PROB", "MUTATION_CATEGORIES", "MUTATION_PROBS", "crossover", "draw_category", "mutate",
    "Member", "Population", "bank_genomes", "init_population", "member_id", "step_generation",
    "report_rows", "rows_to_csv", "fitness_svg", "write_report",
    "EvolutionConfig", "EvolutionHistory", "evaluate_population", "generation_record", "run_evolution",
]
