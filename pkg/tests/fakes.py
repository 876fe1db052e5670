"""Cheap stand-in evaluators for loop tests."""
import hashlib

from meshbot.evaluator.search import EvaluationResult


def fake_result(key: str, seed: int = 0) -> EvaluationResult:
    h = hashlib.sha256(key.encode()).digest()
    reward = 5.0 + h[0] / 255.0
    vel = 4.0 + h[1] / 255.0
    energy = 1.0 + h[2] / 64.0
    return EvaluationResult(reward, vel, energy, reward, None, seed)


class FakeEvaluator:
    def __init__(self, fail_keys=()):
        self.calls = []
        self.fail_keys = set(fail_keys)

    def evaluate(self, genomes):
        self.calls.append([g.key for g in genomes])
        out = []
        for g in genomes:
            if g.key in self.fail_keys:
                out.append(EvaluationResult(0.0, 0.0, 0.0, 0.0, None, 0, failed=True))
            else:
                out.append(fake_result(g.key))
        return out
