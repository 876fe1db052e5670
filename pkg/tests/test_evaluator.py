import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshbot.errors import EvaluationError, EvaluationTimeout, ProtocolSchemaError
from meshbot.evaluator import (TERMS, ZERO_GAIT, CommandProfile, Endpoint, GaitParams, RewardWeights,
                               SimConfig, Simulator, StepState, compute_fitness, external_evaluate,
                               optimize_gait, reward_batch, reward_step)
from meshbot.evaluator.external import exchange, make_request, parse_response
from meshbot.evaluator.search import EvaluationResult
from meshbot.evaluator.sim import combine_inertials

from oracles import random_state_dict, reward_oracle


def _state(**over):
    base = dict(v=np.zeros(3), omega=np.zeros(3), q=np.zeros(8), q_dot=np.zeros(8), q_ddot=np.zeros(8),
                q_star=np.zeros(8), tau=np.zeros(8), a=np.zeros(8), a_prev=np.zeros(8),
                g_b=np.array([0.0, 0.0, -1.0]), foot_contact=np.ones(4, bool), prev_contact=np.ones(4, bool),
                t_air=np.zeros(4), t_stance=np.zeros(4), dt=0.01)
    base.update(over)
    return StepState(**base)


# --- reward ---------------------------------------------------------------------

def test_perfect_tracking():
    cmd = CommandProfile((0.3, -0.1), 0.2)
    r = reward_step(_state(v=np.array([0.3, -0.1, 0.0]), omega=np.array([0, 0, 0.2])), cmd)
    assert r["lin_vel_tracking"] == 0.01
    assert r["ang_vel_tracking"] == 0.005
    for name in TERMS[2:]:
        assert r[name] == 0.0


def test_tracking_error_example():
    r = reward_step(_state(), CommandProfile((0.1, 0.0), 0.0))
    assert r["lin_vel_tracking"] == pytest.approx(0.01 * math.exp(-0.0025), rel=1e-15)
    assert round(r["lin_vel_tracking"], 7) == 0.0099750


def test_joint_power_example():
    w = RewardWeights(alpha2=1.0)
    r = reward_step(_state(q_dot=np.ones(8), tau=np.full(8, 0.5)), CommandProfile(), w)
    assert r["user_joint_power"] == 4.0


def test_matches_oracle(rng):
    for _ in range(200):
        s = random_state_dict(rng)
        a1, a2 = rng.normal(size=2)
        cmd = CommandProfile(tuple(rng.normal(0, 0.5, 2)), float(rng.normal()))
        got = reward_step(StepState(**s), cmd, RewardWeights(alpha1=a1, alpha2=a2))
        want = reward_oracle(s, cmd.v_star_xy, cmd.omega_star_z, a1, a2)
        for name in TERMS:
            assert got[name] == pytest.approx(want[name], rel=1e-12, abs=1e-300)
        assert got.total == pytest.approx(math.fsum(want.values()), rel=1e-12, abs=1e-15)


def test_batch_matches_scalar(rng):
    states = [random_state_dict(rng) for _ in range(50)]
    for s in states:
        s["dt"] = 0.01
    cmd = CommandProfile((0.3, 0.0), 0.1)
    w = RewardWeights(alpha1=0.3, alpha2=-0.2)
    arrays = {k: np.array([s[k] for s in states]) for k in states[0] if k != "dt"}
    batch = reward_batch(arrays, cmd, w, 0.01)
    for i, s in enumerate(states):
        r = reward_step(StepState(**s), cmd, w)
        for name in TERMS:
            assert batch[name][i] == pytest.approx(r[name], rel=1e-12, abs=1e-300)
        assert batch["total"][i] == pytest.approx(r.total, rel=1e-12, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_tracking_bounded(vx, vy, wz):
    r = reward_step(_state(v=np.array([vx, vy, 0.0]), omega=np.array([0, 0, wz])), CommandProfile((0.3, 0.0)))
    assert 0 < r["lin_vel_tracking"] <= 0.01
    assert 0 < r["ang_vel_tracking"] <= 0.005


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8), st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_joint_power_sign(qd, tau):
    r = reward_step(_state(q_dot=np.array(qd), tau=np.array(tau)), CommandProfile(), RewardWeights(alpha2=1.0))
    assert r["user_joint_power"] >= 0
    assert (r["user_joint_power"] == 0) == all(a * b == 0 for a, b in zip(qd, tau))


def test_phase_credit_only_at_phase_end():
    s = _state(foot_contact=np.array([1, 0, 1, 0], bool), prev_contact=np.array([0, 1, 1, 0], bool),
               t_air=np.array([0.7, 0.3, 0.0, 0.4]), t_stance=np.array([0.01, 0.2, 0.6, 0.0]))
    r = reward_step(s, CommandProfile())
    assert r["feet_air_time"] == pytest.approx(0.1 * 0.01 * (0.7 - 0.5))
    assert r["feet_stance_time"] == pytest.approx(0.1 * 0.01 * (0.2 - 0.5))


def test_nan_state_is_an_evaluation_error():
    with pytest.raises(EvaluationError):
        reward_step(_state(v=np.array([np.nan, 0, 0])), CommandProfile())
    with pytest.raises(EvaluationError):
        reward_step(_state(g_b=np.array([0, 0, -2.0])), CommandProfile())


def test_weights_config_round_trip():
    w = RewardWeights(alpha1=2.0)
    assert RewardWeights.from_dict(w.to_dict()) == w
    with pytest.raises(ValueError):
        RewardWeights.from_dict({"alpha3": 1.0})
    with pytest.raises(ValueError):
        CommandProfile(duration=0)


# --- fitness --------------------------------------------------------------------

def test_fitness_examples():
    assert compute_fitness(5.0, 0.8, -0.3, "velocity") == 21.0
    assert compute_fitness(5.0, 0.8, -0.3, "energy") == 2.0
    assert compute_fitness(5.0, 0.8, -0.3, "none") == 5.0
    with pytest.raises(ValueError):
        compute_fitness(5.0, 0.8, -0.3, "speed")


def test_rescoring_keeps_sums():
    r = EvaluationResult(5.0, 0.8, 0.3, 5.0, ZERO_GAIT, 1)
    v = r.rescored("velocity")
    e = r.rescored("energy")
    assert (v.fitness, e.fitness) == (21.0, 2.0)
    for x in (v, e):
        assert (x.mean_episode_reward, x.velocity_term_sum, x.energy_term_sum) == (5.0, 0.8, 0.3)
    assert EvaluationResult.from_dict(v.to_dict()).to_dict() == v.to_dict()


# --- simulation -----------------------------------------------------------------

@pytest.fixture(scope="module")
def sagittal(model):
    return model.with_axes("x", "y")


def test_combine_inertials_parallel_axis():
    i = np.eye(3) * 0.1
    m, c, inertia = combine_inertials([(1.0, [1, 0, 0], i), (1.0, [-1, 0, 0], i)])
    assert m == 2.0 and np.allclose(c, 0)
    assert np.allclose(inertia, np.diag([0.2, 2.2, 2.2]))


def test_zero_gait_settles(sagittal):
    tr = Simulator(sagittal).rollout(ZERO_GAIT)
    assert not tr.failed
    speed = np.linalg.norm(tr.arrays["v"][100:, :2], axis=1)
    assert speed.mean() < 0.01
    assert abs(tr.forward_velocity) < 0.01
    assert np.all(np.isclose(np.linalg.norm(tr.arrays["g_b"], axis=1), 1.0, atol=1e-6))


def test_rollout_reward_terms_sum(sagittal):
    gait = GaitParams(2.0, (0.3, 0.3), (0.0, 0.1), (0.0, 1.0), (0, math.pi, math.pi, 0))
    tr = Simulator(sagittal).rollout(gait)
    total = np.sum([tr.rewards[k] for k in TERMS], axis=0)
    assert np.allclose(total, tr.rewards["total"], rtol=0, atol=1e-12)
    air_or_stance = (tr.arrays["t_air"] > 0) ^ (tr.arrays["t_stance"] > 0)
    switched = tr.arrays["foot_contact"] != tr.arrays["prev_contact"]
    # one clock runs per foot; at a switch the finished phase is still reported
    assert np.all(air_or_stance | switched)
    assert np.all(switched[air_or_stance == 0])


def test_rollout_deterministic(sagittal):
    gait = GaitParams(1.5, (0.4, 0.2), (0.0, 0.0), (0.0, 0.5), (0, 1, 2, 3))
    a = Simulator(sagittal).rollout(gait, seed=3)
    b = Simulator(sagittal).rollout(gait, seed=3)
    for k in a.arrays:
        assert np.array_equal(a.arrays[k], b.arrays[k])


def test_momentum_conserved_without_gravity_or_contact(sagittal):
    sim = SimConfig(gravity=0.0, contacts=False, friction=0.0, init_velocity=(0.1, 0.05, 0.0))
    tr = Simulator(sagittal, sim).rollout(ZERO_GAIT, CommandProfile(duration=1.0))
    v = tr.arrays["v"]
    assert np.abs(v - v[0]).max() <= 1e-6
    assert np.allclose(v[0], [0.05, -0.1, 0.0], atol=1e-9)


def test_zero_torque_limit(sagittal):
    gait = GaitParams(2.0, (0.5, 0.5), (0, 0), (0, 0), (0, 1, 2, 3))
    tr = Simulator(sagittal, SimConfig(torque_limit=0.0)).rollout(gait, CommandProfile(duration=1.0))
    assert np.all(tr.arrays["tau"] == 0.0)


def test_torques_respect_limit(sagittal):
    gait = GaitParams(3.0, (1.2, 1.2), (0, 0), (0, 0), (0, 1, 2, 3))
    tr = Simulator(sagittal).rollout(gait, CommandProfile(duration=1.0))
    assert np.abs(tr.arrays["tau"]).max() <= 4.4 + 1e-9


def test_divergence_is_a_failed_rollout(sagittal):
    sim = SimConfig(init_velocity=(60.0, 0.0, 0.0))
    tr = Simulator(sagittal, sim).rollout(ZERO_GAIT, CommandProfile(duration=0.5))
    assert tr.failed and tr.total_reward == 0.0


def test_gait_vector_projection():
    g = GaitParams.from_vector([9, 2.0, -1, 1.5, 0.0, 7, -7, 0, 0, 0, 4], 1.57)
    g.check(1.57)
    assert g.frequency == 4.0
    assert all(-math.pi <= p < math.pi for p in g.phase + g.leg_phase)
    with pytest.raises(ValueError):
        GaitParams(frequency=0.0)


def test_budget_one_is_single_rollout(sagittal):
    gait, res = optimize_gait(sagittal, budget=1, seed=5)
    direct = Simulator(sagittal).rollout(gait, seed=5)
    assert res.mean_episode_reward == direct.total_reward
    assert res.evaluations == 1


def test_budget_monotone(sagittal):
    hist_small, hist_big = [], []
    _, small = optimize_gait(sagittal, budget=20, seed=2, history=hist_small)
    _, big = optimize_gait(sagittal, budget=60, seed=2, history=hist_big)
    assert hist_big[:20] == hist_small
    assert big.mean_episode_reward >= small.mean_episode_reward


# --- external protocol ----------------------------------------------------------

ECHO = [sys.executable, "-m", "meshbot.evaluator.echo"]


def test_echo_loopback(model, tmp_path):
    ep = Endpoint("subprocess", ECHO + ["--fitness", "1.0"], timeout=30)
    res = external_evaluate(model, CommandProfile(), "none", ep, seed=4, work_dir=tmp_path)
    assert not res.failed
    assert res.fitness == 1.0 and res.extra["reported_fitness"] == 1.0


def test_request_echoed_back(model, tmp_path):
    ep = Endpoint("subprocess", ECHO, timeout=30)
    req = make_request("r1", tmp_path / "x.urdf", CommandProfile((0.2, 0.0)), "energy", 9)
    resp = exchange(ep, req)
    assert resp["echo"] == {**req, "urdf": str(req["urdf"])}


def test_missing_field_is_schema_error():
    with pytest.raises(ProtocolSchemaError):
        parse_response('{"schema": 1, "id": "a", "mean_episode_reward": 1, "velocity_term_sum": 0, '
                       '"energy_term_sum": 0}', "a")
    with pytest.raises(ProtocolSchemaError):
        parse_response('{"schema": 2}')
    with pytest.raises(ProtocolSchemaError):
        parse_response('{"schema": 1, "id": "a", "mean_episode_reward": NaN, "velocity_term_sum": 0, '
                       '"energy_term_sum": 0, "fitness": 1}', "a")


def test_malformed_response_fails_after_retry(model, tmp_path):
    ep = Endpoint("subprocess", ECHO + ["--mode", "missing"], timeout=30, retries=1)
    res = external_evaluate(model, CommandProfile(), "none", ep, work_dir=tmp_path)
    assert res.failed and res.fitness == 0.0
    assert res.extra["reason"].count("ProtocolSchemaError") == 2
    with pytest.raises(EvaluationError):
        external_evaluate(model, CommandProfile(), "none", ep, work_dir=tmp_path, strict=True)


def test_timeout_then_failure_marker(model, tmp_path):
    ep = Endpoint("subprocess", ECHO + ["--sleep", "5"], timeout=0.5, retries=1)
    res = external_evaluate(model, CommandProfile(), "none", ep, work_dir=tmp_path)
    assert res.failed
    assert res.extra["reason"].count("EvaluationTimeout") == 2


def test_nonzero_exit(model, tmp_path):
    ep = Endpoint("subprocess", ECHO + ["--mode", "crash"], timeout=30, retries=0)
    res = external_evaluate(model, CommandProfile(), "none", ep, work_dir=tmp_path)
    assert res.failed and "status 3" in res.extra["reason"]


def test_directory_exchange(model, tmp_path):
    import subprocess

    box = tmp_path / "box"
    worker = subprocess.Popen(ECHO + ["--watch", str(box), "--max-requests", "1", "--fitness", "2.5"])
    try:
        ep = Endpoint("directory", directory=str(box), timeout=30)
        res = external_evaluate(model, CommandProfile(), "velocity", ep, work_dir=tmp_path / "u")
    finally:
        worker.wait(timeout=30)
    assert not res.failed and res.extra["reported_fitness"] == 2.5


def test_directory_timeout(model, tmp_path):
    ep = Endpoint("directory", directory=str(tmp_path / "none"), timeout=0.2, retries=0)
    with pytest.raises(EvaluationTimeout):
        exchange(ep, make_request("q", "x.urdf", CommandProfile(), "none", 0))
