"""Independently coded reference values used by several test modules."""
import math

# weights of the baseline table, each multiplied by dt
BASELINE = {
    "lin_vel_tracking": 1.0, "ang_vel_tracking": 0.5, "lin_vel_z": -4.0, "ang_vel_xy": -0.05,
    "joint_acc": -5e-7, "joint_torque": -2e-5, "action_rate": -5e-5, "orientation": -0.5,
    "feet_air_time": 0.1, "feet_stance_time": 0.1,
}


def _sq(xs):
    total = 0.0
    for x in xs:
        total += x * x
    return total


def reward_oracle(s, v_star, omega_star, alpha1=0.0, alpha2=0.0):
    """Scalar per-term reward from plain Python lists; ``s`` is a dict of lists."""
    dt = s["dt"]
    dvx, dvy = v_star[0] - s["v"][0], v_star[1] - s["v"][1]
    lin = math.exp(-0.25 * (dvx * dvx + dvy * dvy))
    ang = math.exp(-0.25 * (omega_star - s["omega"][2]) ** 2)
    air = 0.0
    stance = 0.0
    for k in range(len(s["foot_contact"])):
        now, before = s["foot_contact"][k], s["prev_contact"][k]
        if now and not before:
            air += s["t_air"][k] - 0.5
        if before and not now:
            stance += s["t_stance"][k] - 0.5
    rate = [(a - b) / dt for a, b in zip(s["a"], s["a_prev"])]
    power = 0.0
    for qd, tau in zip(s["q_dot"], s["tau"]):
        power += abs(qd * tau)
    raw = {
        "lin_vel_tracking": lin,
        "ang_vel_tracking": ang,
        "lin_vel_z": s["v"][2] ** 2,
        "ang_vel_xy": s["omega"][0] ** 2 + s["omega"][1] ** 2,
        "joint_acc": _sq(s["q_ddot"]),
        "joint_torque": _sq(s["tau"]),
        "action_rate": _sq(rate),
        "orientation": s["g_b"][0] ** 2 + s["g_b"][1] ** 2,
        "feet_air_time": air,
        "feet_stance_time": stance,
    }
    out = {k: BASELINE[k] * dt * raw[k] for k in BASELINE}
    out["user_lin_vel_tracking"] = alpha1 * lin
    out["user_joint_power"] = alpha2 * power
    return out


def random_state_dict(rng):
    """A random state as plain lists; gravity is a random unit vector."""
    g = rng.normal(size=3)
    g = g / (g @ g) ** 0.5
    contact = rng.random(4) < 0.5
    prev = rng.random(4) < 0.5
    return {
        "v": rng.normal(0, 0.5, 3).tolist(), "omega": rng.normal(0, 1, 3).tolist(),
        "q": rng.uniform(-1.5, 1.5, 8).tolist(), "q_dot": rng.normal(0, 3, 8).tolist(),
        "q_ddot": rng.normal(0, 50, 8).tolist(), "q_star": rng.uniform(-1.5, 1.5, 8).tolist(),
        "tau": rng.uniform(-4.4, 4.4, 8).tolist(), "a": rng.uniform(-1.5, 1.5, 8).tolist(),
        "a_prev": rng.uniform(-1.5, 1.5, 8).tolist(), "g_b": g.tolist(),
        "foot_contact": contact.tolist(), "prev_contact": prev.tolist(),
        "t_air": rng.uniform(0, 1, 4).tolist(), "t_stance": rng.uniform(0, 1, 4).tolist(),
        "dt": float(rng.choice([0.005, 0.01, 0.02])),
    }
