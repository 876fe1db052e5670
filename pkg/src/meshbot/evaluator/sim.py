"""MuJoCo rollout of a kinetic model under a PD-tracked gait.

Each link becomes a body whose collision shape is the convex hull of its mesh
and whose inertia is given explicitly: shell plus any electronics it carries.
Robot geoms collide with the floor only. The base body frame sits at the base
center of mass so the free joint reports center-of-mass velocity.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import asdict, dataclass, field, fields

import mujoco
import numpy as np
from scipy.spatial import ConvexHull

from ..errors import EvaluationError
from ..model.assembly import KineticRobotModel, box_inertia
from .gait import GaitParams
from .reward import CommandProfile, RewardWeights, reward_batch

N_FEET = 4


@dataclass(frozen=True)
class SimConfig:
    timestep: float = 0.002
    control_dt: float = 0.01
    kp: float = 8.0
    kd: float = 0.3
    friction: float = 1.0
    gravity: float = 9.81
    contacts: bool = True
    armature: float = 0.01
    clearance: float = 0.005
    init_velocity: tuple = (0.0, 0.0, 0.0)   # world frame, m/s
    init_noise: float = 0.0                  # rad, seeded joint perturbation
    integrator: str = "implicitfast"
    max_speed: float = 50.0
    torque_limit: float | None = None        # overrides the model's joint effort

    def __post_init__(self):
        object.__setattr__(self, "init_velocity", tuple(float(v) for v in self.init_velocity))
        n = self.control_dt / self.timestep
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("control_dt must be a whole multiple of timestep")

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.timestep))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["init_velocity"] = list(self.init_velocity)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown sim settings: {sorted(unknown)}")
        return cls(**d)


# --- model building -------------------------------------------------------------

def combine_inertials(parts) -> tuple[float, np.ndarray, np.ndarray]:
    """Merge (mass, com, inertia about com) triples given in one frame."""
    mass = sum(p[0] for p in parts)
    com = sum(p[0] * np.asarray(p[1]) for p in parts) / mass
    inertia = np.zeros((3, 3))
    for m, c, i in parts:
        d = np.asarray(c) - com
        inertia += np.asarray(i) + m * (d @ d * np.eye(3) - np.outer(d, d))
    return mass, com, inertia


def _link_parts(model: KineticRobotModel) -> dict:
    """Per link: list of (mass, com, inertia) in the link frame, electronics included."""
    parts = {}
    for name, link in model.links.items():
        ip = link.inertial
        parts[name] = [(ip.mass, ip.center_of_mass, ip.inertia_tensor)]
    e = model.electronics
    parts["base"].append((e.core_mass, model.links["base"].inertial.center_of_mass,
                          box_inertia(e.core_size, e.core_mass)))
    motor = box_inertia(e.motor_size, e.motor_mass)
    for j in model.joints:
        parent = model.links[j.parent]
        rel = parent.rotation.T @ j.frame
        com = parent.rotation.T @ (j.origin - parent.origin)
        parts[j.parent].append((e.motor_mass, com, rel @ motor @ rel.T))
    return parts


def _fmt(v) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(v))


def _quat(r) -> np.ndarray:
    q = np.zeros(4)
    mujoco.mju_mat2Quat(q, np.asarray(r, dtype=float).ravel())
    return q


def _hull_vertices(vertices) -> np.ndarray:
    return vertices[ConvexHull(vertices).vertices]


def build_mjcf(model: KineticRobotModel, sim: SimConfig = SimConfig()) -> tuple[str, dict]:
    """MJCF text plus name maps used by the rollout."""
    root = ET.Element("mujoco", model=model.name)
    ET.SubElement(root, "compiler", angle="radian", inertiafromgeom="false", autolimits="true")
    flags = {} if sim.contacts else {"contact": "disable"}
    opt = ET.SubElement(root, "option", timestep=repr(sim.timestep), integrator=sim.integrator,
                        gravity=_fmt([0, 0, -sim.gravity]))
    if flags:
        ET.SubElement(opt, "flag", **flags)
    asset = ET.SubElement(root, "asset")
    for name, link in model.links.items():
        ET.SubElement(asset, "mesh", name=f"{name}_hull", vertex=_fmt(_hull_vertices(link.mesh.vertices)))
    world = ET.SubElement(root, "worldbody")
    ET.SubElement(world, "geom", name="floor", type="plane", size="0 0 1",
                  friction=_fmt([sim.friction, 0.005, 0.0001]), contype="1", conaffinity="1")

    parts = _link_parts(model)
    inertials = {name: combine_inertials(p) for name, p in parts.items()}
    base = model.links["base"]
    base_com = inertials["base"][1]
    # spawn with the lowest point of the robot just above the floor
    lowest = min(link.world_mesh().bounds()[0, 2] for link in model.links.values())
    lift = np.array([0.0, 0.0, sim.clearance - lowest])
    bodies = {}

    def add_body(parent_el, link, pos, quat, shift):
        """``shift`` moves the body frame to ``link frame + shift`` (base only)."""
        el = ET.SubElement(parent_el, "body", name=link.name, pos=_fmt(pos), quat=_fmt(quat))
        m, c, i = inertials[link.name]
        ET.SubElement(el, "inertial", pos=_fmt(c - shift), mass=repr(float(m)),
                      fullinertia=_fmt([i[0, 0], i[1, 1], i[2, 2], i[0, 1], i[0, 2], i[1, 2]]))
        ET.SubElement(el, "geom", name=f"{link.name}_geom", type="mesh", mesh=f"{link.name}_hull",
                      pos=_fmt(-shift), contype="0", conaffinity="1", friction=_fmt([sim.friction, 0.005, 0.0001]))
        bodies[link.name] = el
        return el

    base_el = add_body(world, base, base_com + lift, [1, 0, 0, 0], base_com)
    ET.SubElement(base_el, "freejoint", name="root")
    effort = {}
    for j in model.joints:
        parent = model.links[j.parent]
        child = model.links[j.child]
        pos = parent.rotation.T @ (child.origin - parent.origin)
        rot = parent.rotation.T @ child.rotation
        if j.parent == "base":
            pos = pos - base_com
        el = add_body(bodies[j.parent], child, pos, _quat(rot), np.zeros(3))
        ET.SubElement(el, "joint", name=j.name, type="hinge", axis=_fmt(j.axis_local),
                      range=_fmt([-j.limit, j.limit]), armature=repr(sim.armature))
        effort[j.name] = j.effort if sim.torque_limit is None else sim.torque_limit
    act = ET.SubElement(root, "actuator")
    for j in model.joints:
        lim = effort[j.name]
        kp, kd = (sim.kp, sim.kd) if lim > 0 else (0.0, 0.0)
        ET.SubElement(act, "position", name=f"{j.name}_servo", joint=j.name, kp=repr(kp), kv=repr(kd),
                      forcerange=_fmt([-lim, lim]))
    return ET.tostring(root, encoding="unicode"), {"joints": [j.name for j in model.joints]}


def foot_links(model: KineticRobotModel) -> list[str]:
    from ..segmentation import LEG_TAGS

    return [f"{tag}_lower" for tag in LEG_TAGS]


# --- rollout --------------------------------------------------------------------

@dataclass
class Trajectory:
    """Stacked per-step state arrays in the robot frame, rewards, and a failure flag."""

    arrays: dict
    rewards: dict
    dt: float
    failed: bool = False
    reason: str = ""
    displacement: np.ndarray = field(default_factory=lambda: np.zeros(2))   # robot frame at t=0

    @property
    def n_steps(self) -> int:
        return len(self.rewards.get("total", ()))

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards["total"])) if not self.failed else 0.0

    @property
    def forward_velocity(self) -> float:
        return float(self.displacement[0] / self.duration) if self.n_steps and not self.failed else 0.0

    @property
    def energy(self) -> float:
        """Sum over steps of sum_i |q_dot_i tau_i| dt, in joules."""
        if self.failed:
            return 0.0
        return float(np.sum(np.abs(self.arrays["q_dot"] * self.arrays["tau"])) * self.dt)


def to_robot_frame(vec) -> np.ndarray:
    """Body axes (x right, y forward) to robot axes (x forward, y left)."""
    v = np.asarray(vec)
    return np.stack([v[..., 1], -v[..., 0], v[..., 2]], axis=-1)


class Simulator:
    """Compiled MuJoCo model reused across rollouts of one kinetic model."""

    def __init__(self, model: KineticRobotModel, sim: SimConfig = SimConfig()):
        self.kmodel = model
        self.sim = sim
        xml, names = build_mjcf(model, sim)
        try:
            self.m = mujoco.MjModel.from_xml_string(xml)
        except ValueError as exc:
            raise EvaluationError(f"could not compile {model.name}: {exc}") from exc
        self.d = mujoco.MjData(self.m)
        self.joint_names = names["joints"]
        self.limit = min(j.limit for j in model.joints)
        floor = mujoco.mj_name2id(self.m, mujoco.mjtObj.mjOBJ_GEOM, "floor")
        self.floor = floor
        self.foot_of_geom = np.full(self.m.ngeom, -1)
        for k, name in enumerate(foot_links(model)):
            self.foot_of_geom[mujoco.mj_name2id(self.m, mujoco.mjtObj.mjOBJ_GEOM, f"{name}_geom")] = k
        self.qadr = np.array([self.m.jnt_qposadr[mujoco.mj_name2id(self.m, mujoco.mjtObj.mjOBJ_JOINT, n)]
                              for n in self.joint_names])
        self.vadr = np.array([self.m.jnt_dofadr[mujoco.mj_name2id(self.m, mujoco.mjtObj.mjOBJ_JOINT, n)]
                              for n in self.joint_names])

    def _contacts(self) -> np.ndarray:
        out = np.zeros(N_FEET, dtype=bool)
        n = self.d.ncon
        if n:
            g = self.d.contact.geom[:n]
            for a, b in g:
                if a == self.floor and self.foot_of_geom[b] >= 0:
                    out[self.foot_of_geom[b]] = True
                elif b == self.floor and self.foot_of_geom[a] >= 0:
                    out[self.foot_of_geom[a]] = True
        return out

    def reset(self, seed: int = 0) -> None:
        mujoco.mj_resetData(self.m, self.d)
        self.d.qvel[0:3] = self.sim.init_velocity
        if self.sim.init_noise > 0:
            rng = np.random.default_rng(seed)
            self.d.qpos[self.qadr] = rng.uniform(-self.sim.init_noise, self.sim.init_noise, len(self.qadr))
        mujoco.mj_forward(self.m, self.d)

    def rollout(self, gait: GaitParams, command: CommandProfile = CommandProfile(),
                weights: RewardWeights = RewardWeights(), seed: int = 0) -> Trajectory:
        sim, m, d = self.sim, self.m, self.d
        dt = sim.control_dt
        n_steps = int(round(command.duration / dt))
        self.reset(seed)
        targets = np.clip(gait.target_table(np.arange(n_steps) * dt, self.joint_names), -self.limit, self.limit)
        nj = len(self.joint_names)
        rec = {name: np.zeros((n_steps, 3)) for name in ("v", "omega", "g_b")}
        rec.update({name: np.zeros((n_steps, nj)) for name in ("q", "q_dot", "q_ddot", "q_star", "tau", "a", "a_prev")})
        rec.update({name: np.zeros((n_steps, N_FEET), dtype=bool) for name in ("foot_contact", "prev_contact")})
        rec.update({name: np.zeros((n_steps, N_FEET)) for name in ("t_air", "t_stance")})

        start = d.qpos[0:3].copy()
        heading = d.xmat[1].reshape(3, 3).copy()
        prev_contact = self._contacts()
        air = np.zeros(N_FEET)
        stance = np.zeros(N_FEET)
        qd_prev = d.qvel[self.vadr].copy()
        a_prev = np.zeros(nj)
        gravity = np.array([0.0, 0.0, -1.0])
        for k in range(n_steps):
            d.ctrl[:] = targets[k]
            mujoco.mj_step(m, d, nstep=sim.substeps)
            lin = d.qvel[0:3]
            if not np.all(np.isfinite(d.qpos)) or not np.all(np.isfinite(d.qvel)) or np.linalg.norm(lin) > sim.max_speed:
                return Trajectory(rec, {}, dt, failed=True, reason=f"diverged at step {k}")
            rot = d.xmat[1].reshape(3, 3)
            qd = d.qvel[self.vadr]
            contact = self._contacts()
            air = np.where(contact, air, air + dt)
            stance = np.where(contact, stance + dt, stance)
            rec["v"][k] = rot.T @ lin
            rec["omega"][k] = d.qvel[3:6]
            rec["g_b"][k] = rot.T @ gravity
            rec["q"][k] = d.qpos[self.qadr]
            rec["q_dot"][k] = qd
            rec["q_ddot"][k] = (qd - qd_prev) / dt
            rec["q_star"][k] = targets[k]
            rec["tau"][k] = d.actuator_force
            rec["a"][k] = targets[k]
            rec["a_prev"][k] = a_prev
            rec["foot_contact"][k] = contact
            rec["prev_contact"][k] = prev_contact
            rec["t_air"][k] = air
            rec["t_stance"][k] = stance
            # a phase that ended this step has just been recorded; restart its clock
            air = np.where(contact, 0.0, air)
            stance = np.where(contact, stance, 0.0)
            prev_contact = contact
            qd_prev = qd.copy()
            a_prev = targets[k]
        for name in ("v", "omega", "g_b"):
            rec[name] = to_robot_frame(rec[name])
        moved = heading.T @ (d.qpos[0:3] - start)
        try:
            rewards = reward_batch(rec, command, weights, dt)
        except EvaluationError as exc:
            return Trajectory(rec, {}, dt, failed=True, reason=str(exc))
        return Trajectory(rec, rewards, dt, displacement=to_robot_frame(moved)[:2])


def rollout(model: KineticRobotModel, gait: GaitParams, command: CommandProfile = CommandProfile(),
            sim: SimConfig = SimConfig(), seed: int = 0, weights: RewardWeights = RewardWeights()) -> Trajectory:
    return Simulator(model, sim).rollout(gait, command, weights, seed)


def base_speed(traj: Trajectory) -> np.ndarray:
    return np.linalg.norm(traj.arrays["v"][:, :2], axis=1)


def mean_planar_speed(traj: Trajectory, after: float = 0.0) -> float:
    start = int(math.ceil(after / traj.dt))
    return float(np.mean(base_speed(traj)[start:]))
