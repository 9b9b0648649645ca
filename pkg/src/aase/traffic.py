"""Four-way intersection instance.

The global state is the pair (parallel light, perpendicular light); the
observer only sees the light for its own direction of travel.  Each observed
vehicle has a discretised (position, velocity) local state, acts with a
(steering, accelerator) pair, and belongs to either the parallel or the
perpendicular group, which decides which light its driver obeys.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelValidationError
from .model import AgentAwareModel, AgentChain, GlobalChain, StateSpace, validate_model

COLORS = ("Red", "Yellow", "Green")
POSITIONS = ("AtIntersection", "TurningLeft", "DrivingStraight", "TurningRight")
VELOCITIES = ("None", "Low", "High")
STEERING = ("Left", "Straight", "Right")
ACCELERATOR = ("Minus", "Zero", "Plus")

LIGHT_STATES = tuple(itertools.product(COLORS, COLORS))
LIGHT_LABELS = tuple(f"{p}/{q}" for p, q in LIGHT_STATES)
LOCAL_STATES = tuple(itertools.product(POSITIONS, VELOCITIES))
LOCAL_LABELS = tuple(f"{p}:{v}" for p, v in LOCAL_STATES)
ACTIONS = tuple(itertools.product(STEERING, ACCELERATOR))
ACTION_LABELS = tuple(f"{s}:{a}" for s, a in ACTIONS)

PARALLEL, PERPENDICULAR = "parallel", "perpendicular"
_STEER_TARGET = {"Left": "TurningLeft", "Straight": "DrivingStraight", "Right": "TurningRight"}


def _snake(name: str) -> str:
    return re.sub(r"(?<!^)([A-Z])", r"_\1", name).lower()


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(w.title() for w in rest)


def legal_cycle_default() -> list[tuple[str, str]]:
    return [("Green", "Red"), ("Yellow", "Red"), ("Red", "Green"), ("Red", "Yellow")]


@dataclass
class TrafficConfig:
    """Parameters of the intersection model.

    ``initial_velocity`` is the local prior over velocities for vehicles that
    start at the intersection.  ``policy_file`` replaces the rule-based driver
    table with one in the ``driver_policy.json`` format.
    """

    n_parallel: int = 1
    n_perpendicular: int = 1
    self_stay: float = 0.97
    advance: float = 0.029
    out_of_sequence: float = 0.001
    z0_correct: float = 0.92
    zi_correct: float = 0.95
    compliance: float = 0.9
    velocity_noise: float = 0.05
    initial_velocity: dict = field(default_factory=lambda: {"None": 0.5, "Low": 0.5, "High": 0.0})
    legal_cycle: list = field(default_factory=legal_cycle_default)
    policy_file: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "TrafficConfig":
        """Accepts camelCase (``nParallel``) or snake_case keys."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in doc.items():
            name = _snake(key)
            if name not in known:
                raise ConfigError(f"traffic.{key}: unknown field")
            kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.legal_cycle = [tuple(s) for s in cfg.legal_cycle]
        return cfg

    def to_dict(self) -> dict:
        d = {_camel(k): v for k, v in asdict(self).items()}
        d["legalCycle"] = [list(s) for s in self.legal_cycle]
        return d

    def validate(self) -> None:
        for name in ("self_stay", "advance", "out_of_sequence", "z0_correct", "zi_correct", "compliance", "velocity_noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"traffic.{name}: {v} is not a probability")
        if abs(self.self_stay + self.advance + self.out_of_sequence - 1.0) > 1e-9:
            raise ConfigError("traffic: self_stay + advance + out_of_sequence must equal 1")
        if self.n_parallel < 0 or self.n_perpendicular < 0:
            raise ConfigError("traffic: agent counts must be >= 0")
        cycle = [tuple(s) for s in self.legal_cycle]
        if not cycle or len(set(cycle)) != len(cycle) or any(s not in LIGHT_STATES for s in cycle):
            raise ConfigError(f"traffic.legal_cycle: {self.legal_cycle!r} must list distinct light pairs")
        if len(cycle) < 3 and self.out_of_sequence > 0:
            raise ConfigError("traffic.out_of_sequence: needs at least 3 legal states")
        if set(self.initial_velocity) - set(VELOCITIES):
            raise ConfigError(f"traffic.initial_velocity: keys must be among {VELOCITIES}")
        if abs(sum(self.initial_velocity.values()) - 1.0) > 1e-9 or min(self.initial_velocity.values()) < 0:
            raise ConfigError("traffic.initial_velocity: must be a distribution")


# --------------------------------------------------------------------------
# global chain


def light_transition(cfg: TrafficConfig) -> np.ndarray:
    """``T0`` over the 9 light pairs.

    Legal states stay with ``self_stay``, advance to their successor in the
    cycle with ``advance`` and spread ``out_of_sequence`` over the other legal
    states.  Rows of illegal states send all mass to the legal states, so no
    illegal state ever receives mass.
    """
    cycle = [LIGHT_STATES.index(tuple(s)) for s in cfg.legal_cycle]
    L = len(cycle)
    T = np.zeros((9, 9))
    for pos, s in enumerate(cycle):
        nxt = cycle[(pos + 1) % L]
        others = [c for c in cycle if c not in (s, nxt)]
        if L == 1:
            T[s, s] = 1.0
            continue
        T[s, s] += cfg.self_stay
        T[s, nxt] += cfg.advance
        for c in others:
            T[s, c] += cfg.out_of_sequence / len(others)
    for s in range(9):
        if s not in cycle:
            T[s, cycle] = 1.0 / L
    return T


def light_observation(z0_correct: float) -> np.ndarray:
    """``Z0[s0, color]``: the observer sees the parallel light only."""
    Z = np.full((9, 3), (1.0 - z0_correct) / 2)
    for s, (par, _) in enumerate(LIGHT_STATES):
        Z[s, COLORS.index(par)] = z0_correct
    return Z


# --------------------------------------------------------------------------
# vehicles


def _velocity_outcomes(v: int, accel: str, noise: float) -> dict[int, float]:
    clip = lambda x: min(max(x, 0), len(VELOCITIES) - 1)  # noqa: E731
    out: dict[int, float] = {}

    def put(x, p):
        if p:
            out[clip(x)] = out.get(clip(x), 0.0) + p

    # a slip either holds or reverses the shift, so Zero always holds
    shift = {"Minus": -1, "Zero": 0, "Plus": 1}[accel]
    put(v + shift, 1.0 - noise)
    put(v, noise / 2)
    put(v - shift, noise / 2)
    return out


def vehicle_transition(velocity_noise: float) -> np.ndarray:
    """Kinematics ``T[s, a, s']`` over (position, velocity) and (steering, accelerator).

    The accelerator moves velocity one level (saturating) with probability
    ``1 - velocity_noise``; slips split between holding and the opposite
    shift, which for Zero is holding again.  A vehicle at the intersection
    enters the position chosen by its steering once its new velocity is at
    least Low; other positions are absorbing.
    """
    T = np.zeros((len(LOCAL_STATES), len(ACTIONS), len(LOCAL_STATES)))
    for s, (pos, vel) in enumerate(LOCAL_STATES):
        for a, (steer, accel) in enumerate(ACTIONS):
            for v2, p in _velocity_outcomes(VELOCITIES.index(vel), accel, velocity_noise).items():
                if pos == "AtIntersection" and v2 >= 1:
                    pos2 = _STEER_TARGET[steer]
                else:
                    pos2 = pos
                T[s, a, LOCAL_STATES.index((pos2, VELOCITIES[v2]))] += p
    return T


def _split(main: str, c: float, second: str, third: str) -> dict[str, float]:
    # compliant choice gets c; the rest goes 9:1 to the second and third choices
    return {main: c, second: 0.9 * (1 - c), third: 0.1 * (1 - c)}


def driver_policy(compliance: float) -> dict[str, np.ndarray]:
    """Rule-based driver table: light color -> ``[local state, action]``."""
    c = compliance
    tables = {}
    for color in COLORS:
        P = np.zeros((len(LOCAL_STATES), len(ACTIONS)))
        for s, (pos, vel) in enumerate(LOCAL_STATES):
            if pos == "AtIntersection":
                steer = {k: 1 / 3 for k in STEERING}
                if color == "Green":
                    accel = _split("Plus", c, "Zero", "Minus")
                elif vel == "None":
                    accel = _split("Zero", c, "Minus", "Plus")
                else:
                    accel = _split("Minus", c, "Zero", "Plus")
            else:
                steer = {"Straight": c, "Left": (1 - c) / 2, "Right": (1 - c) / 2}
                if vel == "High":
                    accel = _split("Zero", c, "Plus", "Minus")
                else:
                    accel = _split("Plus", c, "Zero", "Minus")
            for a, (st, ac) in enumerate(ACTIONS):
                P[s, a] = steer[st] * accel[ac]
        tables[color] = P
    return tables


def policy_to_doc(tables: dict[str, np.ndarray]) -> dict:
    return {
        color: {
            LOCAL_LABELS[s]: {ACTION_LABELS[a]: float(P[s, a]) for a in range(len(ACTIONS))}
            for s in range(len(LOCAL_STATES))
        }
        for color, P in tables.items()
    }


def policy_from_doc(doc: dict) -> dict[str, np.ndarray]:
    body = doc.get("table", doc)
    tables = {}
    for color in COLORS:
        P = np.zeros((len(LOCAL_STATES), len(ACTIONS)))
        for s, lab in enumerate(LOCAL_LABELS):
            row = body[color][lab]
            for a, alab in enumerate(ACTION_LABELS):
                P[s, a] = float(row.get(alab, 0.0))
        tables[color] = P
    return tables


def default_policy_doc() -> dict:
    """The shipped ``driver_policy.json`` artifact."""
    text = resources.files("aase").joinpath("data/driver_policy.json").read_text()
    return json.loads(text)


def vehicle_observation(zi_correct: float) -> np.ndarray:
    k = len(LOCAL_STATES)
    Z = np.full((k, k), (1.0 - zi_correct) / (k - 1))
    np.fill_diagonal(Z, zi_correct)
    return Z


def vehicle_prior(cfg: TrafficConfig) -> np.ndarray:
    p = np.zeros(len(LOCAL_STATES))
    for vel, mass in cfg.initial_velocity.items():
        p[LOCAL_STATES.index(("AtIntersection", vel))] = mass
    return p


# --------------------------------------------------------------------------


def agent_groups(cfg: TrafficConfig) -> list[str]:
    """Direction group of agents ``1..n`` in id order."""
    return [PARALLEL] * cfg.n_parallel + [PERPENDICULAR] * cfg.n_perpendicular


def build_traffic_model(cfg: TrafficConfig | None = None) -> AgentAwareModel:
    cfg = cfg or TrafficConfig()
    cfg.validate()
    cycle = [LIGHT_STATES.index(tuple(s)) for s in cfg.legal_cycle]
    prior0 = np.zeros(9)
    prior0[cycle] = 1.0 / len(cycle)
    g = GlobalChain(
        StateSpace(LIGHT_LABELS),
        prior0,
        light_transition(cfg),
        StateSpace(COLORS),
        light_observation(cfg.z0_correct),
    )

    if cfg.policy_file:
        tables = policy_from_doc(json.loads(Path(cfg.policy_file).read_text()))
    else:
        tables = driver_policy(cfg.compliance)
    # policy[s0, s, a] reads only the light of the agent's own direction
    policies = {
        group: np.stack([tables[LIGHT_STATES[s0][0 if group == PARALLEL else 1]] for s0 in range(9)])
        for group in (PARALLEL, PERPENDICULAR)
    }
    trans = vehicle_transition(cfg.velocity_noise)
    obs = vehicle_observation(cfg.zi_correct)
    prior = vehicle_prior(cfg)
    local, actions = StateSpace(LOCAL_LABELS), StateSpace(ACTION_LABELS)
    agents = [
        AgentChain(i, local, actions, policies[group], trans, prior, local, obs)
        for i, group in enumerate(agent_groups(cfg), start=1)
    ]
    model = AgentAwareModel(g, tuple(agents))
    report = validate_model(model)
    if not report.ok:
        raise ModelValidationError(report)
    return model
