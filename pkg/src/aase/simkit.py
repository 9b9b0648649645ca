"""Ancestral sampling, occlusion injection and accuracy scoring."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import AgentAwareModel
from .trace import MISSING, ObservationTrace

OCCLUSION_KINDS = ("ContStart", "ContEnd", "ContRandom", "DiscontRandom")


@dataclass(frozen=True)
class GroundTruth:
    """Sampled hidden trajectory as state indices.

    ``actions[i][0]`` is -1: no action precedes the first step.
    """

    global_states: np.ndarray
    local_states: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.global_states)

    def global_labels(self, model: AgentAwareModel) -> list[str]:
        labels = model.global_chain.space.labels
        return [labels[s] for s in self.global_states]


def _draw(rng: np.random.Generator, rows: np.ndarray) -> np.ndarray:
    """One inverse-CDF draw per row of ``rows``."""
    cdf = np.cumsum(rows, axis=-1)
    u = rng.random(rows.shape[:-1]) * cdf[..., -1]
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, rows.shape[-1] - 1)


def simulate(model: AgentAwareModel, horizon: int, seed) -> tuple[GroundTruth, ObservationTrace]:
    """Sample states, actions and observations in topological order.

    Uses ``numpy.random.default_rng(seed)`` (PCG64), so a seed reproduces
    the output bit for bit on any platform.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    g = model.global_chain
    agents = model.active_agents
    s0 = np.empty(horizon, dtype=np.int64)
    local = {a.id: np.empty(horizon, dtype=np.int64) for a in agents}
    acts = {a.id: np.full(horizon, -1, dtype=np.int64) for a in agents}

    s0[0] = _draw(rng, g.prior)
    for a in agents:
        local[a.id][0] = _draw(rng, a.prior)
    for tau in range(1, horizon):
        s0[tau] = _draw(rng, g.transition[s0[tau - 1]])
        for a in agents:
            prev = local[a.id][tau - 1]
            act = _draw(rng, a.policy[s0[tau - 1], prev])
            acts[a.id][tau] = act
            local[a.id][tau] = _draw(rng, a.transition[prev, act])

    obs0 = _draw(rng, g.obs[s0])
    obs = {a.id: _draw(rng, a.obs[local[a.id]]) for a in agents}
    return GroundTruth(s0, local, acts), ObservationTrace(obs0, obs)


@dataclass(frozen=True)
class OcclusionPattern:
    kind: str
    fraction: float
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in OCCLUSION_KINDS:
            raise ValueError(f"unknown occlusion kind {self.kind!r}; expected one of {OCCLUSION_KINDS}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"occlusion fraction {self.fraction} outside [0, 1]")


def window_length(fraction: float, horizon: int) -> int:
    # rounding first keeps 0.3 * 10 from becoming 4
    return min(horizon, math.ceil(round(fraction * horizon, 9)))


def occlusion_mask(pattern: OcclusionPattern, horizon: int) -> np.ndarray:
    """Boolean mask of the steps the pattern hides."""
    mask = np.zeros(horizon, dtype=bool)
    if pattern.kind == "DiscontRandom":
        rng = np.random.default_rng(pattern.seed)
        return rng.random(horizon) < pattern.fraction
    w = window_length(pattern.fraction, horizon)
    if pattern.kind == "ContStart":
        mask[:w] = True
    elif pattern.kind == "ContEnd":
        mask[horizon - w :] = True
    else:
        start = int(np.random.default_rng(pattern.seed).integers(0, horizon - w + 1))
        mask[start : start + w] = True
    return mask


def apply_occlusion(
    trace: ObservationTrace, pattern: OcclusionPattern, include_agents: bool = False
) -> ObservationTrace:
    """Replace hidden steps of the global channel with MISSING.

    ``include_agents`` applies the same mask to every agent channel, for
    ablations only.
    """
    mask = occlusion_mask(pattern, trace.horizon)
    g = np.where(mask, MISSING, trace.global_obs)
    agents = trace.agent_obs
    if include_agents:
        agents = {i: np.where(mask, MISSING, o) for i, o in agents.items()}
    return ObservationTrace(g, agents)


def accuracy(predicted: Sequence, truth: Sequence) -> float:
    """Fraction of steps where the two label sequences agree."""
    if len(predicted) != len(truth):
        raise ValueError(f"length mismatch: {len(predicted)} predictions for {len(truth)} steps")
    if len(truth) == 0:
        raise ValueError("empty sequences")
    return float(np.mean([p == q for p, q in zip(predicted, truth)]))


def majority_baseline(truth_set: Sequence[Sequence], order: Sequence | None = None):
    """Most frequent label across the corpus.

    Ties go to the label that comes first in ``order`` (the state space), or
    to the smallest label when no order is given.
    """
    counts = Counter(x for seq in truth_set for x in seq)
    if not counts:
        raise ValueError("empty truth corpus")
    best = max(counts.values())
    tied = [x for x, c in counts.items() if c == best]
    if order is not None:
        rank = {x: j for j, x in enumerate(order)}
        return min(tied, key=lambda x: rank[x])
    return min(tied)
