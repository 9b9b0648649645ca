"""Observation traces with explicit per-channel missingness."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TraceMismatchError

#: Sentinel index for an absent observation.
MISSING = -1


def _index_array(values, horizon: int, channel: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).reshape(-1)
    if arr.shape != (horizon,):
        raise TraceMismatchError(channel, f"expected {horizon} steps, got {arr.size}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ObservationTrace:
    """Observation indices per step; :data:`MISSING` marks a dropped entry.

    ``agent_obs`` is keyed by agent id.
    """

    global_obs: np.ndarray
    agent_obs: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.global_obs, dtype=np.int64).reshape(-1)
        if g.size < 1:
            raise TraceMismatchError("global", "horizon must be at least 1")
        object.__setattr__(self, "global_obs", _index_array(g, g.size, "global"))
        object.__setattr__(
            self,
            "agent_obs",
            {int(k): _index_array(v, g.size, f"agent {k}") for k, v in sorted(self.agent_obs.items())},
        )

    @property
    def horizon(self) -> int:
        return int(self.global_obs.size)

    def __eq__(self, other):
        if not isinstance(other, ObservationTrace):
            return NotImplemented
        return (
            np.array_equal(self.global_obs, other.global_obs)
            and self.agent_obs.keys() == other.agent_obs.keys()
            and all(np.array_equal(v, other.agent_obs[k]) for k, v in self.agent_obs.items())
        )

    __hash__ = None

    @classmethod
    def empty(cls, horizon: int, agent_ids=()) -> "ObservationTrace":
        blank = np.full(horizon, MISSING, dtype=np.int64)
        return cls(blank, {i: blank for i in agent_ids})

    def with_global(self, global_obs) -> "ObservationTrace":
        return ObservationTrace(global_obs, self.agent_obs)

    def drop_agents(self, agent_ids) -> "ObservationTrace":
        """Blank out the channels of ``agent_ids``."""
        blank = np.full(self.horizon, MISSING, dtype=np.int64)
        agents = {k: (blank if k in set(agent_ids) else v) for k, v in self.agent_obs.items()}
        return ObservationTrace(self.global_obs, agents)

    def remap(self, id_map: dict[int, int]) -> "ObservationTrace":
        """Re-key agent channels after pruning (``id_map``: new id -> old id)."""
        return ObservationTrace(self.global_obs, {new: self.agent_obs[old] for new, old in id_map.items()})


def check_trace(model, trace: ObservationTrace) -> None:
    """Raise :class:`TraceMismatchError` unless ``trace`` fits ``model``."""
    g = model.global_chain
    _check_range(trace.global_obs, g.obs_space.size, "global")
    declared = {a.id for a in model.agents}
    given = set(trace.agent_obs)
    for aid in sorted(declared - given):
        raise TraceMismatchError(f"agent {aid}", "missing from trace")
    for aid in sorted(given - declared):
        raise TraceMismatchError(f"agent {aid}", "not an agent of the model")
    for a in model.agents:
        _check_range(trace.agent_obs[a.id], a.obs_space.size, f"agent {a.id}")


def _check_range(values: np.ndarray, size: int, channel: str) -> None:
    bad = (values != MISSING) & ((values < 0) | (values >= size))
    if bad.any():
        step = int(np.argmax(bad))
        raise TraceMismatchError(channel, f"value {int(values[step])} at step {step} is not a valid observation index")
