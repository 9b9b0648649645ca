"""Random models and traces for property tests and oracle comparisons."""
from __future__ import annotations

import numpy as np

from .model import AgentAwareModel, AgentChain, GlobalChain, StateSpace
from .trace import MISSING, ObservationTrace


def _labels(prefix: str, k: int) -> StateSpace:
    return StateSpace(tuple(f"{prefix}{j}" for j in range(k)))


def random_stochastic(rng: np.random.Generator, shape, concentration: float = 1.0, zero_prob: float = 0.0):
    """Rows drawn from a Dirichlet; ``zero_prob`` zeroes entries (never a whole row)."""
    x = rng.gamma(concentration, size=shape)
    if zero_prob:
        mask = rng.random(shape) < zero_prob
        keep = rng.integers(shape[-1], size=shape[:-1])
        np.put_along_axis(mask, keep[..., None], False, axis=-1)
        x = np.where(mask, 0.0, x)
    return x / x.sum(axis=-1, keepdims=True)


def random_model(
    rng: np.random.Generator,
    k0: int | None = None,
    n_agents: int | None = None,
    max_k: int = 4,
    max_agents: int = 2,
    zero_prob: float = 0.0,
) -> AgentAwareModel:
    """A valid model with every space size drawn from ``2..max_k``."""
    size = lambda: int(rng.integers(2, max_k + 1))  # noqa: E731
    k0 = size() if k0 is None else k0
    n = int(rng.integers(0, max_agents + 1)) if n_agents is None else n_agents
    o0 = size()
    g = GlobalChain(
        _labels("g", k0),
        random_stochastic(rng, (k0,), zero_prob=zero_prob),
        random_stochastic(rng, (k0, k0), zero_prob=zero_prob),
        _labels("o", o0),
        random_stochastic(rng, (k0, o0), zero_prob=zero_prob),
    )
    agents = []
    for i in range(1, n + 1):
        k, na, no = size(), size(), size()
        agents.append(
            AgentChain(
                id=i,
                space=_labels(f"s{i}_", k),
                actions=_labels(f"a{i}_", na),
                policy=random_stochastic(rng, (k0, k, na), zero_prob=zero_prob),
                transition=random_stochastic(rng, (k, na, k), zero_prob=zero_prob),
                prior=random_stochastic(rng, (k,), zero_prob=zero_prob),
                obs_space=_labels(f"q{i}_", no),
                obs=random_stochastic(rng, (k, no), zero_prob=zero_prob),
            )
        )
    return AgentAwareModel(g, tuple(agents))


def random_trace(
    rng: np.random.Generator,
    model: AgentAwareModel,
    horizon: int,
    missing: float = 0.3,
) -> ObservationTrace:
    """Observations drawn uniformly at random, each dropped with probability ``missing``."""

    def channel(size):
        seq = rng.integers(size, size=horizon)
        return np.where(rng.random(horizon) < missing, MISSING, seq)

    g = model.global_chain
    return ObservationTrace(channel(g.obs_space.size), {a.id: channel(a.obs_space.size) for a in model.agents})
