from pathlib import Path

import numpy as np
import pytest

from aase.model import AgentAwareModel, AgentChain, GlobalChain, StateSpace

DATA = Path(__file__).parent / "data"


def two_state_chain(stay=0.9, correct=0.8) -> GlobalChain:
    move, wrong = round(1 - stay, 12), round(1 - correct, 12)
    return GlobalChain(
        StateSpace(("A", "B")),
        np.array([0.5, 0.5]),
        np.array([[stay, move], [move, stay]]),
        StateSpace(("a", "b")),
        np.array([[correct, wrong], [wrong, correct]]),
    )


def binary_agent(agent_id=1, follow=0.85, noise=0.1) -> AgentChain:
    """Agent that tends to copy the global state into its own state."""
    policy = np.array(
        [[[follow, 1 - follow], [follow, 1 - follow]], [[1 - follow, follow], [1 - follow, follow]]]
    )
    transition = np.array([[[0.95, 0.05], [0.1, 0.9]], [[0.9, 0.1], [0.05, 0.95]]])
    return AgentChain(
        agent_id,
        StateSpace(("x", "y")),
        StateSpace(("go0", "go1")),
        policy,
        transition,
        np.array([0.6, 0.4]),
        StateSpace(("ox", "oy")),
        np.array([[1 - noise, noise], [noise, 1 - noise]]),
    )


@pytest.fixture
def hmm_model() -> AgentAwareModel:
    return AgentAwareModel(two_state_chain())


@pytest.fixture
def one_agent_model() -> AgentAwareModel:
    return AgentAwareModel(two_state_chain(), (binary_agent(1),))


@pytest.fixture
def three_agent_model() -> AgentAwareModel:
    return AgentAwareModel(two_state_chain(), tuple(binary_agent(i, follow=0.6 + 0.1 * i) for i in (1, 2, 3)))
