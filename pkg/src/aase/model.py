"""Problem description for transition-independent agent-aware state estimation.

A model is a global Markov chain (the coordination signal) plus any number of
agent chains.  Each agent picks an action from a policy conditioned on the
previous global and local state, and its local state then moves according to a
transition table that does not depend on any other agent.

All tables are dense numpy arrays indexed ``[conditioning...][outcome]`` in
declared label order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import UnknownAgentError

STOCHASTIC_ATOL = 1e-9


def _frozen(table) -> np.ndarray:
    arr = np.array(table, dtype=float)
    arr.setflags(write=False)
    return arr


def _same(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(frozen=True)
class StateSpace:
    """Ordered set of labels for one discrete variable."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r}; expected one of {self.labels}") from None

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class GlobalChain:
    """The global state chain: prior, ``T0[s, s']`` and emission ``Z0[s, o]``."""

    space: StateSpace
    prior: np.ndarray
    transition: np.ndarray
    obs_space: StateSpace
    obs: np.ndarray

    def __post_init__(self):
        for name in ("prior", "transition", "obs"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __eq__(self, other):
        if not isinstance(other, GlobalChain):
            return NotImplemented
        return (
            self.space == other.space
            and self.obs_space == other.obs_space
            and _same(self.prior, other.prior)
            and _same(self.transition, other.transition)
            and _same(self.obs, other.obs)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AgentChain:
    """One observed agent.

    ``policy[s0, s, a]`` is Pr(a | s0, s), ``transition[s, a, s']`` is
    Pr(s' | s, a) and ``obs[s, o]`` is Pr(o | s).  Agents with
    ``included=False`` are carried along but ignored by inference.
    """

    id: int
    space: StateSpace
    actions: StateSpace
    policy: np.ndarray
    transition: np.ndarray
    prior: np.ndarray
    obs_space: StateSpace
    obs: np.ndarray
    included: bool = True

    def __post_init__(self):
        for name in ("policy", "transition", "prior", "obs"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __eq__(self, other):
        if not isinstance(other, AgentChain):
            return NotImplemented
        return (
            self.id == other.id
            and self.included == other.included
            and self.space == other.space
            and self.actions == other.actions
            and self.obs_space == other.obs_space
            and all(
                _same(getattr(self, k), getattr(other, k))
                for k in ("policy", "transition", "prior", "obs")
            )
        )

    __hash__ = None

    def local_transition(self) -> np.ndarray:
        """Action-marginalised kernel ``psi[s0, s, s'] = sum_a pi(a|s0,s) T(s'|s,a)``."""
        return np.einsum("xsa,sat->xst", self.policy, self.transition)


@dataclass(frozen=True, eq=False)
class AgentAwareModel:
    """Global chain plus agents with ids ``1..n``.

    ``id_map`` maps current agent ids back to the ids they had before
    :func:`prune_agents`; it is bookkeeping and takes no part in equality.
    """

    global_chain: GlobalChain
    agents: tuple[AgentChain, ...] = ()
    id_map: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.id_map:
            object.__setattr__(self, "id_map", {a.id: a.id for a in self.agents})

    def __eq__(self, other):
        if not isinstance(other, AgentAwareModel):
            return NotImplemented
        return self.global_chain == other.global_chain and self.agents == other.agents

    __hash__ = None

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def active_agents(self) -> tuple[AgentChain, ...]:
        return tuple(a for a in self.agents if a.included)

    def agent(self, agent_id: int) -> AgentChain:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise UnknownAgentError(agent_id)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    table: str
    defect: str
    row: tuple | None = None
    detail: str = ""

    def __str__(self):
        where = f" row {self.row}" if self.row is not None else ""
        extra = f": {self.detail}" if self.detail else ""
        return f"{self.table}{where}: {self.defect}{extra}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "pass"
        return "\n".join(str(v) for v in self.violations)


def _check_space(name: str, space: StateSpace, out: list[Violation]) -> None:
    if space.size == 0:
        out.append(Violation(name, "empty state space"))
    seen = set()
    for lab in space.labels:
        if lab in seen:
            out.append(Violation(name, "duplicate label", detail=repr(lab)))
        seen.add(lab)


def _check_table(name: str, table: np.ndarray, shape: tuple, out: list[Violation]) -> None:
    if table.shape != shape:
        out.append(Violation(name, "shape mismatch", detail=f"expected {shape}, got {table.shape}"))
        return
    if not np.all(np.isfinite(table)):
        out.append(Violation(name, "non-finite entry"))
        return
    neg = np.argwhere(table < 0)
    for idx in neg[:5]:
        out.append(Violation(name, "negative entry", row=tuple(int(i) for i in idx)))
    sums = table.sum(axis=-1)
    bad = np.argwhere(np.abs(np.atleast_1d(sums) - 1.0) > STOCHASTIC_ATOL)
    for idx in bad:
        row = tuple(int(i) for i in idx) if table.ndim > 1 else None
        s = float(np.atleast_1d(sums)[tuple(idx)])
        out.append(Violation(name, "row does not sum to 1", row=row, detail=f"sum={s!r}"))


def validate_model(model: AgentAwareModel) -> ValidationReport:
    """Collect every structural defect of ``model``; never raises."""
    out: list[Violation] = []
    g = model.global_chain
    _check_space("S0", g.space, out)
    _check_space("O0", g.obs_space, out)
    k0 = g.space.size
    _check_table("prior0", g.prior, (k0,), out)
    _check_table("T0", g.transition, (k0, k0), out)
    _check_table("Z0", g.obs, (k0, g.obs_space.size), out)

    ids = [a.id for a in model.agents]
    if len(set(ids)) != len(ids):
        out.append(Violation("agents", "duplicate agent id", detail=str(ids)))
    if sorted(ids) != list(range(1, len(ids) + 1)):
        out.append(Violation("agents", "agent ids not contiguous from 1", detail=str(ids)))

    for a in model.agents:
        tag = f"agent[{a.id}]"
        _check_space(f"{tag}.S", a.space, out)
        _check_space(f"{tag}.A", a.actions, out)
        _check_space(f"{tag}.O", a.obs_space, out)
        k, na = a.space.size, a.actions.size
        _check_table(f"{tag}.prior", a.prior, (k,), out)
        _check_table(f"{tag}.policy", a.policy, (k0, k, na), out)
        _check_table(f"{tag}.transition", a.transition, (k, na, k), out)
        _check_table(f"{tag}.Z", a.obs, (k, a.obs_space.size), out)
    return ValidationReport(out)


# --------------------------------------------------------------------------
# pruning


def prune_agents(model: AgentAwareModel, excluded: Iterable[int]) -> AgentAwareModel:
    """Drop ``excluded`` agents and renumber the rest ``1..m`` in order.

    The returned model's ``id_map`` sends each new id to the id it carried in
    the *original* model (composing with any earlier pruning).
    """
    excluded = set(excluded)
    known = {a.id for a in model.agents}
    for aid in sorted(excluded):
        if aid not in known:
            raise UnknownAgentError(aid)
    if not excluded:
        return model
    kept = [a for a in model.agents if a.id not in excluded]
    agents = tuple(replace(a, id=i) for i, a in enumerate(kept, start=1))
    id_map = {i: model.id_map.get(a.id, a.id) for i, a in enumerate(kept, start=1)}
    return AgentAwareModel(model.global_chain, agents, id_map)


def make_space(labels: Sequence[str]) -> StateSpace:
    return StateSpace(tuple(labels))
