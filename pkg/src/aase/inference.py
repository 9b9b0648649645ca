"""Inference over the unrolled dynamic Bayesian network.

Slice convention: the action of agent ``i`` at step ``tau`` is drawn from
``pi_i(. | s0[tau-1], s_i[tau-1])`` and ``s_i[tau]`` from
``T_i(. | s_i[tau-1], a_i[tau])``.  The first slice carries priors only.

Four routes are provided:

``sum_product_smooth``
    Forward-backward sum-product on the factor graph, one message per
    directed edge, linear in the number of agents.  Exact whenever the graph
    is a tree (no agents, horizon <= 2, or noise-free agent observations);
    otherwise the agent/global loops make it an approximation.
``hmm_smooth``
    Forward-backward on the global chain alone.
``exact_smooth``
    Forward-backward on the joint slice state ``(s0, s_1, ..., s_n)``; exact
    but exponential in ``n``.
``brute_force_posterior``
    Explicit enumeration of every hidden assignment.  Test oracle only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationCapError, TraceMismatchError, ZeroSupportError
from .model import AgentAwareModel, GlobalChain
from .trace import MISSING, ObservationTrace, check_trace


@dataclass
class PosteriorSequence:
    """Per-step marginals over the global state."""

    marginals: np.ndarray
    loglik: float
    labels: tuple[str, ...]
    method: str = "aase"
    messages: int = 0
    agent_marginals: dict[int, np.ndarray] | None = None
    #: belief over S0 with the direct observation at each step left out
    global_cavity: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.marginals.shape[0]

    @property
    def map_indices(self) -> np.ndarray:
        # np.argmax returns the first maximiser: lowest-index tie-break
        return np.argmax(self.marginals, axis=1)


def map_sequence(post: PosteriorSequence) -> list[str]:
    """Per-step most likely global label (ties go to the lowest index)."""
    return [post.labels[i] for i in post.map_indices]


# --------------------------------------------------------------------------
# factor graph


@dataclass(frozen=True)
class Variable:
    kind: str  # "S0", "S" or "A"
    step: int  # 1-based
    agent: int = 0
    size: int = 0

    @property
    def name(self) -> str:
        if self.kind == "S0":
            return f"S0[{self.step}]"
        return f"{self.kind}{self.agent}[{self.step}]"


@dataclass(frozen=True)
class Factor:
    kind: str  # prior0, T0, prior, policy_transition, Z0, Z
    scope: tuple[int, ...]
    step: int
    agent: int = 0
    obs: int | None = None


@dataclass
class FactorGraph:
    """Unrolled network as a bipartite variable/factor graph.

    Each agent step contributes a single ``policy_transition`` factor over
    ``(S0[tau-1], S_i[tau-1], A_i[tau], S_i[tau])`` holding both the policy and
    the local transition table, so the action variable hangs off one factor.
    ``evidence_slots`` lists ``(variable index, channel)`` for every place an
    observation may attach; :func:`attach_evidence` turns present
    observations into ``Z0``/``Z`` factors.
    """

    model: AgentAwareModel
    horizon: int
    variables: list[Variable]
    factors: list[Factor]
    evidence_slots: list[tuple[int, str]]
    index: dict[tuple, int] = field(repr=False, default_factory=dict)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(v, fi) for fi, f in enumerate(self.factors) for v in f.scope]

    @property
    def n_edges(self) -> int:
        return sum(len(f.scope) for f in self.factors)

    def var(self, kind: str, step: int, agent: int = 0) -> int:
        return self.index[(kind, step, agent)]

    def cycle_rank(self) -> int:
        """Independent cycles: ``edges - nodes + components`` (0 for a forest)."""
        nv = len(self.variables)
        parent = list(range(nv + len(self.factors)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        cycles = 0
        for v, fi in self.edges:
            a, b = find(v), find(nv + fi)
            if a == b:
                cycles += 1
            else:
                parent[a] = b
        return cycles

    def is_tree(self) -> bool:
        return self.cycle_rank() == 0


def unroll_dbn(model: AgentAwareModel, horizon: int) -> FactorGraph:
    """Unroll ``model`` over ``horizon`` steps (only included agents)."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    g = model.global_chain
    variables: list[Variable] = []
    factors: list[Factor] = []
    slots: list[tuple[int, str]] = []
    index: dict[tuple, int] = {}

    def add(v: Variable) -> int:
        index[(v.kind, v.step, v.agent)] = len(variables)
        variables.append(v)
        return len(variables) - 1

    agents = model.active_agents
    for tau in range(1, horizon + 1):
        s0 = add(Variable("S0", tau, 0, g.space.size))
        if tau == 1:
            factors.append(Factor("prior0", (s0,), tau))
        else:
            factors.append(Factor("T0", (index[("S0", tau - 1, 0)], s0), tau))
        slots.append((s0, "global"))
        for a in agents:
            si = add(Variable("S", tau, a.id, a.space.size))
            if tau == 1:
                factors.append(Factor("prior", (si,), tau, a.id))
            else:
                ai = add(Variable("A", tau, a.id, a.actions.size))
                prev_s0 = index[("S0", tau - 1, 0)]
                prev_si = index[("S", tau - 1, a.id)]
                factors.append(Factor("policy_transition", (prev_s0, prev_si, ai, si), tau, a.id))
            slots.append((si, f"agent {a.id}"))
    return FactorGraph(model, horizon, variables, factors, slots, index)


def attach_evidence(graph: FactorGraph, trace: ObservationTrace) -> FactorGraph:
    """Return a copy of ``graph`` with a likelihood factor per present observation."""
    if trace.horizon != graph.horizon:
        raise TraceMismatchError("global", f"trace horizon {trace.horizon} != graph horizon {graph.horizon}")
    check_trace(graph.model, trace)
    factors = list(graph.factors)
    for v_idx, channel in graph.evidence_slots:
        v = graph.variables[v_idx]
        if channel == "global":
            o = int(trace.global_obs[v.step - 1])
            kind = "Z0"
        else:
            o = int(trace.agent_obs[v.agent][v.step - 1])
            kind = "Z"
        if o != MISSING:
            factors.append(Factor(kind, (v_idx,), v.step, v.agent, o))
    return FactorGraph(graph.model, graph.horizon, graph.variables, factors, graph.evidence_slots, graph.index)


# --------------------------------------------------------------------------
# HMM baseline


def _emissions(obs_matrix: np.ndarray, seq: np.ndarray) -> list:
    return [None if o == MISSING else obs_matrix[:, o] for o in seq]


def hmm_smooth(global_chain: GlobalChain, obs_seq, mode: str = "smooth") -> PosteriorSequence:
    """Forward-backward over the global chain; missing steps skip the emission."""
    obs_seq = np.asarray(obs_seq, dtype=np.int64)
    T = global_chain.transition
    e0 = _emissions(global_chain.obs, obs_seq)
    t, k = len(obs_seq), global_chain.space.size

    alpha = np.empty((t, k))
    loglik = 0.0
    for tau in range(t):
        a = global_chain.prior if tau == 0 else alpha[tau - 1] @ T
        if e0[tau] is not None:
            a = a * e0[tau]
        c = a.sum()
        if not c > 0:
            raise ZeroSupportError(tau + 1, f"S0[{tau + 1}]")
        alpha[tau] = a / c
        loglik += math.log(c)

    if mode == "filter":
        return PosteriorSequence(alpha, loglik, global_chain.space.labels, "hmm-filter")

    post = np.empty((t, k))
    post[t - 1] = alpha[t - 1]
    b = np.ones(k)
    for tau in range(t - 2, -1, -1):
        h = b if e0[tau + 1] is None else b * e0[tau + 1]
        b = T @ h
        b = b / b.sum()
        p = alpha[tau] * b
        post[tau] = p / p.sum()
    return PosteriorSequence(post, loglik, global_chain.space.labels, "hmm")


# --------------------------------------------------------------------------
# sum-product on the unrolled graph


class _AgentTables:
    __slots__ = ("agent", "k", "na", "psi2", "policy", "trans2", "prior", "obs")

    def __init__(self, agent, k0: int):
        self.agent = agent
        self.k = agent.space.size
        self.na = agent.actions.size
        self.psi2 = np.ascontiguousarray(agent.local_transition().reshape(k0 * self.k, self.k))
        self.policy = agent.policy
        self.trans2 = agent.transition.reshape(self.k * self.na, self.k)
        self.prior = agent.prior
        self.obs = agent.obs


def sum_product_smooth(
    model: AgentAwareModel,
    trace: ObservationTrace,
    mode: str = "smooth",
    return_agents: bool = False,
) -> PosteriorSequence:
    """Forward-backward sum-product over the unrolled network.

    Every directed edge of ``attach_evidence(unroll_dbn(model, t), trace)``
    carries exactly one message; ``PosteriorSequence.messages`` counts them.
    The forward sweep walks the slices in order.  At slice ``tau`` each agent
    factor first sends ``S0[tau-1]`` the likelihood of the agent's step given
    its filtered local state and the observation at ``tau`` (its only
    incoming message from ``S_i[tau]`` at that point); the global state then
    absorbs those messages before moving on.  The backward sweep only runs
    along the global chain because no later message changes what an agent
    factor already sent to ``S0``.

    ``mode="filter"`` returns the forward beliefs, which use evidence up to
    and including each step.  Messages are renormalised after every
    summarisation and the log normalisers summed into ``loglik``, which is
    the exact evidence log-likelihood whenever the graph is a tree.
    """
    if mode not in ("smooth", "filter"):
        raise ValueError(f"mode must be 'smooth' or 'filter', got {mode!r}")
    check_trace(model, trace)
    g = model.global_chain
    T = g.transition
    k0 = g.space.size
    t = trace.horizon
    e0 = _emissions(g.obs, trace.global_obs)
    agents = [_AgentTables(a, k0) for a in model.active_agents]
    n = len(agents)

    messages = 0
    loglik = 0.0
    alpha = np.empty((t, k0))  # forward belief at S0[tau] before agent messages from slice tau+1
    gfull = np.empty((t, k0))  # S0[tau] -> T0[tau+1]: alpha times those agent messages
    lagprod = np.ones((t, k0))  # product of agent messages into S0[tau]
    pred0 = np.empty((t, k0))

    obs_i = [trace.agent_obs[at.agent.id] for at in agents]
    f = []  # S_i[tau-1] -> policy_transition[tau]
    pred_i = [np.empty((t, at.k)) for at in agents]  # message into S_i[tau] from the left
    back_i = [np.ones((t, at.k)) for at in agents]  # message into S_i[tau] from the right
    act_i = [np.zeros((t, at.na)) for at in agents]
    for j, at in enumerate(agents):
        o = obs_i[j][0]
        v = at.prior if o == MISSING else at.prior * at.obs[:, o]
        c = v.sum()
        if not c > 0:
            raise ZeroSupportError(1, f"S{at.agent.id}[1]")
        loglik += math.log(c)
        f.append(v / c)
        pred_i[j][0] = at.prior
        messages += 1 + (o != MISSING)  # prior -> S_i[1], Z -> S_i[1]

    for tau in range(t):
        a = g.prior if tau == 0 else gfull[tau - 1] @ T
        pred0[tau] = a
        if e0[tau] is not None:
            a = a * e0[tau]
            messages += 1  # Z0 -> S0
        c = a.sum()
        if not c > 0:
            raise ZeroSupportError(tau + 1, f"S0[{tau + 1}]")
        alpha[tau] = a / c
        loglik += math.log(c)
        messages += 1  # prior0 -> S0[1] or T0 -> S0[tau]

        if tau == t - 1:
            gfull[tau] = alpha[tau]
            break
        if not n:
            gfull[tau] = alpha[tau]
            messages += 1  # S0[tau] -> T0[tau+1]
            continue

        # agent factors at slice tau+1 send their lookahead messages to S0[tau]
        lags = np.empty((n, k0))
        mr = []
        r_list = []
        for j, at in enumerate(agents):
            o = obs_i[j][tau + 1]
            if o == MISSING:
                # sum_s' psi(s'|s0,s) == 1, so the message is flat
                r = None
                m = None
                lam = np.ones(k0)
            else:
                r = at.obs[:, o]
                messages += 1  # Z -> S_i[tau+1]
                m = (at.psi2 @ r).reshape(k0, at.k)
                lam = m @ f[j]
                cl = lam.sum()
                if not cl > 0:
                    raise ZeroSupportError(tau + 2, f"S{at.agent.id}[{tau + 2}]")
                lam = lam / cl
                loglik += math.log(cl)
            lags[j] = lam
            mr.append(m)
            r_list.append(r)
        messages += 2 * n  # S_i[tau+1] -> factor, factor -> S0[tau]

        lp = np.prod(lags, axis=0)
        gf = alpha[tau] * lp
        c = gf.sum()
        if not c > 0:
            raise ZeroSupportError(tau + 2, f"S0[{tau + 1}] after agent evidence")
        gfull[tau] = gf / c
        lagprod[tau] = lp
        loglik += math.log(c)
        messages += 1  # S0[tau] -> T0[tau+1]

        # cavities S0[tau] -> factor_i: all agent messages except agent i's own
        pre = np.ones((n, k0))
        suf = np.ones((n, k0))
        if n > 1:
            pre[1:] = np.cumprod(lags[:-1], axis=0)
            suf[:-1] = np.cumprod(lags[::-1][:-1], axis=0)[::-1]
        cav = alpha[tau] * pre * suf
        cav /= cav.sum(axis=1, keepdims=True)

        for j, at in enumerate(agents):
            cj, fj, r = cav[j], f[j], r_list[j]
            w = np.outer(cj, fj)
            p = w.ravel() @ at.psi2
            pred_i[j][tau + 1] = p
            if r is None:
                nb = np.ones(at.k)
                tr = np.ones((at.k, at.na))
            else:
                p = p * r
                nb = cj @ mr[j]
                tr = (at.trans2 @ r).reshape(at.k, at.na)
            back_i[j][tau] = nb / nb.sum()
            ma = np.einsum("xs,xsa,sa->a", w, at.policy, tr)
            act_i[j][tau + 1] = ma / ma.sum()
            f[j] = p / p.sum()
        # S0 -> factor, S_i[tau] -> factor, A -> factor, factor -> S_i[tau+1],
        # factor -> A, factor -> S_i[tau]
        messages += 6 * n

    cavity0 = None
    cavity_i = []
    if mode == "filter":
        post = alpha
    else:
        post = np.empty((t, k0))
        beta = np.ones((t, k0))
        post[t - 1] = alpha[t - 1]
        b = beta[t - 1]
        for tau in range(t - 2, -1, -1):
            h = b if e0[tau + 1] is None else b * e0[tau + 1]
            if n:
                h = h * lagprod[tau + 1]
            b = T @ h
            b = b / b.sum()
            beta[tau] = b
            p = gfull[tau] * b
            post[tau] = p / p.sum()
            messages += 2  # S0[tau+1] -> T0, T0 -> S0[tau]
        # messages out to the unary prior/evidence factors: the belief with
        # that factor left out
        cavity0 = pred0 * beta * lagprod
        cavity0 /= cavity0.sum(axis=1, keepdims=True)
        messages += 1 + sum(e is not None for e in e0)
        for j in range(n):
            ci = pred_i[j] * back_i[j]
            cavity_i.append(ci / ci.sum(axis=1, keepdims=True))
            messages += 1 + int(np.sum(obs_i[j] != MISSING))

    agent_post = None
    if return_agents:
        agent_post = {}
        for j, at in enumerate(agents):
            ev = np.array([np.ones(at.k) if o == MISSING else at.obs[:, o] for o in obs_i[j]])
            m = (cavity_i[j] if cavity_i else pred_i[j] * back_i[j]) * ev
            agent_post[at.agent.id] = m / m.sum(axis=1, keepdims=True)
    method = "aase" if mode == "smooth" else "aase-filter"
    return PosteriorSequence(post, loglik, g.space.labels, method, messages, agent_post, cavity0)


# --------------------------------------------------------------------------
# exact joint-slice route


def _along(arr: np.ndarray, vec: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * arr.ndim
    shape[axis] = vec.size
    return arr * vec.reshape(shape)


def exact_smooth(model: AgentAwareModel, trace: ObservationTrace, cap: int = 2_000_000) -> PosteriorSequence:
    """Exact smoothing by forward-backward over the joint slice state.

    Cost grows with the product of all local space sizes; ``cap`` bounds
    ``horizon * joint size``.
    """
    check_trace(model, trace)
    g = model.global_chain
    agents = model.active_agents
    dims = (g.space.size, *(a.space.size for a in agents))
    t = trace.horizon
    joint = math.prod(dims)
    if joint * t > cap:
        raise EnumerationCapError(joint * t, cap)
    psis = [a.local_transition() for a in agents]
    T = g.transition

    def evidence(arr, tau):
        o = trace.global_obs[tau]
        if o != MISSING:
            arr = _along(arr, g.obs[:, o], 0)
        for i, a in enumerate(agents):
            o = trace.agent_obs[a.id][tau]
            if o != MISSING:
                arr = _along(arr, a.obs[:, o], i + 1)
        return arr

    alphas = []
    loglik = 0.0
    A = g.prior.copy()
    for a in agents:
        A = np.multiply.outer(A, a.prior)
    for tau in range(t):
        if tau > 0:
            for i, psi in enumerate(psis):
                B = np.moveaxis(A, i + 1, 1)
                B = np.einsum("xs...,xsu->xu...", B, psi)
                A = np.moveaxis(B, 1, i + 1)
            A = np.einsum("x...,xy->y...", A, T)
        A = evidence(A, tau)
        c = A.sum()
        if not c > 0:
            raise ZeroSupportError(tau + 1, "joint slice")
        A = A / c
        loglik += math.log(c)
        alphas.append(A)

    local_axes = tuple(range(1, len(dims)))
    post = np.empty((t, dims[0]))
    B = np.ones(dims)
    for tau in range(t - 1, -1, -1):
        if tau < t - 1:
            H = evidence(B, tau + 1)
            H = np.einsum("y...,xy->x...", H, T)
            for i, psi in enumerate(psis):
                H2 = np.moveaxis(H, i + 1, 1)
                H2 = np.einsum("xu...,xsu->xs...", H2, psi)
                H = np.moveaxis(H2, 1, i + 1)
            B = H / H.sum()
        p = (alphas[tau] * B).sum(axis=local_axes) if local_axes else alphas[tau] * B
        post[tau] = p / p.sum()
    return PosteriorSequence(post, loglik, g.space.labels, "exact")


# --------------------------------------------------------------------------
# enumeration oracle


def joint_assignment_count(model: AgentAwareModel, horizon: int) -> int:
    g = model.global_chain
    count = g.space.size**horizon
    for a in model.active_agents:
        count *= a.space.size**horizon * a.actions.size ** (horizon - 1)
    return count


def brute_force_posterior(
    model: AgentAwareModel,
    trace: ObservationTrace,
    cap: int = 10_000_000,
    chunk: int = 200_000,
) -> PosteriorSequence:
    """Sum the joint probability of every hidden assignment.

    The score of an assignment is the product of prior, transition, policy
    and observation factors read straight from the model tables.
    """
    check_trace(model, trace)
    g = model.global_chain
    agents = model.active_agents
    t = trace.horizon
    total = joint_assignment_count(model, t)
    if total > cap:
        raise EnumerationCapError(total, cap)

    dims = [g.space.size] * t
    layout = []
    for a in agents:
        s_off = len(dims)
        dims += [a.space.size] * t
        a_off = len(dims)
        dims += [a.actions.size] * (t - 1)
        layout.append((a, s_off, a_off))

    k0 = g.space.size
    acc = np.zeros((t, k0))
    z = 0.0
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total), dtype=np.int64)
        x = np.unravel_index(flat, dims)
        w = g.prior[x[0]].copy()
        for tau in range(1, t):
            w *= g.transition[x[tau - 1], x[tau]]
        for tau in range(t):
            o = trace.global_obs[tau]
            if o != MISSING:
                w *= g.obs[x[tau], o]
        for a, so, ao in layout:
            w *= a.prior[x[so]]
            for tau in range(1, t):
                s_prev, s_next, act = x[so + tau - 1], x[so + tau], x[ao + tau - 1]
                w *= a.policy[x[tau - 1], s_prev, act]
                w *= a.transition[s_prev, act, s_next]
            obs = trace.agent_obs[a.id]
            for tau in range(t):
                if obs[tau] != MISSING:
                    w *= a.obs[x[so + tau], obs[tau]]
        z += w.sum()
        for tau in range(t):
            acc[tau] += np.bincount(x[tau], weights=w, minlength=k0)
    if not z > 0:
        raise ZeroSupportError(0, "joint evidence")
    return PosteriorSequence(acc / acc.sum(axis=1, keepdims=True), math.log(z), g.space.labels, "brute-force")
