"""Backward dynamic program over the sender's belief-on-belief state.

The state at stage ``t`` is ``(sender belief, u_t, w)``. Rather than
discretizing the simplex, ``enumerate_reachable_states`` generates every state
reachable from the initial one under any sequence of stage maps and any
feedback with positive probability; ``backward_induction`` then solves the
recursion exactly on that finite graph.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .belief import SenderBelief, initial_sender_belief, update_sender_belief
from .channel import ChannelPair
from .errors import CapacityError, ConsistencyError, DomainError
from .policy import DEFAULT_ACTION_CAP, EncoderMapSpace, MarkovPolicy, MemoryUpdate

DEFAULT_STATE_CAP = 10**7
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DPState:
    stage: int  # 1 .. horizon + 1
    belief: SenderBelief
    memory: int
    message: int

    @property
    def key(self):
        return (self.stage, self.belief.key, self.memory, self.message)


def terminal_cost(belief: SenderBelief) -> float:
    """Expected ML error ``sum_a weight(a) * (1 - max_w pi_a(w))``."""
    return float(sum(wt * (1.0 - atom.message.probs.max()) for atom, wt in belief))


def terminal_value(state: DPState, horizon: Optional[int] = None) -> float:
    if horizon is not None and state.stage != horizon + 1:
        raise DomainError(f"terminal value needs stage {horizon + 1}, got {state.stage}")
    return terminal_cost(state.belief)


@dataclass
class ReachableStates:
    """Layered reachable states plus, per state, its successors under every action."""

    channels: ChannelPair
    horizon: int
    message_count: int
    memory_size: int
    memory_update: MemoryUpdate
    initial_memory: int
    actions: EncoderMapSpace
    layers: list  # layers[t-1]: {key: DPState}, t = 1 .. horizon + 1
    transitions: list  # transitions[t-1]: {key: tuple over actions of ((p_z, succ_key), ...)}

    def counts(self):
        return [len(layer) for layer in self.layers]

    def roots(self):
        return [
            next(k for k, s in self.layers[0].items() if s.message == w) for w in range(self.message_count)
        ]


def enumerate_reachable_states(
    channels: ChannelPair,
    horizon: int,
    message_count: int,
    memory_size: int,
    memory_update: MemoryUpdate,
    initial_memory: int = 0,
    action_cap: int = DEFAULT_ACTION_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
) -> ReachableStates:
    if horizon < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    if memory_update.memory_size != memory_size or memory_update.message_count != message_count:
        raise DomainError("memory update table does not match (memory size, message count)")
    if memory_update.feedback_size != channels.n_feedback:
        raise DomainError("memory update table does not match the feedback alphabet")
    actions = EncoderMapSpace(message_count, memory_size, channels.n_inputs, action_cap)
    pz = channels.feedback_given_input()
    b0 = initial_sender_belief(message_count, initial_memory, memory_size)
    first = {}
    for w in range(message_count):
        s = DPState(1, b0, initial_memory, w)
        first[s.key] = s
    layers, transitions = [first], []
    cache = {}
    for t in range(1, horizon + 1):
        g = memory_update.at(t)
        nxt, trans = {}, {}
        for key, s in layers[-1].items():
            per_action = []
            for a in range(len(actions)):
                phi = actions[a]
                x = phi(s.message, s.memory)
                succ = []
                for z in np.flatnonzero(pz[x] > 0):
                    z = int(z)
                    nb = update_sender_belief(
                        s.belief, phi, z, s.memory, s.message, channels.forward, channels.feedback, g, cache
                    )
                    ns = DPState(t + 1, nb, int(g[s.memory, z, s.message]), s.message)
                    nk = ns.key
                    if nk not in nxt:
                        nxt[nk] = ns
                        if len(nxt) > state_cap:
                            raise CapacityError(
                                f"reachable states at stage {t + 1} exceed the state cap {state_cap}",
                                count=len(nxt), cap=state_cap, stage=t + 1,
                            )
                    succ.append((float(pz[x, z]), nk))
                per_action.append(tuple(succ))
            trans[key] = tuple(per_action)
        layers.append(nxt)
        transitions.append(trans)
    return ReachableStates(
        channels, horizon, message_count, memory_size, memory_update, initial_memory, actions, layers, transitions
    )


@dataclass
class ValueTable:
    """``values[t-1][key] = (V_t, argmin action index)``; terminal stage has index -1."""

    reach: ReachableStates
    values: list

    def value(self, key):
        return self.values[key[0] - 1][key][0]

    def action(self, key):
        return self.values[key[0] - 1][key][1]


def backward_induction(reach: ReachableStates) -> ValueTable:
    """Exact recursion with zero running cost and terminal cost ``1 - max_w pi(w)``.

    Ties in the minimum (within 1e-12) go to the lowest action index.
    """
    n = reach.horizon
    values = [None] * (n + 1)
    values[n] = {k: (terminal_value(s, n), -1) for k, s in reach.layers[n].items()}
    for t in range(n, 0, -1):
        nxt = values[t]
        cur = {}
        for key in reach.layers[t - 1]:
            best_v, best_a = np.inf, -1
            for a, succ in enumerate(reach.transitions[t - 1][key]):
                v = 0.0
                for p, nk in succ:
                    entry = nxt.get(nk)
                    if entry is None:
                        raise ConsistencyError(f"successor of a stage-{t} state missing from stage {t + 1}")
                    v += p * entry[0]
                if v < best_v - TIE_TOL:
                    best_v, best_a = v, a
            cur[key] = (best_v, best_a)
        values[t - 1] = cur
    return ValueTable(reach, values)


@dataclass
class Branch:
    """Greedy play for one message: ``stages[t-1]`` maps state key -> (reach probability, action)."""

    message: int
    stages: list

    def actions(self, t):
        return sorted({a for _, a in self.stages[t - 1].values()})


def extract_branch(table: ValueTable, w: int) -> Branch:
    """Follow the argmin actions from the root state of message ``w``."""
    reach = table.reach
    frontier = {reach.roots()[w]: 1.0}
    stages = []
    for t in range(1, reach.horizon + 1):
        stages.append({k: (p, table.action(k)) for k, p in frontier.items()})
        nxt = {}
        for k, p in frontier.items():
            for q, nk in reach.transitions[t - 1][k][table.action(k)]:
                nxt[nk] = nxt.get(nk, 0.0) + p * q
        frontier = nxt
    return Branch(w, stages)


def extract_policy(table: ValueTable):
    """Common stage maps for all messages, and whether the branches agree.

    Walks forward from every root (uniform prior) playing one map per stage:
    the argmin carrying the most reach probability (ties to the lowest index).
    When every reached state has that same argmin at every stage, the result
    is exactly the greedy play of every branch and the flag is ``True``.
    Returns ``(policy, consistent, disagreeing_stages)``.
    """
    reach = table.reach
    M = reach.message_count
    frontier = {k: 1.0 / M for k in reach.roots()}
    chosen, bad = [], []
    for t in range(1, reach.horizon + 1):
        mass = {}
        for k, p in frontier.items():
            if p > 0:
                a = table.action(k)
                mass[a] = mass.get(a, 0.0) + p
        if len(mass) > 1:
            bad.append(t)
        a_t = min(mass, key=lambda a: (-mass[a], a))
        chosen.append(a_t)
        nxt = {}
        for k, p in frontier.items():
            for q, nk in reach.transitions[t - 1][k][a_t]:
                nxt[nk] = nxt.get(nk, 0.0) + p * q
        frontier = nxt
    policy = MarkovPolicy(tuple(reach.actions[a] for a in chosen), reach.memory_update, reach.initial_memory)
    return policy, not bad, bad


@dataclass
class SolveReport:
    message_values: list
    dp_value: float
    policy: MarkovPolicy
    consistent: bool
    inconsistent_stages: list
    state_counts: list
    action_count: int
    seconds: float
    branch_actions: list = field(default_factory=list)
    policy_pe: Optional[float] = None

    def to_dict(self):
        return {
            "message_values": [float(v) for v in self.message_values],
            "dp_value": float(self.dp_value),
            "policy": self.policy.to_literal(),
            "consistent": bool(self.consistent),
            "inconsistent_stages": list(self.inconsistent_stages),
            "state_counts": list(self.state_counts),
            "action_count": int(self.action_count),
            "branch_actions": self.branch_actions,
            "policy_pe": None if self.policy_pe is None else float(self.policy_pe),
            "seconds": self.seconds,
        }


def solve(
    channels: ChannelPair,
    horizon: int,
    message_count: int,
    memory_size: int = 1,
    memory_update: Optional[MemoryUpdate] = None,
    initial_memory: int = 0,
    action_cap: int = DEFAULT_ACTION_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
    evaluate_policy: bool = True,
) -> SolveReport:
    """Enumerate, solve, extract; optionally score the extracted policy exactly."""
    from .evaluate import exact_error_probability

    start = time.perf_counter()
    if memory_update is None:
        if memory_size != 1:
            raise DomainError("a memory update table is required when memory size exceeds 1")
        memory_update = MemoryUpdate.constant(channels.n_feedback, message_count)
    reach = enumerate_reachable_states(
        channels, horizon, message_count, memory_size, memory_update, initial_memory, action_cap, state_cap
    )
    table = backward_induction(reach)
    roots = reach.roots()
    values = [table.value(k) for k in roots]
    policy, consistent, bad = extract_policy(table)
    branches = [
        [extract_branch(table, w).actions(t) for t in range(1, horizon + 1)] for w in range(message_count)
    ]
    pe = exact_error_probability(policy, channels).error_probability if evaluate_policy else None
    return SolveReport(
        message_values=values,
        dp_value=float(np.mean(values)),
        policy=policy,
        consistent=consistent,
        inconsistent_stages=bad,
        state_counts=reach.counts(),
        action_count=len(reach.actions),
        seconds=time.perf_counter() - start,
        branch_actions=branches,
        policy_pe=pe,
    )
