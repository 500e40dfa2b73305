"""Receiver beliefs, the sender's belief over them, and their Bayes updates.

Three objects are tracked for a Markov policy ``x_t = phi_t(w, u_t)``:

* ``MessageBelief``: the receiver's posterior over messages given ``y_{1:t}``.
* ``MemoryBelief``: for every message hypothesis ``w``, the receiver's
  posterior over the sender's memory pair ``(u_t, u_{t+1})`` given
  ``y_{1:t}`` and ``w``. Stored as an array ``joint[w, u_t, u_{t+1}]``.
* ``SenderBelief``: the sender's finite-support distribution over the
  receiver's pair (message belief, memory belief) given ``w`` and ``z_{1:t}``.

None of the updates needs anything beyond the current stage map, so they can be
chained along any history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import StochasticKernel
from .errors import DomainError, ImpossibleEvidenceError
from .policy import EncoderMap

GRID = 10**9


def grid_round(p: np.ndarray) -> np.ndarray:
    """Largest-remainder rounding of the last axis to integers summing to ``GRID``.

    The result is a fixed point: rounding ``grid_round(p) / GRID`` again gives
    the same integers. Ties go to the lowest index.
    """
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, p.shape[-1])
    out = np.empty(flat.shape, dtype=np.int64)
    for i, row in enumerate(flat):
        total = row.sum()
        scaled = row / total * GRID if total > 0 else row * GRID
        base = np.floor(scaled).astype(np.int64)
        deficit = GRID - int(base.sum())
        if deficit > 0:
            order = np.argsort(-(scaled - base), kind="stable")
            base[order[:deficit]] += 1
        elif deficit < 0:
            order = np.argsort(scaled - base, kind="stable")
            take = order[base[order] > 0][: -deficit]
            base[take] -= 1
        out[i] = base
    return out.reshape(p.shape)


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MessageBelief:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("message belief must be a non-empty vector")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise DomainError(f"message belief is not a probability vector: {probs}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, message_count):
        return cls(np.full(message_count, 1.0 / message_count))

    @property
    def message_count(self):
        return self.probs.size

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True, eq=False)
class MemoryBelief:
    """Per-message joint over ``(u_t, u_{t+1})``: ``joint[w, u_t, u_{t+1}]``."""

    joint: np.ndarray

    def __post_init__(self):
        joint = _frozen(self.joint)
        if joint.ndim != 3 or joint.shape[1] != joint.shape[2]:
            raise DomainError(f"memory belief must have shape (W, U, U), got {joint.shape}")
        sums = joint.sum(axis=(1, 2))
        if np.any(joint < 0) or np.any(np.abs(sums - 1.0) > 1e-9):
            raise DomainError("every per-message memory belief must be a probability vector")
        object.__setattr__(self, "joint", joint)

    @classmethod
    def point_mass(cls, message_count, memory_size, u):
        joint = np.zeros((message_count, memory_size, memory_size))
        joint[:, u, u] = 1.0
        return cls(joint)

    @property
    def memory_size(self):
        return self.joint.shape[1]

    def marginal(self) -> np.ndarray:
        """``P(u_t | y_{1:t}, w)``, shape ``(W, U)``."""
        return self.joint.sum(axis=2)

    def next_marginal(self) -> np.ndarray:
        """``P(u_{t+1} | y_{1:t}, w)``, the memory the next stage map will see."""
        return self.joint.sum(axis=1)


class BeliefAtom:
    """One receiver-side pair ``(message belief, memory belief)``.

    Equality and hashing go through ``key``, which rounds every probability to
    the 1e-9 grid. The stored floats themselves are never rounded.
    """

    __slots__ = ("message", "memory", "_key")

    def __init__(self, message: MessageBelief, memory: MemoryBelief):
        if memory.joint.shape[0] != message.message_count:
            raise DomainError("message and memory beliefs disagree on the message count")
        self.message = message
        self.memory = memory
        self._key = None

    @property
    def key(self):
        if self._key is None:
            m = grid_round(self.message.probs)
            j = grid_round(self.memory.joint.reshape(self.memory.joint.shape[0], -1))
            self._key = (tuple(m.tolist()), tuple(j.ravel().tolist()))
        return self._key

    def __eq__(self, other):
        return isinstance(other, BeliefAtom) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"BeliefAtom(message={self.message.probs.tolist()}, memory={self.memory.joint.tolist()})"

    def distance(self, other) -> float:
        """Max-abs difference over all stored probabilities."""
        return max(
            float(np.max(np.abs(self.message.probs - other.message.probs))),
            float(np.max(np.abs(self.memory.joint - other.memory.joint))),
        )


def canonicalize(atom: BeliefAtom) -> BeliefAtom:
    """Snap an atom onto the 1e-9 grid (idempotent; key is preserved)."""
    M = atom.message.message_count
    m = grid_round(atom.message.probs) / GRID
    j = grid_round(atom.memory.joint.reshape(M, -1)).reshape(atom.memory.joint.shape) / GRID
    return BeliefAtom(MessageBelief(m), MemoryBelief(j))


class SenderBelief:
    """Finite weighted set of distinct ``BeliefAtom``s.

    Atoms are kept sorted by key so that equal measures have equal layouts.
    """

    __slots__ = ("atoms", "weights", "_key")

    def __init__(self, atoms, weights):
        atoms = list(atoms)
        weights = np.array(weights, dtype=float)
        if len(atoms) != weights.size or not atoms:
            raise DomainError("sender belief needs one weight per atom and at least one atom")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise DomainError(f"sender belief weights are not a distribution: {weights}")
        order = sorted(range(len(atoms)), key=lambda i: atoms[i].key)
        atoms = [atoms[i] for i in order]
        weights = weights[order]
        for a, b in zip(atoms, atoms[1:]):
            if a.key == b.key:
                raise DomainError("sender belief atoms must be distinct under the canonical key")
        weights.setflags(write=False)
        self.atoms = tuple(atoms)
        self.weights = weights
        self._key = None

    @classmethod
    def merge(cls, pairs):
        """Build from ``(atom, weight)`` pairs, summing weights of equal atoms and normalizing."""
        acc = {}
        for atom, wt in pairs:
            k = atom.key
            if k in acc:
                acc[k][1] += wt
            else:
                acc[k] = [atom, wt]
        total = sum(v[1] for v in acc.values())
        if not total > 0:
            raise ImpossibleEvidenceError("sender belief update has zero total weight")
        return cls([v[0] for v in acc.values()], [v[1] / total for v in acc.values()])

    @property
    def key(self):
        if self._key is None:
            wk = grid_round(self.weights)
            self._key = tuple(zip((a.key for a in self.atoms), wk.tolist()))
        return self._key

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(zip(self.atoms, self.weights))

    def __eq__(self, other):
        return isinstance(other, SenderBelief) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"SenderBelief({len(self.atoms)} atoms, weights={self.weights.tolist()})"

    def sample_atom(self, rng: np.random.Generator) -> BeliefAtom:
        u = rng.random()
        idx = int(np.searchsorted(np.cumsum(self.weights), u, side="right"))
        return self.atoms[min(idx, len(self.atoms) - 1)]


def initial_belief_atom(message_count, initial_memory=0, memory_size=None) -> BeliefAtom:
    if memory_size is None:
        memory_size = initial_memory + 1
    if not 0 <= initial_memory < memory_size:
        raise DomainError(f"initial memory {initial_memory} outside memory alphabet of size {memory_size}")
    return BeliefAtom(
        MessageBelief.uniform(message_count), MemoryBelief.point_mass(message_count, memory_size, initial_memory)
    )


def initial_sender_belief(message_count, initial_memory=0, memory_size=None) -> SenderBelief:
    """Uniform message prior, memory point mass on ``(u_1, u_1)``, one atom."""
    if message_count < 2:
        raise DomainError(f"need at least two messages, got {message_count}")
    return SenderBelief([initial_belief_atom(message_count, initial_memory, memory_size)], [1.0])


def update_message_belief(
    prev: MessageBelief, memory: MemoryBelief, encoder: EncoderMap, y: int, forward: StochasticKernel
) -> MessageBelief:
    """Bayes step for the message posterior after observing ``y``."""
    _check_dims(prev.message_count, memory, encoder)
    lik = likelihoods(memory, encoder, y, forward)
    post = prev.probs * lik
    total = post.sum()
    if not total > 0:
        raise ImpossibleEvidenceError(
            f"output {y} is impossible under every message", encoder=encoder, y=y
        )
    return MessageBelief(post / total)


def likelihoods(memory: MemoryBelief, encoder: EncoderMap, y: int, forward: StochasticKernel) -> np.ndarray:
    """``P(y_t = y | y_{1:t-1}, w)`` for every message ``w``."""
    return (memory.next_marginal() * forward.rows[encoder.table, y]).sum(axis=1)


def transition_weights(feedback: StochasticKernel, g_table: np.ndarray, y: int) -> np.ndarray:
    """``B[w, u, u'] = sum_z Qb(z|y) 1{g[u, z, w] = u'}``."""
    U, Z, M = g_table.shape
    B = np.zeros((M, U, U))
    w_idx = np.broadcast_to(np.arange(M)[None, None, :], g_table.shape)
    u_idx = np.broadcast_to(np.arange(U)[:, None, None], g_table.shape)
    q = np.broadcast_to(feedback.rows[y][None, :, None], g_table.shape)
    np.add.at(B, (w_idx, u_idx, g_table), q)
    return B


def update_memory_belief(
    prev: MemoryBelief,
    encoder: EncoderMap,
    y: int,
    forward: StochasticKernel,
    feedback: StochasticKernel,
    g_table: np.ndarray,
    live=None,
) -> MemoryBelief:
    """Bayes step for the per-message memory belief after observing ``y``.

    ``live`` masks messages still possible; rows of ruled-out messages are
    pinned to the point mass on ``(0, 0)`` so equal atoms share one key.
    A zero normalizer for a live message raises ``ImpossibleEvidenceError``.
    """
    M = prev.joint.shape[0]
    _check_dims(M, prev, encoder)
    g_table = np.asarray(g_table)
    if g_table.shape[0] != prev.memory_size or g_table.shape[2] != M:
        raise DomainError(f"memory update table shape {g_table.shape} does not match the memory belief")
    a = prev.next_marginal() * forward.rows[encoder.table, y]
    joint = a[:, :, None] * transition_weights(feedback, g_table, y)
    sums = joint.sum(axis=(1, 2))
    live = np.ones(M, dtype=bool) if live is None else np.asarray(live, dtype=bool)
    out = np.zeros_like(joint)
    for w in range(M):
        if not live[w]:
            out[w, 0, 0] = 1.0
        elif sums[w] > 0:
            out[w] = joint[w] / sums[w]
        else:
            raise ImpossibleEvidenceError(
                f"output {y} is impossible under message {w}", w=w, y=y, encoder=encoder
            )
    return MemoryBelief(out)


def update_atom(
    atom: BeliefAtom,
    encoder: EncoderMap,
    y: int,
    forward: StochasticKernel,
    feedback: StochasticKernel,
    g_table: np.ndarray,
) -> BeliefAtom:
    """Receiver-side step: message belief first, then memory belief for surviving messages."""
    message = update_message_belief(atom.message, atom.memory, encoder, y, forward)
    memory = update_memory_belief(atom.memory, encoder, y, forward, feedback, g_table, live=message.probs > 0)
    return BeliefAtom(message, memory)


def update_sender_belief(
    prev: SenderBelief,
    encoder: EncoderMap,
    z: int,
    u: int,
    w: int,
    forward: StochasticKernel,
    feedback: StochasticKernel,
    g_table: np.ndarray,
    cache=None,
) -> SenderBelief:
    """Sender's step after sending ``encoder(w, u)`` and seeing feedback ``z``.

    Every atom is pushed through ``update_atom`` for each output ``y`` with
    weight ``Qf(y | x) Qb(z | y)``. ``cache`` (a dict) memoizes atom pushes
    keyed on ``(atom key, encoder key, y, id(g_table))``.
    """
    x = encoder(w, u)
    coeff = forward.rows[x] * feedback.rows[:, z]
    pairs = []
    for atom, wt in prev:
        for y in np.flatnonzero(coeff):
            weight = wt * coeff[y]
            if weight <= 0:
                continue
            if cache is None:
                nxt = update_atom(atom, encoder, int(y), forward, feedback, g_table)
            else:
                ck = (atom.key, encoder.key(), int(y), id(g_table))
                nxt = cache.get(ck)
                if nxt is None:
                    nxt = update_atom(atom, encoder, int(y), forward, feedback, g_table)
                    cache[ck] = nxt
            pairs.append((nxt, weight))
    if not pairs:
        raise ImpossibleEvidenceError(f"feedback {z} is impossible after input {x}", z=z, x=x)
    return SenderBelief.merge(pairs)


def receiver_trajectory(policy, channels, y_history) -> list:
    """Chained receiver atoms ``[a_0, a_1, ..., a_t]`` along ``y_history``."""
    atom = initial_belief_atom(policy.message_count, policy.initial_memory, policy.memory_size)
    out = [atom]
    for t, y in enumerate(y_history, start=1):
        atom = update_atom(
            atom, policy.encoders[t - 1], y, channels.forward, channels.feedback, policy.memory_update.at(t)
        )
        out.append(atom)
    return out


def sender_trajectory(policy, channels, w, z_history) -> list:
    """Chained sender beliefs ``[b_0, ..., b_t]`` for message ``w`` along ``z_history``."""
    from .policy import replay

    us, _ = replay(policy, w, z_history)
    b = initial_sender_belief(policy.message_count, policy.initial_memory, policy.memory_size)
    out = [b]
    for t, z in enumerate(z_history, start=1):
        b = update_sender_belief(
            b, policy.encoders[t - 1], z, us[t - 1], w, channels.forward, channels.feedback, policy.memory_update.at(t)
        )
        out.append(b)
    return out


def _check_dims(M, memory, encoder):
    if encoder.table.shape != (M, memory.memory_size):
        raise DomainError(
            f"encoder map shape {encoder.table.shape} does not match (W={M}, U={memory.memory_size})"
        )
