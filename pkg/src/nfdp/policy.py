"""Encoder representations: stage maps, memory updates, Markov and general encoders."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DomainError

DEFAULT_ACTION_CAP = 10**6


def _frozen_int_array(values, ndim, what):
    arr = np.array(values, dtype=np.int64)
    if arr.ndim != ndim:
        raise DomainError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EncoderMap:
    """Deterministic stage map ``x = table[w, u]``."""

    table: np.ndarray
    n_inputs: int

    def __post_init__(self):
        table = _frozen_int_array(self.table, 2, "encoder table")
        if table.size and (table.min() < 0 or table.max() >= self.n_inputs):
            raise DomainError(f"encoder table entries must lie in 0..{self.n_inputs - 1}")
        object.__setattr__(self, "table", table)

    @property
    def message_count(self):
        return self.table.shape[0]

    @property
    def memory_size(self):
        return self.table.shape[1]

    def __call__(self, w, u):
        return int(self.table[w, u])

    def key(self):
        return (self.n_inputs, self.table.shape, tuple(self.table.ravel().tolist()))

    def __eq__(self, other):
        return isinstance(other, EncoderMap) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"EncoderMap({self.table.tolist()}, n_inputs={self.n_inputs})"


class EncoderMapSpace:
    """All ``|X|**(|W||U|)`` deterministic stage maps in lexicographic order.

    The first table entry (``w=0, u=0``) is the most significant digit.
    Iteration is restartable and indexable, so workers can split by ranges.
    """

    def __init__(self, message_count, memory_size, n_inputs, cap=DEFAULT_ACTION_CAP):
        for name, v in (("message count", message_count), ("memory size", memory_size), ("input size", n_inputs)):
            if v < 1:
                raise DomainError(f"{name} must be positive, got {v}")
        self.message_count = int(message_count)
        self.memory_size = int(memory_size)
        self.n_inputs = int(n_inputs)
        self.cells = self.message_count * self.memory_size
        self.count = self.n_inputs**self.cells
        if self.count > cap:
            raise CapacityError(
                f"{self.count} encoder maps exceed the action cap {cap}", count=self.count, cap=cap
            )
        self._cache = {}

    def __len__(self):
        return self.count

    def digits(self, index):
        if not 0 <= index < self.count:
            raise IndexError(index)
        out = np.zeros(self.cells, dtype=np.int64)
        for pos in range(self.cells - 1, -1, -1):
            index, out[pos] = divmod(index, self.n_inputs)
        return out

    def __getitem__(self, index) -> EncoderMap:
        if index < 0:
            index += self.count
        cached = self._cache.get(index)
        if cached is None:
            table = self.digits(index).reshape(self.message_count, self.memory_size)
            cached = EncoderMap(table, self.n_inputs)
            self._cache[index] = cached
        return cached

    def index_of(self, encoder: EncoderMap) -> int:
        if encoder.table.shape != (self.message_count, self.memory_size) or encoder.n_inputs != self.n_inputs:
            raise DomainError("encoder map does not belong to this space")
        index = 0
        for d in encoder.table.ravel():
            index = index * self.n_inputs + int(d)
        return index

    def __iter__(self) -> Iterator[EncoderMap]:
        for i in range(self.count):
            yield self[i]

    def tables(self) -> np.ndarray:
        """All maps at once, shape ``(count, |W|, |U|)``."""
        grid = np.array(list(itertools.product(range(self.n_inputs), repeat=self.cells)), dtype=np.int64)
        return grid.reshape(self.count, self.message_count, self.memory_size)


def enumerate_encoder_maps(message_count, memory_size, n_inputs, cap=DEFAULT_ACTION_CAP) -> EncoderMapSpace:
    return EncoderMapSpace(message_count, memory_size, n_inputs, cap)


@dataclass(frozen=True, eq=False)
class MemoryUpdate:
    """Memory transition ``u' = table[stage][u, z, w]``.

    ``tables`` has shape ``(stages, |U|, |Z|, |W|)``; a single stage is shared
    by every time step.
    """

    tables: np.ndarray
    name: str = "table"

    def __post_init__(self):
        tables = np.array(self.tables, dtype=np.int64)
        if tables.ndim == 3:
            tables = tables[None]
        if tables.ndim != 4:
            raise DomainError(f"memory update table must have shape (stages, U, Z, W), got {tables.shape}")
        if tables.size and (tables.min() < 0 or tables.max() >= tables.shape[1]):
            raise DomainError(f"memory update entries must lie in 0..{tables.shape[1] - 1}")
        tables.setflags(write=False)
        object.__setattr__(self, "tables", tables)

    @property
    def memory_size(self):
        return self.tables.shape[1]

    @property
    def feedback_size(self):
        return self.tables.shape[2]

    @property
    def message_count(self):
        return self.tables.shape[3]

    @property
    def stages(self):
        return self.tables.shape[0]

    def at(self, t) -> np.ndarray:
        """Table used for the transition after transmission ``t`` (1-based)."""
        if self.stages == 1:
            return self.tables[0]
        if not 1 <= t <= self.stages:
            raise DomainError(f"memory update has {self.stages} stages, asked for stage {t}")
        return self.tables[t - 1]

    def __call__(self, t, u, z, w):
        return int(self.at(t)[u, z, w])

    def key(self):
        return (self.tables.shape, tuple(self.tables.ravel().tolist()))

    def __eq__(self, other):
        return isinstance(other, MemoryUpdate) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_literal(self):
        if self.name in ("last_feedback", "constant"):
            return self.name
        return {"table": self.tables.tolist()}

    @classmethod
    def last_feedback(cls, feedback_size, message_count):
        """``u' = z``; the memory alphabet equals the feedback alphabet."""
        t = np.broadcast_to(np.arange(feedback_size)[None, :, None], (feedback_size, feedback_size, message_count))
        return cls(t.copy(), name="last_feedback")

    @classmethod
    def constant(cls, feedback_size, message_count):
        """Single memory state; the encoder ignores feedback."""
        return cls(np.zeros((1, feedback_size, message_count), dtype=np.int64), name="constant")


@dataclass(frozen=True, eq=False)
class MarkovPolicy:
    """Stage maps ``x_t = phi_t(w, u_t)`` with memory driven by a ``MemoryUpdate``."""

    encoders: tuple
    memory_update: MemoryUpdate
    initial_memory: int = 0

    def __post_init__(self):
        encoders = tuple(self.encoders)
        object.__setattr__(self, "encoders", encoders)
        if not encoders:
            raise DomainError("a policy needs at least one stage")
        shape = encoders[0].table.shape
        n_inputs = encoders[0].n_inputs
        for e in encoders:
            if e.table.shape != shape or e.n_inputs != n_inputs:
                raise DomainError("all stage maps must share (W, U, X) dimensions")
        g = self.memory_update
        if g.message_count != shape[0] or g.memory_size != shape[1]:
            raise DomainError(
                f"memory update dims (U={g.memory_size}, W={g.message_count}) do not match "
                f"stage maps (W={shape[0]}, U={shape[1]})"
            )
        if g.stages not in (1, len(encoders)):
            raise DomainError(f"memory update has {g.stages} stages for horizon {len(encoders)}")
        if not 0 <= self.initial_memory < shape[1]:
            raise DomainError(f"initial memory {self.initial_memory} outside memory alphabet")

    @property
    def horizon(self):
        return len(self.encoders)

    @property
    def message_count(self):
        return self.encoders[0].message_count

    @property
    def memory_size(self):
        return self.encoders[0].memory_size

    @property
    def n_inputs(self):
        return self.encoders[0].n_inputs

    @property
    def feedback_size(self):
        return self.memory_update.feedback_size

    def to_literal(self):
        return {
            "encoders": [e.table.tolist() for e in self.encoders],
            "memory_update": self.memory_update.to_literal(),
            "initial_memory": int(self.initial_memory),
        }


def replay(policy: MarkovPolicy, w: int, z_history: Sequence[int]):
    """Memory trajectory ``u_1..u_{k+1}`` and inputs ``x_1..x_{min(k+1, n)}`` for a feedback prefix of length k."""
    if not 0 <= w < policy.message_count:
        raise DomainError(f"message {w} outside 0..{policy.message_count - 1}")
    if len(z_history) > policy.horizon:
        raise DomainError(f"feedback history of length {len(z_history)} exceeds horizon {policy.horizon}")
    u = policy.initial_memory
    us, xs = [u], [policy.encoders[0](w, u)]
    for t, z in enumerate(z_history, start=1):
        if not 0 <= z < policy.feedback_size:
            raise DomainError(f"feedback symbol {z} outside 0..{policy.feedback_size - 1}")
        u = policy.memory_update(t, u, z, w)
        us.append(u)
        if t < policy.horizon:
            xs.append(policy.encoders[t](w, u))
    return us, xs


def history_index(z_history, n_feedback):
    """Base-``|Z|`` index of a feedback prefix, earliest symbol most significant."""
    index = 0
    for z in z_history:
        index = index * n_feedback + int(z)
    return index


def history_from_index(index, length, n_feedback):
    out = [0] * length
    for pos in range(length - 1, -1, -1):
        index, out[pos] = divmod(index, n_feedback)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class GeneralEncoder:
    """History-tree encoder: stage ``t`` table has shape ``(|W|, |Z|**(t-1))``."""

    tables: tuple
    n_inputs: int
    n_feedback: int

    def __post_init__(self):
        tables = []
        for t, tab in enumerate(self.tables, start=1):
            arr = _frozen_int_array(tab, 2, f"stage {t} table")
            if arr.shape[1] != self.n_feedback ** (t - 1):
                raise DomainError(
                    f"stage {t} table needs {self.n_feedback ** (t - 1)} history columns, got {arr.shape[1]}"
                )
            if arr.size and (arr.min() < 0 or arr.max() >= self.n_inputs):
                raise DomainError(f"stage {t} entries must lie in 0..{self.n_inputs - 1}")
            tables.append(arr)
        if not tables:
            raise DomainError("a general encoder needs at least one stage")
        if len({a.shape[0] for a in tables}) != 1:
            raise DomainError("every stage must cover the same message set")
        object.__setattr__(self, "tables", tuple(tables))

    @property
    def horizon(self):
        return len(self.tables)

    @property
    def message_count(self):
        return self.tables[0].shape[0]

    def input(self, w, z_history):
        return int(self.tables[len(z_history)][w, history_index(z_history, self.n_feedback)])

    def flat(self) -> np.ndarray:
        """Stage-major concatenation of all tables (the kernel layout)."""
        return np.concatenate([t.ravel() for t in self.tables])

    def stage_offsets(self) -> np.ndarray:
        return stage_offsets(self.message_count, self.n_feedback, self.horizon)

    @classmethod
    def from_flat(cls, flat, message_count, n_inputs, n_feedback, horizon):
        offs = stage_offsets(message_count, n_feedback, horizon)
        tables = [
            np.asarray(flat[offs[t] : offs[t + 1]]).reshape(message_count, n_feedback**t) for t in range(horizon)
        ]
        return cls(tuple(tables), n_inputs, n_feedback)

    def key(self):
        return (self.n_inputs, self.n_feedback, tuple(tuple(t.ravel().tolist()) for t in self.tables))

    def __eq__(self, other):
        return isinstance(other, GeneralEncoder) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_literal(self):
        return [t.tolist() for t in self.tables]


def stage_offsets(message_count, n_feedback, horizon) -> np.ndarray:
    sizes = [message_count * n_feedback**t for t in range(horizon)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def markov_to_general(policy: MarkovPolicy) -> GeneralEncoder:
    """Unroll a Markov policy into its feedback-history tree."""
    Z, M, n = policy.feedback_size, policy.message_count, policy.horizon
    tables = []
    for t in range(n):
        tab = np.zeros((M, Z**t), dtype=np.int64)
        for w in range(M):
            for h in range(Z**t):
                _, xs = replay(policy, w, history_from_index(h, t, Z))
                tab[w, h] = xs[t]
        tables.append(tab)
    return GeneralEncoder(tuple(tables), policy.n_inputs, Z)


def general_to_markov(encoder: GeneralEncoder) -> MarkovPolicy:
    """Embed a history-tree encoder as a Markov policy whose memory is the feedback prefix.

    Memory symbol ``k`` stands for the ``k``-th prefix in length-then-lexicographic
    order (``0`` is the empty prefix). Entries for unreachable (stage, memory)
    pairs are set to 0.
    """
    Z, M, n = encoder.n_feedback, encoder.message_count, encoder.horizon
    starts = [sum(Z**j for j in range(L)) for L in range(n + 1)]
    U = starts[n]
    encoders, g_tables = [], []
    for t in range(1, n + 1):
        phi = np.zeros((M, U), dtype=np.int64)
        g = np.zeros((U, Z, M), dtype=np.int64)
        L = t - 1
        for h in range(Z**L):
            u = starts[L] + h
            phi[:, u] = encoder.tables[L][:, h]
            if t < n:
                for z in range(Z):
                    g[u, z, :] = starts[L + 1] + h * Z + z
        encoders.append(EncoderMap(phi, encoder.n_inputs))
        g_tables.append(g)
    return MarkovPolicy(tuple(encoders), MemoryUpdate(np.stack(g_tables)), initial_memory=0)
