"""Brute-force ground truth.

* ``exhaustive_general``: minimum error over every deterministic feedback
  encoder tree (the unrestricted problem).
* ``exhaustive_markov``: minimum over every sequence of stage maps for a fixed
  memory update.
* ``PathEnumeration`` / ``conditional_oracle``: exact conditionals from the
  full joint over ``(w, y_{1:t}, z_{1:t})``. These never call the recursive
  belief updates, so they serve as an independent check on them.
"""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np

from . import kernels
from .belief import BeliefAtom, MemoryBelief, MessageBelief, SenderBelief
from .channel import ChannelPair
from .errors import CapacityError, DomainError, ImpossibleEvidenceError
from .policy import (
    EncoderMapSpace,
    GeneralEncoder,
    MarkovPolicy,
    MemoryUpdate,
    history_from_index,
    replay,
    stage_offsets,
)

DEFAULT_STRATEGY_CAP = 10**6
CHUNK = 1 << 14
TIE_TOL = 1e-12


def _uniform(M, prior):
    return np.full(M, 1.0 / M) if prior is None else np.asarray(prior, dtype=float)


def _digits(indices, length, base):
    powers = base ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (indices[:, None] // powers[None, :]) % base


def _argmin_scan(count, evaluate_chunk, workers=1):
    """Lowest index whose value is within ``TIE_TOL`` of the global minimum."""
    ranges = [(lo, min(count, lo + CHUNK)) for lo in range(0, count, CHUNK)]
    if workers and workers > 1 and len(ranges) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(evaluate_chunk, *zip(*ranges)))
    else:
        parts = [evaluate_chunk(lo, hi) for lo, hi in ranges]
    values = np.concatenate(parts)
    best = values.min()
    index = int(np.flatnonzero(values <= best + TIE_TOL)[0])
    return float(best), index, values


class _GeneralChunk:
    def __init__(self, channels, M, n, entries, prior):
        self.channels, self.M, self.n, self.entries, self.prior = channels, M, n, entries, prior
        self.offsets = stage_offsets(M, channels.n_feedback, n)

    def __call__(self, lo, hi):
        st = _digits(np.arange(lo, hi, dtype=np.int64), self.entries, self.channels.n_inputs)
        return kernels.batch_error(
            st, self.offsets, self.M, self.channels.n_feedback, self.n,
            self.channels.forward.rows, self.channels.feedback.rows, self.prior,
        )


def general_strategy_count(channels: ChannelPair, horizon, message_count):
    entries = sum(message_count * channels.n_feedback**t for t in range(horizon))
    return channels.n_inputs**entries, entries


def exhaustive_general(
    channels: ChannelPair, horizon: int, message_count: int, cap=DEFAULT_STRATEGY_CAP, prior=None, workers=1
):
    """Global optimum ``(Pe*, encoder)`` over every deterministic feedback encoder.

    Strategies are ordered lexicographically on the stage-major flat layout;
    the first argmin (within 1e-12) is returned.
    """
    count, entries = general_strategy_count(channels, horizon, message_count)
    if count > cap:
        raise CapacityError(f"{count} general strategies exceed the strategy cap {cap}", count=count, cap=cap)
    chunk = _GeneralChunk(channels, message_count, horizon, entries, _uniform(message_count, prior))
    best, index, _ = _argmin_scan(count, chunk, workers)
    flat = _digits(np.array([index], dtype=np.int64), entries, channels.n_inputs)[0]
    return best, GeneralEncoder.from_flat(flat, message_count, channels.n_inputs, channels.n_feedback, horizon)


def memory_paths(memory_update: MemoryUpdate, horizon, message_count, initial_memory=0):
    """``umap[t][w, h]``: memory at stage ``t+1`` after feedback prefix ``h`` (independent of the maps)."""
    Z = memory_update.feedback_size
    out = []
    for t in range(horizon):
        umap = np.zeros((message_count, Z**t), dtype=np.int64)
        for w in range(message_count):
            for h in range(Z**t):
                u = initial_memory
                for s, z in enumerate(history_from_index(h, t, Z), start=1):
                    u = memory_update(s, u, z, w)
                umap[w, h] = u
        out.append(umap)
    return out


class _MarkovChunk:
    def __init__(self, channels, M, n, space, umaps, prior):
        self.channels, self.M, self.n, self.prior = channels, M, n, prior
        self.offsets = stage_offsets(M, channels.n_feedback, n)
        self.na = len(space)
        tables = space.tables()  # (|Phi|, M, U)
        w_idx = np.arange(M)[:, None]
        self.parts = [tables[:, w_idx, um].reshape(self.na, -1) for um in umaps]

    def __call__(self, lo, hi):
        acts = _digits(np.arange(lo, hi, dtype=np.int64), self.n, self.na)
        st = np.concatenate([self.parts[t][acts[:, t]] for t in range(self.n)], axis=1)
        return kernels.batch_error(
            st, self.offsets, self.M, self.channels.n_feedback, self.n,
            self.channels.forward.rows, self.channels.feedback.rows, self.prior,
        )


def exhaustive_markov(
    channels: ChannelPair,
    horizon: int,
    message_count: int,
    memory_size: int = 1,
    memory_update: Optional[MemoryUpdate] = None,
    initial_memory: int = 0,
    cap=DEFAULT_STRATEGY_CAP,
    prior=None,
    workers=1,
):
    """Best ``(value, MarkovPolicy)`` over all ``|Phi|**n`` stage-map sequences."""
    if memory_update is None:
        if memory_size != 1:
            raise DomainError("a memory update table is required when memory size exceeds 1")
        memory_update = MemoryUpdate.constant(channels.n_feedback, message_count)
    space = EncoderMapSpace(message_count, memory_size, channels.n_inputs, cap)
    count = len(space) ** horizon
    if count > cap:
        raise CapacityError(f"{count} Markov policies exceed the strategy cap {cap}", count=count, cap=cap)
    umaps = memory_paths(memory_update, horizon, message_count, initial_memory)
    chunk = _MarkovChunk(channels, message_count, horizon, space, umaps, _uniform(message_count, prior))
    best, index, _ = _argmin_scan(count, chunk, workers)
    acts = _digits(np.array([index], dtype=np.int64), horizon, len(space))[0]
    policy = MarkovPolicy(tuple(space[int(a)] for a in acts), memory_update, initial_memory)
    return best, policy


class PathEnumeration:
    """Full joint ``P(w, y_{1:t}, z_{1:t})`` for a Markov policy, by explicit path products.

    ``joint[w, yi, zi]`` uses base-|Y| / base-|Z| history indices (earliest
    symbol most significant); ``memory[k][w, zi]`` is ``u_{k+1}`` along the path.
    """

    def __init__(self, policy: MarkovPolicy, channels: ChannelPair, length: int, prior=None, path_cap=10**7):
        if length > policy.horizon:
            raise DomainError(f"history length {length} exceeds horizon {policy.horizon}")
        M, Y, Z = policy.message_count, channels.n_outputs, channels.n_feedback
        paths = M * (Y * Z) ** length
        if paths > path_cap:
            raise CapacityError(f"{paths} paths exceed the path cap {path_cap}", count=paths, cap=path_cap)
        self.policy, self.channels, self.length = policy, channels, length
        Qf, Qb = channels.forward.rows, channels.feedback.rows
        p = _uniform(M, prior)
        self.joint = np.zeros((M, Y**length, Z**length))
        self.memory = np.zeros((length + 1, M, Z**length), dtype=np.int64)
        self.inputs = np.zeros((length, M, Z**length), dtype=np.int64)
        for w in range(M):
            for zi, zs in enumerate(itertools.product(range(Z), repeat=length)):
                us, xs = replay(policy, w, zs)
                self.memory[:, w, zi] = us[: length + 1]
                self.inputs[:, w, zi] = xs[:length]
                for yi, ys in enumerate(itertools.product(range(Y), repeat=length)):
                    prob = p[w]
                    for s in range(length):
                        prob *= Qf[xs[s], ys[s]] * Qb[ys[s], zs[s]]
                    self.joint[w, yi, zi] = prob

    def _yi(self, ys):
        return _index(ys, self.channels.n_outputs, self.length)

    def _zi(self, zs):
        return _index(zs, self.channels.n_feedback, self.length)

    def message_posterior(self, y_history) -> np.ndarray:
        """``P(w | y_{1:t})``."""
        col = self.joint[:, self._yi(y_history), :].sum(axis=1)
        total = col.sum()
        if not total > 0:
            raise ImpossibleEvidenceError(f"output history {tuple(y_history)} has probability zero")
        return col / total

    def memory_posterior(self, y_history, w) -> np.ndarray:
        """``P(u_t, u_{t+1} | y_{1:t}, w)`` as a ``(U, U)`` array (``u_1`` is doubled at t = 0)."""
        U, t = self.policy.memory_size, self.length
        yi = self._yi(y_history)
        out = np.zeros((U, U))
        lo = self.memory[t - 1, w] if t > 0 else self.memory[0, w]
        hi = self.memory[t, w]
        np.add.at(out, (lo, hi), self.joint[w, yi, :])
        total = out.sum()
        if not total > 0:
            raise ImpossibleEvidenceError(f"output history {tuple(y_history)} impossible under message {w}")
        return out / total

    def receiver_atom(self, y_history) -> BeliefAtom:
        """Receiver pair computed directly; rows of ruled-out messages pinned to mass on ``(0, 0)``."""
        msg = self.message_posterior(y_history)
        U = self.policy.memory_size
        mem = np.zeros((self.policy.message_count, U, U))
        for w in range(self.policy.message_count):
            if msg[w] > 0:
                mem[w] = self.memory_posterior(y_history, w)
            else:
                mem[w, 0, 0] = 1.0
        return BeliefAtom(MessageBelief(msg), MemoryBelief(mem))

    def atom_distribution(self, z_history, w) -> SenderBelief:
        """``P(receiver pair | z_{1:t}, w, u_{1:t+1}, x_{1:t})`` grouped by canonical key.

        Memory and inputs are functions of ``(w, z_{1:t})``, so conditioning on
        them adds nothing beyond ``(w, z_{1:t})``.
        """
        zi = self._zi(z_history)
        weights = self.joint[w, :, zi]
        if not weights.sum() > 0:
            raise ImpossibleEvidenceError(f"feedback history {tuple(z_history)} impossible under message {w}")
        Y, t = self.channels.n_outputs, self.length
        pairs = [
            (self.receiver_atom(history_from_index(yi, t, Y)), float(weights[yi]))
            for yi in np.flatnonzero(weights > 0)
        ]
        return SenderBelief.merge(pairs)


def _index(history, base, length):
    if len(history) != length:
        raise DomainError(f"history has length {len(history)}, enumeration has length {length}")
    index = 0
    for s in history:
        index = index * base + int(s)
    return index


def conditional_oracle(policy: MarkovPolicy, channels: ChannelPair, condition: str, **kw):
    """Exact conditional by path enumeration.

    ``condition`` is one of

    * ``"message"``: ``y_history=`` -> ``P(w | y)`` vector
    * ``"memory"``: ``y_history=, w=`` -> ``P(u_t, u_{t+1} | y, w)`` matrix
    * ``"atom"``: ``z_history=, w=`` -> ``SenderBelief`` over receiver pairs
    """
    prior = kw.get("prior")
    if condition == "message":
        ys = tuple(kw["y_history"])
        return PathEnumeration(policy, channels, len(ys), prior).message_posterior(ys)
    if condition == "memory":
        ys = tuple(kw["y_history"])
        return PathEnumeration(policy, channels, len(ys), prior).memory_posterior(ys, kw["w"])
    if condition == "atom":
        zs = tuple(kw["z_history"])
        return PathEnumeration(policy, channels, len(zs), prior).atom_distribution(zs, kw["w"])
    raise DomainError(f"unknown condition {condition!r}")


def measures_close(a: SenderBelief, b: SenderBelief, tol=1e-9) -> bool:
    """Compare two atom measures without relying on canonical keys.

    Every atom's mass neighbourhood (atoms within ``tol``) must carry the same
    total weight in both measures.
    """
    for atom, _ in list(a) + list(b):
        wa = sum(wt for x, wt in a if x.distance(atom) <= tol)
        wb = sum(wt for x, wt in b if x.distance(atom) <= tol)
        if abs(wa - wb) > tol:
            return False
    return True
