"""Reference transmission schemes.

* ``repetition_scheme``: send the message index every stage, ignore feedback.
* ``pms_noiseless``: posterior matching; with noiseless feedback the sender
  knows the receiver's posterior exactly and transmits the inverse-CDF image
  of the message's midpoint coordinate under it.
* ``pms_noisy_conjecture``: the same rule when feedback is noisy. The sender
  keeps its belief over the receiver's posterior, samples one candidate per
  step and acts on it. With noiseless feedback the belief is a single atom
  and the two simulators coincide draw for draw.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .belief import BeliefAtom, SenderBelief, initial_belief_atom, update_atom
from .channel import ChannelPair, StochasticKernel
from .errors import ConvergenceError, DomainError, ImpossibleEvidenceError, PreconditionError
from .evaluate import EvaluationResult, exact_error_probability, ml_decode
from .policy import EncoderMap, GeneralEncoder


@dataclass(frozen=True, eq=False)
class InputDistribution:
    probs: np.ndarray
    cumulative: np.ndarray = field(init=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise DomainError(f"not a probability vector: {p}")
        p = p / p.sum()
        cum = np.cumsum(p)
        cum[-1] = 1.0
        p.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "cumulative", cum)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))

    def inverse_cdf(self, c: float) -> int:
        """Symbol ``x`` with ``cumulative[x-1] <= c < cumulative[x]``."""
        if not 0.0 <= c < 1.0:
            raise DomainError(f"coordinate {c} outside [0, 1)")
        return min(int(np.searchsorted(self.cumulative, c, side="right")), self.probs.size - 1)


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def blahut_arimoto(forward: StochasticKernel, tolerance: float = 1e-10, max_iterations: int = 100_000):
    """Capacity-achieving input distribution and capacity in bits.

    Stops when the gap between the standard lower bound ``log sum_x r(x) c(x)``
    and upper bound ``log max_x c(x)`` drops below ``tolerance`` (bits).
    """
    if not tolerance > 0:
        raise DomainError(f"tolerance must be positive, got {tolerance}")
    W = forward.rows
    r = np.full(W.shape[0], 1.0 / W.shape[0])
    logW = np.log(W, where=W > 0, out=np.zeros_like(W))
    for _ in range(max_iterations):
        q = r @ W
        logq = np.log(q, where=q > 0, out=np.zeros_like(q))
        D = np.sum(W * (logW - logq[None, :]), axis=1)
        c = np.exp(D)
        lower = math.log(float(r @ c))
        upper = float(D.max())
        if (upper - lower) / math.log(2) < tolerance:
            return InputDistribution(r), max(0.0, lower / math.log(2))
        r = r * c
        r = r / r.sum()
    raise ConvergenceError(f"Blahut-Arimoto did not converge in {max_iterations} iterations", last_iterate=r)


def repetition_scheme(message_count: int, horizon: int, n_inputs: int, n_feedback: int = 2) -> GeneralEncoder:
    if message_count > n_inputs:
        raise DomainError(f"repetition needs |X| >= M, got M={message_count}, |X|={n_inputs}")
    tables = [
        np.repeat(np.arange(message_count)[:, None], n_feedback**t, axis=1) for t in range(horizon)
    ]
    return GeneralEncoder(tuple(tables), n_inputs, n_feedback)


_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def midpoint_coordinate(probs, w) -> float:
    """Mass strictly below ``w`` plus half of ``w``'s own mass (index order).

    A zero-mass message above every other one would land on 1; it is kept just
    inside ``[0, 1)`` so it maps to the last input symbol.
    """
    return min(float(np.sum(probs[:w]) + probs[w] / 2.0), _BELOW_ONE)


@dataclass(frozen=True)
class TraceStep:
    x: int
    y: int
    z: int
    xi: float  # posterior mass of the true message under the belief acted on
    coordinate: float
    atoms: int  # sender-belief support size after the step


@dataclass
class SchemeTrace:
    message: int
    steps: list
    decoded: Optional[int] = None

    def to_dict(self):
        return {"message": self.message, "decoded": self.decoded, "steps": [asdict(s) for s in self.steps]}

    def __eq__(self, other):
        return isinstance(other, SchemeTrace) and self.to_dict() == other.to_dict()


class _PosteriorMatching:
    """Shared machinery; subclasses decide what the sender acts on.

    Receiver posteriors and sender beliefs are interned as integer ids the
    first time they are reached, with their transitions cached, so a trial
    step is a handful of list lookups.
    """

    def __init__(self, input_distribution: InputDistribution, horizon: int, message_count: int):
        if message_count < 2:
            raise DomainError(f"need at least two messages, got {message_count}")
        if horizon < 1:
            raise DomainError(f"horizon must be positive, got {horizon}")
        self.fx = input_distribution
        self.horizon = horizon
        self.message_count = message_count
        self._bound = None

    def stage_map(self, probs) -> EncoderMap:
        """Map every message to ``F_X^{-1}`` of its midpoint coordinate under ``probs``."""
        col = [self.fx.inverse_cdf(midpoint_coordinate(probs, w)) for w in range(self.message_count)]
        return EncoderMap(np.array(col)[:, None], self.fx.probs.size)

    def _check(self, channels: ChannelPair):
        if channels.n_inputs != self.fx.probs.size:
            raise DomainError(f"input distribution has {self.fx.probs.size} symbols, channel has {channels.n_inputs}")

    def _bind(self, channels):
        if self._bound is not None and self._bound[0] == channels:
            return
        self._bound = (channels,)
        self._g = np.zeros((1, channels.n_feedback, self.message_count), dtype=np.int64)
        self._cdf_f = [list(np.cumsum(r)[:-1]) for r in channels.forward.rows]
        self._cdf_b = [list(np.cumsum(r)[:-1]) for r in channels.feedback.rows]
        self._atoms, self._atom_ids, self._atom_x, self._atom_next = [], {}, [], []
        self._beliefs, self._belief_ids, self._belief_cum, self._belief_atoms = [], {}, [], []
        self._belief_next = {}
        self._atom_decided = {}
        self._root = self._atom_id(initial_belief_atom(self.message_count))
        self._root_belief = self._belief_id(SenderBelief([self._atoms[self._root]], [1.0]))

    def _atom_id(self, atom: BeliefAtom) -> int:
        i = self._atom_ids.get(atom.key)
        if i is None:
            i = len(self._atoms)
            self._atom_ids[atom.key] = i
            self._atoms.append(atom)
            self._atom_x.append(self.stage_map(atom.message.probs).table[:, 0].tolist())
            self._atom_next.append({})
        return i

    def _receiver_next(self, i, y) -> int:
        nxt = self._atom_next[i].get(y)
        if nxt is None:
            ch = self._bound[0]
            atom = self._atoms[i]
            phi = EncoderMap(np.array(self._atom_x[i])[:, None], self.fx.probs.size)
            nxt = self._atom_id(update_atom(atom, phi, y, ch.forward, ch.feedback, self._g))
            self._atom_next[i][y] = nxt
        return nxt

    def _belief_id(self, belief: SenderBelief) -> int:
        i = self._belief_ids.get(belief.key)
        if i is None:
            i = len(self._beliefs)
            self._belief_ids[belief.key] = i
            self._beliefs.append(belief)
            self._belief_cum.append(list(np.cumsum(belief.weights)[:-1]))
            self._belief_atoms.append([self._atom_id(a) for a in belief.atoms])
        return i

    def simulate(self, messages, channels: ChannelPair, seed: int, keep_traces=False):
        """Run one trial per entry of ``messages``; returns ``(errors, traces)``.

        Channel noise comes from ``SeedSequence(seed, spawn_key=(0,))`` and the
        sender's own randomness from ``spawn_key=(1,)``; trial ``i`` uses row
        ``i`` of both streams.
        """
        self._check(channels)
        self._bind(channels)
        messages = np.asarray(messages, dtype=np.int64)
        T = messages.size
        chan_u = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,))).random((T, self.horizon, 2))
        own_u = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,))).random((T, self.horizon))
        errors, traces = 0, []
        chan_u, own_u, messages = chan_u.tolist(), own_u.tolist(), messages.tolist()
        for i in range(T):
            w = messages[i]
            recv, steps = self._trial(w, chan_u[i], own_u[i], keep_traces)
            decoded = self._decision(recv)
            errors += decoded != w
            if keep_traces:
                traces.append(SchemeTrace(w, steps, decoded))
        return errors, traces

    def trace(self, w, channels, seed) -> SchemeTrace:
        return self.simulate([w], channels, seed, keep_traces=True)[1][0]

    def monte_carlo(self, channels: ChannelPair, trials: int, seed: int) -> EvaluationResult:
        """Error rate of the receiver's ML decision; messages drawn from ``spawn_key=(2,)``."""
        if trials < 1:
            raise DomainError(f"need at least one trial, got {trials}")
        self._check(channels)
        messages = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,))).integers(
            self.message_count, size=trials
        )
        errors, _ = self.simulate(messages, channels, seed)
        p = errors / trials
        return EvaluationResult(p, "monte_carlo", "recursive_belief", trials, math.sqrt(p * (1 - p) / trials))

    def _decision(self, i) -> int:
        d = self._atom_decided.get(i)
        if d is None:
            d = self._atom_decided[i] = ml_decode(self._atoms[i].message)
        return d

    def _step_record(self, atom_id, w, x, y, z, atoms):
        probs = self._atoms[atom_id].message.probs
        return TraceStep(x, y, z, float(probs[w]), midpoint_coordinate(probs, w), atoms)


class NoiselessPMS(_PosteriorMatching):
    """Posterior matching with noiseless feedback (sender tracks the receiver exactly)."""

    def _check(self, channels):
        super()._check(channels)
        if not channels.noiseless_feedback():
            raise PreconditionError("pms_noiseless needs an identity feedback kernel")

    def _trial(self, w, chan_u, own_u, keep):
        recv = self._root
        steps = []
        for t in range(self.horizon):
            x = self._atom_x[recv][w]
            y = bisect_right(self._cdf_f[x], chan_u[t][0])
            z = bisect_right(self._cdf_b[y], chan_u[t][1])
            if keep:
                steps.append(self._step_record(recv, w, x, y, z, 1))
            recv = self._receiver_next(recv, y)
        return recv, steps

    def encoder(self, channels: ChannelPair) -> GeneralEncoder:
        """The scheme unrolled as a feedback tree (feedback equals the output)."""
        self._check(channels)
        self._bind(channels)
        Z, M = channels.n_feedback, self.message_count
        tables = []
        level = [self._root]
        for t in range(self.horizon):
            tab = np.zeros((M, Z**t), dtype=np.int64)
            nxt = []
            for h, a in enumerate(level):
                tab[:, h] = self._atom_x[a]
                for z in range(Z):
                    try:
                        nxt.append(self._receiver_next(a, z))
                    except ImpossibleEvidenceError:
                        nxt.append(a)  # unreachable prefix
            tables.append(tab)
            level = nxt
        return GeneralEncoder(tuple(tables), channels.n_inputs, Z)

    def exact_error_probability(self, channels: ChannelPair) -> EvaluationResult:
        return exact_error_probability(self.encoder(channels), channels)


class NoisyPMSConjecture(_PosteriorMatching):
    """Posterior matching driven by a sample from the sender's belief over receiver posteriors.

    The receiver updates as a posterior-matching receiver would, assuming the
    sender acted on the receiver's own current posterior. The sender pushes
    every candidate receiver posterior through that update, weighting output
    ``y`` by ``Qf(y | x) Qb(z | y)``.
    """

    def sender_step(self, belief: SenderBelief, x, z, channels) -> SenderBelief:
        self._bind(channels)
        return self._beliefs[self._sender_next(self._belief_id(belief), x, z)]

    def _sender_next(self, b, x, z) -> int:
        key = (b, x, z)
        nxt = self._belief_next.get(key)
        if nxt is None:
            ch = self._bound[0]
            coeff = ch.forward.rows[x] * ch.feedback.rows[:, z]
            belief = self._beliefs[b]
            pairs = []
            for a, (_, wt) in zip(self._belief_atoms[b], belief):
                for y in np.flatnonzero(coeff > 0):
                    weight = wt * coeff[y]
                    if weight > 0:
                        pairs.append((self._atoms[self._receiver_next(a, int(y))], weight))
            nxt = self._belief_id(SenderBelief.merge(pairs))
            self._belief_next[key] = nxt
        return nxt

    def _trial(self, w, chan_u, own_u, keep):
        recv, belief = self._root, self._root_belief
        steps = []
        for t in range(self.horizon):
            acted = self._belief_atoms[belief][bisect_right(self._belief_cum[belief], own_u[t])]
            x = self._atom_x[acted][w]
            y = bisect_right(self._cdf_f[x], chan_u[t][0])
            z = bisect_right(self._cdf_b[y], chan_u[t][1])
            recv = self._receiver_next(recv, y)
            belief = self._sender_next(belief, x, z)
            if keep:
                steps.append(self._step_record(acted, w, x, y, z, len(self._belief_atoms[belief])))
        return recv, steps


def pms_noiseless(input_distribution: InputDistribution, horizon: int, message_count: int) -> NoiselessPMS:
    return NoiselessPMS(input_distribution, horizon, message_count)


def pms_noisy_conjecture(input_distribution: InputDistribution, horizon: int, message_count: int) -> NoisyPMSConjecture:
    return NoisyPMSConjecture(input_distribution, horizon, message_count)
