"""Error probability: exact path enumeration, ML decoding and Monte Carlo."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import kernels
from .belief import MessageBelief, initial_belief_atom, update_atom
from .channel import ChannelPair, sample_many
from .errors import CapacityError, DomainError, ImpossibleEvidenceError
from .policy import GeneralEncoder, MarkovPolicy, general_to_markov, history_index, markov_to_general

DEFAULT_PATH_CAP = 10**7
MC_BLOCK = 1 << 15
DECODERS = ("true_posterior", "recursive_belief")


@dataclass(frozen=True)
class EvaluationResult:
    error_probability: float
    method: str
    decoder: str = "true_posterior"
    trials: Optional[int] = None
    standard_error: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("exact", "monte_carlo"):
            raise DomainError(f"unknown evaluation method {self.method!r}")
        if (self.method == "monte_carlo") != (self.standard_error is not None):
            raise DomainError("standard error is reported exactly for Monte Carlo results")
        if not -1e-12 <= self.error_probability <= 1 + 1e-12:
            raise DomainError(f"error probability {self.error_probability} outside [0, 1]")

    def to_dict(self):
        return asdict(self)


def ml_decode(posterior) -> int:
    """Index of the largest posterior mass; ties go to the lowest index."""
    probs = posterior.probs if isinstance(posterior, MessageBelief) else np.asarray(posterior)
    return int(np.argmax(probs))


def as_general(encoder) -> GeneralEncoder:
    if isinstance(encoder, MarkovPolicy):
        return markov_to_general(encoder)
    if isinstance(encoder, GeneralEncoder):
        return encoder
    raise DomainError(f"expected a MarkovPolicy or GeneralEncoder, got {type(encoder).__name__}")


def _prior(prior, M):
    if prior is None:
        return np.full(M, 1.0 / M)
    p = prior.probs if isinstance(prior, MessageBelief) else np.asarray(prior, dtype=float)
    if p.shape != (M,):
        raise DomainError(f"prior has shape {p.shape}, expected ({M},)")
    return p


def _check_dims(encoder: GeneralEncoder, channels: ChannelPair):
    if encoder.n_inputs != channels.n_inputs or encoder.n_feedback != channels.n_feedback:
        raise DomainError(
            f"encoder alphabets (X={encoder.n_inputs}, Z={encoder.n_feedback}) do not match channels "
            f"(X={channels.n_inputs}, Z={channels.n_feedback})"
        )


def true_posterior(encoder, channels: ChannelPair, y_history, prior=None) -> MessageBelief:
    """``P(w | y_{1:t})`` by summing the joint over every feedback history.

    Plain enumeration on purpose: this is the reference every faster routine
    is checked against.
    """
    enc = as_general(encoder)
    _check_dims(enc, channels)
    t = len(y_history)
    if t > enc.horizon:
        raise DomainError(f"output history of length {t} exceeds horizon {enc.horizon}")
    Qf, Qb = channels.forward.rows, channels.feedback.rows
    p = _prior(prior, enc.message_count)
    joint = np.zeros(enc.message_count)
    for w in range(enc.message_count):
        total = 0.0
        for zs in itertools.product(range(enc.n_feedback), repeat=t):
            prob = 1.0
            for s in range(t):
                x = enc.tables[s][w, history_index(zs[:s], enc.n_feedback)]
                prob *= Qf[x, y_history[s]] * Qb[y_history[s], zs[s]]
            total += prob
        joint[w] = p[w] * total
    evidence = joint.sum()
    if not evidence > 0:
        raise ImpossibleEvidenceError(f"output history {tuple(y_history)} has probability zero", y=tuple(y_history))
    return MessageBelief(joint / evidence)


def output_joint(encoder, channels: ChannelPair, prior=None, path_cap=DEFAULT_PATH_CAP) -> np.ndarray:
    """``P(w, y_{1:n})`` as an ``(M, |Y|**n)`` array (y index base ``|Y|``, earliest most significant)."""
    enc = as_general(encoder)
    _check_dims(enc, channels)
    M, n = enc.message_count, enc.horizon
    paths = M * (channels.n_outputs * channels.n_feedback) ** n
    if paths > path_cap:
        raise CapacityError(f"{paths} paths exceed the path cap {path_cap}", count=paths, cap=path_cap)
    return kernels.output_joint(
        enc.flat(), enc.stage_offsets(), M, enc.n_feedback, n,
        channels.forward.rows, channels.feedback.rows, _prior(prior, M),
    )


def decode_table(encoder, channels: ChannelPair, prior=None, decoder="true_posterior", path_cap=DEFAULT_PATH_CAP):
    """Decoded message for every full output sequence, plus the joint it came from.

    Sequences of probability zero decode to 0.
    """
    if decoder not in DECODERS:
        raise DomainError(f"unknown decoder {decoder!r}; choose from {DECODERS}")
    joint = output_joint(encoder, channels, prior, path_cap)
    evidence = joint.sum(axis=0)
    table = np.zeros(joint.shape[1], dtype=np.int64)
    if decoder == "true_posterior":
        for yi in np.flatnonzero(evidence > 0):
            table[yi] = ml_decode(joint[:, yi] / evidence[yi])
        return table, joint
    policy = encoder if isinstance(encoder, MarkovPolicy) else general_to_markov(encoder)
    for yi in np.flatnonzero(evidence > 0):
        ys = _digits(yi, policy.horizon, channels.n_outputs)
        table[yi] = ml_decode(_recursive_message_belief(policy, channels, ys, prior))
    return table, joint


def _recursive_message_belief(policy, channels, ys, prior):
    atom = initial_belief_atom(policy.message_count, policy.initial_memory, policy.memory_size)
    if prior is not None:
        atom = type(atom)(MessageBelief(_prior(prior, policy.message_count)), atom.memory)
    for t, y in enumerate(ys, start=1):
        atom = update_atom(
            atom, policy.encoders[t - 1], y, channels.forward, channels.feedback, policy.memory_update.at(t)
        )
    return atom.message


def _digits(index, length, base):
    out = [0] * length
    for pos in range(length - 1, -1, -1):
        index, out[pos] = divmod(index, base)
    return out


def exact_error_probability(
    encoder, channels: ChannelPair, prior=None, decoder="true_posterior", path_cap=DEFAULT_PATH_CAP
) -> EvaluationResult:
    """Error probability over every ``(w, y_{1:n}, z_{1:n})`` path for the chosen decoder."""
    table, joint = decode_table(encoder, channels, prior, decoder, path_cap)
    correct = joint[table, np.arange(joint.shape[1])].sum()
    pe = min(1.0, max(0.0, float(joint.sum() - correct)))
    return EvaluationResult(pe, "exact", decoder)


def _mc_block(enc: GeneralEncoder, channels, decode, prior, block, size, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    M, Y, Z = enc.message_count, channels.n_outputs, channels.n_feedback
    w = rng.choice(M, size=size, p=prior)
    zi = np.zeros(size, dtype=np.int64)
    yi = np.zeros(size, dtype=np.int64)
    for t in range(enc.horizon):
        x = enc.tables[t][w, zi]
        y = sample_many(channels.forward, x, rng.random(size))
        z = sample_many(channels.feedback, y, rng.random(size))
        yi = yi * Y + y
        zi = zi * Z + z
    return int(np.count_nonzero(decode[yi] != w))


def monte_carlo_pe(
    encoder, channels: ChannelPair, trials: int, seed: int, prior=None, path_cap=DEFAULT_PATH_CAP, workers=1
) -> EvaluationResult:
    """Simulated error rate with ML decoding on the true posterior.

    Trials run in fixed blocks of ``MC_BLOCK``; block ``k`` draws from the
    stream ``SeedSequence(seed, spawn_key=(k,))``, so the estimate does not
    depend on ``workers``.
    """
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    enc = as_general(encoder)
    decode, _ = decode_table(enc, channels, prior, "true_posterior", path_cap)
    p = _prior(prior, enc.message_count)
    blocks = [(b, min(MC_BLOCK, trials - b * MC_BLOCK)) for b in range(math.ceil(trials / MC_BLOCK))]
    if workers and workers > 1 and len(blocks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = sum(
                pool.map(_mc_block, *zip(*[(enc, channels, decode, p, b, s, seed) for b, s in blocks]))
            )
    else:
        errors = sum(_mc_block(enc, channels, decode, p, b, s, seed) for b, s in blocks)
    phat = errors / trials
    return EvaluationResult(phat, "monte_carlo", "true_posterior", trials, math.sqrt(phat * (1 - phat) / trials))
