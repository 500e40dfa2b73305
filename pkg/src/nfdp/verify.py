"""Randomized property battery.

Each check draws small random instances from a seeded generator and compares
the recursive belief machinery, the DP and the exhaustive searches against
path enumeration. A failing check returns a ``Failure`` holding everything
needed to rebuild the instance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .belief import receiver_trajectory, sender_trajectory
from .channel import ChannelPair, make_identity, validate_kernel
from .dp_solver import solve
from .oracle import PathEnumeration, exhaustive_general, exhaustive_markov, measures_close
from .policy import EncoderMap, MarkovPolicy, MemoryUpdate, replay

BELIEF_TOL = 1e-9
COLLAPSE_TOL = 1e-12


@dataclass
class Instance:
    channels: ChannelPair
    policy: MarkovPolicy

    def to_literal(self):
        return {
            "forward": self.channels.forward.to_literal(),
            "feedback": self.channels.feedback.to_literal(),
            "policy": self.policy.to_literal(),
        }


@dataclass
class Failure:
    check: str
    seed: int
    index: int
    detail: str
    instance: dict = field(default_factory=dict)

    def to_dict(self):
        return {"check": self.check, "seed": self.seed, "index": self.index, "detail": self.detail,
                "instance": self.instance}


def random_kernel(rng, n_in, n_out, sparsity=0.25):
    """Dirichlet rows, some entries zeroed (each row keeps at least one)."""
    rows = rng.dirichlet(np.ones(n_out), size=n_in)
    mask = rng.random(rows.shape) < sparsity
    for i in range(n_in):
        if mask[i].all():
            mask[i, rng.integers(n_out)] = False
    rows = np.where(mask, 0.0, rows)
    return validate_kernel(rows / rows.sum(axis=1, keepdims=True))


def random_instance(rng, max_size=3, max_horizon=3, noiseless=False) -> Instance:
    M = int(rng.integers(2, max_size + 1))
    X, Y = (int(v) for v in rng.integers(1, max_size + 1, size=2))
    Z = Y if noiseless else int(rng.integers(1, max_size + 1))
    U = int(rng.integers(1, max_size + 1))
    n = int(rng.integers(1, max_horizon + 1))
    forward = random_kernel(rng, X, Y)
    feedback = make_identity(Y) if noiseless else random_kernel(rng, Y, Z)
    g = MemoryUpdate(rng.integers(U, size=(n, U, Z, M)))
    encoders = tuple(EncoderMap(rng.integers(X, size=(M, U)), X) for _ in range(n))
    policy = MarkovPolicy(encoders, g, int(rng.integers(U)))
    return Instance(ChannelPair(forward, feedback), policy)


def _histories(base, length):
    return itertools.product(range(base), repeat=length)


def check_belief_recursion(inst: Instance, tol=BELIEF_TOL):
    """Chained receiver and sender updates against path-enumeration conditionals.

    Returns a description of the first mismatch, or ``None``.
    """
    pol, ch = inst.policy, inst.channels
    M, Y, Z = pol.message_count, ch.n_outputs, ch.n_feedback
    for t in range(pol.horizon + 1):
        oracle = PathEnumeration(pol, ch, t)
        evidence = oracle.joint.sum(axis=(0, 2))
        for yi, ys in enumerate(_histories(Y, t)):
            if evidence[yi] <= 0:
                continue
            got = receiver_trajectory(pol, ch, ys)[-1]
            want = oracle.receiver_atom(ys)
            err = got.distance(want)
            if err > tol:
                return f"receiver pair after y={ys}: distance {err:.3g}"
        for w in range(M):
            mass = oracle.joint[w].sum(axis=0)
            for zi, zs in enumerate(_histories(Z, t)):
                if mass[zi] <= 0:
                    continue
                got = sender_trajectory(pol, ch, w, zs)[-1]
                want = oracle.atom_distribution(zs, w)
                if not measures_close(got, want, tol):
                    return f"sender belief for w={w}, z={zs}: {len(got)} vs {len(want)} atoms, measures differ"
    return None


def check_noiseless_collapse(inst: Instance, tol=COLLAPSE_TOL):
    """With identity feedback the sender belief is one atom equal to the receiver's pair."""
    pol, ch = inst.policy, inst.channels
    Z = ch.n_feedback
    for w in range(pol.message_count):
        for zs in _histories(Z, pol.horizon):
            _, xs = replay(pol, w, zs)
            prob = np.prod([ch.forward.rows[xs[s], zs[s]] for s in range(pol.horizon)])
            if prob <= 0:
                continue
            beliefs = sender_trajectory(pol, ch, w, zs)
            atoms = receiver_trajectory(pol, ch, zs)
            for t, (b, a) in enumerate(zip(beliefs, atoms)):
                if len(b) != 1:
                    return f"w={w}, z={zs[:t]}: {len(b)} atoms"
                err = b.atoms[0].distance(a)
                if err > tol:
                    return f"w={w}, z={zs[:t]}: atom differs from receiver pair by {err:.3g}"
    return None


def check_dp_against_oracles(inst: Instance, tol=BELIEF_TOL):
    """DP value vs exhaustive Markov and general searches for the instance's channel and memory rule.

    The DP value never exceeds the Markov optimum; it matches it whenever the
    extracted maps are consistent; the Markov optimum is never below the
    general optimum.
    """
    pol, ch = inst.policy, inst.channels
    args = (ch, pol.horizon, pol.message_count)
    report = solve(*args, pol.memory_size, pol.memory_update, pol.initial_memory, evaluate_policy=False)
    markov, _ = exhaustive_markov(*args, pol.memory_size, pol.memory_update, pol.initial_memory)
    general, _ = exhaustive_general(*args)
    if report.dp_value > markov + tol:
        return f"DP value {report.dp_value!r} above Markov optimum {markov!r}"
    if report.consistent and abs(report.dp_value - markov) > tol:
        return f"consistent DP value {report.dp_value!r} differs from Markov optimum {markov!r}"
    if markov < general - 1e-12:
        return f"Markov optimum {markov!r} below general optimum {general!r}"
    return None


CHECKS = {
    "belief_recursion": (check_belief_recursion, dict(max_size=3, max_horizon=3)),
    "noiseless_collapse": (check_noiseless_collapse, dict(max_size=3, max_horizon=3, noiseless=True)),
    "dp_vs_oracle": (check_dp_against_oracles, dict(max_size=2, max_horizon=2)),
}


def run_battery(seed: int, counts=None):
    """Run every check on ``counts[name]`` random instances; returns ``(tallies, failures)``."""
    counts = counts or {"belief_recursion": 100, "noiseless_collapse": 50, "dp_vs_oracle": 20}
    tallies, failures = {}, []
    for k, (name, (check, shape)) in enumerate(CHECKS.items()):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        tallies[name] = 0
        for i in range(counts.get(name, 0)):
            inst = random_instance(rng, **shape)
            detail = check(inst)
            tallies[name] += 1
            if detail is not None:
                failures.append(Failure(name, seed, i, detail, inst.to_literal()))
    return tallies, failures
