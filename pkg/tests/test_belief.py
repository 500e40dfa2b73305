import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfdp.belief import (
    GRID, BeliefAtom, MemoryBelief, MessageBelief, SenderBelief, canonicalize, grid_round, initial_belief_atom,
    initial_sender_belief, receiver_trajectory, sender_trajectory, update_atom, update_message_belief,
    update_sender_belief,
)
from nfdp.errors import DomainError, ImpossibleEvidenceError
from nfdp.evaluate import true_posterior
from nfdp.policy import EncoderMap, MarkovPolicy, MemoryUpdate

probs = st.lists(st.floats(0, 1), min_size=1, max_size=6).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: np.array(v) / sum(v)
)


@given(probs)
def test_grid_round_sums_to_grid(p):
    g = grid_round(p)
    assert g.sum() == GRID
    assert np.all(np.abs(g / GRID - p) < 1e-9 + 1e-12)


@given(probs)
def test_grid_round_idempotent(p):
    g = grid_round(p)
    assert np.array_equal(grid_round(g / GRID), g)


def test_initial_atom():
    a = initial_belief_atom(3, initial_memory=1, memory_size=2)
    assert np.allclose(a.message.probs, 1 / 3)
    assert a.memory.joint.shape == (3, 2, 2)
    assert np.all(a.memory.joint[:, 1, 1] == 1)
    with pytest.raises(DomainError):
        initial_sender_belief(1)


def test_message_belief_validation():
    with pytest.raises(DomainError):
        MessageBelief(np.array([0.5, 0.6]))


def test_message_update_matches_bayes(binary):
    g = MemoryUpdate.constant(2, 2)
    enc = EncoderMap(np.array([[0], [1]]), 2)
    pol = MarkovPolicy((enc, enc), g)
    a = receiver_trajectory(pol, binary, (1, 1))[-1]
    assert np.allclose(a.message.probs, [0.01 / 0.82, 0.81 / 0.82], atol=1e-15)
    assert np.allclose(a.message.probs, true_posterior(pol, binary, (1, 1)).probs, atol=1e-15)


def test_impossible_output_raises():
    from nfdp.channel import ChannelPair, make_identity

    ch = ChannelPair(make_identity(2), make_identity(2))
    atom = initial_belief_atom(2)
    enc = EncoderMap(np.array([[0], [0]]), 2)
    with pytest.raises(ImpossibleEvidenceError):
        update_message_belief(atom.message, atom.memory, enc, 1, ch.forward)


def test_ruled_out_rows_are_pinned():
    from nfdp.channel import ChannelPair, make_identity

    ch = ChannelPair(make_identity(2), make_identity(2))
    g = MemoryUpdate.last_feedback(2, 2)
    enc = EncoderMap(np.array([[0, 0], [1, 1]]), 2)
    atom = update_atom(initial_belief_atom(2, 0, 2), enc, 1, ch.forward, ch.feedback, g.at(1))
    assert np.array_equal(atom.message.probs, [0.0, 1.0])
    assert atom.memory.joint[0, 0, 0] == 1.0
    assert atom.memory.joint[1, 0, 1] == 1.0


def test_memory_rows_stay_normalized(binary):
    rng = np.random.default_rng(5)
    g = MemoryUpdate(rng.integers(3, size=(2, 3, 2, 2)))
    pol = MarkovPolicy(tuple(EncoderMap(rng.integers(2, size=(2, 3)), 2) for _ in range(2)), g)
    for a in receiver_trajectory(pol, binary, (0, 1)):
        assert np.allclose(a.memory.joint.sum(axis=(1, 2)), 1.0, atol=1e-12)


def test_sender_update_weights_normalized(binary):
    g = MemoryUpdate.last_feedback(2, 2)
    enc = EncoderMap(np.array([[0, 1], [1, 1]]), 2)
    b = initial_sender_belief(2, 0, 2)
    b1 = update_sender_belief(b, enc, 1, 0, 0, binary.forward, binary.feedback, g.at(1))
    assert len(b1) == 2
    assert abs(sum(b1.weights) - 1) < 1e-15
    # weight of y given z=1 after x=0: P(y=0|z=1) = 0.9*0.2 / (0.9*0.2 + 0.1*0.8)
    atoms = {round(a.message.probs[0], 12): wt for a, wt in b1}
    assert abs(max(atoms.values()) - 0.18 / 0.26) < 1e-12


def test_sender_merge_combines_equal_atoms():
    a = initial_belief_atom(2)
    b = SenderBelief.merge([(a, 0.25), (canonicalize(a), 0.5)])
    assert len(b) == 1 and b.weights[0] == 1.0
    with pytest.raises(ImpossibleEvidenceError):
        SenderBelief.merge([(a, 0.0)])
    with pytest.raises(DomainError):
        SenderBelief([a, a], [0.5, 0.5])


def test_canonicalize_preserves_key():
    p = np.array([1 / 3, 2 / 3])
    a = BeliefAtom(MessageBelief(p), MemoryBelief.point_mass(2, 1, 0))
    c = canonicalize(a)
    assert c.key == a.key and canonicalize(c).key == c.key


def test_noiseless_sender_belief_single_atom(noiseless):
    g = MemoryUpdate.last_feedback(2, 2)
    enc = EncoderMap(np.array([[0, 1], [1, 0]]), 2)
    pol = MarkovPolicy((enc, enc, enc), g)
    for b, a in zip(sender_trajectory(pol, noiseless, 1, (0, 1, 1)), receiver_trajectory(pol, noiseless, (0, 1, 1))):
        assert len(b) == 1
        assert b.atoms[0].distance(a) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_recursive_equals_true_posterior(seed):
    from nfdp.verify import random_instance

    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    pol, ch = inst.policy, inst.channels
    ys = tuple(int(v) for v in rng.integers(ch.n_outputs, size=pol.horizon))
    try:
        want = true_posterior(pol, ch, ys).probs
    except ImpossibleEvidenceError:
        return
    got = receiver_trajectory(pol, ch, ys)[-1].message.probs
    assert np.max(np.abs(got - want)) < 1e-9
