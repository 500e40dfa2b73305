import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfdp.errors import CapacityError, DomainError
from nfdp.evaluate import exact_error_probability
from nfdp.policy import (
    EncoderMap, EncoderMapSpace, GeneralEncoder, MarkovPolicy, MemoryUpdate, general_to_markov,
    history_from_index, history_index, markov_to_general, replay,
)


def test_space_is_lexicographic():
    space = EncoderMapSpace(2, 1, 2)
    assert len(space) == 4
    assert [e.table[:, 0].tolist() for e in space] == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_space_cap():
    with pytest.raises(CapacityError):
        EncoderMapSpace(3, 3, 3, cap=1000)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 3), st.data())
def test_space_index_roundtrip(M, U, X, data):
    space = EncoderMapSpace(M, U, X)
    i = data.draw(st.integers(0, len(space) - 1))
    assert space.index_of(space[i]) == i


def test_last_feedback_update():
    g = MemoryUpdate.last_feedback(2, 3)
    assert g(1, 0, 1, 2) == 1 and g(5, 1, 0, 0) == 0
    assert g.to_literal() == "last_feedback"


def test_memory_update_rejects_out_of_range():
    with pytest.raises(DomainError):
        MemoryUpdate(np.full((2, 2, 2), 2))


def test_replay_tracks_memory_and_inputs():
    g = MemoryUpdate.last_feedback(2, 2)
    enc = EncoderMap(np.array([[0, 1], [1, 0]]), 2)
    pol = MarkovPolicy((enc, enc, enc), g)
    us, xs = replay(pol, 0, (1, 0))
    assert us == [0, 1, 0]
    assert xs == [0, 1, 0]


def test_policy_dimension_mismatch():
    enc = EncoderMap(np.zeros((2, 2), dtype=int), 2)
    with pytest.raises(DomainError):
        MarkovPolicy((enc,), MemoryUpdate.constant(2, 2))


@given(st.lists(st.integers(0, 2), max_size=5))
def test_history_index_roundtrip(zs):
    assert tuple(history_from_index(history_index(zs, 3), len(zs), 3)) == tuple(zs)


def test_markov_general_conversion_preserves_error(binary):
    g = MemoryUpdate.last_feedback(2, 2)
    rng = np.random.default_rng(1)
    pol = MarkovPolicy(tuple(EncoderMap(rng.integers(2, size=(2, 2)), 2) for _ in range(3)), g)
    gen = markov_to_general(pol)
    assert isinstance(gen, GeneralEncoder)
    back = general_to_markov(gen)
    pe = [exact_error_probability(p, binary).error_probability for p in (pol, gen, back)]
    assert max(pe) - min(pe) < 1e-15


def test_general_encoder_flat_roundtrip():
    rng = np.random.default_rng(0)
    tables = tuple(rng.integers(3, size=(2, 2**t)) for t in range(3))
    enc = GeneralEncoder(tables, 3, 2)
    assert GeneralEncoder.from_flat(enc.flat(), 2, 3, 2, 3) == enc
    assert enc.input(1, (1, 0)) == tables[2][1, 2]
