import numpy as np
import pytest

from nfdp.channel import ChannelPair, make_bsc, make_identity
from nfdp.errors import CapacityError, DomainError
from nfdp.evaluate import (
    EvaluationResult, exact_error_probability, ml_decode, monte_carlo_pe, output_joint, true_posterior,
)
from nfdp.oracle import PathEnumeration
from nfdp.policy import EncoderMap, MarkovPolicy, MemoryUpdate
from nfdp.schemes import repetition_scheme


def test_repetition_fixture(binary):
    # frozen from exact enumeration; by hand: (0.01 + 0.19) / 2 with ties decoded to message 0
    pe = exact_error_probability(repetition_scheme(2, 2, 2), binary).error_probability
    assert abs(pe - 0.1) < 1e-12


def test_repetition_three_uses_majority(binary):
    pe = exact_error_probability(repetition_scheme(2, 3, 2), binary).error_probability
    assert abs(pe - (3 * 0.01 * 0.9 + 0.001)) < 1e-12


def test_ml_ties_to_lowest():
    assert ml_decode(np.array([0.25, 0.5, 0.25, 0.5])) == 1


def test_output_joint_sums_to_one(binary):
    j = output_joint(repetition_scheme(2, 3, 2), binary)
    assert j.shape == (2, 8)
    assert abs(j.sum() - 1) < 1e-14


def test_true_posterior_matches_path_enumeration(binary):
    rng = np.random.default_rng(2)
    g = MemoryUpdate.last_feedback(2, 3)
    pol = MarkovPolicy(tuple(EncoderMap(rng.integers(2, size=(3, 2)), 2) for _ in range(3)), g)
    oracle = PathEnumeration(pol, binary, 3)
    for ys in [(0, 0, 0), (1, 0, 1), (1, 1, 0)]:
        assert np.allclose(true_posterior(pol, binary, ys).probs, oracle.message_posterior(ys), atol=1e-14)


def test_path_cap(binary):
    with pytest.raises(CapacityError):
        exact_error_probability(repetition_scheme(2, 3, 2), binary, path_cap=10)


def test_unknown_decoder(binary):
    with pytest.raises(DomainError):
        exact_error_probability(repetition_scheme(2, 1, 2), binary, decoder="map")


def test_result_validation():
    with pytest.raises(DomainError):
        EvaluationResult(0.1, "monte_carlo")
    with pytest.raises(DomainError):
        EvaluationResult(1.5, "exact")


def test_decoders_agree_under_noiseless_feedback(noiseless):
    rng = np.random.default_rng(7)
    g = MemoryUpdate.last_feedback(2, 2)
    pol = MarkovPolicy(tuple(EncoderMap(rng.integers(2, size=(2, 2)), 2) for _ in range(3)), g)
    a = exact_error_probability(pol, noiseless).error_probability
    b = exact_error_probability(pol, noiseless, decoder="recursive_belief").error_probability
    assert abs(a - b) < 1e-12


def test_monte_carlo_reproducible_and_worker_invariant(binary):
    enc = repetition_scheme(2, 3, 2)
    a = monte_carlo_pe(enc, binary, 70_000, seed=11)
    b = monte_carlo_pe(enc, binary, 70_000, seed=11)
    c = monte_carlo_pe(enc, binary, 70_000, seed=11, workers=2)
    assert a == b == c
    assert a.error_probability != monte_carlo_pe(enc, binary, 70_000, seed=12).error_probability


def test_monte_carlo_noiseless_channel_is_exact():
    ch = ChannelPair(make_bsc(0.0), make_identity(2))
    assert monte_carlo_pe(repetition_scheme(2, 2, 2), ch, 5000, seed=0).error_probability == 0.0
