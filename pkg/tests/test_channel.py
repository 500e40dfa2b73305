import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfdp.channel import (
    Alphabet, ChannelPair, kernel_row, make_bsc, make_identity, parse_kernel, sample, sample_many,
    validate_kernel,
)
from nfdp.errors import DomainError, ValidationError


def test_bsc_rows():
    k = make_bsc(0.1)
    assert np.allclose(k.rows, [[0.9, 0.1], [0.1, 0.9]])
    assert not k.is_identity()
    assert make_bsc(0.0).is_identity()


def test_bsc_rejects_bad_crossover():
    with pytest.raises(DomainError):
        make_bsc(1.5)


def test_validate_names_bad_row():
    with pytest.raises(ValidationError, match="row 1"):
        validate_kernel([[0.5, 0.5], [0.7, 0.7]])


def test_validate_rejects_negative_and_ragged():
    with pytest.raises(ValidationError):
        validate_kernel([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(ValidationError):
        validate_kernel([[1.0], [0.5, 0.5]])


def test_validate_renormalizes_small_drift():
    k = validate_kernel([[0.5, 0.5 + 1e-11], [1.0, 0.0]])
    assert np.allclose(k.rows.sum(axis=1), 1.0, atol=0, rtol=1e-15)


def test_kernel_is_read_only():
    k = make_bsc(0.2)
    with pytest.raises(ValueError):
        k.rows[0, 0] = 1.0
    row = kernel_row(k, 0)
    row[0] = 5.0
    assert k.rows[0, 0] == 0.8


def test_parse_shorthands_and_literal_roundtrip():
    assert parse_kernel({"bsc": 0.25}) == make_bsc(0.25)
    assert parse_kernel({"identity": 3}) == make_identity(3)
    k = parse_kernel([[0.2, 0.8], [1.0, 0.0]])
    assert parse_kernel(k.to_literal()) == k
    with pytest.raises(ValidationError):
        parse_kernel({"erasure": 0.1})


def test_alphabet_check():
    a = Alphabet(3)
    assert 2 in a and 3 not in a
    with pytest.raises(DomainError):
        a.check(3)


def test_channel_pair_dimensions():
    ch = ChannelPair(validate_kernel([[0.5, 0.25, 0.25]]), make_bsc(0.1).__class__([[1, 0], [0, 1], [0.5, 0.5]]))
    assert (ch.n_inputs, ch.n_outputs, ch.n_feedback) == (1, 3, 2)
    assert np.allclose(ch.feedback_given_input(), [[0.625, 0.375]])
    with pytest.raises(DomainError):
        ChannelPair(make_bsc(0.1), make_identity(3))


def test_sample_many_frequencies():
    k = validate_kernel([[0.2, 0.5, 0.3]])
    rng = np.random.default_rng(3)
    out = sample_many(k, np.zeros(200_000, dtype=int), rng.random(200_000))
    freq = np.bincount(out, minlength=3) / out.size
    assert np.allclose(freq, [0.2, 0.5, 0.3], atol=0.005)


def test_sample_never_picks_zero_mass_symbol():
    k = validate_kernel([[0.0, 1.0, 0.0]])
    rng = np.random.default_rng(0)
    assert {sample(k, 0, rng) for _ in range(200)} == {1}
    assert set(sample_many(k, np.zeros(50, dtype=int), np.linspace(0, 0.999999, 50)).tolist()) == {1}


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_validated_rows_are_distributions(n_in, n_out, seed):
    rows = np.random.default_rng(seed).dirichlet(np.ones(n_out), size=n_in)
    k = validate_kernel(rows)
    assert k.shape == (n_in, n_out)
    assert np.all(k.rows >= 0)
    assert np.allclose(k.rows.sum(axis=1), 1.0, atol=1e-12)
