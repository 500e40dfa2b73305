import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfdp.channel import ChannelPair, make_bsc, make_identity, validate_kernel
from nfdp.errors import ConvergenceError, DomainError, PreconditionError
from nfdp.evaluate import exact_error_probability
from nfdp.oracle import exhaustive_markov
from nfdp.schemes import (
    InputDistribution, binary_entropy, blahut_arimoto, midpoint_coordinate, pms_noiseless, pms_noisy_conjecture,
    repetition_scheme,
)

UNIFORM2 = InputDistribution.uniform(2)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_blahut_arimoto_bsc(eps):
    fx, cap = blahut_arimoto(make_bsc(eps))
    assert np.allclose(fx.probs, 0.5, atol=1e-6)
    assert abs(cap - (1 - binary_entropy(eps))) < 1e-6


def test_blahut_arimoto_degenerate():
    assert abs(blahut_arimoto(make_identity(2))[1] - 1) < 1e-9
    assert blahut_arimoto(make_bsc(0.5))[1] < 1e-9


def test_blahut_arimoto_asymmetric():
    # Z channel with crossover 0.5: capacity log2(5/4)
    fx, cap = blahut_arimoto(validate_kernel([[1.0, 0.0], [0.5, 0.5]]))
    assert abs(cap - math.log2(1.25)) < 1e-8
    assert abs(fx.probs[1] - 0.4) < 1e-6


def test_blahut_arimoto_errors():
    with pytest.raises(DomainError):
        blahut_arimoto(make_bsc(0.1), tolerance=0)
    with pytest.raises(ConvergenceError) as info:
        blahut_arimoto(validate_kernel([[0.9, 0.1, 0.0], [0.2, 0.3, 0.5]]), tolerance=1e-15, max_iterations=2)
    assert info.value.last_iterate is not None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=5).filter(lambda v: sum(v) > 1e-3), st.floats(0, 1))
def test_inverse_cdf_brackets_coordinate(weights, c):
    fx = InputDistribution(np.array(weights) / sum(weights))
    c = min(c, np.nextafter(1.0, 0))
    x = fx.inverse_cdf(c)
    lower = fx.cumulative[x - 1] if x > 0 else 0.0
    assert lower <= c
    assert c < fx.cumulative[x] or x == fx.probs.size - 1


def test_midpoint_convention():
    p = np.array([0.5, 0.5])
    assert midpoint_coordinate(p, 0) == 0.25 and midpoint_coordinate(p, 1) == 0.75
    pms = pms_noiseless(UNIFORM2, 1, 2)
    assert pms.stage_map(p).table[:, 0].tolist() == [0, 1]


def test_repetition_rejects_small_alphabet():
    with pytest.raises(DomainError):
        repetition_scheme(3, 2, 2)
    ch = ChannelPair(make_bsc(0.0), make_identity(2))
    assert exact_error_probability(repetition_scheme(2, 4, 2), ch).error_probability == 0.0


def test_pms_noiseless_precondition(binary):
    with pytest.raises(PreconditionError):
        pms_noiseless(UNIFORM2, 2, 2).monte_carlo(binary, 100, 0)


def test_pms_single_step_equals_injective_baseline(noiseless):
    a = pms_noiseless(UNIFORM2, 1, 2).exact_error_probability(noiseless).error_probability
    b = exact_error_probability(repetition_scheme(2, 1, 2), noiseless).error_probability
    assert abs(a - b) < 1e-15


def test_pms_keeps_symbol_once_message_is_known():
    ch = ChannelPair(make_identity(2), make_identity(2))
    for w in range(2):
        trace = pms_noiseless(UNIFORM2, 4, 2).trace(w, ch, seed=3)
        # the first output reveals w; from then on the coordinate sits at 0.5
        assert len({s.x for s in trace.steps[1:]}) == 1
        assert trace.steps[1].coordinate == 0.5
        assert trace.decoded == w
        assert trace.steps[-1].xi == 1.0


def test_pms_three_messages_uses_feedback(noiseless):
    pms = pms_noiseless(UNIFORM2, 4, 3)
    enc = pms.encoder(noiseless)
    assert len({int(v) for v in enc.tables[1].ravel()}) > 1 or len({int(v) for v in enc.tables[2].ravel()}) > 1
    mc = pms.monte_carlo(noiseless, 100_000, seed=0)
    exact = pms.exact_error_probability(noiseless).error_probability
    assert abs(mc.error_probability - exact) <= 4 * mc.standard_error


@pytest.mark.parametrize("M,n", [(2, 3), (3, 4)])
def test_noisy_reduces_to_noiseless(noiseless, M, n):
    a, b = pms_noiseless(UNIFORM2, n, M), pms_noisy_conjecture(UNIFORM2, n, M)
    for w in range(M):
        for seed in range(5):
            ta, tb = a.trace(w, noiseless, seed), b.trace(w, noiseless, seed)
            assert ta == tb
            assert all(s.atoms == 1 for s in tb.steps)
    assert a.monte_carlo(noiseless, 5000, 9) == b.monte_carlo(noiseless, 5000, 9)


def test_noisy_single_step_matches_noiseless(binary, noiseless):
    a = pms_noiseless(UNIFORM2, 1, 3).trace(2, noiseless, 1)
    b = pms_noisy_conjecture(UNIFORM2, 1, 3).trace(2, binary, 1)
    assert (a.steps[0].x, a.steps[0].y) == (b.steps[0].x, b.steps[0].y)


def test_noisy_belief_grows_with_noisy_feedback(binary):
    trace = pms_noisy_conjecture(UNIFORM2, 3, 3).trace(0, binary, 4)
    assert len(trace.steps) == 3
    assert trace.steps[-1].atoms > 1


def test_uninformative_feedback_against_feedback_free_optimum():
    ch = ChannelPair(make_bsc(0.1), make_bsc(0.5))
    mc = pms_noisy_conjecture(UNIFORM2, 3, 2).monte_carlo(ch, 100_000, seed=5)
    best, _ = exhaustive_markov(ch, 3, 2)
    assert abs(mc.error_probability - best) <= 4 * mc.standard_error


def test_simulation_is_seeded(binary):
    s = pms_noisy_conjecture(UNIFORM2, 3, 3)
    assert s.monte_carlo(binary, 3000, 1) == pms_noisy_conjecture(UNIFORM2, 3, 3).monte_carlo(binary, 3000, 1)
