import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fastopl.core import (
    Catalog,
    ConfigurationError,
    ItemEmbeddings,
    LoggedBanditRecord,
    PolicyParams,
    policy_argmax_exact,
    policy_probabilities_exact,
    relevance_score,
    softmax,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_relevance_identity():
    assert relevance_score(np.eye(2), [1.0, 0.0], [[1.0, 0.0]], 0) == 1.0


def test_relevance_zero_map(rng):
    beta = rng.standard_normal((3, 4))
    assert relevance_score(np.zeros((4, 4)), rng.standard_normal(4), beta, 2) == 0.0


def test_relevance_hand_evaluated():
    theta = np.array([[1.0, 2.0], [3.0, 4.0]])
    # theta.T @ (1, 1) = (4, 6); (4, 6) . (1, -1) = -2
    assert relevance_score(theta, [1.0, 1.0], [[1.0, -1.0]], 0) == -2.0


def test_relevance_errors():
    with pytest.raises(ConfigurationError):
        relevance_score(np.eye(2), [1.0, 0.0, 0.0], [[1.0, 0.0]], 0)
    with pytest.raises(IndexError):
        relevance_score(np.eye(2), [1.0, 0.0], [[1.0, 0.0]], 1)
    with pytest.raises(ConfigurationError):
        relevance_score(np.eye(2), [1.0, 0.0], [[1.0, 0.0, 1.0]], 0)


def test_uniform_when_theta_zero(rng):
    beta = rng.standard_normal((7, 3))
    p = policy_probabilities_exact(np.zeros((3, 3)), rng.standard_normal(3), beta).probabilities
    np.testing.assert_allclose(p, np.full(7, 1 / 7), atol=1e-15)


def test_two_action_closed_form():
    beta = np.array([[0.0], [math.log(3.0)]])
    p = policy_probabilities_exact(np.eye(1), [1.0], beta).probabilities
    np.testing.assert_allclose(p, [0.25, 0.75], atol=1e-15)


def test_softmax_matches_extended_precision(rng):
    theta = rng.standard_normal((3, 3))
    x = rng.standard_normal(3)
    beta = rng.standard_normal((5, 3)) * 4
    p = policy_probabilities_exact(theta, x, beta).probabilities
    mpmath.mp.dps = 50
    scores = [mpmath.mpf(float(s)) for s in beta @ (theta.T @ x)]
    z = sum(mpmath.exp(s) for s in scores)
    ref = np.array([float(mpmath.exp(s) / z) for s in scores])
    np.testing.assert_allclose(p, ref, atol=1e-12, rtol=0)
    assert abs(p.sum() - 1) < 1e-9


def test_argmax_examples():
    beta = np.array([[1.0], [3.0], [2.0]])
    assert policy_argmax_exact(np.eye(1), [1.0], beta) == 1
    assert policy_argmax_exact(np.eye(1), [1.0], [[2.0], [2.0], [0.0]]) == 0


def test_argmax_matches_scan(rng):
    theta = rng.standard_normal((4, 4))
    x = rng.standard_normal(4)
    beta = rng.standard_normal((100, 4))
    best, best_s = 0, -np.inf
    for a in range(100):
        s = relevance_score(theta, x, beta, a)
        if s > best_s:
            best, best_s = a, s
    assert policy_argmax_exact(theta, x, beta) == best


@given(arrays(np.float64, st.integers(2, 40), elements=finite), finite)
def test_softmax_shift_invariance(scores, c):
    np.testing.assert_allclose(softmax(scores + c), softmax(scores), atol=1e-12)


@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-20, 20)), st.data())
def test_softmax_monotone_in_own_score(scores, data):
    a = data.draw(st.integers(0, len(scores) - 1))
    bumped = scores.copy()
    bumped[a] += data.draw(st.floats(0.01, 5))
    assert softmax(bumped)[a] > softmax(scores)[a]


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.integers(1, 6))
def test_argmax_consistent_with_probabilities(seed, p, l):
    r = np.random.default_rng(seed)
    theta, x, beta = r.standard_normal((l, l)), r.standard_normal(l), r.standard_normal((p, l))
    probs = policy_probabilities_exact(theta, x, beta).probabilities
    assert policy_argmax_exact(theta, x, beta) == int(np.argmax(probs))


def test_domain_type_invariants():
    with pytest.raises(ConfigurationError):
        Catalog(1)
    with pytest.raises(IndexError):
        Catalog(3).check(3)
    emb = ItemEmbeddings(np.ones((3, 2)))
    assert not emb.matrix.flags.writeable
    with pytest.raises(ConfigurationError):
        ItemEmbeddings(np.array([[np.nan, 0.0]]))
    with pytest.raises(ConfigurationError):
        PolicyParams(np.ones((2, 3)))
    assert PolicyParams.zeros(3).theta.shape == (3, 3)
    with pytest.raises(ConfigurationError):
        LoggedBanditRecord(np.zeros(2), 0, 0.0, 1.0)
