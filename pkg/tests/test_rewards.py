import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastopl.core import ConfigurationError, LoggedBanditRecord
from fastopl.rewards import (
    CustomReward,
    DRReward,
    IndicatorReward,
    IPSReward,
    dr_clipped_reward,
    indicator_reward,
    ips_clipped_reward,
)

records = st.builds(
    LoggedBanditRecord,
    context=st.just(np.zeros(2)),
    action=st.integers(0, 9),
    propensity=st.floats(1e-4, 1.0),
    reward=st.floats(-10, 10),
)


def rec(action=3, propensity=0.5, reward=1.0):
    return LoggedBanditRecord(np.zeros(2), action, propensity, reward)


def test_indicator_examples():
    assert indicator_reward(3, {1, 3, 7}) == 1.0
    assert indicator_reward(2, set()) == 0.0


def test_indicator_vectorised_matches_membership(rng):
    labels = rng.choice(10, size=4, replace=False)
    r = IndicatorReward(labels)
    np.testing.assert_array_equal(r(np.arange(10)), [float(a in set(labels.tolist())) for a in range(10)])
    assert IndicatorReward([])(np.arange(3)).tolist() == [0.0, 0.0, 0.0]


def test_ips_examples():
    assert ips_clipped_reward(1, rec(), 0.0) == 0.0
    assert ips_clipped_reward(3, rec(), 0.0) == 2.0
    assert ips_clipped_reward(3, rec(propensity=0.1), 0.25) == 4.0


def test_dr_examples():
    model = lambda a, x: 0.4
    assert dr_clipped_reward(1, rec(), 0.0, model) == 0.4
    assert dr_clipped_reward(3, rec(), 0.0, lambda a, x: 1.0) == 1.0
    assert dr_clipped_reward(3, rec(), 0.0, model) == pytest.approx(1.6, abs=1e-15)


def test_tau_range():
    with pytest.raises(ConfigurationError):
        ips_clipped_reward(0, rec(), 1.5)
    with pytest.raises(ConfigurationError):
        DRReward(rec(), tau=-0.1)


@given(records, st.integers(0, 9))
def test_ips_tau_one_bounded(record, a):
    assert abs(ips_clipped_reward(a, record, 1.0)) <= abs(record.reward)


@given(records, st.integers(0, 9), st.floats(0, 1))
def test_dr_with_zero_model_reduces_to_ips(record, a, tau):
    assert dr_clipped_reward(a, record, tau) == ips_clipped_reward(a, record, tau)
    assert np.isfinite(dr_clipped_reward(a, record, tau, lambda b, x: 0.3))


@given(records, st.floats(0, 1))
def test_vectorised_estimators_agree(record, tau):
    acts = np.arange(10)
    np.testing.assert_allclose(IPSReward(record, tau)(acts), [ips_clipped_reward(a, record, tau) for a in acts])
    m = lambda a, x: 0.1 * a
    np.testing.assert_allclose(DRReward(record, tau, m)(acts), [dr_clipped_reward(a, record, tau, m) for a in acts])


def test_custom_reward():
    r = CustomReward(lambda a, x: a * 2.0, context=None)
    assert r(np.array([1, 4])).tolist() == [2.0, 8.0]
