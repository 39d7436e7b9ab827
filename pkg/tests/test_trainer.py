import numpy as np
import pytest

import fastopl.grad
import fastopl.trainer
from fastopl.data import EmbeddedDataset, prepare
from fastopl.grad import snis_covariance_gradient
from fastopl.mips import IndexConfig, build_index
from fastopl.proposal import build_proposal
from fastopl.rewards import IndicatorReward
from fastopl.synth import latent_factor_interactions, timing_task
from fastopl.trainer import TrainConfig, TrainingError, batch_gradient, evaluate, train


@pytest.fixture(scope="module")
def small_task():
    ds = latent_factor_interactions(200, 50, dim=4, min_items=4, max_items=10, seed=0)
    return prepare(ds, 8, seed=0)


def brute_force_rtest(theta, beta, test):
    hits = 0
    for x, y in zip(test.contexts, test.labels):
        scores = beta @ (theta.T @ x)
        best = int(np.argsort(-scores, kind="stable")[0])
        hits += best in set(y.tolist())
    return hits / len(test)


def test_zero_epochs_is_a_no_op(small_task):
    theta0 = np.full((8, 8), 0.5)
    theta, rep = train(TrainConfig(method="exact", epochs=0), small_task.train, small_task.beta, theta0=theta0)
    np.testing.assert_array_equal(theta, theta0)
    assert rep.records == [] and rep.steps == 0


def test_exact_training_beats_random_policy(small_task):
    cfg = TrainConfig(method="exact", lr=1e-2, epochs=50, batch_size=32)
    theta, rep = train(cfg, small_task.train, small_task.beta, test=small_task.test)
    assert len(rep.records) == 50
    assert rep.final_reward > 1 / 50
    assert rep.records[-1].reward_train > rep.records[0].reward_train
    times = [r.wall_seconds for r in rep.records]
    assert all(b >= a for a, b in zip(times, times[1:]))


def test_uniform_proposal_first_step_matches_standalone_call(small_task):
    cfg = TrainConfig(method="snis", epsilon=1.0, samples=200, batch_size=4, seed=3)
    theta = np.zeros((8, 8))
    ctx = small_task.train.contexts[:4]
    labels = small_task.train.labels[:4]
    grad, ests = batch_gradient(cfg, theta, ctx, labels, small_task.beta, None, np.random.default_rng(11))
    rng = np.random.default_rng(11)
    q = build_proposal((np.zeros(0, dtype=np.int64), np.zeros(0)), 1.0, small_task.beta.n_items)
    manual = [snis_covariance_gradient(theta, x, small_task.beta, IndicatorReward(y), q, 200, rng).grad
              for x, y in zip(ctx, labels)]
    np.testing.assert_array_equal(grad, sum(manual[1:], manual[0].copy()) / 4)


@pytest.mark.parametrize("method", ["exact", "reinforce", "snis"])
def test_reproducible_runs(small_task, method):
    index = build_index(small_task.beta, IndexConfig(seed=0))
    cfg = TrainConfig(method=method, epsilon=0.5, topk=8, samples=50, lr=1e-2, epochs=3, seed=5)
    t1, r1 = train(cfg, small_task.train, small_task.beta, index, small_task.test)
    t2, r2 = train(cfg, small_task.train, small_task.beta, index, small_task.test)
    assert np.array_equal(t1, t2)
    np.testing.assert_array_equal([(r.reward_train, r.reward_test, r.ess_mean) for r in r1.records],
                                  [(r.reward_train, r.reward_test, r.ess_mean) for r in r2.records])


def test_snis_path_never_touches_full_catalog(monkeypatch):
    beta, data = timing_task(5000, 6, 40, seed=1)
    index = build_index(beta, IndexConfig(seed=1))
    calls = []

    class Probe(IndicatorReward):
        def __call__(self, actions):
            calls.append(len(actions))
            return super().__call__(actions)

    def forbidden(*args, **kwargs):
        raise AssertionError("full-catalog computation in the snis path")

    monkeypatch.setattr(fastopl.trainer, "IndicatorReward", Probe)
    monkeypatch.setattr(fastopl.grad, "softmax", forbidden)
    monkeypatch.setattr(fastopl.grad, "_enumerate", forbidden)
    monkeypatch.setattr(fastopl.grad, "gumbel_max_sample", forbidden)
    monkeypatch.setattr(fastopl.grad, "_SAMPLERS", {})
    cfg = TrainConfig(method="snis", epsilon=0.8, topk=32, samples=100, batch_size=8, epochs=2)
    train(cfg, data, beta, index)
    assert calls and max(calls) == 100 and len(calls) == 80


def test_evaluate_zero_theta_matches_brute_force(small_task):
    index = build_index(small_task.beta, IndexConfig(variant="exact"))
    theta = np.zeros((8, 8))
    assert evaluate(theta, small_task.beta, index, small_task.test) == \
        brute_force_rtest(theta, small_task.beta.matrix, small_task.test)


def test_evaluate_random_theta_matches_brute_force(small_task, rng):
    index = build_index(small_task.beta, IndexConfig(variant="exact"))
    theta = rng.standard_normal((8, 8))
    assert evaluate(theta, small_task.beta, index, small_task.test) == \
        brute_force_rtest(theta, small_task.beta.matrix, small_task.test)


def test_evaluate_perfect_retrieval():
    dim = 5
    contexts = np.eye(dim) * 2.0
    beta = np.vstack([np.eye(dim) * 2.0, np.eye(dim) * 0.5])
    labels = [np.array([j, dim + j]) for j in range(dim)]
    test = EmbeddedDataset(contexts, labels)
    for variant in ("exact", "graph"):
        index = build_index(beta, IndexConfig(variant=variant))
        assert evaluate(np.eye(dim), beta, index, test) == 1.0


def test_exact_and_graph_evaluation_agree():
    r = np.random.default_rng(0)
    beta = r.standard_normal((1000, 16))
    contexts = r.standard_normal((300, 16))
    theta = r.standard_normal((16, 16))
    exact = build_index(beta, IndexConfig(variant="exact"))
    graph = build_index(beta, IndexConfig(seed=0))
    h = contexts @ theta
    a = exact.top_k_batch(h, 1)[0][:, 0]
    b = graph.top_k_batch(h, 1)[0][:, 0]
    assert np.mean(a == b) >= 0.95


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_failure_aborts_with_context(small_task):
    theta0 = np.full((8, 8), 1e305)
    cfg = TrainConfig(method="snis", epsilon=1.0, samples=10, epochs=1)
    with pytest.raises(TrainingError, match="step 0"):
        train(cfg, small_task.train, small_task.beta.matrix * 1e10, theta0=theta0)


def test_budget_mode_checkpoints(small_task):
    cfg = TrainConfig(method="snis", epsilon=1.0, samples=50, epochs=1, budget_seconds=0.5)
    _, rep = train(cfg, small_task.train, small_task.beta, test=small_task.test)
    assert len(rep.records) == 20
    times = [r.wall_seconds for r in rep.records]
    assert all(b >= a for a, b in zip(times, times[1:]))
    assert times[-1] >= 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(method="ppo")
    with pytest.raises(ValueError):
        TrainConfig(method="snis", samples=1)
    with pytest.raises(ValueError):
        TrainConfig(method="snis", epsilon=0.0)
