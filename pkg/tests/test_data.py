import json

import numpy as np
import pytest
import scipy.sparse as sp

from fastopl.core import ConfigurationError
from fastopl.data import (
    compute_item_embeddings,
    ingest_interactions,
    interaction_matrix,
    load_prepared,
    mean_embedding_contexts,
    prepare,
    randomized_svd,
    read_id_map,
    save_prepared,
    session_split,
    train_test_split,
    SessionSplit,
)
from fastopl.matio import load_matrix, save_matrix
from fastopl.synth import latent_factor_interactions, write_tsv


def test_ingest_dedupes_and_densifies():
    ds = ingest_interactions(["user\titem\n", "u1\t10\n", "u1\t20\n", "u2\t10\n", "u1\t10\n", "u2\t20\n"])
    assert (ds.n_users, ds.n_items) == (2, 2)
    assert len(ds.pairs()) == 4 and ds.n_duplicates == 1


def test_ingest_three_rows_with_duplicate():
    ds = ingest_interactions(["1\t5\n", "1\t6\n", "1\t5\n"], min_interactions=1)
    assert ds.n_users == 1 and ds.n_items == 2 and len(ds.pairs()) == 2


def test_ingest_drops_small_users():
    ds = ingest_interactions(["1\t5\n", "1\t6\n", "2\t7\n"])
    assert ds.n_users == 1 and ds.n_dropped_users == 1
    assert ds.item_ids == ["5", "6"]


def test_ingest_header_detection():
    ds = ingest_interactions(["user\titem\n", "1\t5\n", "1\t6\n"])
    assert ds.n_users == 1 and ds.n_items == 2


def test_ingest_errors():
    with pytest.raises(ValueError, match="line 3"):
        ingest_interactions(["1\t5\n", "1\t6\n", "broken line\n"])
    with pytest.raises(ValueError):
        ingest_interactions([])
    with pytest.raises(ValueError):
        ingest_interactions(["user\titem\n"])


def test_id_maps_round_trip(tmp_path):
    r = np.random.default_rng(0)
    raw_users = r.integers(0, 500, 10_000)
    raw_items = r.integers(1000, 5000, 10_000) * 7
    path = tmp_path / "log.tsv"
    path.write_text("".join(f"{u}\t{i}\n" for u, i in zip(raw_users, raw_items)))
    ds = ingest_interactions(path)
    truth = {}
    for u, i in zip(raw_users, raw_items):
        truth.setdefault(str(u), set()).add(str(i))
    truth = {u: s for u, s in truth.items() if len(s) >= 2}
    back = {ds.user_ids[u]: {ds.item_ids[i] for i in items} for u, items in enumerate(ds.user_items)}
    assert back == truth

    data = prepare(ds, 4, seed=1)
    save_prepared(data, tmp_path / "prep", ds)
    assert read_id_map(tmp_path / "prep" / "items.txt") == ds.item_ids
    assert read_id_map(tmp_path / "prep" / "users.txt") == ds.user_ids


def test_session_split_sizes_and_determinism():
    ds = ingest_interactions([f"1\t{i}\n" for i in range(5)] + ["2\t0\n", "2\t1\n"])
    s = session_split(ds, 3)
    assert len(s.observed[0]) == 3 and len(s.held_out[0]) == 2
    assert len(s.observed[1]) == 1 and len(s.held_out[1]) == 1
    for x, y, items in zip(s.observed, s.held_out, ds.user_items):
        assert not set(x) & set(y)
        assert sorted(set(x) | set(y)) == items.tolist()
    again = session_split(ds, 3)
    assert all(np.array_equal(a, b) for a, b in zip(s.observed, again.observed))


def test_train_test_split():
    split = SessionSplit(np.arange(10), [np.array([i]) for i in range(10)], [np.array([i]) for i in range(10)])
    train, test = train_test_split(split, 0.2, 7)
    assert (len(train), len(test)) == (8, 2)
    assert not set(train.users) & set(test.users)
    train2, test2 = train_test_split(split, 0.2, 7)
    assert np.array_equal(test.users, test2.users)
    with pytest.raises(ConfigurationError):
        train_test_split(split, 1.0, 0)


def test_identity_svd():
    _, s, vt = randomized_svd(sp.identity(6, format="csr"), 6, seed=0)
    np.testing.assert_allclose(s, 1.0, atol=1e-10)
    beta = vt.T * s
    np.testing.assert_allclose(beta @ beta.T, np.eye(6), atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_randomized_svd_against_dense_oracle(seed):
    r = np.random.default_rng(seed)
    a = sp.random(200, 100, density=0.05, random_state=r, data_rvs=lambda n: np.ones(n), format="csr")
    u, s, vt = randomized_svd(a, 10, seed=seed)
    dense = a.toarray()
    # oracle: eigendecomposition of the Gram matrix gives the exact right singular vectors
    evals, evecs = np.linalg.eigh(dense.T @ dense)
    v = evecs[:, ::-1][:, :10]
    best = np.linalg.norm(dense - dense @ v @ v.T)
    got = np.linalg.norm(dense - (u * s) @ vt)
    assert got <= 1.05 * best
    np.testing.assert_allclose(vt @ vt.T, np.eye(10), atol=1e-8)


def test_zero_column_gives_zero_row():
    lists = [np.array([0, 1]), np.array([1, 3]), np.array([0, 3]), np.array([0, 1, 3])]
    beta = compute_item_embeddings(lists, 4, 2).matrix
    np.testing.assert_allclose(beta[2], 0.0, atol=1e-12)


def test_embedding_dim_checked():
    with pytest.raises(ConfigurationError):
        compute_item_embeddings([np.array([0, 1])], 2, 3)


def test_mean_embeddings(rng):
    beta = rng.standard_normal((6, 3))
    beta[4] = -beta[1]
    split = SessionSplit(np.arange(3), [np.array([2]), np.array([1, 4]), np.array([0, 3, 5])],
                         [np.array([0])] * 3)
    ctx = mean_embedding_contexts(split, beta).contexts
    np.testing.assert_allclose(ctx[0], beta[2], atol=1e-15)
    np.testing.assert_allclose(ctx[1], 0.0, atol=1e-15)
    naive = np.zeros(3)
    for a in (0, 3, 5):
        naive += beta[a]
    np.testing.assert_allclose(ctx[2], naive / 3, atol=1e-12)


def test_no_leakage_from_test_users():
    ds = latent_factor_interactions(300, 80, seed=2)
    data = prepare(ds, 8, seed=5)
    test_rows = set(data.test.users.tolist())
    # scramble every test user's items: embeddings must not move
    r = np.random.default_rng(0)
    for u in test_rows:
        ds.user_items[u] = np.sort(r.choice(80, size=len(ds.user_items[u]), replace=False))
    again = prepare(ds, 8, seed=5)
    np.testing.assert_array_equal(data.beta.matrix, again.beta.matrix)
    assert data.meta["provenance"]["x_train_sha256"] == again.meta["provenance"]["x_train_sha256"]
    assert data.meta["provenance"]["embedding_source"] == "X_train"


def test_prepare_round_trip_and_determinism(tmp_path):
    ds = latent_factor_interactions(150, 60, seed=1)
    path = tmp_path / "log.tsv"
    write_tsv(ds, path)
    ds2 = ingest_interactions(path)
    a, b = prepare(ds2, 6, seed=3), prepare(ds2, 6, seed=3)
    np.testing.assert_array_equal(a.beta.matrix, b.beta.matrix)
    np.testing.assert_array_equal(a.train.contexts, b.train.contexts)
    save_prepared(a, tmp_path / "prep", ds2)
    loaded = load_prepared(tmp_path / "prep")
    np.testing.assert_array_equal(loaded.beta.matrix, a.beta.matrix)
    np.testing.assert_array_equal(loaded.test.contexts, a.test.contexts)
    assert all(np.array_equal(x, y) for x, y in zip(loaded.train.labels, a.train.labels))
    meta = json.loads((tmp_path / "prep" / "meta.json").read_text())
    assert meta["P"] == ds2.n_items and meta["L"] == 6 and meta["seed"] == 3
    first = (tmp_path / "prep" / "labels_train.txt").read_text().splitlines()[0]
    assert first.startswith("0: ")


def test_matrix_file_layout(tmp_path, rng):
    m = rng.standard_normal((3, 5))
    save_matrix(tmp_path / "m.bin", m)
    raw = (tmp_path / "m.bin").read_bytes()
    assert len(raw) == 16 + 8 * 15
    assert raw[:8] == b"FOPLMAT1"
    assert int.from_bytes(raw[8:12], "little") == 3 and int.from_bytes(raw[12:16], "little") == 5
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.bin"), m)
    (tmp_path / "bad.bin").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError):
        load_matrix(tmp_path / "bad.bin")


def test_interaction_matrix_binary():
    a = interaction_matrix([np.array([0, 2]), np.array([1])], 3).toarray()
    np.testing.assert_array_equal(a, [[1, 0, 1], [0, 1, 0]])
