"""Interaction ingestion and the session-completion preparation pipeline.

Users' interaction sets are split into an observed half X and a held-out
half Y.  Item embeddings come from a truncated SVD of the binary user-item
matrix built on the training users' X only; a user's context is the mean
embedding of the items in X.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import ConfigurationError, ItemEmbeddings
from .matio import load_matrix, save_matrix

log = logging.getLogger(__name__)


@dataclass
class InteractionDataset:
    """Deduplicated interactions with dense ids.  ``user_items[u]`` is sorted."""

    user_items: list[np.ndarray]
    user_ids: list[str]
    item_ids: list[str]
    n_dropped_users: int = 0
    n_duplicates: int = 0

    @property
    def n_users(self) -> int:
        return len(self.user_items)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def pairs(self) -> np.ndarray:
        rows = [np.column_stack([np.full(len(it), u), it]) for u, it in enumerate(self.user_items)]
        return np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)


@dataclass
class SessionSplit:
    users: np.ndarray
    observed: list[np.ndarray]
    held_out: list[np.ndarray]
    seed: int | None = None

    def __len__(self):
        return len(self.users)

    def subset(self, idx) -> "SessionSplit":
        idx = np.asarray(idx, dtype=np.int64)
        return SessionSplit(self.users[idx], [self.observed[i] for i in idx], [self.held_out[i] for i in idx], self.seed)


@dataclass
class EmbeddedDataset:
    contexts: np.ndarray
    labels: list[np.ndarray]
    users: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.labels)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _lines(source):
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    elif isinstance(source, io.TextIOBase):
        yield from source
    else:
        yield from source


def ingest_interactions(source, min_interactions: int = 2) -> InteractionDataset:
    """Parse ``user<TAB>item`` rows; dedupe, drop small users, densify ids."""
    seen: dict[str, set[str]] = {}
    first = True
    n_dup = 0
    for lineno, line in enumerate(_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise ValueError(f"line {lineno}: expected 'user<TAB>item', got {line!r}")
        user, item = fields[0].strip(), fields[1].strip()
        if first:
            first = False
            if not (_is_number(user) and _is_number(item)):
                continue  # header row
        items = seen.setdefault(user, set())
        if item in items:
            n_dup += 1
        items.add(item)
    if not seen:
        raise ValueError("no interactions found")

    kept = {u: s for u, s in seen.items() if len(s) >= min_interactions}
    n_dropped = len(seen) - len(kept)
    if n_dropped:
        log.info("dropped %d users with fewer than %d interactions", n_dropped, min_interactions)
    if not kept:
        raise ValueError("no user has enough interactions")

    item_ids = sorted({i for s in kept.values() for i in s}, key=_sort_key)
    item_index = {raw: j for j, raw in enumerate(item_ids)}
    user_ids = sorted(kept, key=_sort_key)
    user_items = [np.sort(np.fromiter((item_index[i] for i in kept[u]), dtype=np.int64)) for u in user_ids]
    return InteractionDataset(user_items, user_ids, item_ids, n_dropped, n_dup)


def _sort_key(raw: str):
    # numeric ids sort numerically, everything else lexically after them
    try:
        return (0, float(raw), raw)
    except ValueError:
        return (1, 0.0, raw)


def session_split(ds: InteractionDataset, seed: int) -> SessionSplit:
    """Random X/Y halves per user; X takes the extra item when the count is odd."""
    rng = np.random.default_rng(seed)
    observed, held_out = [], []
    for items in ds.user_items:
        if len(items) < 2:
            raise ConfigurationError("every user needs at least 2 interactions to split")
        perm = rng.permutation(items)
        n_x = (len(items) + 1) // 2
        observed.append(np.sort(perm[:n_x]))
        held_out.append(np.sort(perm[n_x:]))
    return SessionSplit(np.arange(ds.n_users), observed, held_out, seed)


def train_test_split(split: SessionSplit, test_frac: float, seed: int) -> tuple[SessionSplit, SessionSplit]:
    if not 0.0 < test_frac < 1.0:
        raise ConfigurationError(f"test fraction must lie in (0, 1), got {test_frac}")
    n = len(split)
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_frac * n))
    return split.subset(np.sort(perm[n_test:])), split.subset(np.sort(perm[:n_test]))


def interaction_matrix(item_lists, n_items: int) -> sp.csr_matrix:
    """Binary users x items matrix."""
    indptr = np.zeros(len(item_lists) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(i) for i in item_lists])
    indices = np.concatenate(item_lists) if item_lists else np.zeros(0, dtype=np.int64)
    data = np.ones(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(item_lists), n_items))


def randomized_svd(a, rank: int, oversample: int = 10, n_iter: int = 2, seed: int = 0):
    """Truncated SVD through a randomized range finder with power iterations.

    Returns (U, s, Vt) with ``rank`` components; signs are fixed so that the
    largest-magnitude entry of every right singular vector is positive.
    """
    n_rows, n_cols = a.shape
    width = min(rank + oversample, n_rows, n_cols)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(a @ rng.standard_normal((n_cols, width)))
    for _ in range(n_iter):
        z, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ z)
    small = np.asarray((a.T @ q).T)
    ub, s, vt = np.linalg.svd(small, full_matrices=False)
    u = q @ ub
    u, s, vt = u[:, :rank], s[:rank], vt[:rank]
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(rank), pivot])
    signs[signs == 0] = 1.0
    return u * signs, s, vt * signs[:, None]


def compute_item_embeddings(observed_train, n_items: int, dim: int, seed: int = 0) -> ItemEmbeddings:
    """beta = V * Sigma from a rank-``dim`` SVD of the training X matrix."""
    a = interaction_matrix(list(observed_train), n_items)
    if dim <= 0 or dim > min(a.shape):
        raise ConfigurationError(f"embedding dimension {dim} must lie in [1, min(P, N_train)] = [1, {min(a.shape)}]")
    _, s, vt = randomized_svd(a, dim, seed=seed)
    return ItemEmbeddings(vt.T * s)


def mean_embedding_contexts(split: SessionSplit, beta) -> EmbeddedDataset:
    b = beta.matrix if isinstance(beta, ItemEmbeddings) else np.asarray(beta)
    a = interaction_matrix(split.observed, b.shape[0])
    counts = np.asarray(a.sum(axis=1)).ravel()
    if np.any(counts == 0):
        raise ConfigurationError("every context needs at least one observed item")
    contexts = np.asarray(sp.diags(1.0 / counts) @ a @ b)
    return EmbeddedDataset(contexts, [np.asarray(y) for y in split.held_out], split.users.copy())


def _sha256_items(item_lists) -> str:
    h = hashlib.sha256()
    for items in item_lists:
        h.update(np.asarray(items, dtype="<i8").tobytes())
        h.update(b"|")
    return h.hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class PreparedData:
    beta: ItemEmbeddings
    train: EmbeddedDataset
    test: EmbeddedDataset
    meta: dict


def _seeds(seed: int) -> tuple[int, int, int]:
    ss = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(s.generate_state(1)[0]) for s in ss)


def prepare(ds: InteractionDataset, dim: int, seed: int, test_frac: float = 0.2) -> PreparedData:
    split_seed, tt_seed, svd_seed = _seeds(seed)
    split = session_split(ds, split_seed)
    train, test = train_test_split(split, test_frac, tt_seed)
    beta = compute_item_embeddings(train.observed, ds.n_items, dim, svd_seed)
    meta = {
        "format_version": 1,
        "P": ds.n_items,
        "N": ds.n_users,
        "N_train": len(train),
        "N_test": len(test),
        "L": dim,
        "seed": seed,
        "seeds": {"split": split_seed, "train_test": tt_seed, "svd": svd_seed},
        "test_frac": test_frac,
        "dropped_users": ds.n_dropped_users,
        "provenance": {
            "embedding_source": "X_train",
            "x_train_sha256": _sha256_items(train.observed),
            "beta_sha256": hashlib.sha256(np.ascontiguousarray(beta.matrix, dtype="<f8").tobytes()).hexdigest(),
        },
    }
    return PreparedData(beta, mean_embedding_contexts(train, beta), mean_embedding_contexts(test, beta), meta)


def _write_labels(path: Path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, y in enumerate(labels):
            fh.write(f"{i}: {' '.join(str(int(a)) for a in y)}\n")


def _read_labels(path: Path) -> list[np.ndarray]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        idx, _, rest = line.partition(":")
        if int(idx) != len(out):
            raise ValueError(f"{path}: labels out of order at user {idx}")
        out.append(np.array([int(t) for t in rest.split()], dtype=np.int64))
    return out


def save_prepared(data: PreparedData, out_dir, ds: InteractionDataset | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "beta.bin", data.beta.matrix)
    for name, part in (("train", data.train), ("test", data.test)):
        save_matrix(out / f"contexts_{name}.bin", part.contexts)
        _write_labels(out / f"labels_{name}.txt", part.labels)
    if ds is not None:
        (out / "items.txt").write_text("".join(f"{i}\t{raw}\n" for i, raw in enumerate(ds.item_ids)), encoding="utf-8")
        (out / "users.txt").write_text("".join(f"{i}\t{raw}\n" for i, raw in enumerate(ds.user_ids)), encoding="utf-8")
    (out / "meta.json").write_text(json.dumps(data.meta, indent=2, sort_keys=True), encoding="utf-8")


def load_prepared(path) -> PreparedData:
    d = Path(path)
    meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    beta = ItemEmbeddings(load_matrix(d / "beta.bin"))
    if beta.matrix.shape != (meta["P"], meta["L"]):
        raise ValueError(f"{d}: beta shape {beta.matrix.shape} disagrees with meta P={meta['P']} L={meta['L']}")
    parts = {}
    for name in ("train", "test"):
        ctx = load_matrix(d / f"contexts_{name}.bin")
        labels = _read_labels(d / f"labels_{name}.txt")
        if len(labels) != len(ctx):
            raise ValueError(f"{d}: {name} contexts and labels differ in length")
        parts[name] = EmbeddedDataset(ctx, labels, np.arange(len(labels)))
    return PreparedData(beta, parts["train"], parts["test"], meta)


def read_id_map(path) -> list[str]:
    rows = [line.split("\t", 1) for line in Path(path).read_text(encoding="utf-8").splitlines() if line]
    return [raw for _, raw in sorted(((int(i), raw) for i, raw in rows))]
