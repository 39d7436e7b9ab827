"""Maximum inner product search over frozen item embeddings.

Two variants share one interface: :class:`ExactIndex` scans the whole catalog,
:class:`GraphIndex` is a layered proximity graph (HNSW-style) ordered directly
by inner product.  Both are built once and never modified afterwards.
"""
from __future__ import annotations

import logging
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _hnsw
from .core import ConfigurationError, as_matrix

log = logging.getLogger(__name__)

INDEX_MAGIC = b"FOPLMIPS"
INDEX_VERSION = 1
# magic, version, P, L, variant, M, efConstruction, efSearch, seed, entry, max_level, cap0, n_upper_rows
_HEADER = struct.Struct("<8sIQQBIIIqqqQQ")
_VARIANTS = {"exact": 0, "graph": 1}


@dataclass(frozen=True)
class IndexConfig:
    variant: str = "graph"
    m: int = 16
    ef_construction: int = 200
    ef_search: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ConfigurationError(f"unknown index variant {self.variant!r}")
        for name in ("m", "ef_construction", "ef_search"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.m < 2:
            raise ConfigurationError("m must be at least 2")


class TopKSet(NamedTuple):
    """Action ids with their inner-product scores, best first."""

    ids: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.ids)


def _clamp_k(k: int, n: int) -> int:
    k = int(k)
    if k <= 0:
        raise ConfigurationError(f"K must be positive, got {k}")
    if k > n:
        log.warning("K=%d exceeds catalog size %d; clamping", k, n)
        return n
    return k


def _rank(ids: np.ndarray, scores: np.ndarray) -> np.ndarray:
    # descending score, ascending id on ties
    return np.lexsort((ids, -scores))


def exhaustive_top_k(vectors: np.ndarray, query: np.ndarray, k: int) -> TopKSet:
    """Reference argsort prefix over the full catalog."""
    scores = vectors @ query
    ids = np.arange(len(scores))
    order = _rank(ids, scores)[:k]
    return TopKSet(ids[order], scores[order])


class MipsIndex:
    variant: str
    vectors: np.ndarray

    @property
    def n_items(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def _check_query(self, q) -> np.ndarray:
        q = np.ascontiguousarray(q, dtype=np.float64)
        if q.shape[-1] != self.dim:
            raise ConfigurationError(f"query dimension {q.shape[-1]} does not match index dimension {self.dim}")
        return q

    def top_k(self, query, k: int) -> TopKSet:
        raise NotImplementedError

    def top_k_batch(self, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def save(self, path) -> None:
        save_index(self, path)


class ExactIndex(MipsIndex):
    variant = "exact"

    def __init__(self, vectors: np.ndarray):
        self.vectors = vectors
        self.config = IndexConfig(variant="exact")

    def top_k(self, query, k: int) -> TopKSet:
        q = self._check_query(query)
        k = _clamp_k(k, self.n_items)
        scores = self.vectors @ q
        if k < self.n_items:
            # candidates: everything scoring at least the k-th best, so ties at the cut are kept
            kth = np.partition(scores, self.n_items - k)[self.n_items - k]
            cand = np.flatnonzero(scores >= kth)
        else:
            cand = np.arange(self.n_items)
        order = _rank(cand, scores[cand])[:k]
        return TopKSet(cand[order], scores[cand[order]])

    def top_k_batch(self, queries, k: int):
        qs = self._check_query(np.atleast_2d(queries))
        k = _clamp_k(k, self.n_items)
        ids = np.empty((len(qs), k), dtype=np.int64)
        scores = np.empty((len(qs), k))
        for i, q in enumerate(qs):
            res = self.top_k(q, k)
            ids[i], scores[i] = res.ids, res.scores
        return ids, scores


class GraphIndex(MipsIndex):
    """Layered proximity graph searched greedily by inner product."""

    variant = "graph"

    def __init__(self, vectors, config, levels, upper_off, nbr0, cnt0, nbr_up, cnt_up, entry, max_level):
        self.vectors = vectors
        self.config = config
        self.levels = levels
        self.upper_off = upper_off
        self.nbr0 = nbr0
        self.cnt0 = cnt0
        self.nbr_up = nbr_up
        self.cnt_up = cnt_up
        self.entry = int(entry)
        self.max_level = int(max_level)
        self.ef_search = config.ef_search
        self._local = threading.local()

    def _scratch(self):
        # per-thread visited stamps keep queries free of O(P) clearing
        loc = self._local
        if getattr(loc, "visited", None) is None:
            loc.visited = np.zeros(self.n_items, dtype=np.int64)
            loc.tag = 0
        return loc

    def top_k_batch(self, queries, k: int):
        qs = self._check_query(np.atleast_2d(queries))
        k = _clamp_k(k, self.n_items)
        loc = self._scratch()
        ids, scores = _hnsw.query_batch(
            self.vectors, qs, k, self.ef_search, self.entry, self.max_level,
            self.nbr0, self.cnt0, self.nbr_up, self.cnt_up, self.upper_off,
            loc.visited, loc.tag + 1,
        )
        loc.tag += len(qs)
        return ids, scores

    def top_k(self, query, k: int) -> TopKSet:
        ids, scores = self.top_k_batch(np.asarray(query)[None, :], k)
        keep = ids[0] >= 0
        return TopKSet(ids[0][keep], scores[0][keep])

    def layer0_reachable(self) -> np.ndarray:
        seen = np.zeros(self.n_items, dtype=bool)
        _hnsw._reach(self.entry, self.nbr0, self.cnt0, seen)
        return seen


def build_index(beta, config: IndexConfig | None = None) -> MipsIndex:
    config = config or IndexConfig()
    vectors = np.ascontiguousarray(as_matrix(beta), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ConfigurationError("cannot index an empty embedding matrix")
    if not np.all(np.isfinite(vectors)):
        raise ConfigurationError("embeddings contain non-finite entries")
    vectors = vectors.copy()
    vectors.setflags(write=False)
    if config.variant == "exact":
        return ExactIndex(vectors)

    n = vectors.shape[0]
    rng = np.random.default_rng(config.seed)
    mult = 1.0 / np.log(config.m)
    levels = np.floor(-np.log(1.0 - rng.random(n)) * mult).astype(np.int64)
    upper_off = np.zeros(n, dtype=np.int64)
    upper_off[1:] = np.cumsum(levels)[:-1]
    cap0 = 2 * config.m + max(2, config.m // 2)
    nbr0, cnt0, nbr_up, cnt_up, entry, max_level = _hnsw.build_graph(
        vectors, levels, upper_off, config.m, config.ef_construction, cap0
    )
    fixed = _hnsw.repair_connectivity(vectors, entry, config.ef_construction, nbr0, cnt0, nbr_up, cnt_up, upper_off)
    if fixed < 0:
        raise RuntimeError("could not connect every node to the entry point")
    if fixed:
        log.debug("connectivity repair added %d edges", fixed)
    return GraphIndex(vectors, config, levels, upper_off, nbr0, cnt0, nbr_up, cnt_up, entry, max_level)


def save_index(index: MipsIndex, path) -> None:
    cfg = index.config
    p, l = index.vectors.shape
    if isinstance(index, GraphIndex):
        header = _HEADER.pack(
            INDEX_MAGIC, INDEX_VERSION, p, l, _VARIANTS["graph"], cfg.m, cfg.ef_construction,
            index.ef_search, cfg.seed, index.entry, index.max_level, index.nbr0.shape[1], index.nbr_up.shape[0],
        )
        arrays = [index.levels, index.upper_off, index.cnt0, index.nbr0, index.cnt_up, index.nbr_up]
    else:
        header = _HEADER.pack(INDEX_MAGIC, INDEX_VERSION, p, l, _VARIANTS["exact"], 0, 0, 0, 0, 0, 0, 0, 0)
        arrays = []
    with open(path, "wb") as fh:
        fh.write(header)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(index.vectors, dtype="<f8").tobytes())


def load_index(path) -> MipsIndex:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated index header")
    (magic, version, p, l, variant, m, efc, efs, seed, entry, max_level, cap0, n_up) = _HEADER.unpack_from(raw)
    if magic != INDEX_MAGIC:
        raise ValueError(f"{path}: not an index file")
    if version != INDEX_VERSION:
        raise ValueError(f"{path}: unsupported index format version {version} (expected {INDEX_VERSION})")
    off = _HEADER.size

    def take(count, dtype, shape):
        nonlocal off
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.reshape(shape).copy()

    if variant == _VARIANTS["graph"]:
        levels = take(p, "<i8", (p,)).astype(np.int64)
        upper_off = take(p, "<i8", (p,)).astype(np.int64)
        cnt0 = take(p, "<i8", (p,)).astype(np.int64)
        nbr0 = take(p * cap0, "<i8", (p, cap0)).astype(np.int64)
        cnt_up = take(n_up, "<i8", (n_up,)).astype(np.int64)
        nbr_up = take(n_up * m, "<i8", (n_up, m)).astype(np.int64)
        vectors = take(p * l, "<f8", (p, l)).astype(np.float64)
        vectors.setflags(write=False)
        config = IndexConfig("graph", m, efc, efs, seed)
        return GraphIndex(vectors, config, levels, upper_off, nbr0, cnt0, nbr_up, cnt_up, entry, max_level)
    if variant == _VARIANTS["exact"]:
        vectors = take(p * l, "<f8", (p, l)).astype(np.float64)
        vectors.setflags(write=False)
        return ExactIndex(vectors)
    raise ValueError(f"{path}: unknown variant code {variant}")


def top_k(index: MipsIndex, query, k: int) -> TopKSet:
    return index.top_k(query, k)


def recall_at_k(index: MipsIndex, queries, k: int) -> float:
    """Mean overlap between ``index`` results and the exhaustive top-k."""
    qs = np.atleast_2d(queries)
    ids, _ = index.top_k_batch(qs, k)
    hits = 0
    for q, got in zip(qs, ids):
        truth = exhaustive_top_k(index.vectors, q, k).ids
        hits += len(np.intersect1d(truth, got[got >= 0]))
    return hits / (len(qs) * min(k, index.n_items))
