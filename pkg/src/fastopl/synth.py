"""Synthetic interaction logs and embeddings for tests and experiments."""
from __future__ import annotations

import numpy as np

from .data import InteractionDataset


def latent_factor_interactions(n_users: int, n_items: int, *, dim: int = 8, min_items: int = 6,
                               max_items: int = 20, temperature: float = 3.0, seed: int = 0) -> InteractionDataset:
    """Users pick items through a softmax over latent user-item affinities.

    Items a user interacts with cluster in latent space, so the held-out half
    of a session is predictable from the observed half.
    """
    rng = np.random.default_rng(seed)
    items = rng.standard_normal((n_items, dim)) / np.sqrt(dim)
    users = rng.standard_normal((n_users, dim)) / np.sqrt(dim)
    popularity = rng.gumbel(size=n_items) * 0.5
    user_items = []
    for u in range(n_users):
        logits = temperature * dim * (items @ users[u]) + popularity
        n_u = int(rng.integers(min_items, max_items + 1))
        # Gumbel top-k gives a draw without replacement from the softmax
        keys = logits + rng.gumbel(size=n_items)
        user_items.append(np.sort(np.argpartition(-keys, n_u)[:n_u]))
    return InteractionDataset(user_items, [str(u) for u in range(n_users)], [str(i) for i in range(n_items)])


def write_tsv(ds: InteractionDataset, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("user_id\titem_id\n")
        for u, items in enumerate(ds.user_items):
            for i in items:
                fh.write(f"{ds.user_ids[u]}\t{ds.item_ids[int(i)]}\n")


def gaussian_catalog(n_items: int, dim: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n_items, dim))


def timing_task(n_items: int, dim: int, n_users: int, *, labels_per_user: int = 10, seed: int = 0):
    """Random catalog, contexts and label sets for wall-clock comparisons."""
    from .data import EmbeddedDataset

    rng = np.random.default_rng(seed)
    beta = rng.standard_normal((n_items, dim)) / np.sqrt(dim)
    contexts = rng.standard_normal((n_users, dim)) / np.sqrt(dim)
    labels = [np.sort(rng.choice(n_items, size=labels_per_user, replace=False)) for _ in range(n_users)]
    return beta, EmbeddedDataset(contexts, labels, np.arange(n_users))
