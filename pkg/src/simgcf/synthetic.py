"""Small synthetic interaction sets for desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .dataset import InteractionDataset


def two_block_dataset(
    n_users: int = 200,
    n_items: int = 100,
    per_user: int = 20,
    seed: int = 0,
    window: int | None = None,
) -> InteractionDataset:
    """Two communities of users and items with in-block interactions only.

    Users ``[0, n_users/2)`` interact with items ``[0, n_items/2)`` and the
    rest with the rest. Inside a block the users sit on a ring over the
    block's items and draw ``per_user`` distinct items from a window of
    ``window`` items centred on their position (the whole block when
    ``window`` is None), so a model can learn more than block membership.
    """
    rng = np.random.default_rng(seed)
    half_u, half_i = n_users // 2, n_items // 2
    window = half_i if window is None else window
    if not per_user <= window <= half_i:
        raise ValueError("need per_user <= window <= items per block")
    pairs = []
    for u in range(n_users):
        block = 0 if u < half_u else 1
        n_block_users = half_u if block == 0 else n_users - half_u
        n_block_items = half_i if block == 0 else n_items - half_i
        pos = (u - block * half_u) * n_block_items // n_block_users
        start = pos - window // 2
        cand = (start + np.arange(window)) % n_block_items
        chosen = np.sort(rng.choice(cand, size=per_user, replace=False))
        offset = block * half_i
        pairs.extend((f"u{u}", f"i{offset + i}") for i in chosen)
    ds = InteractionDataset.from_pairs(pairs)
    # reindex so dense indices equal the generator's ids
    order_u = np.argsort([int(x[1:]) for x in ds.user_ids])
    order_i = np.argsort([int(x[1:]) for x in ds.item_ids])
    inv_u = np.empty_like(order_u)
    inv_u[order_u] = np.arange(len(order_u))
    inv_i = np.empty_like(order_i)
    inv_i[order_i] = np.arange(len(order_i))
    return InteractionDataset(
        tuple(ds.user_ids[k] for k in order_u),
        tuple(ds.item_ids[k] for k in order_i),
        inv_u[ds.users],
        inv_i[ds.items],
    )
