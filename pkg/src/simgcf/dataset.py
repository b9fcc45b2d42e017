"""Interaction logs, contiguous id spaces and per-user random splits."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, EmptyDatasetError, ParseError

DEFAULT_RATIOS = (0.8, 0.1, 0.1)
SPLIT_NAMES = ("train", "validation", "test")
_SPLIT_FILES = {"train": "train.txt", "validation": "val.txt", "test": "test.txt"}
MANIFEST_NAME = "manifest.json"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class InteractionDataset:
    """Deduplicated user-item interactions over dense index spaces.

    ``user_ids[k]`` is the raw id of user index ``k`` (same for items);
    ``users``/``items`` are parallel index arrays, one entry per interaction.
    """

    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    users: np.ndarray
    items: np.ndarray
    user_index: dict[str, int] = field(init=False, repr=False, compare=False)
    item_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "user_index", {u: k for k, u in enumerate(self.user_ids)})
        object.__setattr__(self, "item_index", {i: k for k, i in enumerate(self.item_ids)})
        if len(self.user_index) != len(self.user_ids) or len(self.item_index) != len(self.item_ids):
            raise DataError("id maps must be bijections")
        object.__setattr__(self, "users", _readonly(np.asarray(self.users, dtype=np.int64)))
        object.__setattr__(self, "items", _readonly(np.asarray(self.items, dtype=np.int64)))

    @property
    def user_count(self) -> int:
        return len(self.user_ids)

    @property
    def item_count(self) -> int:
        return len(self.item_ids)

    @property
    def interaction_count(self) -> int:
        return len(self.users)

    @property
    def sparsity(self) -> float:
        return 1.0 - self.interaction_count / (self.user_count * self.item_count)

    def user_items(self) -> list[np.ndarray]:
        """Sorted item indices of every user."""
        order = np.lexsort((self.items, self.users))
        counts = np.bincount(self.users, minlength=self.user_count)
        return np.split(self.items[order], np.cumsum(counts)[:-1])

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[object, object]]) -> "InteractionDataset":
        """Build from raw (user, item) pairs; ids are indexed by first appearance."""
        user_index: dict[str, int] = {}
        item_index: dict[str, int] = {}
        seen: set[tuple[int, int]] = set()
        users, items = [], []
        for u, i in pairs:
            u, i = str(u), str(i)
            uk = user_index.setdefault(u, len(user_index))
            ik = item_index.setdefault(i, len(item_index))
            if (uk, ik) in seen:
                continue
            seen.add((uk, ik))
            users.append(uk)
            items.append(ik)
        if not users:
            raise EmptyDatasetError("dataset contains no interactions")
        return cls(tuple(user_index), tuple(item_index), np.array(users), np.array(items))


def _is_header(fields: Sequence[str]) -> bool:
    # RecBole atomic files annotate columns as name:type
    return all(":" in f for f in fields[:2])


def load_interactions(path: str | os.PathLike, format: str = "tsv") -> InteractionDataset:
    """Read a delimited interaction log.

    The first two fields of each record are the user and item ids; further
    fields (ratings, timestamps) are ignored. Blank lines are skipped, and a
    RecBole-style typed header (``user_id:token``...) on the first line is
    recognised and dropped.
    """
    sep = {"tsv": "\t", "csv": ","}.get(format)
    if sep is None:
        raise ValueError(f"unknown format {format!r}; expected 'tsv' or 'csv'")
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")

    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split(sep)
            if lineno == 1 and _is_header(fields):
                continue
            if len(fields) < 2 or not fields[0].strip() or not fields[1].strip():
                raise ParseError(
                    f"expected at least user and item fields separated by {format}", lineno, str(path)
                )
            pairs.append((fields[0].strip(), fields[1].strip()))
    if not pairs:
        raise EmptyDatasetError(f"{path}: no interactions found")
    return InteractionDataset.from_pairs(pairs)


@dataclass(frozen=True)
class SplitDataset:
    """Per-user train/validation/test partition of an interaction set.

    Each split is a tuple with one sorted ``int64`` array of item indices per
    user.
    """

    user_count: int
    item_count: int
    train: tuple[np.ndarray, ...]
    validation: tuple[np.ndarray, ...]
    test: tuple[np.ndarray, ...]
    seed: int
    ratios: tuple[float, float, float]

    def __post_init__(self):
        for name in SPLIT_NAMES:
            part = getattr(self, name)
            if len(part) != self.user_count:
                raise DataError(f"{name} split has {len(part)} users, expected {self.user_count}")
            for a in part:
                _readonly(a)

    def split(self, name: str) -> tuple[np.ndarray, ...]:
        if name == "val":
            name = "validation"
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def pairs(self, name: str = "train") -> tuple[np.ndarray, np.ndarray]:
        """(users, items) index arrays of one split, ordered by user then item."""
        part = self.split(name)
        counts = np.fromiter((len(a) for a in part), dtype=np.int64, count=self.user_count)
        users = np.repeat(np.arange(self.user_count, dtype=np.int64), counts)
        items = np.concatenate(part) if part else np.zeros(0, dtype=np.int64)
        return users, items.astype(np.int64)

    def counts(self) -> dict[str, int]:
        return {name: int(sum(len(a) for a in self.split(name))) for name in SPLIT_NAMES}


def _check_ratios(ratios) -> tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    return ratios


def split_dataset(
    ds: InteractionDataset, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 2024
) -> SplitDataset:
    """Randomly partition every user's items into train/validation/test.

    Users are visited in index order and each one's sorted item list is
    shuffled by a single generator seeded with ``seed``. Validation and test
    sizes are ``floor(ratio * degree)``; the remainder goes to train, so a
    user with one interaction keeps it in train.
    """
    ratios = _check_ratios(ratios)
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for items in ds.user_items():
        n = len(items)
        if n == 0:
            raise DataError("every user needs at least one interaction")
        # tolerance guards products such as 0.29 * 100 = 28.999...
        n_val = math.floor(ratios[1] * n + 1e-9)
        n_test = math.floor(ratios[2] * n + 1e-9)
        perm = items[rng.permutation(n)]
        n_train = n - n_val - n_test
        train.append(np.sort(perm[:n_train]))
        val.append(np.sort(perm[n_train:n_train + n_val]))
        test.append(np.sort(perm[n_train + n_val:]))
    return SplitDataset(ds.user_count, ds.item_count, tuple(train), tuple(val), tuple(test), seed, ratios)


def split_from_pairs(
    user_count: int,
    item_count: int,
    parts: dict[str, tuple[np.ndarray, np.ndarray]],
    seed: int = -1,
    ratios: Sequence[float] = DEFAULT_RATIOS,
) -> SplitDataset:
    """Assemble a split from explicit (users, items) arrays per split name."""
    grouped = {}
    for name in SPLIT_NAMES:
        users, items = parts.get(name, (np.zeros(0, np.int64), np.zeros(0, np.int64)))
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if len(users) and (users.max() >= user_count or items.max() >= item_count or min(users.min(), items.min()) < 0):
            raise DataError(f"{name} split has indices out of range")
        order = np.lexsort((items, users))
        counts = np.bincount(users, minlength=user_count)
        grouped[name] = tuple(np.unique(a) for a in np.split(items[order], np.cumsum(counts)[:-1]))
    return SplitDataset(
        user_count, item_count, grouped["train"], grouped["validation"], grouped["test"],
        int(seed), tuple(float(r) for r in ratios),
    )


def save_split(split: SplitDataset, outdir: str | os.PathLike, ds: InteractionDataset | None = None) -> Path:
    """Write the three split files and a JSON manifest; returns the manifest path.

    Split files hold ``user_index<TAB>item_index`` lines. When the source
    dataset is given, the raw id tables are written alongside.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        users, items = split.pairs(name)
        with open(outdir / _SPLIT_FILES[name], "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{u}\t{i}\n" for u, i in zip(users.tolist(), items.tolist()))
    manifest = {
        "format_version": 1,
        "seed": split.seed,
        "ratios": list(split.ratios),
        "user_count": split.user_count,
        "item_count": split.item_count,
        "counts": split.counts(),
        "files": dict(_SPLIT_FILES),
    }
    if ds is not None:
        for name, ids in (("users.txt", ds.user_ids), ("items.txt", ds.item_ids)):
            with open(outdir / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.writelines(f"{k}\t{raw}\n" for k, raw in enumerate(ids))
        manifest["id_maps"] = {"users": "users.txt", "items": "items.txt"}
    path = outdir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _read_index_pairs(path: Path) -> tuple[np.ndarray, np.ndarray]:
    users, items = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                users.append(int(fields[0]))
                items.append(int(fields[1]))
            except (IndexError, ValueError):
                raise ParseError("expected user_index<TAB>item_index", lineno, str(path)) from None
    return np.array(users, dtype=np.int64), np.array(items, dtype=np.int64)


def load_split(split_dir: str | os.PathLike) -> SplitDataset:
    split_dir = Path(split_dir)
    manifest_path = split_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"{manifest_path}: no split manifest")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    files = manifest.get("files", _SPLIT_FILES)
    parts = {name: _read_index_pairs(split_dir / files[name]) for name in SPLIT_NAMES}
    split = split_from_pairs(
        manifest["user_count"], manifest["item_count"], parts, manifest["seed"], manifest["ratios"]
    )
    if split.counts() != manifest["counts"]:
        raise DataError(f"{split_dir}: split files disagree with manifest counts")
    return split
