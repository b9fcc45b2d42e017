"""Full-ranking top-k evaluation with train-item masking."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Sequence

import numpy as np

from .dataset import SplitDataset
from .errors import NumericalError

DEFAULT_KS = (10, 20)


def rank_items(scores, mask=(), k: int | None = None) -> np.ndarray:
    """Items ordered by descending score, ties by ascending index.

    Masked items get an effective score of -inf and so sink to the end.
    """
    s = np.array(scores, dtype=np.float64)
    if len(mask):
        s[np.asarray(mask, dtype=np.int64)] = -np.inf
    order = np.argsort(-s, kind="stable")
    return order if k is None else order[:k]


def _top_k_row(s: np.ndarray, k: int) -> np.ndarray:
    if k >= len(s):
        return np.argsort(-s, kind="stable")
    # threshold = k-th largest value; everything strictly above is in,
    # ties at the threshold are admitted by ascending index
    thresh = np.partition(s, len(s) - k)[len(s) - k]
    cand = np.flatnonzero(s >= thresh)
    order = np.lexsort((cand, -s[cand]))
    return cand[order[:k]]


def top_k(scores: np.ndarray, masks: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Row-wise top-k of a (users x items) score block after masking."""
    s = np.array(scores, dtype=np.float64)
    for r, m in enumerate(masks):
        if len(m):
            s[r, m] = -np.inf
    return np.stack([_top_k_row(row, k) for row in s]) if len(s) else np.zeros((0, k), np.int64)


def recall_at_k(ranked, truth, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = set(int(t) for t in truth)
    if not truth:
        raise ValueError("empty ground truth")
    hits = sum(1 for item in list(ranked)[:k] if int(item) in truth)
    return hits / len(truth)


def _discounts(k: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, k + 2))


def ndcg_at_k(ranked, truth, k: int) -> float:
    """Binary-relevance NDCG with the ideal DCG cut at ``min(k, |truth|)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = set(int(t) for t in truth)
    if not truth:
        return 0.0
    top = list(ranked)[:k]
    disc = _discounts(k)
    dcg = sum(disc[r] for r, item in enumerate(top) if int(item) in truth)
    idcg = disc[: min(k, len(truth))].sum()
    return float(dcg / idcg)


@dataclass
class EvalReport:
    """Mean Recall@k / NDCG@k over users with non-empty ground truth."""

    metrics: dict[int, dict[str, float]]
    user_count: int
    split: str
    label: str = ""
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def recall(self, k: int) -> float:
        return self.metrics[k]["recall"]

    def ndcg(self, k: int) -> float:
        return self.metrics[k]["ndcg"]

    def to_dict(self, with_timestamp: bool = True) -> dict:
        d = {
            "split": self.split,
            "label": self.label,
            "user_count": self.user_count,
            "metrics": {str(k): dict(v) for k, v in sorted(self.metrics.items())},
        }
        if with_timestamp:
            d["timestamp"] = self.timestamp
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        metrics = {int(k): {"recall": float(v["recall"]), "ndcg": float(v["ndcg"])} for k, v in d["metrics"].items()}
        return cls(metrics, int(d["user_count"]), d["split"], d.get("label", ""), d.get("timestamp", ""))


EVAL_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "EvalReport",
    "type": "object",
    "required": ["split", "user_count", "metrics"],
    "properties": {
        "split": {"enum": ["train", "validation", "test"]},
        "label": {"type": "string"},
        "user_count": {"type": "integer", "minimum": 0},
        "timestamp": {"type": "string"},
        "metrics": {
            "type": "object",
            "minProperties": 1,
            "patternProperties": {
                "^[1-9][0-9]*$": {
                    "type": "object",
                    "required": ["recall", "ndcg"],
                    "properties": {
                        "recall": {"type": "number", "minimum": 0, "maximum": 1},
                        "ndcg": {"type": "number", "minimum": 0, "maximum": 1},
                    },
                    "additionalProperties": False,
                }
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def evaluate_scores(
    score_fn: Callable[[np.ndarray], np.ndarray],
    split: SplitDataset,
    ks: Sequence[int] = DEFAULT_KS,
    target: str = "test",
    batch_users: int = 1024,
    label: str = "",
) -> EvalReport:
    """Evaluate any ``users -> (len(users) x items)`` scoring function.

    Train items are masked for every target split, validation items never are.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("need at least one cutoff >= 1")
    truth = split.split(target)
    train = split.train
    users = np.array([u for u in range(split.user_count) if len(truth[u])], dtype=np.int64)
    kmax = min(ks[-1], split.item_count)
    disc = _discounts(ks[-1])
    sums = {k: [0.0, 0.0] for k in ks}
    for start in range(0, len(users), batch_users):
        batch = users[start:start + batch_users]
        scores = score_fn(batch)
        if not np.all(np.isfinite(scores)):
            raise NumericalError("non-finite scores during evaluation")
        masks = [train[u] for u in batch] if target != "train" else [np.zeros(0, np.int64)] * len(batch)
        tops = top_k(scores, masks, kmax)
        for u, top in zip(batch, tops):
            rel = np.isin(top, truth[u])
            n_true = len(truth[u])
            for k in ks:
                hits = rel[:k]
                sums[k][0] += hits.sum() / n_true
                sums[k][1] += (disc[: len(hits)][hits]).sum() / disc[: min(k, n_true)].sum()
    n = len(users)
    metrics = {k: {"recall": float(r / n) if n else 0.0, "ndcg": float(g / n) if n else 0.0}
               for k, (r, g) in sums.items()}
    return EvalReport(metrics, n, target, label)


def evaluate(model, split: SplitDataset, ks: Sequence[int] = DEFAULT_KS, target: str = "test",
             label: str = "") -> EvalReport:
    model.refresh()
    return evaluate_scores(model.score_users, split, ks, target, label=label)


def popularity_scores(split: SplitDataset) -> np.ndarray:
    """Item train frequencies, the score vector of the popularity baseline."""
    _, items = split.pairs("train")
    return np.bincount(items, minlength=split.item_count).astype(np.float64)


def evaluate_popularity(split: SplitDataset, ks=DEFAULT_KS, target="validation") -> EvalReport:
    pop = popularity_scores(split)
    return evaluate_scores(lambda users: np.broadcast_to(pop, (len(users), len(pop))), split, ks, target,
                           label="popularity")


def format_table(reports: dict[str, EvalReport], ks: Sequence[int] | None = None) -> str:
    """Metric rows by model columns, aligned for the terminal."""
    names = list(reports)
    if ks is None:
        ks = sorted({k for r in reports.values() for k in r.metrics})
    rows = []
    for metric, title in (("recall", "Recall"), ("ndcg", "NDCG")):
        for k in ks:
            cells = []
            for name in names:
                m = reports[name].metrics.get(k)
                cells.append(f"{m[metric]:.4f}" if m else "-")
            rows.append((f"{title}@{k}", cells))
    width0 = max([len("Metric")] + [len(r[0]) for r in rows])
    widths = [max(len(n), 6) for n in names]
    lines = ["  ".join(["Metric".ljust(width0)] + [n.rjust(w) for n, w in zip(names, widths)])]
    lines.append("-" * len(lines[0]))
    for label, cells in rows:
        lines.append("  ".join([label.ljust(width0)] + [c.rjust(w) for c, w in zip(cells, widths)]))
    return "\n".join(lines)


def expected_random_recall(split: SplitDataset, k: int, target: str = "validation") -> float:
    """Mean Recall@k of a uniformly random ranking over unmasked items."""
    vals = []
    for u in range(split.user_count):
        if len(split.split(target)[u]):
            vals.append(min(k, split.item_count - len(split.train[u])) / (split.item_count - len(split.train[u])))
    return float(np.mean(vals)) if vals else math.nan
