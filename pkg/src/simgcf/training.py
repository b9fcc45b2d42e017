"""BPR training of E0 through the fixed polynomial propagation."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass
from typing import Callable, TextIO

import numpy as np

from .dataset import SplitDataset
from .errors import NumericalError
from .evaluation import evaluate
from .filters import FilterSpec
from .graph import SparseAdjacency
from .propagation import DEFAULT_DIM, EmbeddingModel, propagate, xavier_uniform

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 4096
    reg_weight: float = 1e-4
    max_epochs: int = 300
    early_stop_patience: int = 5
    eval_cutoff: int = 20
    embedding_dim: int = DEFAULT_DIM
    init_seed: int = 0
    sampler_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_rejections: int = 100

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be non-negative")
        if self.max_epochs < 0 or self.early_stop_patience < 1 or self.eval_cutoff < 1:
            raise ValueError("max_epochs >= 0, early_stop_patience >= 1 and eval_cutoff >= 1 required")


class BPRSampler:
    """Uniform (u, i+, j-) triples from the training interactions.

    ``u, i+`` is a uniformly drawn training interaction; ``j-`` is drawn
    uniformly over all items and redrawn while the user has interacted with it.
    """

    def __init__(self, split: SplitDataset, max_rejections: int = 100):
        self.users, self.items = split.pairs("train")
        if len(self.users) == 0:
            raise ValueError("train split is empty")
        self.item_count = split.item_count
        self.max_rejections = max_rejections
        self._keys = self.users * self.item_count + self.items  # sorted by construction

    def _known(self, u: np.ndarray, j: np.ndarray) -> np.ndarray:
        keys = u * self.item_count + j
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        return self._keys[pos] == keys

    def sample(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.users), size=batch_size)
        u, i = self.users[idx], self.items[idx]
        j = rng.integers(0, self.item_count, size=batch_size)
        bad = self._known(u, j)
        tries = 0
        while bad.any() and tries < self.max_rejections:
            j[bad] = rng.integers(0, self.item_count, size=int(bad.sum()))
            bad[bad] = self._known(u[bad], j[bad])
            tries += 1
        if bad.any():
            log.warning("dropping %d triples whose users have no sampleable negative", int(bad.sum()))
        keep = ~bad
        return np.stack([u[keep], i[keep], j[keep]], axis=1)


def sample_bpr_batch(split: SplitDataset, batch_size: int, rng: np.random.Generator,
                     max_rejections: int = 100) -> np.ndarray:
    """One batch of (u, i+, j-) rows; see :class:`BPRSampler`."""
    return BPRSampler(split, max_rejections).sample(batch_size, rng)


def _log_sigmoid_neg(x: np.ndarray) -> np.ndarray:
    # softplus(-x) = -ln sigmoid(x)
    return np.logaddexp(0.0, -x)


def bpr_loss(pos_scores, neg_scores) -> float:
    """Sum over triples of ``-ln sigmoid(pos - neg)``."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.shape != neg.shape:
        raise ValueError("score lists differ in length")
    # overflow shows up as a non-finite loss, which the caller reports
    with np.errstate(over="ignore", invalid="ignore"):
        return float(_log_sigmoid_neg(pos - neg).sum())


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _batch_scores(model: EmbeddingModel, batch: np.ndarray):
    e = model.embeddings
    uc = model.user_count
    eu = e[batch[:, 0]]
    ei = e[uc + batch[:, 1]]
    ej = e[uc + batch[:, 2]]
    return eu, ei, ej, model.sign * np.einsum("bd,bd->b", eu, ei), model.sign * np.einsum("bd,bd->b", eu, ej)


def _batch_rows(model: EmbeddingModel, batch: np.ndarray) -> np.ndarray:
    uc = model.user_count
    return np.unique(np.concatenate([batch[:, 0], uc + batch[:, 1], uc + batch[:, 2]]))


def batch_objective(model: EmbeddingModel, batch: np.ndarray, reg_weight: float) -> float:
    """``(L_bpr + w * sum ||E0_r||^2) / B`` over the distinct rows r of the batch."""
    if len(batch) == 0:
        return 0.0
    _, _, _, pos, neg = _batch_scores(model, batch)
    rows = _batch_rows(model, batch)
    reg = float(np.sum(model.e0[rows] ** 2))
    return (bpr_loss(pos, neg) + reg_weight * reg) / len(batch)


def backward(model: EmbeddingModel, batch: np.ndarray, reg_weight: float) -> np.ndarray:
    """Gradient of :func:`batch_objective` with respect to E0.

    The BPR gradient is accumulated on the propagated table and pulled back
    through ``P = sum_i alpha_i A^i``; P is symmetric, so the pullback is
    another propagation.
    """
    grad = np.zeros_like(model.e0)
    if len(batch) == 0:
        return grad
    eu, ei, ej, pos, neg = _batch_scores(model, batch)
    s = _sigmoid(neg - pos) * model.sign
    uc = model.user_count
    g = np.zeros_like(grad)
    np.add.at(g, batch[:, 0], -s[:, None] * (ei - ej))
    np.add.at(g, uc + batch[:, 1], -s[:, None] * eu)
    np.add.at(g, uc + batch[:, 2], s[:, None] * eu)
    grad = propagate(model.adj, g, model.coefficients)
    rows = _batch_rows(model, batch)
    grad[rows] += 2.0 * reg_weight * model.e0[rows]
    grad /= len(batch)
    return grad


class AdamState:
    """Moment tables for a row-sparse Adam update."""

    def __init__(self, shape, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.step = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps


def adam_step(e0: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """Bias-corrected Adam on the rows with a nonzero gradient; returns a new table."""
    if e0.shape != grads.shape or state.m.shape != e0.shape:
        raise ValueError("parameter, gradient and state shapes differ")
    state.step += 1
    rows = np.flatnonzero(np.any(grads != 0, axis=1))
    out = e0.copy()
    if len(rows) == 0:
        return out
    b1, b2 = state.beta1, state.beta2
    g = grads[rows]
    state.m[rows] = b1 * state.m[rows] + (1.0 - b1) * g
    state.v[rows] = b2 * state.v[rows] + (1.0 - b2) * g * g
    m_hat = state.m[rows] / (1.0 - b1 ** state.step)
    v_hat = state.v[rows] / (1.0 - b2 ** state.step)
    out[rows] -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    split: str
    metrics: dict
    wall_time: float
    improved: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    # per-epoch streams make a resumed run replay the same batches
    return np.random.default_rng([seed, epoch])


@dataclass
class TrainState:
    """Everything needed to continue a run exactly where it stopped."""

    e0: np.ndarray
    best_e0: np.ndarray
    m: np.ndarray
    v: np.ndarray
    adam_step: int
    best_metric: float
    stale: int
    next_epoch: int


def save_train_state(state: TrainState, path: str | os.PathLike) -> None:
    meta = {"adam_step": state.adam_step, "best_metric": state.best_metric,
            "stale": state.stale, "next_epoch": state.next_epoch}
    with open(path, "wb") as fh:
        np.savez(fh, e0=state.e0, best_e0=state.best_e0, m=state.m, v=state.v,
                 meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))


def load_train_state(path: str | os.PathLike) -> TrainState:
    with np.load(path) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        return TrainState(z["e0"], z["best_e0"], z["m"], z["v"], int(meta["adam_step"]),
                          float(meta["best_metric"]), int(meta["stale"]), int(meta["next_epoch"]))


def train(
    split: SplitDataset,
    adj: SparseAdjacency,
    filt: FilterSpec,
    cfg: TrainConfig,
    space_flip: bool = False,
    initial_e0: np.ndarray | None = None,
    resume: TrainState | None = None,
    telemetry: TextIO | None = None,
    on_epoch: Callable[[EpochRecord, TrainState], None] | None = None,
) -> tuple[EmbeddingModel, list[EpochRecord]]:
    """Train E0 with BPR + L2 and early stopping on validation Recall@k.

    Returns the best model seen (by validation Recall@``cfg.eval_cutoff``)
    and the per-epoch records. The test split is never read. ``resume``
    continues a run from a saved :class:`TrainState`; together with the
    per-epoch sampler streams the continued epochs match an uninterrupted run.
    """
    coeffs = filt.propagation_coefficients()
    if resume is not None:
        e0 = np.array(resume.e0, dtype=np.float64)
    elif initial_e0 is None:
        e0 = xavier_uniform(adj.node_count, cfg.embedding_dim, np.random.default_rng(cfg.init_seed))
    else:
        e0 = np.array(initial_e0, dtype=np.float64)
    if e0.shape[0] != adj.node_count:
        raise ValueError(f"embedding table has {e0.shape[0]} rows, graph has {adj.node_count} nodes")
    model = EmbeddingModel(adj, e0, coeffs, space_flip)
    model.refresh()
    records: list[EpochRecord] = []
    if cfg.max_epochs == 0:
        return model, records

    sampler = BPRSampler(split, cfg.max_rejections)
    n_batches = math.ceil(len(sampler.users) / cfg.batch_size)
    adam = AdamState(e0.shape, cfg.beta1, cfg.beta2, cfg.eps)
    best_e0, best_metric, stale, start = model.e0.copy(), -1.0, 0, 0
    if resume is not None:
        adam.m, adam.v, adam.step = resume.m.copy(), resume.v.copy(), resume.adam_step
        best_e0, best_metric, stale, start = resume.best_e0.copy(), resume.best_metric, resume.stale, resume.next_epoch
    last_finite = start - 1 if start else None

    for epoch in range(start, cfg.max_epochs):
        if stale >= cfg.early_stop_patience:
            break
        t0 = time.perf_counter()
        rng = _epoch_rng(cfg.sampler_seed, epoch)
        total = 0.0
        for _ in range(n_batches):
            batch = sampler.sample(cfg.batch_size, rng)
            model.refresh()
            loss = batch_objective(model, batch, cfg.reg_weight)
            if not math.isfinite(loss):
                raise NumericalError(f"non-finite loss in epoch {epoch}; last finite epoch: {last_finite}")
            grad = backward(model, batch, cfg.reg_weight)
            model.e0 = adam_step(model.e0, grad, adam, cfg.learning_rate)
            total += loss
        model.refresh()
        report = evaluate(model, split, ks=(cfg.eval_cutoff,), target="validation")
        metric = report.recall(cfg.eval_cutoff)
        improved = metric > best_metric
        if improved:
            best_metric, best_e0, stale = metric, model.e0.copy(), 0
        else:
            stale += 1
        last_finite = epoch
        rec = EpochRecord(
            epoch=epoch,
            loss=total / n_batches,
            split="validation",
            metrics={f"recall@{cfg.eval_cutoff}": metric, f"ndcg@{cfg.eval_cutoff}": report.ndcg(cfg.eval_cutoff)},
            wall_time=time.perf_counter() - t0,
            improved=improved,
        )
        records.append(rec)
        if telemetry is not None:
            telemetry.write(rec.to_json() + "\n")
            telemetry.flush()
        if on_epoch is not None:
            on_epoch(rec, TrainState(model.e0, best_e0, adam.m, adam.v, adam.step, best_metric, stale, epoch + 1))
        log.info("epoch %d loss %.5f val recall@%d %.4f", epoch, rec.loss, cfg.eval_cutoff, metric)

    model.e0 = best_e0
    model.refresh()
    return model, records
