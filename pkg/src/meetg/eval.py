"""Classification metrics, timing, and the operation-count cost model."""

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "PrecisionRecall",
    "EvalReport",
    "CostEstimate",
    "confusion_matrix",
    "precision_recall",
    "evaluate",
    "cost_estimate",
    "timed",
]

log = logging.getLogger(__name__)


def confusion_matrix(true_labels, predicted_labels, m):
    """Count matrix, rows = true class, columns = predicted class."""
    t = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted_labels, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise ValueError(f"label vectors differ in length: {t.shape[0]} vs {p.shape[0]}")
    for name, v in (("true", t), ("predicted", p)):
        if v.size and (v.min() < 0 or v.max() >= m):
            raise ValueError(f"{name} labels must lie in [0, {m})")
    return np.bincount(t * m + p, minlength=m * m).reshape(m, m)


class PrecisionRecall(NamedTuple):
    precision: np.ndarray
    recall: np.ndarray
    macro_precision: float
    macro_recall: float


def precision_recall(confusion):
    """Per-class and macro-averaged precision and recall.

    A class nobody predicted has undefined precision (NaN), a class absent
    from the truth has undefined recall (NaN). Undefined entries are left out
    of the macro mean; if every entry is undefined the macro value is NaN.
    """
    c = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(c)
    predicted = c.sum(axis=0)
    actual = c.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, np.nan)
        recall = np.where(actual > 0, tp / actual, np.nan)

    def macro(v):
        defined = v[~np.isnan(v)]
        return float(defined.mean()) if defined.size else float("nan")

    return PrecisionRecall(precision, recall, macro(precision), macro(recall))


@dataclass
class EvalReport:
    confusion: np.ndarray
    accuracy: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    macro_precision: float
    macro_recall: float
    train_seconds: float = 0.0
    test_seconds: float = 0.0
    undefined_precision: list = field(default_factory=list)
    undefined_recall: list = field(default_factory=list)

    @property
    def n_test(self):
        return int(self.confusion.sum())


def evaluate(true_labels, predicted_labels, m, train_seconds=0.0, test_seconds=0.0):
    conf = confusion_matrix(true_labels, predicted_labels, m)
    pr = precision_recall(conf)
    n = conf.sum()
    return EvalReport(
        confusion=conf,
        accuracy=float(np.trace(conf) / n) if n else float("nan"),
        per_class_precision=pr.precision,
        per_class_recall=pr.recall,
        macro_precision=pr.macro_precision,
        macro_recall=pr.macro_recall,
        train_seconds=train_seconds,
        test_seconds=test_seconds,
        undefined_precision=[int(i) for i in np.flatnonzero(np.isnan(pr.precision))],
        undefined_recall=[int(i) for i in np.flatnonzero(np.isnan(pr.recall))],
    )


@dataclass(frozen=True)
class CostEstimate:
    per_expert_ops: tuple
    gating_ops: int
    combine_ops: int

    @property
    def total_ops(self):
        return sum(self.per_expert_ops) + self.gating_ops + self.combine_ops


def cost_estimate(config, n_train, d, m, gating_formula="symmetric"):
    """Training-phase operation counts for a mixture.

    Each expert costs ``n_train * d * L_e``. The gate costs ``n_train * d * L_g``
    with ``gating_formula="symmetric"``; ``"per-output"`` multiplies that by the
    gate's output count ``k``. Combining costs ``m * k``.
    """
    for name, v in (("n_train", n_train), ("d", d), ("m", m)):
        if v < 1:
            raise ValueError(f"{name} must be positive, got {v}")
    k = config.n_experts
    per_expert = tuple(n_train * d * config.expert_hidden for _ in range(k))
    if gating_formula == "symmetric":
        gating = n_train * d * config.gate_hidden
    elif gating_formula == "per-output":
        gating = n_train * d * config.gate_hidden * k
    else:
        raise ValueError(f"unknown gating_formula {gating_formula!r}")
    return CostEstimate(per_expert, gating, m * k)


def timed(label, computation, *args, **kwargs):
    """Run ``computation(*args, **kwargs)`` and return ``(result, seconds)``."""
    start = time.perf_counter()
    result = computation(*args, **kwargs)
    seconds = time.perf_counter() - start
    log.debug("%s took %.6f s", label, seconds)
    return result, seconds
