"""Training-objective evaluation and classification/midline metrics.

Coordinates everywhere are ``[xs, ys, xe, ye]`` in normalized image units.
Per-class precision (or recall) is ``None`` when its denominator is zero;
such values are left out of macro averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, UndefinedDirectionError, ValidationError
from .model.spec import CLASSES

PROB_FLOOR = 1e-12
COUNTDOWN = (CLASSES.index("countdown_green"), CLASSES.index("countdown_blank"))
NONE_CLASS = CLASSES.index("none")


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.lam}")


def _class_index(truth, n=len(CLASSES)) -> int:
    if isinstance(truth, str):
        if truth not in CLASSES:
            raise ValidationError(f"unknown class {truth!r}")
        return CLASSES.index(truth)
    if isinstance(truth, (bool, np.bool_)) or not 0 <= int(truth) < n or int(truth) != truth:
        raise ValidationError(f"invalid class index {truth!r}")
    return int(truth)


def cross_entropy(probabilities, truth) -> float:
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    t = _class_index(truth, p.size)
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValidationError(f"probabilities sum to {p.sum()}, not 1")
    return -math.log(max(p[t], PROB_FLOOR))


def mse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != (4,) or truth.shape != (4,):
        raise ValidationError(f"mse expects two length-4 arrays, got {pred.shape} and {truth.shape}")
    return float(np.mean((truth - pred) ** 2))


def combine(ce: float, reg: float, config: LossConfig = LossConfig()) -> float:
    return config.lam * ce + (1.0 - config.lam) * reg


def combined_loss(probabilities, pred_coords, truth_class, truth_coords, config=LossConfig()) -> float:
    """Weighted sum of cross-entropy and coordinate MSE for one sample."""
    return combine(cross_entropy(probabilities, truth_class), mse(pred_coords, truth_coords), config)


def direction_vector(coords) -> np.ndarray:
    xs, ys, xe, ye = np.asarray(coords, dtype=np.float64).reshape(4)
    return np.array([xe - xs, ye - ys])


def angle_between(u, v) -> float:
    """Unsigned angle in degrees between two 2-D vectors, in [0, 180]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = math.hypot(*u), math.hypot(*v)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedDirectionError("direction vector has zero length")
    # arccos of the normalized dot product, evaluated as atan2(|u x v|, u . v):
    # same angle, but without acos's precision loss next to 0 and 180 degrees
    u, v = u / nu, v / nv
    cross = abs(u[0] * v[1] - u[1] * v[0])
    dot = min(1.0, max(-1.0, float(u[0] * v[0] + u[1] * v[1])))
    return math.degrees(math.atan2(cross, dot))


def angle_error(pred_coords, truth_coords) -> float:
    return angle_between(direction_vector(pred_coords), direction_vector(truth_coords))


def endpoint_errors(pred_coords, truth_coords) -> tuple[float, float]:
    p = np.asarray(pred_coords, dtype=np.float64).reshape(4)
    t = np.asarray(truth_coords, dtype=np.float64).reshape(4)
    return math.hypot(p[0] - t[0], p[1] - t[1]), math.hypot(p[2] - t[2], p[3] - t[3])


def ptlr_remap(class_index: int) -> int:
    """Collapse both countdown classes into ``none`` (red/green/none datasets)."""
    c = _class_index(class_index)
    return NONE_CLASS if c in COUNTDOWN else c


def _mean(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


@dataclass
class EvalReport:
    confusion: np.ndarray  # rows: truth, cols: prediction
    precision: list
    recall: list
    f1: list
    mean_angle_error: Optional[float]
    mean_startpoint_error: float
    mean_endpoint_error: float
    angle_samples: int
    classes: tuple = CLASSES
    remapped: bool = False

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion)) / self.total

    def to_dict(self) -> dict:
        per_class = {
            name: {
                "precision": self.precision[i],
                "recall": self.recall[i],
                "f1": self.f1[i],
                "support": int(self.confusion[i].sum()),
            }
            for i, name in enumerate(self.classes)
        }
        return {
            "samples": self.total,
            "accuracy": self.accuracy,
            "remap_ptlr": self.remapped,
            "classes": list(self.classes),
            "per_class": per_class,
            "macro_precision": _mean(self.precision),
            "macro_recall": _mean(self.recall),
            "macro_f1": _mean(self.f1),
            "confusion": self.confusion.tolist(),
            "mean_angle_error_deg": self.mean_angle_error,
            "angle_samples": self.angle_samples,
            "mean_startpoint_error": self.mean_startpoint_error,
            "mean_endpoint_error": self.mean_endpoint_error,
        }


def eval_report(predictions: Sequence, truths: Sequence, remap_ptlr=False) -> EvalReport:
    """Score predictions against labels.

    Each item needs ``class_index`` and ``coords`` attributes (a
    :class:`~lytnet.model.Prediction`, a label record, or an :class:`Outcome`).
    """
    if len(predictions) != len(truths):
        raise ValidationError(f"{len(predictions)} predictions vs {len(truths)} labels")
    if not predictions:
        raise ValidationError("cannot evaluate an empty set")
    n = len(CLASSES)
    confusion = np.zeros((n, n), dtype=np.int64)
    angles, starts, ends = [], [], []
    for pred, truth in zip(predictions, truths):
        p = pred.class_index
        if remap_ptlr:
            p = ptlr_remap(p)
        confusion[_class_index(truth.class_index), _class_index(p)] += 1
        try:
            angles.append(angle_error(pred.coords, truth.coords))
        except UndefinedDirectionError:
            pass
        sp, ep = endpoint_errors(pred.coords, truth.coords)
        starts.append(sp)
        ends.append(ep)

    precision, recall, f1 = [], [], []
    for c in range(n):
        tp = int(confusion[c, c])
        predicted = int(confusion[:, c].sum())
        actual = int(confusion[c, :].sum())
        prec = tp / predicted if predicted else None
        rec = tp / actual if actual else None
        if prec is None or rec is None:
            f = None
        elif prec + rec == 0:
            f = 0.0
        else:
            f = 2 * prec * rec / (prec + rec)
        precision.append(prec)
        recall.append(rec)
        f1.append(f)

    return EvalReport(
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        mean_angle_error=_mean(angles),
        mean_startpoint_error=sum(starts) / len(starts),
        mean_endpoint_error=sum(ends) / len(ends),
        angle_samples=len(angles),
        remapped=remap_ptlr,
    )


@dataclass(frozen=True)
class Outcome:
    """Minimal (class, coords) pair accepted by :func:`eval_report`."""

    class_index: int
    coords: tuple = field(default=(0.0, 0.0, 0.0, 0.0))
