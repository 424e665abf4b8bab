"""F1 and PD-S (FNR at a bounded FPR) over scored predictions.

A prediction is positive iff its score is greater than or equal to the threshold.
"""
import json
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix, roc_curve

from .corpus.records import Label
from .errors import DiscretePredictionsError, MetricError, SchemaError

logger = logging.getLogger(__name__)

__default_r__ = 0.005
__default_threshold__ = 0.5


@dataclass(frozen=True)
class ScoredPrediction:
    record_id: str
    score: float
    label: Label

    @property
    def is_positive(self) -> bool:
        return self.label.is_vfc


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    @staticmethod
    def _ratio(numerator: int, denominator: int) -> float:
        return numerator / denominator if denominator else 0.0

    @property
    def fpr(self) -> float:
        return self._ratio(self.fp, self.fp + self.tn)

    @property
    def tpr(self) -> float:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def fnr(self) -> float:
        return self._ratio(self.fn, self.tp + self.fn)

    @property
    def precision(self) -> float:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return self.tpr

    @property
    def f1(self) -> float:
        return self._ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    def as_dict(self) -> dict:
        return {
            'threshold': self.threshold if math.isfinite(self.threshold) else 'inf',
            'tp': self.tp, 'fp': self.fp, 'tn': self.tn, 'fn': self.fn,
            'fpr': self.fpr, 'fnr': self.fnr, 'precision': self.precision, 'recall': self.recall, 'f1': self.f1,
        }


def _arrays(preds: Sequence[ScoredPrediction]):
    preds = list(preds)
    if not preds:
        raise MetricError('No predictions')
    ids = [p.record_id for p in preds]
    if len(set(ids)) != len(ids):
        raise MetricError('Prediction ids are not unique')
    scores = np.array([p.score for p in preds], dtype=float)
    if not np.all(np.isfinite(scores)):
        raise MetricError('Scores must be finite')
    labels = np.array([1 if p.is_positive else 0 for p in preds], dtype=int)
    return scores, labels


def f1_at(preds: Sequence[ScoredPrediction], threshold: float = __default_threshold__) -> OperatingPoint:
    """Returns the operating point at `threshold`.

    :raises MetricError: on empty input
    """
    scores, labels = _arrays(preds)
    predicted = (scores >= threshold).astype(int)
    tn, fp, fn, tp = confusion_matrix(labels, predicted, labels=[0, 1]).ravel()
    return OperatingPoint(float(threshold), int(tp), int(fp), int(tn), int(fn))


def threshold_sweep(preds: Sequence[ScoredPrediction]) -> List[OperatingPoint]:
    """Returns one operating point per candidate threshold: +inf, then every distinct score descending.

    :raises MetricError: on empty input
    """
    scores, labels = _arrays(preds)
    positives, negatives = int(labels.sum()), int(len(labels) - labels.sum())
    distinct = np.unique(scores)[::-1]
    if positives and negatives:
        fpr, tpr, thresholds = roc_curve(labels, scores, drop_intermediate=False)
        # the first threshold is a sentinel above every score
        tp = np.rint(tpr[1:] * positives).astype(int)
        fp = np.rint(fpr[1:] * negatives).astype(int)
        distinct = thresholds[1:]
    else:
        order = np.argsort(-scores, kind='stable')
        ranked, ranked_labels = scores[order], labels[order]
        last = np.r_[np.flatnonzero(np.diff(ranked)), len(ranked) - 1]
        tp = np.cumsum(ranked_labels)[last]
        fp = np.cumsum(1 - ranked_labels)[last]
    points = [OperatingPoint(math.inf, 0, 0, negatives, positives)]
    for threshold, t, f in zip(distinct, tp, fp):
        points.append(OperatingPoint(float(threshold), int(t), int(f), negatives - int(f), positives - int(t)))
    return points


def pd_s(preds: Sequence[ScoredPrediction], r: float = __default_r__, allow_discrete: bool = False) -> float:
    """FNR at the most permissive threshold whose FPR is at most `r`.

    Among compliant thresholds the one with maximal TPR is chosen, ties going to
    the lower FPR and then the higher threshold.

    :param preds: scored predictions
    :param r: false-positive budget
    :param allow_discrete: compute the value even when every score is 0 or 1
    :raises MetricError: when `r` is outside [0, 1] or a label class is missing
    :raises DiscretePredictionsError: when every score is 0 or 1 and `allow_discrete` is not set
    """
    if not 0.0 <= r <= 1.0:
        raise MetricError('r must be in [0, 1], got %r' % r)
    scores, labels = _arrays(preds)
    if labels.all() or not labels.any():
        raise MetricError('PD-S needs at least one positive and one negative prediction')
    if np.all((scores == 0.0) | (scores == 1.0)):
        if not allow_discrete:
            raise DiscretePredictionsError('PD-S cannot be computed from discrete 0/1 predictions')
        logger.warning('PD-S computed from discrete 0/1 predictions: only one operating point is available')
    negatives = int(len(labels) - labels.sum())
    best = None
    for point in threshold_sweep(preds):
        if point.fp > r * negatives + 1e-12:
            continue
        key = (point.tpr, -point.fpr, point.threshold)
        if best is None or key > best[0]:
            best = (key, point)
    return best[1].fnr


def read_predictions(path: str) -> List[ScoredPrediction]:
    """Reads a line-delimited prediction file of `{id, score, label}` objects.

    :raises SchemaError: on a malformed line
    """
    predictions = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                predictions.append(ScoredPrediction(str(data['id']), float(data['score']), Label.parse(data['label'])))
            except (ValueError, KeyError, TypeError, SchemaError) as e:
                raise SchemaError('%s line %d: %s' % (path, lineno, e))
    return predictions


def evaluate(preds: Sequence[ScoredPrediction], threshold: float = __default_threshold__,
             r: float = __default_r__, allow_discrete: bool = False) -> dict:
    """Builds the metric report: F1 at `threshold` and PD-S at `r`.

    PD-S is null for discrete predictions unless `allow_discrete` is set.
    """
    report = {'count': len(preds), 'threshold': threshold, 'r': r}
    report.update(f1_at(preds, threshold).as_dict())
    try:
        report['pd_s'] = pd_s(preds, r, allow_discrete)
    except DiscretePredictionsError as e:
        logger.warning(str(e))
        report['pd_s'] = None
        report['pd_s_error'] = str(e)
    return report
