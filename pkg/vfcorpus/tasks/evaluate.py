"""Evaluation of external classifier scores.
"""
import logging

from ..metrics import evaluate, pd_s, read_predictions, threshold_sweep
from .base import CorpusTask, write_json

__reported_budgets__ = (0.0, 0.001, 0.005, 0.01, 0.05, 0.1)

logger = logging.getLogger(__name__)


class EvalTask(CorpusTask):
    """F1 at the threshold, PD-S at `r`, and PD-S over a range of false-positive budgets."""

    command = 'eval'
    title = 'Eval'

    def __init__(self, *args, sweep: bool = False, allow_discrete: bool = False, **kwargs):
        super(EvalTask, self).__init__(*args, **kwargs)
        self.sweep = sweep
        self.allow_discrete = allow_discrete

    def run(self):
        predictions = read_predictions(self.inputs[0])
        report = evaluate(predictions, self.config.threshold, self.config.r, self.allow_discrete)
        if report.get('pd_s') is not None:
            report['pd_s_by_r'] = {'%g' % budget: pd_s(predictions, budget, self.allow_discrete)
                                   for budget in sorted(set(__reported_budgets__) | {self.config.r})}
        if self.sweep:
            report['sweep'] = [point.as_dict() for point in threshold_sweep(predictions)]
        write_json(report, self.track(self.output))
        self.counts.update(predictions=len(predictions))
        return report
