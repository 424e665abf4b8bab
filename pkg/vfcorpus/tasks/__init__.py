"""Corpus command tasks.
"""
from .base import CorpusTask, ordered_map
from .enrich import EnrichTask, TruncateTask
from .evaluate import EvalTask
from .records import DedupTask, FilterTask, IngestTask, build_criteria
from .split import SplitTask, TemporalScanTask
from .stats import StatsTask

TASKS = {task.command: task for task in (IngestTask, DedupTask, FilterTask, SplitTask, EnrichTask, TruncateTask,
                                         StatsTask, EvalTask, TemporalScanTask)}
