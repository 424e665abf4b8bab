"""Base class for corpus tasks.
"""
import concurrent.futures
import hashlib
import itertools
import json
import logging
import os
import platform
import sys
from importlib import metadata
from typing import Callable, Iterable, Iterator, List, Optional, Sequence

from deriva.core import format_exception
from tqdm import tqdm

from .. import __version__
from ..options import PipelineConfig

__manifest_suffix__ = '.manifest.json'
__chunk_per_worker__ = 32

_PACKAGES = ('deriva', 'numpy', 'scipy', 'scikit-learn', 'tree-sitter', 'tree-sitter-c', 'tree-sitter-cpp',
             'GitPython', 'tqdm')

logger = logging.getLogger(__name__)


def manifest_path(output: str) -> str:
    return output + __manifest_suffix__


def file_digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            sha.update(block)
    return sha.hexdigest()


def versions() -> dict:
    """Returns the versions of this package, the interpreter and the installed dependencies."""
    found = {'vfcorpus': __version__, 'python': platform.python_version()}
    for package in _PACKAGES:
        try:
            found[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            found[package] = None
    return found


def write_json(data, path: Optional[str]) -> None:
    """Writes `data` as indented JSON to `path`, or to stdout when `path` is empty."""
    if not path:
        json.dump(data, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write('\n')
        return
    with open(path, 'w', encoding='utf-8') as fp:
        json.dump(data, fp, indent=2, sort_keys=True)
        fp.write('\n')


def ordered_map(fn: Callable, items: Iterable, jobs: int = 1) -> Iterator:
    """Maps `fn` over `items` in input order, on up to `jobs` worker processes.

    Items are submitted in bounded chunks so the input is never fully materialized.
    """
    if jobs <= 1:
        yield from map(fn, items)
        return
    items = iter(items)
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
        while True:
            chunk = list(itertools.islice(items, jobs * __chunk_per_worker__))
            if not chunk:
                break
            yield from executor.map(fn, chunk)


class CorpusTask(object):
    """Base class for corpus tasks: runs one command, tracks its outputs and writes the manifest.

    A failed task removes the outputs it created. The outcome is reported through
    `set_status` as `(success, status, detail, result)`.
    """

    command = None
    title = None

    def __init__(self, config: PipelineConfig, inputs: Sequence[str], output: Optional[str] = None,
                 quiet: bool = False, argv: Optional[Sequence[str]] = None):
        self.config = config
        self.inputs = [path for path in inputs if path]
        self.output = output
        self.quiet = quiet
        self.argv = list(argv or [])
        self.counts = {}
        self.details = {}
        self.outputs: List[str] = []
        self.success = None
        self.status = ''
        self.detail = ''
        self.result = None

    def set_status(self, success, status, detail, result):
        self.success = success
        self.status = status
        self.detail = detail
        self.result = result
        if success:
            logger.info('%s %s' % (status, ', '.join('%s=%s' % item for item in sorted(self.counts.items()))))
        else:
            logger.error('%s %s' % (status, detail))

    def result_callback(self, success, result):
        self.set_status(success,
                        "%s task success." % self.title if success else "%s task failed." % self.title,
                        "" if success else format_exception(result),
                        result if success else None)

    def progress(self, iterable: Iterable, total: Optional[int] = None, desc: Optional[str] = None):
        return tqdm(iterable, total=total, desc=desc or self.command, unit='rec', disable=self.quiet,
                    file=sys.stderr, leave=False)

    def track(self, path: Optional[str]) -> Optional[str]:
        """Registers a file this task creates so that a failure removes it."""
        if path:
            self.outputs.append(path)
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
        return path

    def run(self):
        raise NotImplementedError()

    def start(self):
        """Runs the task; re-raises the failure after cleaning up."""
        try:
            result = self.run()
            if self.output:
                self.write_manifest()
        except BaseException as e:
            self.discard_outputs()
            self.result_callback(False, e)
            raise
        self.result_callback(True, result)
        return result

    def discard_outputs(self) -> None:
        for path in self.outputs + [manifest_path(p) for p in self.outputs]:
            if os.path.isfile(path):
                try:
                    os.remove(path)
                    logger.debug('Removed partial output %s' % path)
                except OSError as e:
                    logger.warning('Unable to remove partial output %s: %s' % (path, e))

    def manifest(self) -> dict:
        return {
            'command': self.command,
            'argv': self.argv,
            'inputs': [{'path': path, 'sha256': file_digest(path)} for path in self.inputs],
            'output': self.output,
            'config': self.config.as_dict(),
            'versions': versions(),
            'counts': dict(self.counts),
            'details': self.details,
        }

    def write_manifest(self) -> str:
        path = self.track(manifest_path(self.output))
        write_json(self.manifest(), path)
        return path
