"""File snapshots of commits: a content-addressed file cache and a local git backend.

Snapshots are keyed by `(repo, sha, side, path)`, where the `pre` side is the
file at the first parent of `sha`. A provider returns the exact bytes or `None`
for a definitive miss.
"""
import hashlib
import logging
import os
import threading
from typing import Dict, Optional, Tuple, Union

import git

from ..diff import decode_text
from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

PRE = 'pre'
POST = 'post'


class CommitSnapshots(object):
    """Per-commit view of a provider, answering `pre(path)` and `post(path)` with text."""

    def __init__(self, provider: 'SnapshotProvider', repo: str, sha: str):
        self.provider = provider
        self.repo = repo
        self.sha = sha
        self.lossy = False

    def _text(self, side: str, path: str) -> Optional[str]:
        data = self.provider.read(self.repo, self.sha, side, path)
        if data is None:
            return None
        text, lossy = decode_text(data)
        self.lossy = self.lossy or lossy
        return text

    def pre(self, path: str) -> Optional[str]:
        return self._text(PRE, path)

    def post(self, path: str) -> Optional[str]:
        return self._text(POST, path)


class SnapshotProvider(object):
    """Base class of snapshot backends; safe for concurrent readers."""
    backend = None

    def read(self, repo: str, sha: str, side: str, path: str) -> Optional[bytes]:
        raise NotImplementedError()

    def for_commit(self, repo: str, sha: str) -> CommitSnapshots:
        return CommitSnapshots(self, repo, sha)


def snapshot_key(repo: str, sha: str, side: str, path: str) -> str:
    return hashlib.sha256('\0'.join((repo, sha, side, path)).encode('utf-8')).hexdigest()


class FileCacheSnapshotProvider(SnapshotProvider):
    """Content-addressed store: `<root>/<key[:2]>/<key>` holds the bytes of one snapshot."""
    backend = 'file-cache'

    def __init__(self, root: str):
        self.root = root

    def location(self, repo: str, sha: str, side: str, path: str) -> str:
        key = snapshot_key(repo, sha, side, path)
        return os.path.join(self.root, key[:2], key)

    def read(self, repo: str, sha: str, side: str, path: str) -> Optional[bytes]:
        try:
            with open(self.location(repo, sha, side, path), 'rb') as f:
                return f.read()
        except FileNotFoundError:
            return None

    def store(self, repo: str, sha: str, side: str, path: str, data: Union[bytes, str]) -> str:
        """Writes one snapshot and returns its location."""
        if isinstance(data, str):
            data = data.encode('utf-8')
        location = self.location(repo, sha, side, path)
        os.makedirs(os.path.dirname(location), exist_ok=True)
        partial = location + '.partial'
        with open(partial, 'wb') as f:
            f.write(data)
        os.replace(partial, location)
        return location


class LocalGitSnapshotProvider(SnapshotProvider):
    """Reads snapshots from local clones.

    `root` is either a single repository used for every record, or a directory
    holding clones at `<root>/<host>/<owner>/<name>`.
    """
    backend = 'local-git'

    def __init__(self, root: str):
        self.root = root
        self._repos: Dict[str, Optional[git.Repo]] = {}
        self._lock = threading.Lock()

    def __getstate__(self):
        return {'root': self.root}

    def __setstate__(self, state):
        self.__init__(state['root'])

    def _repository(self, repo: str) -> Optional[git.Repo]:
        with self._lock:
            if repo not in self._repos:
                handle = None
                for candidate in (os.path.join(self.root, *repo.split('/')), self.root):
                    if os.path.isdir(candidate):
                        try:
                            handle = git.Repo(candidate)
                            break
                        except (git.exc.InvalidGitRepositoryError, git.exc.NoSuchPathError):
                            continue
                if handle is None:
                    logger.warning('No local clone of %s under %s' % (repo, self.root))
                self._repos[repo] = handle
            return self._repos[repo]

    def read(self, repo: str, sha: str, side: str, path: str) -> Optional[bytes]:
        handle = self._repository(repo)
        if handle is None:
            return None
        with self._lock:
            try:
                commit = handle.commit(sha)
                if side == PRE:
                    if not commit.parents:
                        return None
                    commit = commit.parents[0]
                blob = commit.tree / path
                return blob.data_stream.read()
            except KeyError:
                return None
            except (ValueError, git.exc.BadName, git.exc.GitCommandError) as e:
                logger.debug('Cannot resolve %s@%s:%s: %s' % (repo, sha, path, e))
                return None


class StaticSnapshots(SnapshotProvider):
    """In-memory snapshots, mostly for tests and small tools.

    Entries without a repo and sha (`single`) answer for every commit.
    """
    backend = 'static'

    def __init__(self, entries: Optional[Dict[Tuple[str, str, str, str], Union[bytes, str]]] = None):
        self.entries = dict(entries or {})

    @classmethod
    def single(cls, pre: Optional[Dict[str, str]] = None, post: Optional[Dict[str, str]] = None) -> 'StaticSnapshots':
        entries = {}
        for side, files in ((PRE, pre or {}), (POST, post or {})):
            for path, content in files.items():
                entries[('', '', side, path)] = content
        return cls(entries)

    def add(self, repo: str, sha: str, side: str, path: str, content: Union[bytes, str]) -> None:
        self.entries[(repo, sha, side, path)] = content

    def read(self, repo: str, sha: str, side: str, path: str) -> Optional[bytes]:
        content = self.entries.get((repo, sha, side, path), self.entries.get(('', '', side, path)))
        if content is None:
            return None
        return content.encode('utf-8') if isinstance(content, str) else content


def open_snapshot_provider(spec: Optional[str]) -> Optional[SnapshotProvider]:
    """Opens a provider from a store spec: `git:<path>`, `cache:<path>`, or a bare path.

    A bare path is a git backend when it is a repository or holds clones, and a
    file cache otherwise.

    :raises ConfigurationError: when the path does not exist
    """
    if not spec:
        return None
    backend, _, path = spec.partition(':') if spec.split(':', 1)[0] in ('git', 'cache') else ('', '', spec)
    path = os.path.expanduser(path)
    if not os.path.isdir(path):
        raise ConfigurationError('Snapshot store "%s" is not a directory' % path)
    if backend == 'git':
        return LocalGitSnapshotProvider(path)
    if backend == 'cache':
        return FileCacheSnapshotProvider(path)
    if os.path.isdir(os.path.join(path, '.git')):
        return LocalGitSnapshotProvider(path)
    return FileCacheSnapshotProvider(path)
