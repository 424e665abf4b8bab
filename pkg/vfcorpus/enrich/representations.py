"""The model-input representations of a commit.

`message`, `diff` (comment stripped), `commit` (message and diff), and the
enrichment levels `cf`, `df1`, `df2`.
"""
import enum
import logging

from ..budget import Document, as_document
from ..diff import CommitDiff
from ..errors import ConfigurationError
from .pipeline import enrich_commit, stripped_commit_diff
from .slicing import EnrichmentLevel

logger = logging.getLogger(__name__)


class Representation(enum.Enum):
    MESSAGE = 'message'
    DIFF = 'diff'
    COMMIT = 'commit'
    CF = 'cf'
    DF1 = 'df1'
    DF2 = 'df2'

    @classmethod
    def parse(cls, value) -> 'Representation':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError('Unknown representation "%s", expected one of: %s' % (
                value, ', '.join(r.value for r in cls)))

    @property
    def level(self):
        return EnrichmentLevel(self.value) if self in (Representation.CF, Representation.DF1,
                                                        Representation.DF2) else None


def render_representation(record, representation, snapshots=None, full_chain: bool = False):
    """Builds one representation of a commit record.

    :param record: the `CommitRecord`
    :param representation: a `Representation` or its name
    :param snapshots: snapshot provider used by the stripped and enriched forms
    :param full_chain: passed to enrichment
    :return: a `CommitDiff` (holding only the message for the message form) or an `EnrichedDiff`
    """
    representation = Representation.parse(representation)
    if representation is Representation.MESSAGE:
        return CommitDiff(message=record.message or '')
    if representation in (Representation.DIFF, Representation.COMMIT):
        stripped = stripped_commit_diff(record, snapshots)
        if representation is Representation.DIFF:
            return CommitDiff(files=stripped.files, lossy=stripped.lossy)
        return stripped
    return enrich_commit(record, snapshots, representation.level, full_chain=full_chain)


def representation_document(record, representation, snapshots=None, full_chain: bool = False) -> Document:
    """Returns the token-accountable document of one representation."""
    return as_document(render_representation(record, representation, snapshots, full_chain))
