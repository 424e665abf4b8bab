"""Enrichment and truncation tasks.
"""
import functools
import json
import logging
from typing import Iterator, Optional, Tuple

from ..budget import Document, as_document, get_tokenizer, truncate
from ..corpus.records import CommitRecord
from ..corpus.snapshots import SnapshotProvider, open_snapshot_provider
from ..diff import decode_text
from ..enrich.document import EnrichedDiff
from ..enrich.pipeline import enrich_commit
from ..enrich.representations import Representation, render_representation
from ..errors import EnrichmentError, SchemaError
from .base import CorpusTask, ordered_map
from .records import stream_records

__max_reported_skips__ = 100

logger = logging.getLogger(__name__)


def enrich_record(record: CommitRecord, provider: Optional[SnapshotProvider], level: str, full_chain: bool,
                  context_n: int, with_message: bool) -> Tuple[str, Optional[dict], Optional[str]]:
    """Enriches one record in a worker; returns `(record id, output line, error)`."""
    try:
        enriched = enrich_commit(record, provider, level, full_chain, context_n, with_message)
    except EnrichmentError as e:
        return record.record_id, None, str(e)
    return record.record_id, {
        'id': record.record_id,
        'label': record.label.value,
        'lossy': record.lossy or bool(enriched.metadata.get('lossy')),
        'enriched': enriched.to_record(),
        'text': enriched.render(with_message),
    }, None


def iter_documents(path: str, representation: Representation, provider: Optional[SnapshotProvider] = None,
                   full_chain: bool = False) -> Iterator[Tuple[str, Document, Optional[CommitRecord]]]:
    """Streams `(id, document, record)` from a record file or from `enrich` output.

    Lines of `enrich` output (holding an `enriched` object) are used as they
    are; record lines are rendered in the requested representation.

    :raises SchemaError: on a malformed line
    """
    with open(path, 'rb') as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            text, lossy = decode_text(raw)
            try:
                data = json.loads(text)
            except ValueError as e:
                raise SchemaError('%s line %d: %s' % (path, lineno, e))
            if isinstance(data, dict) and 'enriched' in data:
                record_id = str(data.get('id', lineno))
                yield record_id, EnrichedDiff.from_record(data['enriched'], record_id).as_document(), None
                continue
            try:
                record = CommitRecord.from_dict(data, lossy=lossy)
            except SchemaError as e:
                raise SchemaError('%s line %d: %s' % (path, lineno, e))
            rendered = render_representation(record, representation, provider, full_chain)
            yield record.record_id, as_document(rendered), record


class EnrichTask(CorpusTask):
    """Writes the enriched diff of every record at the configured level."""

    command = 'enrich'
    title = 'Enrich'

    def run(self):
        config = self.config
        provider = open_snapshot_provider(config.snapshot_store)
        worker = functools.partial(enrich_record, provider=provider, level=config.level,
                                   full_chain=config.full_chain, context_n=config.context_width,
                                   with_message=config.with_message)
        written, skipped, fallbacks = 0, [], 0
        with open(self.track(self.output), 'w', encoding='utf-8') as fp:
            results = ordered_map(worker, stream_records(self.inputs[0]), config.jobs)
            for record_id, line, error in self.progress(results):
                if line is None:
                    logger.warning('%s: skipped, %s' % (record_id, error))
                    skipped.append({'id': record_id, 'error': error})
                    continue
                fallbacks += len(line['enriched']['metadata'].get('fallbacks', []))
                fp.write(json.dumps(line, sort_keys=True, ensure_ascii=False))
                fp.write('\n')
                written += 1
        self.counts.update(records=written, skipped=len(skipped), fallback_files=fallbacks)
        self.details['skipped'] = skipped[:__max_reported_skips__]
        self.details['snapshot_backend'] = getattr(provider, 'backend', None)
        return written


class TruncateTask(CorpusTask):
    """Fits every document into the token limit and reports what was discarded."""

    command = 'truncate'
    title = 'Truncate'

    def run(self):
        config = self.config
        provider = open_snapshot_provider(config.snapshot_store)
        tokenizer = get_tokenizer(config.tokenizer)
        representation = Representation.parse(config.representation)
        affected = 0
        written = 0
        with open(self.track(self.output), 'w', encoding='utf-8') as fp:
            documents = iter_documents(self.inputs[0], representation, provider, config.full_chain)
            for record_id, document, _ in self.progress(documents):
                truncated, report = truncate(document, config.limit, tokenizer, config.truncation)
                affected += report.affected
                fp.write(json.dumps({'id': record_id, 'text': truncated.render(), 'report': report.as_dict()},
                                    sort_keys=True, ensure_ascii=False))
                fp.write('\n')
                written += 1
        self.counts.update(records=written, affected=affected)
        self.details.update(limit=config.limit, strategy=config.truncation, tokenizer=tokenizer.name,
                            tokenizer_mode=tokenizer.mode.value)
        return written
