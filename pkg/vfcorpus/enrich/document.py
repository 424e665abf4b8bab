"""The enriched diff: per-function merged lines with tags and provenance.
"""
import enum
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from ..budget import Document, DocumentLine
from ..diff import LineClass
from ..errors import SchemaError


class LineTag(enum.Enum):
    ADDED = 'changed+'
    DELETED = 'changed-'
    CONTROL = 'ctx-control'
    DATAFLOW = 'ctx-dataflow'
    STATEMENT = 'ctx-statement'
    CONTEXT = 'context'
    HEADER = 'header'

    @property
    def marker(self) -> str:
        return _TAG_MARKERS.get(self, ' ')

    @property
    def line_class(self) -> LineClass:
        if self in (LineTag.ADDED, LineTag.DELETED):
            return LineClass.CHANGE
        if self is LineTag.HEADER:
            return LineClass.HEADER
        return LineClass.CONTEXT

    @property
    def is_change(self) -> bool:
        return self in (LineTag.ADDED, LineTag.DELETED)


_TAG_MARKERS = {LineTag.ADDED: '+', LineTag.DELETED: '-', LineTag.HEADER: ''}


@dataclass(frozen=True)
class EnrichedLine:
    """One output line. `provenance` is empty for changed and header lines."""
    tag: LineTag
    text: str
    provenance: str = ''
    old_lineno: Optional[int] = None
    new_lineno: Optional[int] = None

    def render(self) -> str:
        return self.tag.marker + self.text

    def as_dict(self) -> dict:
        data = {'text': self.text, 'tag': self.tag.value, 'provenance': self.provenance}
        if self.old_lineno is not None:
            data['old_lineno'] = self.old_lineno
        if self.new_lineno is not None:
            data['new_lineno'] = self.new_lineno
        return data


@dataclass(frozen=True)
class EnrichedSection:
    """The lines emitted for one function, one residual region, or one fallback file."""
    path: str
    function: Optional[str] = None
    lines: Tuple[EnrichedLine, ...] = ()
    fallback: Optional[str] = None


@dataclass
class EnrichedDiff:
    """A commit's enriched diff at one enrichment level."""
    level: str
    sections: List[EnrichedSection] = field(default_factory=list)
    message: Optional[str] = None
    record_id: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def lines(self) -> Iterator[EnrichedLine]:
        for section in self.sections:
            yield from section.lines

    def changed_lines(self) -> List[EnrichedLine]:
        return [line for line in self.lines() if line.tag.is_change]

    def context_lines(self) -> List[EnrichedLine]:
        return [line for line in self.lines() if line.tag.line_class is LineClass.CONTEXT]

    @property
    def fallbacks(self) -> List[EnrichedSection]:
        return [section for section in self.sections if section.fallback]

    def render(self, with_message: bool = True) -> str:
        """Renders the unified-diff flavored text form."""
        out = []
        if with_message and self.message:
            out.extend(self.message.splitlines())
        out.extend(line.render() for line in self.lines())
        return '\n'.join(out) + '\n' if out else ''

    def as_document(self, with_message: bool = True) -> Document:
        lines = []
        if with_message and self.message:
            lines.extend(DocumentLine(LineClass.MESSAGE, text) for text in self.message.splitlines())
        for index, section in enumerate(self.sections):
            for line in section.lines:
                lines.append(DocumentLine(line.tag.line_class, line.text, line.tag.marker, index, section.path,
                                          line.old_lineno, line.new_lineno))
        return Document(tuple(lines))

    def to_record(self) -> dict:
        """Returns the annotated record form."""
        return {
            'level': self.level,
            'message': self.message,
            'metadata': dict(self.metadata),
            'sections': [{
                'path': section.path,
                'function': section.function,
                'fallback': section.fallback,
                'lines': [line.as_dict() for line in section.lines],
            } for section in self.sections],
        }

    @classmethod
    def from_record(cls, data: dict, record_id: Optional[str] = None) -> 'EnrichedDiff':
        """Rebuilds an enriched diff from its annotated record form.

        :raises SchemaError: when the record is malformed
        """
        try:
            sections = []
            for section in data.get('sections', []):
                lines = tuple(EnrichedLine(LineTag(line['tag']), line['text'], line.get('provenance', ''),
                                           line.get('old_lineno'), line.get('new_lineno'))
                              for line in section.get('lines', []))
                sections.append(EnrichedSection(section['path'], section.get('function'), lines,
                                                section.get('fallback')))
            return cls(level=data['level'], sections=sections, message=data.get('message'),
                       record_id=record_id, metadata=dict(data.get('metadata') or {}))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError('Malformed enriched record: %s' % e)
