"""Structural matching of two syntax trees and extraction of changed statements.

Matching runs in two phases. The top-down phase greedily pairs isomorphic
subtrees from the highest down to `min_height`; the bottom-up phase pairs
containers whose matched descendants overlap enough, and aligns the remaining
children of every container it pairs. Actions are derived from the mapping:
unmatched nodes are deleted or inserted, matched leaves with different text are
updated, and matched nodes whose parents are not partners are moved.
"""
import difflib
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .syntax.ir import StatementIR
from .syntax.tree import SyntaxNode, SyntaxTree, iter_postorder

logger = logging.getLogger(__name__)

__min_height__ = 2
__sim_threshold__ = 0.5


class ActionKind(enum.Enum):
    INSERT = 'insert'
    DELETE = 'delete'
    UPDATE = 'update'
    MOVE = 'move'


class Side(enum.Enum):
    PRE = 'pre'
    POST = 'post'


@dataclass(frozen=True)
class Action:
    """An edit action; `pre` is unset for inserts and `post` for deletes."""
    kind: ActionKind
    pre: Optional[SyntaxNode] = None
    post: Optional[SyntaxNode] = None


@dataclass
class EditMapping:
    """Node correspondence between two trees and the derived edit actions."""
    pre: Optional[SyntaxTree]
    post: Optional[SyntaxTree]
    pairs: List[Tuple[SyntaxNode, SyntaxNode]] = field(default_factory=list)
    actions: List[Action] = field(default_factory=list)

    def count(self, kind: ActionKind) -> int:
        return sum(1 for action in self.actions if action.kind is kind)

    @property
    def is_identity(self) -> bool:
        return not self.actions


@dataclass(frozen=True)
class StatementSet:
    """Ids of the statements of one side of a function pair."""
    side: Side
    ids: frozenset = frozenset()

    def __len__(self):
        return len(self.ids)

    def __contains__(self, item):
        return item in self.ids


class _TreeIndex(object):
    """Post-order arrays over one tree."""

    def __init__(self, tree: Optional[SyntaxTree], interner: Dict[tuple, int]):
        self.nodes: List[SyntaxNode] = list(iter_postorder(tree.root)) if tree is not None else []
        position = {id(node): index for index, node in enumerate(self.nodes)}
        count = len(self.nodes)
        self.parent = [-1] * count
        self.children: List[List[int]] = [[] for _ in range(count)]
        self.height = [1] * count
        self.size = [1] * count
        self.signature = [0] * count
        for index, node in enumerate(self.nodes):
            children = [position[id(child)] for child in node.children]
            self.children[index] = children
            for child in children:
                self.parent[child] = index
            if children:
                self.height[index] = 1 + max(self.height[c] for c in children)
                self.size[index] = 1 + sum(self.size[c] for c in children)
            key = (node.kind, node.label, tuple(self.signature[c] for c in children))
            self.signature[index] = interner.setdefault(key, len(interner))
        self.occurrences = Counter(self.signature)

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    def low(self, index: int) -> int:
        """First post-order index of the subtree rooted at `index`."""
        return index - self.size[index] + 1

    def line(self, index: int) -> int:
        return self.nodes[index].start_line


class _HeightQueue(object):

    def __init__(self, index: _TreeIndex):
        self.index = index
        self.buckets: Dict[int, List[int]] = {}

    def push(self, node: int) -> None:
        self.buckets.setdefault(self.index.height[node], []).append(node)

    def open(self, node: int) -> None:
        for child in self.index.children[node]:
            self.push(child)

    def peek(self) -> int:
        return max(self.buckets) if self.buckets else 0

    def pop(self) -> List[int]:
        return sorted(self.buckets.pop(self.peek()))


class _Matcher(object):

    def __init__(self, pre: Optional[SyntaxTree], post: Optional[SyntaxTree], min_height: int,
                 sim_threshold: float):
        interner: Dict[tuple, int] = {}
        self.src = _TreeIndex(pre, interner)
        self.dst = _TreeIndex(post, interner)
        self.min_height = min_height
        self.sim_threshold = sim_threshold
        self.forward: Dict[int, int] = {}
        self.backward: Dict[int, int] = {}

    def link(self, a: int, b: int) -> None:
        if a in self.forward or b in self.backward:
            return
        if self.src.nodes[a].kind != self.dst.nodes[b].kind:
            return
        self.forward[a] = b
        self.backward[b] = a

    def link_subtrees(self, a: int, b: int) -> None:
        # isomorphic subtrees share their post-order layout
        low_a, low_b = self.src.low(a), self.dst.low(b)
        for offset in range(self.src.size[a]):
            self.link(low_a + offset, low_b + offset)

    def dice(self, a: int, b: int) -> float:
        if a < 0 or b < 0:
            return 0.0
        total = (self.src.size[a] - 1) + (self.dst.size[b] - 1)
        if not total:
            return 0.0
        low_b = self.dst.low(b)
        common = 0
        for d in range(self.src.low(a), a):
            partner = self.forward.get(d)
            if partner is not None and low_b <= partner < b:
                common += 1
        return 2.0 * common / total

    def top_down(self) -> None:
        if not self.src.nodes or not self.dst.nodes:
            return
        queue_src, queue_dst = _HeightQueue(self.src), _HeightQueue(self.dst)
        queue_src.push(self.src.root)
        queue_dst.push(self.dst.root)
        candidates = []
        while max(queue_src.peek(), queue_dst.peek()) >= self.min_height:
            if queue_src.peek() != queue_dst.peek():
                if queue_src.peek() > queue_dst.peek():
                    for node in queue_src.pop():
                        queue_src.open(node)
                else:
                    for node in queue_dst.pop():
                        queue_dst.open(node)
                continue
            level_src, level_dst = queue_src.pop(), queue_dst.pop()
            by_signature: Dict[int, List[int]] = {}
            for b in level_dst:
                by_signature.setdefault(self.dst.signature[b], []).append(b)
            seen_src, seen_dst = set(), set()
            for a in level_src:
                signature = self.src.signature[a]
                for b in by_signature.get(signature, ()):
                    if self.src.occurrences[signature] > 1 or self.dst.occurrences[signature] > 1:
                        candidates.append((a, b))
                    else:
                        self.link_subtrees(a, b)
                    seen_src.add(a)
                    seen_dst.add(b)
            for a in level_src:
                if a not in seen_src:
                    queue_src.open(a)
            for b in level_dst:
                if b not in seen_dst:
                    queue_dst.open(b)

        candidates.sort(key=lambda pair: (-self.dice(self.src.parent[pair[0]], self.dst.parent[pair[1]]),
                                          abs(self.src.line(pair[0]) - self.dst.line(pair[1])),
                                          pair[1], pair[0]))
        for a, b in candidates:
            if a not in self.forward and b not in self.backward:
                self.link_subtrees(a, b)

        # unique subtrees hidden below unresolved candidates
        unique_dst = {self.dst.signature[b]: b for b in range(len(self.dst.nodes))
                      if self.dst.occurrences[self.dst.signature[b]] == 1}
        for a in reversed(range(len(self.src.nodes))):
            signature = self.src.signature[a]
            if self.src.height[a] < self.min_height or self.src.occurrences[signature] != 1:
                continue
            b = unique_dst.get(signature)
            if b is not None and a not in self.forward and b not in self.backward:
                self.link_subtrees(a, b)

    def recover(self, a: int, b: int) -> None:
        """Aligns the unmatched children of a matched pair, recursively."""
        pending = [(a, b)]
        while pending:
            a, b = pending.pop()
            for by_kind in (False, True):
                kids_src = [c for c in self.src.children[a] if c not in self.forward]
                kids_dst = [c for c in self.dst.children[b] if c not in self.backward]
                if not kids_src or not kids_dst:
                    break
                if by_kind:
                    keys_src = [self.src.nodes[c].kind for c in kids_src]
                    keys_dst = [self.dst.nodes[c].kind for c in kids_dst]
                else:
                    keys_src = [self.src.signature[c] for c in kids_src]
                    keys_dst = [self.dst.signature[c] for c in kids_dst]
                matcher = difflib.SequenceMatcher(None, keys_src, keys_dst, autojunk=False)
                for block in matcher.get_matching_blocks():
                    for offset in range(block.size):
                        x, y = kids_src[block.a + offset], kids_dst[block.b + offset]
                        if by_kind:
                            self.link(x, y)
                            if self.forward.get(x) == y:
                                pending.append((x, y))
                        else:
                            self.link_subtrees(x, y)

    def bottom_up(self) -> None:
        if not self.src.nodes or not self.dst.nodes:
            return
        for a in range(len(self.src.nodes) - 1):
            if a in self.forward:
                continue
            kind = self.src.nodes[a].kind
            candidates = set()
            visited = set()
            for d in range(self.src.low(a), a):
                partner = self.forward.get(d)
                if partner is None:
                    continue
                ancestor = self.dst.parent[partner]
                while ancestor != -1 and ancestor not in visited:
                    visited.add(ancestor)
                    if ancestor not in self.backward and self.dst.nodes[ancestor].kind == kind:
                        candidates.add(ancestor)
                    ancestor = self.dst.parent[ancestor]
            if not candidates:
                continue
            scored = sorted((-self.dice(a, b), abs(self.src.line(a) - self.dst.line(b)), b) for b in candidates)
            score, _, best = scored[0]
            if -score >= self.sim_threshold:
                self.link(a, best)
                self.recover(a, best)
        root_src, root_dst = self.src.root, self.dst.root
        if root_src not in self.forward and root_dst not in self.backward:
            self.link(root_src, root_dst)
        if self.forward.get(root_src) == root_dst:
            self.recover(root_src, root_dst)

    def actions(self) -> List[Action]:
        actions = []
        for a, node in enumerate(self.src.nodes):
            b = self.forward.get(a)
            if b is None:
                actions.append(Action(ActionKind.DELETE, pre=node))
                continue
            partner = self.dst.nodes[b]
            if node.label != partner.label:
                actions.append(Action(ActionKind.UPDATE, pre=node, post=partner))
            parent = self.src.parent[a]
            if parent != -1 and self.forward.get(parent) != self.dst.parent[b]:
                actions.append(Action(ActionKind.MOVE, pre=node, post=partner))
        for b, node in enumerate(self.dst.nodes):
            if b not in self.backward:
                actions.append(Action(ActionKind.INSERT, post=node))
        return actions


def match_trees(pre: Optional[SyntaxTree], post: Optional[SyntaxTree], min_height: int = __min_height__,
                sim_threshold: float = __sim_threshold__) -> EditMapping:
    """Computes a structural mapping between two trees of the same language.

    Either tree may be `None` (an added or removed function); all nodes of the
    other tree are then inserted or deleted.

    :param pre: the pre-change tree
    :param post: the post-change tree
    :param min_height: minimum height of subtrees paired by the top-down phase
    :param sim_threshold: minimum dice similarity for pairing containers
    :return: the `EditMapping`, deterministic for equal inputs
    """
    matcher = _Matcher(pre, post, min_height, sim_threshold)
    matcher.top_down()
    matcher.bottom_up()
    pairs = [(matcher.src.nodes[a], matcher.dst.nodes[b]) for a, b in sorted(matcher.forward.items())]
    mapping = EditMapping(pre, post, pairs, matcher.actions())
    logger.debug('Matched %d node pairs, %d actions' % (len(pairs), len(mapping.actions)))
    return mapping


def format_actions(mapping: EditMapping) -> str:
    """Dumps the actions of a mapping as text, one action per line."""
    def describe(node: SyntaxNode) -> str:
        text = '%s@%d:%d' % (node.kind, node.start_line, node.start_byte)
        return text + (' %r' % node.label if node.label else '')

    lines = []
    for action in mapping.actions:
        if action.kind is ActionKind.INSERT:
            lines.append('insert %s' % describe(action.post))
        elif action.kind is ActionKind.DELETE:
            lines.append('delete %s' % describe(action.pre))
        else:
            lines.append('%s %s -> %s' % (action.kind.value, describe(action.pre), describe(action.post)))
    return '\n'.join(lines)


def _containing(ir: Optional[StatementIR], nodes: List[SyntaxNode]) -> frozenset:
    if ir is None:
        return frozenset()
    ids = set()
    for node in nodes:
        if node.start_byte == node.end_byte:
            continue
        for statement in ir:
            if statement.start_byte <= node.start_byte and node.end_byte <= statement.end_byte:
                ids.add(statement.id)
    return frozenset(ids)


def changed_statements(mapping: EditMapping, pre_ir: Optional[StatementIR],
                       post_ir: Optional[StatementIR]) -> Tuple[StatementSet, StatementSet]:
    """Returns the statements of each side whose span contains a node named in an action.

    Update and move actions mark statements on both sides.
    """
    pre_nodes, post_nodes = [], []
    for action in mapping.actions:
        if action.pre is not None:
            pre_nodes.append(action.pre)
        if action.post is not None:
            post_nodes.append(action.post)
    return (StatementSet(Side.PRE, _containing(pre_ir, pre_nodes)),
            StatementSet(Side.POST, _containing(post_ir, post_nodes)))
