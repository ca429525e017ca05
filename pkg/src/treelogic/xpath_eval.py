"""Reference XPath evaluator over unranked hedges.

Works on the document tree directly (parent/children lists and document
order), with a virtual document node above the top-level elements.  It
understands position() and count() with their usual meaning so that the
rewritings can be checked against it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .trees import UnrankedTree
from .xpath import (
    Count, Intersection, Path, Position, QAnd, QNot, QOr, QPath, Query, Qualifier, Step,
    Union, XPathError,
)

DOC = -1  # index of the virtual document node
REVERSE_AXES = {"parent", "ancestor", "ancestor-or-self", "preceding-sibling", "preceding"}


@dataclass
class Document:
    nodes: list[UnrankedTree] = field(default_factory=list)
    parent: list[int] = field(default_factory=list)
    children: dict[int, list[int]] = field(default_factory=dict)
    end: list[int] = field(default_factory=list)  # last descendant index (inclusive)

    @classmethod
    def of(cls, hedge: Sequence[UnrankedTree] | UnrankedTree) -> "Document":
        if isinstance(hedge, UnrankedTree):
            hedge = [hedge]
        d = cls()
        d.children[DOC] = []

        def add(t: UnrankedTree, parent: int) -> int:
            i = len(d.nodes)
            d.nodes.append(t)
            d.parent.append(parent)
            d.end.append(i)
            d.children[i] = []
            d.children[parent].append(i)
            for c in t.children:
                add(c, i)
            d.end[i] = len(d.nodes) - 1
            return i

        for t in hedge:
            add(t, DOC)
        return d

    def siblings(self, i: int) -> list[int]:
        return self.children[self.parent[i]]

    def axis(self, name: str, i: int) -> list[int]:
        """Nodes on ``name`` from ``i`` in document order (elements only)."""
        n = len(self.nodes)
        if name == "self":
            return [] if i == DOC else [i]
        if name == "child":
            return list(self.children[i])
        if name == "parent":
            return [] if i == DOC or self.parent[i] == DOC else [self.parent[i]]
        if name == "descendant":
            return list(range(n)) if i == DOC else list(range(i + 1, self.end[i] + 1))
        if name == "descendant-or-self":
            return self.axis("descendant", i) if i == DOC else list(range(i, self.end[i] + 1))
        if name == "ancestor":
            out = []
            j = self.parent[i] if i != DOC else DOC
            while j != DOC:
                out.append(j)
                j = self.parent[j]
            return sorted(out)
        if name == "ancestor-or-self":
            return sorted(self.axis("ancestor", i) + self.axis("self", i))
        if i == DOC:
            return []
        sib = self.siblings(i)
        k = sib.index(i)
        if name == "following-sibling":
            return sib[k + 1:]
        if name == "preceding-sibling":
            return sib[:k]
        if name == "following":
            return list(range(self.end[i] + 1, n))
        if name == "preceding":
            anc = set(self.axis("ancestor", i))
            return [j for j in range(i) if j not in anc]
        raise XPathError(f"unknown axis {name}")

    def matches(self, j: int, test: str) -> bool:
        return test == "*" or self.nodes[j].label == test


def _step(doc: Document, step: Step, i: int) -> list[int]:
    found = [j for j in doc.axis(step.axis, i) if doc.matches(j, step.test)]
    for q in step.qualifiers:
        ordered = found[::-1] if step.axis in REVERSE_AXES else found
        size = len(ordered)
        kept = {j for pos, j in enumerate(ordered, 1) if qualifier_holds(doc, q, j, pos, size)}
        found = [j for j in found if j in kept]
    return found


def _path(doc: Document, p: Path, start: set[int]) -> set[int]:
    current = {DOC} if p.absolute else set(start)
    for step in p.steps:
        nxt: set[int] = set()
        for i in current:
            nxt.update(_step(doc, step, i))
        current = nxt
    return current


def qualifier_holds(doc: Document, q: Qualifier, i: int, pos: int = 1, size: int = 1) -> bool:
    if isinstance(q, QAnd):
        return qualifier_holds(doc, q.left, i, pos, size) and qualifier_holds(doc, q.right, i, pos, size)
    if isinstance(q, QOr):
        return qualifier_holds(doc, q.left, i, pos, size) or qualifier_holds(doc, q.right, i, pos, size)
    if isinstance(q, QNot):
        return not qualifier_holds(doc, q.sub, i, pos, size)
    if isinstance(q, Position):
        return pos == (size if q.value == "last" else q.value)
    if isinstance(q, Count):
        n = len(_path(doc, q.path, {i}))
        return n == q.value if q.op == "=" else n > q.value
    if isinstance(q, QPath):
        reached = _path(doc, q.path, {i})
        if q.attribute is None:
            return bool(reached)
        return any(j != DOC and q.attribute in doc.nodes[j].attributes for j in reached)
    raise XPathError(f"not a qualifier: {q!r}")


def evaluate_query(q: Query, doc: Document, context: set[int]) -> set[int]:
    """Document-order indices selected by ``q`` from the ``context`` nodes."""
    if isinstance(q, Union):
        return evaluate_query(q.left, doc, context) | evaluate_query(q.right, doc, context)
    if isinstance(q, Intersection):
        return evaluate_query(q.left, doc, context) & evaluate_query(q.right, doc, context)
    if q.absolute and not context:
        return set()
    return _path(doc, q, context) - {DOC}


def select(q: Query, hedge: Sequence[UnrankedTree] | UnrankedTree,
           context: set[int] | None = None) -> set[int]:
    """Evaluate ``q`` on a hedge; the context defaults to the first top-level node."""
    doc = Document.of(hedge)
    return evaluate_query(q, doc, {0} if context is None else context)
