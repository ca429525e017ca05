"""Unranked and binary trees, the first-child/next-sibling encoding, and
XML / term rendering of witness trees."""
from __future__ import annotations

import itertools
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterator, Sequence

SOLVER_NS = "http://wam.inrialpes.fr/xml"
MARK_ORDER = ("context", "target")


@dataclass(frozen=True)
class UnrankedTree:
    label: str
    children: tuple["UnrankedTree", ...] = ()
    attributes: frozenset[str] = frozenset()
    marks: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "attributes", frozenset(self.attributes))
        object.__setattr__(self, "marks", frozenset(self.marks))

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def iter(self) -> Iterator["UnrankedTree"]:
        """Nodes in document order."""
        yield self
        for c in self.children:
            yield from c.iter()


@dataclass(frozen=True)
class BinaryTree:
    """A node ``label(first, second)``; ``None`` stands for the empty tree."""

    label: str
    first: "BinaryTree | None" = None
    second: "BinaryTree | None" = None
    attributes: frozenset[str] = field(default=frozenset())
    marks: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        object.__setattr__(self, "attributes", frozenset(self.attributes))
        object.__setattr__(self, "marks", frozenset(self.marks))

    def size(self) -> int:
        return 1 + binary_size(self.first) + binary_size(self.second)

    def iter(self) -> Iterator["BinaryTree"]:
        """Nodes in pre-order (equal to document order of the decoded hedge)."""
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            if n.second is not None:
                stack.append(n.second)
            if n.first is not None:
                stack.append(n.first)


def binary_size(t: BinaryTree | None) -> int:
    return 0 if t is None else t.size()


def encode(hedge: Sequence[UnrankedTree] | UnrankedTree) -> BinaryTree | None:
    """f(s(h), h') = s(f(h), f(h')), f(empty) = empty."""
    if isinstance(hedge, UnrankedTree):
        hedge = [hedge]
    result = None
    for node in reversed(hedge):
        result = BinaryTree(node.label, encode(node.children), result,
                            node.attributes, node.marks)
    return result


def decode(t: BinaryTree | None) -> list[UnrankedTree]:
    hedge = []
    while t is not None:
        hedge.append(UnrankedTree(t.label, tuple(decode(t.first)), t.attributes, t.marks))
        t = t.second
    return hedge


def term_print(t: BinaryTree | None) -> str:
    """Functional notation of the binary form, ``#`` for the empty tree.

    A node whose two subtrees are empty prints as its bare label.
    """
    if t is None:
        return "#"
    if t.first is None and t.second is None:
        return t.label
    return f"{t.label}({term_print(t.first)}, {term_print(t.second)})"


def _has_marks(t: UnrankedTree) -> bool:
    return any(n.marks for n in t.iter())


def _mark_key(m: str):
    return (MARK_ORDER.index(m) if m in MARK_ORDER else len(MARK_ORDER), m)


def to_xml(tree: UnrankedTree | Sequence[UnrankedTree], indent: str = "  ") -> str:
    """Indented XML; solver marks become ``solver:<mark>="true"`` attributes."""
    roots = [tree] if isinstance(tree, UnrankedTree) else list(tree)
    lines: list[str] = []
    for root in roots:
        _xml_lines(root, 0, _has_marks(root), lines, indent)
    return "\n".join(lines)


def _xml_lines(t: UnrankedTree, depth: int, declare_ns: bool, out: list[str], indent: str):
    attrs = []
    if declare_ns:
        attrs.append(f'xmlns:solver="{SOLVER_NS}"')
    attrs += [f'{a}=""' for a in sorted(t.attributes)]
    attrs += [f'solver:{m}="true"' for m in sorted(t.marks, key=_mark_key)]
    head = " ".join([t.label] + attrs)
    pad = indent * depth
    if not t.children:
        out.append(f"{pad}<{head}/>")
        return
    out.append(f"{pad}<{head}>")
    for c in t.children:
        _xml_lines(c, depth + 1, False, out, indent)
    out.append(f"{pad}</{t.label}>")


def from_xml(text: str) -> UnrankedTree:
    """Read back an element tree produced by :func:`to_xml` (values ignored)."""
    return _from_element(ET.fromstring(text))


def _from_element(e: ET.Element) -> UnrankedTree:
    attrs, marks = set(), set()
    prefix = "{" + SOLVER_NS + "}"
    for k, v in e.attrib.items():
        if k.startswith(prefix):
            if v == "true":
                marks.add(k[len(prefix):])
        else:
            attrs.add(k)
    return UnrankedTree(e.tag, tuple(_from_element(c) for c in e), frozenset(attrs), frozenset(marks))


# -- enumeration and sampling ------------------------------------------------------

def hedge_shapes(n: int) -> Iterator[tuple]:
    """All ordered hedges with exactly ``n`` nodes; a node is a tuple of its
    children."""
    if n == 0:
        yield ()
        return
    for first_size in range(1, n + 1):
        for kids in hedge_shapes(first_size - 1):
            for rest in hedge_shapes(n - first_size):
                yield (kids,) + rest


def tree_shapes(n: int) -> Iterator[tuple]:
    """All single-rooted unranked shapes with ``n`` nodes."""
    if n < 1:
        return
    for kids in hedge_shapes(n - 1):
        yield kids


def _label_shape(shape, labels) -> UnrankedTree:
    it = iter(labels)

    def build(kids):
        label = next(it)
        return UnrankedTree(label, tuple(build(k) for k in kids))

    return build(shape)


def _shape_size(shape) -> int:
    return 1 + sum(_shape_size(k) for k in shape)


def all_unranked_trees(max_nodes: int, labels: Sequence[str]) -> Iterator[UnrankedTree]:
    """Every single-rooted tree with 1..max_nodes nodes over ``labels``."""
    for n in range(1, max_nodes + 1):
        for shape in tree_shapes(n):
            for assignment in itertools.product(labels, repeat=n):
                yield _label_shape(shape, assignment)


def random_unranked(rng: random.Random, max_nodes: int, labels: Sequence[str],
                    attributes: Sequence[str] = ()) -> UnrankedTree:
    """A random tree with 1..max_nodes nodes (random recursive attachment)."""
    n = rng.randint(1, max_nodes)
    kids: list[list[int]] = [[] for _ in range(n)]
    for i in range(1, n):
        kids[rng.randrange(i)].append(i)
    node_labels = [rng.choice(labels) for _ in range(n)]
    node_attrs = [frozenset(a for a in attributes if rng.random() < 0.3) for _ in range(n)]

    def build(i: int) -> UnrankedTree:
        return UnrankedTree(node_labels[i], tuple(build(k) for k in kids[i]), node_attrs[i])

    return build(0)
