"""DTDs, binary tree types, and their translation into the tree logic.

A DTD is turned into a binary tree type (BTT) with the Glushkov construction:
every position of a content model becomes a nonterminal whose first child is
drawn from the first positions of the element's own model and whose next
sibling is drawn from the follow positions in the parent's model.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union as _U

from .formula import (
    And, Attribute, BOTTOM, Element, Formula, Let, Modal, Not, Or, Program, TOP, Var, fresh_var,
)
from .trees import BinaryTree, UnrankedTree


class DtdError(Exception):
    pass


class DtdSyntaxError(DtdError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"{message}" + (f" (line {line})" if line is not None else ""))


class UndeclaredElement(DtdError):
    pass


class UnknownStartSymbol(DtdError):
    pass


class DtdWarning(UserWarning):
    pass


# -- content models ---------------------------------------------------------------------

@dataclass(frozen=True)
class Empty:
    def __str__(self) -> str:
        return "EMPTY"


@dataclass(frozen=True)
class Any:
    def __str__(self) -> str:
        return "ANY"


@dataclass(frozen=True)
class Name:
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Seq:
    items: tuple["ContentModel", ...]

    def __str__(self) -> str:
        return "(" + ", ".join(map(str, self.items)) + ")"


@dataclass(frozen=True)
class Choice:
    items: tuple["ContentModel", ...]

    def __str__(self) -> str:
        return "(" + " | ".join(map(str, self.items)) + ")"


@dataclass(frozen=True)
class Repeat:
    item: "ContentModel"
    op: str  # "?", "*" or "+"

    def __str__(self) -> str:
        return f"{self.item}{self.op}"


ContentModel = _U[Empty, Any, Name, Seq, Choice, Repeat]


@dataclass
class Dtd:
    elements: dict[str, ContentModel] = field(default_factory=dict)
    attlists: dict[str, list[tuple[str, bool]]] = field(default_factory=dict)
    start: str | None = None
    undeclared: list[str] = field(default_factory=list)

    def labels(self) -> list[str]:
        """Declared elements followed by referenced but undeclared ones."""
        return list(self.elements) + [u for u in self.undeclared if u not in self.elements]

    def attribute_alphabet(self) -> list[str]:
        out: list[str] = []
        for atts in self.attlists.values():
            for name, _ in atts:
                if name not in out:
                    out.append(name)
        return out

    def model(self, label: str) -> ContentModel:
        if label in self.elements:
            return self.elements[label]
        return Any()

    def declared_attributes(self, label: str) -> list[str]:
        return [a for a, _ in self.attlists.get(label, [])]

    def required_attributes(self, label: str) -> list[str]:
        return [a for a, req in self.attlists.get(label, []) if req]


# -- parsing -----------------------------------------------------------------------------------

_DECL = re.compile(r"<!--.*?-->|<\?.*?\?>|<!\[.*?\]\]>|<!(?P<kind>[A-Z]+)\b(?P<body>(?:[^>\"']|\"[^\"]*\"|'[^']*')*)>",
                   re.DOTALL)
_NAME = r"[A-Za-z_:][\w.\-:]*"


def parse_dtd(source: str | Path, start: str | None = None, strict: bool = False) -> Dtd:
    """Parse DTD text, or a file when ``source`` is a :class:`Path`."""
    if isinstance(source, Path):
        try:
            text = source.read_text(encoding="utf-8")
        except OSError as e:
            raise DtdError(f"cannot read {source}: {e}") from e
    else:
        text = source
    dtd = Dtd()
    pos = 0
    for m in _DECL.finditer(text):
        gap = text[pos:m.start()]
        if gap.strip():
            raise DtdSyntaxError(f"unexpected text {gap.strip()[:30]!r}", _line(text, pos))
        pos = m.end()
        kind = m.group("kind")
        if kind is None:
            continue
        line = _line(text, m.start())
        body = m.group("body")
        if kind == "ELEMENT":
            name, model = _parse_element(body, line)
            if name in dtd.elements:
                raise DtdSyntaxError(f"element {name} declared twice", line)
            dtd.elements[name] = model
        elif kind == "ATTLIST":
            name, atts = _parse_attlist(body, line)
            known = dtd.attlists.setdefault(name, [])
            for a, req in atts:
                if a not in [k for k, _ in known]:
                    known.append((a, req))
        else:
            warnings.warn(f"skipping <!{kind} ...> declaration (line {line})", DtdWarning, stacklevel=2)
    if text[pos:].strip():
        raise DtdSyntaxError(f"unexpected text {text[pos:].strip()[:30]!r}", _line(text, pos))
    referenced: list[str] = []
    for model in dtd.elements.values():
        for n in model_names(model):
            if n not in dtd.elements and n not in referenced:
                referenced.append(n)
    for n in referenced:
        if strict:
            raise UndeclaredElement(f"element {n} is referenced but never declared")
        warnings.warn(f"element {n} is referenced but never declared; treating it as ANY",
                      DtdWarning, stacklevel=2)
    dtd.undeclared = referenced
    if start is not None:
        if start not in dtd.elements:
            raise UnknownStartSymbol(f"start symbol {start} is not a declared element")
        dtd.start = start
    elif dtd.elements:
        dtd.start = next(iter(dtd.elements))
    return dtd


def _line(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def _parse_element(body: str, line: int) -> tuple[str, ContentModel]:
    m = re.match(rf"\s+({_NAME})\s+(.*?)\s*$", body, re.DOTALL)
    if m is None:
        raise DtdSyntaxError("malformed ELEMENT declaration", line)
    name, spec = m.group(1), m.group(2)
    if spec == "EMPTY":
        return name, Empty()
    if spec == "ANY":
        return name, Any()
    tokens = re.findall(rf"#PCDATA|{_NAME}|[(),|?*+]|\S", spec)
    parser = _ModelParser(tokens, line)
    model = parser.parse()
    return name, model


class _ModelParser:
    def __init__(self, tokens: list[str], line: int):
        self.tokens = tokens
        self.i = 0
        self.line = line

    def fail(self, message: str):
        raise DtdSyntaxError(message, self.line)

    def peek(self) -> str | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        t = self.peek()
        if t is None or (expected is not None and t != expected):
            self.fail(f"expected {expected or 'a token'} in content model, found {t!r}")
        self.i += 1
        return t

    def parse(self) -> ContentModel:
        if self.peek() != "(":
            self.fail("content model must start with '('")
        model = self.particle()
        if self.peek() is not None:
            self.fail(f"unexpected {self.peek()!r} after content model")
        return model

    def particle(self) -> ContentModel:
        t = self.peek()
        if t == "(":
            self.take("(")
            if self.peek() == "#PCDATA":
                return self.mixed()
            items = [self.particle()]
            sep = None
            while self.peek() in (",", "|"):
                s = self.take()
                if sep is not None and s != sep:
                    self.fail("cannot mix ',' and '|' in one group")
                sep = s
                items.append(self.particle())
            self.take(")")
            if len(items) == 1:
                inner = items[0]
            else:
                inner = Seq(tuple(items)) if sep == "," else Choice(tuple(items))
        elif t is not None and re.fullmatch(_NAME, t):
            self.take()
            inner = Name(t)
        else:
            self.fail(f"unexpected {t!r} in content model")
        if self.peek() in ("?", "*", "+"):
            return Repeat(inner, self.take())
        return inner

    def mixed(self) -> ContentModel:
        # #PCDATA is ignored: (#PCDATA | a | b)* is read as (a | b)*
        self.take("#PCDATA")
        names = []
        while self.peek() == "|":
            self.take("|")
            names.append(Name(self.take()))
        self.take(")")
        if self.peek() == "*":
            self.take("*")
        elif names:
            self.fail("mixed content with element names must be repeated with '*'")
        if not names:
            return Seq(())
        return Repeat(Choice(tuple(names)) if len(names) > 1 else names[0], "*")


_ATT_TOKEN = re.compile(r"\"[^\"]*\"|'[^']*'|\([^)]*\)|#?[\w.\-:]+|\S")


def _parse_attlist(body: str, line: int) -> tuple[str, list[tuple[str, bool]]]:
    tokens = _ATT_TOKEN.findall(body)
    if not tokens or not re.fullmatch(_NAME, tokens[0]):
        raise DtdSyntaxError("malformed ATTLIST declaration", line)
    element = tokens[0]
    atts: list[tuple[str, bool]] = []
    i = 1
    while i < len(tokens):
        name = tokens[i]
        if not re.fullmatch(_NAME, name) or i + 2 > len(tokens):
            raise DtdSyntaxError(f"malformed attribute definition at {name!r}", line)
        i += 1
        kind = tokens[i]
        i += 1
        if kind == "NOTATION":
            i += 1  # the notation list
        if i >= len(tokens):
            raise DtdSyntaxError(f"missing default for attribute {name}", line)
        default = tokens[i]
        i += 1
        if default == "#FIXED":
            i += 1
        elif default not in ("#REQUIRED", "#IMPLIED") and default[:1] not in "\"'":
            raise DtdSyntaxError(f"bad default {default!r} for attribute {name}", line)
        atts.append((name, default == "#REQUIRED"))
    return element, atts


def model_names(model: ContentModel) -> list[str]:
    out: list[str] = []

    def visit(m: ContentModel) -> None:
        if isinstance(m, Name):
            if m.label not in out:
                out.append(m.label)
        elif isinstance(m, (Seq, Choice)):
            for x in m.items:
                visit(x)
        elif isinstance(m, Repeat):
            visit(m.item)

    visit(model)
    return out


# -- Glushkov automaton -----------------------------------------------------------------------

@dataclass
class Glushkov:
    """Positions (label occurrences) of a content model with first/last/follow sets."""

    labels: list[str]
    first: frozenset[int]
    last: frozenset[int]
    follow: list[frozenset[int]]
    nullable: bool

    @classmethod
    def of(cls, model: ContentModel, alphabet: Iterable[str] = ()) -> "Glushkov":
        if isinstance(model, Any):
            names = tuple(Name(a) for a in alphabet)
            model = Repeat(Choice(names), "*") if names else Seq(())
        labels: list[str] = []
        follow: list[set[int]] = []

        def go(m: ContentModel) -> tuple[bool, set[int], set[int]]:
            if isinstance(m, Empty):
                return True, set(), set()
            if isinstance(m, Name):
                labels.append(m.label)
                follow.append(set())
                p = len(labels) - 1
                return False, {p}, {p}
            if isinstance(m, Choice):
                null, fst, lst = False, set(), set()
                for x in m.items:
                    n, f, l = go(x)
                    null |= n
                    fst |= f
                    lst |= l
                return null, fst, lst
            if isinstance(m, Seq):
                null, fst, lst = True, set(), set()
                for x in m.items:
                    n, f, l = go(x)
                    for p in lst:
                        follow[p] |= f
                    if null:
                        fst |= f
                    lst = (lst | l) if n else l
                    null = null and n
                return null, fst, lst
            if isinstance(m, Repeat):
                n, f, l = go(m.item)
                if m.op in ("*", "+"):
                    for p in l:
                        follow[p] |= f
                return n or m.op in ("?", "*"), f, l
            raise DtdError(f"unexpected content model {m!r}")

        null, fst, lst = go(model)
        return cls(labels, frozenset(fst), frozenset(lst), [frozenset(s) for s in follow], null)

    def accepts(self, word: list[str]) -> bool:
        if not word:
            return self.nullable
        states = {p for p in self.first if self.labels[p] == word[0]}
        for a in word[1:]:
            states = {q for p in states for q in self.follow[p] if self.labels[q] == a}
        return bool(states & self.last)


# -- binary tree types -------------------------------------------------------------------------

@dataclass(frozen=True)
class Production:
    """A node labelled ``label`` whose attribute set contains ``required`` and
    avoids ``forbidden``, whose first child is one of ``first`` and whose next
    sibling is one of ``next`` (``None`` standing for the empty tree)."""

    label: str
    required: frozenset[str]
    forbidden: frozenset[str]
    first: frozenset[str | None]
    next: frozenset[str | None]


@dataclass
class BinaryTreeType:
    rules: dict[str, Production]
    start: str

    def nonterminals(self) -> list[str]:
        return list(self.rules)

    def alternatives(self, nt: str) -> list[tuple[str, str | None, str | None]]:
        p = self.rules[nt]
        return [(p.label, a, b) for a in sorted(p.first, key=_nt_key) for b in sorted(p.next, key=_nt_key)]

    def size(self) -> int:
        return sum(1 + len(p.required) + len(p.forbidden) + len(p.first) + len(p.next)
                   for p in self.rules.values())

    def accepts(self, t: BinaryTree | None, nt: str | None = None) -> bool:
        """Direct bottom-up run of the grammar on a binary tree."""
        memo: dict[tuple[int, str | None], bool] = {}

        def run(node: BinaryTree | None, n: str | None) -> bool:
            if n is None or node is None:
                return n is None and node is None
            key = (id(node), n)
            if key not in memo:
                p = self.rules[n]
                memo[key] = (node.label == p.label
                             and p.required <= node.attributes
                             and not (p.forbidden & node.attributes)
                             and any(run(node.first, a) for a in p.first)
                             and any(run(node.second, b) for b in p.next))
            return memo[key]

        return run(t, self.start if nt is None else nt)


def _nt_key(n: str | None) -> str:
    return "" if n is None else n


def to_btt(d: Dtd, start: str | None = None) -> BinaryTreeType:
    """Binary tree type of the documents valid for ``d`` rooted at ``start``."""
    start = start or d.start
    if start is None or start not in d.elements:
        raise UnknownStartSymbol(f"start symbol {start} is not a declared element")
    alphabet = d.labels()
    attr_alphabet = set(d.attribute_alphabet())
    autos = {e: Glushkov.of(d.model(e), alphabet) for e in alphabet}

    def attrs(label: str) -> tuple[frozenset[str], frozenset[str]]:
        declared = set(d.declared_attributes(label))
        return frozenset(d.required_attributes(label)), frozenset(attr_alphabet - declared)

    def children_of(label: str) -> frozenset[str | None]:
        g = autos[label]
        out: set[str | None] = {f"{label}#{p}" for p in g.first}
        if g.nullable:
            out.add(None)
        return frozenset(out)

    rules: dict[str, Production] = {}
    start_nt = start
    req, forb = attrs(start)
    rules[start_nt] = Production(start, req, forb, children_of(start), frozenset({None}))
    todo = [n for n in rules[start_nt].first if n is not None]
    while todo:
        nt = todo.pop()
        if nt in rules:
            continue
        parent, _, p = nt.rpartition("#")
        g = autos[parent]
        label = g.labels[int(p)]
        nxt: set[str | None] = {f"{parent}#{q}" for q in g.follow[int(p)]}
        if int(p) in g.last:
            nxt.add(None)
        req, forb = attrs(label)
        rules[nt] = Production(label, req, forb, children_of(label), frozenset(nxt))
        todo += [n for n in rules[nt].first | rules[nt].next if n is not None and n not in rules]
    ordered = {k: rules[k] for k in sorted(rules, key=lambda k: (k != start_nt, _sort_key(k)))}
    return BinaryTreeType(ordered, start_nt)


def _sort_key(nt: str) -> tuple[str, int]:
    parent, _, p = nt.rpartition("#")
    return (parent, int(p)) if parent else (nt, -1)


def compile_btt(b: BinaryTreeType, start: str | None = None) -> Formula:
    """One recursive binding per nonterminal, forward modalities only."""
    start = start or b.start
    if start not in b.rules:
        raise UnknownStartSymbol(f"{start} is not a nonterminal of the tree type")
    names = {nt: fresh_var("X") for nt in b.rules}

    def options(choices: frozenset[str | None], program: Program) -> Formula:
        out: Formula | None = None
        for c in sorted(choices, key=_nt_key):
            g = Not(Modal(program, TOP)) if c is None else Modal(program, Var(names[c]))
            out = g if out is None else Or(out, g)
        return BOTTOM if out is None else out

    bindings = []
    for nt, p in b.rules.items():
        f: Formula = Element(p.label)
        for a in sorted(p.required):
            f = And(f, Attribute(a))
        for a in sorted(p.forbidden):
            f = And(f, Not(Attribute(a)))
        f = And(And(f, options(p.first, Program.FIRST_CHILD)), options(p.next, Program.NEXT_SIBLING))
        bindings.append((names[nt], f))
    return Let(tuple(bindings), Var(names[start]))


def type_formula(d: Dtd, start: str | None = None) -> Formula:
    return compile_btt(to_btt(d, start))


# -- reference validator --------------------------------------------------------------------

def _regex(model: ContentModel, alphabet: list[str]) -> str:
    if isinstance(model, Empty):
        return ""
    if isinstance(model, Any):
        return "(?:" + "|".join(re.escape(a) + "," for a in alphabet) + ")*" if alphabet else ""
    if isinstance(model, Name):
        return "(?:" + re.escape(model.label) + ",)"
    if isinstance(model, Seq):
        return "(?:" + "".join(_regex(x, alphabet) for x in model.items) + ")"
    if isinstance(model, Choice):
        return "(?:" + "|".join(_regex(x, alphabet) for x in model.items) + ")"
    return "(?:" + _regex(model.item, alphabet) + ")" + model.op


def validate(tree: UnrankedTree, d: Dtd, start: str | None = None) -> bool:
    """Is ``tree`` a valid document for ``d`` with root element ``start``?"""
    start = start or d.start
    if tree.label != start:
        return False
    alphabet = d.labels()
    patterns = {e: re.compile(_regex(d.model(e), alphabet)) for e in alphabet}

    def ok(t: UnrankedTree) -> bool:
        if t.label not in patterns:
            return False
        declared = set(d.declared_attributes(t.label))
        if not t.attributes <= declared or not set(d.required_attributes(t.label)) <= t.attributes:
            return False
        word = "".join(c.label + "," for c in t.children)
        return patterns[t.label].fullmatch(word) is not None and all(ok(c) for c in t.children)

    return ok(tree)
