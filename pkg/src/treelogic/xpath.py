"""XPath fragment: parsing, desugaring and compilation into the tree logic.

Queries are compiled *backward*: the formula for a path holds at exactly the
nodes the path selects from some node where the context formula holds.
Qualifiers are compiled *forward*: they hold at a node from which the
qualifier path reaches some node.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union as _U

from .formula import (
    And, Attribute, BOTTOM, CONTEXT, Element, Formula, Let, Modal, Not, Or, Program,
    TOP, Top, Var, fresh_var,
)

AXES = (
    "self", "child", "parent", "descendant", "ancestor", "descendant-or-self",
    "ancestor-or-self", "following-sibling", "preceding-sibling", "following", "preceding",
)

INVERSE = {
    "self": "self",
    "child": "parent",
    "parent": "child",
    "descendant": "ancestor",
    "ancestor": "descendant",
    "descendant-or-self": "ancestor-or-self",
    "ancestor-or-self": "descendant-or-self",
    "following-sibling": "preceding-sibling",
    "preceding-sibling": "following-sibling",
    "following": "preceding",
    "preceding": "following",
}


class XPathError(Exception):
    pass


class XPathSyntaxError(XPathError):
    def __init__(self, message: str, position: int | None = None, text: str = ""):
        self.position = position
        where = f" at offset {position}" if position is not None else ""
        super().__init__(f"{message}{where}" + (f" in {text!r}" if text else ""))


class UnsupportedAxis(XPathError):
    pass


# -- AST -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    axis: str
    test: str  # element name or "*"
    qualifiers: tuple["Qualifier", ...] = ()

    def __str__(self) -> str:
        return f"{self.axis}::{self.test}" + "".join(f"[{q}]" for q in self.qualifiers)


@dataclass(frozen=True)
class Path:
    steps: tuple[Step, ...]
    absolute: bool = False

    def __str__(self) -> str:
        body = "/".join(str(s) for s in self.steps)
        return "/" + body if self.absolute else body


@dataclass(frozen=True)
class Union:
    left: "Query"
    right: "Query"

    def __str__(self) -> str:
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Intersection:
    left: "Query"
    right: "Query"

    def __str__(self) -> str:
        return f"({self.left} intersect {self.right})"


Query = _U[Path, Union, Intersection]


@dataclass(frozen=True)
class QAnd:
    left: "Qualifier"
    right: "Qualifier"

    def __str__(self) -> str:
        return f"({self.left} and {self.right})"


@dataclass(frozen=True)
class QOr:
    left: "Qualifier"
    right: "Qualifier"

    def __str__(self) -> str:
        return f"({self.left} or {self.right})"


@dataclass(frozen=True)
class QNot:
    sub: "Qualifier"

    def __str__(self) -> str:
        return f"not({self.sub})"


@dataclass(frozen=True)
class QPath:
    """A path qualifier, optionally ending in an attribute test (``path/@a``);
    an empty relative path with an attribute is the attribute step ``@a``."""

    path: Path
    attribute: str | None = None

    def __str__(self) -> str:
        if self.attribute is None:
            return str(self.path)
        if not self.path.steps:
            return "/@" + self.attribute if self.path.absolute else "@" + self.attribute
        return f"{self.path}/@{self.attribute}"


# sugared forms, rewritten away by desugar()

@dataclass(frozen=True)
class Position:
    """``position() = k`` (an int) or ``position() = last()`` (``"last"``)."""

    value: int | str

    def __str__(self) -> str:
        return "position()=" + ("last()" if self.value == "last" else str(self.value))


@dataclass(frozen=True)
class Count:
    """``count(path) = 0`` or ``count(path) > k``."""

    path: Path
    op: str  # "=" or ">"
    value: int

    def __str__(self) -> str:
        return f"count({self.path}){self.op}{self.value}"


Qualifier = _U[QAnd, QOr, QNot, QPath, Position, Count]
SUGAR = (Position, Count)


# -- parsing -------------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<dcolon>::)
  | (?P<dslash>//)
  | (?P<ddot>\.\.)
  | (?P<number>\d+)
  | (?P<name>[A-Za-z_][\w.\-]*)
  | (?P<punct>[/\[\]()@*|=>.,]|∩)
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks, i = [], 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise XPathSyntaxError(f"unexpected character {text[i]!r}", i, text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), i))
        i = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value: str) -> bool:
        return self.tok.value == value and self.tok.kind in ("punct", "dslash", "dcolon", "ddot")

    def at_word(self, word: str) -> bool:
        return self.tok.kind == "name" and self.tok.value == word

    def expect(self, value: str) -> _Tok:
        if self.tok.value != value:
            self.fail(f"expected {value!r}")
        t = self.tok
        self.i += 1
        return t

    def fail(self, message: str):
        found = self.tok.value or "end of input"
        raise XPathSyntaxError(f"{message}, found {found!r}", self.tok.pos, self.text)

    # query := inter ('|' inter)* ; inter := primary (('intersect'|'∩') primary)*

    def query(self) -> Query:
        q = self.intersection()
        while self.at("|"):
            self.i += 1
            q = Union(q, self.intersection())
        return q

    def intersection(self) -> Query:
        q = self.primary()
        while self.at_word("intersect") or self.at("∩"):
            self.i += 1
            q = Intersection(q, self.primary())
        return q

    def primary(self) -> Query:
        if self.at("("):
            self.i += 1
            q = self.query()
            self.expect(")")
            return q
        path, attr = self.path()
        if attr is not None:
            raise UnsupportedAxis(f"a query cannot select attribute nodes (@{attr})")
        return path

    def path(self) -> tuple[Path, str | None]:
        """A possibly absolute path, optionally ending in an attribute step."""
        absolute = False
        steps: list[Step] = []
        if self.at("/"):
            absolute = True
            self.i += 1
            if not self._step_start():
                if self.at("@"):
                    return Path((), True), self.attribute_step()
                self.fail("expected a location step after '/'")
        elif self.at("//"):
            # "//x" from the document node: the document node is not an element,
            # so a leading child step becomes a descendant step
            absolute = True
            self.i += 1
            if self._step_start():
                first = self.step()
                if first.axis == "child":
                    first = Step("descendant", first.test, first.qualifiers)
                else:
                    steps.append(Step("descendant-or-self", "*"))
                steps.append(first)
                if not (self.at("/") or self.at("//")):
                    return Path(tuple(steps), absolute), None
                self.i += 1
                if self.toks[self.i - 1].value == "//":
                    steps.append(Step("descendant-or-self", "*"))
            else:
                steps.append(Step("descendant-or-self", "*"))
        while True:
            if self.at("@") or self.at_word("attribute") and self.peek().kind == "dcolon":
                return Path(tuple(steps), absolute), self.attribute_step()
            steps.append(self.step())
            if self.at("/"):
                self.i += 1
            elif self.at("//"):
                self.i += 1
                steps.append(Step("descendant-or-self", "*"))
            else:
                return Path(tuple(steps), absolute), None

    def _step_start(self) -> bool:
        t = self.tok
        return t.kind in ("name", "ddot") or t.value in ("*", ".")

    def attribute_step(self) -> str:
        if self.at("@"):
            self.i += 1
        else:
            self.i += 2
        if self.at("*"):
            raise UnsupportedAxis("@* is not supported: attribute names must be explicit")
        if self.tok.kind != "name":
            self.fail("expected an attribute name")
        name = self.tok.value
        self.i += 1
        if self.at("/") or self.at("//") or self.at("["):
            raise UnsupportedAxis("an attribute step must end its path")
        return name

    def step(self) -> Step:
        if self.at("."):
            self.i += 1
            return Step("self", "*", self.qualifiers())
        if self.at(".."):
            self.i += 1
            return Step("parent", "*", self.qualifiers())
        axis = "child"
        if self.tok.kind == "name" and self.peek().kind == "dcolon":
            axis = self.tok.value
            if axis == "attribute":
                raise UnsupportedAxis("attribute:: is only allowed as the last step of a qualifier")
            if axis not in AXES:
                raise UnsupportedAxis(f"unknown axis {axis!r}")
            self.i += 2
        if self.at("*"):
            test = "*"
        elif self.tok.kind == "name":
            test = self.tok.value
        else:
            self.fail("expected a node test")
        self.i += 1
        return Step(axis, test, self.qualifiers())

    def qualifiers(self) -> tuple[Qualifier, ...]:
        out = []
        while self.at("["):
            self.i += 1
            out.append(self.q_or())
            self.expect("]")
        return tuple(out)

    def q_or(self) -> Qualifier:
        q = self.q_and()
        while self.at_word("or"):
            self.i += 1
            q = QOr(q, self.q_and())
        return q

    def q_and(self) -> Qualifier:
        q = self.q_primary()
        while self.at_word("and"):
            self.i += 1
            q = QAnd(q, self.q_primary())
        return q

    def _call(self, name: str) -> bool:
        return self.at_word(name) and self.peek().value == "("

    def q_primary(self) -> Qualifier:
        if self._call("not"):
            self.i += 2
            q = self.q_or()
            self.expect(")")
            return QNot(q)
        if self.at("("):
            self.i += 1
            q = self.q_or()
            self.expect(")")
            return q
        if self._call("position"):
            self.i += 2
            self.expect(")")
            self.expect("=")
            if self._call("last"):
                self.i += 2
                self.expect(")")
                return Position("last")
            return Position(self.number(minimum=1))
        if self._call("count"):
            self.i += 2
            path, attr = self.path()
            if attr is not None:
                raise UnsupportedAxis("count() over attributes is not supported")
            self.expect(")")
            if self.at("="):
                self.i += 1
                if self.number() != 0:
                    self.fail("only count(path)=0 is supported")
                return Count(path, "=", 0)
            self.expect(">")
            return Count(path, ">", self.number())
        if self.tok.kind == "number":
            return Position(self.number(minimum=1))
        if self._call("last"):
            self.i += 2
            self.expect(")")
            return Position("last")
        path, attr = self.path()
        return QPath(path, attr)

    def number(self, minimum: int = 0) -> int:
        if self.tok.kind != "number":
            self.fail("expected a number")
        value = int(self.tok.value)
        if value < minimum:
            self.fail(f"expected a number >= {minimum}")
        self.i += 1
        return value


def parse_xpath(text: str) -> Query:
    """Parse a query of the supported fragment; sugared qualifiers are kept."""
    p = _Parser(text)
    q = p.query()
    if p.tok.kind != "end":
        p.fail("unexpected trailing input")
    return q


# -- desugaring ----------------------------------------------------------------------------

def _repeat(axis: str, test: str, k: int, qualifiers: tuple = ()) -> Path:
    return Path(tuple(Step(axis, test, qualifiers) for _ in range(k)))


def _rewrite_position(step: Step, pos: Position, prior: tuple) -> Qualifier:
    """``prior`` holds the step's earlier (already rewritten) qualifiers:
    positions count only the siblings that pass them.  Without earlier
    qualifiers these are the literal rewritings."""
    if step.axis == "child":
        if pos.value == 1:
            return QNot(QPath(_repeat("preceding-sibling", step.test, 1, prior)))
        if pos.value == "last":
            return QNot(QPath(_repeat("following-sibling", step.test, 1, prior)))
        return QPath(_repeat("preceding-sibling", step.test, pos.value - 1, prior))
    if step.axis == "preceding-sibling" and step.test == "*" and pos.value == "last":
        return QNot(QPath(_repeat("preceding-sibling", "*", 1, prior)))
    raise XPathError(f"position() is not supported on {step.axis}::{step.test}")


def _rewrite_count(c: Count) -> Qualifier:
    if c.op == "=":
        return QNot(QPath(c.path))
    if c.value == 0:
        return QPath(c.path)
    steps = c.path.steps
    if c.path.absolute or len(steps) != 1 or steps[0].axis != "child" or steps[0].qualifiers:
        raise XPathError(f"count(path)>{c.value} is only supported for a single node test")
    nt = steps[0].test
    return QPath(Path((Step("child", nt),) + _repeat("following-sibling", nt, c.value).steps))


def _desugar_qualifier(q: Qualifier, step: Step, prior: tuple) -> Qualifier:
    if isinstance(q, Position):
        return _rewrite_position(step, q, prior)
    if isinstance(q, Count):
        return _desugar_qualifier(_rewrite_count(q), step, prior)
    if isinstance(q, QAnd):
        return QAnd(_desugar_qualifier(q.left, step, prior), _desugar_qualifier(q.right, step, prior))
    if isinstance(q, QOr):
        return QOr(_desugar_qualifier(q.left, step, prior), _desugar_qualifier(q.right, step, prior))
    if isinstance(q, QNot):
        return QNot(_desugar_qualifier(q.sub, step, prior))
    return QPath(_desugar_path(q.path), q.attribute)


def _desugar_step(s: Step) -> Step:
    done: tuple[Qualifier, ...] = ()
    for q in s.qualifiers:
        done += (_desugar_qualifier(q, s, done),)
    return Step(s.axis, s.test, done)


def _desugar_path(p: Path) -> Path:
    return Path(tuple(_desugar_step(s) for s in p.steps), p.absolute)


def desugar(q: Query) -> Query:
    """Rewrite position() and count() qualifiers into the core fragment."""
    if isinstance(q, Union):
        return Union(desugar(q.left), desugar(q.right))
    if isinstance(q, Intersection):
        return Intersection(desugar(q.left), desugar(q.right))
    return _desugar_path(q)


def is_sugar_free(q: Query | Qualifier | Step) -> bool:
    if isinstance(q, SUGAR):
        return False
    if isinstance(q, (Union, Intersection, QAnd, QOr)):
        return is_sugar_free(q.left) and is_sugar_free(q.right)
    if isinstance(q, QNot):
        return is_sugar_free(q.sub)
    if isinstance(q, QPath):
        return is_sugar_free(q.path)
    if isinstance(q, Step):
        return all(is_sugar_free(x) for x in q.qualifiers)
    return all(is_sugar_free(s) for s in q.steps)


# -- navigation formulas ---------------------------------------------------------------------

def _mu(build: Callable[[Var], Formula], hint: str = "X") -> Formula:
    name = fresh_var(hint)
    v = Var(name)
    return Let(((name, build(v)),), v)


def _dia(p: Program, f: Formula) -> Formula:
    return Modal(p, f)


ONE, TWO, UP1, UP2 = Program.FIRST_CHILD, Program.NEXT_SIBLING, Program.PARENT, Program.PREV_SIBLING


def has_parent(f: Formula) -> Formula:
    """The parent of the current node satisfies ``f``."""
    return _mu(lambda x: Or(_dia(UP1, f), _dia(UP2, x)))


def has_child(f: Formula) -> Formula:
    return _dia(ONE, _mu(lambda x: Or(f, _dia(TWO, x))))


def has_ancestor(f: Formula) -> Formula:
    return _mu(lambda x: Or(_dia(UP1, Or(f, x)), _dia(UP2, x)))


def has_descendant(f: Formula) -> Formula:
    return _dia(ONE, _mu(lambda x: Or(f, Or(_dia(ONE, x), _dia(TWO, x)))))


def has_descendant_or_self(f: Formula) -> Formula:
    x, y = fresh_var("X"), fresh_var("X")
    return Let(((x, Or(f, _dia(ONE, Var(y)))), (y, Or(Var(x), _dia(TWO, Var(y))))), Var(x))


def has_ancestor_or_self(f: Formula) -> Formula:
    x, y = fresh_var("X"), fresh_var("X")
    return Let(((x, Or(f, Var(y))), (y, Or(_dia(UP1, Var(x)), _dia(UP2, Var(y))))), Var(x))


def has_following_sibling(f: Formula) -> Formula:
    return _mu(lambda x: _dia(TWO, Or(f, x)))


def has_preceding_sibling(f: Formula) -> Formula:
    return _mu(lambda x: _dia(UP2, Or(f, x)))


def exists_via(axis: str, f: Formula) -> Formula:
    """Holds at ``n`` iff some node reachable from ``n`` along ``axis`` satisfies ``f``."""
    if axis == "self":
        return f
    if axis == "child":
        return has_child(f)
    if axis == "parent":
        return has_parent(f)
    if axis == "descendant":
        return has_descendant(f)
    if axis == "ancestor":
        return has_ancestor(f)
    if axis == "descendant-or-self":
        return has_descendant_or_self(f)
    if axis == "ancestor-or-self":
        return has_ancestor_or_self(f)
    if axis == "following-sibling":
        return has_following_sibling(f)
    if axis == "preceding-sibling":
        return has_preceding_sibling(f)
    if axis == "following":
        return has_ancestor_or_self(has_following_sibling(has_descendant_or_self(f)))
    if axis == "preceding":
        return has_ancestor_or_self(has_preceding_sibling(has_descendant_or_self(f)))
    raise UnsupportedAxis(axis)


def is_root() -> Formula:
    return And(Not(_dia(UP1, TOP)), Not(_dia(UP2, TOP)))


def top_level() -> Formula:
    """Nodes without a parent: the binary root and its next-sibling chain."""
    return _mu(lambda x: Or(is_root(), _dia(UP2, x)))


def somewhere_in_tree(f: Formula) -> Formula:
    """Some node of the whole tree (not only below the current one) satisfies ``f``."""
    below = _mu(lambda y: Or(f, Or(_dia(ONE, y), _dia(TWO, y))))
    return _mu(lambda u: Or(And(is_root(), below), Or(_dia(UP1, u), _dia(UP2, u))))


def from_document(axis: str) -> Formula:
    """Nodes reached along ``axis`` from the (virtual) document node."""
    if axis == "child":
        return top_level()
    if axis in ("descendant", "descendant-or-self"):
        return TOP
    return BOTTOM


def _test(step: Step) -> Formula:
    return TOP if step.test == "*" else Element(step.test)


def _conj(*items: Formula) -> Formula:
    items = [i for i in items if not isinstance(i, Top)]
    if not items:
        return TOP
    out = items[0]
    for i in items[1:]:
        out = And(out, i)
    return out


# -- compilation -------------------------------------------------------------------------------

def compile_qualifier(q: Qualifier) -> Formula:
    if isinstance(q, QAnd):
        return And(compile_qualifier(q.left), compile_qualifier(q.right))
    if isinstance(q, QOr):
        return Or(compile_qualifier(q.left), compile_qualifier(q.right))
    if isinstance(q, QNot):
        return Not(compile_qualifier(q.sub))
    if isinstance(q, QPath):
        tail = TOP if q.attribute is None else Attribute(q.attribute)
        return forward_path(q.path, tail)
    raise XPathError(f"sugared qualifier {q} must be desugared before compilation")


def _step_here(step: Step, rest: Formula) -> Formula:
    return _conj(_test(step), *(compile_qualifier(x) for x in step.qualifiers), rest)


def forward_path(p: Path, tail: Formula = TOP) -> Formula:
    """Holds at nodes from which ``p`` reaches a node satisfying ``tail``."""
    if p.absolute and not p.steps:
        raise UnsupportedAxis("the document node carries no attributes")
    f = tail
    for step in reversed(p.steps[1:] if p.absolute else p.steps):
        f = exists_via(step.axis, _step_here(step, f))
    if p.absolute:
        # the first step starts from the document node, wherever the current node is
        first = p.steps[0]
        return somewhere_in_tree(_conj(from_document(first.axis), _step_here(first, f)))
    return f


def forward(q: Query) -> Formula:
    """Holds at nodes from which ``q`` selects at least one node."""
    if isinstance(q, Union):
        return Or(forward(q.left), forward(q.right))
    if isinstance(q, Intersection):
        raise XPathError("intersection is not supported where a query is read forward")
    return forward_path(q)


def compile_path(p: Path, context: Formula) -> Formula:
    if not p.steps:
        raise UnsupportedAxis("the document node itself cannot be selected")
    f: Formula | None = None
    for i, step in enumerate(p.steps):
        if i == 0 and p.absolute:
            nav = from_document(step.axis)
            if not isinstance(context, Top):
                nav = _conj(nav, somewhere_in_tree(context))
        else:
            prev = context if i == 0 else f
            nav = exists_via(INVERSE[step.axis], prev)
        f = _conj(_test(step), *(compile_qualifier(x) for x in step.qualifiers), nav)
    return f


def compile_query(q: Query, context: Formula = CONTEXT) -> Formula:
    """Formula holding at the nodes selected by ``q`` from nodes satisfying ``context``."""
    if isinstance(q, Union):
        return Or(compile_query(q.left, context), compile_query(q.right, context))
    if isinstance(q, Intersection):
        return And(compile_query(q.left, context), compile_query(q.right, context))
    return compile_path(q, context)


def compile_xpath(text: str, context: Formula = CONTEXT) -> Formula:
    return compile_query(desugar(parse_xpath(text)), context)


def query_size(q: Query | Qualifier | Step) -> int:
    """Number of steps, qualifiers and operators in a query."""
    if isinstance(q, (Union, Intersection, QAnd, QOr)):
        return 1 + query_size(q.left) + query_size(q.right)
    if isinstance(q, QNot):
        return 1 + query_size(q.sub)
    if isinstance(q, QPath):
        return 1 + query_size(q.path)
    if isinstance(q, Step):
        return 1 + sum(query_size(x) for x in q.qualifiers)
    if isinstance(q, Path):
        return 1 + sum(query_size(s) for s in q.steps)
    return 1
