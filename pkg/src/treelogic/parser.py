"""Problem specifications: lexer, parser, and predicate expansion.

A specification is a list of custom predicate definitions followed by a
goal formula, separated by ``;``.  Predicates (built-in and custom) are
macros; :func:`expand_predicates` turns a specification into a core
formula.
"""
from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import dtd as dtdmod
from . import xpath
from .formula import (
    And, Attribute, BOTTOM, CONTEXT, CONTEXT_PROP, Call, ContextMark, Element, Equiv, Formula,
    FormulaError, Implies, Let, Modal, Not, Or, Program, Prop, StringArg, TOP, Var, attribute_names,
    children, disj, element_names, fresh_var, freshen, rebuild, substitute,
)

KEYWORDS = {"let", "in", "mu", "let_mu", "T", "F"}
UNSUPPORTED = {
    "forward_incompatible", "backward_incompatible", "added_element", "added_attribute",
    "non_empty", "new_element_names", "new_regions", "new_contents", "typetag",
}
BUILTINS = {"select", "exists", "type", "element", "attribute", "descendant", "exclude"}


class SpecError(Exception):
    pass


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int, column: int):
        self.line, self.column = line, column
        super().__init__(f"{message} (line {line}, column {column})")


class ArityError(SpecError):
    pass


class UnknownPredicate(SpecError):
    pass


class UnsupportedPredicate(SpecError):
    pass


# -- lexer ------------------------------------------------------------------------------------

_TOKENS = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<equiv><=>)
  | (?P<implies>=>)
  | (?P<program><(?:-?[12])>)
  | (?P<attrmod><@[A-Za-z_][\w\-.:]*>)
  | (?P<var>\$[A-Za-z_][\w\-]*(?:\.[\w\-]+)*)
  | (?P<attr>@[A-Za-z_][\w\-]*(?:[.:][\w\-]+)*)
  | (?P<ident>[A-Za-z_][\w\-]*(?:[.:][\w\-]+)*)
  | (?P<punct>[|&~(),;=.\#])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    value: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    i, line, line_start = 0, 1, 0
    while i < len(text):
        m = _TOKENS.match(text, i)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), line, i - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = i + chunk.rindex("\n") + 1
        i = m.end()
    out.append(Token("end", "", line, i - line_start + 1))
    return out


def unquote(literal: str) -> str:
    return re.sub(r"\\(.)", r"\1", literal[1:-1])


# -- AST of specifications ------------------------------------------------------------------

@dataclass
class PredicateDef:
    name: str
    params: list[str]
    body: Formula


@dataclass
class ProblemSpec:
    definitions: list[PredicateDef]
    goal: Formula


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.scopes: list[dict[str, str]] = []
        self.params: set[str] = set()

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        found = tok.value or "end of input"
        raise SpecSyntaxError(f"{message}, found {found!r}", tok.line, tok.column)

    def is_(self, value: str) -> bool:
        return self.tok.value == value and self.tok.kind != "string"

    def expect(self, value: str) -> Token:
        if not self.is_(value):
            self.fail(f"expected {value!r}")
        t = self.tok
        self.i += 1
        return t

    # spec := (def ';')* formula ';'?

    def spec(self) -> ProblemSpec:
        defs: list[PredicateDef] = []
        while self._definition_ahead():
            d = self.definition()
            if d.name in {x.name for x in defs}:
                raise SpecError(f"predicate {d.name} is defined twice")
            defs.append(d)
            self.expect(";")
        goal = self.formula()
        if self.is_(";"):
            self.i += 1
        if self.tok.kind != "end":
            self.fail("unexpected input after the goal formula")
        return ProblemSpec(defs, goal)

    def _definition_ahead(self) -> bool:
        if self.tok.kind != "ident" or self.peek().value != "(":
            return False
        depth, j = 0, self.i + 1
        while j < len(self.toks):
            t = self.toks[j]
            if t.kind == "end":
                return False
            if t.value == "(" and t.kind == "punct":
                depth += 1
            elif t.value == ")" and t.kind == "punct":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[j + 1]
                    return nxt.kind == "punct" and nxt.value == "="
            j += 1
        return False

    def definition(self) -> PredicateDef:
        name_tok = self.tok
        name = name_tok.value
        if name in KEYWORDS or name in BUILTINS or name in UNSUPPORTED:
            self.fail(f"cannot redefine {name!r}", name_tok)
        self.i += 1
        self.expect("(")
        params: list[str] = []
        while not self.is_(")"):
            if params:
                self.expect(",")
            t = self.tok
            if t.kind not in ("ident", "var"):
                self.fail("expected a parameter name")
            p = t.value.lstrip("$")
            if p in params:
                self.fail(f"duplicate parameter {p!r}", t)
            params.append(p)
            self.i += 1
        self.expect(")")
        self.expect("=")
        self.params = set(params)
        try:
            body = self.formula()
        finally:
            self.params = set()
        return PredicateDef(name, params, body)

    # formula := impl ('<=>' formula)?

    def formula(self) -> Formula:
        left = self.implication()
        if self.tok.kind == "equiv":
            self.i += 1
            return Equiv(left, self.formula())
        return left

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.tok.kind == "implies":
            self.i += 1
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.is_("|"):
            self.i += 1
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.is_("&"):
            self.i += 1
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        t = self.tok
        if self.is_("~"):
            self.i += 1
            return Not(self.unary())
        if t.kind == "program":
            self.i += 1
            return Modal(Program(int(t.value[1:-1])), self.unary())
        if t.kind == "attrmod":
            self.i += 1
            if not self.is_("T"):
                self.fail("an attribute modality must be followed by T")
            self.i += 1
            return Attribute(t.value[2:-1])
        return self.primary()

    def primary(self) -> Formula:
        t = self.tok
        if t.kind == "ident" and t.value in ("let", "let_mu"):
            return self.let()
        if t.kind == "ident" and t.value == "mu":
            self.i += 1
            name = self._binder_name()
            self.expect(".")
            return self._bind([name], lambda: [self.unary()], single=True)
        self.i += 1
        if t.kind == "ident" and t.value == "T":
            return TOP
        if t.kind == "ident" and t.value == "F":
            return BOTTOM
        if t.kind == "punct" and t.value == "#":
            return CONTEXT
        if t.kind == "punct" and t.value == "(":
            f = self.formula()
            self.expect(")")
            return f
        if t.kind == "attr":
            return Attribute(t.value[1:])
        if t.kind == "var":
            return self._variable(t.value[1:], t)
        if t.kind == "ident":
            if t.value in KEYWORDS:
                self.fail("misplaced keyword", t)
            if self.is_("("):
                return self.call(t.value)
            return self._name(t.value)
        self.i -= 1
        self.fail("expected a formula")

    def _binder_name(self) -> str:
        t = self.tok
        if t.kind not in ("var", "ident") or t.value.lstrip("$") in KEYWORDS:
            self.fail("expected a variable name")
        self.i += 1
        return t.value.lstrip("$")

    def let(self) -> Formula:
        self.i += 1
        names, sources = [], []
        start = self.i
        # first pass: collect the binder names so that bodies can refer to all of them
        while True:
            names.append(self._binder_name())
            self.expect("=")
            sources.append(self.i)
            self._skip_formula()
            if self.is_(","):
                self.i += 1
                continue
            break
        if len(set(names)) != len(names):
            raise SpecSyntaxError("binder names must be distinct", self.toks[start].line,
                                  self.toks[start].column)
        self.i = start

        def parse_bindings() -> list[Formula]:
            bodies = []
            for k in range(len(names)):
                self._binder_name()
                self.expect("=")
                bodies.append(self.formula())
                if k < len(names) - 1:
                    self.expect(",")
            self.expect("in")
            bodies.append(self.formula())
            return bodies

        return self._bind(names, parse_bindings)

    def _skip_formula(self) -> None:
        """Advance past one binding body (to the next top-level ',' or 'in')."""
        depth = 0
        while True:
            t = self.tok
            if t.kind == "end":
                self.fail("unterminated let")
            if t.kind == "punct" and t.value == "(":
                depth += 1
            elif t.kind == "punct" and t.value == ")":
                depth -= 1
            elif t.kind == "ident" and t.value in ("let", "let_mu"):
                depth += 1
            elif t.kind == "ident" and t.value == "in":
                if depth == 0:
                    return
                depth -= 1
            elif t.kind == "punct" and t.value == "," and depth == 0:
                return
            self.i += 1

    def _bind(self, names: list[str], parse_parts, single: bool = False) -> Formula:
        fresh = {n: fresh_var(n) for n in names}
        self.scopes.append(fresh)
        try:
            parts = parse_parts()
        finally:
            self.scopes.pop()
        if single:
            v = fresh[names[0]]
            return Let(((v, parts[0]),), Var(v))
        bindings = tuple((fresh[n], b) for n, b in zip(names, parts[:-1]))
        return Let(bindings, parts[-1])

    def _lookup(self, name: str) -> str | None:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def _variable(self, name: str, tok: Token) -> Formula:
        bound = self._lookup(name)
        if bound is not None:
            return Var(bound)
        if name in self.params:
            return Var(name)
        self.fail(f"unbound variable ${name}", tok)

    def _name(self, name: str) -> Formula:
        bound = self._lookup(name)
        if bound is not None:
            return Var(bound)
        if name in self.params:
            return Var(name)
        if name == CONTEXT_PROP:
            return CONTEXT
        if name.startswith("_"):
            return Prop(name)
        return Element(name)

    def call(self, name: str) -> Formula:
        self.expect("(")
        args: list[Formula] = []
        while not self.is_(")"):
            if args:
                self.expect(",")
            if self.tok.kind == "string":
                args.append(StringArg(unquote(self.tok.value)))
                self.i += 1
            else:
                args.append(self.formula())
        self.expect(")")
        return Call(name, tuple(args))


def parse_spec(text: str) -> ProblemSpec:
    """Parse a problem specification (definitions followed by a goal formula)."""
    return _Parser(text).spec()


def parse_formula(text: str) -> Formula:
    """Parse a single formula (no definitions)."""
    p = _Parser(text)
    f = p.formula()
    if p.tok.kind != "end":
        p.fail("unexpected input after the formula")
    return f


# -- expansion ------------------------------------------------------------------------------------

@dataclass
class SchemaTiming:
    path: str
    start: str
    btt_ms: float
    logic_ms: float


@dataclass
class Expander:
    """Expands predicate calls; remembers what the driver wants to report."""

    base_dir: Path = field(default_factory=Path.cwd)
    strict_dtd: bool = False
    contexts: list[Formula] = field(default_factory=list)
    schemas: list[SchemaTiming] = field(default_factory=list)
    _defs: dict[str, PredicateDef] = field(default_factory=dict)
    _dtds: dict[tuple[str, str], dtdmod.BinaryTreeType] = field(default_factory=dict)

    def expand_spec(self, spec: ProblemSpec) -> Formula:
        self._defs = {}
        for d in spec.definitions:
            self._check_calls(d.body, d.name)
            self._defs[d.name] = d
        return self.expand(spec.goal)

    def _check_calls(self, f: Formula, current: str) -> None:
        for g in _calls(f):
            if g.name == current:
                raise SpecError(f"predicate {current} calls itself; use a let binder for recursion")
            if g.name not in self._defs and g.name not in BUILTINS and g.name not in UNSUPPORTED:
                raise UnknownPredicate(f"{current} calls {g.name}, which is not defined before it")

    def expand(self, f: Formula) -> Formula:
        if isinstance(f, Call):
            return self.call(f)
        if isinstance(f, StringArg):
            raise SpecError(f"string {f.value!r} used where a formula is expected")
        kids = children(f)
        if not kids:
            return f
        return rebuild(f, tuple(self.expand(g) for g in kids))

    def call(self, c: Call) -> Formula:
        name, args = c.name, c.args
        if name in UNSUPPORTED:
            raise UnsupportedPredicate(f"predicate {name} is not supported")
        if name in ("select", "exists"):
            self._arity(c, 1, 2)
            query = self._string(c, 0)
            ctx = self.expand(args[1]) if len(args) == 2 else CONTEXT
            if len(args) == 2 and isinstance(args[1], Call) and args[1].name == "type":
                ctx = And(ctx, xpath.is_root())
            if not isinstance(ctx, ContextMark):
                self.contexts.append(ctx)
            q = xpath.desugar(xpath.parse_xpath(query))
            if name == "select":
                return xpath.compile_query(q, ctx)
            return And(ctx, xpath.forward(q))
        if name == "type":
            self._arity(c, 2, 2)
            return self.schema(self._string(c, 0), self._string(c, 1))
        if name in ("element", "attribute", "descendant", "exclude"):
            self._arity(c, 1, 1)
            sub = self.expand(args[0])
            if name == "element":
                return disj(Element(n) for n in element_names(sub)) if element_names(sub) else BOTTOM
            if name == "attribute":
                names = attribute_names(sub)
                return disj(Attribute(n) for n in names) if names else BOTTOM
            if name == "descendant":
                return xpath.has_descendant(sub)
            return Not(xpath.somewhere_in_tree(sub))
        d = self._defs.get(name)
        if d is None:
            raise UnknownPredicate(f"unknown predicate {name}")
        if len(args) != len(d.params):
            raise ArityError(f"{name} expects {len(d.params)} argument(s), got {len(args)}")
        values = {p: self.expand(a) for p, a in zip(d.params, args)}
        return self.expand(substitute(freshen(d.body), values))

    def schema(self, path: str, start: str) -> Formula:
        key = (path, start)
        if key not in self._dtds:
            t0 = time.perf_counter()
            d = dtdmod.parse_dtd(Path(self.base_dir, path), start, strict=self.strict_dtd)
            btt = dtdmod.to_btt(d, start)
            t1 = time.perf_counter()
            self._dtds[key] = btt
        else:
            btt = self._dtds[key]
            t1 = t0 = time.perf_counter()
        f = dtdmod.compile_btt(btt)
        t2 = time.perf_counter()
        self.schemas.append(SchemaTiming(path, start, (t1 - t0) * 1000, (t2 - t1) * 1000))
        return f

    @staticmethod
    def _arity(c: Call, lo: int, hi: int) -> None:
        if not lo <= len(c.args) <= hi:
            want = str(lo) if lo == hi else f"{lo} or {hi}"
            raise ArityError(f"{c.name} expects {want} argument(s), got {len(c.args)}")

    @staticmethod
    def _string(c: Call, k: int) -> str:
        if not isinstance(c.args[k], StringArg):
            raise ArityError(f"argument {k + 1} of {c.name} must be a string literal")
        return c.args[k].value


def _calls(f: Formula):
    if isinstance(f, Call):
        yield f
    for g in children(f):
        yield from _calls(g)


def expand_predicates(spec: ProblemSpec, base_dir: str | Path | None = None,
                      strict_dtd: bool = False) -> Formula:
    """The closed, predicate-free formula denoted by ``spec``."""
    ex = Expander(Path(base_dir) if base_dir is not None else Path.cwd(), strict_dtd)
    return ex.expand_spec(spec)


def load(text: str, base_dir: str | Path | None = None) -> Formula:
    return expand_predicates(parse_spec(text), base_dir)
