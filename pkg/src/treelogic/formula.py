"""Abstract syntax of the tree logic and its syntactic transformations.

Formulas are immutable values.  Bound variables carry globally unique
internal names (assigned when a formula is parsed or built), so substitution
never needs to rename binders except when a macro body is instantiated twice.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator


class FormulaError(Exception):
    pass


class CycleError(FormulaError):
    """Raised when an operation requires a cycle-free formula."""


class UnexpandedPredicate(FormulaError):
    pass


class UnboundVariable(FormulaError):
    pass


class NonMonotoneError(FormulaError):
    """A recursion variable occurs negatively inside its own recursion."""


class Program(IntEnum):
    FIRST_CHILD = 1
    NEXT_SIBLING = 2
    PARENT = -1
    PREV_SIBLING = -2

    @property
    def converse(self) -> "Program":
        return Program(-self.value)

    @property
    def forward(self) -> bool:
        return self.value > 0

    def __str__(self) -> str:
        return str(self.value)


class Formula:
    """Base class; supports ``&``, ``|`` and ``~`` for building formulas."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return pretty_print(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class Element(Formula):
    name: str


@dataclass(frozen=True)
class Attribute(Formula):
    name: str


@dataclass(frozen=True)
class Prop(Formula):
    """Atomic proposition; printed names start with an underscore."""

    name: str


@dataclass(frozen=True)
class ContextMark(Formula):
    """The start-context symbol ``#``; compiles to the proposition ``_context``."""


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Equiv(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class Modal(Formula):
    program: Program
    sub: Formula


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class Let(Formula):
    bindings: tuple[tuple[str, Formula], ...]
    body: Formula

    def binding(self, name: str) -> Formula:
        for n, f in self.bindings:
            if n == name:
                return f
        raise UnboundVariable(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.bindings)


@dataclass(frozen=True)
class StringArg(Formula):
    """A string literal argument of a predicate call (query, file name, label)."""

    value: str


@dataclass(frozen=True)
class Call(Formula):
    name: str
    args: tuple[Formula, ...]


TOP = Top()
BOTTOM = Bottom()
CONTEXT = ContextMark()
CONTEXT_PROP = "_context"
ATOMS = (Top, Bottom, Element, Attribute, Prop, ContextMark)

_counter = itertools.count(1)


def fresh_var(hint: str = "X") -> str:
    """Return a variable name that cannot clash with any other binder."""
    return f"{hint.lstrip('$~')}.{next(_counter)}"


def dual_name(name: str) -> str:
    return name[1:] if name.startswith("~") else "~" + name


def mu(body_fn, hint: str = "X") -> Let:
    """Build ``let X = body_fn(X) in X`` with a fresh variable."""
    name = fresh_var(hint)
    return Let(((name, body_fn(Var(name))),), Var(name))


def conj(items: Iterable[Formula]) -> Formula:
    return _balanced(list(items), And, TOP)


def disj(items: Iterable[Formula]) -> Formula:
    return _balanced(list(items), Or, BOTTOM)


def _balanced(items, op, unit):
    if not items:
        return unit
    while len(items) > 1:
        paired = [op(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            paired.append(items[-1])
        items = paired
    return items[0]


def dia(program: int, sub: Formula = TOP) -> Modal:
    return Modal(Program(program), sub)


# -- traversal helpers ---------------------------------------------------------

def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (Or, And, Implies, Equiv)):
        return (f.left, f.right)
    if isinstance(f, (Not, Modal)):
        return (f.sub,)
    if isinstance(f, Let):
        return tuple(b for _, b in f.bindings) + (f.body,)
    if isinstance(f, Call):
        return f.args
    return ()


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def free_vars(f: Formula) -> set[str]:
    if isinstance(f, Var):
        return {f.name}
    if isinstance(f, Let):
        inner = set().union(*(free_vars(g) for g in children(f)))
        return inner - set(f.names)
    return set().union(*(free_vars(g) for g in children(f))) if children(f) else set()


def element_names(f: Formula) -> list[str]:
    seen = dict.fromkeys(g.name for g in walk(f) if isinstance(g, Element))
    return list(seen)


def attribute_names(f: Formula) -> list[str]:
    seen = dict.fromkeys(g.name for g in walk(f) if isinstance(g, Attribute))
    return list(seen)


def rebuild(f: Formula, kids: tuple[Formula, ...]) -> Formula:
    if isinstance(f, (Or, And, Implies, Equiv)):
        return type(f)(kids[0], kids[1])
    if isinstance(f, Not):
        return Not(kids[0])
    if isinstance(f, Modal):
        return Modal(f.program, kids[0])
    if isinstance(f, Let):
        names = f.names
        return Let(tuple(zip(names, kids[:-1])), kids[-1])
    if isinstance(f, Call):
        return Call(f.name, kids)
    return f


def substitute(f: Formula, mapping: dict[str, Formula]) -> Formula:
    """Replace free variables; binders are assumed globally unique."""
    if not mapping:
        return f
    if isinstance(f, Var):
        return mapping.get(f.name, f)
    if isinstance(f, Let):
        inner = {k: v for k, v in mapping.items() if k not in f.names}
        return rebuild(f, tuple(substitute(g, inner) for g in children(f)))
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(substitute(g, mapping) for g in kids))


def freshen(f: Formula) -> Formula:
    """Alpha-rename every binder of ``f`` to fresh names."""
    if isinstance(f, Let):
        renaming = {n: Var(fresh_var(n.split(".")[0])) for n in f.names}
        bindings = tuple(
            (renaming[n].name, freshen(substitute(b, renaming))) for n, b in f.bindings
        )
        return Let(bindings, freshen(substitute(f.body, renaming)))
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(freshen(g) for g in kids))


def unfold(binder: Let, var: str) -> Formula:
    """One unfolding step: the binding of ``var`` with every variable of the
    binder replaced by the binder re-wrapped around that variable."""
    body = binder.binding(var)
    return substitute(body, {n: Let(binder.bindings, Var(n)) for n in binder.names})


# -- cycle-freeness ------------------------------------------------------------

@dataclass
class CycleReport:
    violations: list[tuple[str, tuple[Program, Program]]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def cycle_check(f: Formula) -> CycleReport:
    """Check that no variable reaches its binder through both a program and
    its converse.

    Recursion through several variables counts too, including variables of
    nested binders: the programs met along any dependency cycle between
    bindings are pooled.
    """
    violations: list[tuple[str, tuple[Program, Program]]] = []
    seen: set[tuple[str, Program]] = set()

    def report(name: str, progs: set[Program]) -> None:
        for p in sorted(progs, key=lambda p: (abs(p), -p)):
            if p.forward and p.converse in progs and (name, p) not in seen:
                seen.add((name, p))
                violations.append((name, (p, p.converse)))

    path: list[Program] = []
    starts: dict[str, int] = {}

    def visit(g: Formula) -> None:
        if isinstance(g, Var):
            if g.name in starts:
                report(g.name, set(path[starts[g.name]:]))
            return
        if isinstance(g, Modal):
            path.append(g.program)
            visit(g.sub)
            path.pop()
            return
        if isinstance(g, Let):
            saved = {n: starts.get(n) for n in g.names}
            for n in g.names:
                starts[n] = len(path)
            for g2 in children(g):
                visit(g2)
            for n, old in saved.items():
                if old is None:
                    del starts[n]
                else:
                    starts[n] = old
            return
        for g2 in children(g):
            visit(g2)

    visit(f)
    names, edges = _dependencies(f)
    graph: dict[int, list[int]] = {k: [] for k in range(len(names))}
    for a, b, _ in edges:
        graph[a].append(b)
    comp = {k: i for i, scc in enumerate(_sccs(graph)) for k in scc}
    pooled: dict[int, set[Program]] = {}
    for a, b, progs in edges:
        if comp[a] == comp[b]:
            pooled.setdefault(comp[a], set()).update(progs)
    for i, progs in pooled.items():
        report(names[min(k for k in comp if comp[k] == i)], progs)
    return CycleReport(violations)


def _dependencies(f: Formula) -> tuple[list[str], list[tuple[int, int, frozenset[Program]]]]:
    """Binding-to-variable edges labelled with the programs on the way.

    Bindings are numbered in order of appearance; an occurrence in a let
    body belongs to the binding that encloses the let.
    """
    names: list[str] = []
    edges: list[tuple[int, int, frozenset[Program]]] = []

    def visit(g: Formula, scope: dict[str, int], src: int | None, progs: frozenset[Program]):
        if isinstance(g, Var):
            if src is not None and g.name in scope:
                edges.append((src, scope[g.name], progs))
        elif isinstance(g, Modal):
            visit(g.sub, scope, src, progs | {g.program})
        elif isinstance(g, Let):
            inner = dict(scope)
            for n in g.names:
                inner[n] = len(names)
                names.append(n)
            for n, b in g.bindings:
                visit(b, inner, inner[n], frozenset())
            visit(g.body, inner, src, progs)
        else:
            for k in children(g):
                visit(k, scope, src, progs)

    visit(f, {}, None, frozenset())
    return names, edges


# -- negation normal form --------------------------------------------------------

class _LetFrame:
    def __init__(self, let: Let, names: dict[str, str]):
        self.let = let
        self.names = names
        self.requested: dict[tuple[str, bool], None] = {}

    def request(self, name: str, positive: bool) -> str:
        self.requested.setdefault((name, positive))
        return name if positive else dual_name(name)


class _NnfConverter:
    def __init__(self) -> None:
        self.frames: dict[str, _LetFrame] = {}
        self.dualized = False

    def convert(self, f: Formula, pos: bool) -> Formula:
        if isinstance(f, Top):
            return TOP if pos else BOTTOM
        if isinstance(f, Bottom):
            return BOTTOM if pos else TOP
        if isinstance(f, (Element, Attribute, Prop, ContextMark)):
            return f if pos else Not(f)
        if isinstance(f, Not):
            return self.convert(f.sub, not pos)
        if isinstance(f, (And, Or)):
            left, right = self.convert(f.left, pos), self.convert(f.right, pos)
            if isinstance(f, And) == pos:
                return And(left, right)
            return Or(left, right)
        if isinstance(f, Implies):
            return self.convert(Or(Not(f.left), f.right), pos)
        if isinstance(f, Equiv):
            return self.convert(
                And(Implies(f.left, f.right), Implies(f.right, f.left)), pos
            )
        if isinstance(f, Modal):
            if pos:
                return Modal(f.program, self.convert(f.sub, True))
            if isinstance(f.sub, Top):
                return Not(Modal(f.program, TOP))
            return Or(Modal(f.program, self.convert(f.sub, False)),
                      Not(Modal(f.program, TOP)))
        if isinstance(f, Var):
            frame = self.frames.get(f.name)
            if frame is None:
                raise UnboundVariable(f.name)
            if not pos:
                self.dualized = True
            return Var(frame.request(f.name, pos))
        if isinstance(f, Let):
            return self._convert_let(f, pos)
        if isinstance(f, Call):
            raise UnexpandedPredicate(f.name)
        raise TypeError(f"not a formula: {f!r}")

    def _convert_let(self, f: Let, pos: bool) -> Formula:
        frame = _LetFrame(f, {})
        saved = {n: self.frames.get(n) for n in f.names}
        for n in f.names:
            self.frames[n] = frame
        body = self.convert(f.body, pos)
        built: dict[tuple[str, bool], Formula] = {}
        while True:
            todo = [k for k in frame.requested if k not in built]
            if not todo:
                break
            for name, p in todo:
                built[(name, p)] = self.convert(f.binding(name), p)
        for n, old in saved.items():
            if old is None:
                del self.frames[n]
            else:
                self.frames[n] = old
        if not built:
            return body
        bindings = tuple(
            (n if p else dual_name(n), built[(n, p)]) for (n, p) in frame.requested
        )
        return Let(bindings, body)


def to_nnf(f: Formula) -> Formula:
    """Negation normal form: negation only on atoms and on ``<p>T``.

    Negated recursion is dualized by introducing a companion variable
    ``~X`` for ``X``; this needs ``f`` to be cycle-free.
    """
    conv = _NnfConverter()
    out = conv.convert(f, True)
    if conv.dualized:
        report = cycle_check(f)
        if not report.ok:
            raise CycleError(_describe(report))
    _check_monotone(out)
    return _eliminate_unguarded(out)


def negate(f: Formula) -> Formula:
    return to_nnf(Not(f))


def _describe(report: CycleReport) -> str:
    return "; ".join(f"{v} under both {a} and {b}" for v, (a, b) in report.violations)


def bindings_of(f: Formula) -> dict[str, Formula]:
    """All let-bindings of ``f`` keyed by (unique) variable name."""
    out: dict[str, Formula] = {}
    for g in walk(f):
        if isinstance(g, Let):
            for n, b in g.bindings:
                prev = out.setdefault(n, b)
                if prev is not b and prev != b:
                    raise FormulaError(f"variable {n} bound twice with different bodies")
    return out


def _refs(f: Formula, guarded_only: bool | None) -> list[str]:
    """Variables referenced in ``f`` (nested let bodies are transparent).

    ``guarded_only=False`` returns only unguarded references, ``None`` all.
    """
    out: list[str] = []

    def visit(g: Formula, under_modal: bool) -> None:
        if isinstance(g, Var):
            if guarded_only is None or under_modal == guarded_only:
                out.append(g.name)
        elif isinstance(g, Modal):
            visit(g.sub, True)
        elif isinstance(g, Let):
            visit(g.body, under_modal)
        else:
            for k in children(g):
                visit(k, under_modal)

    visit(f, False)
    return out


def _sccs(graph: dict) -> list[list]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    result: list[list[str]] = []
    counter = itertools.count()

    for root in graph:
        if root in index:
            continue
        work = [(root, iter(graph.get(root, ())))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in graph:
                    continue
                if nxt not in index:
                    index[nxt] = low[nxt] = next(counter)
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(graph[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                result.append(comp)
    return result


def _check_monotone(f: Formula) -> None:
    binds = bindings_of(f)
    graph = {n: [r for r in _refs(b, None)] for n, b in binds.items()}
    for comp in _sccs(graph):
        members = set(comp)
        for n in comp:
            if dual_name(n) in members:
                raise NonMonotoneError(f"variable {n.lstrip('~')} occurs negatively in its own recursion")


def _eliminate_unguarded(f: Formula) -> Formula:
    """Remove recursion that does not pass through a modality.

    Such loops have several local solutions; the least one is taken for
    ``X`` and the greatest for its dual ``~X``.  The formula is flattened
    into a single simultaneous binder when this is needed (sound for the
    cycle-free formulas this is applied to, whose fixpoints are unique)
    and then nested again by dependency, see :func:`_renest`.
    """
    binds = bindings_of(f)
    graph = {n: _refs(b, False) for n, b in binds.items()}
    loops = [c for c in _sccs(graph) if len(c) > 1 or c[0] in graph[c[0]]]
    if not loops:
        return f
    bodies = {n: _strip_lets(b) for n, b in binds.items()}
    main = _strip_lets(f)
    for comp in loops:
        kinds = {n.startswith("~") for n in comp}
        if len(kinds) > 1:
            raise NonMonotoneError("unguarded recursion mixes a variable with a negated one")
        unit = TOP if kinds.pop() else BOTTOM
        order = sorted(comp, key=list(binds).index)
        for i, n in enumerate(order):
            bodies[n] = _subst_unguarded(bodies[n], {n: unit})
            for m in order:
                if m != n:
                    bodies[m] = _subst_unguarded(bodies[m], {n: bodies[n]})
    return _renest(bodies, main)


def _renest(bodies: dict[str, Formula], main: Formula) -> Formula:
    """Turn a flat simultaneous binder back into nested ones.

    Each strongly connected group of variables gets its own binder, placed
    at every use.  This keeps a variable's occurrences inside its binding
    bodies, so the result stays cycle-free.
    """
    graph = {n: [r for r in _refs(b, None) if r in bodies] for n, b in bodies.items()}
    comp_of: dict[str, int] = {}
    comps = _sccs(graph)
    for i, comp in enumerate(comps):
        for n in comp:
            comp_of[n] = i
    closed: dict[str, Formula] = {}
    order = list(bodies)

    def close(name: str) -> Formula:
        if name not in closed:
            i = comp_of[name]
            members = sorted(comps[i], key=order.index)
            outside = {r for n in members for r in graph[n] if comp_of[r] != i}
            mapping = {r: close(r) for r in sorted(outside, key=order.index)}
            bindings = tuple((n, substitute(bodies[n], mapping)) for n in members)
            for n in members:
                closed[n] = Let(bindings, Var(n))
        return closed[name]

    used = [r for r in _refs(main, None) if r in bodies]
    return substitute(main, {r: close(r) for r in used})


def _strip_lets(f: Formula) -> Formula:
    if isinstance(f, Let):
        return _strip_lets(f.body)
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(_strip_lets(g) for g in kids))


def _subst_unguarded(f: Formula, mapping: dict[str, Formula]) -> Formula:
    if isinstance(f, Var):
        return mapping.get(f.name, f)
    if isinstance(f, Modal):
        return f
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(_subst_unguarded(g, mapping) for g in kids))


# -- printing ------------------------------------------------------------------

def _number_variables(f: Formula) -> dict[str, str]:
    names: dict[str, str] = {}
    counter = itertools.count(1)

    def visit(g: Formula) -> None:
        for k in children(g):
            visit(k)
        if isinstance(g, Let):
            for n in g.names:
                if n not in names:
                    names[n] = f"X{next(counter)}"

    visit(f)
    return names


def _wrapped(s: str) -> bool:
    if not s.startswith("(") or not s.endswith(")"):
        return False
    depth = 0
    in_str = False
    for i, ch in enumerate(s):
        if in_str:
            if ch == "\\":
                continue
            if ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0 and i != len(s) - 1:
                return False
    return True


def _paren(s: str) -> str:
    return s if _wrapped(s) else f"({s})"


def quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def pretty_print(f: Formula) -> str:
    """Render ``f`` in the solver's trace syntax (``mu Xn.`` / ``let_mu``)."""
    names = _number_variables(f)

    def pp(g: Formula) -> str:
        if isinstance(g, Top):
            return "T"
        if isinstance(g, Bottom):
            return "F"
        if isinstance(g, Element):
            return g.name
        if isinstance(g, Attribute):
            return "@" + g.name
        if isinstance(g, Prop):
            return g.name
        if isinstance(g, ContextMark):
            return CONTEXT_PROP
        if isinstance(g, Or):
            return f"({pp(g.left)} | {pp(g.right)})"
        if isinstance(g, And):
            return f"({pp(g.left)} & {pp(g.right)})"
        if isinstance(g, Implies):
            return f"({pp(g.left)} => {pp(g.right)})"
        if isinstance(g, Equiv):
            return f"({pp(g.left)} <=> {pp(g.right)})"
        if isinstance(g, Not):
            return "~" + _paren(pp(g.sub))
        if isinstance(g, Modal):
            return f"<{g.program.value}>{pp(g.sub)}"
        if isinstance(g, Var):
            return names.get(g.name, "$" + g.name)
        if isinstance(g, Let):
            if len(g.bindings) == 1 and g.body == Var(g.bindings[0][0]):
                n, b = g.bindings[0]
                return f"(mu {names[n]}.{_paren(pp(b))})"
            binds = ", ".join(f"{names[n]}={pp(b)}" for n, b in g.bindings)
            return f"(let_mu {binds} in {pp(g.body)})"
        if isinstance(g, StringArg):
            return quote(g.value)
        if isinstance(g, Call):
            return f"{g.name}({', '.join(pp(a) for a in g.args)})"
        raise TypeError(f"not a formula: {g!r}")

    return pp(f)


def alpha_equivalent(f: Formula, g: Formula) -> bool:
    """Structural equality up to the names of bound variables."""
    return _canonical(f) == _canonical(g)


def _canonical(f: Formula) -> Formula:
    names = _number_variables(f)
    return substitute_all_names(f, names)


def substitute_all_names(f: Formula, names: dict[str, str]) -> Formula:
    if isinstance(f, Var):
        return Var(names.get(f.name, f.name))
    if isinstance(f, ContextMark):
        return Prop(CONTEXT_PROP)
    if isinstance(f, Let):
        return Let(
            tuple((names.get(n, n), substitute_all_names(b, names)) for n, b in f.bindings),
            substitute_all_names(f.body, names),
        )
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(substitute_all_names(g, names) for g in kids))
