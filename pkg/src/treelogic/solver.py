"""Satisfiability of cycle-free formulas over finite binary trees.

The procedure follows the inverse-tableau scheme: a *node type* is a truth
assignment to the Lean (atomic propositions plus the modal subformulas of
the closure).  Starting from leaves, types are added whenever their
downward obligations are witnessed by already proved types and the
children's upward obligations agree with the parent.  The formula is
satisfiable iff a proved type without parent or previous sibling entails
it.  Sets of types are BDDs over the Lean bits; variable ``2k`` is bit
``k`` of the current type and ``2k+1`` bit ``k`` of a neighbour.
"""
from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .bdd import BDD, FALSE, TRUE
from .formula import (
    And, Attribute, Bottom, CONTEXT_PROP, ContextMark, CycleError, Element, Formula,
    FormulaError, Let, Modal, Not, Or, Program, Prop, Top, Var, cycle_check, to_nnf,
)
from .modelcheck import evaluate, mark_of
from .trees import BinaryTree

FORWARD = (Program.FIRST_CHILD, Program.NEXT_SIBLING)
ALL_PROGRAMS = (Program.FIRST_CHILD, Program.NEXT_SIBLING, Program.PARENT, Program.PREV_SIBLING)


CLUSTER_LIMIT = 2000


class SolverTimeout(Exception):
    pass


def somewhere(f: Formula) -> Formula:
    """``f`` holds at the root or at some node below it in the binary tree."""
    from .formula import fresh_var
    x = fresh_var("S")
    v = Var(x)
    body = Or(f, Or(Modal(Program.FIRST_CHILD, v), Modal(Program.NEXT_SIBLING, v)))
    return Let(((x, body),), v)


# -- closure -------------------------------------------------------------------

@dataclass
class Closure:
    """Interned NNF subformulas reachable from the root, with recursion
    variables read through their bindings (one unfolding per binder)."""

    nodes: list[tuple]
    index: dict[tuple, int]
    bodies: dict[str, int]
    root: int
    members: list[int]

    @property
    def formulas(self) -> list[tuple]:
        return [self.nodes[i] for i in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def describe(self, i: int) -> str:
        n = self.nodes[i]
        kind = n[0]
        if kind == "T":
            return "T"
        if kind == "F":
            return "F"
        if kind == "atom":
            return n[1]
        if kind == "natom":
            return f"~{n[1]}"
        if kind == "dia":
            return f"<{int(n[1])}>{self.describe(n[2])}"
        if kind == "ndia":
            return f"~<{int(n[1])}>T"
        if kind == "var":
            return n[1]
        sym = " & " if kind == "and" else " | "
        return "(" + self.describe(n[1]) + sym + self.describe(n[2]) + ")"


class _Interner:
    def __init__(self) -> None:
        self.nodes: list[tuple] = []
        self.index: dict[tuple, int] = {}
        self.bodies: dict[str, int] = {}
        self._memo: dict[int, tuple[Formula, int]] = {}

    def node(self, key: tuple) -> int:
        i = self.index.get(key)
        if i is None:
            i = len(self.nodes)
            self.nodes.append(key)
            self.index[key] = i
        return i

    def convert(self, f: Formula) -> int:
        hit = self._memo.get(id(f))
        if hit is not None and hit[0] is f:
            return hit[1]
        i = self._convert(f)
        self._memo[id(f)] = (f, i)
        return i

    def _convert(self, f: Formula) -> int:
        if isinstance(f, Top):
            return self.node(("T",))
        if isinstance(f, Bottom):
            return self.node(("F",))
        key = atom_key(f)
        if key is not None:
            return self.node(("atom", key))
        if isinstance(f, Not):
            key = atom_key(f.sub)
            if key is not None:
                return self.node(("natom", key))
            if isinstance(f.sub, Modal) and isinstance(f.sub.sub, Top):
                return self.node(("ndia", f.sub.program))
            raise FormulaError("formula is not in negation normal form")
        if isinstance(f, And):
            return self.node(("and", self.convert(f.left), self.convert(f.right)))
        if isinstance(f, Or):
            return self.node(("or", self.convert(f.left), self.convert(f.right)))
        if isinstance(f, Modal):
            return self.node(("dia", f.program, self.convert(f.sub)))
        if isinstance(f, Var):
            return self.node(("var", f.name))
        if isinstance(f, Let):
            for name, body in f.bindings:
                b = self.convert(body)
                if self.bodies.setdefault(name, b) != b:
                    raise FormulaError(f"variable {name} bound twice with different bodies")
            return self.convert(f.body)
        raise FormulaError(f"unexpected formula in negation normal form: {f!r}")


def atom_key(f: Formula) -> str | None:
    if isinstance(f, Element):
        return f.name
    if isinstance(f, Attribute):
        return "@" + f.name
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, ContextMark):
        return CONTEXT_PROP
    return None


def is_element_key(key: str) -> bool:
    return not key.startswith(("@", "_"))


def closure(f: Formula) -> Closure:
    """Fisher-Ladner closure of a closed, cycle-free NNF formula."""
    it = _Interner()
    root = it.convert(f)
    members: list[int] = []
    seen: set[int] = set()
    stack = [root]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        members.append(i)
        n = it.nodes[i]
        if n[0] in ("and", "or"):
            stack += [n[2], n[1]]
        elif n[0] == "dia":
            stack.append(n[2])
        elif n[0] == "var":
            if n[1] not in it.bodies:
                raise FormulaError(f"unbound variable {n[1]}")
            stack.append(it.bodies[n[1]])
    return Closure(it.nodes, it.index, it.bodies, root, members)


# -- lean and node types ---------------------------------------------------------------

@dataclass
class Lean:
    atoms: list[str]
    modals: list[int]
    closure: Closure = field(repr=False)
    position: dict[object, int] = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.atoms) + len(self.modals)

    @property
    def eventualities(self) -> int:
        return len(self.modals)

    @property
    def symbols(self) -> int:
        return len(self.atoms)

    def members(self) -> list[str]:
        return [self.describe(k) for k in range(self.size)]

    def describe(self, k: int) -> str:
        if k < len(self.atoms):
            return self.atoms[k]
        return self.closure.describe(self.modals[k - len(self.atoms)])

    def true_modal(self, p: Program) -> int:
        return self.position[self.closure.index[("dia", p, self.closure.index[("T",)])]]


def lean(c: Closure) -> Lean:
    """Atoms and modal formulas of the closure, plus ``<p>T`` for every program."""
    nodes = c.nodes
    t = c.index.get(("T",))
    if t is None:
        t = len(nodes)
        nodes.append(("T",))
        c.index[("T",)] = t
    modals: list[int] = []
    for p in ALL_PROGRAMS:
        key = ("dia", p, t)
        i = c.index.get(key)
        if i is None:
            i = len(nodes)
            nodes.append(key)
            c.index[key] = i
        modals.append(i)
    atoms: list[str] = []
    for i in c.members:
        n = nodes[i]
        if n[0] in ("atom", "natom") and n[1] not in atoms:
            atoms.append(n[1])
        elif n[0] == "dia" and i not in modals:
            modals.append(i)
    position: dict[object, int] = {a: k for k, a in enumerate(atoms)}
    for k, i in enumerate(modals):
        position[i] = len(atoms) + k
    return Lean(atoms, modals, c, position)


@dataclass(frozen=True)
class NodeType:
    """Truth assignment to the Lean, as a bit vector (bit k = member k)."""

    bits: int

    def __contains__(self, k: int) -> bool:
        return bool(self.bits >> k & 1)

    def members(self, size: int) -> list[int]:
        return [k for k in range(size) if self.bits >> k & 1]


def entails(t: NodeType, f: int | Formula, ln: Lean) -> bool:
    """Truth of a closure formula at a node whose Lean assignment is ``t``."""
    c = ln.closure
    if isinstance(f, Formula):
        it = _Interner()
        it.nodes, it.index, it.bodies = c.nodes, c.index, dict(c.bodies)
        f = it.convert(f)
    memo: dict[int, bool] = {}
    active: set[int] = set()

    def ev(i: int) -> bool:
        if i in memo:
            return memo[i]
        n = c.nodes[i]
        kind = n[0]
        if kind == "T":
            r = True
        elif kind == "F":
            r = False
        elif kind == "atom":
            r = n[1] in ln.position and ln.position[n[1]] in t
        elif kind == "natom":
            r = not (n[1] in ln.position and ln.position[n[1]] in t)
        elif kind == "dia":
            if i not in ln.position:
                raise FormulaError(f"{c.describe(i)} is not in the Lean")
            r = ln.position[i] in t
        elif kind == "ndia":
            r = ln.true_modal(n[1]) not in t
        elif kind == "and":
            r = ev(n[1]) and ev(n[2])
        elif kind == "or":
            r = ev(n[1]) or ev(n[2])
        else:
            if i in active:
                raise FormulaError(f"unguarded recursion through {n[1]}")
            active.add(i)
            r = ev(c.bodies[n[1]])
            active.discard(i)
        memo[i] = r
        return r

    return ev(f)


def consistent(t: NodeType, ln: Lean) -> bool:
    names = [k for k, a in enumerate(ln.atoms) if is_element_key(a) and k in t]
    if len(names) > 1:
        return False
    if ln.true_modal(Program.PARENT) in t and ln.true_modal(Program.PREV_SIBLING) in t:
        return False
    for i in ln.modals:
        p = ln.closure.nodes[i][1]
        if ln.position[i] in t and ln.true_modal(p) not in t:
            return False
    return True


# -- results ---------------------------------------------------------------------

@dataclass
class SolverStats:
    lean_size: int = 0
    eventualities: int = 0
    symbols: int = 0
    iterations: int = 0
    closure_ms: float = 0.0
    lean_ms: float = 0.0
    fixpoint_ms: float = 0.0
    witness_ms: float = 0.0
    total_ms: float = 0.0
    proved_types: int = 0


@dataclass
class SolverResult:
    verdict: str  # "SAT", "UNSAT" or "TIMEOUT"
    witness: BinaryTree | None
    stats: SolverStats

    @property
    def satisfiable(self) -> bool:
        return self.verdict == "SAT"


# -- the symbolic fixpoint -------------------------------------------------------------

class Solver:
    """One satisfiability run; the steps are exposed for tracing."""

    def __init__(self, f: Formula, timeout: float | None = 60.0):
        report = cycle_check(f)
        if not report.ok:
            raise CycleError(", ".join(f"{v} uses {a} and {b}" for v, (a, b) in report.violations))
        self.goal = f
        self.tested = to_nnf(somewhere(f))
        self.timeout = timeout
        self.stats = SolverStats()
        self._start = time.perf_counter()
        self.closure: Closure | None = None
        self.lean: Lean | None = None

    def compute_closure(self) -> Closure:
        t0 = time.perf_counter()
        self.closure = closure(self.tested)
        self.stats.closure_ms = _ms(t0)
        return self.closure

    def compute_lean(self) -> Lean:
        if self.closure is None:
            self.compute_closure()
        t0 = time.perf_counter()
        self.lean = lean(self.closure)
        self.stats.lean_ms = _ms(t0)
        self.stats.lean_size = self.lean.size
        self.stats.eventualities = self.lean.eventualities
        self.stats.symbols = self.lean.symbols
        return self.lean

    # BDD encoding of statuses and relations

    def _setup(self) -> None:
        ln = self.lean
        c = ln.closure
        self.bdd = b = BDD(2 * ln.size)
        self.cur = [2 * k for k in range(ln.size)]
        self.nxt = [2 * k + 1 for k in range(ln.size)]
        self.to_nxt = {2 * k: 2 * k + 1 for k in range(ln.size)}
        self.to_cur = {2 * k + 1: 2 * k for k in range(ln.size)}
        self._status: dict[int, int] = {}
        self._active: set[int] = set()
        self._status_nxt: dict[int, int] = {}
        self.goal_id = c.index.get(("var", _root_var(self.tested)))
        bit = lambda k: b.var(2 * k)

        elements = [bit(k) for k, a in enumerate(ln.atoms) if is_element_key(a)]
        none, one = TRUE, FALSE
        for x in elements:
            none, one = (b.apply("and", none, b.neg(x)),
                         b.apply("or", b.apply("and", one, b.neg(x)), b.apply("and", none, x)))
        cons = b.apply("or", none, one)
        tops = {p: bit(ln.true_modal(p)) for p in ALL_PROGRAMS}
        cons = b.apply("and", cons, b.neg(b.apply("and", tops[Program.PARENT], tops[Program.PREV_SIBLING])))
        for i in ln.modals:
            p = c.nodes[i][1]
            cons = b.apply("and", cons, b.implies(bit(ln.position[i]), tops[p]))
        self.cons = cons
        self.tops = tops

        self.schedule: dict[Program, list[tuple[int, list[int]]]] = {}
        self.unused_nxt: dict[Program, list[int]] = {}
        for a in FORWARD:
            parts = []
            for i in ln.modals:
                p, sub = c.nodes[i][1], c.nodes[i][2]
                k = ln.position[i]
                if p == a:
                    parts.append(b.iff(b.var(2 * k), self.status_nxt(sub)))
                elif p == a.converse:
                    parts.append(b.iff(b.var(2 * k + 1), self.status(sub)))
            self._plan(a, parts)
        root_ok = b.apply("and", b.neg(tops[Program.PARENT]), b.neg(tops[Program.PREV_SIBLING]))
        self.accept = b.conj([self.cons, root_ok, self.status(c.root)])

    def _plan(self, a: Program, parts: list[int]) -> None:
        """Order the conjuncts of the transition relation so that neighbour
        variables can be quantified as early as possible, then merge
        neighbouring conjuncts into clusters of bounded size."""
        b = self.bdd
        nxt = set(self.nxt)
        supports = [b.support(u) & nxt for u in parts]
        remaining = list(range(len(parts)))
        order: list[int] = []
        while remaining:
            def score(j: int) -> tuple[int, int]:
                others = set().union(*(supports[k] for k in remaining if k != j))
                freed = len(supports[j] - others)
                return (-freed, len(supports[j]))
            j = min(remaining, key=score)
            remaining.remove(j)
            order.append(j)
        clusters: list[int] = []
        cluster_supports: list[set[int]] = []
        for j in order:
            if clusters:
                merged = b.apply("and", clusters[-1], parts[j])
                if b.dag_size(merged) <= CLUSTER_LIMIT:
                    clusters[-1] = merged
                    cluster_supports[-1] |= supports[j]
                    continue
            clusters.append(parts[j])
            cluster_supports.append(set(supports[j]))
        schedule = []
        for k, u in enumerate(clusters):
            later = set().union(*cluster_supports[k + 1:])
            schedule.append((u, sorted(cluster_supports[k] - later)))
        mentioned = set().union(*cluster_supports) if cluster_supports else set()
        self.unused_nxt[a] = sorted(nxt - mentioned)
        self.schedule[a] = schedule

    def image(self, shifted: int, a: Program) -> int:
        """Types having an ``a``-neighbour in ``shifted`` (a set over neighbour bits)."""
        b = self.bdd
        acc = b.exists(shifted, self.unused_nxt[a])
        for part, quantify in self.schedule[a]:
            acc = b.and_exists(acc, part, quantify)
            if acc == FALSE:
                break
        return acc

    def status(self, i: int) -> int:
        """BDD over current-type bits of the truth of closure node ``i``."""
        r = self._status.get(i)
        if r is not None:
            return r
        ln, b = self.lean, self.bdd
        n = ln.closure.nodes[i]
        kind = n[0]
        if kind == "T":
            r = TRUE
        elif kind == "F":
            r = FALSE
        elif kind == "atom":
            r = b.var(2 * ln.position[n[1]])
        elif kind == "natom":
            r = b.neg(b.var(2 * ln.position[n[1]]))
        elif kind == "dia":
            r = b.var(2 * ln.position[i])
        elif kind == "ndia":
            r = b.neg(b.var(2 * ln.true_modal(n[1])))
        elif kind in ("and", "or"):
            r = b.apply(kind, self.status(n[1]), self.status(n[2]))
        else:
            if i in self._active:
                raise FormulaError(f"unguarded recursion through {n[1]}")
            self._active.add(i)
            r = self.status(ln.closure.bodies[n[1]])
            self._active.discard(i)
        self._status[i] = r
        return r

    def status_nxt(self, i: int) -> int:
        r = self._status_nxt.get(i)
        if r is None:
            r = self.bdd.rename(self.status(i), self.to_nxt)
            self._status_nxt[i] = r
        return r

    def fixpoint(self, on_iteration: Callable[[int], None] | None = None) -> bool:
        """Run the bottom-up fixpoint; True iff an accepting type was proved."""
        if self.lean is None:
            self.compute_lean()
        t0 = time.perf_counter()
        self._setup()
        b = self.bdd
        proved = FALSE
        self.levels: list[int] = []
        found = False
        while True:
            if self.timeout is not None and time.perf_counter() - self._start > self.timeout:
                self.stats.fixpoint_ms = _ms(t0)
                raise SolverTimeout()
            shifted = b.rename(proved, self.to_nxt)
            new = self.cons
            for a in FORWARD:
                pre = self.image(shifted, a)
                new = b.apply("and", new, b.apply("or", b.neg(self.tops[a]), pre))
            self.levels.append(new)
            self.stats.iterations += 1
            if on_iteration is not None:
                on_iteration(self.stats.iterations)
            if b.apply("and", new, self.accept) != FALSE:
                found = True
                break
            if new == proved:
                break
            proved = new
        self.proved = self.levels[-1]
        self.stats.proved_types = b.count(self.proved, self.cur)
        self.stats.fixpoint_ms = _ms(t0)
        return found

    # witness reconstruction

    def _decode(self, assignment: dict[int, bool], offset: int) -> NodeType:
        bits = 0
        for k in range(self.lean.size):
            if assignment.get(2 * k + offset, False):
                bits |= 1 << k
        return NodeType(bits)

    def _assignment(self, t: NodeType) -> dict[int, bool]:
        return {2 * k: bool(t.bits >> k & 1) for k in range(self.lean.size)}

    def _prefer_leaves(self, u: int, offset: int) -> dict[int, bool]:
        """Least assignment of ``u``, favouring types without children or
        next siblings (``offset`` 0 for current bits, 1 for neighbour bits)."""
        b = self.bdd
        no1 = b.neg(b.var(2 * self.lean.true_modal(Program.FIRST_CHILD) + offset))
        no2 = b.neg(b.var(2 * self.lean.true_modal(Program.NEXT_SIBLING) + offset))
        for c in (b.apply("and", no1, no2), no2, no1):
            v = b.apply("and", u, c)
            if v != FALSE:
                return b.pick(v)
        return b.pick(u)

    def extract_witness(self) -> BinaryTree:
        t0 = time.perf_counter()
        b = self.bdd
        root_level = len(self.levels) - 1
        root = self._decode(self._prefer_leaves(b.apply("and", self.levels[root_level], self.accept), 0), 0)
        shifted = [b.rename(x, self.to_nxt) for x in self.levels]
        alphabet = {a for a in self.lean.atoms if is_element_key(a)}
        filler = next(n for n in ("other", "other1", "other2", "other3") if n not in alphabet)
        self.witness_types: list[NodeType] = []

        def build(t: NodeType, level: int) -> BinaryTree:
            self.witness_types.append(t)
            kids: dict[Program, BinaryTree | None] = {}
            for a in FORWARD:
                kids[a] = None
                if self.lean.true_modal(a) not in t:
                    continue
                assignment = self._assignment(t)
                rel = b.conj(b.restrict(part, assignment) for part, _ in self.schedule[a])
                for j in range(level):
                    cand = b.apply("and", rel, shifted[j])
                    if cand != FALSE:
                        kids[a] = build(self._decode(self._prefer_leaves(cand, 1), 1), j)
                        break
                else:
                    raise AssertionError("proved type without justification")
            return self._node(t, filler, kids[Program.FIRST_CHILD], kids[Program.NEXT_SIBLING])

        tree = build(root, root_level)
        self.stats.witness_ms = _ms(t0)
        return tree

    def _node(self, t: NodeType, filler: str, first, second) -> BinaryTree:
        label, attrs, marks = filler, set(), set()
        for k, a in enumerate(self.lean.atoms):
            if k not in t:
                continue
            if a.startswith("@"):
                attrs.add(a[1:])
            elif a.startswith("_"):
                marks.add(mark_of(a))
            else:
                label = a
        return BinaryTree(label, first, second, frozenset(attrs), frozenset(marks))

    def run(self, on_iteration: Callable[[int], None] | None = None,
            contexts: Iterable[Formula] = ()) -> SolverResult:
        if self.lean is None:
            self.compute_lean()
        try:
            sat = self.fixpoint(on_iteration)
        except SolverTimeout:
            self.stats.total_ms = _ms(self._start)
            return SolverResult("TIMEOUT", None, self.stats)
        witness = None
        if sat:
            witness = mark_witness(self.extract_witness(), self.goal, contexts)
        self.stats.total_ms = _ms(self._start)
        return SolverResult("SAT" if sat else "UNSAT", witness, self.stats)


def _root_var(f: Formula) -> str:
    return f.body.name if isinstance(f, Let) and isinstance(f.body, Var) else ""


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


def mark_witness(tree: BinaryTree, goal: Formula, contexts: Iterable[Formula] = ()) -> BinaryTree:
    """Add ``target`` marks where ``goal`` holds and ``context`` marks where one
    of ``contexts`` holds (the latter only if ``goal`` does not read ``_context``
    itself, so that marking cannot change its truth)."""
    targets = evaluate(goal, tree, check_cycles=False)
    ctx: set[int] = set()
    from .formula import walk
    reads_context = any(isinstance(g, ContextMark) or (isinstance(g, Prop) and g.name == CONTEXT_PROP)
                        for g in walk(goal))
    if not reads_context:
        for c in contexts:
            ctx |= evaluate(c, tree, check_cycles=False)
    nodes = list(tree.iter())
    extra = {id(n): ({"target"} if i in targets else set()) | ({"context"} if i in ctx else set())
             for i, n in enumerate(nodes)}

    def rebuild(t: BinaryTree | None) -> BinaryTree | None:
        if t is None:
            return None
        return BinaryTree(t.label, rebuild(t.first), rebuild(t.second), t.attributes,
                          t.marks | extra[id(t)])

    return rebuild(tree)


def solve(f: Formula, timeout: float | None = 60.0,
          on_iteration: Callable[[int], None] | None = None,
          contexts: Iterable[Formula] = ()) -> SolverResult:
    """Decide whether ``f`` holds at some node of some finite binary tree."""
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20000))
    try:
        return Solver(f, timeout).run(on_iteration, contexts)
    finally:
        sys.setrecursionlimit(limit)
