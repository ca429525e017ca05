"""Direct semantic evaluation of formulas on finite binary trees.

This is the independent oracle: it interprets the surface AST (including
implication, equivalence and negation over recursion) with least-fixpoint
iteration on the nodes of one concrete tree, and shares no code with the
solver.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .formula import (
    And, Attribute, Bottom, Call, ContextMark, CycleError, Element, Equiv, Formula,
    Implies, Let, Modal, NonMonotoneError, Not, Or, Program, Prop, StringArg, Top,
    UnboundVariable, UnexpandedPredicate, Var, cycle_check, element_names,
)
from .trees import BinaryTree


def mark_of(prop: str) -> str:
    """Name of the tree mark that a proposition reads (``_context`` -> ``context``)."""
    return prop[1:] if prop.startswith("_") else prop


@dataclass
class IndexedTree:
    """Pre-order arrays of a binary tree."""

    nodes: list[BinaryTree]
    first: list[int]
    second: list[int]

    @classmethod
    def of(cls, t: BinaryTree) -> "IndexedTree":
        nodes = list(t.iter())
        pos = {id(n): i for i, n in enumerate(nodes)}
        first = [pos[id(n.first)] if n.first is not None else -1 for n in nodes]
        second = [pos[id(n.second)] if n.second is not None else -1 for n in nodes]
        return cls(nodes, first, second)


def evaluate(f: Formula, t: BinaryTree, check_cycles: bool = True) -> set[int]:
    """Pre-order indices of the nodes of ``t`` where ``f`` holds."""
    if check_cycles:
        report = cycle_check(f)
        if not report.ok:
            raise CycleError(str(report.violations))
    ix = IndexedTree.of(t)
    n = len(ix.nodes)
    full = (1 << n) - 1

    def bits(pred) -> int:
        return sum(1 << i for i, node in enumerate(ix.nodes) if pred(node))

    def ev(g: Formula, env: dict[str, int]) -> int:
        if isinstance(g, Top):
            return full
        if isinstance(g, Bottom):
            return 0
        if isinstance(g, Element):
            return bits(lambda nd: nd.label == g.name)
        if isinstance(g, Attribute):
            return bits(lambda nd: g.name in nd.attributes)
        if isinstance(g, Prop):
            return bits(lambda nd: mark_of(g.name) in nd.marks)
        if isinstance(g, ContextMark):
            return bits(lambda nd: "context" in nd.marks)
        if isinstance(g, Not):
            return full & ~ev(g.sub, env)
        if isinstance(g, And):
            return ev(g.left, env) & ev(g.right, env)
        if isinstance(g, Or):
            return ev(g.left, env) | ev(g.right, env)
        if isinstance(g, Implies):
            return (full & ~ev(g.left, env)) | ev(g.right, env)
        if isinstance(g, Equiv):
            a, b = ev(g.left, env), ev(g.right, env)
            return full & ~(a ^ b)
        if isinstance(g, Modal):
            s = ev(g.sub, env)
            out = 0
            for i in range(n):
                if g.program == Program.FIRST_CHILD:
                    j = ix.first[i]
                    if j >= 0 and s >> j & 1:
                        out |= 1 << i
                elif g.program == Program.NEXT_SIBLING:
                    j = ix.second[i]
                    if j >= 0 and s >> j & 1:
                        out |= 1 << i
                elif s >> i & 1:
                    j = ix.first[i] if g.program == Program.PARENT else ix.second[i]
                    if j >= 0:
                        out |= 1 << j
            return out
        if isinstance(g, Var):
            if g.name not in env:
                raise UnboundVariable(g.name)
            return env[g.name]
        if isinstance(g, Let):
            inner = dict(env)
            for name in g.names:
                inner[name] = 0
            for _ in range(n * len(g.bindings) + 2):
                new = {name: ev(b, inner) for name, b in g.bindings}
                if all(new[k] == inner[k] for k in new):
                    return ev(g.body, inner)
                inner.update(new)
            raise NonMonotoneError("fixpoint iteration does not stabilize")
        if isinstance(g, (Call, StringArg)):
            raise UnexpandedPredicate(getattr(g, "name", "string"))
        raise TypeError(f"not a formula: {g!r}")

    result = ev(f, {})
    return {i for i in range(n) if result >> i & 1}


def model_check(f: Formula, t: BinaryTree, node: int | BinaryTree = 0) -> bool:
    """Does ``f`` hold at ``node`` (pre-order index or node object) of ``t``?"""
    if isinstance(node, BinaryTree):
        node = next(i for i, n in enumerate(t.iter()) if n is node)
    return node in evaluate(f, t)


def holds_somewhere(f: Formula, t: BinaryTree) -> bool:
    return bool(evaluate(f, t))


# -- batched brute force -----------------------------------------------------------

def binary_shapes(n: int) -> Iterator[tuple]:
    """Binary tree shapes with exactly ``n`` nodes as nested (first, second)
    pairs; ``None`` is the empty tree."""
    if n == 0:
        yield None
        return
    for k in range(n):
        for left in binary_shapes(k):
            for right in binary_shapes(n - 1 - k):
                yield (left, right)


def _shape_arrays(shape) -> tuple[list[int], list[int]]:
    first: list[int] = []
    second: list[int] = []

    def visit(s) -> int:
        i = len(first)
        first.append(-1)
        second.append(-1)
        if s[0] is not None:
            first[i] = visit(s[0])
        if s[1] is not None:
            second[i] = visit(s[1])
        return i

    visit(shape)
    return first, second


class BatchEvaluator:
    """Evaluate a formula on one shape under many labelings at once.

    ``labels`` is an int array (batch, nodes) indexing ``alphabet``;
    ``flags`` maps attribute names (``@a``) and mark names to bool arrays.
    """

    def __init__(self, first: list[int], second: list[int], alphabet: Sequence[str],
                 labels: np.ndarray, flags: dict[str, np.ndarray] | None = None):
        self.first = first
        self.second = second
        self.alphabet = list(alphabet)
        self.labels = labels
        self.flags = flags or {}
        self.shape = labels.shape

    def _flag(self, key: str) -> np.ndarray:
        arr = self.flags.get(key)
        return arr.copy() if arr is not None else np.zeros(self.shape, dtype=bool)

    def _shift(self, s: np.ndarray, program: Program) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        links = self.first if abs(program) == 1 else self.second
        for i, j in enumerate(links):
            if j < 0:
                continue
            if program.forward:
                out[:, i] = s[:, j]
            else:
                out[:, j] = s[:, i]
        return out

    def evaluate(self, f: Formula, env: dict[str, np.ndarray] | None = None) -> np.ndarray:
        env = env or {}
        g = f
        if isinstance(g, Top):
            return np.ones(self.shape, dtype=bool)
        if isinstance(g, Bottom):
            return np.zeros(self.shape, dtype=bool)
        if isinstance(g, Element):
            if g.name not in self.alphabet:
                return np.zeros(self.shape, dtype=bool)
            return self.labels == self.alphabet.index(g.name)
        if isinstance(g, Attribute):
            return self._flag("@" + g.name)
        if isinstance(g, Prop):
            return self._flag(mark_of(g.name))
        if isinstance(g, ContextMark):
            return self._flag("context")
        if isinstance(g, Not):
            return ~self.evaluate(g.sub, env)
        if isinstance(g, And):
            return self.evaluate(g.left, env) & self.evaluate(g.right, env)
        if isinstance(g, Or):
            return self.evaluate(g.left, env) | self.evaluate(g.right, env)
        if isinstance(g, Implies):
            return ~self.evaluate(g.left, env) | self.evaluate(g.right, env)
        if isinstance(g, Equiv):
            return self.evaluate(g.left, env) == self.evaluate(g.right, env)
        if isinstance(g, Modal):
            return self._shift(self.evaluate(g.sub, env), g.program)
        if isinstance(g, Var):
            if g.name not in env:
                raise UnboundVariable(g.name)
            return env[g.name]
        if isinstance(g, Let):
            inner = dict(env)
            for name in g.names:
                inner[name] = np.zeros(self.shape, dtype=bool)
            for _ in range(self.shape[1] * len(g.bindings) + 2):
                new = {name: self.evaluate(b, inner) for name, b in g.bindings}
                if all(np.array_equal(new[k], inner[k]) for k in new):
                    return self.evaluate(g.body, inner)
                inner.update(new)
            raise NonMonotoneError("fixpoint iteration does not stabilize")
        if isinstance(g, (Call, StringArg)):
            raise UnexpandedPredicate(getattr(g, "name", "string"))
        raise TypeError(f"not a formula: {g!r}")


def default_alphabet(f: Formula, extra: int = 1) -> list[str]:
    names = element_names(f)
    fillers = [c for c in ("other", "other2", "other3", "other4") if c not in names]
    return names + fillers[:extra]


def labelings(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int8).reshape(-1, n)


def batches(max_nodes: int, alphabet: Sequence[str], marks: Sequence[str] = ()) -> Iterator[
        tuple[list[int], list[int], np.ndarray, dict[str, np.ndarray]]]:
    """Every binary tree with 1..max_nodes nodes over ``alphabet`` where each
    mark (or ``@attribute``) may hold independently at each node."""
    for n in range(1, max_nodes + 1):
        labs = labelings(n, len(alphabet))
        if marks:
            mbits = np.array(list(itertools.product((False, True), repeat=n * len(marks))),
                             dtype=bool).reshape(-1, len(marks), n)
            reps = len(mbits)
            labs_full = np.repeat(labs, reps, axis=0)
            flags = {m: np.tile(mbits[:, i, :], (len(labs), 1)) for i, m in enumerate(marks)}
        else:
            labs_full, flags = labs, {}
        for shape in binary_shapes(n):
            first, second = _shape_arrays(shape)
            yield first, second, labs_full, flags


def build_tree(first: list[int], second: list[int], alphabet: Sequence[str],
               labels: Sequence[int], flags: dict[str, Sequence[bool]] | None = None) -> BinaryTree:
    flags = flags or {}

    def build(i: int) -> BinaryTree | None:
        if i < 0:
            return None
        attrs = frozenset(k[1:] for k, v in flags.items() if k.startswith("@") and v[i])
        marks = frozenset(k for k, v in flags.items() if not k.startswith("@") and v[i])
        return BinaryTree(alphabet[labels[i]], build(first[i]), build(second[i]), attrs, marks)

    return build(0)


def find_model(f: Formula, max_nodes: int, alphabet: Sequence[str] | None = None,
               marks: Sequence[str] = ()) -> BinaryTree | None:
    """Smallest enumerated tree where ``f`` holds at some node, or None."""
    alphabet = list(alphabet) if alphabet is not None else default_alphabet(f)
    for first, second, labs, flags in batches(max_nodes, alphabet, marks):
        ev = BatchEvaluator(first, second, alphabet, labs, flags)
        hits = ev.evaluate(f).any(axis=1)
        if hits.any():
            b = int(np.argmax(hits))
            return build_tree(first, second, alphabet, labs[b],
                              {k: v[b] for k, v in flags.items()})
    return None
