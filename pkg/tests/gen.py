"""Random cycle-free formulas for the oracle suites."""
from __future__ import annotations

import random

from treelogic.formula import (
    And, BOTTOM, Element, Equiv, Formula, Implies, Let, Modal, NonMonotoneError, Not, Or,
    Program, TOP, Var, cycle_check, fresh_var, to_nnf,
)

PROGRAMS = list(Program)


def random_formula(rng: random.Random, labels=("a", "b", "c"), depth: int = 4,
                   max_binders: int = 4) -> Formula:
    """A closed, cycle-free, monotone formula."""
    while True:
        budget = [max_binders]
        f = _gen(rng, labels, depth, [], budget)
        if not cycle_check(f).ok:
            continue
        try:
            to_nnf(f)
        except NonMonotoneError:
            continue
        return f


def _gen(rng, labels, depth, scope, budget) -> Formula:
    if depth <= 0 or (depth <= 2 and rng.random() < 0.3):
        return _leaf(rng, labels, scope)
    r = rng.random()
    if r < 0.2:
        return And(_gen(rng, labels, depth - 1, scope, budget), _gen(rng, labels, depth - 1, scope, budget))
    if r < 0.4:
        return Or(_gen(rng, labels, depth - 1, scope, budget), _gen(rng, labels, depth - 1, scope, budget))
    if r < 0.6:
        return Modal(rng.choice(PROGRAMS), _gen(rng, labels, depth - 1, scope, budget))
    if r < 0.7:
        # negation, implication and equivalence only over closed parts: keeps recursion monotone
        kind = rng.random()
        left = _gen(rng, labels, depth - 1, [], budget)
        if kind < 0.6:
            return Not(left)
        right = _gen(rng, labels, depth - 1, [], budget)
        return Implies(left, right) if kind < 0.8 else Equiv(left, right)
    if budget[0] > 0:
        budget[0] -= 1
        k = 1 if rng.random() < 0.7 else 2
        names = [fresh_var("R") for _ in range(k)]
        inner = scope + names
        family = rng.choice([(Program.FIRST_CHILD, Program.NEXT_SIBLING),
                             (Program.PARENT, Program.PREV_SIBLING)])
        bodies = []
        for n in names:
            base = _gen(rng, labels, depth - 1, inner, budget)
            step = Modal(rng.choice(family), Var(rng.choice(names)))
            bodies.append((n, Or(base, step) if rng.random() < 0.75 else And(base, step)))
        body = Var(names[0]) if rng.random() < 0.6 else _gen(rng, labels, depth - 1, inner, budget)
        return Let(tuple(bodies), body)
    return _leaf(rng, labels, scope)


def _leaf(rng, labels, scope) -> Formula:
    r = rng.random()
    if scope and r < 0.35:
        return Var(rng.choice(scope))
    if r < 0.45:
        return TOP if rng.random() < 0.6 else BOTTOM
    atom = Element(rng.choice(labels))
    if r < 0.55:
        return Not(atom)
    if r < 0.65:
        return Not(Modal(rng.choice(PROGRAMS), TOP))
    return atom
