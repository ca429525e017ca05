from __future__ import annotations

import random

import pytest

from gen import random_formula
from support import evaluations
from treelogic.formula import CycleError, Element, Program, negate, pretty_print, to_nnf
from treelogic.modelcheck import find_model, holds_somewhere
from treelogic.parser import parse_formula
from treelogic.solver import NodeType, Solver, closure, consistent, entails, lean, solve
from treelogic.trees import BinaryTree, term_print


def bits(*positions: int) -> NodeType:
    return NodeType(sum(1 << k for k in positions))


def test_true_is_satisfiable_by_one_node():
    r = solve(parse_formula("T"))
    assert r.verdict == "SAT"
    assert r.witness.size() == 1


def test_contradiction_is_unsatisfiable():
    r = solve(parse_formula("a & ~a"))
    assert r.verdict == "UNSAT"
    assert r.witness is None


def test_single_atom_witness():
    r = solve(parse_formula("a"))
    assert r.witness == BinaryTree("a", marks={"target"})


def test_solver_rejects_cycles():
    with pytest.raises(CycleError):
        solve(parse_formula("let $X = a | <-1>$X | <1>$X in $X"))


def test_closure_of_atom_and_its_lean():
    c = closure(Element("a"))
    assert [c.describe(i) for i in c.members] == ["a"]
    ln = lean(c)
    assert ln.atoms == ["a"]
    assert sorted(ln.members()[1:]) == sorted(f"<{p.value}>T" for p in Program)
    assert (ln.size, ln.eventualities, ln.symbols) == (5, 4, 1)


def test_closure_contains_subformulas():
    c = closure(to_nnf(parse_formula("a & <1>b")))
    assert {"(a & <1>b)", "a", "<1>b", "b"} <= {c.describe(i) for i in c.members}


def test_entails():
    c = closure(to_nnf(parse_formula("a")))
    ln = lean(c)
    assert entails(bits(0), c.root, ln)
    assert not entails(bits(), c.root, ln)
    assert not any(entails(NodeType(b), parse_formula("F"), ln) for b in range(1 << ln.size))


def test_entails_through_one_unfolding():
    c = closure(to_nnf(parse_formula("let $X = b | <2>$X in $X")))
    ln = lean(c)
    step = next(k for k in range(ln.size) if ln.describe(k) == "<2>" + c.describe(c.root))
    two = ln.position[c.index[("dia", Program(2), c.index[("T",)])]]
    assert entails(bits(step, two), c.root, ln)
    assert entails(bits(ln.atoms.index("b")), c.root, ln)
    assert not entails(bits(two), c.root, ln)


def test_consistency_rules():
    ln = lean(closure(to_nnf(parse_formula("a | b"))))
    a, b = ln.atoms.index("a"), ln.atoms.index("b")
    up1, up2 = ln.true_modal(Program(-1)), ln.true_modal(Program(-2))
    assert consistent(bits(a), ln)
    assert not consistent(bits(a, b), ln)
    assert not consistent(bits(up1, up2), ln)


def test_timeout_is_a_distinct_outcome():
    f = parse_formula("a")
    assert solve(f, timeout=0).verdict == "TIMEOUT"


def test_determinism():
    rng = random.Random(4)
    for _ in range(10):
        text = pretty_print(random_formula(rng))
        a = solve(parse_formula(text))
        b = solve(parse_formula(text))
        assert a.verdict == b.verdict
        assert (a.witness and term_print(a.witness)) == (b.witness and term_print(b.witness))


def test_solver_agrees_with_enumeration():
    rng = random.Random(21)
    for _ in range(60):
        f = random_formula(rng)
        r = solve(f)
        small = find_model(f, 5)
        if r.verdict == "SAT":
            assert holds_somewhere(f, r.witness), pretty_print(f)
        else:
            assert r.verdict == "UNSAT" and small is None, pretty_print(f)


def test_unsat_means_negation_holds_everywhere():
    rng = random.Random(8)
    alphabet = ["a", "b", "c", "other"]
    for _ in range(40):
        f = random_formula(rng)
        r = solve(f)
        if r.verdict == "UNSAT":
            assert all(arr.all() for (arr,) in evaluations([negate(f)], 4, alphabet))
        else:
            assert holds_somewhere(f, r.witness)
            assert not all_nodes(negate(f), r.witness)


def all_nodes(f, t) -> bool:
    from treelogic.modelcheck import evaluate
    return len(evaluate(f, t)) == t.size()
