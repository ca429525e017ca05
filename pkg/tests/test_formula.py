from __future__ import annotations

import random

import pytest

from gen import random_formula
from support import complementary_everywhere, same_everywhere
from treelogic.formula import (
    And, BOTTOM, Call, CycleError, Element, Implies, Let, Modal, Not, Or, Program, TOP,
    UnexpandedPredicate, Var, alpha_equivalent, cycle_check, negate, pretty_print, size,
    to_nnf, unfold, walk,
)
from treelogic.parser import parse_formula

NON_CYCLE_FREE = "let $X = a | <-1>$X | <1>$X in $X"
NESTED_CYCLE_FREE = "let $X = a & (let $X = b | <1>$X in $X) | <-1>$X in $X"
SIBLING_CHAIN = "let $X = b | <2>$X in $X"


def negation_only_on_atoms(f) -> bool:
    for g in walk(f):
        if isinstance(g, Not) and not (
            isinstance(g.sub, Modal) and g.sub.sub == TOP or not isinstance(g.sub, (And, Or, Not, Let, Modal))
        ):
            return False
        if isinstance(g, Implies):
            return False
    return True


def test_converse_is_an_involution():
    for p in Program:
        assert p.converse.converse == p
    assert Program(1).converse == Program(-1)
    assert Program(2).converse == Program(-2)


def test_negate_true_is_false():
    assert negate(TOP) == BOTTOM


def test_negate_modal_example():
    f = parse_formula("a & <1>b")
    expected = parse_formula("~a | <1>~b | ~<1>T")
    assert complementary_everywhere(f, negate(f), 3, ["a", "b"])
    assert same_everywhere(negate(f), expected, 3, ["a", "b"])
    assert negation_only_on_atoms(negate(f))


def test_double_negation_keeps_satisfaction_set():
    f = parse_formula(SIBLING_CHAIN)
    assert same_everywhere(f, negate(negate(f)), 4, ["a", "b"])


def test_negate_rejects_cycles():
    with pytest.raises(CycleError):
        negate(parse_formula(NON_CYCLE_FREE))


def test_to_nnf_examples():
    assert to_nnf(parse_formula("a => b")) == Or(Not(Element("a")), Element("b"))
    assert to_nnf(parse_formula("~(a | b)")) == And(Not(Element("a")), Not(Element("b")))


def test_to_nnf_rejects_predicate_calls():
    with pytest.raises(UnexpandedPredicate):
        to_nnf(Call("select", ()))


def test_cycle_check_verdicts():
    report = cycle_check(parse_formula(NON_CYCLE_FREE))
    assert not report.ok
    assert [pair for _, pair in report.violations] == [(Program(1), Program(-1))]
    assert cycle_check(parse_formula(NESTED_CYCLE_FREE)).ok
    assert cycle_check(parse_formula(SIBLING_CHAIN)).ok


def test_cycle_check_sees_mutual_recursion():
    assert not cycle_check(parse_formula("let $X = a | <1>$Y, $Y = <-1>$X in $X")).ok
    assert cycle_check(parse_formula("let $X = a | <1>$X, $Y = <-1>$Y | $X in $Y")).ok


def test_cycle_check_sees_recursion_through_a_nested_binder():
    f = parse_formula("mu $X.((mu $Y.(($X & a) | <-1>$Y)) | <1>$X)")
    assert not cycle_check(f).ok


def test_negation_stays_cycle_free():
    rng = random.Random(12)
    for _ in range(100):
        f = random_formula(rng)
        assert cycle_check(negate(f)).ok
        assert cycle_check(to_nnf(f)).ok


def test_unfold_once():
    f = parse_formula(SIBLING_CHAIN)
    (name, _), = f.bindings
    assert unfold(f, name) == Or(Element("b"), Modal(Program(2), f))


def test_unfold_without_the_variable_is_the_body():
    f = parse_formula("let $X = a & <1>b in $X")
    assert unfold(f, f.names[0]) == f.bindings[0][1]


def test_unfold_mutual_binder():
    f = parse_formula("let $X = (a & <2>$Y) | <1>$X | <2>$X, $Y = b | <2>$Y in $X")
    x, y = f.names
    assert unfold(f, y) == Or(Element("b"), Modal(Program(2), Let(f.bindings, Var(y))))


def test_pretty_print_shapes():
    assert pretty_print(parse_formula("a & <1>b")) == "(a & <1>b)"
    assert pretty_print(parse_formula(SIBLING_CHAIN)) == "(mu X1.(b | <2>X1))"
    text = pretty_print(parse_formula("let $X = a | <1>$Y, $Y = b in $X"))
    assert text == "(let_mu X1=(a | <1>X2), X2=b in X1)"


def test_pretty_print_is_deterministic():
    f = parse_formula(NESTED_CYCLE_FREE)
    g = parse_formula(NESTED_CYCLE_FREE)
    assert f != g  # parsing assigns fresh internal names
    assert pretty_print(f) == pretty_print(g)


def test_print_then_parse_round_trip():
    rng = random.Random(7)
    for _ in range(200):
        f = random_formula(rng)
        assert alpha_equivalent(parse_formula(pretty_print(f)), f), pretty_print(f)


def test_negation_and_nnf_agree_with_oracle_on_random_formulas():
    rng = random.Random(11)
    for _ in range(40):
        f = random_formula(rng, depth=4)
        assert complementary_everywhere(f, negate(f), 4, ["a", "b", "c"]), pretty_print(f)
        assert same_everywhere(f, to_nnf(f), 4, ["a", "b", "c"]), pretty_print(f)
        assert negation_only_on_atoms(to_nnf(f))
        assert size(to_nnf(f)) > 0
