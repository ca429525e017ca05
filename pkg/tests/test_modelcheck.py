from __future__ import annotations

import random

import numpy as np
import pytest

from gen import random_formula
from treelogic.formula import CycleError
from treelogic.modelcheck import (
    BatchEvaluator, batches, build_tree, evaluate, find_model, holds_somewhere, model_check,
)
from treelogic.parser import parse_formula
from treelogic.trees import encode, from_xml

# (formula, XML of the satisfying tree, pre-order index of the node where it holds);
# a wrapper root <r> stands for a hedge and is dropped before encoding
SAMPLES = [
    ("a & <1>b", "<a><b/></a>", 0),
    ("a & <2>b", "<r><a/><b/></r>", 0),
    ("a & <1>(b & <2>c)", "<a><b/><c/></a>", 0),
    ("e & <-1>(d & <2>g)", "<r><d><e/></d><g/></r>", 1),
]


def binary(xml: str, hedge: bool):
    t = from_xml(xml)
    return encode(list(t.children) if hedge else t)


@pytest.mark.parametrize("text,xml,node", SAMPLES)
def test_sample_formulas_hold_on_their_trees(text, xml, node):
    t = binary(xml, hedge=xml.startswith("<r>"))
    assert model_check(parse_formula(text), t, node)


def test_sample_formula_without_model():
    f = parse_formula("f & <-2>(g & ~<2>T)")
    assert find_model(f, 5) is None
    t = binary("<r><g/><f/></r>", hedge=True)
    assert not holds_somewhere(f, t)


def test_recursion_reads_the_sibling_chain():
    f = parse_formula("let $X = b | <2>$X in $X")
    t = binary("<r><a/><a/><b/></r>", hedge=True)
    assert evaluate(f, t) == {0, 1, 2}
    t = binary("<r><b/><a/></r>", hedge=True)
    assert evaluate(f, t) == {0}


def test_model_check_rejects_cycles():
    with pytest.raises(CycleError):
        model_check(parse_formula("let $X = a | <-1>$X | <1>$X in $X"), encode(from_xml("<a/>")))


def test_batch_evaluator_agrees_with_direct_evaluation():
    rng = random.Random(2)
    alphabet = ["a", "b", "c"]
    for _ in range(30):
        f = random_formula(rng)
        for first, second, labs, flags in batches(4, alphabet):
            got = BatchEvaluator(first, second, alphabet, labs, flags).evaluate(f)
            for row in range(0, len(labs), 7):
                t = build_tree(first, second, alphabet, labs[row])
                want = np.zeros(len(first), dtype=bool)
                want[list(evaluate(f, t))] = True
                assert np.array_equal(got[row], want)
