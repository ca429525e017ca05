"""Shared helpers for the test suites."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from treelogic.formula import Formula
from treelogic.modelcheck import BatchEvaluator, batches
from treelogic.parser import Expander, parse_spec

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str) -> tuple[Formula, Expander]:
    expander = Expander(FIXTURES)
    goal = expander.expand_spec(parse_spec((FIXTURES / name).read_text(encoding="utf-8")))
    return goal, expander


def evaluations(formulas: list[Formula], max_nodes: int, alphabet, marks=()):
    """Yield, for every enumerated tree batch, the truth arrays of ``formulas``."""
    for first, second, labs, flags in batches(max_nodes, alphabet, marks):
        ev = BatchEvaluator(first, second, alphabet, labs, flags)
        yield [ev.evaluate(f) for f in formulas]


def same_everywhere(f: Formula, g: Formula, max_nodes: int, alphabet, marks=()) -> bool:
    return all(np.array_equal(a, b) for a, b in evaluations([f, g], max_nodes, alphabet, marks))


def complementary_everywhere(f: Formula, g: Formula, max_nodes: int, alphabet, marks=()) -> bool:
    return all(np.array_equal(a, ~b) for a, b in evaluations([f, g], max_nodes, alphabet, marks))


def mask_timings(text: str) -> str:
    return re.sub(r"\[\d+ ms\]", "[t ms]", text)
