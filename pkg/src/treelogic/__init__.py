"""A satisfiability solver for a µ-calculus of finite trees with converse
programs, with XPath and DTD front-ends."""
from .dtd import (
    BinaryTreeType, Dtd, DtdError, DtdSyntaxError, UndeclaredElement, UnknownStartSymbol,
    compile_btt, parse_dtd, to_btt, validate,
)
from .formula import (
    And, Attribute, BOTTOM, CONTEXT, Call, ContextMark, CycleError, Element, Equiv, Formula,
    FormulaError, Implies, Let, Modal, Not, NonMonotoneError, Or, Program, Prop, TOP, Var,
    cycle_check, negate, pretty_print, to_nnf,
)
from .modelcheck import evaluate, model_check
from .parser import (
    ArityError, PredicateDef, ProblemSpec, SpecSyntaxError, UnknownPredicate,
    UnsupportedPredicate, expand_predicates, parse_formula, parse_spec,
)
from .solver import Lean, NodeType, SolverResult, closure, entails, lean, solve
from .trees import BinaryTree, UnrankedTree, decode, encode, from_xml, term_print, to_xml
from .xpath import XPathSyntaxError, UnsupportedAxis, compile_query, desugar, parse_xpath

__all__ = [name for name in dir() if not name.startswith("_")]
