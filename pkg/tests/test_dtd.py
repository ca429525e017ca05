from __future__ import annotations

import warnings

import numpy as np
import pytest

from support import FIXTURES, same_everywhere
from treelogic.dtd import (
    Any, DtdSyntaxError, DtdWarning, Empty, UndeclaredElement, UnknownStartSymbol, compile_btt,
    parse_dtd, to_btt, validate,
)
from treelogic.formula import Program, cycle_check, size, walk, Modal
from treelogic.modelcheck import BatchEvaluator, batches, build_tree
from treelogic.parser import parse_formula
from treelogic.trees import UnrankedTree as U, all_unranked_trees, decode, encode

SAMPLE_DTD = """
<!ELEMENT r (s, t, u)>
<!ATTLIST r a CDATA #IMPLIED b CDATA #IMPLIED c CDATA #IMPLIED>
<!ELEMENT s (v, w, x)>
<!ATTLIST s d CDATA #IMPLIED>
<!ELEMENT t EMPTY>
<!ELEMENT u EMPTY>
<!ELEMENT v EMPTY>
<!ELEMENT w EMPTY>
<!ELEMENT x EMPTY>
<!ATTLIST x e CDATA #REQUIRED>
"""

CORPUS = {
    "choice_star": ("r", """
        <!ELEMENT r (a | b)*>
        <!ELEMENT a EMPTY>
        <!ELEMENT b (a?)>"""),
    "sequence": ("r", """
        <!ELEMENT r (a, b*, a?)>
        <!ELEMENT a (b)?>
        <!ELEMENT b EMPTY>"""),
    "recursive": ("r", """
        <!ELEMENT r (a | (b, r?))+>
        <!ELEMENT a EMPTY>
        <!ELEMENT b (#PCDATA | a)*>"""),
    "any": ("r", """
        <!ELEMENT r (a, ANYTHING?)>
        <!ELEMENT a ANY>
        <!ELEMENT ANYTHING EMPTY>"""),
}


def sample_document() -> U:
    return U("r", (
        U("s", (U("v"), U("w"), U("x", attributes={"e"})), attributes={"d"}),
        U("t"),
        U("u"),
    ), attributes={"a", "b", "c"})


def test_sample_document_is_valid():
    d = parse_dtd(SAMPLE_DTD)
    assert validate(sample_document(), d, "r")
    assert to_btt(d, "r").accepts(encode(sample_document()))
    missing = U("r", (U("s", (U("v"), U("w"), U("x"))), U("t"), U("u")))
    assert not validate(missing, d, "r")


def test_parse_examples():
    d = parse_dtd("<!ELEMENT e EMPTY> <!ATTLIST x e CDATA #REQUIRED> <!ELEMENT x ANY>")
    assert d.elements["e"] == Empty()
    assert d.elements["x"] == Any()
    assert d.attlists["x"] == [("e", True)]


def test_unknown_declarations_are_skipped_with_a_warning():
    with pytest.warns(DtdWarning):
        d = parse_dtd('<!ENTITY % x "y"> <!ELEMENT a EMPTY>')
    assert d.labels() == ["a"]


def test_undeclared_elements():
    with pytest.warns(DtdWarning):
        d = parse_dtd("<!ELEMENT a (b)>")
    assert validate(U("a", (U("b", (U("a", (U("b"),)),)),)), d, "a")
    with pytest.raises(UndeclaredElement):
        parse_dtd("<!ELEMENT a (b)>", strict=True)


def test_syntax_error():
    with pytest.raises(DtdSyntaxError):
        parse_dtd("<!ELEMENT a (b,>")


def test_unknown_start_symbol():
    with pytest.raises(UnknownStartSymbol):
        parse_dtd("<!ELEMENT a EMPTY>", start="z")
    with pytest.raises(UnknownStartSymbol):
        compile_btt(to_btt(parse_dtd("<!ELEMENT a EMPTY>")), "z")


def test_empty_content_rule():
    b = to_btt(parse_dtd("<!ELEMENT a EMPTY>"))
    assert b.alternatives("a") == [("a", None, None)]
    f = compile_btt(b)
    assert same_everywhere(f, parse_formula("a & ~<1>T & ~<2>T"), 2, ["a", "b"])


def test_choice_star_btt_members():
    d = parse_dtd(CORPUS["choice_star"][1])
    b = to_btt(d, "r")
    for t in all_unranked_trees(3, ["r", "a", "b"]):
        assert b.accepts(encode(t)) == validate(t, d, "r"), t
    assert b.accepts(encode(U("r", (U("a"), U("b")))))


def test_compiled_types_are_forward_and_cycle_free():
    for start, text in CORPUS.values():
        b = to_btt(parse_dtd(text), start)
        f = compile_btt(b)
        assert cycle_check(f).ok
        assert all(g.program.forward for g in walk(f) if isinstance(g, Modal))
        assert size(f) <= 12 * b.size()


def reference_verdicts(first, second, alphabet, labs, flags, d, start) -> np.ndarray:
    out = np.zeros(len(labs), dtype=bool)
    for row in range(len(labs)):
        hedge = decode(build_tree(first, second, alphabet, labs[row],
                                  {k: v[row] for k, v in flags.items()}))
        out[row] = len(hedge) == 1 and validate(hedge[0], d, start)
    return out


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_validator_matches_compiled_type(name):
    start, text = CORPUS[name]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DtdWarning)
        d = parse_dtd(text, start)
    f = compile_btt(to_btt(d, start))
    alphabet = d.labels()
    for max_nodes, extra in ((6, []), (4, ["z"])):
        for first, second, labs, flags in batches(max_nodes, alphabet + extra):
            got = BatchEvaluator(first, second, alphabet + extra, labs, flags).evaluate(f)[:, 0]
            want = reference_verdicts(first, second, alphabet + extra, labs, flags, d, start)
            assert np.array_equal(got, want)


def test_attribute_constraints():
    d = parse_dtd("""
        <!ELEMENT r (a*)>
        <!ATTLIST r x CDATA #IMPLIED>
        <!ELEMENT a EMPTY>
        <!ATTLIST a y CDATA #REQUIRED>""")
    f = compile_btt(to_btt(d, "r"))
    alphabet = ["r", "a"]
    for first, second, labs, flags in batches(4, alphabet, marks=("@x", "@y")):
        got = BatchEvaluator(first, second, alphabet, labs, flags).evaluate(f)[:, 0]
        assert np.array_equal(got, reference_verdicts(first, second, alphabet, labs, flags, d, "r"))


def test_smil_fixture_admits_the_witness_shape():
    d = parse_dtd(FIXTURES / "sampleDTDs" / "smil.dtd", "smil")
    doc = U("smil", (U("head", (U("switch", (U("seq", (U("video"), U("audio"))), U("layout"))),
                                U("meta"))),))
    assert validate(doc, d, "smil")
    assert to_btt(d, "smil").accepts(encode(doc))
