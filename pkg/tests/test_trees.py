from __future__ import annotations

import random

from hypothesis import given, settings, strategies as st

from treelogic.trees import (
    BinaryTree, UnrankedTree, binary_size, decode, encode, from_xml, random_unranked,
    term_print, to_xml,
)

U = UnrankedTree
B = BinaryTree


def sample_document() -> UnrankedTree:
    return U("r", (
        U("s", (U("v"), U("w"), U("x", attributes={"e"})), attributes={"d"}),
        U("t"),
        U("u"),
    ), attributes={"a", "b", "c"})


def sample_encoding() -> BinaryTree:
    x = B("x", attributes={"e"})
    w = B("w", None, x)
    v = B("v", None, w)
    u = B("u")
    t = B("t", None, u)
    s = B("s", v, t, attributes={"d"})
    return B("r", s, None, attributes={"a", "b", "c"})


def test_empty_hedge():
    assert encode([]) is None
    assert decode(None) == []


def test_single_leaf():
    assert encode(U("a")) == B("a")


def test_sample_document_encoding():
    assert encode(sample_document()) == sample_encoding()
    assert decode(sample_encoding()) == [sample_document()]
    assert term_print(sample_encoding()) == "r(s(v(#, w(#, x)), t(#, u)), #)"


def test_random_round_trips():
    rng = random.Random(3)
    for _ in range(1000):
        hedge = [random_unranked(rng, 8, "abc", "xy") for _ in range(rng.randint(0, 3))]
        b = encode(hedge)
        assert decode(b) == hedge
        assert binary_size(b) == sum(t.size() for t in hedge)


@st.composite
def binary_trees(draw, depth=4):
    if depth == 0 or not draw(st.booleans()):
        return None
    return B(draw(st.sampled_from("abc")), draw(binary_trees(depth - 1)),
             draw(binary_trees(depth - 1)), frozenset(draw(st.sets(st.sampled_from("xy")))))


@settings(max_examples=300, deadline=None)
@given(binary_trees())
def test_encode_inverts_decode(t):
    assert encode(decode(t)) == t


def test_term_print_of_witness_shape():
    video = B("video", None, B("audio"))
    seq = B("seq", video, B("layout"))
    head = B("head", B("switch", seq, B("meta")))
    smil = B("smil", head)
    assert term_print(smil) == "smil(head(switch(seq(video(#, audio), layout), meta), #), #)"


def test_xml_of_leaf():
    assert to_xml(U("a")) == "<a/>"


def test_xml_marks_and_namespace():
    tree = U("b", (U("d"), U("a", marks={"target", "context"})))
    assert to_xml(tree) == "\n".join([
        '<b xmlns:solver="http://wam.inrialpes.fr/xml">',
        "  <d/>",
        '  <a solver:context="true" solver:target="true"/>',
        "</b>",
    ])


def test_xml_attributes_have_empty_values():
    assert to_xml(U("x", attributes={"e"})) == '<x e=""/>'


def test_xml_round_trip():
    rng = random.Random(5)
    for _ in range(300):
        t = random_unranked(rng, 8, "abc", "xy")
        marked = U(t.label, t.children, t.attributes, {"context"} if rng.random() < 0.5 else ())
        assert from_xml(to_xml(marked)) == marked
        assert decode(encode(marked))[0] == from_xml(to_xml(decode(encode(marked))))
