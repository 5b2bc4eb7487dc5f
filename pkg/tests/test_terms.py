"""Data-term literal parsing and printing."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from dial.registry import ANNOTATION_LABELS, BUILTIN_VOCABULARY
from dial.terms import DIST, SEQUENCE, SET, TUPLE, DataTerm, TermError, format_term, parse_term
from dial.typecheck import parse_data_term, term_text


def parse(text: str) -> DataTerm:
    return parse_term(text, BUILTIN_VOCABULARY)


def test_ner_classified_sentence():
    term = parse("S^NER")
    assert term.base == "s_T"
    assert term.annotations == frozenset({"NER"})


def test_pred_arg_labeled_with_facts():
    term = parse("Pred(Arg)^F")
    assert term.base == "PredArg"
    assert term.annotations == frozenset({"F"})


def test_vector_with_dims():
    term = parse("vec[300]")
    assert term.base == "clustered_word"
    assert term.dims == (300,)


@pytest.mark.parametrize("literal, base", [
    ("S^SRL", "s_T"),
    ("S^POS", "s_T"),
    ("C^ArgScheme", "P_c"),
    ("T^ArgStruct", "T"),
    ("Term^WSD", "t_T"),
])
def test_classification_table_terms(literal, base):
    term = parse(literal)
    assert term.base == base
    assert len(term.annotations) == 1


def test_multi_label_and_subscript():
    term = parse("S^{NER,POS}")
    assert term.annotations == frozenset({"NER", "POS"})
    sub = parse("Term_New")
    assert sub.base == "t_T" and sub.subscript == "New"


def test_distribution_form():
    term = parse("P_entail[0,1]")
    assert term.structure == DIST
    assert term.subscript == "entail"
    assert term.dist_range == (0.0, 1.0)


def test_structures():
    assert parse("{Term}").structure == SET
    tup = parse("(S, T)")
    assert tup.structure == TUPLE and len(tup.elements) == 2
    assert parse("terms").structure == SET  # plural spelling wraps set-of


@pytest.mark.parametrize("bad", [
    "", "Zebra", "S^Zebra", "S^", "vec[0]", "vec[1.5]", "{S", "(S,", "P_x[1,0]",
    "S^{NER", "S NER",
])
def test_malformed_terms(bad):
    with pytest.raises(TermError):
        parse(bad)


def test_parse_data_term_uses_builtin_registry():
    term = parse_data_term("S^NER")
    assert term.base == "s_T"


def test_format_round_trip_examples():
    for literal in ["S^NER", "S^{NER,POS}", "vec[300]", "{Term}", "(S, T)",
                    "P_entail[0,1]", "Term_New", "Pred(Arg)^F", "KB^{F,R}"]:
        term = parse(literal)
        printed = format_term(term, BUILTIN_VOCABULARY.canonical)
        assert parse(printed) == term, f"{literal} -> {printed}"


def test_sequence_display_only():
    seq = DataTerm(structure=SEQUENCE, element=parse("Score"), max_len=3)
    assert term_text(seq) == "[Score]<=3"


_LABELS = sorted(ANNOTATION_LABELS)


@given(
    spelling=st.sampled_from(["S", "T", "Term", "vec", "q", "a", "F", "R"]),
    labels=st.sets(st.sampled_from(_LABELS), max_size=4),
    dims=st.one_of(st.none(), st.lists(st.integers(1, 999), min_size=1, max_size=3)),
)
def test_parse_format_inverse(spelling, labels, dims):
    literal = spelling
    if labels:
        body = ",".join(sorted(labels))
        literal += f"^{{{body}}}" if len(labels) > 1 else f"^{body}"
    if dims:
        literal += "[" + ",".join(map(str, dims)) + "]"
    term = parse(literal)
    assert parse(format_term(term, BUILTIN_VOCABULARY.canonical)) == term
