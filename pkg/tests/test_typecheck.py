"""Semantic core: matching, inference, the dimension calculus, propagation."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from dial.cli import compile_source
from dial.model import Node
from dial.registry import FormalTerm, Registry
from dial.terms import SEQUENCE, SET
from dial.typecheck import (
    DimConflict,
    check_diagram,
    dim_combine,
    infer_output,
    match_term,
    parse_data_term,
)
from oracles import propagate_in_order, random_propagation_diagram, topological_orders

SYS = frozenset({"sys"})


def term(text: str):
    return parse_data_term(text)


# -- match_term ---------------------------------------------------------------


def test_superset_of_required_labels_matches():
    assert match_term(term("S^{NER,POS}"), FormalTerm("s_T", frozenset({"NER"}))) is None


def test_missing_label_reports_reason():
    reason = match_term(term("S"), FormalTerm("s_T", frozenset({"NER"})))
    assert reason is not None and "NER" in reason


def test_no_subtyping_between_categories():
    reason = match_term(term("T"), FormalTerm("s_T"))
    assert reason is not None and "category" in reason


def test_dims_pinned_by_formal():
    assert match_term(term("vec[8]"), FormalTerm("clustered_word")) is None
    assert match_term(term("vec[8]"), FormalTerm("clustered_word", dims=(8,))) is None
    assert match_term(term("vec[8]"), FormalTerm("clustered_word", dims=(9,))) is not None


def test_structure_must_agree():
    formal_set = FormalTerm(structure=SET, element=FormalTerm("t_T"))
    assert match_term(term("{Term}"), formal_set) is None
    assert match_term(term("Term"), formal_set) is not None


# -- infer_output on tasks -----------------------------------------------------


def infer(code: str, inputs, kind="task", params=(), resource=None):
    node = Node(id="x", kind=kind, code=code, params=tuple(params))
    terms = [term(t) if isinstance(t, str) else t for t in inputs]
    return infer_output(node, terms, input_is_resource=resource, dialects=SYS)


def test_pos_tagging():
    outs, diags = infer("POS", ["S"])
    assert not diags
    assert outs[0].base == "s_T" and outs[0].annotations == frozenset({"POS"})


def test_wsd_with_kb():
    outs, diags = infer("WSD", ["S^{POS,Chunk}", "KB"], resource=[False, True])
    assert not diags
    assert outs[0].base == "t_T"
    assert outs[0].annotations == frozenset({"WSD"})


def test_el_without_ner_is_e102():
    outs, diags = infer("EL", ["S"])
    assert [d.code for d in diags] == ["E102"]
    assert "S^NER" in diags[0].message


def test_annotation_accumulation():
    outs, diags = infer("POS", ["S^NER"])
    assert not diags
    assert outs[0].annotations == frozenset({"NER", "POS"})


def test_arity_violation():
    _, diags = infer("POS", [])
    assert [d.code for d in diags] == ["E101"]


def test_coref_variants():
    outs, diags = infer("COREF", ["S^NER"])
    assert not diags and outs[0].structure == SET
    outs, diags = infer("COREF", ["T"])
    assert not diags and outs[0].structure == SET


def test_resource_kind_required():
    _, diags = infer("WSD", ["S^{POS,Chunk}", "KB"], resource=[False, False])
    assert [d.code for d in diags] == ["E102"]
    assert "resource" in diags[0].message


# -- infer_output on operators ---------------------------------------------------


def test_rank_wraps_sets_into_bounded_sequences():
    source = term("{Score}")
    outs, diags = infer("rank", [source], kind="operator", params=(("n", 1),))
    assert not diags
    assert outs[0].structure == SEQUENCE
    assert outs[0].element.base == "Score"
    assert outs[0].max_len == 1


def test_sim_yields_score():
    outs, _ = infer("sim", ["Term_1", "Term_2"], kind="operator")
    assert outs[0].base == "Score"
    outs, _ = infer("sim", [term("{(vec[4], vec[4])}")], kind="operator")
    assert outs[0].structure == SET and outs[0].element.base == "Score"


def test_cond_has_two_outputs_typed_as_input():
    outs, _ = infer("cond", ["S^NER"], kind="operator")
    assert len(outs) == 2
    assert outs[0] == outs[1] == term("S^NER")


def test_verify_passthrough():
    outs, _ = infer("verify", ["Pred(Arg)^F"], kind="verify")
    assert outs[0] == term("Pred(Arg)^F")


def test_entail_gives_predarg():
    outs, _ = infer("entail", ["S", "S"], kind="operator")
    assert outs[0].base == "PredArg"


def test_oplus_merges_labels_without_dims():
    outs, _ = infer("oplus", ["S^{Token,POS}", "Structure_PN"], kind="operator")
    assert outs[0].base == "s_T"
    assert outs[0].annotations == frozenset({"Token", "POS"})


def test_oplus_dim_conflict_is_e103():
    _, diags = infer("oplus", ["vec[3]", "vec[2,2]"], kind="operator")
    assert [d.code for d in diags] == ["E103"]


def test_declared_out_param_wins():
    outs, _ = infer("func", ["S"], kind="function", params=(("out", "a"),))
    assert outs[0].base == "a"


# -- dim_combine ------------------------------------------------------------------


def test_dim_combine_examples():
    assert dim_combine("oplus", (3,), (4,)) == (7,)
    assert dim_combine("otimes", (3,), (4,)) == (3, 4)
    assert dim_combine("concat", (100,), (50,)) == (150,)
    with pytest.raises(DimConflict):
        dim_combine("oplus", (3,), (2, 2))


@given(a=st.lists(st.integers(1, 64), min_size=1, max_size=3),
       b=st.lists(st.integers(1, 64), min_size=1, max_size=3))
def test_dim_combine_properties(a, b):
    a, b = tuple(a), tuple(b)
    assert dim_combine("otimes", a, b) == a + b
    if len(a) == len(b) and a[:-1] == b[:-1]:
        combined = dim_combine("oplus", a, b)
        assert combined[-1] == a[-1] + b[-1]
        assert combined[:-1] == a[:-1]
    elif len(a) != len(b):
        with pytest.raises(DimConflict):
            dim_combine("oplus", a, b)


# -- check_diagram -----------------------------------------------------------------


def compile_ok(path: str):
    from pathlib import Path

    source = Path(path).read_text()
    result = compile_source(source, path)
    assert result.typed is not None, result.diagnostics
    return result


def test_qa_corpus_checks_clean():
    result = compile_ok("corpus/pass/qa_system.dial")
    assert result.typed.diagnostics == []
    assert len(result.typed.edge_terms) == len(result.typed.diagram.edges)


def test_single_data_node():
    result = compile_source(
        'dial 0.1\ndialect sys\ndiagram "one" {\n  data x: S\n}\n')
    assert result.typed is not None
    assert result.typed.edge_terms == {} and result.typed.diagnostics == []


def test_flow_cycle_through_structure_builders_converges():
    # a cycle through tuple-building operators must stay on a finite domain
    src = ('dial 0.1\ndialect sys\ndiagram "cycle" {\n'
           "  data x: T\n  node a: func\n  node b: func\n"
           "  edge x -> a\n  edge a -> b\n  edge b -> a\n}\n")
    first = compile_source(src)
    assert first.typed is not None
    second = compile_source(src)
    assert first.typed.edge_terms == second.typed.edge_terms
    assert not [d for d in first.typed.diagnostics if d.severity == "error"]


def test_recurrent_cycle_terminates_and_is_stable():
    src = ('dial 0.1\ndialect sys, nn\ndiagram "loop" {\n'
           "  data x: vec[8]\n  node l: lstm(units=8)\n"
           "  edge x -> l\n  edge l ~> l\n}\n")
    first = compile_source(src)
    second = compile_source(src)
    assert first.typed.edge_terms == second.typed.edge_terms
    assert not first.typed.diagnostics


def test_declared_edge_term_conflict():
    src = ('dial 0.1\ndialect sys\ndiagram "as" {\n'
           "  data x: S\n  node p: POS perf(acc=0.9@\"d\")\n"
           "  edge x -> p as T\n}\n")
    result = compile_source(src)
    assert [d.code for d in result.typed.diagnostics] == ["E104"]


def test_declared_edge_term_may_understate():
    src = ('dial 0.1\ndialect sys\ndiagram "as" {\n'
           "  data x: S^{NER,Token}\n  node p: POS perf(acc=0.9@\"d\")\n"
           "  edge x -> p as S^NER\n}\n")
    result = compile_source(src)
    assert result.typed.diagnostics == []


def test_entity_linking_updated_kb_persists_back():
    # the optional second output of entity linking may write back to the KB
    src = ('dial 0.1\ndialect sys\ndiagram "writeback" {\n'
           "  data s: S^NER\n"
           '  node el: EL perf(acc=0.8@"d")\n'
           "  data kb1: KB @kb\n"
           "  edge s -> el\n"
           "  edge el.out1 |-> kb1\n}\n")
    result = compile_source(src)
    assert result.typed is not None, result.diagnostics
    assert result.typed.diagnostics == []
    writeback = result.typed.diagram.edges[1]
    assert result.typed.edge_terms[writeback.id].base == "KB"


def test_check_diagram_is_deterministic():
    rng = random.Random(7)
    for _ in range(25):
        diagram = random_propagation_diagram(rng)
        registry = Registry()
        first = check_diagram(diagram, registry)
        second = check_diagram(diagram, registry)
        assert first.edge_terms == second.edge_terms
        assert [d.code for d in first.diagnostics] == [d.code for d in second.diagnostics]


def test_annotation_monotonicity_along_same_carrier_flows():
    # wherever the carrier category is preserved across a node, labels only grow
    rng = random.Random(31)
    registry = Registry()
    for _ in range(60):
        diagram = random_propagation_diagram(rng)
        typed = check_diagram(diagram, registry)
        for node in diagram.nodes:
            in_terms = [typed.edge_terms.get(e.id) for e in diagram.edges
                        if e.target.node == node.id]
            out_terms = [typed.edge_terms.get(e.id) for e in diagram.edges
                         if e.source.node == node.id]
            for source in in_terms:
                for out in out_terms:
                    if source is None or out is None:
                        continue
                    a, b = source.core(), out.core()
                    if a.base is not None and a.base == b.base:
                        assert a.annotations <= b.annotations, (node.code, a, b)


def test_propagation_matches_oracle_small():
    rng = random.Random(20250811)
    for _ in range(50):
        diagram = random_propagation_diagram(rng)
        registry = Registry()
        typed = check_diagram(diagram, registry)
        orders = topological_orders(diagram, cap=24)
        assert orders, "generator always yields a DAG"
        reference = None
        for order in orders:
            edge_terms, codes = propagate_in_order(diagram, order, registry)
            if reference is None:
                reference = (edge_terms, codes)
            assert (edge_terms, codes) == reference, "order independence"
        oracle_terms, oracle_codes = reference
        got = {e.id: typed.edge_terms.get(e.id) for e in diagram.edges}
        assert got == oracle_terms
        assert sorted(d.code for d in typed.diagnostics) == oracle_codes
