"""Registry conformance: the builtin tables and the extension overlay."""

from __future__ import annotations

import pytest

from dial.diagnostics import CollidesWithBuiltin, UnknownDialect, UnknownSymbol, UnknownTask
from dial.registry import (
    DATA_CATEGORIES,
    SIGNATURES,
    FormalTerm,
    Registry,
    Signature,
    SymbolDef,
)

SYS = frozenset({"sys"})
BOTH = frozenset({"sys", "nn"})


@pytest.fixture
def registry() -> Registry:
    return Registry()


def test_pos_signature(registry):
    sig = registry.lookup_signature("POS", SYS)
    assert [t.base for t in sig.domain] == ["s_T"]
    assert sig.range[0].base == "s_T"
    assert sig.range[0].required == frozenset({"POS"})


def test_abductive_signature(registry):
    sig = registry.lookup_signature("ABD", SYS)
    assert sig.domain[0].base == "PredArg"
    assert sig.domain[0].required == frozenset({"F"})
    assert sig.domain[1].is_resource
    assert sig.range[0].structure == "sequence"
    assert sig.range[0].element.base == "PredArg"


def test_unknown_task(registry):
    with pytest.raises(UnknownTask):
        registry.lookup_signature("FOO", SYS)


def test_rank_symbol(registry):
    sym = registry.lookup_symbol("rank", SYS)
    assert sym.glyph_id == "op_rank"
    assert (sym.min_in, sym.max_in) == (1, 1)


def test_bilstm_needs_nn_dialect(registry):
    assert registry.lookup_symbol("bilstm", BOTH).dialect == "nn"
    with pytest.raises(UnknownSymbol):
        registry.lookup_symbol("bilstm", SYS)


def test_symbol_counts(registry):
    assert len(registry.list_symbols("nn")) == 13
    assert len(registry.list_symbols("sys")) == 30
    with pytest.raises(UnknownDialect):
        registry.list_symbols("log")


def test_signature_count():
    assert len(SIGNATURES) == 26
    assert len({s.task_code for s in SIGNATURES}) == 26


def test_category_counts():
    core = [c for c in DATA_CATEGORIES if c.core]
    assert len(core) == 16
    assert len({c.code for c in DATA_CATEGORIES}) == len(DATA_CATEGORIES)


def test_symbol_codes_unique_per_dialect(registry):
    for dialect in ("sys", "nn"):
        codes = [s.code for s in registry.list_symbols(dialect)]
        assert len(codes) == len(set(codes))


def test_kb_resolves_without_a_listing_row(registry):
    sym = registry.lookup_symbol("kb", SYS)
    assert sym.category == "resource"
    assert all(s.code != "kb" for s in registry.list_symbols("sys"))


def test_register_extension_symbol(registry):
    registry.register_extension(SymbolDef(
        code="linscale", dialect="ext", name="linear scaling",
        glyph_id="op_func", min_in=1, max_in=1, min_out=1, max_out=1,
        category="operator"))
    resolution = registry.resolve("linscale", SYS)
    assert resolution is not None and resolution.is_extension


def test_extension_collision(registry):
    with pytest.raises(CollidesWithBuiltin):
        registry.register_extension(SymbolDef(
            code="POS", dialect="ext", name="x", glyph_id="op_func",
            min_in=1, max_in=1, min_out=1, max_out=1, category="operator"))


def test_extension_task_signature(registry):
    domain = (FormalTerm(base="s_T"),)
    rng = (FormalTerm(base="s_T", required=frozenset({"Lang"})),)
    registry.register_extension(Signature(
        task_code="LangID", dialect="ext", name="language id",
        variants=((domain, rng),)))
    sig = registry.lookup_signature("LangID", SYS)
    assert sig.range[0].required == frozenset({"Lang"})
    assert registry.vocabulary.knows_label("Lang")


def test_extensions_are_compilation_local():
    first = Registry()
    first.register_extension(SymbolDef(
        code="only_here", dialect="ext", name="x", glyph_id="op_func",
        min_in=1, max_in=1, min_out=1, max_out=1, category="operator"))
    assert Registry().resolve("only_here", SYS) is None


def test_meta_symbols_are_not_node_codes(registry):
    for code in ("flow", "zoom", "acc"):
        assert registry.resolve(code, SYS) is None
        assert registry.lookup_symbol(code, SYS) is not None


def test_lookups_are_pure(registry):
    a = registry.lookup_signature("WSD", SYS)
    b = registry.lookup_signature("WSD", SYS)
    assert a == b and a is b
