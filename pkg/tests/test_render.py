"""Emitters: glyph table totality, determinism, structural fidelity."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET

import pytest

from dial import __version__
from dial.cli import compile_file, compile_source
from dial.diagnostics import RenderMismatch
from dial.layout import layout
from dial.registry import SIGNATURES, Registry
from dial.render import (
    GLYPH_TABLE,
    SVG_MARKS,
    TIKZ_MARKS,
    GlyphSpec,
    glyph_for,
    render_svg,
    render_tikz,
)

SYS = frozenset({"sys"})
BOTH = frozenset({"sys", "nn"})


def compile_corpus(name: str):
    result = compile_file(f"corpus/pass/{name}.dial")
    assert result.typed is not None
    return result


# -- glyphs --------------------------------------------------------------------


def test_fixed_glyph_assignments():
    assert glyph_for("dataset", SYS).primitive == "cylinder"
    assert glyph_for("cond", SYS).primitive == "diamond"
    assert glyph_for("encoder", SYS).primitive == "trapezoid-right"
    assert glyph_for("decoder", SYS).primitive == "trapezoid-left"
    assert glyph_for("gold", SYS).badge == "star"
    assert glyph_for("kbfn", SYS).badge == "f"
    assert glyph_for("classifier", SYS).badge == "C"
    assert glyph_for("gru", BOTH).badge == "GRU"
    assert glyph_for("gru", BOTH).mark == "lstm"  # shares the LSTM geometry


def test_glyph_totality():
    registry = Registry()
    for dialect, scope in (("sys", SYS), ("nn", BOTH)):
        for symbol in registry.list_symbols(dialect):
            spec = glyph_for(symbol.code, scope, registry)
            assert isinstance(spec, GlyphSpec), symbol.code
    for sig in SIGNATURES:
        assert glyph_for(sig.task_code, SYS).primitive == "rectangle"
    assert glyph_for("kb", SYS).badge == "KB"


def test_every_registry_glyph_id_exists():
    registry = Registry()
    for dialect in ("sys", "nn"):
        for symbol in registry.list_symbols(dialect):
            assert symbol.glyph_id in GLYPH_TABLE, symbol.glyph_id


def test_marks_cover_both_backends():
    for glyph in GLYPH_TABLE.values():
        if glyph.mark is not None:
            assert glyph.mark in SVG_MARKS and glyph.mark in TIKZ_MARKS
        if glyph.badge is not None and glyph.badge not in ("C", "KB", "f", "+", "GRU"):
            assert glyph.badge in SVG_MARKS and glyph.badge in TIKZ_MARKS


# -- SVG ------------------------------------------------------------------------


def test_single_node_svg_structure():
    result = compile_source(
        'dial 0.1\ndialect sys\ndiagram "one" {\n  data x: S\n}\n')
    lay = layout(result.typed.diagram)
    svg = render_svg(result.typed, lay, registry=result.registry)
    assert svg.count('class="node-shape"') == 1
    assert svg.count('class="title"') == 1
    assert f"<!-- dialc v{__version__} -->" in svg


@pytest.mark.parametrize("name", ["qa_system", "lexicon_attention", "entailment"])
def test_svg_is_wellformed_xml(name):
    result = compile_corpus(name)
    lay = layout(result.typed.diagram)
    svg = render_svg(result.typed, lay, registry=result.registry)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")


@pytest.mark.parametrize("name", ["qa_system", "lexicon_attention", "entailment"])
def test_shape_count_matches_model(name):
    result = compile_corpus(name)
    diagram = result.typed.diagram
    lay = layout(diagram)
    svg = render_svg(result.typed, lay, registry=result.registry)
    shapes = svg.count('class="node-shape"')
    groups = svg.count('class="group-box"')
    tables = svg.count('class="table-box"')
    titles = svg.count('class="title"')
    assert shapes == len(diagram.nodes)
    assert groups == len(diagram.groups)
    assert tables == len(diagram.tables)
    assert titles == 1


def test_lexicon_attention_has_two_table_regions():
    result = compile_corpus("lexicon_attention")
    lay = layout(result.typed.diagram)
    svg = render_svg(result.typed, lay, registry=result.registry)
    assert svg.count('class="table-box"') == 2


def test_svg_deterministic():
    result = compile_corpus("entailment")
    lay = layout(result.typed.diagram)
    a = render_svg(result.typed, lay, registry=result.registry)
    b = render_svg(result.typed, layout(result.typed.diagram), registry=result.registry)
    assert a == b


def test_superscripts_in_svg():
    result = compile_source(
        'dial 0.1\ndialect sys\ndiagram "sup" {\n'
        '  data x: S^NER\n  node c: COREF perf(acc=0.8@"d")\n  edge x -> c\n}\n')
    lay = layout(result.typed.diagram)
    svg = render_svg(result.typed, lay, registry=result.registry)
    assert 'baseline-shift="super"' in svg and ">NER</tspan>" in svg


def test_integer_coordinates_only():
    result = compile_corpus("qa_system")
    lay = layout(result.typed.diagram)
    svg = render_svg(result.typed, lay, registry=result.registry)
    for attr in re.findall(r'(?<![A-Za-z])(?:x|y|cx|cy|width|height|r)="([^"]+)"', svg):
        assert re.fullmatch(r"-?\d+", attr), attr


def test_mismatched_layout_is_e301():
    first = compile_corpus("entailment")
    other = compile_corpus("qa_system")
    lay = layout(other.typed.diagram)
    with pytest.raises(RenderMismatch):
        render_svg(first.typed, lay, registry=first.registry)


# -- TikZ -----------------------------------------------------------------------


def test_empty_diagram_tikz_compilable_shell():
    result = compile_source('dial 0.1\ndialect sys\ndiagram "empty" { }\n')
    lay = layout(result.typed.diagram)
    tikz = render_tikz(result.typed, lay, registry=result.registry)
    assert tikz.startswith(f"% dialc v{__version__}\n")
    assert r"\documentclass[border=4pt]{standalone}" in tikz
    assert tikz.count(r"\begin{tikzpicture}") == 1
    assert tikz.count(r"\end{tikzpicture}") == 1
    assert "empty" in tikz


def test_superscript_terms_in_tikz_math_mode():
    result = compile_source(
        'dial 0.1\ndialect sys\ndiagram "sup" {\n'
        '  data x: S^NER\n  node c: COREF perf(acc=0.8@"d")\n  edge x -> c\n}\n')
    lay = layout(result.typed.diagram)
    tikz = render_tikz(result.typed, lay, registry=result.registry)
    assert "$S^{NER}$" in tikz


def test_tikz_deterministic():
    result = compile_corpus("lexicon_attention")
    a = render_tikz(result.typed, layout(result.typed.diagram), registry=result.registry)
    b = render_tikz(result.typed, layout(result.typed.diagram), registry=result.registry)
    assert a == b


def test_output_stable_under_hash_randomization():
    # set-iteration order must never leak into artifacts
    import subprocess
    import sys

    script = (
        "from dial.cli import compile_file\n"
        "from dial.layout import layout\n"
        "from dial.render import render_svg\n"
        "import hashlib\n"
        "h = hashlib.sha256()\n"
        "r = compile_file('corpus/pass/qa_system.dial')\n"
        "h.update(render_svg(r.typed, layout(r.typed.diagram), registry=r.registry).encode())\n"
        "print(h.hexdigest())\n"
    )
    digests = set()
    for seed in ("0", "1", "424242"):
        proc = subprocess.run([sys.executable, "-c", script],
                              capture_output=True, text=True,
                              env={"PYTHONHASHSEED": seed, "PATH": "/usr/bin:/bin"})
        assert proc.returncode == 0, proc.stderr
        digests.add(proc.stdout.strip())
    assert len(digests) == 1, digests


def test_tikz_balanced_braces():
    for name in ("qa_system", "lexicon_attention", "entailment"):
        result = compile_corpus(name)
        lay = layout(result.typed.diagram)
        tikz = render_tikz(result.typed, lay, registry=result.registry)
        assert tikz.count("{") == tikz.count("}"), name
        for line in tikz.splitlines():
            if line.startswith(("\\node", "\\draw")):
                assert line.rstrip().endswith(";"), line
