"""Generates the language reference: every task signature, every symbol with
its glyph, the data categories, the diagnostic codes, and the lint rules.

``python -m dial.reference [OUT.md]`` writes the document; the test suite
regenerates it and compares, so the committed copy never drifts.
"""

from __future__ import annotations

import sys
from pathlib import Path

from . import __version__
from .lint import RULES
from .registry import (
    ANNOTATION_LABELS,
    BUILTIN_VOCABULARY,
    DATA_CATEGORIES,
    DIALECTS,
    FormalTerm,
    Registry,
)
from .render import GLYPH_TABLE, SVG_MARKS
from .typecheck import formal_text

ERROR_CODES = [
    ("E001", "lexical error"),
    ("E002", "syntax error"),
    ("E003", "duplicate declaration id / extension collision"),
    ("E004", "malformed data-term literal"),
    ("E010", "node code does not resolve in the enabled dialects"),
    ("E011", "dangling reference or invalid port"),
    ("E012", "detail-group containment cycle"),
    ("E013", "persistence or query edge without a stored resource"),
    ("E020", "interchange document version mismatch"),
    ("E021", "malformed interchange document"),
    ("E101", "input arity violation"),
    ("E102", "input does not fit the signature's domain"),
    ("E103", "dimension conflict"),
    ("E104", "declared edge term conflicts with the inferred term"),
    ("E301", "layout does not belong to the diagram"),
]


def _formal_text(t: FormalTerm) -> str:
    if t.structure == "set":
        return "{" + _formal_text(t.element) + "}"
    if t.structure == "sequence":
        return "[" + _formal_text(t.element) + "]"
    if t.structure == "tuple":
        return "(" + ", ".join(_formal_text(e) for e in t.elements) + ")"
    text = formal_text(t)
    if t.optional:
        text += "^(" + ",".join(sorted(t.optional)) + ")"
    return text


def _formal_list(terms: tuple[FormalTerm, ...]) -> str:
    parts = []
    for t in terms:
        text = _formal_text(t)
        if t.is_resource:
            text += " (resource)"
        if t.optional_term:
            text = f"({text})"
        parts.append(text)
    return ", ".join(parts)


def generate_reference() -> str:
    registry = Registry()
    out: list[str] = []
    add = out.append
    add(f"# The dial language reference (toolchain v{__version__})")
    add("")
    add("Generated by `python -m dial.reference`; do not edit by hand.")
    add("")

    add("## Task signatures (dialect sys)")
    add("")
    add("| code | task | domain | range |")
    add("|---|---|---|---|")
    for sig in registry.list_signatures("sys"):
        for i, (domain, rng) in enumerate(sig.variants):
            code = sig.task_code if i == 0 else ""
            name = sig.name if i == 0 else "(alternative)"
            add(f"| {code} | {name} | {_formal_list(domain)} | {_formal_list(rng)} |")
    add("")
    add("Superscripts in parentheses are optional annotations; a term in")
    add("parentheses is an optional input or output. Resource inputs must be")
    add("wired from stored-resource nodes (datasets, gold standards,")
    add("knowledge bases).")
    add("")

    for dialect in DIALECTS:
        add(f"## Symbols (dialect {dialect})")
        add("")
        add("| code | glyph | geometry | arity in/out | meaning |")
        add("|---|---|---|---|---|")
        for sym in registry.list_symbols(dialect):
            glyph = GLYPH_TABLE[sym.glyph_id]
            mark = SVG_MARKS.get(glyph.mark, "") if glyph.mark else ""
            geometry = glyph.primitive
            if glyph.badge:
                geometry += f" + {SVG_MARKS.get(glyph.badge, glyph.badge)} badge"
            if glyph.dashed:
                geometry += ", dashed"
            arity = (f"{sym.min_in}..{sym.max_in} / {sym.min_out}..{sym.max_out}"
                     if sym.max_in or sym.max_out else "(notation)")
            add(f"| {sym.code} | {mark} | {geometry} | {arity} | {sym.name} |")
        add("")
    add("The auxiliary resource code `kb` (cylinder with a KB badge) resolves")
    add("in every diagram for knowledge-base nodes and the `@kb` source tag.")
    add("")

    add("## Data categories")
    add("")
    add("| code | spelled | description |")
    add("|---|---|---|")
    for cat in DATA_CATEGORIES:
        spelled = BUILTIN_VOCABULARY.canonical.get(cat.code, cat.code)
        extended = "" if cat.core else " (extended)"
        add(f"| {cat.code} | {spelled} | {cat.description}{extended} |")
    add("")
    add("Registered annotation labels: " + ", ".join(sorted(ANNOTATION_LABELS)) + ".")
    add("")
    add("Annotation accumulation: a stage's output keeps every label carried")
    add("by same-category inputs and adds the labels its signature")
    add("introduces, so stacked taggers produce terms such as S^{POS,Chunk}.")
    add("")

    add("## Diagnostics")
    add("")
    add("| code | meaning |")
    add("|---|---|")
    for code, meaning in ERROR_CODES:
        add(f"| {code} | {meaning} |")
    for rule in RULES:
        add(f"| {rule.code} | {rule.description} |")
    add("")
    return "\n".join(out) + "\n"


def main(argv: list[str]) -> int:
    target = Path(argv[0]) if argv else Path("docs/reference.md")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(generate_reference(), encoding="utf-8")
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
