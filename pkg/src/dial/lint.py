"""Style rules over the typed, laid-out diagram.

Every rule is a warning; escalation happens only in the CLI (--deny
warnings). Output order is stable: rule code first, then declaration order.

  W201  title placed away from the top left
  W202  meta table placed away from the bottom right
  W203  non-recurrent edge flows backward
  W204  zoom-in entry side differs from the owner's input side
  W205  extension symbol in use
  W206  verbal label duplicates a registered symbol
  W207  classifier or task node without a performance annotation
  W208  feature- and component-level nodes side by side in one layer
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import Diagnostic
from .layout import LayoutResult
from .registry import Registry
from .typecheck import TypedDiagram

OWNER_INPUT_SIDE = "left"  # inputs enter on the left in left-to-right layout


@dataclass(frozen=True)
class LintRule:
    code: str
    description: str
    severity: str = "warning"
    enabled: bool = True


RULES: tuple[LintRule, ...] = (
    LintRule("W201", "keep the title at the top left"),
    LintRule("W202", "keep data and hyperparameter tables at the bottom right"),
    LintRule("W203", "flows should run left to right; use ~> for recurrence"),
    LintRule("W204", "a zoom-in keeps its input on the same side as its owner"),
    LintRule("W205", "extension symbols are discouraged; prefer the builtin vocabulary"),
    LintRule("W206", "a verbal label duplicates an existing symbol"),
    LintRule("W207", "classifiers and tasks should carry a performance annotation"),
    LintRule("W208", "feature- and component-level nodes mix in one layer; group the detail"),
)


def lint(typed: TypedDiagram, layout_result: LayoutResult,
         registry: Registry | None = None,
         disabled: frozenset[str] = frozenset()) -> list[Diagnostic]:
    registry = registry or Registry()
    diagram = typed.diagram
    out: list[Diagnostic] = []

    def emit(code: str, message: str, ir_path: str | None) -> None:
        if code not in disabled:
            out.append(Diagnostic(code, message, ir_path=ir_path))

    if diagram.title_placement != "top_left":
        emit("W201", f"title is placed {diagram.title_placement}; "
                     "the house style keeps titles top left", None)

    for table in diagram.tables:
        if table.placement != "bottom_right":
            emit("W202", f"table {table.id!r} is placed {table.placement}; "
                         "data belongs at the bottom right", table.id)

    for edge in diagram.edges:
        if edge.id in layout_result.reversed_edges and edge.flow_kind != "recurrent":
            emit("W203", f"edge {edge.id} flows backward; left-to-right is the "
                         "default (recurrent edges use ~>)", edge.id)

    for group in diagram.groups:
        if group.entry_side != OWNER_INPUT_SIDE:
            emit("W204", f"detail group {group.id!r} declares entry "
                         f"{group.entry_side}; its owner takes input on the "
                         f"{OWNER_INPUT_SIDE}", group.id)

    symbol_names = _symbol_names(registry, diagram.dialects)
    for node in diagram.nodes:
        resolution = registry.resolve(node.code, diagram.dialects)
        if resolution is not None and resolution.is_extension:
            emit("W205", f"node {node.id!r} uses extension code {node.code!r}; "
                         "introduce new symbols sparingly", node.id)
        if node.label is not None:
            duplicated = symbol_names.get(node.label.lower())
            if duplicated is not None and duplicated != node.code:
                emit("W206", f"label {node.label!r} duplicates the symbol "
                             f"{duplicated!r}; use the symbol itself", node.id)
        if node.kind in ("task", "classifier") and not node.perf:
            emit("W207", f"{node.kind} node {node.id!r} carries no perf "
                         "annotation; report quality per component", node.id)

    out.extend(_mixed_layers(typed, layout_result, disabled))
    out.sort(key=lambda d: (d.code, _decl_order(diagram, d.ir_path)))
    return out


def _symbol_names(registry: Registry, dialects: frozenset[str]) -> dict[str, str]:
    names: dict[str, str] = {}
    for dialect in sorted(dialects):
        for symbol in registry.list_symbols(dialect):
            names[symbol.code.lower()] = symbol.code
    return names


def _mixed_layers(typed: TypedDiagram, layout_result: LayoutResult,
                  disabled: frozenset[str]) -> list[Diagnostic]:
    if "W208" in disabled:
        return []
    diagram = typed.diagram
    members = diagram.group_member_ids()
    top = [n for n in diagram.nodes if n.id not in members]
    band = _bands(diagram, {n.id for n in top})
    seen: dict[tuple[int, int], dict[str, str]] = {}
    out: list[Diagnostic] = []
    flagged: set[tuple[int, int]] = set()
    for node in top:
        layer = layout_result.layers.get(node.id)
        if layer is None:
            continue
        key = (band[node.id], layer)
        classes = seen.setdefault(key, {})
        classes.setdefault(node.shape_class, node.id)
        if len(classes) > 1 and key not in flagged:
            flagged.add(key)
            feature = classes.get("feature")
            component = classes.get("component")
            out.append(Diagnostic(
                "W208",
                f"layer {layer} mixes feature node {feature!r} with component "
                f"node {component!r}; box the detail or align the abstraction",
                ir_path=feature or component,
            ))
    return out


def _bands(diagram, top_ids: set[str]) -> dict[str, int]:
    from .layout import _weak_components

    edges = [e for e in diagram.edges
             if e.source.node in top_ids and e.target.node in top_ids]
    ordered_ids = [n.id for n in diagram.nodes if n.id in top_ids]
    return _weak_components(ordered_ids, edges)


def _decl_order(diagram, ir_path: str | None) -> int:
    if ir_path is None:
        return -1
    for i, node in enumerate(diagram.nodes):
        if node.id == ir_path:
            return i
    for i, edge in enumerate(diagram.edges):
        if edge.id == ir_path:
            return 1000 + i
    for i, group in enumerate(diagram.groups):
        if group.id == ir_path:
            return 2000 + i
    for i, table in enumerate(diagram.tables):
        if table.id == ir_path:
            return 3000 + i
    return 9999
