"""The diagram intermediate representation.

A diagram is an ordered, typed graph: nodes carry registry codes, edges carry
flow kinds and optional asserted data terms, detail groups hold zoom-in
subgraphs, and meta tables carry display rows. Declaration order is
significant everywhere; it seeds the deterministic layout tie-breaking.

Diagrams are treated as immutable once construction is complete; all
analyses over them are pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .diagnostics import (
    BadSlot,
    Diagnostic,
    DuplicateId,
    SerializationError,
    UnknownDialect,
    UnknownNode,
)
from .registry import DIALECTS, Registry, Resolution

IR_VERSION = "0.1"

NODE_KINDS = ("task", "operator", "resource", "function", "classifier", "nn_layer", "io", "verify")
FLOW_KINDS = ("flow", "biflow", "persist", "query", "interface", "recurrent")
REGIONS = ("top_left", "top_right", "bottom_left", "bottom_right")
SIDES = ("left", "right", "top", "bottom")

# Kind-based shape defaults; authors may override via the shape param.
COMPONENT_KINDS = frozenset({"task", "classifier", "nn_layer", "io", "resource"})


def default_shape_class(kind: str) -> str:
    return "component" if kind in COMPONENT_KINDS else "feature"


@dataclass(frozen=True)
class Port:
    node: str
    slot: int = 0
    direction: str = "out"  # "in" | "out"

    def __str__(self) -> str:
        return f"{self.node}.{self.direction}{self.slot}"


@dataclass(frozen=True)
class PerfAnnotation:
    metric: str
    value: float
    corpus: str

    def __post_init__(self) -> None:
        if not self.metric:
            raise ValueError("perf metric must be non-empty")
        if self.metric == "acc" and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"acc must lie in [0,1], got {self.value}")


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    code: str
    label: str | None = None
    params: tuple[tuple[str, object], ...] = ()
    shape_class: str = "component"
    perf: tuple[PerfAnnotation, ...] = ()
    detail: str | None = None  # id of the group refining this node
    placement_hint: str | None = None

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class Edge:
    id: str
    source: Port
    target: Port
    flow_kind: str = "flow"
    declared_term: str | None = None  # literal text of the author's `as` term


@dataclass(frozen=True)
class DetailGroup:
    id: str
    owner: str
    member_nodes: tuple[str, ...] = ()
    member_edges: tuple[str, ...] = ()
    entry_side: str = "left"
    exit_side: str = "right"


@dataclass(frozen=True)
class MetaTable:
    id: str
    kind: str = "freeform"  # hyperparams | results | freeform
    rows: tuple[tuple[str, str], ...] = ()
    placement: str = "bottom_right"


@dataclass(frozen=True)
class EmbeddingDecl:
    id: str
    dim: int
    label: str | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"embedding dim must be >= 1, got {self.dim}")


@dataclass
class Diagram:
    name: str
    dialects: frozenset[str]
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    groups: list[DetailGroup] = field(default_factory=list)
    tables: list[MetaTable] = field(default_factory=list)
    embeddings: list[EmbeddingDecl] = field(default_factory=list)
    format_version: str = IR_VERSION
    title_placement: str = "top_left"

    def node_by_id(self, node_id: str) -> Node | None:
        for node in self.nodes:
            if node.id == node_id:
                return node
        return None

    def edge_by_id(self, edge_id: str) -> Edge | None:
        for edge in self.edges:
            if edge.id == edge_id:
                return edge
        return None

    def node_index(self, node_id: str) -> int:
        for i, node in enumerate(self.nodes):
            if node.id == node_id:
                return i
        return -1

    def in_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.target.node == node_id]

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.source.node == node_id]

    def group_member_ids(self) -> frozenset[str]:
        out: set[str] = set()
        for group in self.groups:
            out.update(group.member_nodes)
        return frozenset(out)


def new_diagram(name: str, dialects: set[str] | frozenset[str]) -> Diagram:
    dialects = frozenset(dialects)
    unknown = dialects - frozenset(DIALECTS)
    if unknown:
        raise UnknownDialect(f"unknown dialect(s): {sorted(unknown)}")
    if "sys" not in dialects:
        raise UnknownDialect("every diagram must enable the sys dialect")
    return Diagram(name=name, dialects=dialects)


def add_node(diagram: Diagram, spec: Node) -> str:
    if diagram.node_by_id(spec.id) is not None:
        raise DuplicateId(f"node id {spec.id!r} already declared")
    diagram.nodes.append(spec)
    return spec.id


def add_edge(diagram: Diagram, source: Port, target: Port, kind: str = "flow",
             declared_term: str | None = None) -> str:
    if kind not in FLOW_KINDS:
        raise BadSlot(f"unknown flow kind {kind!r}")
    for port in (source, target):
        if diagram.node_by_id(port.node) is None:
            raise UnknownNode(f"edge endpoint references unknown node {port.node!r}")
        if port.slot < 0:
            raise BadSlot(f"negative slot on {port}")
    if source.direction != "out" or target.direction != "in":
        raise BadSlot("edges run from an out port to an in port")
    edge_id = f"e{len(diagram.edges)}"
    diagram.edges.append(Edge(edge_id, source, target, kind, declared_term))
    return edge_id


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------


def validate_structure(diagram: Diagram, registry: Registry | None = None) -> list[Diagnostic]:
    """All structural violations; empty iff the diagram is well-formed.

    E010 unresolved code, E011 dangling reference or bad port, E012 group
    containment cycle, E013 persist/query endpoint kind violation.
    """
    registry = registry or Registry()
    out: list[Diagnostic] = []
    resolutions: dict[str, Resolution | None] = {}
    node_ids = {n.id for n in diagram.nodes}
    embedding_ids = {e.id for e in diagram.embeddings}

    for node in diagram.nodes:
        res = registry.resolve(node.code, diagram.dialects)
        resolutions[node.id] = res
        if res is None:
            out.append(Diagnostic(
                "E010",
                f"code {node.code!r} does not resolve in dialects "
                f"{{{', '.join(sorted(diagram.dialects))}}}",
                ir_path=node.id,
            ))
        if node.code == "proj":
            emb = node.param("embedding")
            if emb is not None and emb not in embedding_ids:
                out.append(Diagnostic(
                    "E011", f"projection references unknown embedding {emb!r}",
                    ir_path=node.id,
                ))

    occupied: dict[tuple[str, int], str] = {}
    for edge in diagram.edges:
        for port, bound_attr in ((edge.source, "max_out"), (edge.target, "max_in")):
            if port.node not in node_ids:
                out.append(Diagnostic(
                    "E011", f"edge references unknown node {port.node!r}", ir_path=edge.id))
                continue
            res = resolutions.get(port.node)
            if res is not None and port.slot >= getattr(res, bound_attr):
                out.append(Diagnostic(
                    "E011",
                    f"port {port} exceeds the arity of code "
                    f"{diagram.node_by_id(port.node).code!r} "
                    f"(max {getattr(res, bound_attr)})",
                    ir_path=edge.id,
                ))
        if edge.flow_kind != "recurrent" and edge.target.node in node_ids:
            key = (edge.target.node, edge.target.slot)
            if key in occupied:
                out.append(Diagnostic(
                    "E011",
                    f"input slot {edge.target} already fed by edge {occupied[key]}",
                    ir_path=edge.id,
                ))
            else:
                occupied[key] = edge.id

        def _kind(node_id: str) -> str | None:
            res = resolutions.get(node_id)
            return res.kind if res else None

        if edge.flow_kind == "persist" and edge.target.node in node_ids:
            if _kind(edge.target.node) not in (None, "resource"):
                out.append(Diagnostic(
                    "E013", "persistence must flow into a stored resource", ir_path=edge.id))
        if edge.flow_kind == "query" and edge.source.node in node_ids and edge.target.node in node_ids:
            if _kind(edge.source.node) != "resource" and _kind(edge.target.node) != "resource":
                out.append(Diagnostic(
                    "E013", "a query edge must touch a stored resource", ir_path=edge.id))

    out.extend(_validate_groups(diagram, node_ids))
    return out


def _validate_groups(diagram: Diagram, node_ids: set[str]) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    edge_ids = {e.id for e in diagram.edges}
    owner_of: dict[str, str] = {}  # member node -> group id
    for group in diagram.groups:
        if group.owner not in node_ids:
            out.append(Diagnostic(
                "E011", f"detail group owner {group.owner!r} does not exist", ir_path=group.id))
        for member in group.member_nodes:
            if member not in node_ids:
                out.append(Diagnostic(
                    "E011", f"detail group member {member!r} does not exist", ir_path=group.id))
            owner_of[member] = group.id
        for member in group.member_edges:
            if member not in edge_ids:
                out.append(Diagnostic(
                    "E011", f"detail group member edge {member!r} does not exist", ir_path=group.id))

    # The zoomed node must not sit inside its own refinement, transitively:
    # follow owner -> containing group -> that group's owner -> ...
    group_by_id = {g.id: g for g in diagram.groups}
    for group in diagram.groups:
        seen = {group.id}
        current = group
        while current.owner in owner_of:
            next_id = owner_of[current.owner]
            if next_id in seen:
                out.append(Diagnostic(
                    "E012", f"detail group {group.id!r} contains itself transitively",
                    ir_path=group.id,
                ))
                break
            seen.add(next_id)
            current = group_by_id[next_id]
        if group.owner in group.member_nodes:
            out.append(Diagnostic(
                "E012", f"node {group.owner!r} is a member of its own detail group",
                ir_path=group.id,
            ))
    return out


# ---------------------------------------------------------------------------
# Canonical interchange encoding
# ---------------------------------------------------------------------------


def _node_obj(node: Node) -> dict:
    return {
        "id": node.id,
        "kind": node.kind,
        "code": node.code,
        "label": node.label,
        "params": [[k, v] for k, v in node.params],
        "shape_class": node.shape_class,
        "perf": [{"metric": p.metric, "value": p.value, "corpus": p.corpus} for p in node.perf],
        "detail": node.detail,
        "placement_hint": node.placement_hint,
    }


def _edge_obj(edge: Edge) -> dict:
    return {
        "id": edge.id,
        "source": {"node": edge.source.node, "slot": edge.source.slot, "direction": "out"},
        "target": {"node": edge.target.node, "slot": edge.target.slot, "direction": "in"},
        "flow_kind": edge.flow_kind,
        "declared_term": edge.declared_term,
    }


def canonical_serialize(diagram: Diagram) -> bytes:
    """Deterministic encoding: equal diagram values give identical bytes."""
    doc = {
        "format_version": diagram.format_version,
        "name": diagram.name,
        "title_placement": diagram.title_placement,
        "dialects": sorted(diagram.dialects),
        "nodes": [_node_obj(n) for n in diagram.nodes],
        "edges": [_edge_obj(e) for e in diagram.edges],
        "groups": [
            {
                "id": g.id,
                "owner": g.owner,
                "member_nodes": list(g.member_nodes),
                "member_edges": list(g.member_edges),
                "entry_side": g.entry_side,
                "exit_side": g.exit_side,
            }
            for g in diagram.groups
        ],
        "tables": [
            {"id": t.id, "kind": t.kind, "rows": [[k, v] for k, v in t.rows],
             "placement": t.placement}
            for t in diagram.tables
        ],
        "embeddings": [
            {"id": e.id, "dim": e.dim, "label": e.label} for e in diagram.embeddings
        ],
    }
    return (json.dumps(doc, indent=2, ensure_ascii=True) + "\n").encode("utf-8")


def _bad(message: str) -> SerializationError:
    return SerializationError(Diagnostic("E021", message))


def _expect(obj, key: str, types, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise _bad(f"{where}: missing key {key!r}")
    value = obj[key]
    if types is not None and not isinstance(value, types):
        raise _bad(f"{where}: key {key!r} has the wrong type")
    return value


def deserialize(data: bytes) -> Diagram:
    """Inverse of canonical_serialize; E020 on version skew, E021 otherwise."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise _bad(f"not a well-formed interchange document: {exc}") from exc
    version = _expect(doc, "format_version", str, "document")
    if version != IR_VERSION:
        raise SerializationError(Diagnostic(
            "E020", f"document version {version!r} is not supported (expected {IR_VERSION!r})"))

    diagram = Diagram(
        name=_expect(doc, "name", str, "document"),
        dialects=frozenset(_expect(doc, "dialects", list, "document")),
        format_version=version,
        title_placement=doc.get("title_placement", "top_left"),
    )
    seen_nodes: set[str] = set()
    for obj in _expect(doc, "nodes", list, "document"):
        node = Node(
            id=_expect(obj, "id", str, "node"),
            kind=_expect(obj, "kind", str, "node"),
            code=_expect(obj, "code", str, "node"),
            label=obj.get("label"),
            params=tuple((k, v) for k, v in _expect(obj, "params", list, "node")),
            shape_class=_expect(obj, "shape_class", str, "node"),
            perf=tuple(
                PerfAnnotation(p["metric"], p["value"], p["corpus"])
                for p in _expect(obj, "perf", list, "node")
            ),
            detail=obj.get("detail"),
            placement_hint=obj.get("placement_hint"),
        )
        if node.kind not in NODE_KINDS:
            raise _bad(f"node {node.id!r}: unknown kind {node.kind!r}")
        if node.id in seen_nodes:
            raise _bad(f"duplicate node id {node.id!r}")
        seen_nodes.add(node.id)
        diagram.nodes.append(node)

    seen_edges: set[str] = set()
    for obj in _expect(doc, "edges", list, "document"):
        src = _expect(obj, "source", dict, "edge")
        tgt = _expect(obj, "target", dict, "edge")
        edge = Edge(
            id=_expect(obj, "id", str, "edge"),
            source=Port(src["node"], src["slot"], "out"),
            target=Port(tgt["node"], tgt["slot"], "in"),
            flow_kind=_expect(obj, "flow_kind", str, "edge"),
            declared_term=obj.get("declared_term"),
        )
        if edge.flow_kind not in FLOW_KINDS:
            raise _bad(f"edge {edge.id!r}: unknown flow kind {edge.flow_kind!r}")
        if edge.id in seen_edges:
            raise _bad(f"duplicate edge id {edge.id!r}")
        seen_edges.add(edge.id)
        diagram.edges.append(edge)

    for obj in _expect(doc, "groups", list, "document"):
        diagram.groups.append(DetailGroup(
            id=_expect(obj, "id", str, "group"),
            owner=_expect(obj, "owner", str, "group"),
            member_nodes=tuple(_expect(obj, "member_nodes", list, "group")),
            member_edges=tuple(_expect(obj, "member_edges", list, "group")),
            entry_side=obj.get("entry_side", "left"),
            exit_side=obj.get("exit_side", "right"),
        ))
    for obj in _expect(doc, "tables", list, "document"):
        diagram.tables.append(MetaTable(
            id=_expect(obj, "id", str, "table"),
            kind=_expect(obj, "kind", str, "table"),
            rows=tuple((k, v) for k, v in _expect(obj, "rows", list, "table")),
            placement=obj.get("placement", "bottom_right"),
        ))
    for obj in _expect(doc, "embeddings", list, "document"):
        diagram.embeddings.append(EmbeddingDecl(
            id=_expect(obj, "id", str, "embedding"),
            dim=_expect(obj, "dim", int, "embedding"),
            label=obj.get("label"),
        ))
    return diagram
