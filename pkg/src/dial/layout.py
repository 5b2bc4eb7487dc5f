"""Deterministic left-to-right layered layout.

Phases:
  1. cycle handling   recurrent edges are excluded outright; remaining cycles
                      are broken by reversing the declaration-latest edge
                      that closes a cycle
  2. layering         longest path from the sources of each weakly-connected
                      component; components are stacked as separate bands
  3. ordering         four fixed barycenter sweeps (down, up, down, up) with
                      declaration order breaking ties
  4. coordinates      integer boxes on a 4-unit grid; title strip at the top
                      left, meta tables at the bottom right, zoom-in groups
                      in their own boxes below the main area
  5. routing          polylines; recurrent edges loop above the node row

Everything is integer arithmetic (ordering uses exact fractions), so equal
diagrams produce byte-identical layouts on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import Diagram, Edge, Node

GRID = 4
H_GAP = 32
V_GAP = 16
BAND_GAP = 32
TITLE_H = 24
MARGIN = 8
GROUP_PAD = 12
CHAR_W = 8


@dataclass(frozen=True)
class Box:
    x: int
    y: int
    w: int
    h: int

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def cy(self) -> int:
        return self.y + self.h // 2

    def shifted(self, dx: int, dy: int) -> "Box":
        return Box(self.x + dx, self.y + dy, self.w, self.h)

    def intersects(self, other: "Box") -> bool:
        return not (self.right <= other.x or other.right <= self.x
                    or self.bottom <= other.y or other.bottom <= self.y)


@dataclass
class LayoutResult:
    node_boxes: dict[str, Box]
    edge_routes: dict[str, tuple[tuple[int, int], ...]]
    group_boxes: dict[str, Box]
    reversed_edges: frozenset[str]
    layers: dict[str, int]
    table_regions: dict[str, Box]
    title_region: Box
    width: int
    height: int


def _quant(v: int) -> int:
    return ((v + GRID - 1) // GRID) * GRID


# ---------------------------------------------------------------------------
# Phase 1: cycle handling
# ---------------------------------------------------------------------------


def break_cycles(diagram: Diagram) -> tuple[list[tuple[str, str, str]], frozenset[str]]:
    """Acyclic orientation over non-recurrent edges.

    Returns (oriented edge list as (edge id, source node, target node) after
    any reversals, reversed edge ids). Edges are considered in declaration
    order, so the edge reversed is always the one closing the cycle latest.
    """
    adjacency: dict[str, set[str]] = {n.id: set() for n in diagram.nodes}
    oriented: list[tuple[str, str, str]] = []
    reversed_ids: set[str] = set()

    def reachable(start: str, goal: str) -> bool:
        stack, seen = [start], {start}
        while stack:
            current = stack.pop()
            if current == goal:
                return True
            for nxt in sorted(adjacency[current]):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    for edge in diagram.edges:
        if edge.flow_kind == "recurrent":
            continue
        u, v = edge.source.node, edge.target.node
        if u not in adjacency or v not in adjacency:
            continue
        if u == v or reachable(v, u):
            reversed_ids.add(edge.id)
            if u != v:
                adjacency[v].add(u)
                oriented.append((edge.id, v, u))
        else:
            adjacency[u].add(v)
            oriented.append((edge.id, u, v))
    return oriented, frozenset(reversed_ids)


# ---------------------------------------------------------------------------
# Phase 2: layering
# ---------------------------------------------------------------------------


def assign_layers(node_ids: list[str],
                  oriented: list[tuple[str, str, str]]) -> dict[str, int]:
    """Longest path from any source; sources sit at layer 0."""
    preds: dict[str, list[str]] = {n: [] for n in node_ids}
    succs: dict[str, list[str]] = {n: [] for n in node_ids}
    for _, u, v in oriented:
        if u in preds and v in preds:
            preds[v].append(u)
            succs[u].append(v)
    layers: dict[str, int] = {}
    in_deg = {n: len(preds[n]) for n in node_ids}
    queue = [n for n in node_ids if in_deg[n] == 0]
    order: list[str] = []
    while queue:
        current = queue.pop(0)
        order.append(current)
        for nxt in succs[current]:
            in_deg[nxt] -= 1
            if in_deg[nxt] == 0:
                queue.append(nxt)
    for node in order:
        layers[node] = max((layers[p] + 1 for p in preds[node]), default=0)
    for node in node_ids:  # unreachable only if cycles survived, which they cannot
        layers.setdefault(node, 0)
    return layers


# ---------------------------------------------------------------------------
# Phase 3: ordering
# ---------------------------------------------------------------------------


def order_within_layers(node_ids: list[str], layers: dict[str, int],
                        oriented: list[tuple[str, str, str]],
                        band_of: dict[str, int] | None = None) -> dict[int, list[str]]:
    """Barycenter sweeps, four fixed passes; declaration order breaks ties.

    ``band_of`` keeps weakly-connected components apart: the band index
    always dominates the barycenter.
    """
    decl_index = {n: i for i, n in enumerate(node_ids)}
    band_of = band_of or {n: 0 for n in node_ids}
    by_layer: dict[int, list[str]] = {}
    for node in node_ids:
        by_layer.setdefault(layers[node], []).append(node)
    for layer_nodes in by_layer.values():
        layer_nodes.sort(key=lambda n: (band_of[n], decl_index[n]))

    preds: dict[str, list[str]] = {n: [] for n in node_ids}
    succs: dict[str, list[str]] = {n: [] for n in node_ids}
    for _, u, v in oriented:
        preds[v].append(u)
        succs[u].append(v)

    layer_keys = sorted(by_layer)

    def sweep(direction: str) -> None:
        keys = layer_keys if direction == "down" else list(reversed(layer_keys))
        neighbor = preds if direction == "down" else succs
        for key in keys:
            positions = {n: i for layer in by_layer.values() for i, n in enumerate(layer)}
            def bary(node: str) -> Fraction:
                anchors = [positions[p] for p in neighbor[node] if p in positions]
                if not anchors:
                    return Fraction(positions[node])
                return Fraction(sum(anchors), len(anchors))
            by_layer[key].sort(key=lambda n: (band_of[n], bary(n), decl_index[n]))

    for direction in ("down", "up", "down", "up"):
        sweep(direction)
    return by_layer


# ---------------------------------------------------------------------------
# Phase 4/5: geometry
# ---------------------------------------------------------------------------


def node_display_lines(node: Node) -> list[str]:
    lines = [node.label or node.code]
    params = [(k, v) for k, v in node.params if k != "out"]
    if params:
        lines.append(", ".join(f"{k}={v}" for k, v in params))
    for perf in node.perf:
        lines.append(f"{perf.metric}={perf.value:g} @ {perf.corpus}")
    return lines


def node_size(node: Node) -> tuple[int, int]:
    lines = node_display_lines(node)
    widest = max(len(line) for line in lines)
    w = _quant(max(CHAR_W * widest + 16, 32))
    base_h = 32 if node.shape_class == "component" else 28
    if node.kind == "resource":
        base_h += 8
    h = _quant(base_h + 12 * (len(lines) - 1))
    return w, h


@dataclass
class _Area:
    """One independently laid out region (the main area or a group box)."""

    nodes: list[Node]
    edges: list[Edge]
    boxes: dict[str, Box] = field(default_factory=dict)
    layers: dict[str, int] = field(default_factory=dict)
    width: int = 0
    height: int = 0


def _weak_components(node_ids: list[str], edges: list[Edge]) -> dict[str, int]:
    parent = {n: n for n in node_ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for edge in edges:
        a, b = edge.source.node, edge.target.node
        if a in parent and b in parent:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra
    roots: dict[str, int] = {}
    band_of: dict[str, int] = {}
    for node in node_ids:  # bands numbered by first declaration
        root = find(node)
        if root not in roots:
            roots[root] = len(roots)
        band_of[node] = roots[root]
    return band_of


def _layout_area(nodes: list[Node], edges: list[Edge],
                 oriented_all: list[tuple[str, str, str]]) -> _Area:
    area = _Area(nodes, edges)
    ids = [n.id for n in nodes]
    id_set = set(ids)
    oriented = [(e, u, v) for e, u, v in oriented_all if u in id_set and v in id_set]
    area.layers = assign_layers(ids, oriented)
    band_of = _weak_components(ids, [e for e in edges
                                     if e.source.node in id_set and e.target.node in id_set])
    by_layer = order_within_layers(ids, area.layers, oriented, band_of)

    node_by_id = {n.id: n for n in nodes}
    sizes = {n.id: node_size(n) for n in nodes}
    col_w: dict[int, int] = {
        layer: max(sizes[n][0] for n in layer_nodes)
        for layer, layer_nodes in by_layer.items()
    }
    col_x: dict[int, int] = {}
    cursor = 0
    for layer in sorted(by_layer):
        col_x[layer] = cursor
        cursor += col_w[layer] + H_GAP
    total_w = max(cursor - H_GAP, 0)

    bands = sorted(set(band_of.values()))
    band_y: dict[int, int] = {}
    y_cursor = 0
    for band in bands:
        band_height = 0
        for layer, layer_nodes in by_layer.items():
            stacked = [n for n in layer_nodes if band_of[n] == band]
            if not stacked:
                continue
            h = sum(sizes[n][1] for n in stacked) + V_GAP * (len(stacked) - 1)
            band_height = max(band_height, h)
        band_y[band] = y_cursor
        y_cursor += band_height + BAND_GAP
    total_h = max(y_cursor - BAND_GAP, 0)

    for layer, layer_nodes in by_layer.items():
        cursors = dict(band_y)
        for node_id in layer_nodes:
            w, h = sizes[node_id]
            band = band_of[node_id]
            x = _quant(col_x[layer] + (col_w[layer] - w) // 2)
            y = _quant(cursors[band])
            area.boxes[node_id] = Box(x, y, w, h)
            cursors[band] = y + h + V_GAP
    del node_by_id
    area.width = _quant(total_w)
    area.height = _quant(total_h)
    return area


def table_size(rows: tuple[tuple[str, str], ...]) -> tuple[int, int]:
    widest = max(len(k) + len(v) + 2 for k, v in rows)
    return _quant(CHAR_W * widest + 16), _quant(16 * len(rows) + 12)


def layout(diagram: Diagram) -> LayoutResult:
    """Pure function of the diagram value; integer coordinates only."""
    oriented, reversed_ids = break_cycles(diagram)

    member_ids = diagram.group_member_ids()
    top_nodes = [n for n in diagram.nodes if n.id not in member_ids]
    group_edge_ids = {eid for g in diagram.groups for eid in g.member_edges}
    top_edges = [e for e in diagram.edges
                 if e.id not in group_edge_ids
                 and e.source.node not in member_ids and e.target.node not in member_ids]

    main = _layout_area(top_nodes, top_edges, oriented)

    node_boxes: dict[str, Box] = {}
    layers: dict[str, int] = dict(main.layers)

    # Title strip, then the main area.
    content_y = TITLE_H + MARGIN
    for node_id, box in main.boxes.items():
        node_boxes[node_id] = box.shifted(MARGIN, content_y)

    # Group boxes stack below the main area, one per declaration.
    group_boxes: dict[str, Box] = {}
    y_cursor = content_y + main.height + (BAND_GAP if main.nodes else 0)
    for group in diagram.groups:
        members = [n for n in diagram.nodes if n.id in group.member_nodes]
        medges = [e for e in diagram.edges if e.id in group.member_edges]
        sub = _layout_area(members, medges, oriented)
        origin_x = MARGIN + GROUP_PAD
        origin_y = y_cursor + GROUP_PAD + 12  # room for the group caption
        for node_id, box in sub.boxes.items():
            node_boxes[node_id] = box.shifted(origin_x, origin_y)
        for node_id, layer in sub.layers.items():
            layers[node_id] = layer
        group_boxes[group.id] = Box(
            MARGIN, y_cursor,
            _quant(sub.width + 2 * GROUP_PAD),
            _quant(sub.height + 2 * GROUP_PAD + 12),
        )
        y_cursor = group_boxes[group.id].bottom + V_GAP

    content_w = max(
        [box.right for box in node_boxes.values()]
        + [box.right for box in group_boxes.values()] + [160],
    )
    content_bottom = max(
        [box.bottom for box in node_boxes.values()]
        + [box.bottom for box in group_boxes.values()] + [content_y],
    )

    # Meta tables anchor bottom-right unless a placement hint overrides.
    table_regions: dict[str, Box] = {}
    strip_cursors: dict[str, int] = {}
    top_strip_h = 0
    for table in diagram.tables:
        if not table.rows:
            continue
        w, h = table_size(table.rows)
        region = table.placement
        if region.startswith("top"):
            y = TITLE_H + MARGIN + strip_cursors.get(region, 0)
            top_strip_h = max(top_strip_h, strip_cursors.get(region, 0) + h + V_GAP)
        else:
            y = content_bottom + BAND_GAP + strip_cursors.get(region, 0)
        x = MARGIN if region.endswith("left") else max(content_w - w, MARGIN)
        table_regions[table.id] = Box(_quant(x), _quant(y), w, h)
        strip_cursors[region] = strip_cursors.get(region, 0) + h + V_GAP

    if top_strip_h:
        # Shift everything below the top tables down so nothing overlaps.
        for node_id in list(node_boxes):
            node_boxes[node_id] = node_boxes[node_id].shifted(0, top_strip_h)
        for group_id in list(group_boxes):
            group_boxes[group_id] = group_boxes[group_id].shifted(0, top_strip_h)
        for table in diagram.tables:
            if table.id in table_regions and not table.placement.startswith("top"):
                table_regions[table.id] = table_regions[table.id].shifted(0, top_strip_h)
        content_bottom += top_strip_h

    title_w = _quant(CHAR_W * max(len(diagram.name), 1) + 8)
    if diagram.title_placement.endswith("right"):
        title_x = max(content_w - title_w, MARGIN)
    else:
        title_x = MARGIN
    if diagram.title_placement.startswith("bottom"):
        title_y = max([b.bottom for b in table_regions.values()] + [content_bottom]) + V_GAP
    else:
        title_y = 0
    title_region = Box(title_x, title_y, title_w, TITLE_H - MARGIN)

    edge_routes = _route_edges(diagram, node_boxes, reversed_ids)

    width = max([content_w] + [b.right for b in table_regions.values()]
                + [title_region.right]) + MARGIN
    height = max([content_bottom, title_region.bottom]
                 + [b.bottom for b in table_regions.values()]) + MARGIN
    return LayoutResult(
        node_boxes=node_boxes,
        edge_routes=edge_routes,
        group_boxes=group_boxes,
        reversed_edges=reversed_ids,
        layers=layers,
        table_regions=table_regions,
        title_region=title_region,
        width=_quant(width),
        height=_quant(height),
    )


def _route_edges(diagram: Diagram, boxes: dict[str, Box],
                 reversed_ids: frozenset[str]) -> dict[str, tuple[tuple[int, int], ...]]:
    routes: dict[str, tuple[tuple[int, int], ...]] = {}
    for edge in diagram.edges:
        src = boxes.get(edge.source.node)
        tgt = boxes.get(edge.target.node)
        if src is None or tgt is None:
            continue
        if edge.flow_kind == "recurrent":
            routes[edge.id] = _loop_route(src, tgt)
        elif edge.id in reversed_ids and edge.source.node == edge.target.node:
            routes[edge.id] = _loop_route(src, tgt)
        elif src.x > tgt.x:
            routes[edge.id] = ((src.x, src.cy), (tgt.right, tgt.cy))
        else:
            routes[edge.id] = ((src.right, src.cy), (tgt.x, tgt.cy))
    return routes


def _loop_route(src: Box, tgt: Box) -> tuple[tuple[int, int], ...]:
    top = min(src.y, tgt.y) - 12
    return (
        (src.right, src.cy),
        (src.right + 8, src.cy),
        (src.right + 8, top),
        (tgt.x - 8, top),
        (tgt.x - 8, tgt.cy),
        (tgt.x, tgt.cy),
    )


def debug_dump(diagram: Diagram, result: LayoutResult) -> str:
    """Layers and per-layer order as text (the --debug-layout CLI flag)."""
    lines = [f"diagram {diagram.name!r}: {len(diagram.nodes)} nodes, "
             f"{len(diagram.edges)} edges"]
    by_layer: dict[int, list[str]] = {}
    for node_id, layer in result.layers.items():
        by_layer.setdefault(layer, []).append(node_id)
    for layer in sorted(by_layer):
        ordered = sorted(by_layer[layer], key=lambda n: result.node_boxes[n].y
                         if n in result.node_boxes else 0)
        lines.append(f"  layer {layer}: " + " ".join(ordered))
    if result.reversed_edges:
        lines.append("  reversed: " + " ".join(sorted(result.reversed_edges)))
    return "\n".join(lines) + "\n"
