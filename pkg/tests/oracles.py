"""Independent oracles and generators shared by the unit and acceptance tests.

These deliberately avoid the library's propagation and layering code paths:
the propagation oracle schedules nodes itself over explicit topological
orders, and the layering oracle enumerates every path.
"""

from __future__ import annotations

import random
from itertools import permutations

from dial.model import Diagram, Edge, Node, Port
from dial.registry import Registry
from dial.terms import DataTerm
from dial.typecheck import infer_output

# ---------------------------------------------------------------------------
# Random diagrams over a small operator pool
# ---------------------------------------------------------------------------

SOURCE_TERMS = ("S", "S^Token", "S^POS", "S^{Token,POS}", "T", "vec[8]", "vec[4]")
OP_POOL = ("POS", "NER", "SRL", "oplus", "concat", "rank")
_ARITY = {"POS": 1, "NER": 1, "SRL": 1, "oplus": 2, "concat": 2, "rank": 1}


def random_propagation_diagram(rng: random.Random, max_nodes: int = 8) -> Diagram:
    """A random DAG whose declaration order is one topological order."""
    diagram = Diagram(name="random", dialects=frozenset({"sys"}))
    n_sources = rng.randint(1, 2)
    total = rng.randint(n_sources + 1, max_nodes)
    for i in range(n_sources):
        term = rng.choice(SOURCE_TERMS)
        diagram.nodes.append(Node(
            id=f"s{i}", kind="io", code="interface",
            params=(("out", term),), shape_class="component"))
    for i in range(total - n_sources):
        code = rng.choice(OP_POOL)
        kind = "task" if code in ("POS", "NER", "SRL") else "operator"
        params = (("n", rng.randint(1, 3)),) if code == "rank" else ()
        node = Node(id=f"n{i}", kind=kind, code=code, params=params,
                    shape_class="component" if kind == "task" else "feature")
        providers = [n.id for n in diagram.nodes]
        diagram.nodes.append(node)
        for slot in range(_ARITY[code]):
            source = rng.choice(providers)
            diagram.edges.append(Edge(
                f"e{len(diagram.edges)}",
                Port(source, 0, "out"), Port(node.id, slot, "in"), "flow"))
    return diagram


def topological_orders(diagram: Diagram, cap: int = 200) -> list[list[str]]:
    """Up to ``cap`` distinct topological orders, deterministically."""
    succs: dict[str, set[str]] = {n.id: set() for n in diagram.nodes}
    in_deg: dict[str, int] = {n.id: 0 for n in diagram.nodes}
    seen_pairs: set[tuple[str, str]] = set()
    for edge in diagram.edges:
        pair = (edge.source.node, edge.target.node)
        if pair in seen_pairs:
            continue
        seen_pairs.add(pair)
        succs[pair[0]].add(pair[1])
        in_deg[pair[1]] += 1

    orders: list[list[str]] = []
    prefix: list[str] = []

    def backtrack() -> None:
        if len(orders) >= cap:
            return
        ready = sorted(n for n, d in in_deg.items() if d == 0 and n not in prefix)
        if not ready:
            if len(prefix) == len(in_deg):
                orders.append(list(prefix))
            return
        for node in ready:
            prefix.append(node)
            for nxt in succs[node]:
                in_deg[nxt] -= 1
            backtrack()
            for nxt in succs[node]:
                in_deg[nxt] += 1
            prefix.pop()
            if len(orders) >= cap:
                return

    backtrack()
    return orders


def propagate_in_order(diagram: Diagram, order: list[str],
                       registry: Registry) -> tuple[dict[str, DataTerm | None], list[str]]:
    """Edge-by-edge propagation along one explicit topological order."""
    outputs: dict[str, list[DataTerm | None]] = {}
    codes: list[str] = []
    node_by_id = {n.id: n for n in diagram.nodes}
    for node_id in order:
        node = node_by_id[node_id]
        slots: dict[int, DataTerm | None] = {}
        flags: dict[int, bool] = {}
        for edge in diagram.edges:
            if edge.target.node != node_id:
                continue
            outs = outputs.get(edge.source.node, [])
            slots[edge.target.slot] = outs[edge.source.slot] if edge.source.slot < len(outs) else None
            flags[edge.target.slot] = node_by_id[edge.source.node].kind == "resource"
        width = max(slots, default=-1) + 1
        inputs = [slots.get(i) for i in range(width)]
        res_flags = [flags.get(i, False) for i in range(width)]
        outs, diags = infer_output(node, inputs, registry,
                                   input_is_resource=res_flags,
                                   dialects=diagram.dialects)
        outputs[node_id] = outs
        codes.extend(d.code for d in diags)
    edge_terms: dict[str, DataTerm | None] = {}
    for edge in diagram.edges:
        outs = outputs.get(edge.source.node, [])
        edge_terms[edge.id] = outs[edge.source.slot] if edge.source.slot < len(outs) else None
    return edge_terms, sorted(codes)


# ---------------------------------------------------------------------------
# Random DAGs for layout
# ---------------------------------------------------------------------------


def random_layout_diagram(rng: random.Random, max_nodes: int = 8,
                          cyclic: bool = False) -> Diagram:
    diagram = Diagram(name="layout", dialects=frozenset({"sys"}))
    count = rng.randint(2, max_nodes)
    for i in range(count):
        diagram.nodes.append(Node(id=f"v{i}", kind="operator", code="func",
                                  shape_class="feature"))
    for i in range(count):
        for j in range(i + 1, count):
            if rng.random() < 0.35:
                diagram.edges.append(Edge(
                    f"e{len(diagram.edges)}",
                    Port(f"v{i}", 0, "out"), Port(f"v{j}", 0, "in"), "flow"))
    if cyclic and count >= 2:
        hi = rng.randint(1, count - 1)
        lo = rng.randint(0, hi - 1)
        diagram.edges.append(Edge(
            f"e{len(diagram.edges)}",
            Port(f"v{hi}", 0, "out"), Port(f"v{lo}", 0, "in"), "flow"))
    return diagram


def longest_path_oracle(node_ids: list[str],
                        oriented: list[tuple[str, str, str]]) -> dict[str, int]:
    """Longest path by exhaustive enumeration of every simple path."""
    preds: dict[str, list[str]] = {n: [] for n in node_ids}
    for _, u, v in oriented:
        preds[v].append(u)

    def longest_to(node: str) -> int:
        best = 0
        for p in preds[node]:
            best = max(best, 1 + longest_to(p))
        return best

    return {n: longest_to(n) for n in node_ids}


def count_crossings(upper: list[str], lower: list[str],
                    edges: list[tuple[str, str]]) -> int:
    pos_u = {n: i for i, n in enumerate(upper)}
    pos_l = {n: i for i, n in enumerate(lower)}
    spans = [(pos_u[u], pos_l[v]) for u, v in edges if u in pos_u and v in pos_l]
    crossings = 0
    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            (a1, b1), (a2, b2) = spans[i], spans[j]
            if (a1 - a2) * (b1 - b2) < 0:
                crossings += 1
    return crossings


def min_crossings(upper: list[str], lower: list[str],
                  edges: list[tuple[str, str]]) -> int:
    best = None
    for pu in permutations(upper):
        for pl in permutations(lower):
            c = count_crossings(list(pu), list(pl), edges)
            if best is None or c < best:
                best = c
    return best or 0


# ---------------------------------------------------------------------------
# Random valid sources for the formatter round-trip
# ---------------------------------------------------------------------------

_CODES = ("POS", "NER", "SRL", "WSD", "oplus", "concat", "rank", "sim", "func",
          "verify", "classifier", "join", "proj", "encoder", "decoder")
_TERMS = ("S", "T", "S^NER", "S^{POS,Token}", "Term_1", "{Term}", "vec[16]",
          "(S, T)", "P_c[0,1]", "Pred(Arg)^F", "KB")


def random_valid_source(rng: random.Random) -> str:
    lines = ["dial 0.1"]
    dialects = "sys" if rng.random() < 0.5 else "sys, nn"
    lines.append(f"dialect {dialects}")
    lines.append(f'diagram "gen {rng.randint(0, 999)}" {{')
    ids: list[str] = []
    for i in range(rng.randint(1, 8)):
        kind = rng.random()
        ident = f"d{i}"
        if kind < 0.4:
            term = rng.choice(_TERMS)
            tag = rng.choice(("", " @gold", " @kb", ' @dataset("corpus")'))
            lines.append(f"  data {ident}: {term}{tag}")
        else:
            code = rng.choice(_CODES)
            params = ""
            if rng.random() < 0.4:
                params = f"(n={rng.randint(1, 5)}, label=\"x {i}\")"
            perf = ""
            if rng.random() < 0.3:
                perf = f' perf(acc=0.{rng.randint(10, 99)}@"test set")'
            lines.append(f"  node {ident}: {code}{params}{perf}")
        ids.append(ident)
    arrows = ("->", "<->", "|->", "?>", "-o", "~>")
    for i in range(rng.randint(0, 10)):
        a, b = rng.choice(ids), rng.choice(ids)
        arrow = rng.choice(arrows)
        as_term = f" as {rng.choice(_TERMS)}" if rng.random() < 0.3 else ""
        lines.append(f"  edge {a} {arrow} {b}{as_term}")
    if rng.random() < 0.3:
        lines.append(f"  embedding w{rng.randint(0, 9)} (dim={rng.randint(1, 512)})")
    if rng.random() < 0.3:
        lines.append('  table t0 { "k a": "v 1"; "k b": "v 2"; }')
    lines.append("}")
    return "\n".join(lines) + "\n"
