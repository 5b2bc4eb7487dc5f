"""Semantic analysis: term matching, per-node output inference, the
dimension calculus, and whole-diagram propagation.

Propagation walks nodes in declaration order and iterates to a fixed point,
so diagrams with recurrent edges terminate: annotation sets only grow, and
the label lattice is finite. Diagnostics are collected in a single final
pass, which keeps their order deterministic.

Inference rules in brief:

  task codes     range terms from the signature; outputs inherit the labels
                 of same-category inputs and add the signature's own labels
  oplus, concat  dimension calculus on vectors; label union otherwise
  otimes         dims concatenate; paired sets become sets of tuples
  set            wraps into set-of
  rank(n)        set/sequence input becomes sequence-of, length at most n
  sim            two inputs give Score; a set of pairs gives a set of Scores
  cond           two outputs, each typed as the input
  proj           carrier becomes a vector sized by the referenced embedding
  entail         predicate-argument structure
  verify         input unchanged
  classifier     classification outcome (regression gives Score)
  query edges    deliver Tuples regardless of the knowledge base's contents
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .diagnostics import Diagnostic
from .model import Diagram, Edge, Node
from .registry import BUILTIN_VOCABULARY, FormalTerm, Registry, Resolution, Signature
from .terms import (
    DIST,
    SCALAR,
    SEQUENCE,
    SET,
    TUPLE,
    DataTerm,
    TermError,
    format_term,
    parse_term,
)


def parse_data_term(literal: str, registry: Registry | None = None) -> DataTerm:
    """Strict parse against the registered categories and labels (E004)."""
    vocab = registry.vocabulary if registry else BUILTIN_VOCABULARY
    return parse_term(literal, vocab)


def term_text(term: DataTerm | None) -> str:
    if term is None:
        return "<unresolved>"
    return format_term(term, dict(BUILTIN_VOCABULARY.canonical))


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def match_term(actual: DataTerm, formal: FormalTerm) -> str | None:
    """None on match, otherwise a human-readable mismatch reason.

    Bases must be equal (no subtyping), required labels must be present,
    structures must agree, and dims the formal pins down must be identical.
    """
    if formal.structure in (SET, SEQUENCE):
        if actual.structure != formal.structure:
            return f"expected a {formal.structure} term, got {term_text(actual)}"
        return match_term(actual.element, formal.element)
    if formal.structure == TUPLE:
        if actual.structure != TUPLE or len(actual.elements) != len(formal.elements):
            return f"expected a {len(formal.elements)}-tuple, got {term_text(actual)}"
        for a, f in zip(actual.elements, formal.elements):
            reason = match_term(a, f)
            if reason:
                return reason
        return None
    if actual.structure in (SET, SEQUENCE, TUPLE):
        return f"expected a plain term, got {term_text(actual)}"
    if formal.base is not None and actual.base != formal.base:
        return (f"category {_cat(actual.base)} where {_cat(formal.base)} is required")
    missing = formal.required - actual.annotations
    if missing:
        return "missing classification " + ", ".join(sorted(missing))
    if formal.dims is not None and actual.dims != formal.dims:
        return f"dimensions {list(actual.dims or [])} do not equal {list(formal.dims)}"
    return None


def _cat(code: str | None) -> str:
    if code is None:
        return "<any>"
    return BUILTIN_VOCABULARY.canonical.get(code, code)


def formal_text(formal: FormalTerm) -> str:
    return term_text(_formal_to_term(formal))


def _formal_to_term(formal: FormalTerm) -> DataTerm:
    return DataTerm(
        base=formal.base,
        annotations=formal.required,
        subscript=formal.subscript,
        dims=formal.dims,
        structure=SCALAR if formal.structure == DIST else formal.structure,
        element=_formal_to_term(formal.element) if formal.element else None,
        elements=tuple(_formal_to_term(t) for t in formal.elements),
    )


# ---------------------------------------------------------------------------
# Dimension calculus
# ---------------------------------------------------------------------------


class DimConflict(ValueError):
    """Operand ranks are incompatible for the operator (E103)."""


def dim_combine(op: str, dims_a: tuple[int, ...], dims_b: tuple[int, ...]) -> tuple[int, ...]:
    """oplus/concat are additive in the trailing dimension; otimes
    concatenates the dimension lists."""
    if op == "otimes":
        return tuple(dims_a) + tuple(dims_b)
    if op not in ("oplus", "concat"):
        raise ValueError(f"no dimension rule for operator {op!r}")
    if len(dims_a) != len(dims_b):
        raise DimConflict(
            f"{op} needs operands of equal rank, got {list(dims_a)} and {list(dims_b)}")
    if dims_a[:-1] != dims_b[:-1]:
        raise DimConflict(
            f"{op} needs matching leading dimensions, got {list(dims_a)} and {list(dims_b)}")
    return tuple(dims_a[:-1]) + (dims_a[-1] + dims_b[-1],)


# ---------------------------------------------------------------------------
# Per-node inference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Ctx:
    node: Node
    registry: Registry
    embeddings: dict[str, int]
    input_is_resource: tuple[bool, ...]
    diagnostics: list[Diagnostic]

    def err(self, code: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(code, f"node {self.node.id!r}: {message}",
                                           ir_path=self.node.id))


def infer_output(node: Node, inputs: list[DataTerm | None],
                 registry: Registry | None = None,
                 embeddings: dict[str, int] | None = None,
                 input_is_resource: list[bool] | None = None,
                 dialects: frozenset[str] = frozenset({"sys", "nn"}),
                 ) -> tuple[list[DataTerm | None], list[Diagnostic]]:
    """Output terms for one node given its input terms, plus diagnostics.

    ``inputs`` is indexed by input slot; unwired slots are None.
    """
    registry = registry or Registry()
    resolution = registry.resolve(node.code, dialects)
    diagnostics: list[Diagnostic] = []
    if resolution is None:
        return [None], diagnostics
    ctx = _Ctx(node, registry,
               embeddings if embeddings is not None else {},
               tuple(input_is_resource or (False,) * len(inputs)),
               diagnostics)
    if resolution.signature is not None:
        outs = _infer_task(ctx, resolution.signature, inputs)
    else:
        outs = _infer_symbol(ctx, resolution, inputs)
    return outs, diagnostics


def _infer_task(ctx: _Ctx, sig: Signature, inputs: list[DataTerm | None]) -> list[DataTerm | None]:
    wired = sum(1 for t in inputs if t is not None)
    candidates = [v for v in sig.variants
                  if _variant_min(v[0]) <= wired <= len(v[0])]
    arity_ok = bool(candidates)
    if not arity_ok:
        ctx.err("E101", f"{sig.task_code} takes {_arity_text(sig)} input(s), {wired} wired")
        candidates = [sig.variants[0]]
    chosen = None
    first_failure: tuple[int, FormalTerm, str] | None = None
    for domain, rng in candidates:
        failure = _match_domain(ctx, domain, inputs)
        if failure is None:
            chosen = (domain, rng)
            break
        if first_failure is None:
            first_failure = failure
    if chosen is None:
        if arity_ok:
            slot, formal, reason = first_failure
            ctx.err("E102", f"input {slot} does not fit {sig.task_code}'s domain term "
                            f"{formal_text(formal)}: {reason}")
        chosen = candidates[0]
    domain, rng = chosen
    inherited: dict[str | None, frozenset[str]] = {}
    for term in inputs:
        if term is None or term.structure == TUPLE:
            continue
        core = term.core()
        inherited[core.base] = inherited.get(core.base, frozenset()) | core.annotations
    outs: list[DataTerm | None] = []
    for formal in rng:
        term = _formal_to_term(formal)
        core_base = term.core().base
        term = term.with_labels(inherited.get(core_base, frozenset()))
        outs.append(term)
    return outs


def _variant_min(domain: tuple[FormalTerm, ...]) -> int:
    return sum(1 for t in domain if not t.optional_term)


def _arity_text(sig: Signature) -> str:
    return str(sig.min_in) if sig.min_in == sig.max_in else f"{sig.min_in}..{sig.max_in}"


def _match_domain(ctx: _Ctx, domain: tuple[FormalTerm, ...],
                  inputs: list[DataTerm | None]) -> tuple[int, FormalTerm, str] | None:
    for slot, formal in enumerate(domain):
        term = inputs[slot] if slot < len(inputs) else None
        if term is None:
            if formal.optional_term:
                continue
            return (slot, formal, "nothing is wired to this input")
        if formal.is_resource and slot < len(ctx.input_is_resource) \
                and ctx.input_is_resource and not ctx.input_is_resource[slot]:
            return (slot, formal, "expects a stored resource")
        reason = match_term(term, formal)
        if reason:
            return (slot, formal, reason)
    return None


def _infer_symbol(ctx: _Ctx, res: Resolution, inputs: list[DataTerm | None]) -> list[DataTerm | None]:
    sym = res.symbol
    node = ctx.node
    wired = sum(1 for t in inputs if t is not None)
    if wired < sym.min_in or wired > sym.max_in:
        ctx.err("E101", f"{sym.code} takes {sym.min_in}..{sym.max_in} input(s), {wired} wired")
    present = [t for t in inputs if t is not None]
    declared = node.param("out")
    if declared is not None:
        try:
            return [parse_data_term(str(declared), ctx.registry)]
        except TermError as exc:
            ctx.err("E004", f"declared output term: {exc}")
            return [None]

    code = sym.code
    if code in ("oplus", "concat"):
        return [_fold_combine(ctx, code, present)]
    if code == "otimes":
        return [_tensor(ctx, present)]
    if code == "set":
        if not present:
            return [None]
        inner = present[0] if len(present) == 1 else DataTerm(structure=TUPLE,
                                                              elements=tuple(present))
        return [DataTerm(structure=SET, element=inner)]
    if code == "rank":
        if not present:
            return [None]
        top_n = node.param("n")
        top_n = int(top_n) if isinstance(top_n, (int, float)) else None
        source = present[0]
        element = source.element if source.structure in (SET, SEQUENCE) else source
        return [DataTerm(structure=SEQUENCE, element=element, max_len=top_n)]
    if code == "sim":
        if len(present) == 1 and present[0].structure == SET \
                and present[0].element is not None \
                and present[0].element.structure == TUPLE:
            return [DataTerm(structure=SET, element=DataTerm(base="Score"))]
        return [DataTerm(base="Score")]
    if code == "cond":
        passthrough = present[0] if present else None
        return [passthrough, passthrough]
    if code == "proj":
        return [_project(ctx, present[0]) if present else None]
    if code == "entail":
        return [DataTerm(base="PredArg")]
    if code == "verify":
        return [present[0] if present else None]
    if code in ("compose", "join"):
        if code == "join":
            return [DataTerm(base="Tuples")]
        return [_fold_combine(ctx, "oplus", present, combine_dims=False)]
    if code in ("classifier", "classification", "svm"):
        sub = node.param("class")
        return [DataTerm(base="P_c", subscript=str(sub) if sub is not None else None)]
    if code == "regression":
        return [DataTerm(base="Score")]
    if code == "encoder":
        units = _int_param(node, "units")
        dims = (units,) if units else None
        return [DataTerm(base="clustered_word", dims=dims,
                         annotations=_present_labels(present))]
    if code == "decoder":
        return [DataTerm(base="T")]
    if code in ("func", "func_contract", "interface"):
        if not present:
            return [None]
        if len(present) == 1:
            return [present[0]]
        return [DataTerm(structure=TUPLE, elements=tuple(present))]
    if code == "w2v":
        dim = _int_param(node, "dim")
        return [DataTerm(base="clustered_word", dims=(dim,) if dim else None)]
    if code in ("dataset", "gold"):
        return [DataTerm(base="T")]
    if code in ("kb", "kbfn"):
        return [DataTerm(base="KB")]
    if code == "ground_truth":
        return [DataTerm(base="P_c")]
    if code == "softmax":
        sub = node.param("class")
        dims = present[0].core().dims if present else None
        return [DataTerm(base="P_c", subscript=str(sub) if sub is not None else None,
                         structure=DIST, dist_range=(0.0, 1.0), dims=dims)]
    if code == "loss":
        return [DataTerm(base="Score")]
    if code in ("activation", "attention"):
        return [present[0] if present else None]
    if code in ("lstm", "gru", "recnn", "hidden_fwd", "hidden_bwd"):
        units = _int_param(node, "units")
        dims = (units,) if units else (present[0].core().dims if present else None)
        return [DataTerm(base="clustered_word", dims=dims)]
    if code == "bilstm":
        units = _int_param(node, "units")
        dims = (2 * units,) if units else (present[0].core().dims if present else None)
        return [DataTerm(base="clustered_word", dims=dims)]
    if code == "conv":
        filters = _int_param(node, "filters")
        dims = (filters,) if filters else (present[0].core().dims if present else None)
        return [DataTerm(base="clustered_word", dims=dims)]
    # Extension operators without a declared output: act like generic functions.
    if not present:
        return [None]
    if len(present) == 1:
        return [present[0]]
    return [DataTerm(structure=TUPLE, elements=tuple(present))]


def _int_param(node: Node, key: str) -> int | None:
    value = node.param(key)
    if isinstance(value, (int, float)) and int(value) > 0:
        return int(value)
    return None


def _present_labels(present: list[DataTerm]) -> frozenset[str]:
    labels: frozenset[str] = frozenset()
    for term in present:
        labels |= term.all_labels()
    return labels


def _fold_combine(ctx: _Ctx, op: str, present: list[DataTerm],
                  combine_dims: bool = True) -> DataTerm | None:
    if not present:
        return None
    out = present[0]
    for term in present[1:]:
        out = _combine_two(ctx, op, out, term, combine_dims)
    return out


def _combine_two(ctx: _Ctx, op: str, a: DataTerm, b: DataTerm,
                 combine_dims: bool) -> DataTerm:
    # Sequence concatenation adds length bounds.
    if op == "concat" and a.structure == SEQUENCE and b.structure == SEQUENCE:
        bound = None
        if a.max_len is not None and b.max_len is not None:
            bound = a.max_len + b.max_len
        element = a.element.with_labels(b.element.all_labels()) if a.element else a.element
        return DataTerm(structure=SEQUENCE, element=element, max_len=bound)
    core_a, core_b = a.core(), b.core()
    dims = None
    if combine_dims and core_a.dims is not None and core_b.dims is not None:
        try:
            dims = dim_combine(op, core_a.dims, core_b.dims)
        except DimConflict as exc:
            ctx.err("E103", str(exc))
            dims = None
    # The left operand's carrier wins; annotations accumulate from both.
    merged = replace(core_a, annotations=core_a.annotations | core_b.annotations, dims=dims)
    if a.structure in (SET, SEQUENCE):
        return replace(a, element=merged)
    return merged


def _tensor(ctx: _Ctx, present: list[DataTerm]) -> DataTerm | None:
    if not present:
        return None
    out = present[0]
    for term in present[1:]:
        if out.structure == SET and term.structure == SET:
            pair = DataTerm(structure=TUPLE, elements=(out.element, term.element))
            out = DataTerm(structure=SET, element=pair)
            continue
        core_a, core_b = out.core(), term.core()
        if core_a.dims is not None and core_b.dims is not None:
            dims = dim_combine("otimes", core_a.dims, core_b.dims)
        else:
            dims = None
        out = replace(core_a, annotations=core_a.annotations | core_b.annotations,
                      dims=dims)
    return out


def _project(ctx: _Ctx, term: DataTerm) -> DataTerm:
    emb = ctx.node.param("embedding")
    dim = ctx.embeddings.get(str(emb)) if emb is not None else _int_param(ctx.node, "dim")
    dims = (dim,) if dim else None
    core = term.core()
    projected = DataTerm(base="clustered_word", annotations=core.annotations, dims=dims)
    if term.structure in (SET, SEQUENCE):
        return replace(term, element=projected)
    return projected


# ---------------------------------------------------------------------------
# Whole-diagram propagation
# ---------------------------------------------------------------------------


@dataclass
class TypedDiagram:
    diagram: Diagram
    edge_terms: dict[str, DataTerm]
    diagnostics: list[Diagnostic] = field(default_factory=list)


def check_diagram(diagram: Diagram, registry: Registry | None = None) -> TypedDiagram:
    """Propagate terms across the dataflow graph to a fixed point.

    Terms travel only along the acyclic forward orientation. Recurrent
    edges, and any flow edge the cycle-breaker has to reverse, feed back
    annotation labels alone; the label lattice is finite, so the iteration
    terminates on every structurally valid diagram.
    """
    from .layout import break_cycles

    registry = registry or Registry()
    embeddings = {e.id: e.dim for e in diagram.embeddings}
    resolutions = {n.id: registry.resolve(n.code, diagram.dialects) for n in diagram.nodes}
    outputs: dict[str, list[DataTerm | None]] = {n.id: [None] for n in diagram.nodes}
    _, backward = break_cycles(diagram)
    label_count = max(1, len(registry.vocabulary.labels | registry.vocabulary.extra_labels))
    max_rounds = len(diagram.edges) * label_count + 2

    def gather(node: Node) -> tuple[list[DataTerm | None], list[bool]]:
        slots: dict[int, DataTerm | None] = {}
        resource_flags: dict[int, bool] = {}
        feedback: list[tuple[int, DataTerm | None]] = []
        for edge in diagram.edges:
            if edge.target.node != node.id:
                continue
            delivered = _delivered_term(edge, diagram, outputs)
            if edge.flow_kind == "recurrent" or edge.id in backward:
                feedback.append((edge.target.slot, delivered))
                continue
            slots[edge.target.slot] = delivered
            src = diagram.node_by_id(edge.source.node)
            resource_flags[edge.target.slot] = bool(src and src.kind == "resource")
        for slot, delivered in feedback:
            if delivered is None:
                continue
            if slots.get(slot) is not None:
                slots[slot] = slots[slot].with_labels(delivered.all_labels())
            else:
                slots[slot] = _collapse(delivered)
        width = max(slots, default=-1) + 1
        return ([slots.get(i) for i in range(width)],
                [resource_flags.get(i, False) for i in range(width)])

    for _ in range(max_rounds):
        changed = False
        for node in diagram.nodes:
            if resolutions[node.id] is None:
                continue
            inputs, res_flags = gather(node)
            # diagnostics from interim rounds are discarded; the final pass
            # below recomputes them once, in declaration order
            outs, _ = infer_output(node, inputs, registry, embeddings,
                                   res_flags, diagram.dialects)
            if outs != outputs[node.id]:
                outputs[node.id] = outs
                changed = True
        if not changed:
            break

    # Final pass: diagnostics in declaration order, then edge assertions.
    diagnostics: list[Diagnostic] = []
    for node in diagram.nodes:
        if resolutions[node.id] is None:
            continue
        inputs, res_flags = gather(node)
        _, diags = infer_output(node, inputs, registry, embeddings,
                                res_flags, diagram.dialects)
        diagnostics.extend(diags)

    edge_terms: dict[str, DataTerm] = {}
    for edge in diagram.edges:
        delivered = _delivered_term(edge, diagram, outputs)
        if delivered is not None:
            edge_terms[edge.id] = delivered
        elif resolutions.get(edge.source.node) is not None:
            diagnostics.append(Diagnostic(
                "E102", f"edge {edge.id} carries no resolvable term "
                        f"(source {edge.source} produced nothing)",
                ir_path=edge.id))
        if edge.declared_term is not None:
            _check_declared(edge, delivered, registry, diagnostics)
    return TypedDiagram(diagram, edge_terms, diagnostics)


def _collapse(term: DataTerm) -> DataTerm:
    """Bounded summary for feedback deliveries: carrier plus labels only.

    Keeps the fixed point on a finite domain even when a cycle runs through
    structure-building operators.
    """
    if term.structure in (SCALAR, DIST):
        return term
    core = term.core()
    base = core.base if core.structure in (SCALAR, DIST) else None
    return DataTerm(base=base, annotations=term.all_labels())


def _delivered_term(edge: Edge, diagram: Diagram,
                    outputs: dict[str, list[DataTerm | None]]) -> DataTerm | None:
    source = diagram.node_by_id(edge.source.node)
    if source is None:
        return None
    if edge.flow_kind == "query" and source.kind == "resource":
        return DataTerm(base="Tuples")
    outs = outputs.get(edge.source.node, [])
    if edge.source.slot < len(outs):
        return outs[edge.source.slot]
    return None


def _check_declared(edge: Edge, inferred: DataTerm | None, registry: Registry,
                    diagnostics: list[Diagnostic]) -> None:
    try:
        declared = parse_data_term(edge.declared_term, registry)
    except TermError as exc:
        diagnostics.append(Diagnostic("E004", f"edge {edge.id}: {exc}", ir_path=edge.id))
        return
    if inferred is None:
        return
    reason = _declared_conflict(declared, inferred)
    if reason:
        diagnostics.append(Diagnostic(
            "E104", f"edge {edge.id} is declared as {term_text(declared)} but carries "
                    f"{term_text(inferred)}: {reason}",
            ir_path=edge.id))


def _declared_conflict(declared: DataTerm, inferred: DataTerm) -> str | None:
    """A declaration may understate labels but must not contradict."""
    if declared.structure in (SET, SEQUENCE):
        if inferred.structure != declared.structure:
            return f"structure {inferred.structure} is not {declared.structure}"
        return _declared_conflict(declared.element, inferred.element)
    if declared.structure == TUPLE:
        if inferred.structure != TUPLE or len(inferred.elements) != len(declared.elements):
            return "tuple shapes differ"
        for d, i in zip(declared.elements, inferred.elements):
            reason = _declared_conflict(d, i)
            if reason:
                return reason
        return None
    if declared.structure == DIST:
        if inferred.structure != DIST:
            return "not a distribution"
        if declared.dist_range != inferred.dist_range:
            return "distribution ranges differ"
    elif inferred.structure not in (SCALAR, DIST):
        return f"structure {inferred.structure} is not scalar"
    if declared.base is not None and declared.base != inferred.base:
        return f"category {_cat(inferred.base)} is not {_cat(declared.base)}"
    extra = declared.annotations - inferred.all_labels()
    if extra:
        return "labels " + ", ".join(sorted(extra)) + " were never applied"
    if declared.dims is not None and declared.dims != inferred.dims:
        return f"dimensions differ ({list(inferred.dims or [])} inferred)"
    if declared.subscript is not None and inferred.subscript is not None \
            and declared.subscript != inferred.subscript:
        return "subscripts differ"
    return None
