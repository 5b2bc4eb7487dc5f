"""Front end for the textual diagram DSL.

Pipeline: tokenize -> parse (AST with spans, declaration-level error
recovery) -> lower (core IR plus extension overlay) -> format (canonical
printer, idempotent).

Grammar sketch (see the generated reference for the full version):

  unit      := "dial" VERSION "dialect" ident ("," ident)* diagram
  diagram   := "diagram" STRING ("at" region)? "{" item* "}"
  item      := node | data | edge | detail | table | embed | extend
  node      := "node" ident ":" code params? perf?
  data      := "data" ident ":" dataterm resTag?
  edge      := "edge" portref ARROW portref ("as" dataterm)?
  detail    := "detail" ident "for" ident ("entry" side)? ("exit" side)? "{" item* "}"
  table     := "table" ident ("at" region)? "{" (STRING ":" STRING ";")+ "}"
  embed     := "embedding" ident "(" "dim" "=" INT ")" STRING?
  extend    := "extend" ("symbol" | "task") ident "{" ... "}"

Comments run from ``//`` to end of line and are discarded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .diagnostics import CollidesWithBuiltin, Diagnostic, Span
from .model import (
    REGIONS,
    SIDES,
    Diagram,
    DetailGroup,
    Edge,
    EmbeddingDecl,
    MetaTable,
    Node,
    PerfAnnotation,
    Port,
    new_diagram,
)
from .registry import DIALECTS, FormalTerm, Registry, Signature, SymbolDef
from .terms import DataTerm, TermError, TermParser, TermVocabulary

DSL_VERSION = "0.1"

KEYWORDS = frozenset({
    "dial", "dialect", "diagram", "node", "data", "edge", "detail", "table",
    "embedding", "extend", "for", "as", "perf", "at", "entry", "exit",
})
ARROWS = {
    "->": "flow", "<->": "biflow", "|->": "persist",
    "?>": "query", "-o": "interface", "~>": "recurrent",
}
ITEM_KEYWORDS = frozenset({"node", "data", "edge", "detail", "table", "embedding", "extend"})
RESERVED_PARAMS = frozenset({"label", "shape", "out"})


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | string | number | punct | arrow | eof
    text: str
    span: Span


_ARROW_RE = re.compile(r"->|<->|\|->|\?>|-o|~>")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?")
_PUNCT = set(":{}()[],=@^.;")


def tokenize(source: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diagnostics: list[Diagnostic] = []
    line, col, i = 1, 1, 0
    n = len(source)

    def emit(kind: str, text: str) -> None:
        tokens.append(Token(kind, text, Span(line, col, len(text))))

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            continue
        m = _ARROW_RE.match(source, i)
        if m:
            emit("arrow", m.group())
            col += len(m.group())
            i = m.end()
            continue
        if ch == '"':
            j = i + 1
            buf: list[str] = []
            terminated = False
            while j < n:
                if source[j] == "\\" and j + 1 < n:
                    buf.append(source[j + 1])
                    j += 2
                    continue
                if source[j] == '"':
                    terminated = True
                    break
                if source[j] == "\n":
                    break
                buf.append(source[j])
                j += 1
            if not terminated:
                diagnostics.append(Diagnostic(
                    "E001", "unterminated string literal", span=Span(line, col)))
                # resume after the broken literal
                width = j - i
                col += width
                i = j
                continue
            emit("string", "".join(buf))
            col += j + 1 - i
            i = j + 1
            continue
        m = _NUMBER_RE.match(source, i)
        if m:
            emit("number", m.group())
            col += len(m.group())
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            word = m.group()
            emit("keyword" if word in KEYWORDS else "ident", word)
            col += len(word)
            i = m.end()
            continue
        if ch in _PUNCT:
            emit("punct", ch)
            i += 1
            col += 1
            continue
        diagnostics.append(Diagnostic(
            "E001", f"illegal character {ch!r}", span=Span(line, col)))
        i += 1
        col += 1
    tokens.append(Token("eof", "", Span(line, col, 0)))
    return tokens, diagnostics


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PortRef:
    node: str
    slot: str | None
    span: Span


@dataclass(frozen=True)
class PerfItem:
    metric: str
    value: float
    corpus: str
    span: Span


@dataclass(frozen=True)
class NodeDecl:
    id: str
    code: str
    params: tuple[tuple[str, object], ...]
    perf: tuple[PerfItem, ...]
    span: Span


@dataclass(frozen=True)
class DataDecl:
    id: str
    term_literal: str
    tag: str | None  # dataset | gold | kb | kbfn
    tag_label: str | None
    span: Span


@dataclass(frozen=True)
class EdgeDecl:
    source: PortRef
    arrow: str
    target: PortRef
    as_literal: str | None
    span: Span


@dataclass(frozen=True)
class DetailDecl:
    id: str
    owner: str
    entry_side: str
    exit_side: str
    items: tuple
    span: Span


@dataclass(frozen=True)
class TableDecl:
    id: str
    placement: str | None
    rows: tuple[tuple[str, str], ...]
    span: Span


@dataclass(frozen=True)
class EmbedDecl:
    id: str
    dim: int
    label: str | None
    span: Span


@dataclass(frozen=True)
class ExtendDecl:
    what: str  # "symbol" | "task"
    name: str
    fields: tuple[tuple[str, object], ...]
    span: Span


@dataclass(frozen=True)
class SourceAst:
    version: str
    dialects: tuple[str, ...]
    name: str
    title_placement: str | None
    items: tuple
    span: Span


class _ParseAbort(Exception):
    pass


class Parser:
    """Single-pass recursive descent with panic-mode recovery at item level."""

    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []

    # -- cursor helpers -----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def at(self, text: str | None = None, kind: str | None = None) -> bool:
        tok = self.peek()
        return (text is None or tok.text == text) and (kind is None or tok.kind == kind)

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, text: str | None = None, kind: str | None = None, what: str = "") -> Token:
        if self.at(text, kind):
            return self.advance()
        expected = what or (repr(text) if text else kind or "token")
        tok = self.peek()
        found = tok.text or "end of input"
        self.error(f"expected {expected}, found {found!r}", tok.span)
        raise _ParseAbort()

    def error(self, message: str, span: Span) -> None:
        self.diagnostics.append(Diagnostic("E002", message, span=span))

    def recover_to_item(self) -> None:
        while not self.at(kind="eof"):
            tok = self.peek()
            if tok.text in ITEM_KEYWORDS or tok.text == "}":
                return
            self.advance()

    # -- grammar ------------------------------------------------------------

    def parse_unit(self) -> SourceAst | None:
        try:
            start = self.peek().span
            self.expect("dial", what="'dial' header")
            version = self.expect(kind="number", what="language version").text
            if version != DSL_VERSION:
                self.error(f"unsupported language version {version!r} "
                           f"(this toolchain speaks {DSL_VERSION})", start)
            self.expect("dialect", what="'dialect'")
            dialects = [self.expect(kind="ident", what="dialect name").text]
            while self.at(","):
                self.advance()
                dialects.append(self.expect(kind="ident", what="dialect name").text)
            self.expect("diagram", what="'diagram'")
            name = self.expect(kind="string", what="diagram name").text
            title_placement = None
            if self.at("at"):
                self.advance()
                title_placement = self._region()
            self.expect("{", what="'{'")
            items = self._items_until_close()
            return SourceAst(version, tuple(dialects), name, title_placement,
                             tuple(items), start)
        except _ParseAbort:
            return None

    def _items_until_close(self) -> list:
        items: list = []
        while True:
            if self.at("}"):
                self.advance()
                return items
            if self.at(kind="eof"):
                self.error("unexpected end of input, expected '}'", self.peek().span)
                return items
            try:
                items.append(self._item())
            except _ParseAbort:
                self.recover_to_item()
                if self.at("}"):
                    self.advance()
                    return items

    def _item(self):
        tok = self.peek()
        handler = {
            "node": self._node, "data": self._data, "edge": self._edge,
            "detail": self._detail, "table": self._table,
            "embedding": self._embedding, "extend": self._extend,
        }.get(tok.text)
        if handler is None:
            self.error(
                "expected a declaration (node, data, edge, detail, table, "
                f"embedding or extend), found {tok.text or 'end of input'!r}",
                tok.span)
            raise _ParseAbort()
        return handler()

    def _node(self) -> NodeDecl:
        span = self.advance().span
        ident = self.expect(kind="ident", what="node identifier").text
        self.expect(":", what="':'")
        code = self.expect(kind="ident", what="symbol or task code").text
        params = self._params() if self.at("(") else ()
        perf = self._perf() if self.at("perf") else ()
        return NodeDecl(ident, code, params, perf, span)

    def _params(self) -> tuple[tuple[str, object], ...]:
        self.expect("(")
        out: list[tuple[str, object]] = []
        while True:
            key_tok = self.peek()
            if key_tok.kind not in ("ident", "keyword"):
                self.error(f"expected a parameter name, found {key_tok.text!r}",
                           key_tok.span)
                raise _ParseAbort()
            key = self.advance().text
            self.expect("=", what="'='")
            tok = self.peek()
            if tok.kind == "number":
                self.advance()
                value: object = _number(tok.text)
            elif tok.kind in ("string", "ident", "keyword"):
                self.advance()
                value = tok.text
            else:
                self.error(f"expected a parameter value, found {tok.text!r}", tok.span)
                raise _ParseAbort()
            out.append((key, value))
            if self.at(","):
                self.advance()
                continue
            self.expect(")", what="')' or ','")
            return tuple(out)

    def _perf(self) -> tuple[PerfItem, ...]:
        self.advance()  # perf
        self.expect("(")
        out: list[PerfItem] = []
        while True:
            mtok = self.expect(kind="ident", what="metric name")
            self.expect("=", what="'='")
            vtok = self.expect(kind="number", what="metric value")
            value = float(vtok.text)
            if mtok.text == "acc" and not 0.0 <= value <= 1.0:
                self.error("acc must lie in [0,1]", vtok.span)
            self.expect("@", what="'@'")
            corpus = self.expect(kind="string", what="corpus name").text
            out.append(PerfItem(mtok.text, value, corpus, mtok.span))
            if self.at(","):
                self.advance()
                continue
            self.expect(")", what="')' or ','")
            return tuple(out)

    def _data(self) -> DataDecl:
        span = self.advance().span
        ident = self.expect(kind="ident", what="data identifier").text
        self.expect(":", what="':'")
        literal = self._dataterm_literal()
        tag = tag_label = None
        if self.at("@"):
            self.advance()
            tag_tok = self.expect(kind="ident", what="resource tag")
            if tag_tok.text not in ("dataset", "gold", "kb", "kbfn"):
                self.error(f"unknown resource tag @{tag_tok.text}", tag_tok.span)
                raise _ParseAbort()
            tag = tag_tok.text
            if tag == "dataset":
                self.expect("(", what="'('")
                tag_label = self.expect(kind="string", what="dataset label").text
                self.expect(")", what="')'")
        return DataDecl(ident, literal, tag, tag_label, span)

    def _portref(self) -> PortRef:
        tok = self.expect(kind="ident", what="node reference")
        slot = None
        if self.at("."):
            self.advance()
            slot = self.expect(kind="ident", what="port name").text
        return PortRef(tok.text, slot, tok.span)

    def _edge(self) -> EdgeDecl:
        span = self.advance().span
        source = self._portref()
        arrow = self.expect(kind="arrow", what="an arrow (->, <->, |->, ?>, -o, ~>)").text
        target = self._portref()
        as_literal = None
        if self.at("as"):
            self.advance()
            as_literal = self._dataterm_literal()
        return EdgeDecl(source, arrow, target, as_literal, span)

    def _dataterm_literal(self) -> str:
        """Consume the tokens of one data term; names are checked at lowering."""
        start = self.pos
        triples = [(_term_kind(t), t.text, idx)
                   for idx, t in enumerate(self.tokens[start:], start)]
        term_parser = TermParser(triples, vocab=None)
        try:
            term_parser.parse()
        except TermError as exc:
            span = self.tokens[min(exc.pos, len(self.tokens) - 1)].span \
                if isinstance(exc.pos, int) and exc.pos < len(self.tokens) else self.peek().span
            self.error(f"malformed data term: {exc}", span)
            raise _ParseAbort()
        end = start + term_parser.index
        self.pos = end
        return "".join(_term_text(t) for t in self.tokens[start:end])

    def _detail(self) -> DetailDecl:
        span = self.advance().span
        ident = self.expect(kind="ident", what="detail group identifier").text
        self.expect("for", what="'for'")
        owner = self.expect(kind="ident", what="owner node identifier").text
        entry_side, exit_side = "left", "right"
        if self.at("entry"):
            self.advance()
            entry_side = self._side()
        if self.at("exit"):
            self.advance()
            exit_side = self._side()
        self.expect("{", what="'{'")
        items = self._items_until_close()
        return DetailDecl(ident, owner, entry_side, exit_side, tuple(items), span)

    def _side(self) -> str:
        tok = self.expect(kind="ident", what="a side (left, right, top, bottom)")
        if tok.text not in SIDES:
            self.error(f"unknown side {tok.text!r}", tok.span)
            raise _ParseAbort()
        return tok.text

    def _region(self) -> str:
        tok = self.expect(kind="ident", what="a region (top_left, top_right, "
                                             "bottom_left, bottom_right)")
        if tok.text not in REGIONS:
            self.error(f"unknown region {tok.text!r}", tok.span)
            raise _ParseAbort()
        return tok.text

    def _table(self) -> TableDecl:
        span = self.advance().span
        ident = self.expect(kind="ident", what="table identifier").text
        placement = None
        if self.at("at"):
            self.advance()
            placement = self._region()
        self.expect("{", what="'{'")
        rows: list[tuple[str, str]] = []
        while not self.at("}"):
            if self.at(kind="eof"):
                self.error("unexpected end of input inside table", self.peek().span)
                raise _ParseAbort()
            key = self.expect(kind="string", what="row key string").text
            self.expect(":", what="':'")
            value = self.expect(kind="string", what="row value string").text
            self.expect(";", what="';'")
            rows.append((key, value))
        close = self.advance()
        if not rows:
            self.error("a table needs at least one row", close.span)
        return TableDecl(ident, placement, tuple(rows), span)

    def _embedding(self) -> EmbedDecl:
        span = self.advance().span
        ident = self.expect(kind="ident", what="embedding identifier").text
        self.expect("(", what="'('")
        key = self.expect(kind="ident", what="'dim'")
        if key.text != "dim":
            self.error("embedding takes a single dim parameter", key.span)
            raise _ParseAbort()
        self.expect("=", what="'='")
        dim_tok = self.expect(kind="number", what="dimension")
        if "." in dim_tok.text or int(dim_tok.text) < 1:
            self.error("embedding dim must be a positive integer", dim_tok.span)
            raise _ParseAbort()
        self.expect(")", what="')'")
        label = None
        if self.at(kind="string"):
            label = self.advance().text
        return EmbedDecl(ident, int(dim_tok.text), label, span)

    def _extend(self) -> ExtendDecl:
        span = self.advance().span
        what_tok = self.expect(kind="ident", what="'symbol' or 'task'")
        if what_tok.text not in ("symbol", "task"):
            self.error("extend introduces either a symbol or a task", what_tok.span)
            raise _ParseAbort()
        name = self.expect(kind="ident", what="extension code").text
        self.expect("{", what="'{'")
        fields: list[tuple[str, object]] = []
        while not self.at("}"):
            if self.at(kind="eof"):
                self.error("unexpected end of input inside extend", self.peek().span)
                raise _ParseAbort()
            key = self.expect(kind="ident", what="field name").text
            self.expect(":", what="':'")
            if key in ("domain", "range"):
                literals = [self._dataterm_literal()]
                while self.at(","):
                    self.advance()
                    literals.append(self._dataterm_literal())
                fields.append((key, tuple(literals)))
            elif key == "arity":
                fields.append((key, self._arity()))
            else:
                tok = self.peek()
                if tok.kind in ("ident", "string", "number"):
                    self.advance()
                    fields.append((key, tok.text))
                else:
                    self.error(f"expected a field value, found {tok.text!r}", tok.span)
                    raise _ParseAbort()
            self.expect(";", what="';'")
        self.advance()
        return ExtendDecl(what_tok.text, name, tuple(fields), span)

    def _arity(self) -> tuple[int, int, int, int]:
        lo_in = int(self.expect(kind="number", what="minimum input arity").text)
        self.expect(".", what="'..'")
        self.expect(".", what="'..'")
        hi_in = int(self.expect(kind="number", what="maximum input arity").text)
        self.expect(kind="arrow", what="'->'")
        lo_out = int(self.expect(kind="number", what="minimum output arity").text)
        self.expect(".", what="'..'")
        self.expect(".", what="'..'")
        hi_out = int(self.expect(kind="number", what="maximum output arity").text)
        return (lo_in, hi_in, lo_out, hi_out)


def _term_kind(token: Token) -> str:
    if token.kind == "number":
        return "num"
    if token.kind in ("ident", "keyword"):
        return "ident"
    return "punct"


def _term_text(token: Token) -> str:
    return token.text


def _number(text: str) -> object:
    return float(text) if "." in text else int(text)


def parse(tokens: list[Token]) -> tuple[SourceAst | None, list[Diagnostic]]:
    parser = Parser(tokens)
    ast = parser.parse_unit()
    if ast is not None and not parser.at(kind="eof"):
        parser.error(f"trailing input after the diagram: {parser.peek().text!r}",
                     parser.peek().span)
    return ast, parser.diagnostics


# ---------------------------------------------------------------------------
# Lowering
# ---------------------------------------------------------------------------


@dataclass
class LoweredUnit:
    diagram: Diagram | None
    registry: Registry
    diagnostics: list[Diagnostic]
    spans: dict[str, Span] = field(default_factory=dict)  # node/edge/group id -> span


def lower(ast: SourceAst) -> LoweredUnit:
    """AST to core IR. Code resolution is deferred to validate_structure;
    data-term names are checked here (E004), ids here (E003)."""
    registry = Registry()
    diagnostics: list[Diagnostic] = []
    spans: dict[str, Span] = {}

    unknown = [d for d in ast.dialects if d not in DIALECTS]
    if unknown or "sys" not in ast.dialects:
        names = ", ".join(sorted(unknown)) or "missing sys"
        diagnostics.append(Diagnostic(
            "E003", f"dialect list is invalid ({names}); v0.1 registers: "
                    + ", ".join(DIALECTS), span=ast.span))
        return LoweredUnit(None, registry, diagnostics, spans)

    diagram = new_diagram(ast.name, frozenset(ast.dialects))
    if ast.title_placement:
        diagram.title_placement = ast.title_placement

    _register_extensions(ast, registry, diagnostics)
    vocab = registry.vocabulary

    lowerer = _Lowerer(diagram, registry, vocab, diagnostics, spans)
    lowerer.lower_items(ast.items, group=None)
    lowerer.lower_edges()
    return LoweredUnit(diagram, registry, diagnostics, spans)


def _walk_extends(items) -> list[ExtendDecl]:
    out: list[ExtendDecl] = []
    for item in items:
        if isinstance(item, ExtendDecl):
            out.append(item)
        elif isinstance(item, DetailDecl):
            out.extend(_walk_extends(item.items))
    return out


def _register_extensions(ast: SourceAst, registry: Registry,
                         diagnostics: list[Diagnostic]) -> None:
    for decl in _walk_extends(ast.items):
        fields = dict(decl.fields)
        try:
            if decl.what == "symbol":
                lo_in, hi_in, lo_out, hi_out = fields.get("arity", (1, 1, 1, 1))
                registry.register_extension(SymbolDef(
                    code=decl.name, dialect="ext",
                    name=str(fields.get("name", decl.name)),
                    glyph_id=str(fields.get("glyph", "box_extension")),
                    min_in=lo_in, max_in=hi_in, min_out=lo_out, max_out=hi_out,
                    category=str(fields.get("category", "operator")),
                ))
            else:
                for key in ("domain", "range"):
                    for literal in fields.get(key, ()):
                        for label in _harvest_labels(literal):
                            registry.register_label(label)
                vocab = registry.vocabulary
                domain = tuple(_formal_from_literal(lit, vocab) for lit in fields.get("domain", ()))
                rng = tuple(_formal_from_literal(lit, vocab) for lit in fields.get("range", ()))
                if not domain or not rng:
                    diagnostics.append(Diagnostic(
                        "E003", f"extension task {decl.name!r} needs domain and range",
                        span=decl.span))
                    continue
                registry.register_extension(Signature(
                    task_code=decl.name, dialect="ext", name=decl.name,
                    variants=((domain, rng),)))
        except CollidesWithBuiltin as exc:
            diagnostics.append(Diagnostic("E003", str(exc), span=decl.span))
        except TermError as exc:
            diagnostics.append(Diagnostic(
                "E004", f"in extension {decl.name!r}: {exc}", span=decl.span))


def _harvest_labels(literal: str) -> frozenset[str]:
    from .terms import _lex_literal  # tiny; shared with parse_term

    parser = TermParser(_lex_literal(literal), vocab=None)
    term = parser.parse()
    return term.all_labels()


def _formal_from_literal(literal: str, vocab: TermVocabulary) -> FormalTerm:
    from .terms import _lex_literal

    term = TermParser(_lex_literal(literal), vocab).parse()
    return _formal_from_term(term)


def _formal_from_term(term: DataTerm) -> FormalTerm:
    return FormalTerm(
        base=term.base,
        required=term.annotations,
        structure=term.structure,
        element=_formal_from_term(term.element) if term.element else None,
        elements=tuple(_formal_from_term(t) for t in term.elements),
        subscript=term.subscript,
        dims=term.dims,
    )


_TAG_CODE = {"dataset": "dataset", "gold": "gold", "kb": "kb", "kbfn": "kbfn"}
_SLOT_RE = re.compile(r"(in|out)(\d+)$")


class _Lowerer:
    def __init__(self, diagram, registry, vocab, diagnostics, spans) -> None:
        self.diagram = diagram
        self.registry = registry
        self.vocab = vocab
        self.diagnostics = diagnostics
        self.spans = spans
        self.pending_edges: list[tuple[EdgeDecl, str | None]] = []  # (decl, group id)
        self.next_in_slot: dict[str, int] = {}
        self.group_ids: set[str] = set()
        self.table_ids: set[str] = set()
        self.embedding_ids: set[str] = set()

    def err(self, code: str, message: str, span: Span) -> None:
        self.diagnostics.append(Diagnostic(code, message, span=span))

    # -- declarations ---------------------------------------------------

    def lower_items(self, items, group: str | None) -> None:
        for item in items:
            if isinstance(item, NodeDecl):
                self._node(item, group)
            elif isinstance(item, DataDecl):
                self._data(item, group)
            elif isinstance(item, EdgeDecl):
                self.pending_edges.append((item, group))
            elif isinstance(item, DetailDecl):
                self._detail(item, group)
            elif isinstance(item, TableDecl):
                self._table(item)
            elif isinstance(item, EmbedDecl):
                self._embedding(item)
            # ExtendDecl already handled in the registration pre-pass.

    def _check_term(self, literal: str, span: Span) -> bool:
        from .terms import parse_term

        try:
            parse_term(literal, self.vocab)
            return True
        except TermError as exc:
            self.err("E004", str(exc), span)
            return False

    def _add_node(self, node: Node, span: Span, group: str | None) -> bool:
        if self.diagram.node_by_id(node.id) is not None:
            self.err("E003", f"duplicate declaration id {node.id!r}", span)
            return False
        self.diagram.nodes.append(node)
        self.spans[node.id] = span
        if group is not None:
            idx = next(i for i, g in enumerate(self.diagram.groups) if g.id == group)
            g = self.diagram.groups[idx]
            self.diagram.groups[idx] = replace(g, member_nodes=g.member_nodes + (node.id,))
        return True

    def _node(self, decl: NodeDecl, group: str | None) -> None:
        params = []
        label = shape = None
        for key, value in decl.params:
            if key == "label":
                label = str(value)
            elif key == "shape":
                if value not in ("feature", "component"):
                    self.err("E003", f"shape must be feature or component, got {value!r}",
                             decl.span)
                else:
                    shape = str(value)
            else:
                if key == "out":
                    self._check_term(str(value), decl.span)
                params.append((key, value))
        resolution = self.registry.resolve(decl.code, self.diagram.dialects)
        kind = resolution.kind if resolution else "operator"
        node = Node(
            id=decl.id, kind=kind, code=decl.code, label=label,
            params=tuple(params),
            shape_class=shape or _default_shape(kind),
            perf=tuple(PerfAnnotation(p.metric, p.value, p.corpus) for p in decl.perf),
        )
        self._add_node(node, decl.span, group)

    def _data(self, decl: DataDecl, group: str | None) -> None:
        self._check_term(decl.term_literal, decl.span)
        code = _TAG_CODE.get(decl.tag, "interface")
        kind = "resource" if decl.tag else "io"
        node = Node(
            id=decl.id, kind=kind, code=code, label=decl.tag_label,
            params=(("out", decl.term_literal),),
            shape_class="component",
        )
        self._add_node(node, decl.span, group)

    def _detail(self, decl: DetailDecl, parent_group: str | None) -> None:
        if decl.id in self.group_ids:
            self.err("E003", f"duplicate declaration id {decl.id!r}", decl.span)
            return
        self.group_ids.add(decl.id)
        group = DetailGroup(decl.id, decl.owner, entry_side=decl.entry_side,
                            exit_side=decl.exit_side)
        self.diagram.groups.append(group)
        self.spans[decl.id] = decl.span
        self.lower_items(decl.items, group=decl.id)
        owner_idx = self.diagram.node_index(decl.owner)
        if owner_idx >= 0:
            self.diagram.nodes[owner_idx] = replace(
                self.diagram.nodes[owner_idx], detail=decl.id)
        else:
            self.err("E011", f"detail group {decl.id!r} refines unknown node "
                             f"{decl.owner!r}", decl.span)

    def _table(self, decl: TableDecl) -> None:
        if decl.id in self.table_ids:
            self.err("E003", f"duplicate declaration id {decl.id!r}", decl.span)
            return
        self.table_ids.add(decl.id)
        kind = decl.id if decl.id in ("hyperparams", "results") else "freeform"
        self.diagram.tables.append(MetaTable(
            decl.id, kind=kind, rows=decl.rows,
            placement=decl.placement or "bottom_right"))
        self.spans[decl.id] = decl.span

    def _embedding(self, decl: EmbedDecl) -> None:
        if decl.id in self.embedding_ids:
            self.err("E003", f"duplicate declaration id {decl.id!r}", decl.span)
            return
        self.embedding_ids.add(decl.id)
        self.diagram.embeddings.append(EmbeddingDecl(decl.id, decl.dim, decl.label))
        self.spans[decl.id] = decl.span

    # -- edges (second pass so forward references work) -------------------

    def lower_edges(self) -> None:
        for decl, group in self.pending_edges:
            self._edge(decl, group)

    def _resolve_slot(self, ref: PortRef, direction: str, flow_kind: str) -> int | None:
        if ref.slot is None:
            if direction == "out":
                return 0
            if flow_kind == "recurrent":
                return 0
            slot = self.next_in_slot.get(ref.node, 0)
            self.next_in_slot[ref.node] = slot + 1
            return slot
        if ref.slot == "true":
            return 0 if direction == "out" else None
        if ref.slot == "false":
            return 1 if direction == "out" else None
        m = _SLOT_RE.match(ref.slot)
        if m is None or m.group(1) != direction:
            return None
        slot = int(m.group(2))
        if direction == "in" and flow_kind != "recurrent":
            self.next_in_slot[ref.node] = max(self.next_in_slot.get(ref.node, 0), slot + 1)
        return slot

    def _edge(self, decl: EdgeDecl, group: str | None) -> None:
        kind = ARROWS[decl.arrow]
        ok = True
        for ref in (decl.source, decl.target):
            if self.diagram.node_by_id(ref.node) is None:
                self.err("E011", f"edge references unknown node {ref.node!r}", ref.span)
                ok = False
        if not ok:
            return
        src_slot = self._resolve_slot(decl.source, "out", kind)
        tgt_slot = self._resolve_slot(decl.target, "in", kind)
        if src_slot is None or tgt_slot is None:
            bad = decl.source if src_slot is None else decl.target
            self.err("E011", f"bad port name {bad.slot!r} on {bad.node!r}", bad.span)
            return
        if decl.as_literal is not None:
            self._check_term(decl.as_literal, decl.span)
        edge_id = f"e{len(self.diagram.edges)}"
        self.diagram.edges.append(Edge(
            edge_id,
            Port(decl.source.node, src_slot, "out"),
            Port(decl.target.node, tgt_slot, "in"),
            kind, decl.as_literal,
        ))
        self.spans[edge_id] = decl.span
        if group is not None:
            idx = next(i for i, g in enumerate(self.diagram.groups) if g.id == group)
            g = self.diagram.groups[idx]
            self.diagram.groups[idx] = replace(g, member_edges=g.member_edges + (edge_id,))


def _default_shape(kind: str) -> str:
    from .model import default_shape_class

    return default_shape_class(kind)


# ---------------------------------------------------------------------------
# Canonical formatter
# ---------------------------------------------------------------------------


def format_ast(ast: SourceAst) -> str:
    """Canonical style: one declaration per line, two-space indents,
    single spaces around arrows. Idempotent over parse."""
    lines = [f"dial {ast.version}", "dialect " + ", ".join(ast.dialects), ""]
    header = f'diagram "{_esc(ast.name)}"'
    if ast.title_placement:
        header += f" at {ast.title_placement}"
    lines.append(header + " {")
    _format_items(ast.items, 1, lines)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _format_items(items, depth: int, lines: list[str]) -> None:
    pad = "  " * depth
    for item in items:
        if isinstance(item, NodeDecl):
            text = f"{pad}node {item.id}: {item.code}"
            if item.params:
                text += "(" + ", ".join(f"{k}={_param_value(v)}" for k, v in item.params) + ")"
            if item.perf:
                text += " perf(" + ", ".join(
                    f'{p.metric}={_num_text(p.value)}@"{_esc(p.corpus)}"' for p in item.perf) + ")"
            lines.append(text)
        elif isinstance(item, DataDecl):
            text = f"{pad}data {item.id}: {item.term_literal}"
            if item.tag == "dataset":
                text += f' @dataset("{_esc(item.tag_label or "")}")'
            elif item.tag:
                text += f" @{item.tag}"
            lines.append(text)
        elif isinstance(item, EdgeDecl):
            text = (f"{pad}edge {_port_text(item.source)} {item.arrow} "
                    f"{_port_text(item.target)}")
            if item.as_literal:
                text += f" as {item.as_literal}"
            lines.append(text)
        elif isinstance(item, DetailDecl):
            text = f"{pad}detail {item.id} for {item.owner}"
            if item.entry_side != "left":
                text += f" entry {item.entry_side}"
            if item.exit_side != "right":
                text += f" exit {item.exit_side}"
            lines.append(text + " {")
            _format_items(item.items, depth + 1, lines)
            lines.append(pad + "}")
        elif isinstance(item, TableDecl):
            text = f"{pad}table {item.id}"
            if item.placement:
                text += f" at {item.placement}"
            lines.append(text + " {")
            for key, value in item.rows:
                lines.append(f'{pad}  "{_esc(key)}": "{_esc(value)}";')
            lines.append(pad + "}")
        elif isinstance(item, EmbedDecl):
            text = f"{pad}embedding {item.id} (dim={item.dim})"
            if item.label:
                text += f' "{_esc(item.label)}"'
            lines.append(text)
        elif isinstance(item, ExtendDecl):
            lines.append(f"{pad}extend {item.what} {item.name} {{")
            for key, value in item.fields:
                if key in ("domain", "range"):
                    lines.append(f"{pad}  {key}: " + ", ".join(value) + ";")
                elif key == "arity":
                    lo_in, hi_in, lo_out, hi_out = value
                    lines.append(f"{pad}  arity: {lo_in}..{hi_in} -> {lo_out}..{hi_out};")
                else:
                    lines.append(f"{pad}  {key}: {value};")
            lines.append(pad + "}")


def _port_text(ref: PortRef) -> str:
    return ref.node if ref.slot is None else f"{ref.node}.{ref.slot}"


def _param_value(value: object) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return _num_text(value)
    text = str(value)
    if _IDENT_RE.fullmatch(text) and text not in KEYWORDS:
        return text
    return f'"{_esc(text)}"'


def _num_text(value) -> str:
    # floats keep their decimal point so reparsing preserves the value's type
    return repr(value) if isinstance(value, float) else str(value)


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def format_source(source: str) -> tuple[str | None, list[Diagnostic]]:
    """Parse and reprint a source text; None when there are syntax errors."""
    tokens, lex_diags = tokenize(source)
    ast, parse_diags = parse(tokens)
    diagnostics = lex_diags + parse_diags
    if ast is None or any(d.severity == "error" for d in diagnostics):
        return None, diagnostics
    return format_ast(ast), diagnostics
