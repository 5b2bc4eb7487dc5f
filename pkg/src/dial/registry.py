"""Builtin task signatures, symbols, and data categories, grouped by dialect.

The tables are compiled-in so diagnostics stay versioned with the toolchain;
per-compilation extensions are layered on top of an immutable builtin core
and never leak between compilations.

Dialects shipped in v0.1: ``sys`` (whole-system vocabulary) and ``nn``
(neural-network layer vocabulary).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .diagnostics import CollidesWithBuiltin, UnknownDialect, UnknownSymbol, UnknownTask
from .terms import SCALAR, SEQUENCE, SET, TermVocabulary

DIALECTS = ("sys", "nn")


# ---------------------------------------------------------------------------
# Data categories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataCategory:
    code: str
    description: str
    core: bool = True  # False for the documented extended set


DATA_CATEGORIES: tuple[DataCategory, ...] = (
    DataCategory("T", "raw text"),
    DataCategory("p_T", "passage: contiguous fragment of a text"),
    DataCategory("s_T", "sentence: self-contained word sequence"),
    DataCategory("Ch_T", "single printable character"),
    DataCategory("t_T", "term: concept-bearing word or word group"),
    DataCategory("w_T", "single word"),
    DataCategory("dt", "dialogue turn"),
    DataCategory("sense", "disambiguated word with sense identifier"),
    DataCategory("clustered_word", "word vector in an embedding space"),
    DataCategory("im", "raw image"),
    DataCategory("sentence_sense", "sentence with resolved discourse identity"),
    DataCategory("q", "query input"),
    DataCategory("a", "answer output"),
    DataCategory("F", "fact: predicate over constant tuples"),
    DataCategory("R", "rule: conditional predicate definition"),
    DataCategory("P_c", "classification outcome, optionally a distribution over [a,b]"),
    # Extended categories: carriers that signatures produce or consume but the
    # core category table leaves unnamed.
    DataCategory("Structure", "parse structure", core=False),
    DataCategory("Score", "numeric score", core=False),
    DataCategory("Entity", "linked entity reference", core=False),
    DataCategory("Tuples", "labeled result tuples", core=False),
    DataCategory("Chains", "identified reference chain", core=False),
    DataCategory("PredArg", "predicate-argument structure", core=False),
    DataCategory("KB", "knowledge-base contents", core=False),
)

ANNOTATION_LABELS: frozenset[str] = frozenset(
    {
        "POS", "Chunk", "NER", "Names", "Token", "Sem", "WSD", "SRL",
        "Arg", "Name", "RS", "RST", "ArgStruct", "ArgScheme",
        "F", "R", "Constraints", "entity", "PredArg",
    }
)

# Source spelling -> category code. Single-glyph shorthands sit beside the
# category codes themselves; "terms"/"string" are comparison-task carriers.
_BASE_SPELLINGS: dict[str, str] = {
    "T": "T", "p_T": "p_T", "S": "s_T", "s_T": "s_T", "Ch_T": "Ch_T",
    "Term": "t_T", "t_T": "t_T", "w_T": "w_T", "dt": "dt", "sense": "sense",
    "vec": "clustered_word", "clustered_word": "clustered_word", "im": "im",
    "ssense": "sentence_sense", "sentence_sense": "sentence_sense",
    "q": "q", "a": "a", "F": "F", "R": "R", "P_c": "P_c", "C": "P_c",
    "Structure": "Structure", "Score": "Score", "Entity": "Entity",
    "Tuples": "Tuples", "Chains": "Chains", "PredArg": "PredArg", "KB": "KB",
    "terms": "t_T", "string": "t_T",
}

_CANONICAL_SPELLING: dict[str, str] = {
    "T": "T", "p_T": "p_T", "s_T": "S", "Ch_T": "Ch_T", "t_T": "Term",
    "w_T": "w_T", "dt": "dt", "sense": "sense", "clustered_word": "vec",
    "im": "im", "sentence_sense": "ssense", "q": "q", "a": "a", "F": "F",
    "R": "R", "P_c": "C", "Structure": "Structure", "Score": "Score",
    "Entity": "Entity", "Tuples": "Tuples", "Chains": "Chains",
    "PredArg": "Pred(Arg)", "KB": "KB",
}

BUILTIN_VOCABULARY = TermVocabulary(
    spellings=_BASE_SPELLINGS,
    canonical=_CANONICAL_SPELLING,
    labels=ANNOTATION_LABELS,
    set_spellings=frozenset({"terms"}),
)


# ---------------------------------------------------------------------------
# Formal terms and task signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FormalTerm:
    """One slot of a signature's domain or range."""

    base: str | None = None
    required: frozenset[str] = frozenset()
    optional: frozenset[str] = frozenset()
    is_resource: bool = False
    structure: str = SCALAR
    element: "FormalTerm | None" = None
    elements: tuple["FormalTerm", ...] = ()
    optional_term: bool = False  # whole slot may be left unwired
    subscript: str | None = None
    dims: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Signature:
    task_code: str
    dialect: str
    name: str
    variants: tuple[tuple[tuple[FormalTerm, ...], tuple[FormalTerm, ...]], ...]

    @property
    def domain(self) -> tuple[FormalTerm, ...]:
        return self.variants[0][0]

    @property
    def range(self) -> tuple[FormalTerm, ...]:
        return self.variants[0][1]

    @property
    def min_in(self) -> int:
        return min(sum(1 for t in dom if not t.optional_term) for dom, _ in self.variants)

    @property
    def max_in(self) -> int:
        return max(len(dom) for dom, _ in self.variants)

    @property
    def max_out(self) -> int:
        return max(len(rng) for _, rng in self.variants)


def _ft(base: str, req: str = "", opt: str = "", **kw) -> FormalTerm:
    split = lambda s: frozenset(x for x in s.split(",") if x)
    return FormalTerm(base=base, required=split(req), optional=split(opt), **kw)


def _seq(inner: FormalTerm, **kw) -> FormalTerm:
    return FormalTerm(structure=SEQUENCE, element=inner, **kw)


def _setof(inner: FormalTerm, **kw) -> FormalTerm:
    return FormalTerm(structure=SET, element=inner, **kw)


_S = _ft("s_T")
_T = _ft("T")
_KB = _ft("KB", is_resource=True)


def _sig(code: str, name: str, *variants) -> Signature:
    return Signature(code, "sys", name, tuple((tuple(d), tuple(r)) for d, r in variants))


# Ranges add their own labels; the checker additionally carries over the
# labels of same-category inputs (annotation accumulation).
SIGNATURES: tuple[Signature, ...] = (
    _sig("POS", "part-of-speech tagging", ([_S], [_ft("s_T", req="POS")])),
    _sig("SYN", "syntactic parsing", ([_ft("s_T", opt="POS")], [_ft("Structure", subscript="PN")])),
    _sig("NER", "named entity recognition",
         ([_ft("s_T", opt="Chunk")], [_ft("s_T", req="Names,NER")])),
    _sig("WSD", "word sense disambiguation",
         ([_ft("s_T", req="POS,Chunk"), _KB], [_ft("t_T", req="WSD")])),
    _sig("EL", "entity linking",
         ([_ft("s_T", req="NER")], [_ft("Entity"), replace(_KB, optional_term=True)])),
    _sig("SRL", "semantic role labeling",
         ([_ft("s_T", req="Token")], [_ft("s_T", req="Sem,SRL")])),
    _sig("SRC", "semantic relation classification",
         ([_ft("t_T", subscript="1"), _ft("t_T", subscript="2")], [_ft("t_T", req="Sem")])),
    _sig("OIE", "open relation extraction", ([_S], [_ft("PredArg")])),
    _sig("PREDC", "predicate creation",
         ([replace(_T, optional_term=True), replace(_KB, optional_term=True)],
          [_ft("t_T", subscript="New"), _T])),
    _sig("SDQ", "structured data querying", ([_ft("q"), _KB], [_ft("Tuples")])),
    _sig("RET", "text retrieval", ([_T], [_T])),
    _sig("NLG", "natural language generation", ([_ft("PredArg")], [_T])),
    _sig("SIMP", "text simplification", ([_T], [_T])),
    _sig("SUMM", "text summarisation",
         ([_ft("T", opt="Chunk,NER,Arg,Name,Sem")], [_T])),
    _sig("COREF", "co-reference resolution",
         ([_ft("s_T", req="NER")], [_setof(_ft("Chains"))]),
         ([_ft("T", opt="Token")], [_setof(_ft("Chains"))])),
    _sig("RST", "rhetorical structure classification",
         ([_S], [_ft("s_T", req="RS")]),
         ([_ft("s_T", subscript="1"), _ft("s_T", subscript="2")], [_ft("s_T", req="RS")]),
         ([_T], [_ft("T", req="RS")])),
    _sig("ARGSTR", "argumentation structure classification",
         ([_seq(_S), _T], [_ft("T", req="ArgStruct")])),
    _sig("ARGSCH", "argument scheme classification",
         ([_ft("T", req="ArgStruct")], [_ft("P_c", req="ArgScheme")])),
    _sig("POLEM", "polarity and emotion analysis",
         ([_ft("s_T", opt="PredArg")], [_ft("Score")])),
    _sig("RHET", "rhetorical figures analysis", ([_T], [_ft("T", req="RST")])),
    _sig("STRSIM", "string similarity",
         ([_ft("t_T", subscript="1"), _ft("t_T", subscript="2")], [_ft("Score")])),
    _sig("SEMSIM", "semantic similarity",
         ([_setof(_ft("t_T", opt="entity"))], [_ft("Score")])),
    _sig("SEMREL", "semantic relatedness",
         ([_setof(_ft("t_T", opt="entity"))], [_ft("Score")])),
    _sig("IND", "inductive reasoning",
         ([_ft("PredArg", req="F"), replace(_ft("KB", req="R", is_resource=True), optional_term=True),
           _ft("KB", req="Constraints", is_resource=True)],
          [_ft("s_T", opt="PredArg")])),
    _sig("DED", "deductive reasoning",
         ([_ft("PredArg"), _ft("KB", req="F,R", is_resource=True)], [_ft("PredArg")])),
    _sig("ABD", "abductive reasoning",
         ([_ft("PredArg", req="F"), _KB], [_seq(_ft("PredArg"))])),
)


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------

OPERATOR, RESOURCE, NN, META = "operator", "resource", "nn", "meta"


@dataclass(frozen=True)
class SymbolDef:
    code: str
    dialect: str
    name: str
    glyph_id: str
    min_in: int
    max_in: int
    min_out: int
    max_out: int
    category: str
    listed: bool = True  # appears in the dialect's documented symbol listing


def _sym(code, dialect, name, glyph, arity, category, listed=True) -> SymbolDef:
    (lo_in, hi_in), (lo_out, hi_out) = arity
    return SymbolDef(code, dialect, name, glyph, lo_in, hi_in, lo_out, hi_out, category, listed)


_EDGE = ((0, 0), (0, 0))  # notational symbols never appear as nodes

SYMBOLS: tuple[SymbolDef, ...] = (
    _sym("oplus", "sys", "direct sum", "op_oplus", ((2, 8), (1, 1)), OPERATOR),
    _sym("concat", "sys", "concatenation", "op_concat", ((2, 8), (1, 1)), OPERATOR),
    _sym("otimes", "sys", "tensor product", "op_otimes", ((2, 8), (1, 1)), OPERATOR),
    _sym("set", "sys", "set construction", "op_set", ((1, 8), (1, 1)), OPERATOR),
    _sym("flow", "sys", "data flow", "edge_flow", _EDGE, META),
    _sym("biflow", "sys", "data flow, both ways", "edge_biflow", _EDGE, META),
    _sym("query", "sys", "knowledge-base query", "edge_query", _EDGE, META),
    _sym("persist", "sys", "data persistence", "edge_persist", _EDGE, META),
    _sym("cond", "sys", "conditional", "op_cond", ((1, 1), (2, 2)), OPERATOR),
    _sym("interface", "sys", "system interface (service, API)", "op_interface", ((0, 4), (0, 4)), OPERATOR),
    _sym("compose", "sys", "composition", "op_compose", ((2, 2), (1, 1)), OPERATOR),
    _sym("join", "sys", "join", "op_join", ((2, 4), (1, 1)), OPERATOR),
    _sym("sim", "sys", "similarity and relatedness (cosine unless specified)", "op_sim",
         ((1, 2), (1, 1)), OPERATOR),
    _sym("proj", "sys", "embedding projection", "op_proj", ((1, 1), (1, 1)), OPERATOR),
    _sym("w2v", "sys", "word2vec embedding space", "res_w2v", ((0, 1), (1, 1)), RESOURCE),
    _sym("regression", "sys", "regression model", "op_regression", ((1, 2), (1, 1)), OPERATOR),
    _sym("classifier", "sys", "classifier component", "box_classifier", ((1, 2), (1, 1)), OPERATOR),
    _sym("classification", "sys", "classification outcome", "op_classification", ((1, 2), (1, 1)), OPERATOR),
    _sym("rank", "sys", "ranking, top n elements", "op_rank", ((1, 1), (1, 1)), OPERATOR),
    _sym("encoder", "sys", "encoder", "op_encoder", ((1, 2), (1, 1)), OPERATOR),
    _sym("decoder", "sys", "decoder", "op_decoder", ((1, 2), (1, 1)), OPERATOR),
    _sym("entail", "sys", "entailment / deductive step", "op_entail", ((1, 3), (1, 1)), OPERATOR),
    _sym("verify", "sys", "verification (user validation)", "op_verify", ((1, 1), (1, 1)), OPERATOR),
    _sym("func", "sys", "generic function", "op_func", ((1, 8), (1, 1)), OPERATOR),
    _sym("func_contract", "sys", "function contraction", "op_func_contract", ((1, 8), (1, 1)), OPERATOR),
    _sym("dataset", "sys", "dataset / data resource", "res_dataset", ((0, 8), (0, 8)), RESOURCE),
    _sym("gold", "sys", "gold standard", "res_gold", ((0, 8), (0, 8)), RESOURCE),
    _sym("kbfn", "sys", "knowledge base of functions", "res_kbfn", ((0, 8), (0, 8)), RESOURCE),
    _sym("zoom", "sys", "zoom-in detail box", "grp_zoom", _EDGE, META),
    _sym("acc", "sys", "accuracy annotation", "meta_acc", _EDGE, META),
    # Auxiliary resource: knowledge bases appear throughout the signature
    # table and the @kb source tag, but have no symbol-listing row of
    # their own.
    _sym("kb", "sys", "knowledge base", "res_kb", ((0, 8), (0, 8)), RESOURCE, listed=False),
    _sym("loss", "nn", "loss function", "nn_loss", ((1, 4), (1, 1)), NN),
    _sym("activation", "nn", "activation function", "nn_activation", ((1, 1), (1, 1)), NN),
    _sym("softmax", "nn", "softmax", "nn_softmax", ((1, 1), (1, 1)), NN),
    _sym("attention", "nn", "attention", "nn_attention", ((1, 3), (1, 1)), NN),
    _sym("lstm", "nn", "recurrent layer (LSTM)", "nn_lstm", ((1, 2), (1, 1)), NN),
    _sym("bilstm", "nn", "bidirectional LSTM layer", "nn_bilstm", ((1, 2), (1, 1)), NN),
    _sym("gru", "nn", "GRU layer", "nn_gru", ((1, 2), (1, 1)), NN),
    _sym("conv", "nn", "convolutional layer", "nn_conv", ((1, 2), (1, 1)), NN),
    _sym("recnn", "nn", "recursive neural network", "nn_recnn", ((1, 2), (1, 1)), NN),
    _sym("svm", "nn", "support vector machine", "nn_svm", ((1, 2), (1, 1)), NN),
    _sym("ground_truth", "nn", "ground-truth labels", "nn_ground_truth", ((0, 1), (1, 1)), NN),
    _sym("hidden_fwd", "nn", "hidden layer, forward", "nn_hidden_fwd", ((1, 2), (1, 1)), NN),
    _sym("hidden_bwd", "nn", "hidden layer, backward", "nn_hidden_bwd", ((1, 2), (1, 1)), NN),
)

# Node kind implied by a code (tasks are always kind "task").
_KIND_OVERRIDES = {
    "classifier": "classifier", "classification": "classifier", "regression": "classifier",
    "func": "function", "func_contract": "function",
    "verify": "verify", "interface": "io", "ground_truth": "resource",
}


def kind_for_symbol(symbol: SymbolDef) -> str:
    if symbol.code in _KIND_OVERRIDES:
        return _KIND_OVERRIDES[symbol.code]
    if symbol.category == RESOURCE:
        return "resource"
    if symbol.category == NN:
        return "nn_layer"
    return "operator"


@dataclass(frozen=True)
class Resolution:
    """Outcome of resolving a node code against a dialect scope."""

    kind: str
    signature: Signature | None = None
    symbol: SymbolDef | None = None
    is_extension: bool = False

    @property
    def min_in(self) -> int:
        return self.signature.min_in if self.signature else self.symbol.min_in

    @property
    def max_in(self) -> int:
        return self.signature.max_in if self.signature else self.symbol.max_in

    @property
    def max_out(self) -> int:
        return self.signature.max_out if self.signature else self.symbol.max_out


class Registry:
    """Builtin tables plus a per-compilation extension overlay."""

    def __init__(self) -> None:
        self._ext_symbols: dict[str, SymbolDef] = {}
        self._ext_signatures: dict[str, Signature] = {}
        self._ext_labels: set[str] = set()

    # -- lookups ----------------------------------------------------------

    def lookup_signature(self, task_code: str, dialects: frozenset[str]) -> Signature:
        for sig in SIGNATURES:
            if sig.task_code == task_code and sig.dialect in dialects:
                return sig
        if task_code in self._ext_signatures:
            return self._ext_signatures[task_code]
        raise UnknownTask(f"unknown task code {task_code!r}")

    def lookup_symbol(self, code: str, dialects: frozenset[str]) -> SymbolDef:
        for sym in SYMBOLS:
            if sym.code == code and sym.dialect in dialects:
                return sym
        if code in self._ext_symbols:
            return self._ext_symbols[code]
        raise UnknownSymbol(f"unknown symbol {code!r} in dialects {sorted(dialects)}")

    def list_symbols(self, dialect: str) -> list[SymbolDef]:
        if dialect not in DIALECTS:
            raise UnknownDialect(f"unknown dialect {dialect!r}")
        return [s for s in SYMBOLS if s.dialect == dialect and s.listed]

    def list_signatures(self, dialect: str) -> list[Signature]:
        if dialect not in DIALECTS:
            raise UnknownDialect(f"unknown dialect {dialect!r}")
        return [s for s in SIGNATURES if s.dialect == dialect]

    def resolve(self, code: str, dialects: frozenset[str]) -> Resolution | None:
        """Resolve a node code to its kind; None when nothing matches."""
        try:
            sig = self.lookup_signature(code, dialects)
            return Resolution("task", signature=sig, is_extension=code in self._ext_signatures)
        except UnknownTask:
            pass
        try:
            sym = self.lookup_symbol(code, dialects)
        except UnknownSymbol:
            return None
        if sym.category == META:
            return None  # flow arrows, zoom boxes, acc badges: not node codes
        return Resolution(kind_for_symbol(sym), symbol=sym, is_extension=code in self._ext_symbols)

    # -- extensions ---------------------------------------------------------

    def register_extension(self, definition: SymbolDef | Signature) -> None:
        code = definition.code if isinstance(definition, SymbolDef) else definition.task_code
        if any(s.code == code for s in SYMBOLS) or any(s.task_code == code for s in SIGNATURES):
            raise CollidesWithBuiltin(f"{code!r} is a builtin code")
        if isinstance(definition, SymbolDef):
            self._ext_symbols[code] = definition
        else:
            self._ext_signatures[code] = definition
            for dom, rng in definition.variants:
                for term in (*dom, *rng):
                    self._collect_labels(term)

    def _collect_labels(self, term: FormalTerm) -> None:
        self._ext_labels.update(term.required | term.optional)
        if term.element is not None:
            self._collect_labels(term.element)
        for el in term.elements:
            self._collect_labels(el)

    def register_label(self, label: str) -> None:
        self._ext_labels.add(label)

    @property
    def vocabulary(self) -> TermVocabulary:
        if not self._ext_labels:
            return BUILTIN_VOCABULARY
        return BUILTIN_VOCABULARY.with_extra_labels(frozenset(self._ext_labels))


BUILTIN = Registry()


def category_codes(core_only: bool = False) -> list[str]:
    return [c.code for c in DATA_CATEGORIES if c.core or not core_only]
