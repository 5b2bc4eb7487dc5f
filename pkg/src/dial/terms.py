"""Data terms: a base category decorated with superscript labels, an optional
subscript qualifier, tensor dimensions, and a structure wrapper.

The textual form is ASCII; renderers translate to glyphs:

  S^NER            category s_T, labels {NER}
  S^{NER,POS}      multiple labels
  Term_New         subscript qualifier
  vec[300]         dimensions
  {Term}           set-of
  (S, T)           tuple
  P_entail[0,1]    classification outcome with distribution range

Base spellings are resolved against a :class:`TermVocabulary`; the builtin
vocabulary lives in :mod:`dial.registry`. Sequence structure (the output of
ranking) is inference-only and has no source syntax.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

SCALAR = "scalar"
SET = "set"
SEQUENCE = "sequence"
TUPLE = "tuple"
DIST = "dist"


class TermError(ValueError):
    """Malformed data-term literal (surfaces as E004)."""

    def __init__(self, message: str, pos: int = 0) -> None:
        super().__init__(message)
        self.pos = pos  # character offset into the literal


@dataclass(frozen=True)
class DataTerm:
    base: str | None = None
    annotations: frozenset[str] = frozenset()
    subscript: str | None = None
    dims: tuple[int, ...] | None = None
    structure: str = SCALAR
    element: "DataTerm | None" = None  # set / sequence payload
    elements: tuple["DataTerm", ...] = ()  # tuple payload
    max_len: int | None = None  # sequence bound, e.g. top-n
    dist_range: tuple[float, float] | None = None

    def core(self) -> "DataTerm":
        """Innermost carrier term for set/sequence wrappers."""
        term = self
        while term.element is not None:
            term = term.element
        return term

    def with_labels(self, labels: frozenset[str]) -> "DataTerm":
        if self.element is not None:
            return replace(self, element=self.element.with_labels(labels))
        return replace(self, annotations=self.annotations | labels)

    def all_labels(self) -> frozenset[str]:
        if self.structure == TUPLE:
            out: frozenset[str] = frozenset()
            for el in self.elements:
                out |= el.all_labels()
            return out
        return self.core().annotations

    def to_literal(self) -> str:
        return format_term(self)


@dataclass(frozen=True)
class TermVocabulary:
    """Spelling and label tables the term parser resolves against."""

    spellings: dict[str, str]  # source spelling -> category code
    canonical: dict[str, str]  # category code -> preferred spelling
    labels: frozenset[str]
    set_spellings: frozenset[str] = frozenset()  # spellings that imply set-of
    extra_labels: frozenset[str] = frozenset()  # per-compilation extension labels

    def with_extra_labels(self, labels: frozenset[str]) -> "TermVocabulary":
        return replace(self, extra_labels=self.extra_labels | labels)

    def knows_label(self, label: str) -> bool:
        return label in self.labels or label in self.extra_labels


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[\^\{\}\(\)\[\],]))"
)


def _lex_literal(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise TermError(f"unexpected character {text[pos:].strip()[0]!r}", pos)
        kind = m.lastgroup or "punct"
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class TermParser:
    """Recursive descent over simple (kind, text, pos) triples.

    Shared between :func:`parse_term` (standalone literals) and the DSL
    parser, which feeds its own token stream through :meth:`parse` and reads
    :attr:`index` afterwards to know where the term ended. With
    ``vocab=None`` the parser checks structure only; base and label names
    pass through unresolved (the DSL front end uses this to find a term's
    extent before extensions are registered).
    """

    def __init__(self, tokens: list[tuple[str, str, int]],
                 vocab: TermVocabulary | None) -> None:
        self.tokens = tokens
        self.vocab = vocab
        self.index = 0

    def _peek(self) -> tuple[str, str, int] | None:
        if self.index < len(self.tokens):
            return self.tokens[self.index]
        return None

    def _take(self, text: str | None = None, kind: str | None = None) -> tuple[str, str, int]:
        tok = self._peek()
        if tok is None:
            raise TermError(f"term ended early, expected {text or kind}", self._end_pos())
        if text is not None and tok[1] != text:
            raise TermError(f"expected {text!r}, found {tok[1]!r}", tok[2])
        if kind is not None and tok[0] != kind:
            raise TermError(f"expected {kind}, found {tok[1]!r}", tok[2])
        self.index += 1
        return tok

    def _end_pos(self) -> int:
        return self.tokens[-1][2] + len(self.tokens[-1][1]) if self.tokens else 0

    def parse(self) -> DataTerm:
        tok = self._peek()
        if tok is None:
            raise TermError("empty data term", 0)
        kind, text, pos = tok
        if text == "(":
            return self._parse_tuple()
        if text == "{":
            self._take("{")
            inner = self.parse()
            self._take("}")
            return DataTerm(structure=SET, element=inner)
        if kind != "ident":
            raise TermError(f"expected a data term, found {text!r}", pos)
        return self._parse_base()

    def _parse_tuple(self) -> DataTerm:
        self._take("(")
        elements = [self.parse()]
        while self._peek() and self._peek()[1] == ",":
            self._take(",")
            elements.append(self.parse())
        self._take(")")
        if len(elements) == 1:
            return elements[0]
        return DataTerm(structure=TUPLE, elements=tuple(elements))

    def _parse_base(self) -> DataTerm:
        _, text, pos = self._take(kind="ident")

        # Classification outcome with an explicit range: P_<class>[a,b].
        if text.startswith("P_") and self._peek() and self._peek()[1] == "[":
            sub = text[2:]
            self._take("[")
            lo = float(self._take(kind="num")[1])
            self._take(",")
            hi = float(self._take(kind="num")[1])
            self._take("]")
            if lo > hi:
                raise TermError(f"distribution range [{lo:g},{hi:g}] is inverted", pos)
            sub = None if sub in ("", "c") else sub
            return DataTerm(base="P_c", subscript=sub, structure=DIST, dist_range=(lo, hi))

        # Predicate-argument structure keeps its traditional Pred(Arg) spelling.
        if text == "Pred" and self._peek() and self._peek()[1] == "(":
            self._take("(")
            self._take("Arg")
            self._take(")")
            base, subscript, as_set = "PredArg", None, False
        else:
            base, subscript, as_set = self._resolve_base(text, pos)

        labels = self._parse_sup()
        dims = self._parse_dims()
        term = DataTerm(base=base, annotations=labels, subscript=subscript, dims=dims)
        if as_set:
            term = DataTerm(structure=SET, element=term)
        return term

    def _resolve_base(self, text: str, pos: int) -> tuple[str, str | None, bool]:
        if self.vocab is None:
            return text, None, False
        if text in self.vocab.spellings:
            return self.vocab.spellings[text], None, text in self.vocab.set_spellings
        if "_" in text:
            head, _, sub = text.partition("_")
            if head in self.vocab.spellings and sub:
                return self.vocab.spellings[head], sub, head in self.vocab.set_spellings
        raise TermError(f"unknown data category {text!r}", pos)

    def _parse_sup(self) -> frozenset[str]:
        if not self._peek() or self._peek()[1] != "^":
            return frozenset()
        self._take("^")
        labels: list[str] = []
        if self._peek() and self._peek()[1] == "{":
            self._take("{")
            labels.append(self._take_label())
            while self._peek() and self._peek()[1] == ",":
                self._take(",")
                labels.append(self._take_label())
            self._take("}")
        else:
            labels.append(self._take_label())
        return frozenset(labels)

    def _take_label(self) -> str:
        _, text, pos = self._take(kind="ident")
        if text == "Pred" and self._peek() and self._peek()[1] == "(":
            self._take("(")
            self._take("Arg")
            self._take(")")
            text = "PredArg"
        if self.vocab is not None and not self.vocab.knows_label(text):
            raise TermError(f"unknown classification label {text!r}", pos)
        return text

    def _parse_dims(self) -> tuple[int, ...] | None:
        if not self._peek() or self._peek()[1] != "[":
            return None
        self._take("[")
        dims = [self._take_dim()]
        while self._peek() and self._peek()[1] == ",":
            self._take(",")
            dims.append(self._take_dim())
        self._take("]")
        return tuple(dims)

    def _take_dim(self) -> int:
        _, text, pos = self._take(kind="num")
        if "." in text or int(text) < 1:
            raise TermError(f"dimension must be a positive integer, got {text}", pos)
        return int(text)


def parse_term(literal: str, vocab: TermVocabulary) -> DataTerm:
    """Parse a standalone data-term literal; raises TermError on any defect."""
    parser = TermParser(_lex_literal(literal), vocab)
    term = parser.parse()
    leftover = parser._peek()
    if leftover is not None:
        raise TermError(f"trailing input {leftover[1]!r} after data term", leftover[2])
    return term


def format_term(term: DataTerm, canonical: dict[str, str] | None = None) -> str:
    """Canonical ASCII rendering; the inverse of parse_term on its image."""
    canonical = canonical if canonical is not None else _FALLBACK_CANONICAL
    if term.structure == TUPLE:
        return "(" + ", ".join(format_term(t, canonical) for t in term.elements) + ")"
    if term.structure == SET:
        return "{" + format_term(term.element, canonical) + "}"
    if term.structure == SEQUENCE:
        bound = f"<={term.max_len}" if term.max_len is not None else ""
        return f"[{format_term(term.element, canonical)}]{bound}"
    if term.structure == DIST:
        lo, hi = term.dist_range
        out = f"P_{term.subscript or 'c'}[{_fmt_num(lo)},{_fmt_num(hi)}]"
        return out + _fmt_sup(term.annotations)
    spelling = canonical.get(term.base, term.base or "?")
    if term.subscript:
        spelling = f"{spelling}_{term.subscript}"
    out = spelling + _fmt_sup(term.annotations)
    if term.dims is not None:
        out += "[" + ",".join(str(d) for d in term.dims) + "]"
    return out


def _fmt_sup(annotations: frozenset[str]) -> str:
    labels = sorted(annotations)
    if not labels:
        return ""
    if len(labels) == 1:
        return f"^{labels[0]}"
    return "^{" + ",".join(labels) + "}"


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)


# Used only when no vocabulary is in scope (debug printing of raw terms).
_FALLBACK_CANONICAL: dict[str, str] = {}
