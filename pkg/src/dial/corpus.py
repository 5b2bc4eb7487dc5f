"""Corpus runner: compiles every authored example, compares diagnostics to
the sidecar expectations, and compares rendered bytes to the golden files.

Layout on disk:

  corpus/pass/NAME.dial     compiles with zero errors and zero warnings
  corpus/fail/NAME.dial     exercises one diagnostic
  corpus/NAME.expect        sidecar: expected codes, one per line
  corpus/golden/NAME.svg    frozen renderer output (pass cases only)
  corpus/golden/NAME.tex

Golden files change only with an explicit toolchain version bump.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import layout
from . import lint as lint_mod
from . import render
from .cli import CompileResult, compile_file
from .registry import Registry

DEFAULT_ROOT = Path(__file__).resolve().parents[2] / "corpus"

# Edge flow kinds that realize a registered symbol.
_EDGE_SYMBOLS = {"flow": "flow", "biflow": "biflow", "persist": "persist",
                 "query": "query", "interface": "interface"}


@dataclass(frozen=True)
class CorpusCase:
    name: str
    source: Path
    expect: Path
    should_pass: bool
    golden_svg: Path | None = None
    golden_tikz: Path | None = None


@dataclass
class CaseResult:
    case: CorpusCase
    ok: bool
    failures: list[str] = field(default_factory=list)
    codes: list[str] = field(default_factory=list)
    result: CompileResult | None = None


@dataclass
class CorpusReport:
    results: list[CaseResult]
    sys_codes: frozenset[str]
    nn_codes: frozenset[str]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)


def discover(root: Path = DEFAULT_ROOT) -> list[CorpusCase]:
    cases: list[CorpusCase] = []
    for bucket, should_pass in (("pass", True), ("fail", False)):
        for source in sorted((root / bucket).glob("*.dial")):
            name = source.stem
            golden_svg = root / "golden" / f"{name}.svg"
            golden_tikz = root / "golden" / f"{name}.tex"
            cases.append(CorpusCase(
                name=name,
                source=source,
                expect=source.with_suffix(".expect"),
                should_pass=should_pass,
                golden_svg=golden_svg if should_pass else None,
                golden_tikz=golden_tikz if should_pass else None,
            ))
    return cases


def run_case(case: CorpusCase) -> CaseResult:
    result = compile_file(str(case.source))
    codes = [d.code for d in result.diagnostics]

    out = CaseResult(case, ok=True, codes=codes, result=result)

    expected = case.expect.read_text(encoding="utf-8") if case.expect.exists() else ""
    actual = "".join(f"{code}\n" for code in codes)
    if actual != expected:
        out.ok = False
        out.failures.append(
            f"diagnostic codes {codes} do not match {case.expect.name}")

    if case.should_pass:
        if result.typed is None:
            out.ok = False
            out.failures.append("expected a clean compile")
            return out
        lay = layout.layout(result.typed.diagram)
        warnings = lint_mod.lint(result.typed, lay, result.registry)
        if warnings:
            out.ok = False
            out.failures.append(
                "lint warnings on a pass case: " + " ".join(d.code for d in warnings))
        svg = render.render_svg(result.typed, lay, registry=result.registry)
        tikz = render.render_tikz(result.typed, lay, registry=result.registry)
        for golden, text, kind in ((case.golden_svg, svg, "svg"),
                                   (case.golden_tikz, tikz, "tikz")):
            if golden is None:
                continue
            if not golden.exists():
                out.ok = False
                out.failures.append(f"missing golden {kind} file {golden.name}")
            elif golden.read_bytes() != text.encode("utf-8"):
                out.ok = False
                out.failures.append(f"{kind} output differs from {golden.name}")
    return out


def write_goldens(root: Path = DEFAULT_ROOT) -> list[Path]:
    """Regenerate the golden files (explicit version bumps only)."""
    written: list[Path] = []
    (root / "golden").mkdir(exist_ok=True)
    for case in discover(root):
        if not case.should_pass:
            continue
        result = compile_file(str(case.source))
        if result.typed is None:
            raise RuntimeError(f"{case.name} no longer compiles")
        lay = layout.layout(result.typed.diagram)
        case.golden_svg.write_bytes(
            render.render_svg(result.typed, lay, registry=result.registry).encode("utf-8"))
        case.golden_tikz.write_bytes(
            render.render_tikz(result.typed, lay, registry=result.registry).encode("utf-8"))
        written.extend([case.golden_svg, case.golden_tikz])
    return written


def used_codes(results: list[CaseResult]) -> tuple[frozenset[str], frozenset[str]]:
    """Registry codes exercised by the pass cases, split by dialect."""
    registry = Registry()
    sys_codes: set[str] = set()
    nn_codes: set[str] = set()
    sys_symbols = {s.code for s in registry.list_symbols("sys")}
    sys_tasks = {s.task_code for s in registry.list_signatures("sys")}
    nn_symbols = {s.code for s in registry.list_symbols("nn")}
    for item in results:
        if not item.case.should_pass or item.result is None or item.result.diagram is None:
            continue
        diagram = item.result.diagram
        for node in diagram.nodes:
            if node.code in sys_symbols or node.code in sys_tasks:
                sys_codes.add(node.code)
            if node.code in nn_symbols:
                nn_codes.add(node.code)
        for edge in diagram.edges:
            symbol = _EDGE_SYMBOLS.get(edge.flow_kind)
            if symbol:
                sys_codes.add(symbol)
        if diagram.groups:
            sys_codes.add("zoom")
        if any(node.perf for node in diagram.nodes):
            sys_codes.add("acc")
    return frozenset(sys_codes), frozenset(nn_codes)


def corpus_suite(root: Path = DEFAULT_ROOT) -> CorpusReport:
    results = [run_case(case) for case in discover(root)]
    sys_codes, nn_codes = used_codes(results)
    return CorpusReport(results, sys_codes, nn_codes)


def main() -> int:
    report = corpus_suite()
    for item in report.results:
        status = "ok" if item.ok else "FAIL"
        print(f"{status:4} {item.case.name}" + ("" if item.ok else f"  {item.failures}"))
    print(f"coverage: {len(report.sys_codes)} sys codes, {len(report.nn_codes)} nn codes")
    return 0 if report.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
