"""Command-line front end.

  dial check FILE...  [--json]                parse, lower, validate, type-check
  dial lint  FILE...  [--deny warnings] [--allow Wxxx] [--json] [--list]
  dial render FILE -o OUT [--format svg|tikz] [--debug-layout]
  dial fmt   FILE [--write | --check]
  dial symbols [--dialect sys|nn] [--json]

Exit codes: 0 clean, 1 error-level diagnostics (or warnings under --deny,
or a non-canonical file under fmt --check), 2 usage or I/O failure.
Diagnostics go to stderr; --json replaces them with one JSON array on
stdout. Rendered artifacts and formatted sources never mix with
diagnostics. NO_COLOR suppresses ANSI colors.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, layout, lint as lint_mod, render
from .diagnostics import Diagnostic, dump_json, has_errors
from .model import Diagram, validate_structure
from .parser import LoweredUnit, format_source, lower, parse, tokenize
from .registry import DIALECTS, Registry
from .typecheck import TypedDiagram, check_diagram


@dataclass
class CompileResult:
    file: str
    diagnostics: list[Diagnostic] = field(default_factory=list)
    diagram: Diagram | None = None
    registry: Registry | None = None
    typed: TypedDiagram | None = None

    @property
    def failed(self) -> bool:
        return has_errors(self.diagnostics)


def compile_source(source: str, file_name: str = "<string>") -> CompileResult:
    """Front half of the pipeline: parse, lower, validate, type-check."""
    result = CompileResult(file_name)
    tokens, diags = tokenize(source)
    result.diagnostics.extend(diags)
    ast, diags = parse(tokens)
    result.diagnostics.extend(diags)
    if ast is None or has_errors(result.diagnostics):
        result.diagnostics = _located(result.diagnostics, file_name, {})
        return result

    unit: LoweredUnit = lower(ast)
    result.diagnostics.extend(unit.diagnostics)
    result.diagram = unit.diagram
    result.registry = unit.registry
    if unit.diagram is None or has_errors(result.diagnostics):
        result.diagnostics = _located(result.diagnostics, file_name, unit.spans)
        return result

    result.diagnostics.extend(validate_structure(unit.diagram, unit.registry))
    if not has_errors(result.diagnostics):
        result.typed = check_diagram(unit.diagram, unit.registry)
        result.diagnostics.extend(result.typed.diagnostics)
    result.diagnostics = _located(result.diagnostics, file_name, unit.spans)
    return result


def read_source(path: str) -> str:
    """UTF-8 with BOM tolerance; undecodable bytes surface as E001."""
    return Path(path).read_bytes().decode("utf-8-sig", errors="replace")


def compile_file(path: str) -> CompileResult:
    return compile_source(read_source(path), path)


def _located(diagnostics: list[Diagnostic], file_name: str, spans) -> list[Diagnostic]:
    out = []
    for diag in diagnostics:
        span = diag.span or (spans.get(diag.ir_path) if diag.ir_path else None)
        out.append(diag.with_location(file_name, span))
    return out


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


_COLORS = {"error": "\x1b[31m", "warning": "\x1b[33m"}
_RESET = "\x1b[0m"


def _use_color(stream) -> bool:
    if os.environ.get("NO_COLOR"):
        return False
    return bool(getattr(stream, "isatty", lambda: False)())


def _print_human(diagnostics: list[Diagnostic], stream) -> None:
    color = _use_color(stream)
    for diag in diagnostics:
        line = diag.render_human()
        if color:
            line = _COLORS[diag.severity] + line + _RESET
        print(line, file=stream)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_check(args, stdout, stderr) -> int:
    all_diags: list[Diagnostic] = []
    worst = 0
    for path in args.files:
        try:
            result = compile_file(path)
        except OSError as exc:
            print(f"dial: cannot read {path}: {exc}", file=stderr)
            return 2
        all_diags.extend(result.diagnostics)
        if result.failed:
            worst = 1
    if args.json:
        dump_json(all_diags, stdout)
    else:
        _print_human(all_diags, stderr)
    return worst


def _cmd_lint(args, stdout, stderr) -> int:
    if args.list:
        for rule in lint_mod.RULES:
            print(f"{rule.code}  {rule.description}", file=stdout)
        return 0
    if not args.files:
        print("dial lint: at least one FILE is required", file=stderr)
        return 2
    disabled = frozenset(args.allow or ())
    all_diags: list[Diagnostic] = []
    worst = 0
    saw_warnings = False
    for path in args.files:
        try:
            result = compile_file(path)
        except OSError as exc:
            print(f"dial: cannot read {path}: {exc}", file=stderr)
            return 2
        diags = list(result.diagnostics)
        if result.typed is not None:
            lay = layout.layout(result.typed.diagram)
            lint_diags = lint_mod.lint(result.typed, lay, result.registry, disabled)
            diags.extend(d.with_location(path, None) for d in lint_diags)
        all_diags.extend(diags)
        if result.failed:
            worst = 1
        if any(d.severity == "warning" for d in diags):
            saw_warnings = True
    if args.json:
        dump_json(all_diags, stdout)
    else:
        _print_human(all_diags, stderr)
    if args.deny == "warnings" and saw_warnings:
        worst = max(worst, 1)
    return worst


def _cmd_render(args, stdout, stderr) -> int:
    try:
        result = compile_file(args.files[0])
    except OSError as exc:
        print(f"dial: cannot read {args.files[0]}: {exc}", file=stderr)
        return 2
    _print_human(result.diagnostics, stderr)
    if result.failed or result.typed is None:
        print("dial render: refusing to write output with errors present",
              file=stderr)
        return 1
    lay = layout.layout(result.typed.diagram)
    if args.debug_layout:
        stderr.write(layout.debug_dump(result.typed.diagram, lay))
    if args.format == "tikz":
        text = render.render_tikz(result.typed, lay, registry=result.registry)
    else:
        text = render.render_svg(result.typed, lay, registry=result.registry)
    try:
        Path(args.output).write_text(text, encoding="utf-8")
    except OSError as exc:
        print(f"dial: cannot write {args.output}: {exc}", file=stderr)
        return 2
    return 0


def _cmd_fmt(args, stdout, stderr) -> int:
    path = args.files[0]
    try:
        source = read_source(path)
    except OSError as exc:
        print(f"dial: cannot read {path}: {exc}", file=stderr)
        return 2
    formatted, diagnostics = format_source(source)
    if formatted is None:
        _print_human([d.with_location(path, d.span) for d in diagnostics], stderr)
        return 1
    if args.check:
        return 0 if formatted == source else 1
    if args.write:
        if formatted != source:
            Path(path).write_text(formatted, encoding="utf-8")
        return 0
    stdout.write(formatted)
    return 0


def _cmd_symbols(args, stdout, stderr) -> int:
    registry = Registry()
    dialects = [args.dialect] if args.dialect else list(DIALECTS)
    rows = []
    for dialect in dialects:
        for sym in registry.list_symbols(dialect):
            mark = render.GLYPH_TABLE[sym.glyph_id].mark
            glyph = render.SVG_MARKS.get(mark, "") if mark else ""
            rows.append({
                "code": sym.code, "dialect": sym.dialect, "glyph": glyph,
                "shape": render.GLYPH_TABLE[sym.glyph_id].primitive,
                "description": sym.name,
                "arity": [sym.min_in, sym.max_in, sym.min_out, sym.max_out],
            })
    if args.json:
        import json

        json.dump(rows, stdout, indent=2, ensure_ascii=True)
        stdout.write("\n")
    else:
        for row in rows:
            print(f"{row['code']:<16}{row['glyph'] or row['shape']:<12}"
                  f"{row['description']}", file=stdout)
    return 0


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dial", description="compiler toolchain for the DIAL diagram language")
    parser.add_argument("--version", action="version", version=f"dial {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="parse, validate and type-check")
    p_check.add_argument("files", metavar="FILE", nargs="+")
    p_check.add_argument("--json", action="store_true")

    p_lint = sub.add_parser("lint", help="check plus style rules")
    p_lint.add_argument("files", metavar="FILE", nargs="*")
    p_lint.add_argument("--deny", choices=["warnings"])
    p_lint.add_argument("--allow", action="append", metavar="Wxxx")
    p_lint.add_argument("--json", action="store_true")
    p_lint.add_argument("--list", action="store_true", help="list the rules")

    p_render = sub.add_parser("render", help="render to SVG or TikZ")
    p_render.add_argument("files", metavar="FILE", nargs=1)
    p_render.add_argument("-o", "--output", required=True)
    p_render.add_argument("--format", choices=["svg", "tikz"], default="svg")
    p_render.add_argument("--debug-layout", action="store_true")

    p_fmt = sub.add_parser("fmt", help="canonical formatting")
    p_fmt.add_argument("files", metavar="FILE", nargs=1)
    group = p_fmt.add_mutually_exclusive_group()
    group.add_argument("--write", action="store_true", help="rewrite in place")
    group.add_argument("--check", action="store_true",
                       help="exit 1 if the file is not canonical")

    p_sym = sub.add_parser("symbols", help="list the registered symbols")
    p_sym.add_argument("--dialect", choices=list(DIALECTS))
    p_sym.add_argument("--json", action="store_true")
    return parser


_COMMANDS = {
    "check": _cmd_check,
    "lint": _cmd_lint,
    "render": _cmd_render,
    "fmt": _cmd_fmt,
    "symbols": _cmd_symbols,
}


def run(argv: list[str], stdin=None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    parser = _build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return _COMMANDS[args.command](args, stdout, stderr)
    except BrokenPipeError:
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
