"""Command-line entry point: ``treelogic problem.txt``."""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from .dtd import DtdError
from .formula import FormulaError, pretty_print
from .modelcheck import holds_somewhere
from .parser import Expander, SpecError, parse_spec
from .solver import Solver, SolverTimeout, mark_witness
from .trees import decode, term_print, to_xml
from .xpath import XPathError

EXIT_SAT, EXIT_UNSAT, EXIT_ERROR, EXIT_TIMEOUT = 0, 1, 2, 3


@dataclass
class RunConfig:
    input: Path
    quiet: bool = False
    xml_out: Path | None = None
    timeout: float = 60.0
    strict_dtd: bool = False
    oracle_check: bool = False


def _ms(t0: float) -> str:
    return f"[{round((time.perf_counter() - t0) * 1000)} ms]"


def run(config: RunConfig, out: TextIO | None = None, err: TextIO | None = None) -> int:
    """Solve one problem file, printing the trace; returns the exit code."""
    out = out or sys.stdout
    err = err or sys.stderr

    def say(line: str = "", end: str = "\n") -> None:
        if not config.quiet:
            print(line, end=end, file=out, flush=True)

    start = time.perf_counter()
    say(f"Reading {config.input}")
    try:
        text = config.input.read_text(encoding="utf-8")
        expander = Expander(config.input.parent, config.strict_dtd)
        goal = expander.expand_spec(parse_spec(text))
        for s in expander.schemas:
            say(f"Converted tree grammar into BTT [{round(s.btt_ms)} ms].")
            say(f"Translated BTT into Tree Logic [{round(s.logic_ms)} ms].")
        solver = Solver(goal, timeout=config.timeout)
        say()
        say("Satisfiability Tested Formula:")
        say(pretty_print(solver.tested))
        say()
        say("Computing Relevant Closure")
        t0 = time.perf_counter()
        solver.compute_closure()
        say(f"Computed Relevant Closure {_ms(t0)}.")
        t0 = time.perf_counter()
        ln = solver.compute_lean()
        say(f"Computed Lean {_ms(t0)}.")
        say(f"Lean size is {ln.size}. It contains {ln.eventualities} eventualities "
            f"and {ln.symbols} symbols.")
        say("Computing Fixpoint", end="")
        t0 = time.perf_counter()
        try:
            sat = solver.fixpoint(on_iteration=lambda _: say(".", end=""))
        except SolverTimeout:
            say()
            print(f"Timeout: no verdict within {config.timeout:g} s.", file=out)
            return EXIT_TIMEOUT
        say(_ms(t0) + ".")
        if not sat:
            print(f"Formula is unsatisfiable {_ms(start)}.", file=out)
            return EXIT_UNSAT
        print(f"Formula is satisfiable {_ms(start)}.", file=out)
        t0 = time.perf_counter()
        witness = mark_witness(solver.extract_witness(), goal, expander.contexts)
        if config.oracle_check and not holds_somewhere(goal, witness):
            print("error: the witness does not satisfy the formula", file=err)
            return EXIT_ERROR
        xml = to_xml(decode(witness))
        say(f"A satisfying finite binary tree model was found {_ms(t0)}:")
        say(term_print(witness))
        say("In XML syntax:")
        say(xml)
        if config.xml_out is not None:
            config.xml_out.write_text(xml + "\n", encoding="utf-8")
        return EXIT_SAT
    except (OSError, SpecError, XPathError, DtdError, FormulaError) as e:
        print(f"error: {e}", file=err)
        return EXIT_ERROR
    except RecursionError:
        print("error: formula too deeply nested", file=err)
        return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="treelogic",
        description="Satisfiability solver for a tree logic with XPath and DTD predicates.",
    )
    p.add_argument("input", type=Path, help="problem specification file")
    p.add_argument("--quiet", action="store_true", help="print only the verdict line")
    p.add_argument("--xml-out", type=Path, metavar="PATH", help="write the witness XML to PATH")
    p.add_argument("--timeout", type=float, default=60.0, metavar="SECONDS",
                   help="wall-clock budget for the fixpoint (default 60)")
    p.add_argument("--strict-dtd", action="store_true",
                   help="reject DTDs that reference undeclared elements")
    p.add_argument("--oracle-check", action="store_true",
                   help="model-check the witness before printing it")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_SAT
    config = RunConfig(args.input, args.quiet, args.xml_out, args.timeout, args.strict_dtd,
                       args.oracle_check)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
