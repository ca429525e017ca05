from __future__ import annotations

import io
import re
import subprocess
import sys

import pytest

from support import FIXTURES, mask_timings
from treelogic.cli import RunConfig, main, run
from treelogic.dtd import DtdWarning
from treelogic.trees import from_xml


def trace(path, **flags) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    code = run(RunConfig(path, **flags), out, err)
    return code, out.getvalue(), err.getvalue()


def test_unsat_trace():
    code, out, _ = trace(FIXTURES / "example1.txt")
    assert code == 1
    lines = mask_timings(out).splitlines()
    assert lines[0] == f"Reading {FIXTURES / 'example1.txt'}"
    assert lines[1:3] == ["", "Satisfiability Tested Formula:"]
    assert lines[3].startswith("(mu X")
    assert lines[4:7] == ["", "Computing Relevant Closure", "Computed Relevant Closure [t ms]."]
    assert lines[7] == "Computed Lean [t ms]."
    assert re.fullmatch(r"Lean size is \d+\. It contains \d+ eventualities and \d+ symbols\.", lines[8])
    assert re.fullmatch(r"Computing Fixpoint\.+\[t ms\]\.", lines[9])
    assert lines[10:] == ["Formula is unsatisfiable [t ms]."]


def test_sat_trace_with_witness():
    code, out, _ = trace(FIXTURES / "example3_equivalence.txt")
    assert code == 0
    lines = mask_timings(out).splitlines()
    k = lines.index("Formula is satisfiable [t ms].")
    assert lines[k + 1] == "A satisfying finite binary tree model was found [t ms]:"
    assert lines[k + 3] == "In XML syntax:"
    witness = from_xml("\n".join(lines[k + 4:]))
    assert witness.label == "b"


def test_schema_lines():
    _, out, _ = trace(FIXTURES / "example2.txt")
    lines = mask_timings(out).splitlines()
    assert lines[1:3] == ["Converted tree grammar into BTT [t ms].",
                          "Translated BTT into Tree Logic [t ms]."]


def test_trace_is_stable_across_runs():
    first = mask_timings(trace(FIXTURES / "example3.txt")[1])
    second = mask_timings(trace(FIXTURES / "example3.txt")[1])
    assert first == second


def test_quiet_prints_one_line():
    for name, code in (("example1.txt", 1), ("example3_equivalence.txt", 0)):
        got, out, _ = trace(FIXTURES / name, quiet=True)
        assert got == code
        assert len(out.splitlines()) == 1
        assert re.match(r"^Formula is (un)?satisfiable", out)


def test_xml_out_and_oracle_check(tmp_path):
    target = tmp_path / "witness.xml"
    code, _, err = trace(FIXTURES / "example3_equivalence.txt", xml_out=target, oracle_check=True)
    assert code == 0 and err == ""
    assert from_xml(target.read_text()).label == "b"


def test_timeout_exit_code():
    code, out, _ = trace(FIXTURES / "example2.txt", timeout=0)
    assert code == 3
    assert out.splitlines()[-1] == "Timeout: no verdict within 0 s."


def test_errors_exit_with_two(tmp_path):
    assert trace(tmp_path / "missing.txt")[0] == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("a & & b")
    code, _, err = trace(bad)
    assert code == 2 and err.startswith("error:")
    cyclic = tmp_path / "cyclic.txt"
    cyclic.write_text("let $X = a | <-1>$X | <1>$X in $X")
    assert trace(cyclic)[0] == 2


def test_strict_dtd(tmp_path):
    (tmp_path / "loose.dtd").write_text("<!ELEMENT a (b)>")
    spec = tmp_path / "spec.txt"
    spec.write_text('type("loose.dtd", "a")')
    with pytest.warns(DtdWarning):
        assert trace(spec)[0] == 0
    assert trace(spec, strict_dtd=True)[0] == 2


def test_no_arguments_prints_usage(capsys):
    assert main([]) == 2
    assert "--timeout" in capsys.readouterr().err


def test_console_entry_point():
    done = subprocess.run([sys.executable, "-m", "treelogic", "--quiet", str(FIXTURES / "example1.txt")],
                          capture_output=True, text=True)
    assert done.returncode == 1
    assert done.stdout.startswith("Formula is unsatisfiable")
