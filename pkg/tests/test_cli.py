"""The command-line front end: output, exit codes and JSON reports."""

import io
import json
import subprocess
import sys

import jsonschema
import pytest

from helpers import CORPUS, ROOT
from trellys.cli import (
    EXIT_ABORT,
    EXIT_ERROR,
    EXIT_FUEL,
    EXIT_INTERNAL,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from trellys.meta import suites

DOCS = ROOT / "docs"


def call(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


@pytest.fixture
def source(tmp_path):
    def write(text: str):
        path = tmp_path / "prog.tre"
        path.write_text(text)
        return path

    return write


class TestCheck:
    def test_safediv_signature(self):
        code, out = call("check", CORPUS / "safediv.tre")
        assert code == EXIT_OK
        assert "safediv : Nat -> (y:Nat) -> (p:isZero y = false) -> Nat" in out.splitlines()

    def test_datatypes_are_listed(self):
        code, out = call("check", CORPUS / "match.tre")
        assert code == EXIT_OK and any(line.startswith("match :") for line in out.splitlines())

    def test_whole_corpus(self):
        for path in sorted(CORPUS.glob("*.tre")):
            assert call("check", path)[0] == EXIT_OK, path

    def test_standalone_without_prelude(self):
        code, out = call("check", "--no-prelude", CORPUS / "standalone" / "vec_indexed.tre")
        assert code == EXIT_OK and out.startswith("data ")

    @pytest.mark.parametrize("name", ["abort_irrelevant.tre", "extensionality.tre"])
    def test_rejections(self, name, capsys):
        code, _ = call("check", CORPUS / "rejected" / name)
        assert code == EXIT_ERROR
        assert capsys.readouterr().err.startswith("type error:")

    def test_parse_error(self, source, capsys):
        code, _ = call("check", source("x = ("))
        assert code == EXIT_ERROR and "parse error" in capsys.readouterr().err

    def test_type_error_names_rule_and_line(self, source, capsys):
        code, _ = call("check", source("y : Bool\n\ny = 0\n"))
        err = capsys.readouterr().err
        assert code == EXIT_ERROR and "line 3" in err

    def test_empty_file(self, source):
        assert call("check", source("")) == (EXIT_OK, "")

    def test_output_is_deterministic(self):
        runs = [
            subprocess.run(
                [sys.executable, "-m", "trellys", "check", str(CORPUS / "vec.tre")],
                capture_output=True,
                check=True,
            ).stdout
            for _ in range(2)
        ]
        assert runs[0] == runs[1] and runs[0]

    def test_derivation_json_matches_schema(self, tmp_path):
        schema = json.loads((DOCS / "derivation.schema.json").read_text())
        for path in sorted(CORPUS.glob("*.tre")):
            target = tmp_path / f"{path.stem}.json"
            assert call("check", path, "--emit-derivation", target)[0] == EXIT_OK
            doc = json.loads(target.read_text())
            jsonschema.validate(doc, schema)
            assert doc["definitions"]


class TestEraseAndRun:
    def test_erase_cons_prime(self):
        assert call("erase", CORPUS / "cons_prime.tre", "--def", "oneBool") == (
            EXIT_OK,
            "cons' [] [] true (nil' [])\n",
        )

    def test_run_demo(self):
        code, out = call("run", CORPUS / "safediv.tre", "--def", "demo")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "2" and lines[1].startswith("value after ")

    def test_run_diverging_program(self):
        code, out = call("run", CORPUS / "diverge.tre", "--fuel", 1000)
        assert code == EXIT_FUEL and out.endswith("out-of-fuel after 1000 steps\n")

    def test_fuel_from_environment(self, monkeypatch):
        monkeypatch.setenv("TRELLYS_FUEL", "77")
        code, out = call("run", CORPUS / "diverge.tre")
        assert code == EXIT_FUEL and "after 77 steps" in out

    def test_abort_exit_code(self, source):
        code, out = call("run", source("main : Nat\nmain = div 1 0\n"))
        assert code == EXIT_ABORT and out.splitlines()[0] == "abort"

    def test_trace_lines(self):
        code, out = call("trace", CORPUS / "safediv.tre", "--def", "demo", "--fuel", 5)
        lines = out.splitlines()
        assert code == EXIT_FUEL
        assert lines[0].startswith("0: ") and lines[1].startswith("1: ") and "[sc_" in lines[1]
        assert lines[-1] == "out-of-fuel after 5 steps"

    def test_unknown_definition(self):
        assert call("run", CORPUS / "safediv.tre", "--def", "nope")[0] == EXIT_USAGE

    def test_stuck_evaluation_is_an_internal_error(self, monkeypatch):
        import trellys.cli as cli
        from trellys.cbv import RunResult

        monkeypatch.setattr(cli, "run", lambda term, fuel: RunResult(term, "stuck", 0, "forced"))
        assert call("run", CORPUS / "safediv.tre", "--def", "demo")[0] == EXIT_INTERNAL


class TestJoin:
    def test_cbv(self):
        assert call("join", "--cbv", 100, 100, "1+1", "2") == (
            EXIT_OK,
            "joinable (call-by-value, 100 and 100 steps)\n",
        )

    def test_cbv_does_not_reduce_under_binders(self):
        code, out = call("join", "--cbv", 100, 100, r"\x:Nat.(\y:Nat.y) x", r"\x:Nat.x")
        assert code == EXIT_OK and out.startswith("not joinable")

    def test_parallel(self):
        code, out = call("join", "--parallel", "--depth", 1, r"\x:Nat.(\y:Nat.y) x", r"\x:Nat.x")
        assert code == EXIT_OK and out.startswith("joinable")

    def test_parallel_needs_depth(self):
        assert call("join", "--parallel", "0", "0")[0] == EXIT_USAGE

    def test_large_terms_fall_back_to_evaluation(self):
        code, out = call("join", "--parallel", "--depth", 200, "plus 30 30", "60")
        assert code == EXIT_OK and out.startswith("joinable")

    def test_parallel_budget(self, monkeypatch):
        import trellys.cli as cli
        from trellys.parallel import BudgetExceeded

        def exhausted(m, n, depth):
            raise BudgetExceeded("forced")

        monkeypatch.setattr(cli, "joinable", exhausted)
        assert call("join", "--parallel", "--depth", 2, "0", "0")[0] == EXIT_FUEL

    def test_parse_error(self):
        assert call("join", "--cbv", 1, 1, "(", "0")[0] == EXIT_ERROR


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["frobnicate"],
            ["check"],
            ["run", "x.tre", "--fuel", "-1"],
            ["fuzz", "--suite", "nope"],
            ["fuzz", "--suite", "diamond", "--cases", "0"],
            ["check", "/nonexistent/file.tre"],
        ],
    )
    def test_usage_errors(self, argv):
        assert call(*argv)[0] == EXIT_USAGE

    def test_help(self, capsys):
        assert call("--help")[0] == EXIT_OK
        assert "check" in capsys.readouterr().out

    def test_console_script_exit_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "trellys", "run", str(CORPUS / "diverge.tre"), "--fuel", "1000"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == EXIT_FUEL


class TestFuzz:
    def test_json_report_matches_schema(self):
        code, out = call("fuzz", "--suite", "all", "--cases", 10, "--seed", 3, "--report", "json")
        assert code == EXIT_OK
        doc = json.loads(out)
        jsonschema.validate(doc, json.loads((DOCS / "fuzz-report.schema.json").read_text()))
        assert [s["suite"] for s in doc["suites"]] == list(suites.SUITES)

    def test_text_report(self):
        code, out = call("fuzz", "--suite", "progress", "--cases", 5)
        assert code == EXIT_OK and out.startswith("progress: ok")

    def test_failures_exit_internal_with_schema_valid_report(self, monkeypatch):
        from trellys.cbv import Stuck

        monkeypatch.setattr(suites, "step", lambda m: Stuck("forced"))
        code, out = call("fuzz", "--suite", "progress", "--cases", 4, "--report", "json")
        assert code == EXIT_INTERNAL
        doc = json.loads(out)
        jsonschema.validate(doc, json.loads((DOCS / "fuzz-report.schema.json").read_text()))
        assert doc["suites"][0]["failed"] == 4
