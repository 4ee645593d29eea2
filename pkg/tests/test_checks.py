"""Static checks: scope, knowledge of choice, and the rendered reports."""

import time
from pathlib import Path

import pytest

from choreo.cli import main
from choreo.lang.checks import check_knowledge_of_choice, check_located_scope, check_program
from choreo.lang.parser import parse
from choreo.projection.local import MergeError
from choreo.projection.lower import project

from conftest import CORPUS, PROGRAMS, load

GOLDEN = Path(__file__).parent / "golden"


def _check_output(capsys, *argv):
    code = main(["check", *argv])
    return code, capsys.readouterr().out


@pytest.mark.parametrize("name", ["deadlock", "bad_branch"])
def test_check_report_matches_golden(name, capsys, monkeypatch):
    monkeypatch.chdir(PROGRAMS)
    t0 = time.perf_counter()
    code, out = _check_output(capsys, f"{name}.chor")
    assert time.perf_counter() - t0 < 1.0
    assert code == 1
    assert out == (GOLDEN / f"{name}.check.txt").read_text()


def test_deadlock_report_names_the_variable_and_line(capsys):
    code, out = _check_output(capsys, str(PROGRAMS / "deadlock.chor"))
    assert 'undefined variable "val"' in out
    assert "| A.val ~> B.val" in out
    assert "deadlock.chor:4" in out


def test_bad_branch_report(capsys):
    code, out = _check_output(capsys, str(PROGRAMS / "bad_branch.chor"))
    assert code == 1
    assert "Branches differ for actor Carol" in out


def test_check_output_is_byte_identical(capsys):
    runs = [_check_output(capsys, str(PROGRAMS / "bad_branch.chor"))[1] for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


def test_interfaces_listing(capsys):
    code, out = _check_output(capsys, str(PROGRAMS / "pie.chor"), "--interfaces")
    assert code == 0
    assert out.splitlines()[0] == "Alice: get_money/0, fetch_sugar/0, bake_pie/2"
    assert out == (GOLDEN / "pie.interfaces.txt").read_text()


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_corpus_programs_pass_checks(name):
    assert check_program(load(name)[0]) == []


def test_variable_located_elsewhere():
    prog = parse("""
defchor [A, B] do
  def run(A.x) do
    B.(x + 1)
  end
end
""", "t.chor")
    (err,) = check_located_scope(prog)
    assert err.message == 'variable "x" is located at A, not B'
    assert err.span.line == 4


def test_with_binding_is_scoped():
    prog = parse("""
defchor [A, B] do
  def run() do
    with A.y <- A.1 do
      A.y ~> B.z
    end
    A.y
  end
end
""", "t.chor")
    errs = check_located_scope(prog)
    assert [e.message for e in errs] == ['undefined variable "y"']


def test_checkpoint_bindings_do_not_escape():
    prog = parse("""
defchor [A, B] do
  def run() do
    checkpoint do
      A.1 ~> B.x
    rescue
      A.2 ~> B.x
    end
    B.x
  end
end
""", "t.chor")
    assert [e.message for e in check_located_scope(prog)] == ['undefined variable "x"']


NOTIFY_OK = """
defchor [A, B, C] do
  def run(A.q) do
    if A.(q > 0), notify: [B] do
      A.1 ~> B.r
      B.r
    else
      A.2 ~> B.r
      B.(r + 10)
    end
  end
end
"""


def test_notified_role_may_differ_and_bystander_merges():
    prog = parse(NOTIFY_OK, "t.chor")
    assert check_knowledge_of_choice(prog) == []
    project(prog, "C")  # C does the same thing (nothing) in both branches


def test_unnotified_role_that_differs_is_rejected():
    prog = parse(NOTIFY_OK.replace("notify: [B]", "notify: []"), "t.chor")
    errs = check_knowledge_of_choice(prog)
    assert [e.role for e in errs] == ["B"]
    with pytest.raises(MergeError):
        project(prog, "B")


def test_identical_branches_need_no_notify():
    prog = parse("""
defchor [A, B] do
  def run(A.q) do
    if A.(q > 0), notify: [] do
      B.1
    else
      B.1
    end
  end
end
""", "t.chor")
    assert check_program(prog) == []


def test_missing_file_is_exit_2(capsys, tmp_path):
    assert main(["check", str(tmp_path / "nope.chor")]) == 2


def test_syntax_error_is_exit_1(capsys, tmp_path):
    f = tmp_path / "bad.chor"
    f.write_text("defchor [A, B] do\n  def run() do\n    A.1 ~> 5.x\n  end\nend\n")
    assert main(["check", str(f)]) == 1
    out = capsys.readouterr().out
    assert out.startswith("ERROR:") and "bad.chor:3" in out
