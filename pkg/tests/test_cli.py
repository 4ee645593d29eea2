import json
import subprocess
import sys

import pytest

from choreo.bench import BenchConfig, oracle, run_bench, run_once
from choreo.cli import main

from conftest import PROGRAMS


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def P(name):
    return str(PROGRAMS / name)


def test_run_crash_demo(capsys):
    code, out, _ = cli(capsys, "run", P("ckpt_crash.chor"), "--impl", P("ckpt.chim"))
    assert code == 0
    assert out.splitlines() == ["Alice: 8", "Bob: nil", "recoveries: 1"]


def test_run_without_crash(capsys):
    code, out, _ = cli(capsys, "run", P("ckpt_ok.chor"), "--impl", P("ckpt.chim"))
    assert out.splitlines() == ["Alice: 8", "Bob: nil", "recoveries: 0"]


def test_run_bookseller_one_party(capsys):
    code, out, _ = cli(capsys, "run", P("bookseller.chor"), "--impl", P("bookseller.chim"),
                       "--args", "false")
    assert code == 0
    assert out.splitlines()[0] == "Buyer: nil"


def test_run_bookseller_two_party(capsys):
    code, out, _ = cli(capsys, "run", P("bookseller.chor"), "--impl", P("bookseller.chim"),
                       "--args", "true")
    assert out.splitlines()[0] == 'Buyer: "2026-11-02"'


def test_results_identical_across_seeds(capsys):
    outs = set()
    for seed in range(100):
        code, out, _ = cli(capsys, "run", P("out_of_order.chor"), "--impl",
                           P("out_of_order.chim"), "--seed", str(seed))
        assert code == 0
        outs.add(out)
    assert len(outs) == 1


def test_run_over_tcp(capsys):
    code, out, _ = cli(capsys, "run", P("two_senders.chor"), "--impl", P("two_senders.chim"),
                       "--transport", "tcp")
    assert code == 0 and "Bob: 3" in out


def test_run_trace_file(capsys, tmp_path):
    path = tmp_path / "trace.jsonl"
    code, _, _ = cli(capsys, "run", P("ckpt_crash.chor"), "--impl", P("ckpt.chim"),
                     "--trace", str(path))
    assert code == 0
    events = [json.loads(line)["event"] for line in path.read_text().splitlines()]
    assert "recover" in events and "barrier" in events


def test_run_abort_is_exit_1(capsys, tmp_path):
    f = tmp_path / "div.chor"
    f.write_text("defchor [A, B] do\n  def run(A.n) do\n    A.(1 / n) ~> B.x\n    B.x\n"
                 "  end\nend\n")
    code, _, err = cli(capsys, "run", str(f), "--args", "0")
    assert code == 1 and "aborted" in err


def test_run_missing_impl_is_exit_1(capsys):
    code, _, err = cli(capsys, "run", P("pie.chor"))
    assert code == 1 and "bake_pie/2" in err


def test_run_check_failure_is_exit_1(capsys):
    code, _, err = cli(capsys, "run", P("bad_branch.chor"))
    assert code == 1 and "Branches differ" in err


def test_bad_args_value_is_exit_2(capsys):
    code, _, _ = cli(capsys, "run", P("loop.chor"), "--args", "1 2")
    assert code == 2


def test_usage_errors_are_exit_2(capsys):
    assert main([]) == 2
    assert main(["bench", "nope"]) == 2
    assert main(["run", P("loop.chor"), "--transport", "udp"]) == 2
    capsys.readouterr()


def test_project_one_role(capsys):
    code, out, _ = cli(capsys, "project", P("two_senders.chor"), "--role", "Bob")
    assert code == 0
    assert out.count("await recv") == 2
    assert out.startswith("role Bob")


def test_project_unknown_role(capsys):
    code, _, err = cli(capsys, "project", P("two_senders.chor"), "--role", "Dave")
    assert code == 2 and "unknown role" in err


def test_bench_command(capsys):
    code, out, _ = cli(capsys, "bench", "flat", "--iters", "50", "--variant", "chk-rescue")
    assert code == 0
    lines = dict(line.split(": ", 1) for line in out.splitlines())
    assert lines["benchmark"] == "flat" and lines["variant"] == "chk-rescue"
    assert int(lines["recoveries"]) == 0  # 50 < crash period
    assert "ratio_chk-rescue_vs_plain" in lines


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "choreo.cli", "check", P("pie.chor"), "--interfaces"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == "Alice: get_money/0, fetch_sugar/0, bake_pie/2"


# ---------------------------------------------------------------- bench


@pytest.mark.parametrize("name", ["flat", "nest", "ckpt-demo"])
def test_bench_variants_agree(name):
    results = {}
    for variant in ("plain", "chk"):
        rep = run_once(BenchConfig(name, 60, variant, work_rounds=2))
        results[variant] = rep.result
        if variant == "plain":
            assert rep.recoveries == 0 and rep.peak_frames == 0
    assert results["plain"] == results["chk"] == oracle(BenchConfig(name, 60, "plain", work_rounds=2))


def test_bench_rescue_matches_oracle():
    cfg = BenchConfig("flat", 300, "chk-rescue", crash_period=50, work_rounds=2)
    rep = run_once(cfg)
    assert rep.recoveries == 6
    assert rep.result == oracle(cfg)


def test_nest_frames_linear_with_deltas_quadratic_without():
    k = 150
    with_d = run_once(BenchConfig("nest", k, "chk", work_rounds=1))
    without = run_once(BenchConfig("nest", k, "chk", work_rounds=1, use_deltas=False))
    assert with_d.peak_frames <= 4 * k
    assert without.peak_frames == 2 * k * k
    assert with_d.result == without.result


def test_bench_report_ratio():
    rep = run_bench(BenchConfig("flat", 40, "chk", work_rounds=1))
    assert set(rep.ratios) == {"chk_vs_plain"} and rep.ratios["chk_vs_plain"] > 0
