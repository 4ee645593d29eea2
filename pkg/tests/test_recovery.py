"""Checkpoint/rescue end to end: barrier safety, rollback fidelity, abort paths."""

import pytest

from choreo.bench import bench_impls, bench_source
from choreo.lang.evaluate import ImplRegistry
from choreo.lang.interp import SessionAborted, eval_global
from choreo.lang.parser import parse
from choreo.lang.values import Crash
from choreo.projection.lower import project_all
from choreo.runtime.session import World
from choreo.runtime.trace import Trace

from analysis import barrier_violations, rollback_mismatches
from conftest import load, oracle

FLAKY = """
defchor [Client, Server, Log] do
  def run(Client.n) do
    checkpoint do
      Client.n ~> Server.req
      Server.lookup(req) ~> Client.resp
      Client.resp ~> Log.entry
      Log.store(entry)
    rescue
      Client.(0 - n) ~> Log.entry
      Log.store(entry)
    end
    Log.ok() ~> Client.ack
    Client.ack
  end
end
"""


def flaky_impls(failures: int) -> ImplRegistry:
    """Server.lookup fails on its first ``failures`` calls, like a transient fault."""
    state = {"calls": 0}

    def lookup(k):
        state["calls"] += 1
        if state["calls"] <= failures:
            raise Crash("transient lookup failure")
        return k * 2

    return ImplRegistry.from_python({
        "Server": {"lookup": lookup},
        "Log": {"store": lambda e: e, "ok": lambda: "stored"},
    })


def traced_run(eps, impls, args, seed, blocks=True):
    world = World(seed=seed, trace=Trace(blocks=blocks))
    s = world.start(eps, impls, list(args))
    world.run(until=lambda: s.done, timeout=30)
    return world, s


def test_flaky_server_recovers_once():
    eps = project_all(parse(FLAKY))
    for seed in range(20):
        world, s = traced_run(eps, flaky_impls(1), [5], seed)
        assert s.result_map() == {"Client": "stored", "Server": None, "Log": None}
        assert s.recoveries == 1
        assert [e.role for e in world.trace.of("revive")] == ["Server"]
        assert barrier_violations(world.trace) == []
        checked, bad = rollback_mismatches(world.trace)
        assert checked == 3 and bad == []


def test_flaky_matches_oracle_value():
    oracle_run = eval_global(parse(FLAKY), flaky_impls(1), [5])
    world, s = traced_run(project_all(parse(FLAKY)), flaky_impls(1), [5], 0)
    assert s.result_map() == oracle_run.values
    assert oracle_run.rescue_count == s.recoveries == 1


SCHEDULES = [("ckpt_crash", ()), ("ckpt_ok", ()), ("nested", (3,)), ("nested", (5,)),
             ("ckpt_loop", (4,))]


@pytest.mark.parametrize("name,args", SCHEDULES)
def test_barrier_safety_and_rollback(name, args):
    _, eps, impls = load(name)
    expected = oracle(name, args)
    for seed in range(25):
        world, s = traced_run(eps, impls, args, seed)
        assert s.result_map() == expected.values
        assert barrier_violations(world.trace) == []
        checked, bad = rollback_mismatches(world.trace)
        assert bad == []
        assert checked == expected.rescue_count * len(s.roles)


@pytest.mark.parametrize("name", ["flat", "nest", "ckpt-demo"])
def test_generated_benchmarks_rescue_path(name):
    prog = parse(bench_source(name, "chk-rescue", 7))
    want = eval_global(prog, bench_impls(1), [30])
    for seed in range(5):
        world, s = traced_run(project_all(prog), bench_impls(1), [30], seed)
        assert s.result_map() == want.values
        assert s.recoveries == want.rescue_count == 4
        assert barrier_violations(world.trace) == []
        assert rollback_mismatches(world.trace)[1] == []


def test_crash_in_rescue_aborts_session():
    prog = parse("""
defchor [A, B] do
  def run(A.n) do
    checkpoint do
      A.(10 / n) ~> B.x
      B.x
    rescue
      A.(20 / n) ~> B.x
      B.x
    end
  end
end
""")
    world, s = traced_run(project_all(prog), None, [0], 0)
    assert s.status == "aborted"
    assert isinstance(s.error, SessionAborted)
    assert "rescue" in s.error.reason
    assert len(world.trace.of("rescue_enter")) >= 1  # B may be torn down before its rescue
    assert not any(a.has_work() for a in s.all_actors)


def test_session_abort_stops_every_actor():
    prog = parse("""
defchor [A, B] do
  def run(A.n) do
    A.(1 / n) ~> B.x
    B.x
  end
end
""")
    world, s = traced_run(project_all(prog), None, [0], 0)
    assert s.status == "aborted"
    assert len(world.trace.of("abort")) == 1
    assert not any(a.has_work() for a in s.all_actors)


def test_stale_epoch_messages_are_dropped():
    """A message sent during the aborted attempt never satisfies a rescue receive."""
    prog = parse("""
defchor [A, B] do
  def run() do
    checkpoint do
      A.1 ~> B.x
      B.crash_if(x == 1)
      B.x
    rescue
      A.2 ~> B.x
      B.x
    end
  end
end
""")
    eps = project_all(prog)
    for seed in range(20):
        world, s = traced_run(eps, None, [], seed)
        assert s.result_map()["B"] == 2
        for e in world.trace.of("recv"):
            if e.role == "B" and e.detail["epoch"] == 1:
                assert e.detail["site"] != 0


def test_epoch_bumps_per_recovery():
    _, eps, impls = load("ckpt_loop")
    world, s = traced_run(eps, impls, (4,), 0)
    assert s.monitor.epoch == s.recoveries == 1
    assert {a.epoch for a in s.actors.values()} == {1}


def test_barrier_analysis_detects_a_violation():
    """The analysis itself: a fabricated early barrier pass is flagged."""
    t = Trace()
    t.emit("s", "A", "ckpt_done", instance=(0, 1), epoch=0)
    t.emit("s", "A", "barrier_pass", instance=(0, 1), epoch=0)
    t.emit("s", "B", "ckpt_done", instance=(0, 1), epoch=0)
    t.emit("s", "B", "barrier_pass", instance=(0, 1), epoch=0)
    assert len(barrier_violations(t)) == 1
    t2 = Trace()
    t2.emit("s", "A", "ckpt_done", instance=(0, 1), epoch=0)
    t2.emit("s", "A", "send", site=3)
    assert len(barrier_violations(t2)) == 1


def test_rollback_analysis_detects_a_mismatch():
    t = Trace()
    t.emit("s", "A", "ckpt_enter", instance=(0, 1), epoch=0, vars={"x": 1})
    t.emit("s", "A", "rescue_enter", instance=(0, 1), epoch=1, vars={"x": 2})
    assert rollback_mismatches(t) == (1, [(("s", "A", (0, 1)), {"x": 1}, {"x": 2})])
