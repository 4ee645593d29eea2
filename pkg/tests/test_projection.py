"""Endpoint projection: block splitting, tokens, duality, liveness and the listing."""

from pathlib import Path

import pytest

from choreo.lang import ast as A
from choreo.lang.parser import parse
from choreo.projection import ir
from choreo.projection.listing import format_endpoint
from choreo.projection.lower import project, project_all
from choreo.runtime import actor as actor_mod
from choreo.runtime.session import start_session

from conftest import CORPUS, PROGRAMS, corpus_cases, load, oracle

GOLDEN = Path(__file__).parent / "golden"


def _entries(ep, kind):
    return [b for b in ep.blocks.values() if isinstance(b.entry, kind)]


def _terminators(ep, kind):
    return [b.body[-1] for b in ep.blocks.values() if isinstance(b.body[-1], kind)]


def test_two_receives_make_two_await_blocks():
    _, eps, _ = load("two_senders")
    bob = eps["Bob"]
    assert len(_entries(bob, ir.AwaitRecv)) == 2
    assert len(bob.blocks) == 3
    assert [b.entry.sender for b in _entries(bob, ir.AwaitRecv)] == ["Alice", "Carol"]


def test_sender_only_role_is_one_block():
    _, eps, _ = load("two_senders")
    assert len(eps["Alice"].blocks) == 1
    assert len(eps["Carol"].blocks) == 1


def test_bookseller_buyer_call_sites():
    prog, eps, _ = load("bookseller")
    buyer = eps["Buyer"]
    calls = _terminators(buyer, (ir.CallFn, ir.CallIndirect))
    # one landing block per call, each with its own return token
    rets = [c.ret for c in calls]
    assert len(rets) == len(set(rets))
    chor_calls = [s for f in prog.functions for s in A.iter_statements(f.body)
                  if isinstance(s, A.Call)]  # includes `with` right-hand sides
    assert len(calls) == len(chor_calls) == 3
    for r in rets:
        assert isinstance(buyer.blocks[r].entry, ir.ReturnLanding)


def test_listing_matches_golden():
    prog = load("two_senders")[0]
    text = "\n\n".join(format_endpoint(project(prog, r)) for r in prog.roles)
    assert text + "\n" == (GOLDEN / "two_senders.project.txt").read_text()


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_projection_is_deterministic(name):
    prog = load(name)[0]
    for r in prog.roles:
        assert format_endpoint(project(prog, r)) == format_endpoint(project(prog, r))


def _referenced(ep):
    for b in ep.blocks.values():
        for ins in b.body:
            if isinstance(ins, ir.EnterCheckpoint):
                yield ins.rescue
                yield ins.exit
        yield from ir.successors(b.body[-1])
    yield ep.entry
    for toks in ep.functions.values():
        yield from toks


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_token_closure(name):
    for ep in load(name)[1].values():
        for tok in _referenced(ep):
            assert tok in ep.blocks, tok
            assert tok.role == ep.role
        for tok, b in ep.blocks.items():
            assert b.token == tok
            assert isinstance(b.body[-1], ir.TERMINATORS)
            assert not any(isinstance(i, ir.TERMINATORS) for i in b.body[:-1])


def _sends(ep):
    for b in ep.blocks.values():
        for ins in b.body:
            if isinstance(ins, ir.Send):
                yield ("msg", ins.site, ep.role, ins.dest)
            elif isinstance(ins, ir.SendChoice):
                for d in ins.dests:
                    yield ("choice", ins.site, ep.role, d)


def _receives(ep):
    for b in ep.blocks.values():
        if isinstance(b.entry, ir.AwaitRecv):
            yield ("msg", b.entry.site, b.entry.sender, ep.role)
        elif isinstance(b.entry, ir.AwaitChoice):
            yield ("choice", b.entry.site, b.entry.decider, ep.role)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_send_receive_duality(name):
    """Every send site has exactly the matching receive site at its destination."""
    eps = load(name)[1]
    sends = {s for ep in eps.values() for s in _sends(ep)}
    recvs = {r for ep in eps.values() for r in _receives(ep)}
    assert sends == recvs


def test_duality_against_source_deliveries():
    prog, eps, _ = load("out_of_order")
    deliveries = {("msg", s.site, s.sender, s.receiver) for f in prog.functions
                  for s in A.iter_statements(f.body) if isinstance(s, A.Delivery)}
    assert {r for ep in eps.values() for r in _receives(ep)} == deliveries


def test_every_call_gets_a_landing_block():
    prog = parse("""
defchor [A, B] do
  def run(A.n) do
    f(A.n)
  end
  def f(A.x) do
    A.x ~> B.y
    B.y
  end
end
""")
    a = project(prog, "A")
    (call,) = _terminators(a, ir.CallFn)
    assert call.ret is not None
    assert isinstance(a.blocks[call.ret].entry, ir.ReturnLanding)


def test_ordinals_are_dense_per_function():
    for name in CORPUS:
        for ep in load(name)[1].values():
            by_fn: dict = {}
            for tok in ep.blocks:
                by_fn.setdefault((tok.fname, tok.arity), []).append(tok.ordinal)
            for ords in by_fn.values():
                assert sorted(ords) == list(range(len(ords)))


# ---------------------------------------------------------------- liveness


def test_liveness_hand_example():
    bob = load("two_senders")[1]["Bob"]
    blocks = list(bob.blocks.values())
    assert blocks[1].live_in == frozenset() and blocks[1].live_out == {"x"}
    assert blocks[2].live_in == {"x"} and blocks[2].live_out == frozenset()


def test_liveness_dataflow_equations_hold():
    """live_out is the union of the terminator targets' live_in.

    The rescue edge is not a control-flow successor: its live_in is added at
    the ``EnterCheckpoint`` instruction, so it must be part of the block's live_in
    unless the block itself defines it first.
    """
    for name in CORPUS:
        for ep in load(name)[1].values():
            for b in ep.blocks.values():
                succ = ir.successors(b.body[-1])
                union = frozenset().union(*(ep.blocks[t].live_in for t in succ))
                assert b.live_out == union, (name, b.token)
                if isinstance(b.entry, ir.Start):
                    continue
                for ins in b.body:
                    if isinstance(ins, ir.EnterCheckpoint):
                        assert ep.blocks[ins.rescue].live_in <= b.live_in | _defined(b), b.token


def _defined(b):
    out = set()
    pat = getattr(b.entry, "pattern", None)
    if pat is not None:
        out |= A.pattern_vars(pat)[0]
    for ins in b.body:
        if isinstance(ins, ir.Eval) and ins.target:
            out.add(ins.target)
        elif isinstance(ins, ir.Bind):
            out |= A.pattern_vars(ins.pattern)[0]
    return out


@pytest.fixture
def pruning_actors(monkeypatch):
    """Forget every variable not in the target block's live_in on each jump."""
    original = actor_mod.Actor._goto

    def goto(self, tok):
        blk = self.program.blocks[tok]
        if not isinstance(blk.entry, ir.Start):
            self.vars = {k: v for k, v in self.vars.items() if k in blk.live_in}
        original(self, tok)

    monkeypatch.setattr(actor_mod.Actor, "_goto", goto)


@pytest.mark.parametrize("name,args", corpus_cases())
def test_liveness_is_sufficient(pruning_actors, name, args):
    _, eps, impls = load(name)
    expected = oracle(name, args).values
    for seed in range(5):
        assert start_session(eps, impls, list(args), seed=seed).await_results(10) == expected


def test_project_unknown_role():
    with pytest.raises(ValueError):
        project(load("pie")[0], "Nobody")


def test_project_all_covers_roles():
    prog = load("out_of_order")[0]
    assert set(project_all(prog)) == set(prog.roles)
    assert (PROGRAMS / "out_of_order.chor").exists()
