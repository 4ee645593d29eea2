"""Persistent stacks, snapshot deltas and the monitor's record chains."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choreo.lang.values import values_equal
from choreo.projection.ir import ContinuationToken
from choreo.recovery.delta import (
    EMPTY_SNAPSHOT,
    Snapshot,
    apply_delta,
    compute_delta,
    full_delta,
)
from choreo.recovery.monitor import Monitor
from choreo.runtime.stack import CheckpointFrame, ReturnFrame, Stack


def tok(i: int) -> ContinuationToken:
    return ContinuationToken("f", 1, "A", i)


def test_stack_basics():
    s = Stack.EMPTY.push(1).push(2).push(3)
    assert len(s) == 3 and s.top == 3
    assert list(s) == [3, 2, 1]
    assert s.to_list() == [1, 2, 3]
    top, rest = s.pop()
    assert top == 3 and rest.to_list() == [1, 2]
    assert s.truncate(1).to_list() == [1]
    assert Stack.from_list([1, 2, 3]) == s
    assert Stack.from_list([1, 2]) != s
    with pytest.raises(IndexError):
        Stack.EMPTY.pop()


def test_push_shares_the_tail():
    base = Stack.from_list([ReturnFrame(tok(0), {})])
    a = base.push(ReturnFrame(tok(1), {"x": 1}))
    b = base.push(ReturnFrame(tok(2), {}))
    assert a.below is base and b.below is base


frames = st.one_of(
    st.builds(ReturnFrame, st.integers(0, 5).map(tok),
              st.dictionaries(st.sampled_from("abc"), st.integers(-3, 3), max_size=2)),
    st.builds(CheckpointFrame, st.tuples(st.integers(0, 3), st.integers(1, 3)),
              st.dictionaries(st.sampled_from("xy"), st.integers(0, 2), max_size=2),
              st.just({}), st.integers(0, 5).map(tok), st.integers(0, 5).map(tok)),
)
var_maps = st.dictionaries(st.sampled_from(["a", "b", "c", "d", "e"]),
                           st.one_of(st.integers(-5, 5), st.booleans(), st.none(),
                                     st.lists(st.integers(0, 3), max_size=3)), max_size=5)
seq_maps = st.dictionaries(st.integers(0, 4), st.integers(0, 9), max_size=3)


@st.composite
def snapshot_pairs(draw):
    shared = draw(st.lists(frames, max_size=6))
    base = Stack.from_list(shared)
    tail_a = draw(st.lists(frames, max_size=4))
    tail_b = draw(st.lists(frames, max_size=4))
    a = Stack.from_list(tail_a, base)
    # sometimes rebuild b's prefix so only structural equality can share it
    b_base = Stack.from_list(list(shared)) if draw(st.booleans()) else base
    b = Stack.from_list(tail_b, b_base)
    return (Snapshot(a, draw(var_maps), draw(seq_maps)),
            Snapshot(b, draw(var_maps), draw(seq_maps)), len(shared), len(tail_b))


def _same_snapshot(x: Snapshot, y: Snapshot) -> bool:
    return (x.stack == y.stack and x.vars.keys() == y.vars.keys()
            and all(values_equal(x.vars[k], y.vars[k]) for k in x.vars) and x.seqs == y.seqs)


@settings(max_examples=300)
@given(snapshot_pairs())
def test_apply_compute_roundtrip(pair):
    a, b, shared, tail_b = pair
    d = compute_delta(a, b)
    assert _same_snapshot(apply_delta(a, d), b)
    # the shared prefix is never stored again
    assert d.frame_count <= tail_b + max(0, b.stack.depth - shared - tail_b)
    assert d.frame_count <= b.stack.depth


@given(st.lists(frames, max_size=5), st.lists(frames, min_size=1, max_size=5), var_maps)
def test_pushes_only_store_new_frames(below, above, vars_):
    a = Snapshot(Stack.from_list(below), vars_, {})
    b = Snapshot(Stack.from_list(above, a.stack), dict(vars_), {})
    d = compute_delta(a, b)
    assert d.frame_count == len(above)
    assert d.base_len == len(below)
    assert d.vars_changed == {} and d.vars_removed == ()


@given(snapshot_pairs())
def test_full_delta_rebuilds_from_empty(pair):
    _, b, _, _ = pair
    assert _same_snapshot(apply_delta(EMPTY_SNAPSHOT, full_delta(b)), b)


def test_apply_rejects_deep_base():
    d = compute_delta(EMPTY_SNAPSHOT, Snapshot(Stack.from_list([1, 2]), {}, {}))
    shallow = Snapshot(Stack.EMPTY, {}, {})
    bad = type(d)(5, d.added, {}, (), {})
    with pytest.raises(ValueError):
        apply_delta(shallow, bad)


# ---------------------------------------------------------------- monitor chains


class _Host:
    def __init__(self):
        self.events = []

    def emit_monitor(self, kind, **detail):
        self.events.append((kind, detail))

    def broadcast_barrier(self, instance, epoch):
        self.events.append(("barrier_bcast", instance))

    def revive(self, role, state):
        self.events.append(("revive", role, state))

    def broadcast_recover(self, role, target, epoch):
        self.events.append(("recover_bcast", role, target, epoch))

    def abort(self, reason):
        self.events.append(("abort", reason))


def _nested_snapshots(depth):
    """Snapshots of one role entering ``depth`` nested checkpoints."""
    stack, out = Stack.EMPTY, []
    for i in range(depth):
        stack = stack.push(ReturnFrame(tok(0), {"i": i}))
        out.append(Snapshot(stack, {"i": i}, {0: i}))
        stack = stack.push(CheckpointFrame((0, i + 1), {"i": i}, {}, tok(1), tok(2)))
    return out


@pytest.mark.parametrize("use_deltas", [True, False])
def test_monitor_reconstructs_every_record(use_deltas):
    m = Monitor(_Host(), ("A",), use_deltas=use_deltas)
    snaps = _nested_snapshots(30)
    for i, s in enumerate(snaps):
        m.record_checkpoint("A", (0, i + 1), s, tok(1), tok(2), 0)
    for i, s in enumerate(snaps):
        assert _same_snapshot(m.reconstruct("A", i), s)


def test_monitor_delta_storage_is_linear():
    depth = 200
    m = Monitor(_Host(), ("A",), use_deltas=True)
    full = Monitor(_Host(), ("A",), use_deltas=False)
    for i, s in enumerate(_nested_snapshots(depth)):
        m.record_checkpoint("A", (0, i + 1), s, tok(1), tok(2), 0)
        full.record_checkpoint("A", (0, i + 1), s, tok(1), tok(2), 0)
    # record i stores its ReturnFrame plus the previous record's CheckpointFrame
    assert m.peak_frames == 2 * depth - 1
    assert full.peak_frames == depth * depth


def test_barrier_requires_every_role():
    host = _Host()
    m = Monitor(host, ("A", "B"))
    for r in ("A", "B"):
        m.record_checkpoint(r, (0, 1), EMPTY_SNAPSHOT, tok(1), tok(2), 0)
    m.on_done("A", (0, 1), 0)
    assert not any(e[0] == "barrier_bcast" for e in host.events)
    m.on_done("B", (0, 1), 0)
    assert ("barrier_bcast", (0, 1)) in host.events
    assert m.open_instances("A") == [] and m.stored_frames == 0


def test_recovery_waits_for_all_records_then_bumps_epoch():
    host = _Host()
    m = Monitor(host, ("A", "B"))
    m.record_checkpoint("A", (0, 1), EMPTY_SNAPSHOT, tok(1), tok(2), 0)
    m.on_crash("A", "boom")
    assert m.epoch == 0 and m.pending == ("A", (0, 1))
    m.record_checkpoint("B", (0, 1), EMPTY_SNAPSHOT, tok(1), tok(2), 0)
    assert m.epoch == 1 and m.recoveries == 1
    kinds = [e[0] for e in host.events]
    assert kinds.index("revive") < kinds.index("recover_bcast")
    assert m.rescuing == {(0, 1)}


def test_crash_without_checkpoint_aborts():
    host = _Host()
    Monitor(host, ("A", "B")).on_crash("A", "boom")
    assert host.events[-1][0] == "abort"


def test_crash_during_rescue_aborts():
    host = _Host()
    m = Monitor(host, ("A", "B"))
    for r in ("A", "B"):
        m.record_checkpoint(r, (0, 1), EMPTY_SNAPSHOT, tok(1), tok(2), 0)
    m.on_crash("A", "first")
    m.on_crash("B", "second")
    assert host.events[-1][0] == "abort" and "rescue" in host.events[-1][1]


def test_stale_records_are_ignored():
    host = _Host()
    m = Monitor(host, ("A",))
    m.epoch = 2
    m.record_checkpoint("A", (0, 1), EMPTY_SNAPSHOT, tok(1), tok(2), 1)
    m.on_done("A", (0, 1), 1)
    assert m.open_instances("A") == []
    assert [a[0] for a in m.audit] == ["stale_enter", "stale_done"]
