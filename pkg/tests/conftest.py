from __future__ import annotations

import functools
import os
from pathlib import Path

import pytest

from choreo.lang.evaluate import ImplRegistry
from choreo.lang.interp import eval_global
from choreo.lang.parser import parse_file, parse_impl_file
from choreo.projection.lower import project_all

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"

# name -> (impl file or None, list of argument tuples to run with)
CORPUS = {
    "ckpt_crash": ("ckpt", [()]),
    "ckpt_ok": ("ckpt", [()]),
    "bookseller": ("bookseller", [(True,), (False,)]),
    "two_senders": ("two_senders", [()]),
    "out_of_order": ("out_of_order", [()]),
    "pie": ("pie", [()]),
    "nested": ("nested", [(5,), (3,)]),
    "higher_order": (None, [(3,)]),
    "loop": (None, [(4,), (0,)]),
    "branch": ("branch", [(12,), (7,)]),
    "patterns": (None, [(2,)]),
    "ckpt_loop": ("ckpt_loop", [(4,)]),
}


@functools.lru_cache(maxsize=None)
def load(name: str):
    """(program, endpoint programs, impls) for a corpus entry."""
    prog = parse_file(PROGRAMS / f"{name}.chor")
    impl_name = CORPUS.get(name, (name, None))[0]
    impls = ImplRegistry()
    if impl_name and os.path.exists(PROGRAMS / f"{impl_name}.chim"):
        impls = parse_impl_file(PROGRAMS / f"{impl_name}.chim")
    return prog, project_all(prog), impls


@functools.lru_cache(maxsize=None)
def oracle(name: str, args: tuple):
    prog, _, impls = load(name)
    return eval_global(prog, impls, list(args))


def corpus_cases():
    return [(n, a) for n, (_, arglist) in CORPUS.items() for a in arglist]


@pytest.fixture
def corpus():
    return load


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
