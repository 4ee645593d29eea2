"""Generated benchmark choreographies and the harness that times them.

Three programs, each over roles ``Alpha`` and ``Beta``:

``flat``
    ``K`` iterations of a recursive loop; each iteration calls ``step``,
    whose body is a single checkpoint in which both roles do some hashing.
    The checkpoint closes before the next iteration starts.
``nest``
    The recursive call sits *inside* the checkpoint body (and its rescue),
    so checkpoints nest ``K`` deep.  This is the memory benchmark: with
    deltas the monitor stores O(K) frames, without them O(K^2).
``ckpt-demo``
    A loop that exchanges hashed payloads in both directions with one
    checkpoint per iteration.

Each comes in three variants: ``plain`` (no checkpoint), ``chk`` (checkpoint,
never crashes) and ``chk-rescue`` (Alpha crashes via ``crash_if`` every
``crash_period`` iterations, so the rescue path runs).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .lang.evaluate import ImplRegistry, hash64
from .lang.interp import eval_global
from .lang.parser import parse
from .projection.lower import project_all
from .runtime.session import World
from .runtime.trace import Trace

BENCHMARKS = ("flat", "nest", "ckpt-demo")
VARIANTS = ("plain", "chk", "chk-rescue")


@dataclass(frozen=True)
class BenchConfig:
    name: str = "flat"
    iters: int = 1000
    variant: str = "chk"
    seed: int = 0
    crash_period: int = 97
    work_rounds: int = 64  # hash rounds per role per iteration
    use_deltas: bool = True
    repeats: int = 1  # best-of-N wall time


@dataclass
class BenchReport:
    name: str
    variant: str
    iters: int
    wall_time: float
    recoveries: int
    peak_frames: int
    result: dict
    ratios: dict = field(default_factory=dict)  # other variant -> this / plain

    def lines(self) -> list:
        out = [
            f"benchmark: {self.name}",
            f"variant: {self.variant}",
            f"iterations: {self.iters}",
            f"wall_time_s: {self.wall_time:.4f}",
            f"recoveries: {self.recoveries}",
            f"peak_stored_frames: {self.peak_frames}",
        ]
        for k, v in self.ratios.items():
            out.append(f"ratio_{k}: {v:.3f}")
        return out


# ------------------------------------------------------------ generators


def _block(lines: list, pad: int) -> str:
    return "".join(" " * pad + ln + "\n" for ln in lines)


def _wrap(variant: str, body: list, rescue: list, period: int, pad: int) -> str:
    """Emit ``body`` at indent ``pad``, inside a checkpoint unless ``variant`` is plain."""
    if variant == "plain":
        return _block(body, pad)
    guard = [f"Alpha.crash_if(i rem {period} == 0)"] if variant == "chk-rescue" else []
    return (_block(["checkpoint do"], pad) + _block(guard + body, pad + 2)
            + _block(["rescue"], pad) + _block(rescue, pad + 2) + _block(["end"], pad))


_LOOP = """defchor [Alpha, Beta] do
  def run(Alpha.k) do
    loop(Alpha.k, Beta.0)
  end

  def loop(Alpha.i, Beta.acc) do
    if Alpha.(i > 0), notify: [Beta] do
      with Beta.acc2 <- {fn}(Alpha.i, Beta.acc) do
        loop(Alpha.(i - 1), Beta.acc2)
      end
    else
      Beta.acc ~> Alpha.total
      Alpha.total
    end
  end

  def {fn}(Alpha.i, Beta.acc) do
{body}  end
end
"""


def flat_source(variant: str, period: int = 97) -> str:
    body = ["Alpha.produce(i) ~> Beta.h", "Beta.absorb(acc, h)"]
    return _LOOP.format(fn="step", body=_wrap(variant, body, ["Beta.(acc + 1)"], period, 4))


def nest_source(variant: str, period: int = 97) -> str:
    body = ["Alpha.produce(i) ~> Beta.h", "nest(Alpha.(i - 1), Beta.absorb(acc, h))"]
    rescue = ["nest(Alpha.(i - 1), Beta.(acc + 1))"]
    return (
        "defchor [Alpha, Beta] do\n"
        "  def run(Alpha.k) do\n"
        "    nest(Alpha.k, Beta.0)\n"
        "  end\n\n"
        "  def nest(Alpha.i, Beta.acc) do\n"
        "    if Alpha.(i > 0), notify: [Beta] do\n"
        + _wrap(variant, body, rescue, period, 6)
        + "    else\n"
        "      Beta.acc ~> Alpha.total\n"
        "      Alpha.total\n"
        "    end\n"
        "  end\n"
        "end\n"
    )


def demo_source(variant: str, period: int = 97) -> str:
    body = ["Alpha.produce(i) ~> Beta.h", "Beta.absorb(acc, h) ~> Alpha.digest",
            "Alpha.digest ~> Beta.seen", "Beta.seen"]
    rescue = ["Beta.acc ~> Alpha.digest", "Beta.(acc + 1)"]
    return _LOOP.format(fn="round", body=_wrap(variant, body, rescue, period, 4))


SOURCES = {"flat": flat_source, "nest": nest_source, "ckpt-demo": demo_source}


def bench_source(name: str, variant: str, period: int = 97) -> str:
    if name not in SOURCES:
        raise ValueError(f"unknown benchmark {name!r}; expected one of {', '.join(BENCHMARKS)}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    return SOURCES[name](variant, period)


def bench_impls(rounds: int) -> ImplRegistry:
    """Local work for both roles: ``rounds`` chained hashes each."""

    def produce(i):
        h = i
        for _ in range(rounds):
            h = hash64(h)
        return h % 1_000_003

    def absorb(acc, h):
        x = h
        for _ in range(rounds):
            x = hash64(x)
        return (acc + x % 1000) % 1_000_000_007

    return ImplRegistry.from_python({"Alpha": {"produce": produce}, "Beta": {"absorb": absorb}})


# ------------------------------------------------------------ harness


def build(cfg: BenchConfig):
    prog = parse(bench_source(cfg.name, cfg.variant, cfg.crash_period), f"<{cfg.name}-{cfg.variant}>")
    return prog, project_all(prog), bench_impls(cfg.work_rounds)


def oracle(cfg: BenchConfig) -> dict:
    prog, _, impls = build(cfg)
    return eval_global(prog, impls, [cfg.iters]).values


def run_once(cfg: BenchConfig) -> BenchReport:
    _, programs, impls = build(cfg)
    best = None
    for _ in range(max(1, cfg.repeats)):
        world = World(seed=cfg.seed, trace=Trace(enabled=False))
        t0 = time.perf_counter()
        session = world.start(programs, impls, [cfg.iters], use_deltas=cfg.use_deltas)
        world.run(until=lambda: session.done)
        elapsed = time.perf_counter() - t0
        if session.status == "aborted":
            raise session.error
        rep = BenchReport(cfg.name, cfg.variant, cfg.iters, elapsed, session.recoveries,
                          session.monitor.peak_frames, session.result_map())
        if best is None or rep.wall_time < best.wall_time:
            best = rep
    return best


def run_bench(cfg: BenchConfig, compare: bool = True) -> BenchReport:
    """Run ``cfg``; unless it is the plain variant, also time plain for the ratio."""
    rep = run_once(cfg)
    if compare and cfg.variant != "plain":
        plain = run_once(replace(cfg, variant="plain"))
        rep.ratios[f"{cfg.variant}_vs_plain"] = rep.wall_time / plain.wall_time
    return rep
