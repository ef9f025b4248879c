"""Seeded Monte-Carlo execution of controllers with surveillance-cycle accounting.

Random numbers come from SplitMix64 so traces are reproducible bit for bit
on any platform: the state advances by 0x9E3779B97F4A7C15, the output is
the standard two-multiply finalizer, and a uniform draw is the top 53 bits
scaled by 2**-53.  Each run owns one stream seeded with its run seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .model import Mdp

MASK64 = (1 << 64) - 1


class SimulationError(RuntimeError):
    pass


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)


class _Kernel:
    """Cumulative transition rows for inverse-CDF sampling in row order."""

    def __init__(self, m: Mdp):
        self.m = m
        self.rows = {}
        for key, row in m.transitions.items():
            acc, cum = 0.0, []
            for _, p in row:
                acc += p
                cum.append(acc)
            self.rows[key] = ([t for t, _ in row], cum)

    def sample(self, s: int, a: int, u: float) -> int:
        try:
            succ, cum = self.rows[(s, a)]
        except KeyError:
            raise SimulationError(f"controller chose action {a} which is not enabled at state {s}") from None
        for t, c in zip(succ, cum):
            if u < c:
                return t
        return succ[-1]


def sample_successor(m: Mdp, s: int, a: int, u: float) -> int:
    """Inverse-CDF draw from the row of (s, a) for a uniform ``u`` in [0, 1)."""
    return _Kernel(m).sample(s, a, u)


def step_controller(ctrl, m: Mdp, s: int, rng: SplitMix64, kernel: _Kernel | None = None) -> tuple[int, int, float]:
    """One closed-loop step: (action, next state, cost); the controller observes it."""
    a = ctrl.action(s)
    kernel = kernel or _Kernel(m)
    t = kernel.sample(s, a, rng.uniform())
    c = m.cost(s, a)
    ctrl.observe(s, a, c, t)
    return a, t, c


@dataclass
class RunTrace:
    seed: int
    states: list[int] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    cycle_marks: list[int] = field(default_factory=list)

    @property
    def cycles_completed(self) -> int:
        return len(self.cycle_marks)

    @property
    def sharp(self) -> int:
        """Completed cycles plus one."""
        return len(self.cycle_marks) + 1

    def total_cost(self) -> float:
        return math.fsum(self.costs)


@dataclass
class SimulationReport:
    seed: int
    rounds: list[dict]
    total_steps: int
    total_cost: float
    cycles: int
    acpc: float | None
    acpc_sharp: float
    trajectory: list[float]
    bad_visits: int
    entry_step: int | None
    value: float | None
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "seed": self.seed,
            "rounds": self.rounds,
            "total_steps": self.total_steps,
            "total_cost": self.total_cost,
            "cycles": self.cycles,
            "acpc": self.acpc,
            "acpc_sharp": self.acpc_sharp,
            "trajectory": self.trajectory,
            "bad_visits_after_entry": self.bad_visits,
            "entry_step": self.entry_step,
            "value": self.value,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def _surveillance(m: Mdp, sur):
    if sur is not None:
        return frozenset(sur)
    return m.surveillance_states()


def _report(ctrl, trace: RunTrace, traj: list[float], wall: float) -> SimulationReport:
    cost = trace.total_cost()
    n = trace.cycles_completed
    bundle = getattr(getattr(ctrl, "inner", ctrl), "bundle", None)
    return SimulationReport(
        trace.seed, [r.as_dict() for r in ctrl.rounds], len(trace.actions), cost, n,
        cost / n if n else None, cost / (n + 1), traj, ctrl.bad_visits,
        getattr(getattr(ctrl, "inner", ctrl), "entry_step", None),
        None if bundle is None else bundle.value, wall,
    )


def run_rounds(ctrl, m: Mdp, rounds: int, seed: int, *, sur: Iterable[int] | None = None,
               max_steps: int = 50_000_000, keep_trace: bool = True) -> tuple[SimulationReport, RunTrace]:
    """Run the reach phase and ``rounds`` complete rounds of a round-based controller."""
    t0 = time.perf_counter()
    sur = _surveillance(m, sur)
    kernel = _Kernel(m)
    rng = SplitMix64(seed)
    s = m.initial
    ctrl.reset(s)
    trace = RunTrace(seed, [s])
    traj: list[float] = []
    cost_sum = 0.0
    steps = 0
    while len(ctrl.rounds) < rounds:
        if steps >= max_steps:
            raise SimulationError(f"step budget {max_steps} exhausted after {len(ctrl.rounds)} rounds")
        done = len(ctrl.rounds)
        a, t, c = step_controller(ctrl, m, s, rng, kernel)
        steps += 1
        cost_sum += c
        trace.actions.append(a)
        trace.costs.append(c)
        if keep_trace:
            trace.states.append(t)
        if t in sur:
            trace.cycle_marks.append(steps)
        if len(ctrl.rounds) > done:
            traj.append(cost_sum / (len(trace.cycle_marks) + 1))
        s = t
    return _report(ctrl, trace, traj, time.perf_counter() - t0), trace


def run_cycles(ctrl, m: Mdp, cycles: int, seed: int, *, sur: Iterable[int] | None = None,
               max_steps: int = 50_000_000) -> tuple[SimulationReport, RunTrace]:
    """Run any controller until ``cycles`` surveillance cycles have been completed."""
    t0 = time.perf_counter()
    sur = _surveillance(m, sur)
    kernel = _Kernel(m)
    rng = SplitMix64(seed)
    s = m.initial
    ctrl.reset(s)
    trace = RunTrace(seed, [s])
    steps = 0
    while len(trace.cycle_marks) < cycles:
        if steps >= max_steps:
            raise SimulationError(f"step budget {max_steps} exhausted")
        a, t, c = step_controller(ctrl, m, s, rng, kernel)
        steps += 1
        trace.actions.append(a)
        trace.costs.append(c)
        trace.states.append(t)
        if t in sur:
            trace.cycle_marks.append(steps)
        s = t
    return _report(ctrl, trace, [], time.perf_counter() - t0), trace


def run_batch(make_controller: Callable[[], object], m: Mdp, rounds: int, seeds: Sequence[int],
              **kw) -> list[SimulationReport]:
    """Independent runs, one fresh controller per seed, in seed order."""
    return [run_rounds(make_controller(), m, rounds, sd, keep_trace=False, **kw)[0] for sd in seeds]


def lower_median(xs: Sequence[float]):
    ys = sorted(xs)
    return ys[(len(ys) - 1) // 2]


def summarize(reports: Sequence[SimulationReport]) -> dict:
    """Aggregate statistics over a batch of reports."""
    if not reports:
        raise ValueError("summarize needs at least one report")
    cycles = [r["cycles"] for rep in reports for r in rep.rounds]
    horizon = max(len(rep.trajectory) for rep in reports)
    traj = []
    for i in range(horizon):
        vals = [rep.trajectory[i] for rep in reports if i < len(rep.trajectory)]
        traj.append(math.fsum(vals) / len(vals))
    acpcs = [r.acpc for r in reports if r.acpc is not None]
    return {
        "runs": len(reports),
        "rounds": len(cycles),
        "mean_cycles_per_round": math.fsum(cycles) / len(cycles) if cycles else 0.0,
        "median_cycles_per_round": lower_median(cycles) if cycles else 0,
        "mean_acpc": math.fsum(acpcs) / len(acpcs) if acpcs else None,
        "mean_acpc_sharp": math.fsum(r.acpc_sharp for r in reports) / len(reports),
        "early_exits": sum(1 for rep in reports for r in rep.rounds if r["exit"] == "early"),
        "cap_exits": sum(1 for rep in reports for r in rep.rounds if r["exit"] == "cap"),
        "trajectory": traj,
    }
