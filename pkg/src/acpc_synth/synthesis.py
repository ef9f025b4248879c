"""Controller synthesis on the product MDP.

Pipeline: accepting end components -> per-component reduction and
average-cost solve (value V_N and finite-memory strategy C^V) -> an
acceptance strategy C^phi per component -> SSP selection of the target
components with the reaching strategy C0 -> a round-based composite
controller, optionally projected back onto the original MDP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .graph import MaecEntry, almost_sure_reach, compute_maecs, strongly_connected_components
from .linalg import solve
from .model import Dra, Mdp, ProductMdp, build_product
from .reduction import DEFAULT_ACTION_CAP, ReducedMdp, reduce_maec
from .solvers import AcpsSolution, SspInstance, acps_solve, ssp_solve

INIT_MODE = -1
PHASE1_TIMEOUT = 1_000_000


class InfeasibleError(RuntimeError):
    """No strategy satisfies the specification almost surely."""


class RoundTimeout(RuntimeError):
    pass


class ModelMismatch(RuntimeError):
    pass


# --------------------------------------------------------------------------
# strategy objects

@dataclass(frozen=True)
class FiniteMemoryStrategy:
    """(modes, act, delta, start) with explicit tables over the component states.

    The mode is updated on entering a state: mode' = delta[(mode, s')].
    """

    modes: tuple[int, ...]
    act: Mapping[tuple[int, int], int]
    delta: Mapping[tuple[int, int], int]
    start: Mapping[int, int]

    def action(self, mode: int, s: int) -> int:
        try:
            return self.act[(mode, s)]
        except KeyError:
            raise RuntimeError(f"finite-memory strategy undefined at mode {mode}, state {s}") from None

    def next_mode(self, mode: int, s: int) -> int:
        return self.delta[(mode, s)]


@dataclass(frozen=True)
class RoundSchedule:
    g_max: float
    l_floor: int = 1
    early_exit: bool = True

    def cap(self, i: int, k: int) -> int:
        """Phase-2 cycle cap of round i; a zero-length phase 1 counts as one step."""
        return max(math.ceil(i * max(k, 1) * self.g_max - 1e-9), self.l_floor)

    def early(self, i: int, average: float, value: float) -> bool:
        return self.early_exit and average <= value + 2.0 / i


@dataclass(frozen=True)
class Bundle:
    """Everything the controller needs inside one selected accepting component."""

    index: int
    pair_index: int
    states: frozenset[int]
    value: float
    good: frozenset[int]      # component states whose automaton state is in G
    bad: frozenset[int]       # product states whose automaton state is in B
    c_phi: Mapping[int, int]
    c_v: FiniteMemoryStrategy


@dataclass(frozen=True)
class ControllerTables:
    """Serializable description of the composite controller over product ids."""

    initial: int
    surveillance: frozenset[int]
    c0: Mapping[int, int]
    exits: Mapping[int, int]            # product state -> bundle index chosen there
    bundles: Mapping[int, Bundle]
    schedule: RoundSchedule


@dataclass
class RoundRecord:
    index: int
    k: int
    phase1_cost: float
    cycles: int
    phase2_cost: float
    average: float
    cap: int
    reason: str

    def as_dict(self) -> dict:
        return {"round": self.index, "k": self.k, "phase1_cost": self.phase1_cost,
                "cycles": self.cycles, "phase2_cost": self.phase2_cost,
                "average": self.average, "cap": self.cap, "exit": self.reason}


class CompositeController:
    """Round-based controller: reach with C0, then rounds of C^phi and C^V.

    Protocol: ``reset(s0)``, then repeatedly ``a = action(s)`` and
    ``observe(s, a, cost, s_next)``.
    """

    def __init__(self, tables: ControllerTables):
        self.tables = tables
        self.schedule = tables.schedule
        self.reset(tables.initial)

    def reset(self, s: int) -> None:
        self.phase = "reach"
        self.bundle: Bundle | None = None
        self.round = 0
        self.k = 0
        self.phase1_cost = 0.0
        self.cycles = 0
        self.phase2_cost = 0.0
        self.cap = 0
        self.mode = INIT_MODE
        self.rounds: list[RoundRecord] = []
        self.bad_visits = 0
        self.entry_step: int | None = None
        self.steps = 0
        self._settle(s)

    def _begin_round(self, s: int) -> None:
        self.round += 1
        self.phase = "phase1"
        self.k = 0
        self.phase1_cost = 0.0
        self.cycles = 0
        self.phase2_cost = 0.0

    def _settle(self, s: int) -> None:
        if self.phase == "reach" and s in self.tables.exits:
            self.bundle = self.tables.bundles[self.tables.exits[s]]
            self.entry_step = self.steps
            self._begin_round(s)
        if self.phase == "phase1" and s in self.bundle.good:
            self.phase = "phase2"
            self.cap = self.schedule.cap(self.round, self.k)
            self.mode = self.bundle.c_v.start[s]

    def action(self, s: int) -> int:
        if self.phase == "reach":
            return self.tables.c0[s]
        if self.phase == "phase1":
            return self.bundle.c_phi[s]
        return self.bundle.c_v.action(self.mode, s)

    def observe(self, s: int, a: int, cost: float, t: int) -> None:
        self.steps += 1
        if self.phase == "phase1":
            self.k += 1
            self.phase1_cost += cost
            if self.k > PHASE1_TIMEOUT:
                raise RoundTimeout(f"phase 1 of round {self.round} exceeded {PHASE1_TIMEOUT} steps")
        elif self.phase == "phase2":
            self.phase2_cost += cost
            self.mode = self.bundle.c_v.next_mode(self.mode, t)
            if t in self.tables.surveillance:
                self.cycles += 1
                avg = (self.phase1_cost + self.phase2_cost) / self.cycles
                reason = None
                if self.schedule.early(self.round, avg, self.bundle.value):
                    reason = "early"
                elif self.cycles >= self.cap:
                    reason = "cap"
                if reason:
                    self.rounds.append(RoundRecord(self.round, self.k, self.phase1_cost, self.cycles,
                                                   self.phase2_cost, avg, self.cap, reason))
                    self._begin_round(t)
        if self.bundle is not None and t in self.bundle.bad:
            self.bad_visits += 1
        self._settle(t)


class FiniteMemoryController:
    """C0 until a target component is committed to, then C^V of that component forever."""

    def __init__(self, tables: ControllerTables):
        self.tables = tables
        self.reset(tables.initial)

    def reset(self, s: int) -> None:
        self.phase = "reach"
        self.bundle = None
        self.mode = INIT_MODE
        self.rounds: list[RoundRecord] = []
        self.bad_visits = 0
        self.steps = 0
        self.entry_step = None
        self._settle(s)

    def _settle(self, s):
        if self.phase == "reach" and s in self.tables.exits:
            self.bundle = self.tables.bundles[self.tables.exits[s]]
            self.phase = "phase2"
            self.mode = self.bundle.c_v.start[s]
            self.entry_step = self.steps

    def action(self, s: int) -> int:
        if self.phase == "reach":
            return self.tables.c0[s]
        return self.bundle.c_v.action(self.mode, s)

    def observe(self, s: int, a: int, cost: float, t: int) -> None:
        self.steps += 1
        if self.phase == "phase2":
            self.mode = self.bundle.c_v.next_mode(self.mode, t)
            if t in self.bundle.bad:
                self.bad_visits += 1
        self._settle(t)


class ProjectedController:
    """Runs a product-level controller on the original MDP by tracking the automaton state."""

    def __init__(self, inner, product: ProductMdp):
        self.inner = inner
        self.product = product
        self.reset()

    def reset(self, s: int | None = None) -> None:
        p = self.product
        s = p.base.initial if s is None else s
        self.q = p.dra.initial
        self.inner.reset(self._pid(s, self.q))

    def _pid(self, s: int, q: int) -> int:
        try:
            return self.product.index[(s, q)]
        except KeyError:
            raise ModelMismatch(f"state ({s},{q}) is not in the product") from None

    def action(self, s: int) -> int:
        return self.inner.action(self._pid(s, self.q))

    def observe(self, s: int, a: int, cost: float, t: int) -> None:
        base = self.product.base
        if base.prob(s, a, t) <= 0.0:
            raise ModelMismatch(f"observed transition {s} -{a}-> {t} has zero probability")
        here = self._pid(s, self.q)
        self.q = self.product.dra.step(self.q, base.labels[s])
        self.inner.observe(here, a, cost, self._pid(t, self.q))

    @property
    def rounds(self):
        return self.inner.rounds

    @property
    def bad_visits(self):
        return self.inner.bad_visits


# --------------------------------------------------------------------------
# synthesis steps

@dataclass
class TargetSelection:
    maec_star: list[int]
    c0: dict[int, int]
    exits: dict[int, int]
    optimal_value: float
    values: dict[int, float]
    absorption: dict[int, float]
    certified_value: float
    region: frozenset[int]


def _exit_key(idx: int):
    return ("exit", idx)


def select_target_maecs(p: ProductMdp, entries: list[MaecEntry]) -> TargetSelection:
    """SSP choice of target components.

    ``entries`` must carry values; the list position is the component index.
    Raises InfeasibleError when the initial state cannot reach any of them
    almost surely.
    """
    target = set().union(*(e.states for e in entries)) if entries else set()
    if not target:
        raise InfeasibleError("no accepting end component with surveillance states")
    region, avail = almost_sure_reach(p.mdp, target)
    init = p.mdp.initial
    if init not in region:
        raise InfeasibleError("no strategy almost surely satisfies the specification from the initial state")
    exits = {}
    for idx, e in enumerate(entries):
        for s in e.states:
            exits.setdefault(s, []).append((_exit_key(idx), e.value))
    inst = SspInstance.from_mdp(p.mdp, region, avail, exits, zero_costs=True)
    sol = ssp_solve(inst)
    c0, chosen = {}, {}
    for s, key in sol.policy.items():
        if isinstance(key, tuple) and key and key[0] == "exit":
            chosen[s] = key[1]
        else:
            c0[s] = key
    absorption, cert = _absorption_certificate(p.mdp, c0, chosen, entries, init)
    return TargetSelection(sorted(set(chosen.values())), c0, chosen, sol.value[init], sol.value,
                           absorption, cert, region)


def _absorption_certificate(m: Mdp, c0, chosen, entries, init):
    """Absorption probability per component under C0 from ``init`` and the weighted value."""
    live = [init]
    seen = {init}
    for s in live:
        if s in chosen:
            continue
        for t, _ in m.row(s, c0[s]):
            if t not in seen:
                seen.add(t)
                live.append(t)
    trans = sorted(s for s in seen if s not in chosen)
    pos = {s: i for i, s in enumerate(trans)}
    comps = sorted(set(chosen.values()))
    cpos = {c: j for j, c in enumerate(comps)}
    a = np.eye(len(trans))
    b = np.zeros((len(trans), len(comps)))
    for s in trans:
        for t, pr in m.row(s, c0[s]):
            if t in chosen:
                b[pos[s], cpos[chosen[t]]] += pr
            else:
                a[pos[s], pos[t]] -= pr
    if init in chosen:
        probs = np.zeros(len(comps))
        probs[cpos[chosen[init]]] = 1.0
    else:
        probs = solve(a, b)[pos[init]]
    absorption = {c: float(probs[cpos[c]]) for c in comps if probs[cpos[c]] > 0}
    value = float(sum(probs[cpos[c]] * entries[c].value for c in comps))
    return absorption, value


def build_acceptance_strategy(entry: MaecEntry, p: ProductMdp) -> tuple[dict[int, int], dict[int, float]]:
    """Stationary C^phi reaching the G states of the component at minimum expected cost."""
    _, good = p.dra.acc[entry.pair_index]
    comp = entry.component
    g_states = [s for s in sorted(comp.states) if p.dra_state(s) in good]
    inst = SspInstance.from_mdp(p.mdp, comp.states, comp.actions, {s: [("G", 0.0)] for s in g_states})
    sol = ssp_solve(inst)
    gset = set(g_states)
    strat = {s: (min(comp.actions[s]) if s in gset else sol.policy[s]) for s in sorted(comp.states)}
    return strat, sol.value


def build_acpc_strategy(entry: MaecEntry, p: ProductMdp | Mdp, reduced: ReducedMdp,
                        acps: AcpsSolution) -> FiniteMemoryStrategy:
    """Unwrap the optimal reduced policy into a finite-memory strategy on the component.

    ``p`` may be the product or any Mdp containing the component.
    """
    m = p.mdp if isinstance(p, ProductMdp) else p
    comp = entry.component
    sur = list(reduced.states)
    chosen = {v: acps.policy[v].as_dict() for v in sur}
    s_def = set().union(*(set(z) for z in chosen.values()))
    states = sorted(comp.states)
    zeta_init = {}
    rest = [s for s in states if s not in s_def]
    if rest:
        inst = SspInstance.from_mdp(m, comp.states, comp.actions,
                                    {s: [("def", 0.0)] for s in sorted(s_def)})
        sol = ssp_solve(inst)
        zeta_init = {s: sol.policy[s] for s in rest}
    start = {}
    for s in states:
        if s in chosen:
            start[s] = s
        else:
            owners = [m for m in sur if s in chosen[m]]
            start[s] = owners[0] if owners else INIT_MODE
    modes = tuple(sur) + (INIT_MODE,)
    act, delta = {}, {}
    surset = set(sur)
    for m in modes:
        for s in states:
            if m == INIT_MODE:
                if s in zeta_init:
                    act[(m, s)] = zeta_init[s]
                delta[(m, s)] = s if s in surset else (start[s] if s in s_def else m)
            else:
                if s in chosen[m]:
                    act[(m, s)] = chosen[m][s]
                delta[(m, s)] = s if s in surset else m
    return FiniteMemoryStrategy(modes, act, delta, start)


def strategy_chain(p: ProductMdp | Mdp, fms: FiniteMemoryStrategy, starts: Iterable[int]):
    """The Markov chain on (mode, state) pairs induced by ``fms`` from the given states.

    Returns the pair list and, per pair, (action, cost, [(pair index, prob)]).
    """
    m = p.mdp if isinstance(p, ProductMdp) else p
    init = [(fms.start[s], s) for s in starts]
    index = {x: i for i, x in enumerate(dict.fromkeys(init))}
    order = list(index)
    rows = []
    for mode, s in order:
        a = fms.action(mode, s)
        row = []
        for t, pr in m.row(s, a):
            y = (fms.next_mode(mode, t), t)
            if y not in index:
                index[y] = len(order)
                order.append(y)
            row.append((index[y], pr))
        rows.append((a, m.cost(s, a), row))
    return order, rows


def finite_memory_shortcut(p: ProductMdp, bundles: Mapping[int, Bundle]) -> bool:
    """True when, in every selected component, each recurrent class of the C^V chain meets G."""
    for b in bundles.values():
        order, rows = strategy_chain(p, b.c_v, sorted(b.states))
        succ = {i: [j for j, _ in rows[i][2]] for i in range(len(order))}
        for comp in strongly_connected_components(range(len(order)), succ):
            members = set(comp)
            closed = all(j in members for i in comp for j in succ[i])
            if closed and not any(order[i][1] in b.good for i in comp):
                return False
    return True


@dataclass
class MaecSolution:
    entry: MaecEntry
    reduced: ReducedMdp | None
    acps: AcpsSolution | None
    value: float


@dataclass
class SynthesisResult:
    product: ProductMdp
    maecs: list[MaecSolution]
    selection: TargetSelection
    tables: ControllerTables
    shortcut_available: bool
    use_shortcut: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal_value(self) -> float:
        return self.selection.optimal_value

    @property
    def maec_star(self) -> list[MaecEntry]:
        return [self.maecs[i].entry for i in self.selection.maec_star]

    def controller(self, shortcut: bool | None = None):
        use = self.use_shortcut if shortcut is None else shortcut
        if use and not self.shortcut_available:
            raise ValueError("finite-memory shortcut is not available for this instance")
        return FiniteMemoryController(self.tables) if use else CompositeController(self.tables)

    def projected_controller(self, shortcut: bool | None = None) -> ProjectedController:
        return ProjectedController(self.controller(shortcut), self.product)


def solve_maecs(p: ProductMdp, action_cap: int = DEFAULT_ACTION_CAP, tol: float = 1e-10) -> list[MaecSolution]:
    """Reduce every accepting component with surveillance states and solve its average-cost problem."""
    out = []
    for e in compute_maecs(p):
        if not (e.states & p.surveillance):
            continue
        red = reduce_maec(p.mdp, e.states, e.component.actions, p.surveillance, action_cap=action_cap)
        sol = acps_solve(red, tol=tol)
        out.append(MaecSolution(MaecEntry(e.component, e.pair_index, sol.gain), red, sol, sol.gain))
    return out


def synthesize(m: Mdp, dra: Dra, pi_sur: str | None = None, *, action_cap: int = DEFAULT_ACTION_CAP,
               tol: float = 1e-10, early_exit: bool = True, l_floor: int = 1,
               shortcut: bool = False) -> SynthesisResult:
    """Optimal ACPC controller for ``m`` under the Rabin condition of ``dra``."""
    p = build_product(m, dra, pi_sur)
    if not p.surveillance:
        raise InfeasibleError(f"no state is labeled with the surveillance proposition {p.pi_sur!r}")
    sols = solve_maecs(p, action_cap, tol)
    if not sols:
        raise InfeasibleError("no accepting end component contains a surveillance state")
    entries = [s.entry for s in sols]
    sel = select_target_maecs(p, entries)
    bundles = {}
    for idx in sel.maec_star:
        e = entries[idx]
        bad, good = dra.acc[e.pair_index]
        c_phi, _ = build_acceptance_strategy(e, p)
        c_v = build_acpc_strategy(e, p, sols[idx].reduced, sols[idx].acps)
        bundles[idx] = Bundle(idx, e.pair_index, e.states, e.value,
                              frozenset(s for s in e.states if p.dra_state(s) in good),
                              p.states_in(bad), c_phi, c_v)
    schedule = RoundSchedule(p.mdp.max_cost(), l_floor, early_exit)
    tables = ControllerTables(p.mdp.initial, p.surveillance, sel.c0, sel.exits, bundles, schedule)
    avail = finite_memory_shortcut(p, bundles)
    diag = {
        "product_states": p.n_states,
        "maec_count": len(sols),
        "maec_sizes": [len(s.entry.states) for s in sols],
        "reduced_states": [len(s.reduced.states) for s in sols],
        "reduced_actions": [s.reduced.n_actions() for s in sols],
        "acps_iterations": [s.acps.iterations for s in sols],
        "maec_values": [s.value for s in sols],
        "certified_value": sel.certified_value,
        "absorption": {str(k): v for k, v in sel.absorption.items()},
        "g_max": schedule.g_max,
    }
    return SynthesisResult(p, sols, sel, tables, avail, shortcut and avail, diag)


def projection_tables(result: SynthesisResult) -> dict:
    """Per-MDP-state action tables of C0, C^phi and C^V, split by automaton state (and mode)."""
    p = result.product
    names = p.base.action_names
    sname = p.base.state_names

    def split(strategy: Mapping[int, int]):
        out: dict[int, dict[str, str]] = {}
        for pid, a in sorted(strategy.items()):
            s, q = p.pairs[pid]
            out.setdefault(q, {})[sname[s]] = names[a]
        return out

    tables = {"C_init": split(result.tables.c0), "C_p1": {}, "C_p2": {}}
    for idx, b in sorted(result.tables.bundles.items()):
        tables["C_p1"][idx] = split(b.c_phi)
        by_mode: dict = {}
        for (mode, pid), a in sorted(b.c_v.act.items()):
            s, q = p.pairs[pid]
            label = "init" if mode == INIT_MODE else p.mdp.state_names[mode]
            by_mode.setdefault(label, {}).setdefault(q, {})[sname[s]] = names[a]
        tables["C_p2"][idx] = by_mode
    return tables
