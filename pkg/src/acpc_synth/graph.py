"""Qualitative graph algorithms: SCCs, (accepting) end components, almost-sure reachability."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

from .model import Mdp, ProductMdp

# generic sub-MDP shape: state -> {action key -> support}
ActionSupports = Mapping[Hashable, Mapping[Hashable, frozenset]]


@dataclass(frozen=True, eq=False)
class EndComponent:
    states: frozenset[int]
    actions: Mapping[int, frozenset[int]]

    def key(self):
        return tuple(sorted((s, tuple(sorted(self.actions[s]))) for s in self.states))

    def __eq__(self, other):
        return isinstance(other, EndComponent) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __len__(self):
        return len(self.states)

    def contains(self, other: "EndComponent") -> bool:
        return other.states <= self.states and all(
            other.actions[s] <= self.actions[s] for s in other.states
        )


@dataclass(frozen=True)
class MaecEntry:
    component: EndComponent
    pair_index: int
    value: float | None = None

    @property
    def states(self) -> frozenset[int]:
        return self.component.states


def strongly_connected_components(nodes: Iterable, succ: Mapping) -> list[list]:
    """Tarjan's algorithm with an explicit work stack."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    comps: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(succ.get(root, ())))]
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    if low[v] < low[u]:
                        low[u] = low[v]
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(comp)
    return comps


def maximal_end_components(acts: ActionSupports) -> list[tuple[frozenset, dict]]:
    """MEC decomposition of a generic sub-MDP by iterated SCC refinement.

    Actions whose support leaves the state set are ignored.  Returns
    (states, {state: action keys}) ordered by smallest member.
    """
    avail = {s: {a: supp for a, supp in acts[s].items()} for s in acts}
    alive = set(avail)
    while True:
        # prune actions leaving the live set and states left without actions
        changed = True
        while changed:
            changed = False
            for s in list(alive):
                kept = {a: supp for a, supp in avail[s].items() if supp <= alive}
                if len(kept) != len(avail[s]):
                    avail[s] = kept
                    changed = True
                if not kept:
                    alive.discard(s)
                    changed = True
        succ = {s: sorted(set().union(*avail[s].values()), key=_order) for s in alive}
        comps = strongly_connected_components(sorted(alive, key=_order), succ)
        comp_of = {s: i for i, c in enumerate(comps) for s in c}
        refined = False
        for s in alive:
            mine = {x for x in comps[comp_of[s]]}
            kept = {a: supp for a, supp in avail[s].items() if supp <= mine}
            if len(kept) != len(avail[s]):
                avail[s] = kept
                refined = True
        if not refined:
            break
    out = []
    for c in comps:
        states = frozenset(c)
        out.append((states, {s: frozenset(avail[s]) for s in states}))
    out.sort(key=lambda item: min(item[0], key=_order))
    return out


def _order(x):
    return (0, x, "") if isinstance(x, int) else (1, 0, repr(x))


def mdp_supports(m: Mdp, states: Iterable[int] | None = None,
                 allowed: Mapping[int, Iterable[int]] | None = None) -> dict[int, dict[int, frozenset[int]]]:
    states = range(m.n_states) if states is None else states
    out = {}
    for s in states:
        acts = m.enabled(s) if allowed is None else sorted(allowed.get(s, ()))
        out[s] = {a: m.support(s, a) for a in acts}
    return out


def mec_decompose(m: Mdp, states: Iterable[int] | None = None,
                  allowed: Mapping[int, Iterable[int]] | None = None) -> list[EndComponent]:
    """All maximal end components of ``m`` (optionally of a sub-MDP)."""
    return [EndComponent(s, a) for s, a in maximal_end_components(mdp_supports(m, states, allowed))]


def compute_maecs(p: ProductMdp) -> list[MaecEntry]:
    """Maximal accepting end components, one list entry per (component, pair).

    Entries for different acceptance pairs may share states.
    """
    out = []
    for idx, (bad, good) in enumerate(p.dra.acc):
        keep = [i for i in range(p.n_states) if p.dra_state(i) not in bad]
        for ec in mec_decompose(p.mdp, keep):
            if any(p.dra_state(i) in good for i in ec.states):
                out.append(MaecEntry(ec, idx))
    return out


def almost_sure_reach_generic(acts: ActionSupports, target: Iterable) -> tuple[set, dict]:
    """States that can reach ``target`` with probability 1, plus the actions keeping runs inside."""
    live = set(acts) | set(target)
    target = set(target)
    while True:
        avail = {s: {a for a, supp in acts.get(s, {}).items() if supp <= live} for s in live}
        reach = set(target)
        frontier = True
        while frontier:
            frontier = False
            for s in live - reach:
                if any(acts[s][a] & reach for a in avail[s]):
                    reach.add(s)
                    frontier = True
        if reach == live:
            return live, avail
        live = reach


def almost_sure_reach(m: Mdp, target: Iterable[int], states: Iterable[int] | None = None,
                      allowed: Mapping[int, Iterable[int]] | None = None) -> tuple[frozenset[int], dict[int, frozenset[int]]]:
    """Maximal set W reaching ``target`` almost surely, with per-state actions staying in W.

    Some strategy confined to the returned actions reaches the target with
    probability 1 from every state of W; not every such strategy does
    (self-loops are retained).
    """
    target = set(target)
    if not target:
        raise ValueError("target set must be non-empty")
    w, avail = almost_sure_reach_generic(mdp_supports(m, states, allowed), target)
    return frozenset(w), {s: frozenset(avail[s]) for s in sorted(w)}


def attractor_strategy(acts: ActionSupports, target: Iterable) -> dict:
    """Stationary strategy reaching ``target`` a.s. from every state that can.

    Each state picks the first action (in key order) that stays inside the
    almost-sure region and has a successor in an earlier BFS layer.
    """
    region, avail = almost_sure_reach_generic(acts, target)
    target = set(target)
    layer = set(target)
    choice = {}
    pending = sorted(region - target, key=_order)
    while pending:
        nxt = []
        new = set()
        for s in pending:
            for a in sorted(avail[s], key=_order):
                if acts[s][a] & layer:
                    choice[s] = a
                    new.add(s)
                    break
            else:
                nxt.append(s)
        if not new:
            break
        layer |= new
        pending = nxt
    return choice
