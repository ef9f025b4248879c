"""Reduction of an accepting end component to its surveillance states.

Non-surveillance states are eliminated one at a time.  The actions of the
reduced MDP are partial stationary strategies of the component: from a
surveillance state ``v`` an action leads, with the stored probabilities,
to the first surveillance state visited after leaving ``v``, at the stored
expected cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import Mdp
from .solvers import Choice

DEFAULT_ACTION_CAP = 200_000


class ReductionError(ValueError):
    pass


class ActionCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ReducedAction:
    """A partial stationary strategy used as an action of the reduced MDP."""

    source: int
    assignment: tuple[tuple[int, int], ...]
    row: tuple[tuple[int, float], ...]
    cost: float

    def as_dict(self) -> dict[int, int]:
        return dict(self.assignment)

    def domain(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.assignment)


@dataclass(frozen=True, eq=False)
class ReducedMdp:
    states: tuple[int, ...]
    actions: Mapping[int, tuple[ReducedAction, ...]]
    component: frozenset[int]
    elimination_order: tuple[int, ...]

    def choices(self):
        return {v: tuple(Choice(z, z.cost, z.row) for z in self.actions[v]) for v in self.states}

    def n_actions(self) -> int:
        return sum(len(a) for a in self.actions.values())


class _Act:
    __slots__ = ("assign", "row", "cost")

    def __init__(self, assign: dict, row: dict, cost: float):
        self.assign = assign
        self.row = row
        self.cost = cost

    def key(self):
        return tuple(sorted(self.assign.items()))


def _conflict(a: dict, b: dict) -> bool:
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    return any(s in big and big[s] != act for s, act in small.items())


def reduce_maec(m: Mdp, states: Iterable[int], actions: Mapping[int, Iterable[int]],
                surveillance: Iterable[int], order: Sequence[int] | None = None,
                action_cap: int = DEFAULT_ACTION_CAP) -> ReducedMdp:
    """Eliminate the non-surveillance states of the end component (states, actions).

    ``order`` fixes the elimination order (default: ascending ids).  Every
    incoming action of the eliminated state ``v`` is combined with every
    compatible outgoing action of ``v`` that leaves ``v`` with positive
    probability; incoming actions are then retired, so no remaining action
    puts mass on an eliminated state.
    """
    states = sorted(states)
    sset = set(states)
    sur = sorted(set(surveillance) & sset)
    if not sur:
        raise ReductionError("component has no surveillance state")
    rest = [s for s in states if s not in set(sur)]
    if order is None:
        order = rest
    elif sorted(order) != rest:
        raise ReductionError("elimination order must list exactly the non-surveillance states")

    X: dict[int, list[_Act]] = {}
    for v in states:
        X[v] = [_Act({v: a}, dict(m.row(v, a)), m.cost(v, a)) for a in sorted(actions[v])]
        for z in X[v]:
            if not set(z.row) <= sset:
                raise ReductionError(f"action {z.assign[v]} at state {v} leaves the component")
    total = sum(len(x) for x in X.values())

    for v in order:
        # P(v, z, v) < 1 decided on the support: merged entries only accumulate
        # positive terms, so a row with no mass outside v is a sure self-loop even
        # when rounding leaves its stored self-probability just below 1
        outgoing = [z for z in X[v] if any(w != v for w in z.row)]
        for u in list(X):
            if u == v:
                continue
            incoming = [z for z in X[u] if z.row.get(v, 0.0) > 0.0]
            if not incoming:
                continue
            kept = [z for z in X[u] if z.row.get(v, 0.0) <= 0.0]
            fresh: dict = {}
            for old in incoming:
                pv = old.row[v]
                for z in outgoing:
                    if _conflict(old.assign, z.assign):
                        continue
                    stay = z.row.get(v, 0.0)
                    f = pv / (1.0 - stay)
                    row = {w: p for w, p in old.row.items() if w != v}
                    for w, p in z.row.items():
                        if w != v:
                            row[w] = row.get(w, 0.0) + f * p
                    new = _Act({**old.assign, **z.assign}, row, old.cost + f * z.cost)
                    fresh.setdefault(new.key(), new)
            total += len(fresh) - len(incoming)
            X[u] = kept + list(fresh.values())
        total -= len(X[v])
        del X[v]
        if total > action_cap:
            raise ActionCapExceeded(
                f"reduced action count {total} exceeds cap {action_cap} "
                "(the reduction is exponential in the component size in the worst case)")

    out = {}
    for v in sur:
        acts = []
        for z in sorted(X[v], key=_Act.key):
            row = tuple(sorted((w, p) for w, p in z.row.items() if p > 0.0))
            acts.append(ReducedAction(v, z.key(), row, z.cost))
        out[v] = tuple(acts)
    return ReducedMdp(tuple(sur), out, frozenset(states), tuple(order))
