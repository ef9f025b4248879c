"""Stochastic shortest path and average-cost-per-stage solvers.

Both work on a generic "choice table": for every state an ordered tuple
of :class:`Choice` objects (key, cost, successor distribution).  The key
is whatever the caller uses to identify the action: an MDP action id, a
synthetic exit label, or a reduced partial strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

from .graph import almost_sure_reach_generic, attractor_strategy, maximal_end_components, strongly_connected_components
from .linalg import SingularSystemError, solve
from .model import Mdp

TERMINAL = -1


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Choice:
    key: Hashable
    cost: float
    succ: tuple[tuple[Hashable, float], ...]

    def support(self) -> frozenset:
        return frozenset(t for t, _ in self.succ)


ChoiceTable = Mapping[Hashable, tuple[Choice, ...]]


def mdp_choices(m: Mdp, states: Iterable[int] | None = None,
                allowed: Mapping[int, Iterable[int]] | None = None,
                zero_costs: bool = False) -> dict[int, tuple[Choice, ...]]:
    states = range(m.n_states) if states is None else sorted(states)
    out = {}
    for s in states:
        acts = m.enabled(s) if allowed is None else sorted(allowed.get(s, ()))
        out[s] = tuple(Choice(a, 0.0 if zero_costs else m.cost(s, a), m.row(s, a)) for a in acts)
    return out


def choice_table(model) -> dict:
    if isinstance(model, Mdp):
        return mdp_choices(model)
    return dict(model.choices())


def supports_of(choices: ChoiceTable) -> dict:
    return {s: {c.key: c.support() for c in cs} for s, cs in choices.items()}


# --------------------------------------------------------------------------
# stochastic shortest path

@dataclass(frozen=True, eq=False)
class SspInstance:
    """SSP over ``choices``; successors equal to TERMINAL absorb at zero cost."""

    choices: Mapping[Hashable, tuple[Choice, ...]]

    @property
    def states(self) -> list:
        return sorted(self.choices)

    @classmethod
    def from_mdp(cls, m: Mdp, states: Iterable[int] | None = None,
                 allowed: Mapping[int, Iterable[int]] | None = None,
                 exits: Mapping[int, Iterable[tuple[Hashable, float]]] | None = None,
                 zero_costs: bool = False) -> "SspInstance":
        """Sub-MDP of ``m`` plus terminal actions ``exits[s] = [(key, cost), ...]``."""
        table = mdp_choices(m, states, allowed, zero_costs)
        for s, extra in (exits or {}).items():
            table[s] = table[s] + tuple(Choice(k, float(c), ((TERMINAL, 1.0),)) for k, c in extra)
        return cls(table)


@dataclass
class SspSolution:
    value: dict
    policy: dict
    iterations: int = 0
    improvements: int = 0
    residual: float = 0.0


@dataclass
class Quotient:
    rep: dict            # state -> representative
    members: dict        # representative -> sorted members
    inner: dict          # representative -> zero-cost EC supports {state: {key: support}}


def collapse_zero_cost_ecs(inst: SspInstance) -> tuple[SspInstance, Quotient]:
    """Collapse every maximal end component built from zero-cost choices.

    The quotient keeps each member's other choices, keyed ``(member, key)``;
    zero-cost choices internal to a collapsed component are dropped.
    """
    zero = {s: {c.key: c.support() for c in cs if c.cost == 0 and TERMINAL not in c.support()}
            for s, cs in inst.choices.items()}
    comps = maximal_end_components(zero)
    rep = {s: s for s in inst.choices}
    members = {s: (s,) for s in inst.choices}
    inner = {}
    for states, acts in comps:
        r = min(states)
        for s in states:
            rep[s] = r
            members.pop(s, None)
        members[r] = tuple(sorted(states))
        inner[r] = {s: {k: zero[s][k] for k in acts[s]} for s in states}
    rep[TERMINAL] = TERMINAL
    table = {}
    for r, group in sorted(members.items()):
        gset = set(group)
        out = []
        for s in group:
            for c in inst.choices[s]:
                if r in inner and c.cost == 0 and c.support() <= gset:
                    continue
                merged: dict = {}
                for t, p in c.succ:
                    merged[rep[t]] = merged.get(rep[t], 0.0) + p
                out.append(Choice((s, c.key), c.cost, tuple(merged.items())))
        table[r] = tuple(out)
    return SspInstance(table), Quotient(rep, members, inner)


def _lift_policy(qpolicy: dict, quot: Quotient) -> dict:
    policy = {}
    for r, (owner, key) in qpolicy.items():
        policy[owner] = key
        if len(quot.members[r]) > 1:
            route = attractor_strategy(quot.inner[r], {owner})
            for s in quot.members[r]:
                if s != owner:
                    policy[s] = route[s]
    return policy


class _Arrays:
    """Flattened choice table for vectorized Bellman updates."""

    def __init__(self, choices: ChoiceTable):
        self.states = sorted(choices)
        self.pos = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        flat = [(s, c) for s in self.states for c in choices[s]]
        self.flat = flat
        self.owner = np.array([self.pos[s] for s, _ in flat], dtype=int)
        self.cost = np.array([c.cost for _, c in flat], dtype=float)
        self.P = np.zeros((len(flat), n))
        for i, (_, c) in enumerate(flat):
            for t, p in c.succ:
                if t != TERMINAL:
                    self.P[i, self.pos[t]] += p
        counts = np.bincount(self.owner, minlength=n)
        if (counts == 0).any():
            raise SolverError("every state needs at least one choice")
        self.starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        self.counts = counts

    def q(self, v):
        return self.cost + self.P @ v

    def minimize(self, q):
        return np.minimum.reduceat(q, self.starts)

    def greedy(self, q, prefer=None, rtol=1e-12):
        """First (ascending) choice within rounding of the minimum, or ``prefer`` if still tied."""
        out = []
        for i in range(len(self.states)):
            lo, hi = self.starts[i], self.starts[i] + self.counts[i]
            block = q[lo:hi]
            best = block.min()
            slack = rtol * max(1.0, abs(best))
            if prefer is not None and block[prefer[i] - lo] <= best + slack:
                out.append(prefer[i])
                continue
            out.append(lo + int(np.flatnonzero(block <= best + slack)[0]))
        return np.array(out, dtype=int)

    def evaluate_ssp(self, pick):
        n = len(self.states)
        a = np.eye(n) - self.P[pick]
        return solve(a, self.cost[pick])


def ssp_solve(inst: SspInstance, tol: float = 1e-12, max_iter: int = 100_000) -> SspSolution:
    """Optimal expected cost to TERMINAL and a stationary optimal policy.

    Value iteration on the zero-cost-EC quotient, followed by exact policy
    evaluation/improvement until the policy is stable.  States without an
    almost-sure path to the terminal raise SolverError.
    """
    supports = supports_of(inst.choices)
    good, _ = almost_sure_reach_generic(supports, {TERMINAL})
    bad = sorted(set(inst.choices) - good)
    if bad:
        raise SolverError(f"states cannot reach the terminal almost surely: {bad}")

    quot_inst, quot = collapse_zero_cost_ecs(inst)
    arr = _Arrays(quot_inst.choices)
    v = np.zeros(len(arr.states))
    it = 0
    residual = math.inf
    while it < max_iter:
        nv = arr.minimize(arr.q(v))
        residual = float(np.max(np.abs(nv - v))) if len(v) else 0.0
        v = nv
        it += 1
        if residual < tol * max(1.0, float(np.max(np.abs(v), initial=0.0))):
            break

    pick = arr.greedy(arr.q(v))
    try:
        v = arr.evaluate_ssp(pick)
    except SingularSystemError:
        route = attractor_strategy(supports_of(quot_inst.choices), {TERMINAL})
        keys = [[c.key for _, c in arr.flat[arr.starts[i]:arr.starts[i] + arr.counts[i]]]
                for i in range(len(arr.states))]
        pick = np.array([arr.starts[i] + keys[i].index(route[s]) for i, s in enumerate(arr.states)])
        v = arr.evaluate_ssp(pick)
    improvements = 0
    while True:
        new = arr.greedy(arr.q(v), prefer=pick, rtol=1e-11)
        if np.array_equal(new, pick):
            break
        pick = new
        v = arr.evaluate_ssp(pick)
        improvements += 1
        if improvements > 10_000:
            raise SolverError("policy improvement did not stabilize")
    residual = float(np.max(np.abs(arr.minimize(arr.q(v)) - v), initial=0.0))
    if residual > 1e-9 * max(1.0, float(np.max(np.abs(v), initial=0.0))):
        raise SolverError(f"Bellman residual {residual:.3g} after policy iteration")

    qpolicy = {s: arr.flat[pick[i]][1].key for i, s in enumerate(arr.states)}
    policy = _lift_policy(qpolicy, quot)
    value = {s: float(v[arr.pos[quot.rep[s]]]) for s in inst.choices}
    return SspSolution(value, policy, it, improvements, residual)


# --------------------------------------------------------------------------
# average cost per stage

@dataclass
class AcpsSolution:
    gain: float
    bias: dict
    policy: dict
    iterations: int = 0
    span: float = 0.0
    state_gains: dict = field(default_factory=dict)


def evaluate_policy_gain(choices: ChoiceTable, policy: Mapping) -> tuple[dict, dict | None]:
    """Exact per-state gain of a stationary policy (multichain allowed) and, if unichain, its bias."""
    states = sorted(choices)
    pos = {s: i for i, s in enumerate(states)}
    n = len(states)
    chosen = {s: next(c for c in choices[s] if c.key == policy[s]) for s in states}
    P = np.zeros((n, n))
    c = np.zeros(n)
    for s in states:
        c[pos[s]] = chosen[s].cost
        for t, p in chosen[s].succ:
            P[pos[s], pos[t]] += p
    succ = {s: [t for t, _ in chosen[s].succ] for s in states}
    sccs = strongly_connected_components(states, succ)
    closed = [comp for comp in sccs if all(t in set(comp) for s in comp for t in succ[s])]
    gain = np.zeros(n)
    class_gain = []
    for comp in closed:
        idx = [pos[s] for s in comp]
        sub = P[np.ix_(idx, idx)]
        k = len(idx)
        a = (sub - np.eye(k)).T
        a[-1, :] = 1.0
        b = np.zeros(k)
        b[-1] = 1.0
        pi = solve(a, b)
        g = float(pi @ c[idx])
        class_gain.append(g)
        gain[idx] = g
    in_class = {pos[s] for comp in closed for s in comp}
    trans = [i for i in range(n) if i not in in_class]
    if trans:
        absorb = np.zeros(len(trans))
        for comp, g in zip(closed, class_gain):
            idx = [pos[s] for s in comp]
            absorb += P[np.ix_(trans, idx)].sum(axis=1) * g
        a = np.eye(len(trans)) - P[np.ix_(trans, trans)]
        gain[trans] = solve(a, absorb)
    bias = None
    if len(closed) == 1:
        ref = pos[sorted(closed[0])[0]]
        g = class_gain[0]
        a = np.eye(n) - P
        b = c - g
        a[ref, :] = 0.0
        a[ref, ref] = 1.0
        b[ref] = 0.0
        h = solve(a, b)
        bias = {s: float(h[pos[s]]) for s in states}
    return {s: float(gain[pos[s]]) for s in states}, bias


def acps_solve(model, kappa: float = 0.5, tol: float = 1e-10, max_iter: int = 1_000_000,
               cert_tol: float = 1e-8) -> AcpsSolution:
    """Optimal average cost per stage of a communicating model.

    Relative value iteration on the aperiodicity transform
    P' = kappa*I + (1-kappa)*P with costs scaled by (1-kappa); the gain is
    un-scaled on output.  The greedy policy is then evaluated exactly and
    must reproduce the gain at every state.
    """
    choices = choice_table(model)
    arr = _Arrays(choices)
    n = len(arr.states)
    Pt = (1 - kappa) * arr.P
    Pt[np.arange(len(arr.flat)), arr.owner] += kappa
    ct = (1 - kappa) * arr.cost
    h = np.zeros(n)
    span = math.inf
    it = 0
    diff = np.zeros(n)
    while it < max_iter:
        th = np.minimum.reduceat(ct + Pt @ h, arr.starts)
        diff = th - h
        span = float(diff.max() - diff.min())
        h = th - th[0]
        it += 1
        if span < tol:
            break
    else:
        raise SolverError(f"relative value iteration did not converge (span {span:.3g})")
    rvi_gain = float(diff.max() + diff.min()) / 2 / (1 - kappa)
    pick = arr.greedy(arr.cost + arr.P @ h)
    policy = {s: arr.flat[pick[i]][1].key for i, s in enumerate(arr.states)}
    gains, bias = evaluate_policy_gain(choices, policy)
    worst = max(abs(g - rvi_gain) for g in gains.values())
    if worst > cert_tol * max(1.0, abs(rvi_gain)):
        raise SolverError(f"gain certificate failed: policy gain deviates by {worst:.3g}")
    gain = gains[arr.states[0]]
    if bias is None:
        bias = {s: float(h[i]) for i, s in enumerate(arr.states)}
    return AcpsSolution(gain, bias, policy, it, span, gains)
