"""Brute-force and exact linear-algebra oracles.

Nothing here calls the graph or solver modules; the only shared kernel is
the LU solve in :mod:`linalg`.  All routines enumerate stationary
deterministic policies and are guarded to desk-scale inputs.
"""

from __future__ import annotations

import itertools
import math
from typing import Hashable, Iterable, Mapping

import numpy as np

from .linalg import solve
from .model import Mdp

TERMINAL = -1


class OracleError(ValueError):
    pass


class MultichainError(OracleError):
    pass


def _table(model) -> dict:
    """state -> list of (key, cost, [(succ, p), ...]) for an Mdp or any object with choices()."""
    if isinstance(model, Mdp):
        return {s: [(a, model.cost(s, a), list(model.row(s, a))) for a in model.enabled(s)]
                for s in range(model.n_states)}
    if hasattr(model, "choices"):
        model = model.choices()
    return {s: [(c.key, c.cost, list(c.succ)) for c in cs] for s, cs in model.items()}


def _reach(start: Iterable, succ: Mapping) -> set:
    seen = set(start)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for t in succ.get(s, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def _closed_classes(states: list, succ: Mapping) -> list[list]:
    """Bottom SCCs by pairwise reachability (quadratic but independent of Tarjan)."""
    reach = {s: _reach([s], succ) for s in states}
    out, done = [], set()
    for s in states:
        if s in done:
            continue
        cls = sorted(t for t in reach[s] if s in reach[t])
        if all(reach[t] <= set(cls) for t in cls):
            out.append(cls)
        done.update(cls)
    return out


def _policies(table: Mapping, limit: int):
    states = sorted(table)
    total = math.prod(len(table[s]) for s in states)
    if total > limit:
        raise OracleError(f"{total} stationary policies exceed the enumeration limit {limit}")
    for combo in itertools.product(*(range(len(table[s])) for s in states)):
        yield {s: table[s][i] for s, i in zip(states, combo)}


def enumerate_ecs(m: Mdp, max_states: int = 8) -> list[tuple[frozenset[int], dict[int, frozenset[int]]]]:
    """Every end component (state set, non-empty action sets) of ``m``."""
    if m.n_states > max_states:
        raise OracleError(f"enumerate_ecs limited to {max_states} states")
    out = []
    for r in range(1, m.n_states + 1):
        for subset in itertools.combinations(range(m.n_states), r):
            sset = set(subset)
            closed = {s: [a for a in m.enabled(s) if m.support(s, a) <= sset] for s in subset}
            if any(not acts for acts in closed.values()):
                continue
            choices = [
                [frozenset(c) for k in range(1, len(closed[s]) + 1) for c in itertools.combinations(closed[s], k)]
                for s in subset
            ]
            for pick in itertools.product(*choices):
                acts = dict(zip(subset, pick))
                succ = {s: set().union(*(m.support(s, a) for a in acts[s])) for s in subset}
                if all(_reach([s], succ) == sset for s in subset):
                    out.append((frozenset(subset), acts))
    return out


def maximal_ecs(ecs):
    """Maximal elements (w.r.t. state and action inclusion) of an EC list."""
    def within(a, b):
        return a[0] <= b[0] and all(a[1][s] <= b[1][s] for s in a[0])
    return [e for e in ecs if not any(f is not e and within(e, f) and e != f for f in ecs)]


def absorbing_expectations(m: Mdp, zeta: Mapping[int, int], targets: Iterable[int],
                           starts: Iterable[int] | None = None) -> dict[int, tuple[dict[int, float], float]]:
    """First-hit distribution over ``targets`` and expected cost, after one step from each start.

    From ``v`` the action zeta[v] is applied once; afterwards the run follows
    zeta until it enters a target state.  Returns {v: ({target: prob}, cost)}.
    """
    targets = set(targets)
    starts = sorted(zeta) if starts is None else list(starts)
    out = {}
    for v in starts:
        if v not in zeta:
            raise OracleError(f"partial strategy undefined at start {v}")
        inner = sorted(_reach([t for t, _ in m.row(v, zeta[v]) if t not in targets],
                              {u: [t for t, _ in m.row(u, zeta[u]) if t not in targets]
                               for u in zeta}))
        missing = [u for u in inner if u not in zeta]
        if missing:
            raise OracleError(f"run leaves the strategy domain at {missing}")
        pos = {u: i for i, u in enumerate(inner)}
        tl = sorted(targets)
        tpos = {t: j for j, t in enumerate(tl)}
        n = len(inner)
        a = np.eye(n)
        b = np.zeros((n, len(tl) + 1))
        for u in inner:
            act = zeta[u]
            b[pos[u], -1] = m.cost(u, act)
            for t, p in m.row(u, act):
                if t in targets:
                    b[pos[u], tpos[t]] += p
                else:
                    a[pos[u], pos[t]] -= p
        x = solve(a, b) if n else np.zeros((0, len(tl) + 1))
        hit = np.zeros(len(tl))
        cost = m.cost(v, zeta[v])
        for t, p in m.row(v, zeta[v]):
            if t in targets:
                hit[tpos[t]] += p
            else:
                hit += p * x[pos[t], :-1]
                cost += p * x[pos[t], -1]
        if abs(hit.sum() - 1.0) > 1e-9:
            raise OracleError(f"targets not reached almost surely from {v} (mass {hit.sum():.12g})")
        out[v] = ({t: float(hit[tpos[t]]) for t in tl if hit[tpos[t]] > 0}, float(cost))
    return out


def chain_stationary(P: np.ndarray, cls: list[int]) -> np.ndarray:
    sub = P[np.ix_(cls, cls)]
    k = len(cls)
    a = (sub - np.eye(k)).T
    a[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    return solve(a, rhs)


def _chain(table, policy_rows, states):
    pos = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    c = np.zeros(n)
    succ = {}
    for s in states:
        _, cost, row = policy_rows[s]
        c[pos[s]] = cost
        succ[pos[s]] = [pos[t] for t, p in row if p > 0]
        for t, p in row:
            P[pos[s], pos[t]] += p
    return P, c, succ


def brute_force_acps_gain(model, max_states: int = 5, limit: int = 100_000) -> float:
    """Minimum average cost per stage over stationary deterministic policies (all must be unichain)."""
    table = _table(model)
    states = sorted(table)
    if len(states) > max_states:
        raise OracleError(f"brute_force_acps_gain limited to {max_states} states")
    best = math.inf
    for pol in _policies(table, limit):
        P, c, succ = _chain(table, pol, states)
        classes = _closed_classes(list(range(len(states))), succ)
        if len(classes) != 1:
            raise MultichainError("instance has a multichain policy")
        pi = chain_stationary(P, classes[0])
        best = min(best, float(pi @ c[classes[0]]))
    return best


def chain_renewal_reward(P: np.ndarray, c: np.ndarray, sur_mask: np.ndarray, start: int | None = None) -> float:
    """Long-run cost per surveillance visit of a finite Markov chain.

    Per closed class: (sum pi*c) / (sum over surveillance of pi).  If the
    chain has several closed classes, ``start`` is required and the class
    values are weighted by their absorption probabilities.
    """
    n = len(c)
    succ = {i: list(np.flatnonzero(P[i] > 0)) for i in range(n)}
    classes = _closed_classes(list(range(n)), succ)
    values = []
    for cls in classes:
        pi = chain_stationary(P, cls)
        rate = float(pi @ sur_mask[cls].astype(float))
        values.append(math.inf if rate <= 1e-15 else float(pi @ c[cls]) / rate)
    if len(classes) == 1:
        if math.isinf(values[0]):
            raise OracleError("surveillance states are not recurrent under the policy")
        return values[0]
    if start is None:
        raise MultichainError("multichain policy needs a start state")
    reach = _reach([start], succ)
    weights = []
    trans = sorted(i for i in reach if not any(i in cl for cl in classes))
    tpos = {s: k for k, s in enumerate(trans)}
    for cls, val in zip(classes, values):
        if start in cls:
            w = 1.0
        elif not trans or start not in tpos:
            w = 0.0
        else:
            a = np.eye(len(trans)) - P[np.ix_(trans, trans)]
            b = P[np.ix_(trans, cls)].sum(axis=1)
            w = float(solve(a, b)[tpos[start]])
        weights.append(w)
    total = 0.0
    for w, val in zip(weights, values):
        if w > 1e-12:
            if math.isinf(val):
                raise OracleError("surveillance states are not recurrent under the policy")
            total += w * val
    return total


def renewal_reward(m, policy: Mapping, sur: Iterable, start=None) -> float:
    """Cost per surveillance cycle of the stationary ``policy`` on ``m`` (an Mdp or choice table)."""
    table = _table(m)
    states = sorted(policy)
    rows = {}
    for s in states:
        match = [ch for ch in table[s] if ch[0] == policy[s]]
        if not match:
            raise OracleError(f"policy action {policy[s]!r} not available at {s}")
        rows[s] = match[0]
    P, c, _ = _chain(table, rows, states)
    sur = set(sur)
    mask = np.array([s in sur for s in states])
    return chain_renewal_reward(P, c, mask, None if start is None else states.index(start))


def brute_force_acpc(m: Mdp, states: Iterable[int], actions: Mapping[int, Iterable[int]],
                     sur: Iterable[int], limit: int = 100_000) -> float:
    """Minimum cost per surveillance cycle over unichain stationary policies of a sub-MDP.

    Policies whose closed class misses the surveillance states are skipped,
    as are multichain ones (inside an end component every closed class of
    a multichain policy is also the class of some unichain policy).
    """
    states = sorted(states)
    sur = set(sur)
    table = {s: [(a, m.cost(s, a), list(m.row(s, a))) for a in sorted(actions[s])] for s in states}
    best = math.inf
    for pol in _policies(table, limit):
        P, c, succ = _chain(table, pol, states)
        classes = _closed_classes(list(range(len(states))), succ)
        if len(classes) != 1:
            continue
        pi = chain_stationary(P, classes[0])
        rate = sum(pi[k] for k, i in enumerate(classes[0]) if states[i] in sur)
        if rate > 1e-15:
            best = min(best, float(pi @ c[classes[0]]) / rate)
    return best


def _proper_values(table, pol, states, from_states=None):
    """Expected cost to TERMINAL under ``pol``, or None if some relevant state misses it."""
    succ = {s: [t for t, p in pol[s][2] if p > 0] for s in states}
    relevant = sorted(_reach(from_states, succ) - {TERMINAL}) if from_states is not None else states
    for s in relevant:
        if TERMINAL not in _reach([s], succ):
            return None
    pos = {s: i for i, s in enumerate(relevant)}
    n = len(relevant)
    a = np.eye(n)
    b = np.zeros(n)
    for s in relevant:
        b[pos[s]] = pol[s][1]
        for t, p in pol[s][2]:
            if t != TERMINAL:
                a[pos[s], pos[t]] -= p
    x = solve(a, b)
    return {s: float(x[pos[s]]) for s in relevant}


def brute_force_ssp(choices: Mapping[Hashable, Iterable], limit: int = 100_000) -> dict:
    """Per-state minimum expected cost to TERMINAL over proper stationary policies."""
    table = _table(choices)
    states = sorted(table)
    best = {s: math.inf for s in states}
    for pol in _policies(table, limit):
        vals = _proper_values(table, pol, states)
        if vals is None:
            continue
        for s in states:
            best[s] = min(best[s], vals[s])
    return best


def brute_force_max_reach(m: Mdp, target: Iterable[int], limit: int = 100_000) -> dict[int, float]:
    """Maximum probability of reaching ``target`` from every state."""
    target = set(target)
    table = _table(m)
    states = sorted(table)
    best = {s: (1.0 if s in target else 0.0) for s in states}
    free = [s for s in states if s not in target]
    sub = {s: table[s] for s in free}
    for pol in _policies(sub, limit):
        succ = {s: [t for t, p in pol[s][2]] for s in free}
        can = [s for s in free if _reach([s], succ) & target]
        pos = {s: i for i, s in enumerate(can)}
        a = np.eye(len(can))
        b = np.zeros(len(can))
        for s in can:
            for t, p in pol[s][2]:
                if t in target:
                    b[pos[s]] += p
                elif t in pos:
                    a[pos[s], pos[t]] -= p
        x = solve(a, b) if can else []
        for s in can:
            best[s] = max(best[s], float(x[pos[s]]))
    return best


def brute_force_target_value(m: Mdp, exits: Mapping[int, Iterable[tuple[Hashable, float]]],
                             start: int, limit: int = 100_000) -> float:
    """Minimum over stationary policies of the expected exit cost from ``start``.

    ``exits[s]`` lists (key, value) pairs: stopping at ``s`` while committing to
    the component ``key`` costs ``value``.  Every other action costs 0, so
    the result is the minimum weighted component value over strategies that
    commit almost surely.
    """
    table = {s: [(a, 0.0, list(m.row(s, a))) for a in m.enabled(s)] for s in range(m.n_states)}
    for s, extra in exits.items():
        table[s] = table[s] + [(k, float(v), [(TERMINAL, 1.0)]) for k, v in extra]
    # only states reachable from start matter; restrict enumeration to them
    reach = _reach([start], {s: [t for _, _, row in table[s] for t, _ in row if t != TERMINAL] for s in table})
    table = {s: table[s] for s in sorted(reach)}
    best = math.inf
    for pol in _policies(table, limit):
        vals = _proper_values(table, pol, sorted(table), from_states=[start])
        if vals is not None:
            best = min(best, vals[start])
    return best


def policy_count(table_or_mdp) -> int:
    table = _table(table_or_mdp)
    return math.prod(len(v) for v in table.values())
