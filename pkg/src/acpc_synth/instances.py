"""Seeded random instance generators for the oracle batteries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dra, Mdp
from .solvers import TERMINAL, Choice, SspInstance


def _row(rng: np.random.Generator, targets, max_support: int) -> dict[int, float]:
    k = int(rng.integers(1, min(max_support, len(targets)) + 1))
    succ = rng.choice(targets, size=k, replace=False)
    w = rng.integers(1, 5, size=k).astype(float)
    w /= w.sum()
    return {int(t): float(p) for t, p in zip(succ, w)}


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int = 2, *, max_support: int = 3,
               costs=(0, 5), labels=None, ap=None, initial: int | None = 0,
               surveillance: str | None = None) -> Mdp:
    """Random MDP; every state enables a non-empty random subset of the actions."""
    rows = {}
    cost = {}
    for s in range(n_states):
        k = int(rng.integers(1, n_actions + 1))
        for a in sorted(rng.choice(n_actions, size=k, replace=False)):
            rows[(s, int(a))] = _row(rng, np.arange(n_states), max_support)
            cost[(s, int(a))] = float(rng.integers(costs[0], costs[1] + 1))
    return Mdp.from_rows(n_states, rows, cost, labels, initial, ap=ap, surveillance=surveillance,
                         action_names=[f"a{i}" for i in range(n_actions)])


@dataclass
class EcInstance:
    mdp: Mdp
    states: frozenset[int]
    actions: dict[int, frozenset[int]]
    sur: frozenset[int]


def random_ec(rng: np.random.Generator, n_states: int, n_actions: int = 2, *, n_sur: int | None = None,
              costs=(0, 5), self_loop: float = 0.3) -> EcInstance:
    """A random MDP that is one end component: action 0 of state i always reaches i+1 (mod n)."""
    rows, cost = {}, {}
    for s in range(n_states):
        k = int(rng.integers(1, n_actions + 1))
        acts = sorted({0} | {int(a) for a in rng.choice(n_actions, size=k, replace=False)})
        for a in acts:
            row = _row(rng, np.arange(n_states), 3)
            if a == 0:
                nxt = (s + 1) % n_states
                row[nxt] = row.get(nxt, 0.0) + 0.5
            if rng.random() < self_loop:
                row[s] = row.get(s, 0.0) + 0.25
            total = sum(row.values())
            rows[(s, a)] = {t: p / total for t, p in row.items()}
            cost[(s, a)] = float(rng.integers(costs[0], costs[1] + 1))
    if n_sur is None:
        n_sur = int(rng.integers(1, n_states + 1))
    sur = frozenset(int(x) for x in rng.choice(n_states, size=n_sur, replace=False))
    m = Mdp.from_rows(n_states, rows, cost, {s: ["sur"] for s in sur}, 0, ap=["sur"], surveillance="sur")
    return EcInstance(m, frozenset(range(n_states)), {s: frozenset(m.enabled(s)) for s in range(n_states)}, sur)


def all_policies_unichain(m: Mdp) -> bool:
    from .oracles import MultichainError, brute_force_acps_gain
    try:
        brute_force_acps_gain(m)
    except MultichainError:
        return False
    return True


def random_unichain_mdp(rng: np.random.Generator, n_states: int, n_actions: int = 2,
                        max_tries: int = 1000) -> tuple[Mdp, int]:
    """Random MDP all of whose stationary policies are unichain, and the number of rejected draws."""
    for tries in range(max_tries):
        m = random_mdp(rng, n_states, n_actions)
        if all_policies_unichain(m):
            return m, tries
    raise RuntimeError("no unichain instance found")


def random_ssp(rng: np.random.Generator, n_states: int, n_actions: int = 2, *, p_exit: float = 0.3,
               zero_cost: float = 0.3, max_tries: int = 1000) -> SspInstance:
    """Random SSP whose every state reaches the terminal almost surely under some policy."""
    from .oracles import brute_force_ssp
    for _ in range(max_tries):
        table = {}
        for s in range(n_states):
            k = int(rng.integers(1, n_actions + 1))
            out = []
            for a in range(k):
                c = 0.0 if rng.random() < zero_cost else float(rng.integers(1, 10))
                if rng.random() < p_exit:
                    row = _row(rng, np.arange(-1, n_states), 3)
                else:
                    row = _row(rng, np.arange(n_states), 3)
                out.append(Choice(a, c, tuple(sorted(row.items()))))
            table[s] = tuple(out)
        inst = SspInstance(table)
        best = brute_force_ssp(inst.choices)
        if all(np.isfinite(v) for v in best.values()):
            return inst
    raise RuntimeError("no proper SSP instance found")


def random_dra(rng: np.random.Generator, n_states: int, ap=("a", "b"), n_pairs: int | None = None) -> Dra:
    letters = [frozenset(c) for c in ([], [ap[0]], [ap[1]], list(ap))]
    table = {}
    for q in range(n_states):
        for w in letters:
            table[(q, w)] = int(rng.integers(0, n_states))
    default = tuple(table[(q, frozenset())] for q in range(n_states))
    if n_pairs is None:
        n_pairs = int(rng.integers(1, 3))
    acc = []
    for _ in range(n_pairs):
        g = frozenset(int(q) for q in range(n_states) if rng.random() < 0.5) or frozenset([int(rng.integers(0, n_states))])
        b = frozenset(int(q) for q in range(n_states) if q not in g and rng.random() < 0.3)
        acc.append((b, g))
    return Dra(n_states, tuple(ap), table, default, 0, tuple(acc))


def random_product_instance(rng: np.random.Generator, max_mdp: int = 6, max_dra: int = 3, *,
                            costs=(1, 10), n_actions: int = 2) -> tuple[Mdp, Dra]:
    """Random labeled MDP over AP {a, b} (surveillance b) and a random Rabin automaton."""
    n = int(rng.integers(2, max_mdp + 1))
    labels = {}
    for s in range(n):
        lab = [p for p in ("a", "b") if rng.random() < 0.4]
        labels[s] = lab
    if not any("b" in lab for lab in labels.values()):
        labels[int(rng.integers(0, n))].append("b")
    m = random_mdp(rng, n, n_actions, costs=costs, labels=labels, ap=["a", "b"], surveillance="b")
    a = random_dra(rng, int(rng.integers(1, max_dra + 1)))
    return m, a


def feasible_product_instance(rng: np.random.Generator, max_mdp: int = 6, max_dra: int = 3, *,
                              costs=(1, 10), policy_limit: int | None = None, max_tries: int = 10_000):
    """Draw until synthesis succeeds (and, optionally, the exhaustive oracle stays small)."""
    from .synthesis import InfeasibleError, synthesize
    for _ in range(max_tries):
        m, a = random_product_instance(rng, max_mdp, max_dra, costs=costs)
        try:
            res = synthesize(m, a)
        except InfeasibleError:
            continue
        if policy_limit is not None and target_policy_count(res) > policy_limit:
            continue
        return m, a, res
    raise RuntimeError("no feasible instance found")


def target_policy_count(res) -> int:
    """Size of the exhaustive policy space (actions plus commit choices) over the product."""
    p = res.product
    total = 1
    for s in range(p.n_states):
        total *= len(p.mdp.enabled(s)) + sum(1 for x in res.maecs if s in x.entry.states)
    return total


__all__ = ["random_mdp", "random_ec", "random_unichain_mdp", "random_ssp", "random_dra",
           "random_product_instance", "feasible_product_instance", "EcInstance", "TERMINAL"]
