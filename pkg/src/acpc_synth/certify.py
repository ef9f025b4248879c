"""Certification of the solver results on one model against the brute-force oracles."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import oracles
from .graph import mec_decompose
from .model import Dra, Mdp
from .synthesis import InfeasibleError, strategy_chain, synthesize

TOL = 1e-8


class Check(NamedTuple):
    status: str     # PASS, FAIL or SKIP
    name: str
    detail: str


def _ec_key(states, actions):
    return (frozenset(states), tuple(sorted((s, tuple(sorted(actions[s]))) for s in states)))


def certify_model(m: Mdp, dra: Dra | None = None, pi_sur: str | None = None,
                  limit: int = 200_000) -> list[Check]:
    out: list[Check] = []
    if m.n_states <= 8:
        mine = {_ec_key(e.states, e.actions) for e in mec_decompose(m)}
        ref = {_ec_key(s, a) for s, a in oracles.maximal_ecs(oracles.enumerate_ecs(m))}
        out.append(Check("PASS" if mine == ref else "FAIL", "mec_decompose", f"{len(mine)} MECs"))
    else:
        out.append(Check("SKIP", "mec_decompose", f"{m.n_states} states exceed the enumeration guard"))
    if dra is None:
        return out
    try:
        res = synthesize(m, dra, pi_sur)
    except InfeasibleError as exc:
        out.append(Check("SKIP", "synthesis", f"infeasible: {exc}"))
        return out
    p = res.product
    for i, sol in enumerate(res.maecs):
        e, red = sol.entry, sol.reduced
        worst = 0.0
        for v in red.states:
            for z in red.actions[v]:
                hit, cost = oracles.absorbing_expectations(p.mdp, z.as_dict(), red.states, [v])[v]
                row = dict(z.row)
                keys = set(row) | set(hit)
                worst = max([worst, abs(cost - z.cost)] + [abs(row.get(k, 0.0) - hit.get(k, 0.0)) for k in keys])
        out.append(Check("PASS" if worst <= 1e-9 else "FAIL", f"reduction[{i}]",
                         f"{red.n_actions()} actions, max deviation {worst:.2e}"))
        n_pol = math.prod(len(e.component.actions[s]) for s in e.states)
        if n_pol <= limit:
            bf = oracles.brute_force_acpc(p.mdp, e.states, e.component.actions, red.states, limit)
            ok = abs(bf - sol.value) <= TOL * max(1.0, abs(bf))
            out.append(Check("PASS" if ok else "FAIL", f"acpc_value[{i}]", f"{sol.value:.10g} vs brute force {bf:.10g}"))
        else:
            out.append(Check("SKIP", f"acpc_value[{i}]", f"{n_pol} policies exceed the limit"))
    for idx, b in sorted(res.tables.bundles.items()):
        worst = 0.0
        for s0 in sorted(b.states):
            order, rows = strategy_chain(p, b.c_v, [s0])
            P = np.zeros((len(order), len(order)))
            c = np.zeros(len(order))
            for k, (_, cost, row) in enumerate(rows):
                c[k] = cost
                for j, pr in row:
                    P[k, j] += pr
            mask = np.array([s in p.surveillance for _, s in order])
            worst = max(worst, abs(oracles.chain_renewal_reward(P, c, mask, 0) - b.value))
        out.append(Check("PASS" if worst <= TOL * max(1.0, b.value) else "FAIL", f"finite_memory[{idx}]",
                         f"renewal-reward deviation {worst:.2e}"))
    exits: dict[int, list] = {}
    for i, sol in enumerate(res.maecs):
        for s in sol.entry.states:
            exits.setdefault(s, []).append((i, sol.value))
    n_pol = math.prod(len(p.mdp.enabled(s)) + len(exits.get(s, ())) for s in range(p.n_states))
    if n_pol <= limit:
        bf = oracles.brute_force_target_value(p.mdp, exits, p.mdp.initial, limit)
        ok = abs(bf - res.optimal_value) <= TOL * max(1.0, abs(bf))
        out.append(Check("PASS" if ok else "FAIL", "target_value", f"{res.optimal_value:.10g} vs exhaustive {bf:.10g}"))
    else:
        out.append(Check("SKIP", "target_value", f"{n_pol} policies exceed the limit"))
    mass = sum(res.selection.absorption.values())
    out.append(Check("PASS" if abs(mass - 1.0) <= 1e-9 else "FAIL", "absorption", f"probability {mass:.12g}"))
    return out
