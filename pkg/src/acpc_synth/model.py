"""MDPs, deterministic Rabin automata and their product.

States and actions are dense integer ids assigned in input order; every
iteration in the package runs over ascending ids so results are
deterministic.  Names are kept alongside for I/O and reporting.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple, Sequence

ROW_TOL = 1e-12
ACCEPT_TOL = 1e-9


class ModelError(ValueError):
    """Invalid model data or an operation requested on an unsuitable model."""


class Violation(NamedTuple):
    state: int
    action: int | None
    rule: str
    detail: str

    def __str__(self):
        where = f"state {self.state}" if self.action is None else f"state {self.state}, action {self.action}"
        return f"{where}: {self.rule} ({self.detail})"


Row = tuple[tuple[int, float], ...]


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite labeled MDP with non-negative action costs.

    ``transitions`` maps an enabled (state, action) pair to its successor
    distribution; pairs that are absent are not enabled.
    """

    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    transitions: Mapping[tuple[int, int], Row]
    labels: tuple[frozenset[str], ...]
    costs: Mapping[tuple[int, int], float]
    initial: int | None = None
    ap: frozenset[str] = frozenset()
    surveillance: str | None = None
    _enabled: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        enabled: list[list[int]] = [[] for _ in self.state_names]
        for s, a in self.transitions:
            enabled[s].append(a)
        object.__setattr__(self, "_enabled", tuple(tuple(sorted(e)) for e in enabled))

    @classmethod
    def from_rows(
        cls,
        n_states: int,
        rows: Mapping[tuple[int, int], Mapping[int, float]],
        costs: Mapping[tuple[int, int], float] | float | None = None,
        labels: Mapping[int, Iterable[str]] | None = None,
        initial: int | None = None,
        *,
        action_names: Sequence[str] | None = None,
        state_names: Sequence[str] | None = None,
        ap: Iterable[str] | None = None,
        surveillance: str | None = None,
    ) -> "Mdp":
        """Build and validate an MDP from plain dictionaries.

        Rows summing to 1 within 1e-9 are renormalized; zero entries are
        dropped.  ``costs`` may be a scalar applied to every enabled pair.
        Raises ModelError listing every violation otherwise.
        """
        n_actions = 1 + max((a for _, a in rows), default=-1)
        if action_names is None:
            action_names = [f"a{i}" for i in range(n_actions)]
        if state_names is None:
            state_names = [str(i) for i in range(n_states)]
        labels = labels or {}
        label_sets = tuple(frozenset(labels.get(s, ())) for s in range(n_states))
        if ap is None:
            ap = frozenset().union(*label_sets) if label_sets else frozenset()
        if costs is None:
            costs = 0.0
        if isinstance(costs, (int, float)):
            costs = {key: float(costs) for key in rows}

        problems: list[str] = []
        table: dict[tuple[int, int], Row] = {}
        for (s, a), dist in sorted(rows.items()):
            if not (0 <= s < n_states) or not (0 <= a < len(action_names)):
                problems.append(f"pair ({s}, {a}) out of range")
                continue
            entries = [(t, float(p)) for t, p in sorted(dist.items()) if p != 0]
            if any(not (0 <= t < n_states) for t, _ in entries):
                problems.append(f"state {s}, action {a}: successor out of range")
                continue
            if any(not (0.0 <= p <= 1.0) or math.isnan(p) for _, p in entries):
                problems.append(f"state {s}, action {a}: probability outside [0, 1]")
                continue
            total = math.fsum(p for _, p in entries)
            if total == 0:
                continue
            if abs(total - 1.0) > ACCEPT_TOL:
                problems.append(f"state {s}, action {a}: row sum {total:.12g}")
                continue
            table[(s, a)] = tuple((t, p / total) for t, p in entries)
        cost_table = {key: float(costs.get(key, math.nan)) for key in table}
        mdp = cls(
            tuple(state_names), tuple(action_names), table, label_sets, cost_table,
            initial, frozenset(ap), surveillance,
        )
        problems.extend(str(v) for v in validate_mdp(mdp))
        if problems:
            raise ModelError("invalid MDP: " + "; ".join(problems))
        return mdp

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    def enabled(self, s: int) -> tuple[int, ...]:
        return self._enabled[s]

    def row(self, s: int, a: int) -> Row:
        return self.transitions[(s, a)]

    def cost(self, s: int, a: int) -> float:
        return self.costs[(s, a)]

    def support(self, s: int, a: int) -> frozenset[int]:
        return frozenset(t for t, _ in self.transitions[(s, a)])

    def prob(self, s: int, a: int, t: int) -> float:
        for u, p in self.transitions.get((s, a), ()):
            if u == t:
                return p
        return 0.0

    def states_with(self, prop: str) -> frozenset[int]:
        return frozenset(s for s, lab in enumerate(self.labels) if prop in lab)

    def surveillance_states(self) -> frozenset[int]:
        if self.surveillance is None:
            raise ModelError("MDP has no surveillance proposition")
        return self.states_with(self.surveillance)

    def max_cost(self) -> float:
        return max(self.costs.values(), default=0.0)


def validate_mdp(m: Mdp) -> list[Violation]:
    """Check row sums, non-empty action sets and cost signs.

    Violations are returned as data, the empty list meaning the model is
    valid.
    """
    out: list[Violation] = []
    for s in range(m.n_states):
        if not m.enabled(s):
            out.append(Violation(s, None, "empty A(s)", "no enabled action"))
    for (s, a), row in sorted(m.transitions.items()):
        total = math.fsum(p for _, p in row)
        if abs(total - 1.0) > ROW_TOL:
            out.append(Violation(s, a, "row sum", f"row sum {total:.12g}"))
        if any(p < 0 or p > 1 for _, p in row):
            out.append(Violation(s, a, "probability range", "entry outside [0, 1]"))
        c = m.costs.get((s, a))
        if c is None or math.isnan(c):
            out.append(Violation(s, a, "missing cost", "no cost given"))
        elif c < 0 or math.isinf(c):
            out.append(Violation(s, a, "cost sign", f"cost {c}"))
    if m.initial is not None and not (0 <= m.initial < m.n_states):
        out.append(Violation(m.initial, None, "initial state", "out of range"))
    return out


@dataclass(frozen=True, eq=False)
class Dra:
    """Deterministic Rabin automaton over the alphabet 2^AP.

    ``table`` holds explicit transitions keyed by (state, letter) where a
    letter is a frozenset of propositions from ``ap``; every other letter
    goes to ``default[state]``.  ``acc`` is a tuple of (B, G) pairs.
    """

    n_states: int
    ap: tuple[str, ...]
    table: Mapping[tuple[int, frozenset[str]], int]
    default: tuple[int, ...]
    initial: int
    acc: tuple[tuple[frozenset[int], frozenset[int]], ...]
    name: str = ""

    def __post_init__(self):
        if len(self.default) != self.n_states:
            raise ModelError("every DRA state needs a default successor")
        if not (0 <= self.initial < self.n_states):
            raise ModelError("DRA initial state out of range")
        for (q, _), t in self.table.items():
            if not (0 <= q < self.n_states and 0 <= t < self.n_states):
                raise ModelError("DRA transition out of range")
        for b, g in self.acc:
            if not (b | g) <= set(range(self.n_states)):
                raise ModelError("acceptance pair refers to unknown states")

    def step(self, q: int, labels: Iterable[str]) -> int:
        letter = frozenset(labels).intersection(self.ap)
        return self.table.get((q, letter), self.default[q])

    def letters(self) -> list[frozenset[str]]:
        return [frozenset(c) for k in range(len(self.ap) + 1) for c in combinations(self.ap, k)]

    def full_table(self) -> dict[tuple[int, frozenset[str]], int]:
        return {(q, w): self.step(q, w) for q in range(self.n_states) for w in self.letters()}

    def accepts_lasso(self, prefix: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]]) -> bool:
        """Acceptance of the ultimately periodic word prefix·cycle^ω."""
        if not cycle:
            raise ModelError("lasso cycle must be non-empty")
        q = self.initial
        for letter in prefix:
            q = self.step(q, letter)
        # iterate whole cycles until the automaton state at the cycle start repeats
        seen: dict[int, int] = {}
        starts: list[int] = []
        while q not in seen:
            seen[q] = len(starts)
            starts.append(q)
            for letter in cycle:
                q = self.step(q, letter)
        inf: set[int] = set()
        for q0 in starts[seen[q]:]:
            r = q0
            for letter in cycle:
                inf.add(r)
                r = self.step(r, letter)
        return any(not (inf & b) and (inf & g) for b, g in self.acc)


@dataclass(frozen=True, eq=False)
class ProductMdp:
    """Reachable part of the product of an MDP and a DRA.

    ``mdp`` is an ordinary Mdp over product state ids; ``pairs[i]`` is the
    (MDP state, DRA state) behind product id ``i``.  Product rows list
    successors in the order of the underlying MDP row, which keeps sampled
    runs identical between the product and the projected controller.
    """

    mdp: Mdp
    base: Mdp
    dra: Dra
    pairs: tuple[tuple[int, int], ...]
    index: Mapping[tuple[int, int], int]
    surveillance: frozenset[int]
    pi_sur: str

    @property
    def n_states(self) -> int:
        return self.mdp.n_states

    def dra_state(self, i: int) -> int:
        return self.pairs[i][1]

    def mdp_state(self, i: int) -> int:
        return self.pairs[i][0]

    def states_in(self, dra_states: Iterable[int]) -> frozenset[int]:
        qs = set(dra_states)
        return frozenset(i for i, (_, q) in enumerate(self.pairs) if q in qs)


def build_product(m: Mdp, a: Dra, pi_sur: str | None = None) -> ProductMdp:
    """Breadth-first construction of the reachable product from (s_init, q0).

    The DRA reads the label of the source state: (s,q) -a-> (s',q') with
    q' = delta(q, L(s)).
    """
    pi_sur = pi_sur if pi_sur is not None else m.surveillance
    if m.initial is None:
        raise ModelError("product requires an initialized MDP")
    if pi_sur is None or pi_sur not in m.ap:
        raise ModelError(f"surveillance proposition {pi_sur!r} is not declared in the MDP")
    problems = validate_mdp(m)
    if problems:
        raise ModelError("invalid MDP: " + "; ".join(map(str, problems)))

    start = (m.initial, a.initial)
    index: dict[tuple[int, int], int] = {start: 0}
    pairs = [start]
    queue = deque([start])
    trans: dict[tuple[int, int], Row] = {}
    costs: dict[tuple[int, int], float] = {}
    while queue:
        s, q = queue.popleft()
        i = index[(s, q)]
        q2 = a.step(q, m.labels[s])
        for act in m.enabled(s):
            row = []
            for t, p in m.row(s, act):
                key = (t, q2)
                if key not in index:
                    index[key] = len(pairs)
                    pairs.append(key)
                    queue.append(key)
                row.append((index[key], p))
            trans[(i, act)] = tuple(row)
            costs[(i, act)] = m.cost(s, act)
    names = tuple(f"({m.state_names[s]},{q})" for s, q in pairs)
    labels = tuple(m.labels[s] for s, _ in pairs)
    pm = Mdp(names, m.action_names, trans, labels, costs, 0, m.ap, pi_sur)
    sur = frozenset(i for i, (s, _) in enumerate(pairs) if pi_sur in m.labels[s])
    return ProductMdp(pm, m, a, tuple(pairs), index, sur, pi_sur)


def lift_surveillance(p: ProductMdp) -> frozenset[int]:
    """Product states whose MDP component carries the surveillance proposition."""
    return frozenset(i for i, (s, _) in enumerate(p.pairs) if p.pi_sur in p.base.labels[s])
