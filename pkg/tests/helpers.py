"""Small hand-built models shared by several test modules."""

from acpc_synth.model import Dra, Mdp


def gf(prop, ap=("a", "b")):
    """Two-state DRA for G F prop reading the source label."""
    table = {}
    for q in (0, 1):
        for w in [frozenset(), frozenset({"a"}), frozenset({"b"}), frozenset({"a", "b"})]:
            table[(q, w)] = 1 if prop in w else 0
    return Dra(2, ap, table, (0, 0), 0, ((frozenset(), frozenset({1})),), name=f"GF {prop}")


def true_dra():
    return Dra(1, ("a", "b"), {}, (0,), 0, ((frozenset(), frozenset({0})),))


def detour_model():
    # 0 (b): cheap self-loop or a detour through 1 (a)
    rows = {(0, 0): {0: 1.0}, (0, 1): {1: 1.0}, (1, 0): {0: 1.0}}
    costs = {(0, 0): 1.0, (0, 1): 5.0, (1, 0): 5.0}
    return Mdp.from_rows(2, rows, costs, {0: ["b"], 1: ["a"]}, 0, ap=["a", "b"], surveillance="b")
