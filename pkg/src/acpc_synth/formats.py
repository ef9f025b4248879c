"""Model documents (JSON), the HOA subset for Rabin automata, strategy files and reports."""

from __future__ import annotations

import hashlib
import itertools
import json
import re
from typing import Any, Mapping

from . import __version__
from .model import Dra, Mdp, ModelError, ProductMdp, build_product
from .synthesis import (Bundle, ControllerTables, FiniteMemoryStrategy, RoundSchedule,
                        SynthesisResult)


class FormatError(ModelError):
    """Malformed input document; the message names the construct and location."""


# --------------------------------------------------------------------------
# model documents

_MODEL_KEYS = {"states", "actions", "transitions", "costs", "initial", "ap", "surveillance", "name"}


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{what}: syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _require(cond, msg):
    if not cond:
        raise FormatError(msg)


def parse_model(text: str) -> Mdp:
    """Parse a JSON model document into a validated Mdp.

    A cost entry without "state" applies to every state where its action
    is enabled; an entry with "state" overrides it.
    """
    doc = _load_json(text, "model")
    _require(isinstance(doc, dict), "model: top level must be an object")
    unknown = set(doc) - _MODEL_KEYS
    _require(not unknown, f"model: unknown field(s) {sorted(unknown)}")
    for key in ("states", "actions", "transitions", "costs"):
        _require(key in doc, f"model: missing field {key!r}")
        _require(isinstance(doc[key], list), f"model: field {key!r} must be a list")

    sid: dict[Any, int] = {}
    names, labels = [], {}
    for i, st in enumerate(doc["states"]):
        where = f"model: states[{i}]"
        _require(isinstance(st, dict), f"{where} must be an object")
        extra = set(st) - {"id", "labels"}
        _require(not extra, f"{where}: unknown field(s) {sorted(extra)}")
        _require("id" in st, f"{where}: missing 'id'")
        key = st["id"]
        _require(isinstance(key, (int, str)) and not isinstance(key, bool), f"{where}: id must be an integer or string")
        _require(key not in sid, f"{where}: duplicate state id {key!r}")
        sid[key] = i
        names.append(str(key))
        labs = st.get("labels", [])
        _require(isinstance(labs, list) and all(isinstance(x, str) for x in labs),
                 f"{where}: labels must be a list of strings")
        labels[i] = labs
    _require(len(sid) > 0, "model: at least one state is required")
    actions = doc["actions"]
    _require(all(isinstance(a, str) for a in actions), "model: actions must be strings")
    _require(len(set(actions)) == len(actions), "model: duplicate action name")
    aid = {a: i for i, a in enumerate(actions)}

    def state_ref(x, where):
        _require(not isinstance(x, bool) and x in sid, f"{where}: unknown state {x!r}")
        return sid[x]

    def action_ref(x, where):
        _require(isinstance(x, str) and x in aid, f"{where}: unknown action {x!r}")
        return aid[x]

    rows: dict[tuple[int, int], dict[int, float]] = {}
    for i, tr in enumerate(doc["transitions"]):
        where = f"model: transitions[{i}]"
        _require(isinstance(tr, dict), f"{where} must be an object")
        _require(set(tr) == {"from", "action", "to", "prob"},
                 f"{where}: expected exactly the fields from, action, to, prob")
        s = state_ref(tr["from"], where)
        a = action_ref(tr["action"], where)
        t = state_ref(tr["to"], where)
        p = tr["prob"]
        _require(isinstance(p, (int, float)) and not isinstance(p, bool), f"{where}: prob must be a number")
        row = rows.setdefault((s, a), {})
        _require(t not in row, f"{where}: duplicate transition ({tr['from']!r}, {tr['action']!r}, {tr['to']!r})")
        row[t] = float(p)

    costs: dict[tuple[int, int], float] = {}
    default: dict[int, float] = {}
    for i, ce in enumerate(doc["costs"]):
        where = f"model: costs[{i}]"
        _require(isinstance(ce, dict), f"{where} must be an object")
        extra = set(ce) - {"state", "action", "cost"}
        _require(not extra, f"{where}: unknown field(s) {sorted(extra)}")
        _require("action" in ce and "cost" in ce, f"{where}: needs action and cost")
        a = action_ref(ce["action"], where)
        c = ce["cost"]
        _require(isinstance(c, (int, float)) and not isinstance(c, bool), f"{where}: cost must be a number")
        if "state" in ce:
            key = (state_ref(ce["state"], where), a)
            _require(key not in costs, f"{where}: duplicate cost for ({ce['state']!r}, {ce['action']!r})")
            costs[key] = float(c)
        else:
            _require(a not in default, f"{where}: duplicate default cost for {ce['action']!r}")
            default[a] = float(c)
    for key in rows:
        if key not in costs and key[1] in default:
            costs[key] = default[key[1]]

    initial = doc.get("initial")
    if initial is not None:
        initial = state_ref(initial, "model: initial")
    ap = doc.get("ap")
    if ap is not None:
        _require(isinstance(ap, list) and all(isinstance(x, str) for x in ap), "model: ap must be a list of strings")
        used = set().union(*map(set, labels.values()))
        _require(used <= set(ap), f"model: labels use undeclared propositions {sorted(used - set(ap))}")
    sur = doc.get("surveillance")
    _require(sur is None or isinstance(sur, str), "model: surveillance must be a string")
    return Mdp.from_rows(len(names), rows, costs, labels, initial, action_names=actions,
                         state_names=names, ap=ap, surveillance=sur)


def _id_value(name: str):
    return int(name) if re.fullmatch(r"-?\d+", name) else name


def model_document(m: Mdp) -> dict:
    ids = [_id_value(n) for n in m.state_names]
    if len(set(ids)) != len(ids):
        ids = list(m.state_names)
    doc = {
        "states": [{"id": ids[s], "labels": sorted(m.labels[s])} for s in range(m.n_states)],
        "actions": list(m.action_names),
        "transitions": [
            {"from": ids[s], "action": m.action_names[a], "to": ids[t], "prob": p}
            for (s, a), row in sorted(m.transitions.items()) for t, p in row
        ],
        "costs": [{"state": ids[s], "action": m.action_names[a], "cost": c}
                  for (s, a), c in sorted(m.costs.items())],
        "ap": sorted(m.ap),
    }
    if m.initial is not None:
        doc["initial"] = ids[m.initial]
    if m.surveillance is not None:
        doc["surveillance"] = m.surveillance
    return doc


def dump_model(m: Mdp) -> str:
    return json.dumps(model_document(m), indent=2, ensure_ascii=False) + "\n"


def mdp_equal(a: Mdp, b: Mdp) -> bool:
    return (a.state_names == b.state_names and a.action_names == b.action_names
            and dict(a.transitions) == dict(b.transitions) and a.labels == b.labels
            and dict(a.costs) == dict(b.costs) and a.initial == b.initial
            and a.ap == b.ap and a.surveillance == b.surveillance)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def model_digest(m: Mdp) -> str:
    return sha256_text(json.dumps(model_document(m), sort_keys=True))


# --------------------------------------------------------------------------
# HOA subset

_HOA_TOKEN = re.compile(r"\s*(\d+|[tf!&|()])")
_HEADER_IGNORED = {"name", "tool", "properties"}


def _label_letters(expr: str, ap: tuple[str, ...], line: int) -> set[frozenset[str]]:
    toks = []
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        m = _HOA_TOKEN.match(expr, pos)
        if not m:
            raise FormatError(f"hoa line {line}: bad label expression near {expr[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    i = 0

    def peek():
        return toks[i] if i < len(toks) else None

    def take():
        nonlocal i
        if i >= len(toks):
            raise FormatError(f"hoa line {line}: truncated label expression")
        i += 1
        return toks[i - 1]

    def disj():
        f = conj()
        while peek() == "|":
            take()
            g, h = f, conj()
            f = lambda w, g=g, h=h: g(w) or h(w)
        return f

    def conj():
        f = atom()
        while peek() == "&":
            take()
            g, h = f, atom()
            f = lambda w, g=g, h=h: g(w) and h(w)
        return f

    def atom():
        tok = take()
        if tok == "!":
            g = atom()
            return lambda w: not g(w)
        if tok == "(":
            g = disj()
            if take() != ")":
                raise FormatError(f"hoa line {line}: expected ')'")
            return g
        if tok == "t":
            return lambda w: True
        if tok == "f":
            return lambda w: False
        if tok.isdigit():
            k = int(tok)
            if k >= len(ap):
                raise FormatError(f"hoa line {line}: proposition index {k} out of range")
            name = ap[k]
            return lambda w: name in w
        raise FormatError(f"hoa line {line}: unexpected {tok!r} in label expression")

    f = disj()
    if i != len(toks):
        raise FormatError(f"hoa line {line}: trailing tokens in label expression")
    return {w for w in _letters(ap) if f(w)}


def _letters(ap):
    return [frozenset(c) for k in range(len(ap) + 1) for c in itertools.combinations(ap, k)]


_RABIN_PAIR = re.compile(r"\(?\s*Fin\((\d+)\)\s*&\s*Inf\((\d+)\)\s*\)?")


def parse_hoa(text: str) -> Dra:
    """Parse the deterministic-Rabin HOA subset (explicit labels, one [else] edge per state)."""
    lines = [(n, ln.split("//")[0].rstrip()) for n, ln in enumerate(text.splitlines(), 1)]
    lines = [(n, re.sub(r"/\*.*?\*/", "", ln)) for n, ln in lines]
    lines = [(n, ln.strip()) for n, ln in lines if ln.strip()]
    header: dict[str, tuple[int, str]] = {}
    it = iter(lines)
    body_line = None
    for n, ln in it:
        if ln == "--BODY--":
            body_line = n
            break
        m = re.match(r"([A-Za-z][A-Za-z0-9_-]*):\s*(.*)$", ln)
        if not m:
            raise FormatError(f"hoa line {n}: expected 'Key: value' header item")
        key, val = m.group(1), m.group(2)
        if key in header and key not in _HEADER_IGNORED:
            raise FormatError(f"hoa line {n}: duplicate header {key!r}")
        header[key] = (n, val)
    if body_line is None:
        raise FormatError("hoa: missing --BODY--")
    for key in header:
        if key not in {"HOA", "States", "Start", "AP", "acc-name", "Acceptance"} | _HEADER_IGNORED:
            raise FormatError(f"hoa line {header[key][0]}: unsupported header {key!r}")
    for key in ("HOA", "States", "Start", "AP", "acc-name", "Acceptance"):
        if key not in header:
            raise FormatError(f"hoa: missing header {key!r}")
    if header["HOA"][1] != "v1":
        raise FormatError(f"hoa line {header['HOA'][0]}: only HOA v1 is supported")
    try:
        n_states = int(header["States"][1])
        start = int(header["Start"][1])
    except ValueError:
        raise FormatError("hoa: States and Start must be integers") from None
    if not 0 <= start < n_states:
        raise FormatError(f"hoa line {header['Start'][0]}: start state out of range")
    ln_ap, ap_text = header["AP"]
    ap_match = re.fullmatch(r"(\d+)((?:\s+\"[^\"]*\")*)", ap_text)
    if not ap_match:
        raise FormatError(f"hoa line {ln_ap}: malformed AP header")
    ap = tuple(re.findall(r"\"([^\"]*)\"", ap_match.group(2)))
    if len(ap) != int(ap_match.group(1)) or len(set(ap)) != len(ap):
        raise FormatError(f"hoa line {ln_ap}: AP count does not match the listed names")
    if len(ap) > 16:
        raise FormatError(f"hoa line {ln_ap}: at most 16 propositions are supported")
    ln_acc, acc_name = header["acc-name"]
    m = re.fullmatch(r"Rabin\s+(\d+)", acc_name)
    if not m:
        raise FormatError(f"hoa line {ln_acc}: only 'acc-name: Rabin k' is supported")
    k = int(m.group(1))
    ln_cond, cond = header["Acceptance"]
    m = re.fullmatch(r"(\d+)\s+(.*)", cond)
    if not m:
        raise FormatError(f"hoa line {ln_cond}: malformed Acceptance")
    n_sets, expr = int(m.group(1)), m.group(2).strip()
    if k == 0:
        if expr != "f":
            raise FormatError(f"hoa line {ln_cond}: Rabin 0 requires acceptance 'f'")
        pairs = []
    else:
        parts = [x.strip() for x in expr.split("|")]
        pairs = []
        for part in parts:
            pm = _RABIN_PAIR.fullmatch(part)
            if not pm:
                raise FormatError(f"hoa line {ln_cond}: expected Fin(i)&Inf(j) disjuncts, got {part!r}")
            pairs.append((int(pm.group(1)), int(pm.group(2))))
        if len(pairs) != k:
            raise FormatError(f"hoa line {ln_cond}: Rabin {k} needs {k} pairs, found {len(pairs)}")
    if any(x >= n_sets for pr in pairs for x in pr):
        raise FormatError(f"hoa line {ln_cond}: acceptance set index out of range")

    marks: dict[int, set[int]] = {q: set() for q in range(n_states)}
    table: dict[tuple[int, frozenset[str]], int] = {}
    default: dict[int, int] = {}
    covered: dict[int, set] = {}
    cur = None
    ended = False
    for n, ln in it:
        if ln == "--END--":
            ended = True
            break
        sm = re.fullmatch(r"State:\s*(\d+)(?:\s+\"[^\"]*\")?(?:\s*\{([\d\s]*)\})?", ln)
        if sm:
            cur = int(sm.group(1))
            if not 0 <= cur < n_states:
                raise FormatError(f"hoa line {n}: state {cur} out of range")
            if cur in covered:
                raise FormatError(f"hoa line {n}: state {cur} defined twice")
            covered[cur] = set()
            if sm.group(2):
                sets = {int(x) for x in sm.group(2).split()}
                if any(x >= n_sets for x in sets):
                    raise FormatError(f"hoa line {n}: acceptance set out of range")
                marks[cur] = sets
            continue
        em = re.fullmatch(r"\[([^\]]*)\]\s*(\d+)", ln)
        if not em:
            raise FormatError(f"hoa line {n}: expected 'State:' or '[label] target'")
        if cur is None:
            raise FormatError(f"hoa line {n}: edge before any State:")
        target = int(em.group(2))
        if not 0 <= target < n_states:
            raise FormatError(f"hoa line {n}: target {target} out of range")
        label = em.group(1).strip()
        if label == "else":
            if cur in default:
                raise FormatError(f"hoa line {n}: second [else] edge for state {cur}")
            default[cur] = target
            continue
        letters = _label_letters(label, ap, n)
        overlap = letters & covered[cur]
        if overlap:
            raise FormatError(f"hoa line {n}: nondeterministic edge (overlaps an earlier edge of state {cur})")
        covered[cur] |= letters
        for w in letters:
            table[(cur, w)] = target
    if not ended:
        raise FormatError("hoa: missing --END--")
    missing = [q for q in range(n_states) if q not in covered]
    if missing:
        raise FormatError(f"hoa: states without a State: block {missing}")
    no_default = [q for q in range(n_states) if q not in default]
    if no_default:
        raise FormatError(f"hoa: states without an [else] edge {no_default}")
    acc = tuple(
        (frozenset(q for q in range(n_states) if f in marks[q]), frozenset(q for q in range(n_states) if g in marks[q]))
        for f, g in pairs
    )
    name = header.get("name", (0, ""))[1].strip('"')
    return Dra(n_states, ap, table, tuple(default[q] for q in range(n_states)), start, acc, name)


def dump_hoa(a: Dra) -> str:
    k = len(a.acc)
    out = ["HOA: v1"]
    if a.name:
        out.append(f'name: "{a.name}"')
    out += [f"States: {a.n_states}", f"Start: {a.initial}",
            "AP: " + " ".join([str(len(a.ap))] + [f'"{p}"' for p in a.ap]),
            f"acc-name: Rabin {k}"]
    if k == 0:
        out.append("Acceptance: 0 f")
    else:
        out.append(f"Acceptance: {2 * k} " + " | ".join(f"(Fin({2 * i})&Inf({2 * i + 1}))" for i in range(k)))
    out.append("--BODY--")
    for q in range(a.n_states):
        sets = [2 * i for i, (b, _) in enumerate(a.acc) if q in b] + [2 * i + 1 for i, (_, g) in enumerate(a.acc) if q in g]
        out.append(f"State: {q}" + (" {" + " ".join(map(str, sorted(sets))) + "}" if sets else ""))
        by_target: dict[int, list[frozenset[str]]] = {}
        for w in _letters(a.ap):
            t = a.step(q, w)
            if t != a.default[q]:
                by_target.setdefault(t, []).append(w)
        for t, ws in sorted(by_target.items()):
            terms = []
            for w in ws:
                lits = [str(i) if p in w else f"!{i}" for i, p in enumerate(a.ap)]
                terms.append("&".join(lits) if lits else "t")
            out.append("[" + " | ".join(f"({x})" if len(ws) > 1 else x for x in terms) + f"] {t}")
        out.append(f"[else] {a.default[q]}")
    out.append("--END--")
    return "\n".join(out) + "\n"


def dra_equal(a: Dra, b: Dra) -> bool:
    return (a.n_states == b.n_states and a.ap == b.ap and a.initial == b.initial
            and a.acc == b.acc and a.full_table() == b.full_table())


# --------------------------------------------------------------------------
# strategies

STRATEGY_FORMAT = "acpc-strategy"


def strategy_document(result: SynthesisResult, model: Mdp, hoa_text: str) -> dict:
    t = result.tables
    p = result.product

    def pairs(d):
        return [[int(k), int(v)] for k, v in sorted(d.items())]

    bundles = []
    for idx, b in sorted(t.bundles.items()):
        bundles.append({
            "index": idx, "pair_index": b.pair_index, "value": b.value,
            "states": sorted(b.states), "good": sorted(b.good), "bad": sorted(b.bad),
            "c_phi": pairs(b.c_phi),
            "c_v": {
                "modes": list(b.c_v.modes),
                "act": [[m, s, a] for (m, s), a in sorted(b.c_v.act.items())],
                "delta": [[m, s, m2] for (m, s), m2 in sorted(b.c_v.delta.items())],
                "start": pairs(b.c_v.start),
            },
        })
    return {
        "format": STRATEGY_FORMAT,
        "version": 1,
        "tool_version": __version__,
        "model_sha256": model_digest(model),
        "hoa": hoa_text,
        "surveillance": p.pi_sur,
        "product_states": [list(x) for x in p.pairs],
        "initial": t.initial,
        "surveillance_states": sorted(t.surveillance),
        "optimal_value": result.optimal_value,
        "c0": pairs(t.c0),
        "exits": pairs(t.exits),
        "schedule": {"g_max": t.schedule.g_max, "l_floor": t.schedule.l_floor,
                     "early_exit": t.schedule.early_exit},
        "shortcut_available": result.shortcut_available,
        "use_shortcut": result.use_shortcut,
        "bundles": bundles,
    }


def save_strategy(result: SynthesisResult, model: Mdp, hoa_text: str, path) -> None:
    doc = strategy_document(result, model, hoa_text)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


class LoadedStrategy:
    def __init__(self, tables: ControllerTables, product: ProductMdp, doc: dict):
        self.tables = tables
        self.product = product
        self.doc = doc
        self.optimal_value = doc["optimal_value"]
        self.use_shortcut = bool(doc.get("use_shortcut"))
        self.shortcut_available = bool(doc.get("shortcut_available"))


def load_strategy(text: str, model: Mdp) -> LoadedStrategy:
    """Rebuild controller tables from a strategy document and check it matches ``model``."""
    doc = _load_json(text, "strategy")
    _require(isinstance(doc, dict) and doc.get("format") == STRATEGY_FORMAT, "strategy: not a strategy document")
    _require(doc.get("model_sha256") == model_digest(model), "strategy: model digest does not match the given model")
    dra = parse_hoa(doc["hoa"])
    p = build_product(model, dra, doc["surveillance"])
    _require([list(x) for x in p.pairs] == doc["product_states"], "strategy: product state order differs")
    try:
        bundles = {}
        for b in doc["bundles"]:
            cv = b["c_v"]
            fms = FiniteMemoryStrategy(
                tuple(cv["modes"]),
                {(m, s): a for m, s, a in cv["act"]},
                {(m, s): m2 for m, s, m2 in cv["delta"]},
                {s: m for s, m in cv["start"]},
            )
            bundles[b["index"]] = Bundle(b["index"], b["pair_index"], frozenset(b["states"]), b["value"],
                                         frozenset(b["good"]), frozenset(b["bad"]),
                                         {s: a for s, a in b["c_phi"]}, fms)
        sch = doc["schedule"]
        tables = ControllerTables(doc["initial"], frozenset(doc["surveillance_states"]),
                                  {s: a for s, a in doc["c0"]}, {s: i for s, i in doc["exits"]},
                                  bundles, RoundSchedule(sch["g_max"], sch["l_floor"], sch["early_exit"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"strategy: malformed table ({exc})") from None
    return LoadedStrategy(tables, p, doc)


# --------------------------------------------------------------------------
# reports

def synthesis_report(result: SynthesisResult, inputs: Mapping[str, str] | None = None) -> dict:
    sel = result.selection
    return {
        "kind": "synthesis",
        "optimal_value": result.optimal_value,
        "certified_value": sel.certified_value,
        "maec_star": [
            {"index": i, "pair_index": result.maecs[i].entry.pair_index,
             "states": len(result.maecs[i].entry.states), "value": result.maecs[i].value}
            for i in sel.maec_star
        ],
        "absorption": {str(k): v for k, v in sorted(sel.absorption.items())},
        "shortcut_available": result.shortcut_available,
        "diagnostics": result.diagnostics,
        "inputs": dict(inputs or {}),
    }


def write_report(report, path, *, inputs: Mapping[str, str] | None = None) -> None:
    """Write a synthesis or simulation report as JSON with sorted keys."""
    if isinstance(report, SynthesisResult):
        doc = synthesis_report(report, inputs)
    elif hasattr(report, "to_dict"):
        doc = {"kind": "simulation", "runs": [report.to_dict()], "inputs": dict(inputs or {})}
    else:
        doc = dict(report)
        doc.setdefault("inputs", dict(inputs or {}))
    doc["tool_version"] = __version__
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
