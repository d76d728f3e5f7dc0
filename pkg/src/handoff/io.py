"""JSON model files, policy bundles and result export.

Identifiers (states, actions, events, propositions) are JSON strings or
integers. Maps keyed by identifiers are written as lists of pairs so that
integer ids survive a round trip.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .aec import AecSolution, TerminalCostMap
from .compose import Action, ProductMdp
from .ec import EndComponent
from .model import CognitiveModel, LabeledMdp, RabinAutomaton
from .policy import MemorylessPolicy

BUNDLE_VERSION = 1


class SchemaError(ValueError):
    """A file is not valid JSON or does not follow the expected layout."""


FIELDS = {
    "mdp": {"kind", "states", "actions", "ap", "labels", "initial", "transitions", "gamma"},
    "cognitive": {"kind", "states", "events", "initial", "transitions", "cost", "gamma", "takeover"},
    "rabin": {"kind", "states", "ap", "initial", "transitions", "default", "acceptance"},
}
REQUIRED = {
    "mdp": {"kind", "states", "actions", "initial", "transitions", "gamma"},
    "cognitive": {"kind", "states", "events", "initial", "transitions", "cost", "gamma", "takeover"},
    "rabin": {"kind", "states", "ap", "initial", "transitions", "acceptance"},
}


def _position(text: str, key: str) -> str:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if not m:
        return "?"
    line = text.count("\n", 0, m.start()) + 1
    col = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1
    return f"{line}:{col}"


def _ident(x, where):
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        raise SchemaError(f"{where}: identifier must be a string or integer, got {x!r}")
    return x


def _ids(xs, where) -> list:
    if not isinstance(xs, list):
        raise SchemaError(f"{where}: expected a list")
    return [_ident(x, where) for x in xs]


def _num(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _rows(xs, arity, where) -> list:
    if not isinstance(xs, list) or any(not isinstance(r, list) or len(r) != arity for r in xs):
        raise SchemaError(f"{where}: expected a list of {arity}-element lists")
    return xs


def _load(text: str, kind: str | None, source: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{source}: top level must be an object")
    found = doc.get("kind")
    if found not in FIELDS:
        raise SchemaError(f"{source}: unknown or missing kind {found!r}")
    if kind is not None and found != kind:
        raise SchemaError(f"{source}: expected kind {kind!r}, found {found!r}")
    for key in doc:
        if key not in FIELDS[found]:
            raise SchemaError(f"{source}:{_position(text, key)}: unknown field {key!r}")
    missing = REQUIRED[found] - set(doc)
    if missing:
        raise SchemaError(f"{source}: missing fields {sorted(missing)}")
    return doc


def parse_mdp(text: str, source: str = "<mdp>") -> LabeledMdp:
    d = _load(text, "mdp", source)
    transitions: dict = {}
    for s, a, s2, p in _rows(d["transitions"], 4, f"{source}: transitions"):
        key = (_ident(s, source), _ident(a, source))
        transitions.setdefault(key, {})
        transitions[key][_ident(s2, source)] = transitions[key].get(s2, 0.0) + _num(p, f"{source}: transition")
    labels = {}
    for s, props in _rows(d.get("labels", []), 2, f"{source}: labels"):
        labels[_ident(s, source)] = frozenset(_ids(props, f"{source}: labels"))
    initial = {_ident(s, source): _num(p, f"{source}: initial") for s, p in _rows(d["initial"], 2, f"{source}: initial")}
    return LabeledMdp(_ids(d["states"], source), _ids(d["actions"], source), initial, transitions,
                      frozenset(_ids(d.get("ap", []), source)), labels, _num(d["gamma"], f"{source}: gamma"))


def parse_cognitive(text: str, source: str = "<cognitive>") -> CognitiveModel:
    d = _load(text, "cognitive", source)
    transitions: dict = {}
    for h, e, h2, p in _rows(d["transitions"], 4, f"{source}: transitions"):
        key = (_ident(h, source), _ident(e, source))
        transitions.setdefault(key, {})
        transitions[key][_ident(h2, source)] = transitions[key].get(h2, 0.0) + _num(p, f"{source}: transition")
    cost = {(_ident(h, source), _ident(e, source), _ident(h2, source)): _num(c, f"{source}: cost")
            for h, e, h2, c in _rows(d["cost"], 4, f"{source}: cost")}
    initial = {_ident(h, source): _num(p, f"{source}: initial") for h, p in _rows(d["initial"], 2, f"{source}: initial")}
    return CognitiveModel(_ids(d["states"], source), _ids(d["events"], source), initial, transitions, cost,
                          _num(d["gamma"], f"{source}: gamma"), frozenset(_ids(d["takeover"], source)))


def parse_rabin(text: str, source: str = "<rabin>") -> RabinAutomaton:
    d = _load(text, "rabin", source)
    edges = {}
    for q, props, q2 in _rows(d["transitions"], 3, f"{source}: transitions"):
        edges[(_ident(q, source), frozenset(_ids(props, source)))] = _ident(q2, source)
    default = {_ident(q, source): _ident(q2, source) for q, q2 in _rows(d.get("default", []), 2, f"{source}: default")}
    acc = d["acceptance"]
    if not isinstance(acc, list) or any(not isinstance(x, dict) or set(x) != {"J", "K"} for x in acc):
        raise SchemaError(f"{source}: acceptance must be a list of {{\"J\": [...], \"K\": [...]}} objects")
    pairs = tuple((frozenset(_ids(x["J"], source)), frozenset(_ids(x["K"], source))) for x in acc)
    return RabinAutomaton(_ids(d["states"], source), frozenset(_ids(d["ap"], source)), _ident(d["initial"], source),
                          edges, default, pairs)


PARSERS = {"mdp": parse_mdp, "cognitive": parse_cognitive, "rabin": parse_rabin}


def parse_any(text: str, source: str = "<input>"):
    try:
        kind = json.loads(text).get("kind")
    except (json.JSONDecodeError, AttributeError):
        kind = None
    if kind not in PARSERS:
        _load(text, None, source)  # raises with the precise reason
    return PARSERS[kind](text, source)


def read_model(path, kind: str | None = None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror or exc}") from None
    return parse_any(text, str(path)) if kind is None else PARSERS[kind](text, str(path))


def _sorted_props(s) -> list:
    return sorted(s, key=str)


def dump_mdp(m: LabeledMdp) -> dict:
    return {
        "kind": "mdp",
        "states": list(m.states),
        "actions": list(m.actions),
        "ap": _sorted_props(m.ap),
        "labels": [[s, _sorted_props(m.labels[s])] for s in m.states if m.labels[s]],
        "initial": [[s, p] for s, p in m.initial.items()],
        "transitions": [[s, a, s2, p] for (s, a), row in m.transitions.items() for s2, p in row.items()],
        "gamma": m.gamma,
    }


def dump_cognitive(c: CognitiveModel) -> dict:
    return {
        "kind": "cognitive",
        "states": list(c.states),
        "events": list(c.events),
        "initial": [[h, p] for h, p in c.initial.items()],
        "transitions": [[h, e, h2, p] for (h, e), row in c.transitions.items() for h2, p in row.items()],
        "cost": [[h, e, h2, v] for (h, e, h2), v in c.cost.items()],
        "gamma": c.gamma,
        "takeover": _sorted_props(c.takeover),
    }


def dump_rabin(a: RabinAutomaton) -> dict:
    return {
        "kind": "rabin",
        "states": list(a.states),
        "ap": _sorted_props(a.ap),
        "initial": a.initial,
        "transitions": [[q, _sorted_props(w), q2] for (q, w), q2 in a.edges.items()],
        "default": [[q, q2] for q, q2 in a.default.items()],
        "acceptance": [{"J": _sorted_props(j), "K": _sorted_props(k)} for j, k in a.acceptance],
    }


def dump_model(model) -> dict:
    if isinstance(model, LabeledMdp):
        return dump_mdp(model)
    if isinstance(model, CognitiveModel):
        return dump_cognitive(model)
    if isinstance(model, RabinAutomaton):
        return dump_rabin(model)
    raise TypeError(f"cannot serialise {type(model).__name__}")


def dumps(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc))


# ---------------------------------------------------------------- bundles


def _jsonable(x):
    if isinstance(x, Action):
        return {"mode": x.mode, "act": x.act, "event": x.event}
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    return x


def _from_jsonable(x):
    if isinstance(x, dict) and set(x) == {"mode", "act", "event"}:
        return Action(x["mode"], _from_jsonable(x["act"]), _from_jsonable(x["event"]))
    if isinstance(x, list):
        return tuple(_from_jsonable(y) for y in x)
    return x


def _policy_rows(pol: MemorylessPolicy) -> list:
    return [[int(v), [float(q) for q in row]] for v, row in sorted(pol.probs.items())]


def bundle_doc(p: ProductMdp, stage1: MemorylessPolicy, terminal: TerminalCostMap) -> dict:
    """Everything needed to replay the two-stage policy without re-solving."""
    return {
        "kind": "bundle",
        "version": BUNDLE_VERSION,
        "gamma": p.gamma,
        "states": [_jsonable(v) for v in p.states],
        "actions": [[_jsonable(a) for a in acts] for acts in p.actions],
        "successors": [[[int(s), float(q), float(c)] for s, q, c in zip(
            p.tr_succ[p.tr_start[sa]:p.tr_start[sa + 1]].tolist(),
            p.tr_prob[p.tr_start[sa]:p.tr_start[sa + 1]].tolist(),
            p.tr_cost[p.tr_start[sa]:p.tr_start[sa + 1]].tolist())] for sa in range(p.n_pairs)],
        "initial": [[int(v), float(q)] for v, q in enumerate(p.initial) if q > 0],
        "acceptance": [{"J": sorted(map(int, j)), "K": sorted(map(int, k))} for j, k in p.acceptance],
        "stage1": _policy_rows(stage1),
        "terminal": [[int(v), float(u), int(terminal.component_of[v])] for v, u in sorted(terminal.values.items())],
        "components": [{"states": sorted(map(int, s.component.states)), "policy": _policy_rows(s.policy),
                        "lp_value": float(s.objective), "eps_visit": s.eps_visit, "mix": s.mix}
                       for s in terminal.solutions],
    }


def load_bundle(path):
    """Inverse of :func:`bundle_doc`; returns ``(product, stage1, terminal)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("kind") != "bundle":
        raise SchemaError(f"{path}: not a policy bundle")
    if doc.get("version") != BUNDLE_VERSION:
        raise SchemaError(f"{path}: unsupported bundle version {doc.get('version')!r}")
    try:
        states = [_from_jsonable(v) for v in doc["states"]]
        actions = [[_from_jsonable(a) for a in acts] for acts in doc["actions"]]
        succ = iter(doc["successors"])
        rows, costs = [], []
        for acts in actions:
            r_v, c_v = [], []
            for _ in acts:
                entries = next(succ)
                r_v.append([(int(s), float(q)) for s, q, _ in entries])
                c_v.append([float(c) for _, _, c in entries])
            rows.append(r_v)
            costs.append(c_v)
        d0 = np.zeros(len(states))
        for v, q in doc["initial"]:
            d0[v] = q
        acc = [(set(x["J"]), set(x["K"])) for x in doc["acceptance"]]
        p = ProductMdp(states, actions, rows, costs, d0, doc["gamma"], acc)
        stage1 = MemorylessPolicy({int(v): np.asarray(row, dtype=float) for v, row in doc["stage1"]})
        terminal = TerminalCostMap()
        for comp in doc["components"]:
            pol = MemorylessPolicy({int(v): np.asarray(row, dtype=float) for v, row in comp["policy"]})
            ec = EndComponent(frozenset(comp["states"]), {v: tuple(pol.support(p, v)) for v in pol.probs})
            terminal.solutions.append(AecSolution(ec, pol, pol, {}, comp["lp_value"], np.zeros(len(states)),
                                                  np.zeros(len(states)), comp["eps_visit"], comp["mix"]))
        for v, u, c in doc["terminal"]:
            terminal.values[int(v)] = float(u)
            terminal.component_of[int(v)] = int(c)
    except (KeyError, TypeError, ValueError, StopIteration) as exc:
        raise SchemaError(f"{path}: malformed bundle ({exc})") from None
    return p, stage1, terminal


def policy_table(p: ProductMdp, pol: MemorylessPolicy) -> list:
    """Readable ``[state, {action: prob}]`` rows (zero entries dropped)."""
    return [[_jsonable(p.states[v]), {str(a): q for a, q in pol.actions(p, v).items()}] for v in sorted(pol.probs)]


def fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.12g}"
