"""Built-in example generators: a pick-and-place arm and a 5x5 gridworld."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .model import CognitiveModel, LabeledMdp, RabinAutomaton, powerset

# ---------------------------------------------------------------- arm

ARM_STATES = ("11", "10", "01", "00")  # (small left, large left)
ARM_ACTIONS = ("a", "b", "stay")  # a picks the small object, b the large one


def _arm_side(p_small: float, p_large: float, gamma: float) -> LabeledMdp:
    t = {
        ("11", "a"): {"01": p_small, "11": 1.0 - p_small},
        ("11", "b"): {"10": p_large, "11": 1.0 - p_large},
        ("10", "a"): {"00": p_small, "10": 1.0 - p_small},
        ("01", "b"): {"00": p_large, "01": 1.0 - p_large},
        ("00", "stay"): {"00": 1.0},
    }
    t = {k: {s: p for s, p in row.items() if p > 0} for k, row in t.items()}
    return LabeledMdp(ARM_STATES, ARM_ACTIONS, {"11": 1.0}, t, {"done"}, {"00": {"done"}}, gamma)


def arm_attention(focus: float = 0.85, gamma: float = 0.98, low_cost: float = 5.0,
                  high_cost: float = 10.0) -> CognitiveModel:
    """Two attention levels; event 1 raises attention w.p. ``focus``, event 0 lowers it."""
    trans = {}
    for h in (0, 1):
        trans[(h, 1)] = {1: focus, 0: 1.0 - focus}
        trans[(h, 0)] = {0: 1.0}
    cost = {(h, e, h2): (high_cost if h2 == 1 else low_cost) for h in (0, 1) for e in (0, 1) for h2 in (0, 1)}
    return CognitiveModel((0, 1), (0, 1), {0: 1.0}, trans, cost, gamma, frozenset({1}))


def reach_automaton(prop: str, ap=None) -> RabinAutomaton:
    """Two-state automaton for eventually ``prop``."""
    ap = frozenset(ap or {prop})
    edges = {("q0", w): "q_acc" for w in powerset(ap) if prop in w}
    return RabinAutomaton(("q0", "q_acc"), ap, "q0", edges, {"q0": "q0", "q_acc": "q_acc"},
                          ((frozenset(), frozenset({"q_acc"})),))


def arm_example(auto=(0.85, 0.5), human=(0.95, 0.75), focus: float = 0.85, gamma: float = 0.98):
    """``(M_A, M_H, M_att, DRA)`` for the two-object pick-and-place task."""
    ma = _arm_side(*auto, gamma)
    mh = _arm_side(*human, gamma)
    return ma, mh, arm_attention(focus, gamma), reach_automaton("done")


# ---------------------------------------------------------------- gridworld

TERRAIN_AUTO = {"P": 0.95, "G": 0.80, "V": 0.75, "S": 0.65}
TERRAIN_HUMAN = {"P": 0.95, "G": 0.90, "V": 0.85, "S": 0.80}
MOVES = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}
LATERAL = {"N": ("W", "E"), "S": ("E", "W"), "E": ("N", "S"), "W": ("S", "N")}

# P pavement, G grass, V gravel, S sand
DEFAULT_TERRAIN = (
    "PPGGP",
    "GGSGG",
    "GVSVG",
    "VGGSP",
    "PGSSP",
)
# The top row is a safe strip holding R3 and R2, fenced off by obstacles in
# row 1 except for the sand gap (1,2); crossing the gap risks a lateral slip
# into an obstacle.
DEFAULT_REGIONS = {"R1": ((4, 4),), "R2": ((0, 4),), "R3": ((0, 0),)}
DEFAULT_OBSTACLES = ((1, 0), (1, 1), (1, 3), (1, 4), (4, 2))
DEFAULT_START = (4, 0)


@dataclass
class GridMap:
    terrain: tuple = DEFAULT_TERRAIN
    regions: dict = field(default_factory=lambda: dict(DEFAULT_REGIONS))
    obstacles: tuple = DEFAULT_OBSTACLES
    start: tuple = DEFAULT_START

    @property
    def shape(self) -> tuple:
        return len(self.terrain), len(self.terrain[0])

    def cells(self):
        rows, cols = self.shape
        return [(r, c) for r in range(rows) for c in range(cols)]


def cell_id(r: int, c: int) -> str:
    return f"{r},{c}"


def _grid_side(g: GridMap, success: dict, gamma: float) -> LabeledMdp:
    rows, cols = g.shape

    def move(r, c, d):
        dr, dc = MOVES[d]
        r2, c2 = r + dr, c + dc
        return (r2, c2) if 0 <= r2 < rows and 0 <= c2 < cols else (r, c)  # bounce off walls

    trans = {}
    for r, c in g.cells():
        p = success[g.terrain[r][c]]
        for d in MOVES:
            row: dict = {}
            for target, q in [(move(r, c, d), p)] + [(move(r, c, x), (1.0 - p) / 2) for x in LATERAL[d]]:
                if q > 0:
                    row[cell_id(*target)] = row.get(cell_id(*target), 0.0) + q
            trans[(cell_id(r, c), d)] = row
    labels = {}
    for name, cells in g.regions.items():
        for rc in cells:
            labels.setdefault(cell_id(*rc), set()).add(name)
    for rc in g.obstacles:
        labels.setdefault(cell_id(*rc), set()).add("Unsafe")
    states = tuple(cell_id(*rc) for rc in g.cells())
    ap = set(g.regions) | {"Unsafe"}
    return LabeledMdp(states, tuple(MOVES), {cell_id(*g.start): 1.0}, trans, ap, labels, gamma)


def grid_attention(up: float = 0.8, down: float = 0.8, drift: float = 0.1, gamma: float = 0.98,
                   costs=(1.0, 5.0, 10.0)) -> CognitiveModel:
    """Attention levels L < M < H with up/down/keep requests; takeover at H."""
    levels = ("L", "M", "H")
    trans = {}
    for i, h in enumerate(levels):
        hi, lo = levels[min(i + 1, 2)], levels[max(i - 1, 0)]
        trans[(h, "up")] = _merge((hi, up), (h, 1.0 - up))
        trans[(h, "down")] = _merge((lo, down), (h, 1.0 - down))
        trans[(h, "keep")] = _merge((h, 1.0 - drift), (lo, drift))
    cost = {(h, e, h2): costs[levels.index(h2)] for h in levels for e in ("up", "down", "keep") for h2 in levels}
    return CognitiveModel(levels, ("up", "down", "keep"), {"L": 1.0}, trans, cost, gamma, frozenset({"H"}))


def _merge(*entries) -> dict:
    # targets coincide at the boundary levels, so accumulate
    out: dict = {}
    for k, v in entries:
        if v > 0:
            out[k] = out.get(k, 0.0) + v
    return out


def _automaton_from_step(initial, ap, step, pairs) -> RabinAutomaton:
    """Enumerate the states reachable under ``step`` and compress edges with defaults."""
    letters = powerset(ap)
    seen, order, queue = {initial}, [initial], deque([initial])
    moves = {}
    while queue:
        q = queue.popleft()
        for w in letters:
            q2 = step(q, w)
            moves[(q, w)] = q2
            if q2 not in seen:
                seen.add(q2)
                order.append(q2)
                queue.append(q2)
    default, edges = {}, {}
    for q in order:
        common = Counter(moves[(q, w)] for w in letters).most_common(1)[0][0]
        default[q] = common
        edges.update({(q, w): moves[(q, w)] for w in letters if moves[(q, w)] != common})
    acceptance = tuple((frozenset(j) & seen, frozenset(k) & seen) for j, k in pairs)
    return RabinAutomaton(tuple(order), frozenset(ap), initial, edges, default, acceptance)


def gridworld_safety_automaton() -> RabinAutomaton:
    """``(F(R1 & F R2) | GF R3) & G !Unsafe``."""

    def step(q, w):
        if q == "bad" or "Unsafe" in w:
            return "bad"
        if q == "q2":
            return "q2"
        phase = 1 if q.startswith("q1") else 0
        if phase == 0 and "R1" in w:
            phase = 1
            if "R2" in w:
                return "q2"
        elif phase == 1 and "R2" in w:
            return "q2"
        return f"q{phase}" + ("r3" if "R3" in w else "")

    ap = {"R1", "R2", "R3", "Unsafe"}
    pairs = [({"bad"}, {"q2"}), ({"bad"}, {"q0r3", "q1r3"})]
    return _automaton_from_step("q0", ap, step, pairs)


def gridworld_liveness_automaton() -> RabinAutomaton:
    """``(F(R1 & F R2) | GF R3) & GF !Unsafe``.

    States are ``p{phase}b{wait}a{round}``: ``wait`` 0 waits for R3 and 1 for
    a safe letter; ``round`` marks a completed R3-then-safe round. Phase 2
    states ``p2s{safe}`` only track whether the last letter was safe.
    """

    def step(q, w):
        safe = "Unsafe" not in w
        if q.startswith("p2"):
            return f"p2s{int(safe)}"
        phase, wait = int(q[1]), int(q[3])
        if phase == 0 and "R1" in w:
            phase = 1
            if "R2" in w:
                return f"p2s{int(safe)}"
        elif phase == 1 and "R2" in w:
            return f"p2s{int(safe)}"
        done = 0
        if wait == 0 and "R3" in w:
            wait = 1
        if wait == 1 and safe:
            wait, done = 0, 1
        return f"p{phase}b{wait}a{done}"

    ap = {"R1", "R2", "R3", "Unsafe"}
    rounds = {f"p{ph}b{b}a1" for ph in (0, 1) for b in (0, 1)}
    pairs = [(set(), {"p2s1"}), (set(), rounds)]
    return _automaton_from_step("p0b0a0", ap, step, pairs)


def gridworld_example(grid: GridMap | None = None, gamma: float = 0.98, liveness: bool = False,
                      auto: dict | None = None, human: dict | None = None, **att_params):
    """``(M_A, M_H, M_att, DRA)`` for the gridworld; the map is configurable."""
    grid = grid or GridMap()
    ma = _grid_side(grid, auto or TERRAIN_AUTO, gamma)
    mh = _grid_side(grid, human or TERRAIN_HUMAN, gamma)
    att = grid_attention(gamma=gamma, **att_params)
    dra = gridworld_liveness_automaton() if liveness else gridworld_safety_automaton()
    return ma, mh, att, dra


EXAMPLES = {"arm": arm_example, "gridworld": gridworld_example}
