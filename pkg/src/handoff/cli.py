"""Command-line interface.

Exit codes: 0 success, 1 model validation failure, 2 usage, I/O or schema
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, io
from .examples import GridMap, arm_example, gridworld_example
from .lp import SolverError
from .model import ModelError, validate_automaton, validate_cognitive, validate_mdp
from .pareto import EPS_AUG, beta_grid
from .aec import EPS_VISIT, RECURRENCE_MIX

log = logging.getLogger("handoff")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2
VALIDATORS = {"mdp": validate_mdp, "cognitive": validate_cognitive, "rabin": validate_automaton}
INPUT_FILES = ("ma", "mh", "att", "dra")
INPUT_KINDS = {"ma": "mdp", "mh": "mdp", "att": "cognitive", "dra": "rabin"}


class UsageError(Exception):
    pass


def _weights(text: str) -> tuple:
    try:
        w = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"malformed weights {text!r}") from None
    if len(w) != 2 or any(x < 0 or not math.isfinite(x) for x in w) or abs(sum(w) - 1.0) > 1e-9:
        raise UsageError(f"weights {text!r} must be two non-negative numbers summing to 1")
    return w


def _read_weights_file(path) -> list:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    out = []
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(_weights(line))
        except UsageError as exc:
            raise UsageError(f"{path}:{n}: {exc}") from None
    return out


def _load_inputs(args):
    if args.example:
        return EXAMPLE_BUILDERS[args.example]()
    missing = [f"--{k}" for k in INPUT_FILES if getattr(args, k) is None]
    if missing:
        raise UsageError(f"missing {' '.join(missing)} (or use --example)")
    return tuple(io.read_model(getattr(args, k), INPUT_KINDS[k]) for k in INPUT_FILES)


def _prepare(args):
    from .pipeline import build_product, prepare

    ma, mh, att, dra = _load_inputs(args)
    return prepare(build_product(ma, mh, att, dra), args.eps_visit, args.recurrence_mix)


EXAMPLE_BUILDERS = {"arm": arm_example, "gridworld": gridworld_example}


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    worst = EXIT_OK
    for path in args.paths:
        try:
            model = io.read_model(path)
        except io.SchemaError as exc:
            print(f"error: {exc}", file=sys.stderr)
            worst = EXIT_USAGE
            continue
        kind = io.dump_model(model)["kind"]
        problems = VALIDATORS[kind](model)
        if problems:
            for msg in problems:
                print(f"{path}: {msg}")
            worst = max(worst, EXIT_INVALID)
        else:
            print(f"{path}: ok ({kind})")
    return worst


def _point_doc(prep, point) -> dict:
    return {
        "weights": list(point.weights),
        "lambda": list(point.lam),
        "u1": point.profile.u1,
        "u2": point.profile.u2,
        "ideal": list(prep.points.ideal),
        "nadir": list(prep.points.nadir),
    }


def cmd_synthesize(args) -> int:
    from .pipeline import synthesize

    w = _weights(args.weights)
    prep = _prepare(args)
    point = synthesize(prep, w, args.eps_aug)
    p = prep.product
    doc = _point_doc(prep, point)
    print(json.dumps(doc, indent=1))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "bundle.json", io.bundle_doc(p, point.policy, prep.terminal))
        io.write_json(out / "profile.json", doc)
        io.write_json(out / "stage1_policy.json", io.policy_table(p, point.policy))
        io.write_json(out / "aec_policies.json", [
            {"component": i, "states": [io._jsonable(p.states[v]) for v in sorted(s.component.states)],
             "lp_value": s.objective, "recurrence_mix": s.mix, "policy": io.policy_table(p, s.policy)}
            for i, s in enumerate(prep.terminal.solutions)])
        io.write_json(out / "terminal_costs.json", [
            [io._jsonable(p.states[v]), u, prep.terminal.component_of[v]] for v, u in sorted(prep.terminal.values.items())])
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .pipeline import sweep

    if args.weights_file:
        weights = _read_weights_file(args.weights_file)
    else:
        if args.grid < 1:
            raise UsageError("--grid must be >= 1")
        weights = beta_grid(args.grid)
    prep = _prepare(args)
    points = sweep(prep, weights, args.eps_aug)
    lines = ["w1,w2,lambda1,lambda2,u1,u2"]
    for pt in points:
        if pt.profile is None:
            print(f"warning: weight {pt.weights} failed: {pt.error}", file=sys.stderr)
            u = (float("nan"), float("nan"))
        else:
            u = (pt.profile.u1, pt.profile.u2)
        lines.append(",".join(io.fmt(x) for x in (*pt.weights, *pt.lam, *u)))
    text = "\n".join(lines) + "\n"
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    if args.svg:
        Path(args.svg).write_text(scatter_svg([(pt.profile.u1, pt.profile.u2) for pt in points if pt.profile]))
    return EXIT_OK


def scatter_svg(points, width: int = 360, height: int = 280, margin: int = 40) -> str:
    """Plain SVG scatter of ``(u1, u2)`` points with axis extents as labels."""
    xs = [p[0] for p in points] or [0.0]
    ys = [p[1] for p in points] or [0.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (width - 2 * margin) / (x1 - x0 or 1.0)
    sy = (height - 2 * margin) / (y1 - y0 or 1.0)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
           f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
           f'<text x="{width // 2}" y="{height - 8}" text-anchor="middle" font-size="11">u1 [{x0:.6g}, {x1:.6g}]</text>',
           f'<text x="12" y="{height // 2}" font-size="11" transform="rotate(-90 12 {height // 2})" '
           f'text-anchor="middle">u2 [{y0:.6g}, {y1:.6g}]</text>']
    for x, y in points:
        cx = margin + (x - x0) * sx
        cy = height - margin - (y - y0) * sy
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_example(args) -> int:
    if args.name == "arm":
        models = arm_example(gamma=args.gamma, focus=args.focus)
    else:
        grid = GridMap()
        if args.map:
            grid = _read_map(args.map)
        models = gridworld_example(grid, gamma=args.gamma, liveness=args.liveness)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tag, model in zip(INPUT_FILES, models):
        io.write_json(out / f"{tag}.json", io.dump_model(model))
        print(out / f"{tag}.json")
    return EXIT_OK


def _read_map(path) -> GridMap:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    unknown = set(doc) - {"terrain", "regions", "obstacles", "start"}
    if unknown:
        raise UsageError(f"{path}: unknown map fields {sorted(unknown)}")
    g = GridMap()
    try:
        terrain = tuple(doc.get("terrain", g.terrain))
        regions = {k: tuple(tuple(c) for c in v) for k, v in doc.get("regions", g.regions).items()}
        obstacles = tuple(tuple(c) for c in doc.get("obstacles", g.obstacles))
        start = tuple(doc.get("start", g.start))
    except (TypeError, AttributeError) as exc:
        raise UsageError(f"{path}: malformed map ({exc})") from None
    if len({len(r) for r in terrain}) != 1 or any(ch not in "PGVS" for r in terrain for ch in r):
        raise UsageError(f"{path}: terrain rows must have equal length and use P, G, V, S")
    return GridMap(terrain, regions, obstacles, start)


def cmd_simulate(args) -> int:
    from .sim import ExecutionPlan, estimate, simulate

    if args.traces < 1 or args.horizon < 1:
        raise UsageError("--traces and --horizon must be >= 1")
    p, stage1, terminal = io.load_bundle(args.policy_bundle)
    plan = ExecutionPlan.build(p, stage1, terminal)
    est = estimate(plan, args.traces, args.horizon, args.seed, min_suffix=args.min_suffix)
    doc = {
        "traces": est.n_traces,
        "horizon": est.horizon,
        "seed": args.seed,
        "reach_mean": est.reach_mean,
        "reach_se": est.reach_se,
        "cost_mean": est.cost_mean,
        "cost_se": est.cost_se,
        "reach_truncation": est.reach_truncation,
        "cost_truncation": est.cost_truncation,
        "switched": est.switched,
        "min_suffix": est.min_suffix,
        "recurrence": [{"component": c, "checked": n, "all_visited": ok} for c, (n, ok) in est.recurrence.items()],
        "visits": [[io._jsonable(s), n] for s, n in est.visit_totals.items()],
    }
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.export_traces:
        with open(args.export_traces, "w") as fh:
            for i in range(min(args.traces, args.export_limit)):
                tr = simulate(plan, args.seed, args.horizon, index=i)
                fh.write(json.dumps({
                    "trace": i,
                    "switch_index": tr.switch_index,
                    "discounted_reach": tr.discounted_reach,
                    "discounted_cost": tr.discounted_cost,
                    "steps": [[io._jsonable(s.state), str(s.action), s.mode, s.cost] for s in tr.steps],
                }) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _synthesis_options(sp):
    for k in INPUT_FILES:
        sp.add_argument(f"--{k}", metavar="FILE", help=f"{INPUT_KINDS[k]} file")
    sp.add_argument("--example", choices=sorted(EXAMPLE_BUILDERS), help="use a built-in example instead of files")
    sp.add_argument("--eps-aug", type=float, default=EPS_AUG)
    sp.add_argument("--eps-visit", type=float, default=EPS_VISIT)
    sp.add_argument("--recurrence-mix", type=float, default=RECURRENCE_MIX)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="handoff", description="Pareto-optimal control handoff synthesis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="parse and check model files")
    sp.add_argument("paths", nargs="+")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("synthesize", help="two-stage synthesis for one weight vector")
    _synthesis_options(sp)
    sp.add_argument("--weights", required=True, help="w1,w2 summing to 1")
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("sweep", help="Pareto sweep over a weight grid")
    _synthesis_options(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--grid", type=int, default=9, help="k weights (j/(k+1), 1-j/(k+1))")
    g.add_argument("--weights-file", metavar="FILE", help="one w1,w2 pair per line")
    sp.add_argument("--csv", metavar="FILE", help="write CSV here instead of stdout")
    sp.add_argument("--svg", metavar="FILE", help="also write a scatter plot")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("example", help="write the four input files of a built-in example")
    sp.add_argument("name", choices=sorted(EXAMPLE_BUILDERS))
    sp.add_argument("--out", required=True, metavar="DIR")
    sp.add_argument("--gamma", type=float, default=0.98)
    sp.add_argument("--focus", type=float, default=0.85, help="arm: P(attention rises on request)")
    sp.add_argument("--liveness", action="store_true", help="gridworld: GF !Unsafe instead of G !Unsafe")
    sp.add_argument("--map", metavar="FILE", help="gridworld: JSON map with terrain/regions/obstacles/start")
    sp.set_defaults(func=cmd_example)

    sp = sub.add_parser("simulate", help="Monte-Carlo estimates for a policy bundle")
    sp.add_argument("--policy-bundle", required=True, metavar="FILE")
    sp.add_argument("--traces", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=int, default=2000)
    sp.add_argument("--min-suffix", type=int, default=None, help="suffix length for the recurrence table")
    sp.add_argument("--out", metavar="FILE")
    sp.add_argument("--export-traces", metavar="FILE", help="JSON lines, one per trace")
    sp.add_argument("--export-limit", type=int, default=100, help="max traces exported")
    sp.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
