"""Command-line entry point: ``lablayout <subcommand> ...``.

Exit codes: 0 success, 1 validation issues, 2 operational or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from .assets import AssetBase, load_asset_base
from .config import PipelineConfig, load_config
from .errors import LabLayoutError, ValidationError, errors_only
from .evaluator import EvaluationReport, evaluate, reports_to_csv
from .fixtures import FIXTURES, bundled_assets, corpus_dir, data_dir
from .navigation import goal_pairs_to_json, path_to_world, reachability
from .optimizer import optimize, trace_to_jsonl
from .proposers import generate_layout
from .protocol import (
    Protocol,
    format_stats_table,
    load_corpus,
    load_protocol,
    protocol_stats,
    require_valid,
    stats_to_json,
    structural_issues,
    validate_protocol,
)
from .refine import history_to_jsonl, refine_loop
from .render import render_svg
from .safety import evaluate_constraints, unsafe_pairs
from .scene import Layout, Room, layout_to_json, load_layout

logger = logging.getLogger("lablayout")


# -- argument helpers -------------------------------------------------------------------


def parse_room(text: str) -> Room:
    try:
        w, d = (float(v) for v in text.lower().split("x"))
        return Room(w, d)
    except ValueError:
        raise argparse.ArgumentTypeError(f"room must look like 8x6, got {text!r}") from None


def _assets(args) -> AssetBase:
    return load_asset_base(args.assets) if args.assets else bundled_assets()


def _protocol_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    bundled = data_dir() / "protocols" / f"{name}.json"
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"protocol {name!r} is neither a file nor a bundled protocol")


def _protocol(args, base: AssetBase) -> Protocol:
    return require_valid(load_protocol(_protocol_path(args.protocol)), base)


def _config(args) -> PipelineConfig:
    return load_config(args.config).with_seed(args.seed)


def _write(path: str | Path | None, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _print_issues(issues) -> None:
    for issue in issues:
        print(str(issue))


# -- subcommands ------------------------------------------------------------------------


def cmd_validate_assets(args) -> int:
    base = _assets(args)  # load errors raise ValidationError
    _print_issues(base.issues)
    print(f"{len(base)} assets OK")
    return 0


def cmd_validate_protocol(args) -> int:
    base = _assets(args)
    path = _protocol_path(args.protocol)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: JSON parse error: {exc}") from exc
    issues = structural_issues(data)
    if not issues:
        issues = validate_protocol(load_protocol(path), base)
    _print_issues(issues)
    if errors_only(issues):
        return 1
    print(f"protocol {data.get('protocol_id')} OK")
    return 0


def cmd_stats(args) -> int:
    directory = Path(args.protocols) if args.protocols else corpus_dir()
    corpus = load_corpus(directory)
    if not corpus:
        raise FileNotFoundError(f"no protocol files in {directory}")
    stats = protocol_stats(corpus, ddof=args.ddof)
    print(stats_to_json(stats, len(corpus)) if args.json else format_stats_table(stats))
    return 0


def cmd_generate(args) -> int:
    cfg, base = _config(args), _assets(args)
    protocol = _protocol(args, base)
    layout = generate_layout(protocol, base, args.room, cfg.build_proposer(base), seed=cfg.seed)
    _write(args.out, layout_to_json(layout))
    return 0


def _load_scene(args, base: AssetBase) -> tuple[Layout, Protocol]:
    return load_layout(args.layout, base), _protocol(args, base)


def cmd_optimize(args) -> int:
    cfg, base = _config(args), _assets(args)
    layout, protocol = _load_scene(args, base)
    out, trace = optimize(layout, protocol, base, cfg.build_proposer(base), cfg.optimizer_config(), cfg.safety)
    _write(args.out, layout_to_json(out))
    if args.trace:
        _write(args.trace, trace_to_jsonl(trace))
    return 0


def cmd_navcheck(args) -> int:
    cfg, base = _config(args), _assets(args)
    layout, protocol = _load_scene(args, base)
    report = reachability(layout, protocol, base, cfg.nav, strict=False)
    print(f"f_reach={report.f_reach}")
    for i, (pair, outcome) in enumerate(zip(report.pairs, report.outcomes)):
        print(f"pair {i}: step {pair.start.step} -> step {pair.end.step}: {outcome.status} length={outcome.length:.3f}")
    if args.goal_pairs:
        _write(args.goal_pairs, goal_pairs_to_json(report.pairs, report.num_targets))
    if args.pgm:
        report.grid.save_pgm(args.pgm)
    return 0


def cmd_refine(args) -> int:
    cfg, base = _config(args), _assets(args)
    layout, protocol = _load_scene(args, base)
    out, history = refine_loop(layout, protocol, base, cfg.refine_config())
    _write(args.out, layout_to_json(out))
    if args.history:
        _write(args.history, history_to_jsonl(history))
    return 0


def _evaluate_path(job: tuple) -> str:
    layout_path, protocol_path, assets_path, config_path, seed = job
    cfg = load_config(config_path).with_seed(seed)
    base = load_asset_base(assets_path) if assets_path else bundled_assets()
    protocol = require_valid(load_protocol(protocol_path), base)
    layout = load_layout(layout_path, base)
    report = evaluate(layout, protocol, base, cfg.safety, cfg.nav, cfg.build_scorer(), cfg.semantic.mode)
    return report.to_json()


def cmd_evaluate(args) -> int:
    protocol_path = str(_protocol_path(args.protocol))
    jobs = [(p, protocol_path, args.assets, args.config, args.seed) for p in args.layout]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            texts = list(pool.map(_evaluate_path, jobs))
    else:
        texts = [_evaluate_path(j) for j in jobs]
    reports = [EvaluationReport.from_json(t) for t in texts]
    if args.csv:
        _write(args.csv, reports_to_csv(reports))
    if args.out:
        text = texts[0] if len(texts) == 1 else json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
        _write(args.out, text)
    if not args.csv and not args.out:
        sys.stdout.write(texts[0] if len(texts) == 1 else reports_to_csv(reports))
    return 0


def render_scene(layout: Layout, base: AssetBase, protocol: Protocol | None, cfg: PipelineConfig, grid: bool) -> str:
    if protocol is None:
        return render_svg(layout, base)
    report = reachability(layout, protocol, base, cfg.nav, strict=False)
    paths = [path_to_world(report.grid, o.path) for o in report.outcomes if o.path]
    targets = [t for p in report.pairs for t in (p.start, p.end)]
    targets = list({(t.x, t.y, t.theta, t.step): t for t in targets}.values())
    unsafe = unsafe_pairs(evaluate_constraints(layout, protocol, base, cfg.safety))
    return render_svg(layout, base, report.grid if grid else None, paths, targets, unsafe)


def cmd_render(args) -> int:
    cfg, base = _config(args), _assets(args)
    layout = load_layout(args.layout, base)
    protocol = _protocol(args, base) if args.protocol else None
    _write(args.out, render_scene(layout, base, protocol, cfg, args.grid))
    return 0


def run_pipeline(
    protocol: Protocol, base: AssetBase, cfg: PipelineConfig, room: Room, outdir: Path, layout: Layout | None = None
) -> EvaluationReport:
    """generate -> optimize -> refine -> evaluate, writing every intermediate file."""
    outdir.mkdir(parents=True, exist_ok=True)
    proposer = cfg.build_proposer(base)
    if layout is None:
        layout = generate_layout(protocol, base, room, proposer, seed=cfg.seed)
    (outdir / "layout_init.json").write_text(layout_to_json(layout), encoding="utf-8")
    optimized, trace = optimize(layout, protocol, base, proposer, cfg.optimizer_config(), cfg.safety)
    (outdir / "trace.jsonl").write_text(trace_to_jsonl(trace), encoding="utf-8")
    (outdir / "layout_optimized.json").write_text(layout_to_json(optimized), encoding="utf-8")
    refined, history = refine_loop(optimized, protocol, base, cfg.refine_config())
    (outdir / "refine.jsonl").write_text(history_to_jsonl(history), encoding="utf-8")
    (outdir / "layout.json").write_text(layout_to_json(refined), encoding="utf-8")
    nav = reachability(refined, protocol, base, cfg.nav, strict=False)
    (outdir / "goal_pairs.json").write_text(goal_pairs_to_json(nav.pairs, nav.num_targets), encoding="utf-8")
    report = evaluate(refined, protocol, base, cfg.safety, cfg.nav, cfg.build_scorer(), cfg.semantic.mode)
    (outdir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (outdir / "layout.svg").write_text(render_scene(refined, base, protocol, cfg, grid=False), encoding="utf-8")
    return report


def cmd_pipeline(args) -> int:
    cfg, base = _config(args), _assets(args)
    layout = None
    room = args.room
    if args.fixture:
        if args.fixture not in FIXTURES:
            raise KeyError(f"unknown fixture {args.fixture!r}; choose from {sorted(FIXTURES)}")
        fixture_layout, protocol = FIXTURES[args.fixture](base)
        room = fixture_layout.room
        if args.fixture != "full_demo":
            layout = fixture_layout
    elif args.protocol:
        protocol = _protocol(args, base)
    else:
        raise ValueError("pipeline needs --protocol or --fixture")
    if args.layout:
        layout = load_layout(args.layout, base)
    report = run_pipeline(protocol, base, cfg, room, Path(args.outdir), layout)
    print(f"overall={report.overall:.3f} f_geo={report.f_geo:.3f} f_chem={report.f_chem:.3f} f_reach={report.f_reach}")
    return 0


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (overrides config)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML configuration file")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel workers for batch evaluation")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="lablayout", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, *, layout=False, protocol=False, out=False):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("--assets", help="asset knowledge base JSON (default: bundled)")
        if layout:
            p.add_argument("--layout", required=True, help="layout JSON")
        if protocol:
            p.add_argument("--protocol", required=True, help="protocol JSON path or bundled protocol name")
        if out:
            p.add_argument("--out", help="output file (default: stdout)")
        p.set_defaults(func=func)
        return p

    add("validate-assets", cmd_validate_assets, "check an asset knowledge base")
    add("validate-protocol", cmd_validate_protocol, "check a protocol against the asset base", protocol=True)
    p = add("stats", cmd_stats, "count statistics over a protocol directory")
    p.add_argument("--protocols", help="directory of protocol JSON files (default: bundled corpus)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p.add_argument("--ddof", type=int, default=0, help="std degrees of freedom: 0 population, 1 sample")
    p = add("generate", cmd_generate, "initial layout from a protocol", protocol=True, out=True)
    p.add_argument("--room", type=parse_room, default=Room(8.0, 6.0), help="room size WxD in meters")
    p = add("optimize", cmd_optimize, "geometric and chemical optimization", layout=True, protocol=True, out=True)
    p.add_argument("--trace", help="write the JSON-lines trace here")
    p = add("navcheck", cmd_navcheck, "goal pairs and A* reachability", layout=True, protocol=True)
    p.add_argument("--goal-pairs", help="write goal pairs JSON here")
    p.add_argument("--pgm", help="write the occupancy grid as PGM here")
    p = add("refine", cmd_refine, "navigation-aware refinement", layout=True, protocol=True, out=True)
    p.add_argument("--history", help="write the JSON-lines refinement history here")
    p = sub.add_parser("evaluate", help="score one or more layouts", parents=[common])
    p.add_argument("--assets")
    p.add_argument("--layout", nargs="+", required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--out", help="report JSON output")
    p.add_argument("--csv", help="summary CSV output")
    p.set_defaults(func=cmd_evaluate)
    p = add("render", cmd_render, "top-down SVG", layout=True, out=True)
    p.add_argument("--protocol", help="draw navigation targets, paths and unsafe pairs for this protocol")
    p.add_argument("--grid", action="store_true", help="draw the inflated occupancy grid")
    p = add("pipeline", cmd_pipeline, "generate, optimize, refine and evaluate")
    p.add_argument("--protocol", help="protocol JSON path or bundled protocol name")
    p.add_argument("--fixture", help=f"bundled fixture ({', '.join(sorted(FIXTURES))})")
    p.add_argument("--layout", help="start from this layout instead of generating one")
    p.add_argument("--room", type=parse_room, default=Room(8.0, 6.0))
    p.add_argument("--outdir", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for key, default in (("seed", None), ("config", None), ("jobs", 1), ("verbose", False)):
        if not hasattr(args, key):
            setattr(args, key, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LabLayoutError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
