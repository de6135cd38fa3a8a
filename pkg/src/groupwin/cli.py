"""Command line entry point: ``groupwin {mask,windows,group,verify,simulate}``.

Every subcommand writes one JSON document to stdout (validated against the
schemas shipped in ``groupwin/schemas``); CSV files are written on request.
All randomness comes from ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .attention import (
    AttentionParams,
    group_window_attention,
    make_tokens,
    max_relative_error,
    reference_window_attention,
)
from .grouping import optimal_grouping, partition
from .masking import expand_to_tokens, gen_batch_mask
from .simulation import default_profile, flops_comparison, sweep_cost_curve
from .windowing import StageGeometry, nonempty, partition_windows, with_visibility


class CliError(Exception):
    pass


# ---- argument types -------------------------------------------------------

def _int_at_least(lo):
    def parse(tok):
        try:
            v = int(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer: {tok!r}")
        if v < lo:
            raise argparse.ArgumentTypeError(f"{tok!r} must be >= {lo}")
        return v
    return parse


def _ratio(tok):
    try:
        v = float(tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ratio: {tok!r}")
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"ratio {tok!r} must lie in [0, 1)")
    return v


def _int_list(tok):
    try:
        vals = [int(t) for t in tok.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list: {tok!r}")
    if not vals:
        raise argparse.ArgumentTypeError(f"empty list: {tok!r}")
    return vals


def _pos_list(tok):
    vals = _int_list(tok)
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"all entries of {tok!r} must be >= 1")
    return vals


def _shift(tok):
    vals = _int_list(tok)
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or min(vals) < 0:
        raise argparse.ArgumentTypeError(f"shift must be 'dy,dx' with non-negative entries: {tok!r}")
    return tuple(vals)


pos_int = _int_at_least(1)
nonneg_int = _int_at_least(0)


# ---- shared helpers -------------------------------------------------------

def _add_mask_flags(p, units_default=7, span_default=1):
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--ratio", type=_ratio, default=0.75)
    p.add_argument("--units-h", type=pos_int, default=None,
                   help=f"mask units vertically (default: tokens/unit-span, or {units_default})")
    p.add_argument("--units-w", type=pos_int, default=None)
    p.add_argument("--unit-span", type=pos_int, default=span_default)


def _add_geometry_flags(p):
    p.add_argument("--tokens-h", type=pos_int, default=56)
    p.add_argument("--tokens-w", type=pos_int, default=56)
    p.add_argument("--window", type=pos_int, default=7)
    p.add_argument("--shift", type=_shift, default=(0, 0), help="'dy,dx' (default 0,0)")


def _units(args, tokens_h, tokens_w):
    uh = args.units_h if args.units_h is not None else tokens_h // args.unit_span
    uw = args.units_w if args.units_w is not None else tokens_w // args.unit_span
    if (uh * args.unit_span, uw * args.unit_span) != (tokens_h, tokens_w):
        raise CliError(
            f"mask of {uh}x{uw} units with span {args.unit_span} does not cover "
            f"the {tokens_h}x{tokens_w} token grid"
        )
    return uh, uw


def _stage_layout(args, channels=128):
    geom = StageGeometry(
        args.tokens_h, args.tokens_w, args.window, args.shift, channels, args.unit_span
    )
    uh, uw = _units(args, geom.tokens_h, geom.tokens_w)
    mask = gen_batch_mask(args.seed, uh, uw, args.ratio)
    vis = expand_to_tokens(mask, args.unit_span)
    return mask, vis, with_visibility(partition_windows(geom), vis)


def _config(args):
    skip = {"func", "command", "help_json"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def _doc(args, **body):
    return {"tool": "groupwin", "version": __version__, "command": args.command,
            "config": _config(args), **body}


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e.strerror or e}") from e


# ---- subcommands ----------------------------------------------------------

def cmd_mask(args):
    mask = gen_batch_mask(args.seed, args.units_h or 7, args.units_w or 7, args.ratio)
    if args.format == "ascii":
        return mask.to_ascii() + "\n"
    vis = expand_to_tokens(mask, args.unit_span)
    return _doc(
        args,
        mask={
            "units_h": mask.units_h,
            "units_w": mask.units_w,
            "ratio": mask.ratio,
            "hidden_units": mask.n_hidden,
            "visible_units": mask.n_visible,
            "visible": mask.visible.tolist(),
        },
        tokens={
            "tokens_h": vis.tokens_h,
            "tokens_w": vis.tokens_w,
            "visible_tokens": vis.n_visible,
            "visible": vis.visible.tolist(),
        },
    )


def cmd_windows(args):
    _, vis, layout = _stage_layout(args)
    return _doc(
        args,
        n_windows=len(layout),
        visible_tokens=vis.n_visible,
        windows=[
            {"id": w.id, "origin": list(w.origin), "n_tokens": w.n_tokens,
             "visible_count": w.visible_count, "empty": w.empty}
            for w in layout
        ],
        counts=layout.counts,
    )


def cmd_group(args):
    if args.sizes is not None:
        ids, sizes = list(range(len(args.sizes))), args.sizes
    else:
        _, _, layout = _stage_layout(args, args.channels)
        ids, sizes = nonempty(layout.counts)
        if not sizes:
            raise CliError("every window is fully masked; nothing to group")
    if args.gs is not None:
        plan = partition(args.gs, sizes, ids, args.channels)
        rows = [(plan.group_size, plan.n_groups, plan.cost)]
    else:
        cands = None
        if args.candidates == "multiples":
            step = args.window * args.window
            cands = range(step, sum(sizes) + step, step)
        elif args.candidates:
            cands = _pos_list(args.candidates)
        plan, report = optimal_grouping(sizes, args.channels, ids, cands)
        rows = report.candidates
    if args.csv:
        lines = ["g_s,n_g,flops"] + [f"{g},{n},{c}" for g, n, c in rows]
        _write_text(args.csv, "\n".join(lines) + "\n")
    return _doc(
        args,
        window_ids=list(ids),
        sizes=list(sizes),
        plan=plan.to_dict(),
        report={
            "candidates": [{"g_s": g, "n_g": n, "flops": c} for g, n, c in rows],
            "best_group_size": plan.group_size,
            "best_flops": plan.cost,
        },
    )


def cmd_verify(args):
    stage = default_profile()[args.stage - 1]
    channels = args.channels or stage.channels
    dtype = np.dtype(args.dtype)
    tol = args.tol if args.tol is not None else (1e-9 if dtype == np.float64 else 1e-5)
    geom = StageGeometry(stage.tokens, stage.tokens, stage.window, args.shift,
                         channels, stage.unit_span)
    units = stage.tokens // stage.unit_span
    vis = expand_to_tokens(gen_batch_mask(args.seed, units, units, args.ratio), stage.unit_span)
    layout = with_visibility(partition_windows(geom), vis)
    ids, sizes = nonempty(layout.counts)
    rng = np.random.default_rng(args.seed)
    tokens = make_tokens(layout, vis, rng.standard_normal((vis.n_visible, channels)).astype(dtype))
    params = AttentionParams.random(channels, args.heads, stage.window, args.seed, dtype)

    if sizes:
        plan, _ = optimal_grouping(sizes, channels, ids)
        grouped = group_window_attention(tokens, layout, plan, params).values
        plan_info = {"group_size": plan.group_size, "n_groups": plan.n_groups}
    else:
        grouped = np.zeros_like(tokens.values)
        plan_info = {"group_size": None, "n_groups": 0}
    ref = reference_window_attention(tokens, layout, params).values
    err = max_relative_error(grouped, ref)
    ok = err <= tol
    return _doc(
        args,
        stage=args.stage,
        visible_tokens=len(tokens),
        n_windows=len(layout),
        plan=plan_info,
        max_relative_error=err,
        tolerance=tol,
        passed=bool(ok),
    ), (0 if ok else 1)


def cmd_simulate(args):
    chans = args.channels or [128, 256, 512, 1024]
    if len(chans) == 1:
        chans = chans * 4
    if len(chans) != 4:
        raise CliError(f"--channels needs 1 or 4 values, got {len(chans)}")
    profile = default_profile(tuple(chans))
    stages = profile if args.stage == "all" else [profile[int(args.stage) - 1]]

    summaries = []
    for st in stages:
        stats = sweep_cost_curve(st, args.ratio, args.trials, args.seed, args.threads)
        if args.out:
            out = Path(args.out)
            if len(stages) > 1:
                out = out.with_name(f"{out.stem}_stage{st.index}{out.suffix or '.csv'}")
            _write_text(out, stats.to_csv())
        s = stats.summary()
        s["channels"] = st.channels
        s["n_windows"] = st.n_windows
        if stats.single_window:
            s["note"] = "single local window in this stage; grouping is not necessary"
        summaries.append(s)
    flops = flops_comparison(stages, args.ratio, args.seed)
    doc = _doc(args, stages=summaries, flops=flops)
    if args.json:
        return doc
    lines = []
    for s, f in zip(summaries, flops["stages"]):
        line = (f"stage {s['stage']}: windows={s['n_windows']} C={s['channels']} "
                f"mean-curve argmin g_s={s['mean_curve_argmin']} "
                f"grouped/dense FLOPs={f['ratio']:.6f}")
        if s.get("note"):
            line += f"  ({s['note']})"
        lines.append(line)
    lines.append(f"total grouped/dense FLOPs={flops['total']['ratio']:.6f}")
    return "\n".join(lines) + "\n"


def load_schema(command: str) -> dict:
    """JSON schema for the stdout document of ``command``."""
    text = resources.files("groupwin").joinpath("schemas", f"{command}.schema.json").read_text()
    return json.loads(text)


# ---- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupwin",
        description="Group window attention scheduling for masked hierarchical ViTs.",
    )
    parser.add_argument("--version", action="version", version=f"groupwin {__version__}")
    parser.add_argument("--help-json", action="store_true",
                        help="print a machine-readable description of all subcommands")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("mask", help="draw a batch-wise random mask")
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--units-h", type=pos_int, default=7)
    p.add_argument("--units-w", type=pos_int, default=7)
    p.add_argument("--ratio", type=_ratio, default=0.75)
    p.add_argument("--unit-span", type=pos_int, default=1)
    p.add_argument("--format", choices=("json", "ascii"), default="json")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("windows", help="per-window visible token counts")
    _add_geometry_flags(p)
    _add_mask_flags(p, span_default=8)
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("group", help="optimal grouping of windows")
    p.add_argument("--sizes", type=_pos_list, default=None,
                   help="comma-separated visible counts; otherwise derived from the mask")
    p.add_argument("--channels", type=pos_int, default=128)
    p.add_argument("--gs", type=pos_int, default=None, help="fix the group size instead of sweeping")
    p.add_argument("--candidates", default=None,
                   help="'multiples' (of window*window) or a comma list of group sizes")
    p.add_argument("--csv", default=None, help="write the (g_s, n_g, flops) sweep here")
    _add_geometry_flags(p)
    _add_mask_flags(p, span_default=8)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("verify", help="check grouped attention against per-window attention")
    p.add_argument("--stage", type=int, choices=(1, 2, 3, 4), default=1)
    p.add_argument("--ratio", type=_ratio, default=0.75)
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--shift", type=_shift, default=(0, 0))
    p.add_argument("--channels", type=pos_int, default=None, help="default: stage width")
    p.add_argument("--heads", type=pos_int, default=4)
    p.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="cost-vs-group-size sweeps and FLOPs report")
    p.add_argument("--stage", choices=("1", "2", "3", "4", "all"), default="all")
    p.add_argument("--ratio", type=_ratio, default=0.75)
    p.add_argument("--trials", type=pos_int, default=100)
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--channels", type=_pos_list, default=None,
                   help="one width for all stages or four comma-separated widths")
    p.add_argument("--out", default=None, help="CSV path for the cost curve")
    p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p.add_argument("--threads", type=pos_int, default=1, help="worker processes for trials")
    p.set_defaults(func=cmd_simulate)
    return parser


def help_json(parser) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmds = {}
    for name, p in sub.choices.items():
        opts = []
        for a in p._actions:
            if isinstance(a, argparse._HelpAction):
                continue
            opts.append({
                "flags": list(a.option_strings),
                "dest": a.dest,
                "default": list(a.default) if isinstance(a.default, tuple) else a.default,
                "choices": list(a.choices) if a.choices else None,
                "help": a.help,
            })
        cmds[name] = {"help": sub._choices_actions and next(
            (c.help for c in sub._choices_actions if c.dest == name), None), "options": opts}
    return {"tool": "groupwin", "version": __version__, "commands": cmds}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.help_json:
        print(json.dumps(help_json(parser), indent=2))
        return 0
    if args.command is None:
        parser.print_help()
        return 2
    try:
        result = args.func(args)
    except (CliError, ValueError, argparse.ArgumentTypeError) as e:
        print(f"groupwin {args.command}: error: {e}", file=sys.stderr)
        return 2
    code = 0
    if isinstance(result, tuple):
        result, code = result
    if isinstance(result, str):
        sys.stdout.write(result)
    else:
        print(json.dumps(result, indent=2))
    return code


if __name__ == "__main__":
    sys.exit(main())
