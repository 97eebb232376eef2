"""Command-line front end.

Every subcommand is a thin adapter over one module call: load inputs,
call the library, write outputs.  Diagnostics go to stderr; data goes
to files (or stdout for the pure query commands).  Exit codes: 0 on
success, 1 for I/O or computation failures, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .color import DEFAULT_BINS, build_style_movie, match_histogram
from .energy import EnergyWeights, default_weights
from .errors import FlowStyleError
from .flow import (
    FlowParams,
    coherence_metric,
    estimate_flow,
    read_flo,
    warp_image,
    write_flo,
)
from .image import clamp01, load_image, noise_image, save_image
from .network import (
    KIND_CONV,
    KIND_INPUT_MEAN,
    load_network,
    load_tiny_vgg,
    read_weights,
    tiny_vgg_files,
)
from .optim import AdamParams, style_transfer
from .pipeline import (
    RenderJob,
    Strategy,
    detect_scene_cuts,
    discover_frames,
    frame_name,
    load_flow_dir,
    render_video,
)


def _load_net(args, config: dict | None = None):
    config = config or {}
    spec_path = getattr(args, "network_spec", None) or config.get("network_spec")
    weights = getattr(args, "network_weights", None) or config.get("network_weights")
    if spec_path:
        return load_network(Path(spec_path).read_text(), weights)
    return load_tiny_vgg()


def _weights_from(config: dict, args) -> EnergyWeights:
    """Weights from the config file's ``weights`` table, overridden by flags.

    Scalars go through the default layer split; a JSON object gives
    per-layer weights directly.
    """
    table = dict(config.get("weights", {}))
    for key in ("content", "style", "tv", "temporal", "temporal_mode"):
        flag = getattr(args, f"weight_{key}", None) if key != "temporal_mode" \
            else getattr(args, "temporal_mode", None)
        if flag is not None:
            table[key] = flag
    content = table.get("content", 1.0)
    style = table.get("style", 1.0)
    base = default_weights(
        content=content if not isinstance(content, dict) else 1.0,
        style=style if not isinstance(style, dict) else 1.0,
        tv=float(table.get("tv", 1e-3)),
        temporal=float(table.get("temporal", 0.0)),
        temporal_mode=table.get("temporal_mode", "squared"),
    )
    if isinstance(content, dict) or isinstance(style, dict):
        base = EnergyWeights(
            content={k: float(v) for k, v in content.items()}
            if isinstance(content, dict) else base.content,
            style={k: float(v) for k, v in style.items()}
            if isinstance(style, dict) else base.style,
            tv=base.tv, temporal=base.temporal,
            temporal_mode=base.temporal_mode,
        )
    return base


def cmd_render_image(args) -> int:
    net = _load_net(args)
    content = load_image(args.content)
    style = load_image(args.style)
    weights = _weights_from({}, args)
    if args.init == "noise":
        init = noise_image(content.shape[0], content.shape[1],
                           content.shape[2], seed=args.seed)
    else:
        init = content
    result = style_transfer(net, init, content, style, weights,
                            iterations=args.iterations,
                            params=AdamParams(step_size=args.step_size),
                            auto_balance=args.auto_balance)
    save_image(args.out, clamp01(result.image))
    return 0


def _job_from(args) -> RenderJob:
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    def pick(key, flag, fallback):
        return flag if flag is not None else config.get(key, fallback)

    strategy = Strategy(pick("strategy", args.strategy, "flow-init"),
                        passes=int(pick("passes", args.passes, 1)))
    cuts = pick("scene_cuts", args.scene_cuts, [])
    if isinstance(cuts, str):
        cuts = [int(c) for c in cuts.split(",") if c]
    flow_dir = pick("flow_dir", args.flow_dir, None)
    return RenderJob(
        frames_dir=Path(pick("frames_dir", args.frames_dir, "")),
        style=Path(pick("style", args.style, "")),
        out_dir=Path(pick("out_dir", args.out_dir, "")),
        network=_load_net(args, config),
        weights=_weights_from(config, args),
        iterations=int(pick("iterations", args.iterations, 1000)),
        strategy=strategy,
        scene_cuts=tuple(int(c) for c in cuts),
        flow_mode=pick("flow_mode", args.flow_mode, "builtin"),
        flow_dir=Path(flow_dir) if flow_dir else None,
        hist_match=bool(pick("hist_match",
                             True if args.hist_match else None, False)),
        fps=float(pick("fps", args.fps, 10.0)),
        auto_balance=bool(pick("auto_balance",
                               True if args.auto_balance else None, False)),
        jobs=args.jobs,
    )


def cmd_render_video(args) -> int:
    render_video(_job_from(args))
    return 0


def cmd_flow_estimate(args) -> int:
    a = load_image(args.a)
    b = load_image(args.b)
    params = FlowParams(alpha=args.alpha, levels=args.levels,
                        scale=args.scale, iterations=args.iterations)
    write_flo(estimate_flow(a, b, params), args.out)
    return 0


def cmd_flow_warp(args) -> int:
    image = load_image(args.image)
    warped, valid = warp_image(image, read_flo(args.flow))
    save_image(args.out, clamp01(warped))
    if args.mask:
        save_image(args.mask, valid[:, :, None].astype(np.float32))
    return 0


def cmd_histmatch(args) -> int:
    out = match_histogram(load_image(args.source), load_image(args.reference),
                          bins=args.bins)
    save_image(args.out, out)
    return 0


def cmd_style_movie(args) -> int:
    frames = [load_image(p) for p in discover_frames(args.frames)]
    styles = build_style_movie(load_image(args.style), frames, bins=args.bins)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t, image in enumerate(styles):
        save_image(out_dir / frame_name(t), image)
    return 0


def cmd_coherence(args) -> int:
    frames = [load_image(p) for p in discover_frames(args.frames)]
    flows = load_flow_dir(args.flows, len(frames))
    print(coherence_metric(frames, flows))
    return 0


def cmd_cuts(args) -> int:
    frames = [load_image(p) for p in discover_frames(args.frames)]
    for index in detect_scene_cuts(frames, args.threshold):
        print(index)
    return 0


_KIND_NAMES = {0: "conv", 1: "relu", 2: "pool", 3: "input-mean"}


def cmd_weights_info(args) -> int:
    if args.file:
        store = read_weights(args.file)
    else:
        _, weight_path = tiny_vgg_files()
        store = read_weights(weight_path)
    total = 0
    for rec in store.records:
        kind = _KIND_NAMES.get(rec.kind, str(rec.kind))
        if rec.kind == KIND_CONV:
            out_c, in_c, kh, kw = rec.shape
            count = rec.kernel.size + rec.bias.size
            total += count
            print(f"{rec.name}  {kind}  {in_c}->{out_c} {kh}x{kw}  "
                  f"{count} parameters")
        elif rec.kind == KIND_INPUT_MEAN:
            total += rec.means.size
            print(f"{rec.name}  {kind}  {rec.means.size} channels")
        else:
            print(f"{rec.name}  {kind}")
    print(f"total parameters: {total}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowstyle",
        description="Render images and image sequences in an artistic style.")
    parser.add_argument("--version", action="version",
                        version=f"flowstyle {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_network_flags(p):
        p.add_argument("--network-spec", help="layer spec text file "
                       "(default: built-in tiny network)")
        p.add_argument("--network-weights", help="weight file for "
                       "--network-spec")

    def add_weight_flags(p):
        p.add_argument("--weight-content", type=float, default=None)
        p.add_argument("--weight-style", type=float, default=None)
        p.add_argument("--weight-tv", type=float, default=None)
        p.add_argument("--weight-temporal", type=float, default=None)
        p.add_argument("--temporal-mode", choices=["squared", "charbonnier"],
                       default=None)
        p.add_argument("--auto-balance", action="store_true")

    p = sub.add_parser("render-image", help="stylize a single image")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--init", choices=["content", "noise"], default="content")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --init noise")
    p.add_argument("--step-size", type=float, default=0.02)
    add_weight_flags(p)
    add_network_flags(p)
    p.set_defaults(func=cmd_render_image)

    p = sub.add_parser("render-video", help="stylize a frame directory")
    p.add_argument("--config", help="JSON job file; flags override its keys")
    p.add_argument("--frames-dir", default=None)
    p.add_argument("--style", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--strategy", default=None,
                   choices=["independent", "previous-frame", "flow-init",
                            "flow-init-loss", "joint-backtrack"])
    p.add_argument("--passes", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--scene-cuts", default=None,
                   help="comma-separated frame indices")
    p.add_argument("--flow-mode", choices=["builtin", "external"],
                   default=None)
    p.add_argument("--flow-dir", default=None)
    p.add_argument("--hist-match", action="store_true", default=None)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)
    add_weight_flags(p)
    add_network_flags(p)
    p.set_defaults(func=cmd_render_video)

    p = sub.add_parser("flow-estimate", help="estimate optical flow a -> b")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=15.0)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--scale", type=float, default=0.5)
    p.add_argument("--iterations", type=int, default=200)
    p.set_defaults(func=cmd_flow_estimate)

    p = sub.add_parser("flow-warp", help="warp an image by a flow field")
    p.add_argument("--image", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", help="optional validity mask output image")
    p.set_defaults(func=cmd_flow_warp)

    p = sub.add_parser("histmatch", help="match color histograms")
    p.add_argument("--source", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.set_defaults(func=cmd_histmatch)

    p = sub.add_parser("style-movie",
                       help="per-frame style targets via histogram transfer")
    p.add_argument("--style", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.set_defaults(func=cmd_style_movie)

    p = sub.add_parser("coherence",
                       help="temporal coherence of a rendered sequence")
    p.add_argument("--frames", required=True)
    p.add_argument("--flows", required=True)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("cuts", help="detect scene cuts by frame difference")
    p.add_argument("--frames", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.set_defaults(func=cmd_cuts)

    p = sub.add_parser("weights-info", help="describe a weight file")
    p.add_argument("--file", help="weight file (default: built-in)")
    p.set_defaults(func=cmd_weights_info)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FlowStyleError as err:
        print(f"flowstyle: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"flowstyle: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"flowstyle: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
