"""Whole-sequence rendering: strategies, scene cuts, and joint sweeps.

Five strategies cover the tradeoff between per-frame quality and
temporal coherence:

* ``independent``: every frame starts from its own content frame;
* ``previous-frame``: frame t starts from the previous render;
* ``flow-init``: frame t starts from the previous render warped along
  the frames' motion, with out-of-bounds pixels falling back to the
  content frame;
* ``flow-init-loss``: flow-init plus a temporal penalty tying the
  iterate to the warped previous render;
* ``joint-backtrack``: a flow-init render followed by guarded sweeps
  that re-optimize each frame against both warped neighbors.

The array-level entry point is ``render_sequence``; ``render_video``
wraps it with frame/flow file discovery, output writing, and a
structured trace report.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .color import build_style_movie
from .energy import (
    EnergyWeights,
    TemporalRef,
    content_targets,
    style_targets,
    temporal_loss,
    total_energy,
)
from .errors import (
    EmptySequence,
    FlowUnavailable,
    MissingFrame,
    SizeMismatch,
)
from .flow import (
    FlowParams,
    coherence_metric,
    invert_for_warp,
    read_flo,
    warp_image,
)
from .image import clamp01, load_image, save_image
from .network import Network
from .optim import AdamParams, style_transfer

STRATEGY_KINDS = ("independent", "previous-frame", "flow-init",
                  "flow-init-loss", "joint-backtrack")

INIT_CONTENT = "content"
INIT_PREVIOUS = "previous"
INIT_WARPED = "warped-previous"


@dataclass(frozen=True)
class Strategy:
    """Rendering strategy; ``passes`` only applies to joint-backtrack."""

    kind: str = "flow-init"
    passes: int = 1

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(
                f"unknown strategy {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if self.kind == "joint-backtrack" and self.passes < 1:
            raise ValueError("joint-backtrack needs passes >= 1")

    @property
    def warps_init(self) -> bool:
        return self.kind in ("flow-init", "flow-init-loss", "joint-backtrack")

    @property
    def uses_temporal(self) -> bool:
        return self.kind in ("flow-init-loss", "joint-backtrack")


@dataclass
class FrameTrace:
    index: int
    init_kind: str
    energy_start: dict[str, float]
    energy_end: dict[str, float]
    coherence: float          # masked MSE against the warped previous render
    wall_time: float
    reason: str


@dataclass
class RenderResult:
    frames: list[np.ndarray]  # raw final iterates, not clamped
    traces: list[FrameTrace]
    coherence: float


def detect_scene_cuts(frames, threshold: float) -> list[int]:
    """Indices whose mean absolute difference to the previous frame exceeds
    the threshold; a cheap stand-in for manual cut marking."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    frames = list(frames)
    cuts = []
    for t in range(1, len(frames)):
        if float(np.abs(frames[t] - frames[t - 1]).mean()) > threshold:
            cuts.append(t)
    return cuts


def _pair_coherence(render_prev: np.ndarray, render_cur: np.ndarray,
                    flow_back: np.ndarray) -> float:
    """One adjacent pair's coherence term: masked MSE vs the warped
    predecessor, matching coherence_metric's per-pair value."""
    warped, valid = warp_image(render_prev, flow_back)
    if not valid.any():
        return 0.0
    value, _ = temporal_loss(render_cur.astype(np.float64),
                             TemporalRef(warped.astype(np.float64), valid),
                             mode="squared", want_gradient=False)
    return value


def _frame_energy(net: Network, render: np.ndarray, crefs, srefs,
                  weights: EnergyWeights) -> float:
    """Content + style + tv of one frame (no temporal terms)."""
    solo = replace(weights, temporal=0.0)
    return total_energy(net, render, solo, crefs, srefs,
                        want_gradient=False).total


def sequence_energy(net: Network, frames, renders, style_images, weights,
                    flows_back) -> float:
    """Total energy of a full sequence, each pairwise term counted once.

    Per-frame content/style/tv terms plus the temporal weight times the
    coherence term of every adjacent pair (current render vs warped
    previous render).
    """
    total = 0.0
    for t, render in enumerate(renders):
        crefs = content_targets(net, frames[t], weights.content) \
            if weights.content else {}
        srefs = style_targets(net, style_images[t], weights.style) \
            if weights.style else {}
        total += _frame_energy(net, render, crefs, srefs, weights)
        if t >= 1 and weights.temporal > 0:
            total += weights.temporal * _pair_coherence(
                renders[t - 1], render, flows_back[t - 1])
    return total


def _default_flows(frames, flow_params: FlowParams, jobs: int = 1):
    """Backward flow per adjacent pair, estimated from the content frames."""
    pairs = list(range(1, len(frames)))
    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(
                lambda t: invert_for_warp(frames[t - 1], frames[t], flow_params),
                pairs))
    return [invert_for_warp(frames[t - 1], frames[t], flow_params)
            for t in pairs]


def _check_uniform(frames, style):
    shape = frames[0].shape
    for t, f in enumerate(frames):
        if f.shape != shape:
            raise SizeMismatch(
                f"frame {t} is {f.shape[:2]}, frame 0 is {shape[:2]}")
    if style.shape[2] != shape[2]:
        raise SizeMismatch(
            f"style has {style.shape[2]} channels, frames have {shape[2]}")


def render_sequence(net: Network, frames, style: np.ndarray,
                    weights: EnergyWeights, iterations: int = 1000,
                    strategy: Strategy = Strategy(),
                    scene_cuts=(),
                    flows_back=None,
                    hist_match: bool = False,
                    adam: AdamParams = AdamParams(),
                    flow_params: FlowParams = FlowParams(),
                    auto_balance: bool = False,
                    jobs: int = 1,
                    on_frame=None) -> RenderResult:
    """Render every frame of a sequence in the style of ``style``.

    ``flows_back`` may carry precomputed backward flow fields (one per
    adjacent pair, field t maps frame t+1's grid into frame t); when
    None they are estimated from the content frames.  Frame 0 and every
    scene-cut index always initialize from the content frame.
    ``on_frame(t, render, trace)`` fires as each frame completes.
    """
    frames = [np.asarray(f, dtype=np.float32) for f in frames]
    if not frames:
        raise EmptySequence("no frames to render")
    style = np.asarray(style, dtype=np.float32)
    _check_uniform(frames, style)
    cuts = sorted(set(scene_cuts))
    if cuts and (cuts[0] < 0 or cuts[-1] >= len(frames)):
        raise ValueError(f"scene cut outside frame range: {cuts}")

    if strategy.uses_temporal and weights.temporal == 0.0:
        weights = replace(weights, temporal=1.0)

    if flows_back is None:
        flows_back = _default_flows(frames, flow_params, jobs)
    else:
        flows_back = list(flows_back)
        if len(flows_back) != max(len(frames) - 1, 0):
            raise SizeMismatch(
                f"{len(frames)} frames need {len(frames) - 1} backward flows, "
                f"got {len(flows_back)}")

    style_images = build_style_movie(style, frames) if hist_match \
        else [style] * len(frames)

    renders: list[np.ndarray] = []
    traces: list[FrameTrace] = []

    def render_one(t: int, init: np.ndarray, kind: str,
                   temporal_refs=()) -> tuple[np.ndarray, FrameTrace]:
        started = time.perf_counter()
        result = style_transfer(net, init, frames[t], style_images[t],
                                weights, iterations, adam,
                                temporal_refs=temporal_refs,
                                auto_balance=auto_balance)
        pair = _pair_coherence(renders[t - 1], result.image,
                               flows_back[t - 1]) if 1 <= t <= len(renders) \
            else 0.0
        trace = FrameTrace(
            index=t, init_kind=kind,
            energy_start=dict(result.initial.components),
            energy_end=dict(result.final.components),
            coherence=pair,
            wall_time=time.perf_counter() - started,
            reason=result.reason,
        )
        return result.image, trace

    if strategy.kind == "independent" and jobs > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(
                lambda t: render_one(t, frames[t], INIT_CONTENT),
                range(len(frames))))
        for t, (render, trace) in enumerate(outs):
            # pair coherence needs the neighbor render, fill it in after
            renders.append(render)
            traces.append(trace)
        for t in range(1, len(frames)):
            traces[t].coherence = _pair_coherence(renders[t - 1], renders[t],
                                                  flows_back[t - 1])
    else:
        for t in range(len(frames)):
            if t == 0 or t in cuts or strategy.kind == "independent":
                init, kind = frames[t], INIT_CONTENT
                refs = ()
            elif strategy.kind == "previous-frame":
                init, kind = renders[t - 1], INIT_PREVIOUS
                refs = ()
            else:
                warped, valid = warp_image(renders[t - 1], flows_back[t - 1])
                init = np.where(valid[:, :, None], warped, frames[t])
                kind = INIT_WARPED
                refs = (TemporalRef(warped, valid),) \
                    if strategy.uses_temporal and valid.any() else ()
            render, trace = render_one(t, init, kind, refs)
            renders.append(render)
            traces.append(trace)
            if on_frame is not None:
                on_frame(t, render, trace)

    if strategy.kind == "joint-backtrack" and len(frames) > 1:
        flows_fwd = [invert_for_warp(frames[t + 1], frames[t], flow_params)
                     for t in range(len(frames) - 1)]
        renders = joint_backtrack_pass(
            net, frames, renders, style_images, weights, iterations,
            flows_back, flows_fwd, passes=strategy.passes, adam=adam)
        for t in range(1, len(renders)):
            traces[t].coherence = _pair_coherence(renders[t - 1], renders[t],
                                                  flows_back[t - 1])

    coherence = coherence_metric(renders, flows_back)
    return RenderResult(renders, traces, coherence)


def joint_backtrack_pass(net: Network, frames, renders, style_images,
                         weights: EnergyWeights, iterations: int,
                         flows_back, flows_fwd, passes: int = 1,
                         adam: AdamParams = AdamParams()) -> list[np.ndarray]:
    """Guarded re-optimization sweeps over all frames with both neighbors.

    Each sweep walks the frames in order; frame t is re-optimized with
    temporal references to both warped neighbor renders, then the
    candidate is accepted only if it lowers neither the affected part of
    the sequence energy nor (when the temporal weight is positive) the
    affected pairwise temporal terms.  The guard makes sequence energy
    and the coherence metric non-increasing across sweeps by
    construction.  Running p sweeps then q more equals running p+q:
    each sweep is a pure function of the current renders.  With a zero
    temporal weight the sweep degrades to guarded per-frame
    re-optimization from the current iterates.
    """
    if passes < 0:
        raise ValueError("passes must be >= 0")
    frames = [np.asarray(f, dtype=np.float32) for f in frames]
    renders = [np.asarray(r, dtype=np.float32) for r in renders]
    last = len(frames) - 1

    crefs_all = [content_targets(net, f, weights.content) if weights.content
                 else {} for f in frames]
    srefs_all = [style_targets(net, s, weights.style) if weights.style
                 else {} for s in style_images]

    def affected_terms(t: int, candidate: np.ndarray):
        """(energy, temporal) of the sequence terms frame t participates in."""
        energy = _frame_energy(net, candidate, crefs_all[t], srefs_all[t],
                               weights)
        temporal = 0.0
        if weights.temporal > 0:
            if t >= 1:
                temporal += _pair_coherence(renders[t - 1], candidate,
                                            flows_back[t - 1])
            if t < last:
                temporal += _pair_coherence(candidate, renders[t + 1],
                                            flows_back[t])
        return energy + weights.temporal * temporal, temporal

    for _ in range(passes):
        for t in range(len(frames)):
            refs = []
            if weights.temporal > 0:
                if t >= 1:
                    warped, valid = warp_image(renders[t - 1],
                                               flows_back[t - 1])
                    if valid.any():
                        refs.append(TemporalRef(warped, valid))
                if t < last:
                    warped, valid = warp_image(renders[t + 1], flows_fwd[t])
                    if valid.any():
                        refs.append(TemporalRef(warped, valid))
            result = style_transfer(net, renders[t], frames[t],
                                    style_images[t], weights, iterations,
                                    adam, temporal_refs=tuple(refs))
            old_energy, old_temporal = affected_terms(t, renders[t])
            new_energy, new_temporal = affected_terms(t, result.image)
            if new_energy <= old_energy and new_temporal <= old_temporal:
                renders[t] = result.image
    return renders


# --- file-level job handling ---

FRAME_DIGITS = 5


def frame_name(index: int, ext: str = "png") -> str:
    return f"frame_{index:0{FRAME_DIGITS}d}.{ext}"


def discover_frames(frames_dir) -> list[Path]:
    """Ordered frame paths named frame_00000.png/.ppm with no index gaps."""
    frames_dir = Path(frames_dir)
    found: dict[int, Path] = {}
    for path in frames_dir.iterdir() if frames_dir.is_dir() else []:
        stem, ext = path.stem, path.suffix.lower()
        if ext not in (".png", ".ppm") or not stem.startswith("frame_"):
            continue
        digits = stem[len("frame_"):]
        if digits.isdigit():
            found[int(digits)] = path
    if not found:
        raise MissingFrame(f"no frame_*.png or frame_*.ppm files in {frames_dir}")
    count = max(found) + 1
    missing = [i for i in range(count) if i not in found]
    if missing:
        raise MissingFrame(f"frame index {missing[0]} absent in {frames_dir}")
    return [found[i] for i in range(count)]


def load_flow_dir(flow_dir, count: int) -> list[np.ndarray]:
    """Backward flow files flow_00001.flo .. flow_{count-1}.flo (pair t, t-1)."""
    flow_dir = Path(flow_dir)
    flows = []
    for t in range(1, count):
        path = flow_dir / f"flow_{t:0{FRAME_DIGITS}d}.flo"
        if not path.exists():
            raise FlowUnavailable(f"{path} is missing")
        flows.append(read_flo(path))
    return flows


@dataclass
class RenderJob:
    """Everything render_video needs, mirroring the config-file keys."""

    frames_dir: Path
    style: Path
    out_dir: Path | None
    network: Network
    weights: EnergyWeights
    iterations: int = 1000
    strategy: Strategy = Strategy()
    scene_cuts: tuple[int, ...] = ()
    flow_mode: str = "builtin"        # "builtin" | "external"
    flow_dir: Path | None = None
    hist_match: bool = False
    fps: float = 10.0
    adam: AdamParams = AdamParams()
    flow_params: FlowParams = FlowParams()
    auto_balance: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.flow_mode not in ("builtin", "external"):
            raise ValueError(f"unknown flow mode {self.flow_mode!r}")
        if self.flow_mode == "external" and self.flow_dir is None:
            raise ValueError("external flow mode needs flow_dir")
        if list(self.scene_cuts) != sorted(set(self.scene_cuts)):
            raise ValueError("scene cuts must be strictly increasing")


def _trace_record(trace: FrameTrace) -> dict:
    return {
        "index": trace.index,
        "init": trace.init_kind,
        "energy_start": trace.energy_start,
        "energy_end": trace.energy_end,
        "coherence": trace.coherence,
        "wall_time": round(trace.wall_time, 4),
        "reason": trace.reason,
    }


def render_video(job: RenderJob) -> RenderResult:
    """Run a full rendering job from files to files.

    Output frames are clamped and written as they complete, so an
    aborted job leaves every finished frame and a trace stub on disk;
    ``trace.json`` in the output directory records per-frame details,
    the strategy, fps metadata, and the final coherence value.
    """
    frame_paths = discover_frames(job.frames_dir)
    frames = [load_image(p) for p in frame_paths]
    style = load_image(job.style)
    flows = load_flow_dir(job.flow_dir, len(frames)) \
        if job.flow_mode == "external" else None

    out_dir = Path(job.out_dir) if job.out_dir is not None else None
    completed: list[dict] = []

    def write_trace(result_coherence=None):
        if out_dir is None:
            return
        out_dir.mkdir(parents=True, exist_ok=True)
        report = {
            "strategy": job.strategy.kind,
            "passes": job.strategy.passes,
            "iterations": job.iterations,
            "fps": job.fps,
            "scene_cuts": list(job.scene_cuts),
            "frames": completed,
        }
        if result_coherence is not None:
            report["coherence"] = result_coherence
        (out_dir / "trace.json").write_text(json.dumps(report, indent=2))

    def on_frame(t, render, trace):
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            save_image(out_dir / frame_name(t), clamp01(render))
        completed.append(_trace_record(trace))

    try:
        result = render_sequence(
            net=job.network, frames=frames, style=style, weights=job.weights,
            iterations=job.iterations, strategy=job.strategy,
            scene_cuts=job.scene_cuts, flows_back=flows,
            hist_match=job.hist_match, adam=job.adam,
            flow_params=job.flow_params, auto_balance=job.auto_balance,
            jobs=job.jobs, on_frame=on_frame)
    except Exception:
        write_trace()
        raise

    # strategies that bypass the per-frame callback (parallel independent,
    # joint sweeps rewriting earlier frames) rewrite the full set here
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        completed.clear()
        for t, render in enumerate(result.frames):
            save_image(out_dir / frame_name(t), clamp01(render))
            completed.append(_trace_record(result.traces[t]))
        write_trace(result.coherence)
    return result
