"""Dense optical flow: estimation, backward warping, and .flo files.

Flow fields are (H, W, 2) float32 arrays; ``flow[y, x] = (u, v)`` means
the scene point seen at column x, row y in the first image appears at
(x + u, y + v) in the second.  The estimator is Horn-Schunck smoothness
regularization solved coarse-to-fine with incremental warping, which is
enough for the small inter-frame motions this package deals in; larger
or sharper motion should come from an external estimator via .flo files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    LengthMismatch,
    ShapeMismatch,
    SizeMismatch,
    TrailingData,
    TruncatedFile,
)
from .image import luminance

FLO_MAGIC = 202021.25  # spells "PIEH" when read as ascii bytes


@dataclass(frozen=True)
class FlowParams:
    """Estimator knobs: smoothness weight and pyramid schedule."""

    alpha: float = 15.0
    levels: int = 3
    scale: float = 0.5
    iterations: int = 200


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resample a (H, W[, C]) array with half-pixel-center alignment."""
    src_h, src_w = image.shape[:2]
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (src_h / height) - 0.5
    xs = (np.arange(width, dtype=np.float64) + 0.5) * (src_w / width) - 0.5
    ys = np.clip(ys, 0, src_h - 1)
    xs = np.clip(xs, 0, src_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    fy = (ys - y0).astype(image.dtype)[:, None]
    fx = (xs - x0).astype(image.dtype)[None, :]
    if image.ndim == 3:
        fy = fy[:, :, None]
        fx = fx[:, :, None]
    top = image[y0][:, x0] * (1 - fx) + image[y0][:, x1] * fx
    bottom = image[y1][:, x0] * (1 - fx) + image[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def _sample_bilinear(image: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample (H, W[, C]) at float coordinates, clamping to the border."""
    h, w = image.shape[:2]
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0).astype(image.dtype)
    fy = (sy - y0).astype(image.dtype)
    if image.ndim == 3:
        fx = fx[:, :, None]
        fy = fy[:, :, None]
    a = image[y0, x0]
    b = image[y0, x1]
    c = image[y1, x0]
    d = image[y1, x1]
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


def warp_image(image: np.ndarray, flow_back: np.ndarray):
    """Pull pixels through a backward flow: out(p) = image(p + flow_back(p)).

    Returns (warped, valid) where valid[y, x] is False wherever the
    source location left the image bounds; those pixels hold the clamped
    border sample and should be masked out by the caller.
    """
    image = np.asarray(image)
    flow_back = np.asarray(flow_back)
    if flow_back.shape[:2] != image.shape[:2] or flow_back.shape[2:] != (2,):
        raise SizeMismatch(
            f"flow {flow_back.shape} does not cover image plane {image.shape[:2]}")
    h, w = image.shape[:2]
    gy, gx = np.mgrid[0:h, 0:w]
    sx = gx + flow_back[:, :, 0].astype(np.float64)
    sy = gy + flow_back[:, :, 1].astype(np.float64)
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    warped = _sample_bilinear(image, sx, sy).astype(image.dtype, copy=False)
    return warped, valid


def _neighbor_avg(field: np.ndarray) -> np.ndarray:
    p = np.pad(field, 1, mode="edge")
    return 0.25 * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])


def _hs_level(a: np.ndarray, b: np.ndarray, u: np.ndarray, v: np.ndarray,
              alpha: float, iterations: int):
    """Refine total flow (u, v) on one pyramid level by incremental warping."""
    h, w = a.shape
    flow = np.stack([u, v], axis=-1)
    b_w, _ = warp_image(b, flow)
    fx = 0.5 * (np.gradient(a, axis=1) + np.gradient(b_w, axis=1))
    fy = 0.5 * (np.gradient(a, axis=0) + np.gradient(b_w, axis=0))
    ft = b_w - a
    # constant of the linearization around the current flow
    c = ft - fx * u - fy * v
    denom = alpha ** 2 + fx * fx + fy * fy
    for _ in range(iterations):
        u_avg = _neighbor_avg(u)
        v_avg = _neighbor_avg(v)
        common = (fx * u_avg + fy * v_avg + c) / denom
        u = u_avg - fx * common
        v = v_avg - fy * common
    return u, v


def estimate_flow(a: np.ndarray, b: np.ndarray,
                  params: FlowParams = FlowParams()) -> np.ndarray:
    """Forward flow from image ``a`` to image ``b`` (both (H, W, C))."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise SizeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    # the default alpha assumes the classical 0..255 intensity scale, so
    # unit-range luminance is lifted to keep the data term competitive
    ga = luminance(a).astype(np.float64) * 255.0
    gb = luminance(b).astype(np.float64) * 255.0
    h, w = ga.shape

    sizes = [(h, w)]
    for _ in range(1, params.levels):
        ph, pw = sizes[-1]
        nh, nw = max(int(round(ph * params.scale)), 4), max(int(round(pw * params.scale)), 4)
        if (nh, nw) == (ph, pw):
            break
        sizes.append((nh, nw))

    u = np.zeros(sizes[-1], dtype=np.float64)
    v = np.zeros(sizes[-1], dtype=np.float64)
    for lh, lw in reversed(sizes):
        if u.shape != (lh, lw):
            su = lw / u.shape[1]
            sv = lh / u.shape[0]
            u = resize_bilinear(u, lh, lw) * su
            v = resize_bilinear(v, lh, lw) * sv
        la = ga if (lh, lw) == (h, w) else resize_bilinear(ga, lh, lw)
        lb = gb if (lh, lw) == (h, w) else resize_bilinear(gb, lh, lw)
        u, v = _hs_level(la, lb, u, v, params.alpha, params.iterations)
    return np.stack([u, v], axis=-1).astype(np.float32)


def invert_for_warp(prev_frame: np.ndarray, next_frame: np.ndarray,
                    params: FlowParams = FlowParams()) -> np.ndarray:
    """Backward flow for warping ``prev_frame`` onto ``next_frame``'s grid.

    This is simply the forward flow of the reversed pair: for each pixel
    of the next frame it points at where that content sat previously.
    """
    return estimate_flow(next_frame, prev_frame, params)


def coherence_metric(frames, flows_back) -> float:
    """How much rendered frames disagree with their flow-warped predecessors.

    For each adjacent pair, the predecessor is warped onto the current
    frame's grid with the pair's backward flow and compared by mean
    squared difference over valid pixels and channels; the metric is the
    mean over pairs.  Zero means perfect agreement; lower is more
    temporally coherent.  A pair whose warp is entirely out of bounds
    contributes zero.
    """
    frames = list(frames)
    flows_back = list(flows_back)
    if len(flows_back) != len(frames) - 1:
        raise LengthMismatch(
            f"{len(frames)} frames need {len(frames) - 1} flows, "
            f"got {len(flows_back)}")
    if not flows_back:
        return 0.0
    pair_values = []
    for t in range(1, len(frames)):
        warped, valid = warp_image(frames[t - 1], flows_back[t - 1])
        count = int(valid.sum())
        if count == 0:
            pair_values.append(0.0)
            continue
        d = (np.asarray(frames[t], dtype=np.float64) - warped) * valid[:, :, None]
        channels = frames[t].shape[2] if frames[t].ndim == 3 else 1
        pair_values.append(float((d * d).sum() / (count * channels)))
    return float(np.mean(pair_values))


# --- .flo container ---


def _read_exact(data: bytes, pos: int, n: int, what: str):
    if pos + n > len(data):
        raise TruncatedFile(f"file ends inside {what}")
    return data[pos:pos + n], pos + n


def read_flo(source) -> np.ndarray:
    """Read a .flo flow field; returns (H, W, 2) float32."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = Path(source).read_bytes()
    raw, pos = _read_exact(data, 0, 4, "magic")
    magic = struct.unpack("<f", raw)[0]
    if magic != FLO_MAGIC:
        raise BadMagic(f"magic {magic!r} is not a flow file tag")
    raw, pos = _read_exact(data, pos, 8, "dimensions")
    width, height = struct.unpack("<ii", raw)
    if width < 1 or height < 1:
        raise TruncatedFile(f"nonsense dimensions {width}x{height}")
    raw, pos = _read_exact(data, pos, 4 * 2 * width * height, "flow values")
    if pos != len(data):
        raise TrailingData(f"{len(data) - pos} bytes past the flow values")
    flow = np.frombuffer(raw, dtype="<f4").reshape(height, width, 2)
    return flow.copy()


def write_flo(flow: np.ndarray, sink=None) -> bytes | None:
    """Write a (H, W, 2) float32 flow field; returns bytes when sink is None."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ShapeMismatch(f"flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    data = struct.pack("<fii", FLO_MAGIC, w, h) + \
        np.ascontiguousarray(flow, dtype="<f4").tobytes()
    if sink is None:
        return data
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        Path(sink).write_bytes(data)
    return None
