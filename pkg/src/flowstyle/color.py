"""Color transfer by per-channel histogram matching.

Values are histogrammed into fixed bins over [0,1] (values clamped
first).  Matching maps each source value through the source CDF and
then through the inverse reference CDF; inverse lookups resolve ties to
the lowest bin reaching the cumulative mass, and outputs land on bin
centers.  Everything here treats RGB channels independently.

``build_style_movie`` implements the two-stage construction that keeps
a style's palette tracking scene brightness: first the whole frame
sequence is matched (through one pooled mapping) to the style image,
then the style image is matched back to each transformed frame,
yielding one style image per frame.
"""

from __future__ import annotations

import numpy as np

from .errors import ChannelMismatch, EmptySequence

DEFAULT_BINS = 256


def _as_channels(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    return image


def _bin_indices(values: np.ndarray, bins: int) -> np.ndarray:
    clamped = np.clip(values, 0.0, 1.0)
    return np.minimum((clamped * bins).astype(np.int64), bins - 1)


def channel_cdf(values: np.ndarray, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Cumulative distribution of one channel's values over [0,1] bins."""
    counts = np.bincount(_bin_indices(values.ravel(), bins), minlength=bins)
    return np.cumsum(counts) / values.size


def _lut(cdf_src: np.ndarray, cdf_ref: np.ndarray, bins: int) -> np.ndarray:
    """Per-source-bin output values realizing the CDF match."""
    j = np.searchsorted(cdf_ref, cdf_src, side="left")
    j = np.clip(j, 0, bins - 1)
    return ((j + 0.5) / bins).astype(np.float32)


def match_histogram(source: np.ndarray, reference: np.ndarray,
                    bins: int = DEFAULT_BINS) -> np.ndarray:
    """Recolor ``source`` so each channel's histogram matches ``reference``.

    The mapping is monotone per channel, so the ordering of distinct
    source values is preserved.  Output values sit on bin centers.
    """
    source = _as_channels(source)
    reference = _as_channels(reference)
    if source.shape[2] != reference.shape[2]:
        raise ChannelMismatch(
            f"source has {source.shape[2]} channels, reference {reference.shape[2]}")
    out = np.empty(source.shape, dtype=np.float32)
    for c in range(source.shape[2]):
        cdf_src = channel_cdf(source[:, :, c], bins)
        cdf_ref = channel_cdf(reference[:, :, c], bins)
        lut = _lut(cdf_src, cdf_ref, bins)
        out[:, :, c] = lut[_bin_indices(source[:, :, c], bins)]
    return out


def build_style_movie(style: np.ndarray, frames,
                      bins: int = DEFAULT_BINS) -> list[np.ndarray]:
    """Per-frame style images whose palettes follow the frames' brightness.

    Stage 1 matches the pooled histogram of all frames to the style
    image (one global mapping, identical to matching the concatenated
    sequence as a single image).  Stage 2 matches the style image to
    each transformed frame.  Returns one style image per input frame.
    """
    style = _as_channels(style)
    frames = [_as_channels(f) for f in frames]
    if not frames:
        raise EmptySequence("style movie needs at least one frame")
    channels = style.shape[2]
    for i, f in enumerate(frames):
        if f.shape[2] != channels:
            raise ChannelMismatch(
                f"frame {i} has {f.shape[2]} channels, style has {channels}")

    total = sum(f.shape[0] * f.shape[1] for f in frames)
    luts = []
    for c in range(channels):
        counts = np.zeros(bins, dtype=np.int64)
        for f in frames:
            counts += np.bincount(_bin_indices(f[:, :, c].ravel(), bins),
                                  minlength=bins)
        pooled_cdf = np.cumsum(counts) / total
        luts.append(_lut(pooled_cdf, channel_cdf(style[:, :, c], bins), bins))

    styles = []
    for f in frames:
        transformed = np.empty(f.shape, dtype=np.float32)
        for c in range(channels):
            transformed[:, :, c] = luts[c][_bin_indices(f[:, :, c], bins)]
        styles.append(match_histogram(style, transformed, bins))
    return styles
