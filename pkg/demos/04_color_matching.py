"""Match color histograms and build a brightness-tracking style movie.

Histogram matching recolors an image so each channel's value
distribution follows a reference.  The style movie applies the idea per
frame: the style source is first pulled toward the whole clip, then
toward each frame, so its palette follows the scene as it brightens.
"""

from pathlib import Path

import numpy as np

from flowstyle import (
    build_style_movie,
    channel_cdf,
    luminance,
    match_histogram,
    save_image,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def stripes(size):
    yy, xx = np.mgrid[0:size, 0:size]
    return np.stack([
        0.5 + 0.5 * np.sin(2 * np.pi * xx / 12),
        0.5 + 0.5 * np.sin(2 * np.pi * yy / 8),
        0.5 + 0.5 * np.sin(2 * np.pi * (xx + yy) / 16),
    ], axis=2).astype(np.float32)


# 1. recolor a dark image to follow a bright reference
rng = np.random.default_rng(12)
source = (0.4 * rng.random((48, 48, 3))).astype(np.float32)
reference = (0.5 + 0.5 * rng.random((48, 48, 3))).astype(np.float32)
matched = match_histogram(source, reference)
save_image(OUT / "matched.png", matched)

print("per-channel distance to reference (mean |cdf gap|):")
for c, name in enumerate("rgb"):
    before = np.abs(channel_cdf(source[:, :, c])
                    - channel_cdf(reference[:, :, c])).mean()
    after = np.abs(channel_cdf(matched[:, :, c])
                   - channel_cdf(reference[:, :, c])).mean()
    print(f"  {name}: {before:.4f} -> {after:.4f}")

# 2. a clip that brightens over time gets a style movie whose frames
#    brighten the same way
base = rng.random((32, 32, 3)).astype(np.float32)
frames = [np.clip(base * (0.3 + 0.2 * t), 0.0, 1.0) for t in range(4)]
movie = build_style_movie(stripes(32), frames)
print("frame luminance vs style-movie luminance:")
for t, (frame, styled) in enumerate(zip(frames, movie)):
    save_image(OUT / f"style_{t:05d}.png", styled)
    print(f"  frame {t}: {luminance(frame).mean():.3f} "
          f"-> style {luminance(styled).mean():.3f}")
