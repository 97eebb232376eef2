"""Render a short clip and compare frame-to-frame coherence.

Rendering every frame from scratch treats the clip as unrelated images;
initializing each frame from its flow-warped predecessor ties them
together.  The coherence metric (mean squared difference between each
render and its warped predecessor) quantifies the difference, and a
guarded joint sweep then re-optimizes frames with both neighbors in the
loss, refusing any change that would make the sequence worse.
"""

from dataclasses import replace

import numpy as np

from flowstyle import (
    Strategy,
    coherence_metric,
    default_weights,
    joint_backtrack_pass,
    load_tiny_vgg,
    render_sequence,
    sequence_energy,
)


def stripes(size):
    yy, xx = np.mgrid[0:size, 0:size]
    return np.stack([
        0.5 + 0.5 * np.sin(2 * np.pi * xx / 12),
        0.5 + 0.5 * np.sin(2 * np.pi * yy / 8),
        0.5 + 0.5 * np.sin(2 * np.pi * (xx + yy) / 16),
    ], axis=2).astype(np.float32)


# 1. a 6-frame clip: a fixed texture sliding right one pixel per frame,
#    with the exact backward flows that motion implies
rng = np.random.default_rng(42)
canvas = rng.random((32, 38, 3)).astype(np.float32)
frames = [canvas[:, 5 - t:5 - t + 32].copy() for t in range(6)]
flow = np.zeros((32, 32, 2), np.float32)
flow[:, :, 0] = -1.0
flows_back = [flow.copy() for _ in range(5)]

net = load_tiny_vgg()
style = stripes(32)
weights = default_weights()

# 2. render the clip twice: frames independently, then warm-started
#    from the warped previous render
for kind in ("independent", "flow-init"):
    out = render_sequence(net, frames, style, weights, iterations=60,
                          strategy=Strategy(kind), flows_back=flows_back)
    print(f"{kind:12s} coherence {out.coherence:.3e}")
    for t in out.traces:
        print(f"  frame {t.index}  init {t.init_kind:15s} "
              f"energy {sum(t.energy_start.values()):.4f} "
              f"-> {sum(t.energy_end.values()):.4f}")

# 3. one guarded joint sweep over the flow-init renders with a temporal
#    term; accepted changes never raise sequence energy or coherence
weights = replace(weights, temporal=0.5)
base = render_sequence(net, frames, style, weights, iterations=60,
                       strategy=Strategy("flow-init"), flows_back=flows_back)
fwd = np.zeros((32, 32, 2), np.float32)
fwd[:, :, 0] = 1.0
flows_fwd = [fwd.copy() for _ in range(5)]
styles = [style] * len(frames)

before_e = sequence_energy(net, frames, base.frames, styles, weights, flows_back)
before_c = coherence_metric(base.frames, flows_back)
swept = joint_backtrack_pass(net, frames, base.frames, styles, weights,
                             iterations=60, flows_back=flows_back,
                             flows_fwd=flows_fwd, passes=1)
after_e = sequence_energy(net, frames, swept, styles, weights, flows_back)
after_c = coherence_metric(swept, flows_back)
print(f"joint sweep: sequence energy {before_e:.4f} -> {after_e:.4f}, "
      f"coherence {before_c:.3e} -> {after_c:.3e}")
