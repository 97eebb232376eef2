"""Regenerate the tiny-vgg verify fixture from flowstyle's forward pass.

Writes fixtures/tiny-vgg: a deterministic probe image plus the activation
of every layer, all little-endian float32 with channels innermost. Run
from the weight-import directory:

    python3 tools/make_fixture.py
"""

import json
from pathlib import Path

import numpy as np

import flowstyle


def probe_image(height=16, width=16, channels=3):
    y = np.arange(height, dtype=np.float64)[:, None, None]
    x = np.arange(width, dtype=np.float64)[None, :, None]
    c = np.arange(channels, dtype=np.float64)[None, None, :]
    return (0.5 + 0.5 * np.sin(0.37 * x + 0.61 * y + 1.7 * c)).astype(np.float32)


def main():
    out_dir = Path(__file__).resolve().parent.parent / "fixtures" / "tiny-vgg"
    out_dir.mkdir(parents=True, exist_ok=True)

    image = probe_image()
    (out_dir / "image.json").write_text(json.dumps({
        "height": image.shape[0],
        "width": image.shape[1],
        "channels": image.shape[2],
    }, indent=2) + "\n")
    (out_dir / "image.f32").write_bytes(image.astype("<f4").tobytes())

    net = flowstyle.load_tiny_vgg()
    names = [layer.name for layer in net.layers]
    shapes = flowstyle.layer_shapes(net, image.shape[0], image.shape[1])
    acts = flowstyle.forward(net, image, names)

    index = []
    blob = bytearray()
    for name in names:
        h, w, ch = shapes[name]
        index.append({
            "name": name,
            "height": h,
            "width": w,
            "channels": ch,
            "offset": len(blob) // 4,
        })
        blob.extend(acts[name].astype("<f4").tobytes())
    (out_dir / "activations.json").write_text(
        json.dumps({"layers": index}, indent=2) + "\n")
    (out_dir / "activations.f32").write_bytes(bytes(blob))
    print(f"wrote {out_dir} ({len(index)} layers, {len(blob) // 4} floats)")


if __name__ == "__main__":
    main()
