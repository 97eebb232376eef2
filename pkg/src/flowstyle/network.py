"""Convolutional feature extractor with exact forward and reverse-mode gradients.

A network is a linear chain of conv / relu / pool layers plus per-channel
input mean offsets.  Convolutions are stride 1 with zero "same" padding;
pooling is 2x2 stride-2 average pooling.  Feature maps for a layer with
output height x width = I pixels and C channels are exposed as (I, C)
arrays, row-major over pixels.

Weights travel in a little-endian binary container (magic ``NSWT``); the
text network spec lists one layer per line: ``name kind [args]``, where
conv args are ``<in> <out> <kh> <kw>``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ImageTooSmall,
    ShapeMismatch,
    TrailingData,
    TruncatedFile,
    UnknownLayer,
    VersionUnsupported,
)

MAGIC = b"NSWT"
VERSION = 1

KIND_CONV = 0
KIND_RELU = 1
KIND_POOL = 2
KIND_INPUT_MEAN = 3

_KIND_NAMES = {KIND_CONV: "conv", KIND_RELU: "relu", KIND_POOL: "pool",
               KIND_INPUT_MEAN: "input-mean"}

_DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the chain. Conv fields are None for relu/pool."""

    name: str
    kind: str  # "conv" | "relu" | "pool"
    in_channels: int | None = None
    out_channels: int | None = None
    kernel_h: int | None = None
    kernel_w: int | None = None


@dataclass(frozen=True)
class Network:
    """Immutable layer chain with conv weights and input mean offsets."""

    layers: tuple[LayerSpec, ...]
    kernels: dict[str, np.ndarray]  # (out, in, kh, kw) float32
    biases: dict[str, np.ndarray]   # (out,) float32
    input_mean: np.ndarray          # (channels,) float32
    names: frozenset[str] = field(init=False)

    def __post_init__(self):
        for arr in (*self.kernels.values(), *self.biases.values(), self.input_mean):
            arr.flags.writeable = False
        object.__setattr__(self, "names", frozenset(l.name for l in self.layers))

    @property
    def in_channels(self) -> int:
        return int(self.input_mean.shape[0])

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise UnknownLayer(name)


# --- network spec text ---


def parse_spec(text: str) -> list[LayerSpec]:
    """Parse the plain-text layer listing into a validated chain."""
    layers: list[LayerSpec] = []
    seen: set[str] = set()
    channels: int | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        name, kind = parts[0], parts[1] if len(parts) > 1 else ""
        if name in seen:
            raise ValueError(f"line {lineno}: duplicate layer name {name!r}")
        seen.add(name)
        if kind == "conv":
            if len(parts) != 6:
                raise ValueError(f"line {lineno}: conv needs <in> <out> <kh> <kw>")
            cin, cout, kh, kw = (int(p) for p in parts[2:6])
            if min(cin, cout, kh, kw) < 1:
                raise ValueError(f"line {lineno}: conv dims must be positive")
            if channels is not None and cin != channels:
                raise ShapeMismatch(
                    f"layer {name}: declared in-channels {cin} but chain carries {channels}")
            channels = cout
            layers.append(LayerSpec(name, "conv", cin, cout, kh, kw))
        elif kind in ("relu", "pool"):
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: {kind} takes no args")
            layers.append(LayerSpec(name, kind))
        else:
            raise ValueError(f"line {lineno}: unknown layer kind {kind!r}")
    if not layers:
        raise ValueError("network spec declares no layers")
    return layers


# --- weight container ---


@dataclass
class WeightRecord:
    name: str
    kind: int
    shape: tuple[int, int, int, int] | None = None  # conv: (out, in, kh, kw)
    kernel: np.ndarray | None = None
    bias: np.ndarray | None = None
    means: np.ndarray | None = None


@dataclass
class WeightStore:
    """Ordered weight-file records, preserved bit-exactly for round trips."""

    records: list[WeightRecord]

    def find(self, name: str) -> WeightRecord | None:
        for r in self.records:
            if r.name == name:
                return r
        return None


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"file ends inside {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, count: int, what: str) -> np.ndarray:
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").copy()


def _as_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_bytes()


def read_weights(source) -> WeightStore:
    """Parse an ``NSWT`` weight container from a path, bytes, or file object."""
    r = _Reader(_as_bytes(source))
    if r.take(4, "magic") != MAGIC:
        raise BadMagic("not an NSWT weight file")
    version = r.u32("version")
    if version != VERSION:
        raise VersionUnsupported(f"version {version} (supported: {VERSION})")
    count = r.u32("record count")
    records: list[WeightRecord] = []
    for i in range(count):
        ctx = f"record {i}"
        nlen = r.u16(f"{ctx} name length")
        name = r.take(nlen, f"{ctx} name").decode("utf-8")
        kind = r.u8(f"{name} kind")
        if kind == KIND_CONV:
            out_c = r.u32(f"{name} out-channels")
            in_c = r.u32(f"{name} in-channels")
            kh = r.u32(f"{name} kernel height")
            kw = r.u32(f"{name} kernel width")
            kernel = r.f32(out_c * in_c * kh * kw, f"{name} kernel data")
            bias = r.f32(out_c, f"{name} bias data")
            records.append(WeightRecord(
                name, kind, (out_c, in_c, kh, kw),
                kernel.reshape(out_c, in_c, kh, kw), bias))
        elif kind == KIND_INPUT_MEAN:
            nch = r.u32(f"{name} channel count")
            means = r.f32(nch, f"{name} means")
            records.append(WeightRecord(name, kind, means=means))
        elif kind in (KIND_RELU, KIND_POOL):
            records.append(WeightRecord(name, kind))
        else:
            raise VersionUnsupported(f"record {name!r} has unknown kind tag {kind}")
    if r.pos != len(r.data):
        raise TrailingData(
            f"{len(r.data) - r.pos} bytes past the declared {count} records")
    return WeightStore(records)


def write_weights(store: WeightStore, sink=None) -> bytes | None:
    """Serialize a WeightStore; returns bytes when ``sink`` is None."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(store.records)))
    for rec in store.records:
        raw_name = rec.name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<B", rec.kind))
        if rec.kind == KIND_CONV:
            buf.write(struct.pack("<IIII", *rec.shape))
            buf.write(np.ascontiguousarray(rec.kernel, dtype="<f4").tobytes())
            buf.write(np.ascontiguousarray(rec.bias, dtype="<f4").tobytes())
        elif rec.kind == KIND_INPUT_MEAN:
            buf.write(struct.pack("<I", rec.means.shape[0]))
            buf.write(np.ascontiguousarray(rec.means, dtype="<f4").tobytes())
    data = buf.getvalue()
    if sink is None:
        return data
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        Path(sink).write_bytes(data)
    return None


def load_network(spec_source, weight_source) -> Network:
    """Build an immutable Network from a spec text/path and a weight file.

    Every conv layer must have a weight record whose shape matches the
    declaration exactly; offending layers are named in the error.
    """
    if isinstance(spec_source, Path) or (
            isinstance(spec_source, str) and "\n" not in spec_source):
        text = Path(spec_source).read_text()
    else:
        text = spec_source
    layers = parse_spec(text)
    store = read_weights(weight_source)

    kernels: dict[str, np.ndarray] = {}
    biases: dict[str, np.ndarray] = {}
    input_mean = None
    for rec in store.records:
        if rec.kind == KIND_INPUT_MEAN:
            input_mean = rec.means.astype(np.float32)
    for spec in layers:
        if spec.kind != "conv":
            continue
        rec = store.find(spec.name)
        if rec is None:
            raise ShapeMismatch(f"layer {spec.name}: no weight record in file")
        if rec.kind != KIND_CONV:
            raise ShapeMismatch(
                f"layer {spec.name}: weight record kind is "
                f"{_KIND_NAMES.get(rec.kind, rec.kind)}, expected conv")
        want = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
        if rec.shape != want:
            raise ShapeMismatch(
                f"layer {spec.name}: spec declares (out,in,kh,kw)={want} "
                f"but weight file carries {rec.shape}")
        kernels[spec.name] = rec.kernel.astype(np.float32)
        biases[spec.name] = rec.bias.astype(np.float32)

    first_conv = next(l for l in layers if l.kind == "conv")
    if input_mean is None:
        input_mean = np.zeros(first_conv.in_channels, dtype=np.float32)
    elif input_mean.shape[0] != first_conv.in_channels:
        raise ShapeMismatch(
            f"layer {first_conv.name}: input mean has {input_mean.shape[0]} "
            f"channels, network input has {first_conv.in_channels}")
    return Network(tuple(layers), kernels, biases, input_mean)


# --- shape algebra ---


def layer_shapes(net: Network, height: int, width: int) -> dict[str, tuple[int, int, int]]:
    """Output (h, w, c) per layer, by the closed-form conv/pool arithmetic."""
    shapes = {}
    h, w, c = height, width, net.in_channels
    for spec in net.layers:
        if spec.kind == "conv":
            c = spec.out_channels
        elif spec.kind == "pool":
            h, w = h // 2, w // 2
        shapes[spec.name] = (h, w, c)
    return shapes


# --- forward / backward ---


def _same_pad(kh: int, kw: int) -> tuple[int, int, int, int]:
    top = (kh - 1) // 2
    left = (kw - 1) // 2
    return top, kh - 1 - top, left, kw - 1 - left


def _conv_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    out_c, in_c, kh, kw = kernel.shape
    h, w, _ = x.shape
    top, bottom, left, right = _same_pad(kh, kw)
    padded = np.pad(x, ((top, bottom), (left, right), (0, 0)))
    patches = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(0, 1))
    cols = patches.reshape(h * w, in_c * kh * kw)
    km = kernel.reshape(out_c, in_c * kh * kw).astype(x.dtype, copy=False)
    out = cols @ km.T + bias.astype(x.dtype, copy=False)
    return out.reshape(h, w, out_c)


def _conv_backward(grad: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out_c, in_c, kh, kw = kernel.shape
    h, w, _ = grad.shape
    top, bottom, left, right = _same_pad(kh, kw)
    km = kernel.reshape(out_c, in_c * kh * kw).astype(grad.dtype, copy=False)
    dcols = grad.reshape(h * w, out_c) @ km
    dpatch = dcols.reshape(h, w, in_c, kh, kw)
    dpad = np.zeros((h + top + bottom, w + left + right, in_c), dtype=grad.dtype)
    for ky in range(kh):
        for kx in range(kw):
            dpad[ky:ky + h, kx:kx + w, :] += dpatch[:, :, :, ky, kx]
    return dpad[top:top + h, left:left + w, :]


def _pool_forward(x: np.ndarray) -> np.ndarray:
    h2, w2 = x.shape[0] // 2, x.shape[1] // 2
    c = x.shape[2]
    # odd trailing row/column is dropped
    x = x[:h2 * 2, :w2 * 2, :]
    quarter = np.asarray(0.25, dtype=x.dtype)
    return x.reshape(h2, 2, w2, 2, c).sum(axis=(1, 3)) * quarter


def _pool_backward(grad: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    h2, w2, c = grad.shape
    dx = np.zeros((in_h, in_w, c), dtype=grad.dtype)
    spread = grad * np.asarray(0.25, dtype=grad.dtype)
    expanded = np.broadcast_to(spread[:, None, :, None, :], (h2, 2, w2, 2, c))
    dx[:h2 * 2, :w2 * 2, :] = expanded.reshape(h2 * 2, w2 * 2, c)
    return dx


def _run_chain(net: Network, image: np.ndarray, upto: int | None = None,
               keep: bool = False):
    """Run the chain in the image's dtype; optionally keep layer inputs."""
    x = image - net.input_mean.astype(image.dtype, copy=False)
    inputs = []
    acts: dict[str, np.ndarray] = {}
    stop = len(net.layers) if upto is None else upto + 1
    for spec in net.layers[:stop]:
        if keep:
            inputs.append(x)
        if spec.kind == "conv":
            x = _conv_forward(x, net.kernels[spec.name], net.biases[spec.name])
        elif spec.kind == "relu":
            x = np.maximum(x, 0)
        else:
            x = _pool_forward(x)
        acts[spec.name] = x
    return acts, inputs


def _check_image(net: Network, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3 or image.shape[2] != net.in_channels:
        raise ShapeMismatch(
            f"network expects {net.in_channels}-channel input, got shape {image.shape}")
    if image.dtype not in (np.float32, np.float64):
        image = image.astype(np.float32)
    return image


def _resolve_layers(net: Network, layer_names) -> list[int]:
    indices = []
    by_name = {spec.name: i for i, spec in enumerate(net.layers)}
    for name in layer_names:
        if name not in by_name:
            raise UnknownLayer(f"layer {name!r} not in network")
        indices.append(by_name[name])
    return indices


def _check_extent(net: Network, height: int, width: int, top: int) -> None:
    """Reject inputs that pool down to nothing before the deepest layer used."""
    h, w = height, width
    for spec in net.layers[:top + 1]:
        if spec.kind == "pool":
            h, w = h // 2, w // 2
        if h < 1 or w < 1:
            raise ImageTooSmall(
                f"{height}x{width} input has no pixels left at layer {spec.name}")


def forward(net: Network, image: np.ndarray, layer_names) -> dict[str, np.ndarray]:
    """Activations for the requested layers as (pixels, maps) arrays.

    Deterministic: identical inputs give bit-identical outputs.
    """
    image = _check_image(net, image)
    indices = _resolve_layers(net, layer_names)
    if not indices:
        return {}
    _check_extent(net, image.shape[0], image.shape[1], max(indices))
    acts, _ = _run_chain(net, image, upto=max(indices))
    out = {}
    for name in layer_names:
        a = acts[name]
        out[name] = a.reshape(a.shape[0] * a.shape[1], a.shape[2])
    return out


def backward(net: Network, image: np.ndarray, grads: dict[str, np.ndarray]) -> np.ndarray:
    """Gradient of sum_l <grads[l], F_l(image)> with respect to the image.

    ``grads`` holds (pixels, maps) arrays for a subset of layers;
    contributions from multiple layers sum.  Gradient through relu is
    zeroed exactly where the pre-activation was negative.
    """
    image = _check_image(net, image)
    indices = _resolve_layers(net, grads.keys())
    if not indices:
        return np.zeros_like(image)
    top = max(indices)
    _check_extent(net, image.shape[0], image.shape[1], top)
    acts, inputs = _run_chain(net, image, upto=top, keep=True)

    shapes = layer_shapes(net, image.shape[0], image.shape[1])
    inject: dict[str, np.ndarray] = {}
    for name, g in grads.items():
        h, w, c = shapes[name]
        g = np.asarray(g, dtype=image.dtype)
        if g.shape != (h * w, c):
            raise ShapeMismatch(
                f"layer {name}: gradient shape {g.shape} does not match "
                f"feature shape {(h * w, c)}")
        inject[name] = g.reshape(h, w, c)

    g = np.zeros_like(acts[net.layers[top].name])
    for i in range(top, -1, -1):
        spec = net.layers[i]
        if spec.name in inject:
            g = g + inject[spec.name]
        if spec.kind == "conv":
            g = _conv_backward(g, net.kernels[spec.name])
        elif spec.kind == "relu":
            g = g * (inputs[i] >= 0)
        else:
            g = _pool_backward(g, inputs[i].shape[0], inputs[i].shape[1])
    return g  # input preprocessing is a constant shift; gradient passes through


# --- the in-repo deterministic test network ---

TINY_VGG_SPEC = """\
conv1_1 conv 3 8 3 3
relu1_1 relu
pool1 pool
conv2_1 conv 8 16 3 3
relu2_1 relu
pool2 pool
conv3_1 conv 16 32 3 3
relu3_1 relu
pool3 pool
conv4_1 conv 32 32 3 3
relu4_1 relu
conv4_2 conv 32 32 3 3
conv5_1 conv 32 32 3 3
"""

TINY_VGG_SEED = 0x5EED_CAFE

_M64 = (1 << 64) - 1


class XorShift64Star:
    """xorshift64* generator; doubles use the top 53 output bits."""

    def __init__(self, seed: int):
        self.state = seed & _M64
        if self.state == 0:
            self.state = 1

    def next_u64(self) -> int:
        s = self.state
        s ^= s >> 12
        s = (s ^ (s << 25)) & _M64
        s ^= s >> 27
        self.state = s
        return (s * 0x2545F4914F6CDD1D) & _M64

    def next_unit(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


def generate_tiny_vgg_store() -> WeightStore:
    """Deterministic weights for the shipped test network.

    One generator stream seeded with TINY_VGG_SEED feeds the conv kernels
    in chain order, C-order within each (out, in, kh, kw) block; each draw
    is uniform in (-s, s] with s = sqrt(2 / (in * kh * kw)).  Biases and
    input means are zero.
    """
    layers = parse_spec(TINY_VGG_SPEC)
    rng = XorShift64Star(TINY_VGG_SEED)
    records = [WeightRecord("input_mean", KIND_INPUT_MEAN,
                            means=np.zeros(3, dtype=np.float32))]
    for spec in layers:
        if spec.kind == "relu":
            records.append(WeightRecord(spec.name, KIND_RELU))
            continue
        if spec.kind == "pool":
            records.append(WeightRecord(spec.name, KIND_POOL))
            continue
        shape = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
        fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w
        scale = float(np.sqrt(2.0 / fan_in))
        flat = np.empty(int(np.prod(shape)), dtype=np.float32)
        for i in range(flat.size):
            flat[i] = np.float32((2.0 * rng.next_unit() - 1.0) * scale)
        records.append(WeightRecord(
            spec.name, KIND_CONV, shape, flat.reshape(shape),
            np.zeros(spec.out_channels, dtype=np.float32)))
    return WeightStore(records)


def tiny_vgg_files() -> tuple[Path, Path]:
    """Paths of the committed tiny network spec and weight file."""
    return _DATA_DIR / "tiny_vgg.txt", _DATA_DIR / "tiny_vgg.nswt"


def load_tiny_vgg() -> Network:
    spec_path, weight_path = tiny_vgg_files()
    return load_network(spec_path, weight_path)
