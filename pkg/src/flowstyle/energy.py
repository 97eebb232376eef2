"""Energy terms for feature-based restyling and their analytic gradients.

The total energy of a candidate image is a weighted sum of four terms:

* content: mean squared feature difference against a content image,
  per layer, normalized by pixels * maps;
* style: squared Frobenius distance between feature correlation (Gram)
  matrices, per layer, normalized by maps^2;
* tv: squared forward differences of the image itself (boundary terms
  dropped), which discourages high-frequency noise;
* temporal: masked per-pixel penalty against one or more warped
  reference images, normalized by the count of masked pixels * channels.

All gradients are exact, so a central-finite-difference probe of the
total reproduces them to first order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllTermsZero, EmptyMask, ImageTooSmall, ShapeMismatch
from .network import Network, backward, forward

TERM_NAMES = ("content", "style", "tv", "temporal")

# a term counts toward auto-balancing once it reaches this share of the total
BALANCE_SHARE = 0.05


def gram(features: np.ndarray) -> np.ndarray:
    """Feature correlation matrix G[j,k] = (1/I) sum_i F[i,j] F[i,k].

    ``features`` is (pixels, maps); the result is (maps, maps), symmetric.
    """
    f = np.asarray(features)
    if f.ndim != 2:
        raise ShapeMismatch(f"feature array must be 2-d, got shape {f.shape}")
    return (f.T @ f) / f.dtype.type(f.shape[0])


def content_targets(net: Network, image: np.ndarray, layers) -> dict[str, np.ndarray]:
    """Feature maps of the content image at the given layers."""
    return forward(net, image, list(layers))


def style_targets(net: Network, image: np.ndarray, layers) -> dict[str, np.ndarray]:
    """Gram matrices of the style image at the given layers."""
    acts = forward(net, image, list(layers))
    return {name: gram(acts[name]) for name in acts}


@dataclass(frozen=True)
class EnergyWeights:
    """Per-layer weights for content/style plus scalar tv/temporal weights.

    The temporal term's penalty kind rides along here (``squared`` or
    ``charbonnier`` with its epsilon) since it is part of the loss
    configuration, not of any particular frame pair.
    """

    content: dict[str, float]
    style: dict[str, float]
    tv: float = 0.0
    temporal: float = 0.0
    temporal_mode: str = "squared"
    temporal_eps: float = 1e-3

    def __post_init__(self):
        for name, value in [*self.content.items(), *self.style.items(),
                            ("tv", self.tv), ("temporal", self.temporal)]:
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"weight {name} must be finite and >= 0, got {value}")
        if self.temporal_mode not in ("squared", "charbonnier"):
            raise ValueError(f"unknown temporal mode {self.temporal_mode!r}")

    def scaled(self, factors: dict[str, float]) -> "EnergyWeights":
        """New weights with whole terms multiplied by the given factors."""
        fc = factors.get("content", 1.0)
        fs = factors.get("style", 1.0)
        return EnergyWeights(
            content={k: v * fc for k, v in self.content.items()},
            style={k: v * fs for k, v in self.style.items()},
            tv=self.tv * factors.get("tv", 1.0),
            temporal=self.temporal * factors.get("temporal", 1.0),
            temporal_mode=self.temporal_mode,
            temporal_eps=self.temporal_eps,
        )


def default_weights(content: float = 1.0, style: float = 1.0,
                    tv: float = 1e-3, temporal: float = 0.0,
                    temporal_mode: str = "squared") -> EnergyWeights:
    """Weights for the shipped network: conv4_2 content, 0.2 per style layer."""
    style_layers = ["conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1"]
    return EnergyWeights(
        content={"conv4_2": content},
        style={name: style / len(style_layers) for name in style_layers},
        tv=tv,
        temporal=temporal,
        temporal_mode=temporal_mode,
    )


@dataclass(frozen=True)
class TemporalRef:
    """A warped reference image plus the per-pixel validity mask."""

    image: np.ndarray  # (H, W, C)
    mask: np.ndarray   # (H, W) bool, True where the pixel participates


@dataclass
class EnergyReport:
    total: float
    components: dict[str, float]
    gradient: np.ndarray | None = None
    # per-layer detail, useful when tuning weights by hand
    content_layers: dict[str, float] = field(default_factory=dict)
    style_layers: dict[str, float] = field(default_factory=dict)


def tv_loss(image: np.ndarray, want_gradient: bool = True):
    """Sum of squared forward differences; boundary terms are dropped."""
    x = np.asarray(image)
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ImageTooSmall(f"tv needs at least 2x2 pixels, got {x.shape[:2]}")
    dv = x[1:, :, :] - x[:-1, :, :]
    dh = x[:, 1:, :] - x[:, :-1, :]
    value = float((dv * dv).sum(dtype=np.float64) + (dh * dh).sum(dtype=np.float64))
    if not want_gradient:
        return value, None
    g = np.zeros_like(x)
    g[1:, :, :] += 2 * dv
    g[:-1, :, :] -= 2 * dv
    g[:, 1:, :] += 2 * dh
    g[:, :-1, :] -= 2 * dh
    return value, g


def temporal_loss(image: np.ndarray, ref: TemporalRef, mode: str = "squared",
                  eps: float = 1e-3, want_gradient: bool = True):
    """Masked penalty against a warped reference frame.

    ``squared`` is the plain quadratic; ``charbonnier`` is the smooth L1
    sqrt(d^2 + eps^2) - eps, which tolerates occasional large mismatches.
    Both are normalized by (masked pixel count * channels), and the
    gradient is exactly zero at unmasked pixels.
    """
    x = np.asarray(image)
    y = np.asarray(ref.image)
    m = np.asarray(ref.mask)
    if x.shape != y.shape:
        raise ShapeMismatch(f"image {x.shape} vs reference {y.shape}")
    if m.shape != x.shape[:2]:
        raise ShapeMismatch(f"mask {m.shape} vs image plane {x.shape[:2]}")
    m = m.astype(bool)
    count = int(m.sum())
    if count == 0:
        raise EmptyMask("temporal mask excludes every pixel")
    norm = x.dtype.type(1.0 / (count * x.shape[2]))
    d = (x - y) * m[:, :, None]
    if mode == "squared":
        value = float((d * d).sum(dtype=np.float64)) * float(norm)
        grad = (2 * norm) * d if want_gradient else None
    elif mode == "charbonnier":
        e2 = x.dtype.type(eps) ** 2
        root = np.sqrt(d * d + e2)
        value = float(((root - np.sqrt(e2)) * m[:, :, None])
                      .sum(dtype=np.float64)) * float(norm)
        grad = (norm * d / root) * m[:, :, None] if want_gradient else None
    else:
        raise ValueError(f"unknown temporal mode {mode!r}")
    return value, grad


def total_energy(net: Network, image: np.ndarray, weights: EnergyWeights,
                 content_refs: dict[str, np.ndarray],
                 style_refs: dict[str, np.ndarray],
                 temporal_refs: tuple[TemporalRef, ...] = (),
                 want_gradient: bool = True) -> EnergyReport:
    """Total energy of ``image`` and, optionally, its exact gradient.

    ``content_refs`` maps layer names to target feature maps and
    ``style_refs`` maps layer names to target Gram matrices; only layers
    with a nonzero weight are evaluated.  Multiple temporal references
    (e.g. both neighbors during a joint sweep) simply add.
    """
    image = np.asarray(image)
    active_content = {k: w for k, w in weights.content.items() if w != 0.0}
    active_style = {k: w for k, w in weights.style.items() if w != 0.0}
    layer_names = sorted(set(active_content) | set(active_style))
    acts = forward(net, image, layer_names)

    components = dict.fromkeys(TERM_NAMES, 0.0)
    content_layers: dict[str, float] = {}
    style_layers: dict[str, float] = {}
    feature_grads: dict[str, np.ndarray] = {}

    def add_feature_grad(name, g):
        if name in feature_grads:
            feature_grads[name] = feature_grads[name] + g
        else:
            feature_grads[name] = g

    for name, w in active_content.items():
        f = acts[name]
        target = np.asarray(content_refs[name], dtype=f.dtype)
        if target.shape != f.shape:
            raise ShapeMismatch(
                f"layer {name}: content target {target.shape} vs features {f.shape}")
        i_count, j_count = f.shape
        diff = f - target
        term = w / (i_count * j_count) * float((diff * diff).sum(dtype=np.float64))
        content_layers[name] = term
        components["content"] += term
        if want_gradient:
            add_feature_grad(name, (2.0 * w / (i_count * j_count)) * diff)

    for name, w in active_style.items():
        f = acts[name]
        i_count, j_count = f.shape
        g_mat = gram(f)
        target = np.asarray(style_refs[name], dtype=f.dtype)
        if target.shape != g_mat.shape:
            raise ShapeMismatch(
                f"layer {name}: style target {target.shape} vs gram {g_mat.shape}")
        delta = g_mat - target
        term = w / (j_count ** 2) * float((delta * delta).sum(dtype=np.float64))
        style_layers[name] = term
        components["style"] += term
        if want_gradient:
            add_feature_grad(name, (4.0 * w / (j_count ** 2 * i_count)) * (f @ delta))

    gradient = None
    if want_gradient:
        if feature_grads:
            gradient = backward(net, image, feature_grads)
        else:
            gradient = np.zeros_like(image)

    if weights.tv != 0.0:
        tv_value, tv_grad = tv_loss(image, want_gradient)
        components["tv"] = weights.tv * tv_value
        if want_gradient:
            gradient = gradient + weights.tv * tv_grad

    if weights.temporal != 0.0 and temporal_refs:
        for ref in temporal_refs:
            t_value, t_grad = temporal_loss(image, ref, weights.temporal_mode,
                                            weights.temporal_eps, want_gradient)
            components["temporal"] += weights.temporal * t_value
            if want_gradient:
                gradient = gradient + weights.temporal * t_grad

    return EnergyReport(
        total=sum(components.values()),
        components=components,
        gradient=gradient,
        content_layers=content_layers,
        style_layers=style_layers,
    )


def balance_factors(values: dict[str, float]) -> dict[str, float]:
    """Scale factors that lift every active term to at least 5% of the total.

    A term is active when its initial value is positive.  Deficient terms
    (below the 5% share) are boosted to exactly 5% of the rebalanced
    total; boosting raises the total, which can push further terms under
    the line, so the deficient set grows until it is stable.
    """
    active = {k: v for k, v in values.items() if v > 0.0}
    if not active:
        raise AllTermsZero("no energy term has a positive initial value")
    deficient: set[str] = set()
    while True:
        kept = sum(v for k, v in active.items() if k not in deficient)
        new_total = kept / (1.0 - BALANCE_SHARE * len(deficient))
        grew = False
        for k, v in active.items():
            if k not in deficient and v < BALANCE_SHARE * new_total:
                deficient.add(k)
                grew = True
        if not grew:
            break
    factors = dict.fromkeys(values, 1.0)
    for k in deficient:
        factors[k] = BALANCE_SHARE * new_total / active[k]
    return factors


def auto_balance_weights(weights: EnergyWeights,
                         components: dict[str, float]) -> EnergyWeights:
    """Rescale whole terms so every active one holds at least a 5% share.

    ``components`` are the term values measured at the initial image;
    per-layer ratios inside a term are preserved.
    """
    return weights.scaled(balance_factors(components))
