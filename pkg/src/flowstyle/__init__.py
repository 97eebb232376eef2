"""Artistic restyling of images and image sequences.

A small VGG-style feature network drives an energy made of content,
style (Gram), total-variation, and optional temporal terms; video
frames reuse the previous frame's result through optical-flow warping
so the sequence stays coherent.
"""

from .color import DEFAULT_BINS, build_style_movie, channel_cdf, match_histogram
from .energy import (
    BALANCE_SHARE,
    EnergyReport,
    EnergyWeights,
    TemporalRef,
    auto_balance_weights,
    balance_factors,
    content_targets,
    default_weights,
    gram,
    style_targets,
    temporal_loss,
    total_energy,
    tv_loss,
)
from .errors import (
    AllTermsZero,
    BadMagic,
    ChannelMismatch,
    EmptyMask,
    EmptySequence,
    FlowStyleError,
    FlowUnavailable,
    ImageTooSmall,
    LengthMismatch,
    MissingFrame,
    NonFiniteEnergy,
    ShapeMismatch,
    SizeMismatch,
    TrailingData,
    TruncatedFile,
    UnknownLayer,
    VersionUnsupported,
)
from .flow import (
    FlowParams,
    coherence_metric,
    estimate_flow,
    invert_for_warp,
    read_flo,
    resize_bilinear,
    warp_image,
    write_flo,
)
from .image import (
    as_image,
    clamp01,
    load_image,
    luminance,
    noise_image,
    save_image,
    to_bytes,
)
from .network import (
    Network,
    WeightRecord,
    WeightStore,
    backward,
    forward,
    layer_shapes,
    load_network,
    load_tiny_vgg,
    parse_spec,
    read_weights,
    tiny_vgg_files,
    write_weights,
)
from .optim import (
    AdamParams,
    AdamState,
    OptimResult,
    StyleTransferResult,
    adam_step,
    minimize,
    style_transfer,
)
from .pipeline import (
    FrameTrace,
    RenderJob,
    RenderResult,
    Strategy,
    detect_scene_cuts,
    discover_frames,
    joint_backtrack_pass,
    render_sequence,
    render_video,
    sequence_energy,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
