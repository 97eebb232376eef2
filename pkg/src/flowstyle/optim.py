"""First-order minimization of the restyling energy.

The driver is plain Adam with bias correction, exposed both as a
single-step operation and as a loop.  Iterates live in the image domain
and are deliberately not clamped to [0,1] during the run; clamping
happens where frames are written out.  A non-finite energy or gradient
stops the run and hands back the last iterate that still had finite
energy, so a pipeline over many frames degrades per frame instead of
dying.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    EnergyReport,
    EnergyWeights,
    TemporalRef,
    auto_balance_weights,
    content_targets,
    style_targets,
    total_energy,
)
from .errors import ShapeMismatch
from .network import Network

REASON_FINISHED = "finished"
REASON_NON_FINITE = "non-finite energy"
REASON_CONVERGED = "improvement below threshold"

# window length for both the stall check and trend assertions in tests
TREND_WINDOW = 50


@dataclass(frozen=True)
class AdamParams:
    step_size: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    """Moment estimates and step count for one optimization variable."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    params: AdamParams = AdamParams()

    @classmethod
    def fresh(cls, shape, dtype=np.float32,
              params: AdamParams = AdamParams()) -> "AdamState":
        return cls(np.zeros(shape, dtype), np.zeros(shape, dtype), 0, params)


def adam_step(state: AdamState, image: np.ndarray, grad: np.ndarray):
    """One bias-corrected Adam update; returns (new image, new state)."""
    if grad.shape != image.shape:
        raise ShapeMismatch(f"gradient {grad.shape} vs image {image.shape}")
    p = state.params
    one = image.dtype.type(1.0)
    b1 = image.dtype.type(p.beta1)
    b2 = image.dtype.type(p.beta2)
    t = state.t + 1
    m = b1 * state.m + (one - b1) * grad
    v = b2 * state.v + (one - b2) * (grad * grad)
    m_hat = m / (one - b1 ** t)
    v_hat = v / (one - b2 ** t)
    step = image.dtype.type(p.step_size)
    out = image - step * m_hat / (np.sqrt(v_hat) + image.dtype.type(p.eps))
    return out, AdamState(m, v, t, p)


@dataclass
class OptimResult:
    image: np.ndarray
    trace: list[float]          # objective value at each visited iterate
    reason: str
    iterations_run: int
    wall_time: float = 0.0


def minimize(objective, x0: np.ndarray, iterations: int = 1000,
             params: AdamParams = AdamParams(), callback=None,
             stop_rel_improvement: float | None = None) -> OptimResult:
    """Run Adam on ``objective(x) -> (value, gradient)`` from ``x0``.

    ``trace[k]`` is the value at the iterate before step k, so its length
    equals the number of iterations actually run; with ``iterations=0``
    the input comes back untouched.  ``stop_rel_improvement`` (off by
    default) ends the run early once the relative improvement over the
    last TREND_WINDOW iterations falls below the threshold.
    """
    started = time.perf_counter()
    x = np.array(x0, copy=True)
    state = AdamState.fresh(x.shape, x.dtype, params)
    trace: list[float] = []
    last_finite = x

    for t in range(iterations):
        value, grad = objective(x)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return OptimResult(last_finite, trace, REASON_NON_FINITE, t,
                               time.perf_counter() - started)
        last_finite = x
        trace.append(float(value))
        if callback is not None:
            callback(t, float(value), x)
        if stop_rel_improvement is not None and t >= TREND_WINDOW:
            past = trace[t - TREND_WINDOW]
            if past != 0 and (past - value) / abs(past) < stop_rel_improvement:
                return OptimResult(x, trace, REASON_CONVERGED, t + 1,
                                   time.perf_counter() - started)
        x, state = adam_step(state, x, grad)

    return OptimResult(x, trace, REASON_FINISHED, iterations,
                       time.perf_counter() - started)


@dataclass
class StyleTransferResult:
    image: np.ndarray           # final iterate, not clamped
    trace: list[float]
    reason: str
    weights: EnergyWeights      # weights actually used (after any balancing)
    initial: EnergyReport
    final: EnergyReport
    wall_time: float = 0.0


def style_transfer(net: Network, init: np.ndarray, content_image: np.ndarray,
                   style_image: np.ndarray, weights: EnergyWeights,
                   iterations: int = 1000,
                   params: AdamParams = AdamParams(),
                   temporal_refs: tuple[TemporalRef, ...] = (),
                   auto_balance: bool = False,
                   stop_rel_improvement: float | None = None,
                   callback=None) -> StyleTransferResult:
    """Minimize the restyling energy starting from ``init``.

    Targets are measured once up front: content features from
    ``content_image`` (which may be the init itself), style Grams from
    ``style_image``.  The style image can have any size; its Gram
    matrices depend only on the layer's map count.  With
    ``auto_balance`` the term weights are rescaled at the initial image
    so no active term starts below a 5% share.
    """
    init = np.asarray(init, dtype=np.float32)
    crefs = content_targets(net, content_image, weights.content) \
        if weights.content else {}
    srefs = style_targets(net, style_image, weights.style) \
        if weights.style else {}

    def report(w: EnergyWeights, x: np.ndarray,
               want_gradient: bool = False) -> EnergyReport:
        return total_energy(net, x, w, crefs, srefs, temporal_refs,
                            want_gradient=want_gradient)

    initial = report(weights, init)
    if auto_balance:
        weights = auto_balance_weights(weights, initial.components)
        initial = report(weights, init)

    def objective(x):
        rep = report(weights, x, want_gradient=True)
        return rep.total, rep.gradient

    out = minimize(objective, init, iterations, params, callback,
                   stop_rel_improvement)
    final = report(weights, out.image)
    return StyleTransferResult(out.image, out.trace, out.reason, weights,
                               initial, final, out.wall_time)
