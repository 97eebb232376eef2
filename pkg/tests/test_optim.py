import numpy as np
import pytest

from flowstyle.energy import EnergyWeights, default_weights
from flowstyle.errors import ShapeMismatch
from flowstyle.network import load_tiny_vgg
from flowstyle.optim import (
    REASON_CONVERGED,
    REASON_FINISHED,
    REASON_NON_FINITE,
    AdamParams,
    AdamState,
    adam_step,
    minimize,
    style_transfer,
)


class TestAdamStep:
    def test_zero_gradient_leaves_image_unchanged(self):
        x = np.array([1.0, -2.0, 3.0])
        state = AdamState.fresh(x.shape, x.dtype)
        out, state2 = adam_step(state, x, np.zeros_like(x))
        assert np.array_equal(out, x)
        assert state2.t == 1

    def test_first_step_is_minus_alpha_for_unit_gradient(self):
        alpha = 0.02
        x = np.zeros(4)
        state = AdamState.fresh(x.shape, x.dtype, AdamParams(step_size=alpha))
        out, _ = adam_step(state, x, np.ones_like(x))
        assert np.all(np.abs(out + alpha) < 1e-6 * alpha)

    def test_deterministic(self):
        x = np.array([0.5, 0.5])
        g = np.array([1.0, -1.0])
        s0 = AdamState.fresh(x.shape, x.dtype)
        a1, s1 = adam_step(s0, x, g)
        b1, _ = adam_step(AdamState.fresh(x.shape, x.dtype), x, g)
        assert np.array_equal(a1, b1)
        a2, _ = adam_step(s1, a1, g)
        b2, _ = adam_step(s1, a1, g)
        assert np.array_equal(a2, b2)

    def test_shape_mismatch(self):
        x = np.zeros(3)
        state = AdamState.fresh(x.shape, x.dtype)
        with pytest.raises(ShapeMismatch):
            adam_step(state, x, np.zeros(4))


class TestMinimize:
    def test_quadratic_converges(self):
        c = np.array([0.3, -0.7, 1.2])

        def f(x):
            return float(((x - c) ** 2).sum()), 2 * (x - c)

        r = minimize(f, np.zeros(3), iterations=500)
        assert np.abs(r.image - c).max() < 1e-6
        assert r.reason == REASON_FINISHED

    def test_trace_length_equals_iterations_run(self):
        def f(x):
            return float((x ** 2).sum()), 2 * x

        r = minimize(f, np.array([2.0]), iterations=10)
        assert len(r.trace) == 10 == r.iterations_run
        assert r.trace[0] == pytest.approx(4.0)

    def test_zero_iterations_returns_input(self):
        def f(x):
            return float((x ** 2).sum()), 2 * x

        x0 = np.array([1.0, 2.0])
        r = minimize(f, x0, iterations=0)
        assert np.array_equal(r.image, x0)
        assert r.trace == []
        assert r.iterations_run == 0

    def test_input_not_mutated(self):
        def f(x):
            return float((x ** 2).sum()), 2 * x

        x0 = np.array([1.0, 2.0])
        keep = x0.copy()
        minimize(f, x0, iterations=5)
        assert np.array_equal(x0, keep)

    def test_non_finite_returns_last_finite_iterate(self):
        calls = {"n": 0}

        def f(x):
            calls["n"] += 1
            if calls["n"] >= 4:
                return float("nan"), np.zeros_like(x)
            return float((x ** 2).sum()), 2 * x

        r = minimize(f, np.array([1.0]), iterations=10)
        assert r.reason == REASON_NON_FINITE
        assert r.iterations_run == 3
        assert len(r.trace) == 3
        # the returned iterate is the one whose finite value closed the trace
        assert float(r.image[0] ** 2) == pytest.approx(r.trace[-1])

    def test_non_finite_gradient_also_stops(self):
        def f(x):
            return float(x.sum()), np.full_like(x, np.inf)

        r = minimize(f, np.array([1.0]), iterations=5)
        assert r.reason == REASON_NON_FINITE
        assert r.iterations_run == 0
        assert np.array_equal(r.image, [1.0])

    def test_callback_sees_every_iteration(self):
        seen = []

        def f(x):
            return float((x ** 2).sum()), 2 * x

        minimize(f, np.array([1.0]), iterations=7,
                 callback=lambda k, v, x: seen.append(k))
        assert seen == list(range(7))

    def test_stall_detection_off_by_default(self):
        def f(x):
            return 1.0, np.zeros_like(x)  # flat objective never improves

        r = minimize(f, np.array([1.0]), iterations=120)
        assert r.iterations_run == 120

    def test_stall_detection_stops_early(self):
        def f(x):
            return 1.0, np.zeros_like(x)

        r = minimize(f, np.array([1.0]), iterations=500,
                     stop_rel_improvement=1e-6)
        assert r.reason == REASON_CONVERGED
        assert r.iterations_run < 100


class TestStyleTransfer:
    def setup_method(self):
        self.net = load_tiny_vgg()
        rng = np.random.default_rng(0)
        self.content = rng.random((16, 16, 3)).astype(np.float32)
        self.style = rng.random((16, 16, 3)).astype(np.float32)
        self.init = rng.random((16, 16, 3)).astype(np.float32)

    def test_zero_iterations_keeps_init(self):
        w = default_weights()
        r = style_transfer(self.net, self.init, self.content, self.style, w,
                           iterations=0)
        assert np.array_equal(r.image, self.init)
        assert r.trace == []
        assert r.initial.total == pytest.approx(r.final.total)

    def test_identity_when_everything_matches(self):
        # content target already achieved: zero gradient, image untouched
        w = EnergyWeights(content={"conv4_2": 1.0}, style={})
        r = style_transfer(self.net, self.init, self.init, self.style, w,
                           iterations=25)
        assert r.initial.total == 0.0
        assert np.abs(r.image - self.init).max() < 1e-6

    def test_energy_decreases(self):
        w = default_weights(content=1.0, style=1.0)
        r = style_transfer(self.net, self.init, self.content, self.style, w,
                           iterations=60)
        assert r.final.total < r.trace[0]
        assert r.reason == REASON_FINISHED

    def test_style_only_drops_hard(self):
        w = default_weights(content=0.0, style=1.0, tv=0.0)
        r = style_transfer(self.net, self.init, self.init, self.style, w,
                           iterations=200)
        assert r.final.components["style"] < 0.10 * r.initial.components["style"]

    def test_content_only_moves_toward_content(self):
        w = EnergyWeights(content={"conv2_1": 1.0}, style={})
        before = float(np.abs(self.init - self.content).mean())
        r = style_transfer(self.net, self.init, self.content, self.style, w,
                           iterations=150)
        after = float(np.abs(r.image - self.content).mean())
        assert r.final.total < 0.2 * r.initial.total
        assert after < before

    def test_auto_balance_lifts_small_terms(self):
        w = default_weights(content=1.0, style=1.0, tv=1e-9)
        r = style_transfer(self.net, self.init, self.content, self.style, w,
                           iterations=0, auto_balance=True)
        comps = r.initial.components
        total = sum(comps.values())
        for name, value in comps.items():
            if value > 0:
                assert value >= 0.05 * total * (1 - 1e-6), name
        assert r.weights.tv > w.tv

    def test_deterministic(self):
        w = default_weights()
        a = style_transfer(self.net, self.init, self.content, self.style, w,
                           iterations=20)
        b = style_transfer(self.net, self.init, self.content, self.style, w,
                           iterations=20)
        assert np.array_equal(a.image, b.image)
        assert a.trace == b.trace


class TestWeightValidation:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            EnergyWeights(content={"conv4_2": -1.0}, style={})
        with pytest.raises(ValueError):
            EnergyWeights(content={}, style={}, tv=-0.5)

    def test_non_finite_weight_rejected(self):
        with pytest.raises(ValueError):
            EnergyWeights(content={}, style={"conv1_1": float("inf")})

    def test_unknown_temporal_mode_rejected(self):
        with pytest.raises(ValueError):
            EnergyWeights(content={}, style={}, temporal_mode="cubic")
