import numpy as np
import pytest

from flowstyle.energy import (
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
from flowstyle.errors import AllTermsZero, EmptyMask, ImageTooSmall, ShapeMismatch
from flowstyle.network import (
    KIND_CONV,
    WeightRecord,
    WeightStore,
    load_network,
    load_tiny_vgg,
    write_weights,
)


def identity_net():
    """1x1 conv with weight 1, bias 0: features equal the (1-channel) image."""
    k = np.ones((1, 1, 1, 1), dtype=np.float32)
    store = WeightStore([
        WeightRecord("c1", KIND_CONV, (1, 1, 1, 1), k, np.zeros(1, np.float32)),
    ])
    return load_network("c1 conv 1 1 1 1\n", write_weights(store))


class TestGram:
    def test_hand_value(self):
        g = gram(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert np.allclose(g, [[5.0, 7.0], [7.0, 10.0]])

    def test_symmetry(self):
        f = np.random.default_rng(0).standard_normal((50, 7))
        g = gram(f)
        assert np.allclose(g, g.T)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            i_count = int(rng.integers(1, 65))
            j_count = int(rng.integers(1, 17))
            f = rng.standard_normal((i_count, j_count)).astype(np.float32)
            slow = np.zeros((j_count, j_count))
            for j in range(j_count):
                for k in range(j_count):
                    for i in range(i_count):
                        slow[j, k] += float(f[i, j]) * float(f[i, k])
            slow /= i_count
            assert np.abs(gram(f) - slow).max() < 1e-5

    def test_rejects_non_2d(self):
        with pytest.raises(ShapeMismatch):
            gram(np.zeros((2, 2, 2)))


class TestContentTerm:
    def test_hand_value_and_gradient(self):
        # one pixel, one map: F = 3, target = 1 -> loss 4, d/dx 4
        net = identity_net()
        x = np.full((1, 1, 1), 3.0, dtype=np.float32)
        w = EnergyWeights(content={"c1": 1.0}, style={})
        crefs = {"c1": np.array([[1.0]], dtype=np.float32)}
        rep = total_energy(net, x, w, crefs, {})
        assert rep.total == pytest.approx(4.0)
        assert rep.gradient[0, 0, 0] == pytest.approx(4.0)

    def test_normalization_by_pixels_and_maps(self):
        net = identity_net()
        x = np.full((2, 2, 1), 3.0, dtype=np.float32)
        w = EnergyWeights(content={"c1": 1.0}, style={})
        crefs = {"c1": np.ones((4, 1), dtype=np.float32)}
        rep = total_energy(net, x, w, crefs, {})
        # 4 pixels, each (3-1)^2 = 4, normalized by I*J = 4
        assert rep.total == pytest.approx(4.0)

    def test_zero_at_target(self):
        net = load_tiny_vgg()
        img = np.random.default_rng(2).random((16, 16, 3)).astype(np.float32)
        w = default_weights(content=1.0, style=0.0, tv=0.0)
        crefs = content_targets(net, img, w.content)
        rep = total_energy(net, img, w, crefs, {})
        assert rep.total == 0.0
        assert np.all(rep.gradient == 0.0)


class TestStyleTerm:
    def test_hand_value_and_gradient(self):
        # F = 2 -> G = 4, target gram 1 -> loss 9, d/dx 24
        net = identity_net()
        x = np.full((1, 1, 1), 2.0, dtype=np.float32)
        w = EnergyWeights(content={}, style={"c1": 1.0})
        srefs = {"c1": np.array([[1.0]], dtype=np.float32)}
        rep = total_energy(net, x, w, {}, srefs)
        assert rep.total == pytest.approx(9.0)
        assert rep.gradient[0, 0, 0] == pytest.approx(24.0)

    def test_zero_at_style_image(self):
        net = load_tiny_vgg()
        img = np.random.default_rng(3).random((16, 16, 3)).astype(np.float32)
        w = default_weights(content=0.0, style=1.0, tv=0.0)
        srefs = style_targets(net, img, w.style)
        rep = total_energy(net, img, w, {}, srefs)
        assert rep.total == pytest.approx(0.0, abs=1e-10)

    def test_invariant_to_pixel_shuffle(self):
        # gram discards spatial layout, so shuffling feature rows of the
        # target image leaves the style term of another image unchanged
        net = identity_net()
        rng = np.random.default_rng(4)
        style_img = rng.random((4, 4, 1)).astype(np.float32)
        shuffled = style_img.reshape(-1)[rng.permutation(16)].reshape(4, 4, 1)
        x = rng.random((4, 4, 1)).astype(np.float32)
        w = EnergyWeights(content={}, style={"c1": 1.0})
        a = total_energy(net, x, w, {}, style_targets(net, style_img, ["c1"]))
        b = total_energy(net, x, w, {}, style_targets(net, shuffled, ["c1"]))
        assert a.total == pytest.approx(b.total, rel=1e-6)


class TestTvTerm:
    def test_hand_value(self):
        x = np.array([[0.0, 1.0], [0.0, 1.0]])[:, :, None]
        value, _ = tv_loss(x)
        assert value == pytest.approx(2.0)

    def test_constant_image_is_zero(self):
        value, grad = tv_loss(np.full((5, 7, 3), 0.4))
        assert value == 0.0
        assert np.all(grad == 0.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        x = rng.random((6, 5, 2))
        _, g = tv_loss(x)
        h = 1e-6
        for idx in [(0, 0, 0), (2, 3, 1), (5, 4, 0), (3, 0, 1)]:
            xp = x.copy()
            xp[idx] += h
            xm = x.copy()
            xm[idx] -= h
            fd = (tv_loss(xp)[0] - tv_loss(xm)[0]) / (2 * h)
            assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_too_small_image_rejected(self):
        with pytest.raises(ImageTooSmall):
            tv_loss(np.zeros((1, 5, 3)))
        with pytest.raises(ImageTooSmall):
            tv_loss(np.zeros((5, 1, 3)))


class TestTemporalTerm:
    def test_squared_hand_value(self):
        ref = TemporalRef(np.zeros((1, 1, 1)), np.ones((1, 1), bool))
        value, grad = temporal_loss(np.full((1, 1, 1), 3.0), ref)
        assert value == pytest.approx(9.0)
        assert grad[0, 0, 0] == pytest.approx(6.0)

    def test_charbonnier_hand_value(self):
        ref = TemporalRef(np.zeros((1, 1, 1)), np.ones((1, 1), bool))
        value, grad = temporal_loss(np.full((1, 1, 1), 3.0), ref,
                                    mode="charbonnier", eps=1e-3)
        assert value == pytest.approx(np.sqrt(9 + 1e-6) - 1e-3)
        assert grad[0, 0, 0] == pytest.approx(3.0 / np.sqrt(9 + 1e-6))

    def test_charbonnier_approaches_absolute_value(self):
        # far from zero the smooth penalty tracks |diff| within eps
        ref = TemporalRef(np.zeros((1, 1, 1)), np.ones((1, 1), bool))
        for diff in (0.5, 1.0, 3.0, 10.0):
            value, _ = temporal_loss(np.full((1, 1, 1), diff), ref,
                                     mode="charbonnier", eps=1e-3)
            assert abs(value - diff) < 1e-3

    def test_zero_at_reference_both_modes(self):
        rng = np.random.default_rng(13)
        img = rng.random((4, 4, 3))
        ref = TemporalRef(img.copy(), np.ones((4, 4), bool))
        for mode in ("squared", "charbonnier"):
            value, grad = temporal_loss(img, ref, mode=mode)
            assert value == 0.0
            assert np.all(grad == 0.0)

    def test_gradient_zero_off_mask(self):
        rng = np.random.default_rng(6)
        x = rng.random((4, 4, 3))
        mask = np.zeros((4, 4), bool)
        mask[1, 2] = True
        ref = TemporalRef(rng.random((4, 4, 3)), mask)
        for mode in ("squared", "charbonnier"):
            _, grad = temporal_loss(x, ref, mode=mode)
            off = grad[~mask]
            assert np.all(off == 0.0)
            assert np.any(grad[mask] != 0.0)

    def test_normalized_by_masked_count_and_channels(self):
        # doubling the masked area with the same per-pixel error keeps the value
        x = np.ones((2, 2, 3))
        ref_img = np.zeros((2, 2, 3))
        m1 = np.zeros((2, 2), bool)
        m1[0, 0] = True
        m2 = np.ones((2, 2), bool)
        v1, _ = temporal_loss(x, TemporalRef(ref_img, m1))
        v2, _ = temporal_loss(x, TemporalRef(ref_img, m2))
        assert v1 == pytest.approx(v2)

    def test_empty_mask_raises(self):
        ref = TemporalRef(np.zeros((2, 2, 1)), np.zeros((2, 2), bool))
        with pytest.raises(EmptyMask):
            temporal_loss(np.ones((2, 2, 1)), ref)

    def test_shape_mismatch_raises(self):
        ref = TemporalRef(np.zeros((2, 3, 1)), np.ones((2, 3), bool))
        with pytest.raises(ShapeMismatch):
            temporal_loss(np.ones((2, 2, 1)), ref)
        ref = TemporalRef(np.zeros((2, 2, 1)), np.ones((3, 3), bool))
        with pytest.raises(ShapeMismatch):
            temporal_loss(np.ones((2, 2, 1)), ref)


class TestTotalEnergy:
    def setup_method(self):
        self.net = load_tiny_vgg()
        rng = np.random.default_rng(7)
        self.x = rng.random((16, 16, 3))
        self.weights = default_weights(content=1.0, style=1.0, tv=0.1,
                                       temporal=2.0)
        self.crefs = content_targets(self.net, rng.random((16, 16, 3)),
                                     self.weights.content)
        self.srefs = style_targets(self.net, rng.random((16, 16, 3)),
                                   self.weights.style)
        self.trefs = (TemporalRef(rng.random((16, 16, 3)),
                                  rng.random((16, 16)) > 0.3),)

    def test_components_sum_to_total(self):
        rep = total_energy(self.net, self.x, self.weights, self.crefs,
                           self.srefs, self.trefs)
        assert rep.total == pytest.approx(sum(rep.components.values()))
        assert all(v >= 0.0 for v in rep.components.values())

    def test_layer_detail_sums_to_component(self):
        rep = total_energy(self.net, self.x, self.weights, self.crefs,
                           self.srefs, self.trefs)
        assert sum(rep.content_layers.values()) == pytest.approx(
            rep.components["content"])
        assert sum(rep.style_layers.values()) == pytest.approx(
            rep.components["style"])

    def test_gradient_matches_finite_differences(self):
        rep = total_energy(self.net, self.x, self.weights, self.crefs,
                           self.srefs, self.trefs)
        h = 1e-3
        rng = np.random.default_rng(8)
        flat = rng.choice(self.x.size, size=40, replace=False)
        for lin in flat:
            idx = np.unravel_index(lin, self.x.shape)
            xp = self.x.copy()
            xp[idx] += h
            xm = self.x.copy()
            xm[idx] -= h
            ep = total_energy(self.net, xp, self.weights, self.crefs,
                              self.srefs, self.trefs, want_gradient=False).total
            em = total_energy(self.net, xm, self.weights, self.crefs,
                              self.srefs, self.trefs, want_gradient=False).total
            fd = (ep - em) / (2 * h)
            assert rep.gradient[idx] == pytest.approx(fd, rel=1e-4, abs=1e-9)

    def test_want_gradient_false_skips_gradient(self):
        rep = total_energy(self.net, self.x, self.weights, self.crefs,
                           self.srefs, self.trefs, want_gradient=False)
        assert rep.gradient is None

    def test_zero_weight_layers_not_evaluated(self):
        w = EnergyWeights(content={"conv4_2": 0.0}, style={"conv1_1": 1.0})
        # no content target supplied: must not be needed at weight zero
        rep = total_energy(self.net, self.x, w, {},
                           style_targets(self.net, self.x, ["conv1_1"]))
        assert rep.components["content"] == 0.0

    def test_two_temporal_refs_add(self):
        one = total_energy(self.net, self.x, self.weights, self.crefs,
                           self.srefs, self.trefs, want_gradient=False)
        two = total_energy(self.net, self.x, self.weights, self.crefs,
                           self.srefs, self.trefs * 2, want_gradient=False)
        base = total_energy(self.net, self.x, self.weights, self.crefs,
                            self.srefs, (), want_gradient=False)
        single = one.components["temporal"] - base.components["temporal"]
        double = two.components["temporal"] - base.components["temporal"]
        assert double == pytest.approx(2 * single)


class TestAutoBalance:
    def test_hand_case(self):
        factors = balance_factors(
            {"content": 100.0, "style": 1.0, "tv": 0.0, "temporal": 2.0})
        # style and temporal lift to 5% of the rebalanced total 100/0.9
        assert factors["content"] == 1.0
        assert factors["style"] == pytest.approx(0.05 * (100 / 0.9) / 1.0)
        assert factors["temporal"] == pytest.approx(0.05 * (100 / 0.9) / 2.0)
        assert factors["tv"] == 1.0  # inactive, left alone

    def test_boosting_can_cascade(self):
        # lifting the tiny term pushes the middle one under the line too
        values = {"content": 90.0, "style": 4.9, "tv": 0.01, "temporal": 0.0}
        factors = balance_factors(values)
        new = {k: v * factors[k] for k, v in values.items()}
        total = sum(new.values())
        assert new["style"] == pytest.approx(0.05 * total)
        assert new["tv"] == pytest.approx(0.05 * total)

    def test_every_active_term_reaches_share(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            values = {name: float(v) for name, v in zip(
                ("content", "style", "tv", "temporal"),
                rng.random(4) * rng.choice([0.001, 1.0, 1000.0], size=4))}
            factors = balance_factors(values)
            new = {k: v * factors[k] for k, v in values.items()}
            total = sum(new.values())
            for k, v in values.items():
                if v > 0:
                    assert new[k] >= 0.05 * total * (1 - 1e-9)
                    assert factors[k] >= 1.0

    def test_idempotent(self):
        values = {"content": 100.0, "style": 1.0, "tv": 0.5, "temporal": 2.0}
        factors = balance_factors(values)
        balanced = {k: v * factors[k] for k, v in values.items()}
        again = balance_factors(balanced)
        for v in again.values():
            assert v == pytest.approx(1.0)

    def test_all_zero_raises(self):
        with pytest.raises(AllTermsZero):
            balance_factors({"content": 0.0, "style": 0.0})

    def test_weights_scale_preserves_layer_ratios(self):
        w = default_weights(content=1.0, style=1.0, tv=0.0, temporal=0.1)
        out = auto_balance_weights(w, {"content": 100.0, "style": 1.0,
                                       "tv": 0.0, "temporal": 0.01})
        ratio_before = w.style["conv1_1"] / w.style["conv5_1"]
        ratio_after = out.style["conv1_1"] / out.style["conv5_1"]
        assert ratio_after == pytest.approx(ratio_before)
        assert out.style["conv1_1"] > w.style["conv1_1"]
        assert out.content == w.content
