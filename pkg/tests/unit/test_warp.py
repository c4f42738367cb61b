"""Tests fuer Warping-Einheiten und die komponierte Abbildung (domain/warp.py)."""

import math

import numpy as np
import pytest

from deepwarp.domain.core import (
    DegenerateWarpError,
    Domain,
    InvalidParameterError,
    KnotSet,
    LocationSet,
    RngStream,
)
from deepwarp.domain.warp import (
    RBF_IDENTITY_TWEIGHT,
    RbfLayer,
    ScalingRecord,
    WarpStack,
    awu_forward,
    build_sr_rbf,
    compose_mobius,
    injectivity_check,
    make_awu,
    make_mobius,
    mobius_forward,
    rbf_forward,
    rescale,
    sigmoid,
    warp_forward,
    warp_gradient,
)

UNIT_2D = Domain.unit(2)
LINE = Domain(lower=(-0.5,), upper=(0.5,))


def _make_stack_2d(rng, *, n_knots=40, spread=0.3):
    """AWU x2 + SR-RBF(1) + Moebius mit zufaelligen, zulaessigen Gewichten."""
    layers = [make_awu(0, 11, UNIT_2D), make_awu(1, 11, UNIT_2D)]
    layers += build_sr_rbf(1, UNIT_2D)
    a = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]) + 0.1 * rng.normal(8)
    layers.append(make_mobius(UNIT_2D, a))
    stack = WarpStack(
        layers=tuple(layers),
        knots=KnotSet(rng.uniform(0.0, 1.0, (n_knots, 2))),
        domain=UNIT_2D,
    )
    params = stack.params()
    mask = stack.random_mask()
    params[mask] = params[mask] + spread * rng.normal(int(mask.sum()))
    return stack.with_params(params)


def _objective(stack, params, locations, cotangent):
    out, _ = warp_forward(stack.with_params(params), locations)
    return float(np.sum(cotangent * out.coords))


def _finite_difference(stack, locations, cotangent, step=1e-5):
    theta = stack.params()
    grad = np.empty_like(theta)
    for i in range(theta.shape[0]):
        plus = theta.copy()
        minus = theta.copy()
        plus[i] += step
        minus[i] -= step
        grad[i] = (
            _objective(stack, plus, locations, cotangent)
            - _objective(stack, minus, locations, cotangent)
        ) / (2.0 * step)
    return grad


class TestSigmoid:
    """Tests fuer die Sigmoid-Basisfunktion."""

    def test_center_is_half(self):
        assert sigmoid(0.3, 200.0, 0.3) == pytest.approx(0.5)

    def test_saturates(self):
        assert sigmoid(50.0, 200.0, 0.0) == pytest.approx(1.0)
        assert sigmoid(-50.0, 200.0, 0.0) == pytest.approx(0.0)

    def test_steep_value(self):
        expected = 1.0 / (1.0 + math.exp(-20.0))
        assert sigmoid(0.5, 200.0, 0.4) == pytest.approx(expected, rel=1e-12)

    def test_array_increasing(self):
        values = sigmoid(np.linspace(-1.0, 1.0, 50), 5.0, 0.0)
        assert np.all(np.diff(values) > 0)

    def test_non_positive_steepness_rejected(self):
        with pytest.raises(InvalidParameterError):
            sigmoid(0.0, 0.0, 0.0)


class TestAwu:
    """Tests fuer axiale Warping-Einheiten."""

    def test_identity_when_sigmoids_off(self):
        layer = make_awu(0, 5, LINE)
        layer = layer.with_params(np.array([0.0, -1e3, -1e3, -1e3, -1e3]))
        x = LocationSet(np.linspace(-0.5, 0.5, 11))
        np.testing.assert_allclose(awu_forward(layer, x).coords, x.coords, atol=1e-12)

    def test_single_sigmoid_value(self):
        layer = make_awu(0, 2, Domain(lower=(0.5,), upper=(1.0,)))
        layer = layer.with_params(np.array([0.0, 0.0]))
        # r = 2: ein Sigmoid mit Wendepunkt am unteren Rand (0.5)
        out = awu_forward(layer, LocationSet(np.array([0.5])))
        assert out.coords[0, 0] == pytest.approx(1.0)

    def test_second_axis_untouched(self):
        rng = RngStream(0)
        layer = make_awu(0, 11, UNIT_2D)
        layer = layer.with_params(rng.normal(11))
        pts = rng.uniform(0.0, 1.0, (30, 2))
        out = awu_forward(layer, LocationSet(pts))
        np.testing.assert_array_equal(out.coords[:, 1], pts[:, 1])

    def test_strictly_increasing_for_random_weights(self):
        rng = RngStream(1)
        layer = make_awu(0, 51, LINE)
        layer = layer.with_params(rng.normal(51) - 2.0)
        grid = np.linspace(-0.5, 0.5, 1001)
        out = awu_forward(layer, LocationSet(grid)).coords[:, 0]
        assert np.all(np.diff(out) > 0)

    def test_weights_positive(self):
        layer = make_awu(0, 51, LINE).with_params(RngStream(2).normal(51) * 5.0)
        assert np.all(layer.weights > 0)

    def test_axis_outside_dimension_rejected(self):
        with pytest.raises(InvalidParameterError):
            make_awu(1, 5, LINE)


class TestRbf:
    """Tests fuer RBF-Einheiten und SR-RBF-Bloecke."""

    def test_identity_tweight_gives_zero_weight(self):
        layer = RbfLayer(centroid=np.array([0.5, 0.5]), scale=8.0, tweight=RBF_IDENTITY_TWEIGHT)
        assert layer.weight == pytest.approx(0.0, abs=1e-12)

    def test_weight_bounds(self):
        upper = RbfLayer(centroid=np.zeros(2), scale=1.0, tweight=50.0).weight
        lower = RbfLayer(centroid=np.zeros(2), scale=1.0, tweight=-50.0).weight
        assert upper == pytest.approx(math.exp(1.5) / 2.0)
        assert lower == pytest.approx(-1.0)

    def test_centroid_is_fixed_point(self):
        layer = RbfLayer(centroid=np.array([0.3, 0.6]), scale=8.0, tweight=2.0)
        out = rbf_forward(layer, LocationSet(np.array([[0.3, 0.6]])))
        np.testing.assert_allclose(out.coords, [[0.3, 0.6]])

    def test_known_value(self):
        layer = RbfLayer(
            centroid=np.array([0.5, 0.5]), scale=8.0, tweight=0.0, forced_weight=1.0
        )
        out = rbf_forward(layer, LocationSet(np.array([[0.75, 0.5]])))
        np.testing.assert_allclose(out.coords, [[0.75 + 0.25 * math.exp(-0.5), 0.5]])

    def test_one_dimensional_input_rejected(self):
        layer = RbfLayer(centroid=np.zeros(2), scale=1.0, tweight=0.0)
        with pytest.raises(InvalidParameterError):
            rbf_forward(layer, LocationSet(np.array([0.1, 0.2])))

    @pytest.mark.parametrize(("resolution", "count", "scale"), [(1, 9, 8.0), (2, 81, 128.0)])
    def test_sr_rbf_layout(self, resolution, count, scale):
        layers = build_sr_rbf(resolution)
        assert len(layers) == count
        assert all(layer.scale == pytest.approx(scale) for layer in layers)
        assert all(layer.weight == pytest.approx(0.0, abs=1e-12) for layer in layers)

    def test_sr_rbf_row_major(self):
        layers = build_sr_rbf(1)
        np.testing.assert_allclose(layers[0].centroid, [0.0, 0.0])
        np.testing.assert_allclose(layers[1].centroid, [0.5, 0.0])
        np.testing.assert_allclose(layers[3].centroid, [0.0, 0.5])

    def test_composition_differs_from_summed_displacements(self):
        rng = RngStream(3)
        first = RbfLayer(centroid=np.array([0.4, 0.5]), scale=8.0, tweight=1.5)
        second = RbfLayer(centroid=np.array([0.6, 0.4]), scale=8.0, tweight=-1.0)
        x = rng.uniform(0.0, 1.0, (50, 2))
        composed = second.forward(first.forward(x))
        summed = x + (first.forward(x) - x) + (second.forward(x) - x)
        assert not np.allclose(composed, summed, atol=1e-6)


class TestMobius:
    """Tests fuer Moebius-Einheiten."""

    def test_identity(self):
        pts = RngStream(0).uniform(0.0, 1.0, (10, 2))
        out = mobius_forward(make_mobius(), LocationSet(pts))
        np.testing.assert_allclose(out.coords, pts)

    def test_translation(self):
        layer = make_mobius(a=(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0))
        out = mobius_forward(layer, LocationSet(np.array([[0.2, 0.3]])))
        np.testing.assert_allclose(out.coords, [[1.2, 0.3]])

    def test_scaling(self):
        layer = make_mobius(a=(2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0))
        out = mobius_forward(layer, LocationSet(np.array([[0.5, 0.5]])))
        np.testing.assert_allclose(out.coords, [[1.0, 1.0]])

    def test_pole_inside_square_rejected(self):
        # a3 = 1, a4 = -(0.5 + 0.5i): Pol bei (0.5, 0.5)
        layer = make_mobius(a=(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.5, -0.5))
        assert layer.pole_violated()
        with pytest.raises(InvalidParameterError):
            mobius_forward(layer, LocationSet(np.array([[0.1, 0.1]])))

    def test_pole_outside_square_accepted(self):
        layer = make_mobius(a=(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 3.0, 0.0))
        assert not layer.pole_violated()

    def test_composition_is_single_mobius(self):
        rng = RngStream(4)
        identity = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        first = make_mobius(a=identity + 0.05 * rng.normal(8))
        second = make_mobius(a=identity + 0.05 * rng.normal(8))
        pts = rng.uniform(0.0, 1.0, (100, 2))
        sequential = second.forward(first.forward(pts))
        single = compose_mobius(first, second).forward(pts)
        np.testing.assert_allclose(single, sequential, atol=1e-10)


class TestRescale:
    """Tests fuer die affine Reskalierung ueber Knotenextreme."""

    def test_knots_map_to_unit_interval(self):
        knots = np.array([[-0.5], [0.0], [0.5]])
        record = ScalingRecord.from_knot_image(knots)
        out = rescale(LocationSet(knots), record)
        np.testing.assert_allclose(out.coords[:, 0], [0.0, 0.5, 1.0])

    def test_non_knot_points_may_leave_interval(self):
        record = ScalingRecord.from_knot_image(np.array([[0.0], [1.0]]))
        out = rescale(LocationSet(np.array([2.0])), record)
        assert out.coords[0, 0] == pytest.approx(2.0)

    def test_idempotent_on_knot_extremes(self):
        knots = RngStream(5).uniform(-3.0, 7.0, (20, 2))
        once = rescale(LocationSet(knots), ScalingRecord.from_knot_image(knots))
        twice = rescale(once, ScalingRecord.from_knot_image(once.coords))
        np.testing.assert_allclose(twice.coords, once.coords, atol=1e-14)

    def test_degenerate_knot_image(self):
        with pytest.raises(DegenerateWarpError) as excinfo:
            ScalingRecord.from_knot_image(np.array([[0.5], [0.5]]), layer_index=3)
        assert excinfo.value.layer_index == 3


class TestWarpForward:
    """Tests fuer die Vorwaertsauswertung des Stacks."""

    def test_empty_stack_is_identity(self):
        pts = RngStream(0).uniform(-0.5, 0.5, (15, 1))
        stack = WarpStack(layers=(), knots=KnotSet(pts), domain=LINE)
        out, images = warp_forward(stack, LocationSet(pts))
        np.testing.assert_array_equal(out.coords, pts)
        assert images == []

    def test_initial_sr_rbf_is_affine_rescale(self):
        rng = RngStream(1)
        knots = rng.uniform(0.1, 0.9, (30, 2))
        stack = WarpStack(layers=tuple(build_sr_rbf(1)), knots=KnotSet(knots), domain=UNIT_2D)
        pts = rng.uniform(0.1, 0.9, (10, 2))
        out, images = warp_forward(stack, LocationSet(pts))
        lo, hi = knots.min(axis=0), knots.max(axis=0)
        np.testing.assert_allclose(out.coords, (pts - lo) / (hi - lo), atol=1e-12)
        assert len(images) == 9

    def test_knot_images_span_unit_square(self):
        stack = _make_stack_2d(RngStream(2))
        _, images = warp_forward(stack, LocationSet(stack.knots.coords))
        for image in images:
            np.testing.assert_allclose(image.coords.min(axis=0), [0.0, 0.0], atol=1e-12)
            np.testing.assert_allclose(image.coords.max(axis=0), [1.0, 1.0], atol=1e-12)

    def test_layer_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            WarpStack(
                layers=(make_awu(0, 5, LINE),),
                knots=KnotSet(np.array([[0.0, 0.0], [1.0, 1.0]])),
                domain=UNIT_2D,
            )


class TestWarpGradient:
    """Tests fuer exakte Gradienten gegen zentrale Differenzen."""

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed):
        rng = RngStream(seed)
        stack = _make_stack_2d(rng, n_knots=25)
        locations = LocationSet(rng.uniform(0.0, 1.0, (15, 2)))
        cotangent = rng.normal((15, 2))
        exact = warp_gradient(stack, locations, cotangent)
        numeric = _finite_difference(stack, locations, cotangent)
        scale = max(float(np.max(np.abs(numeric))), 1e-8)
        assert np.max(np.abs(exact - numeric)) / scale < 1e-4

    def test_one_dimensional_awu(self):
        rng = RngStream(7)
        knots = KnotSet(rng.uniform(-0.5, 0.5, (20, 1)))
        stack = WarpStack(
            layers=(make_awu(0, 21, LINE, steepness=20.0),), knots=knots, domain=LINE
        )
        stack = stack.with_params(rng.normal(21) - 1.0)
        locations = LocationSet(rng.uniform(-0.5, 0.5, (12, 1)))
        cotangent = rng.normal((12, 1))
        exact = warp_gradient(stack, locations, cotangent)
        numeric = _finite_difference(stack, locations, cotangent)
        np.testing.assert_allclose(exact, numeric, rtol=1e-4, atol=1e-7)

    def test_switched_off_sigmoid_has_no_gradient(self):
        knots = KnotSet(np.linspace(-0.5, 0.5, 9))
        stack = WarpStack(layers=(make_awu(0, 3, LINE),), knots=knots, domain=LINE)
        stack = stack.with_params(np.array([0.0, -60.0, 0.0]))
        locations = LocationSet(np.array([-0.2, 0.1, 0.3]))
        grad = warp_gradient(stack, locations, np.ones((3, 1)))
        assert abs(grad[1]) < 1e-20

    def test_empty_stack(self):
        stack = WarpStack(layers=(), knots=KnotSet(np.array([0.0, 1.0])), domain=LINE)
        grad = warp_gradient(stack, LocationSet(np.array([0.5])), np.ones((1, 1)))
        assert grad.shape == (0,)


class TestInjectivity:
    """Tests fuer die numerische Injektivitaetspruefung."""

    def test_identity_passes(self):
        stack = WarpStack(layers=(), knots=KnotSet(np.array([[0.0, 0.0], [1.0, 1.0]])),
                          domain=UNIT_2D)
        assert injectivity_check(stack, 16).passed

    def test_awu_passes_for_any_draw(self):
        rng = RngStream(8)
        knots = KnotSet(np.linspace(-0.5, 0.5, 11))
        for _ in range(10):
            stack = WarpStack(layers=(make_awu(0, 51, LINE),), knots=knots, domain=LINE)
            stack = stack.with_params(rng.normal(51))
            report = injectivity_check(stack, 1001)
            assert report.passed
            assert report.statistic > 0

    def test_forced_rbf_weight_folds(self):
        layer = RbfLayer(
            centroid=np.array([0.5, 0.5]), scale=8.0, tweight=0.0, forced_weight=3.0
        )
        knots = KnotSet(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]))
        stack = WarpStack(layers=(layer,), knots=knots, domain=UNIT_2D)
        assert not injectivity_check(stack, 64).passed

    def test_grid_too_coarse_rejected(self):
        stack = WarpStack(layers=(), knots=KnotSet(np.array([0.0, 1.0])), domain=LINE)
        with pytest.raises(InvalidParameterError):
            injectivity_check(stack, 8)

    def test_random_stacks_pass(self):
        rng = RngStream(9)
        for _ in range(25):
            assert injectivity_check(_make_stack_2d(rng, spread=0.6), 16).passed

    @pytest.mark.slow
    def test_thousand_random_stacks_pass(self):
        rng = RngStream(10)
        for _ in range(1000):
            assert injectivity_check(_make_stack_2d(rng, spread=0.6), 16).passed
