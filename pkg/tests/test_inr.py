"""Funnel network construction, initialization ranges, forward semantics."""

import numpy as np
import pytest

from sincodec.inr import ArchitectureSpec, FunnelNetwork, from_flat, init


def _spec(widths=(22, 10, 10, 10, 10, 10, 1), in_dim=3, w0=20.0, fr=2.2):
    return ArchitectureSpec(tuple(widths), in_dim, w0, fr)


class TestArchitectureSpec:
    def test_param_count_formula(self):
        """Parameters = sum over layers of width * fan_in + width."""
        spec = _spec()
        fans = (3, 22, 10, 10, 10, 10, 10)
        expected = sum(w * f + w for w, f in zip(spec.widths, fans))
        assert spec.n_params == expected == 769

    def test_rejects_single_layer(self):
        with pytest.raises(ValueError):
            ArchitectureSpec((5,), 3)

    def test_layer_count(self):
        assert _spec().n_layers == 7
        assert _spec().out_dim == 1


class TestInit:
    def test_deterministic_per_seed(self):
        a = init(_spec(), seed=7)
        b = init(_spec(), seed=7)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)
        c = init(_spec(), seed=8)
        assert any(
            not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights)
        )

    def test_first_layer_stored_range(self):
        """First layer is stored with the frequency scale folded in:
        values lie in [-w0/in_dim, w0/in_dim] and actually use that range."""
        spec = _spec(w0=20.0, in_dim=3)
        net = init(spec, seed=0)
        w = net.weights[0]
        bound = 20.0 / 3.0
        assert np.all(np.abs(w) <= bound)
        assert np.max(np.abs(w)) > 0.5 * bound

    def test_hidden_layers_stored_range(self):
        """Hidden layers store the pre-scale values: |w| <= sqrt(6/fan)/w0."""
        spec = _spec(w0=20.0)
        net = init(spec, seed=1)
        fans = (3, 22, 10, 10, 10, 10, 10)
        for k in range(1, len(net.weights)):
            bound = np.sqrt(6.0 / fans[k]) / 20.0
            assert np.all(np.abs(net.weights[k]) <= bound), f"layer {k}"

    def test_biases_start_at_zero(self):
        net = init(_spec(), seed=2)
        for b in net.biases:
            assert not np.any(b)

    def test_hidden_preactivation_scale(self):
        """With the forward scale w0 applied, sine-layer pre-activations keep
        unit-order standard deviation (the first layer is excluded: its spread
        is set by w0 and the coordinate range, not by this balance)."""
        spec = _spec(widths=(22, 10, 10, 10, 10, 10, 1))
        net = init(spec, seed=3)
        rng = np.random.default_rng(4)
        x = rng.uniform(-1, 1, size=(8192, 3))
        act = x
        for k in range(net.n_layers - 1):
            pre = net.layer_scale(k) * (act @ net.weights[k].T + net.biases[k])
            if k >= 1:
                assert 0.5 < float(pre.std()) < 2.0, f"layer {k}"
            act = np.sin(pre)


class TestForward:
    def test_matches_hand_composition(self):
        """Stored hidden weights are pre-scale: forward multiplies them by w0.
        A 1x1 chain with W1 = beta/w0 computes exactly sin(beta sin(pi x))."""
        w0 = 30.0
        net = FunnelNetwork(
            [np.array([[np.pi]]), np.array([[1.4 / w0]]), np.array([[2.0]])],
            [np.zeros(1), np.zeros(1), np.zeros(1)],
            w0=w0,
        )
        x = np.linspace(-1, 1, 101)[:, None]
        expected = 2.0 * np.sin(1.4 * np.sin(np.pi * x))
        np.testing.assert_allclose(net.forward(x), expected, atol=1e-12)

    def test_last_layer_is_linear(self):
        """Outputs can leave [-1, 1]; a sine output layer could not."""
        net = FunnelNetwork(
            [np.array([[np.pi]]), np.array([[5.0]])],
            [np.zeros(1), np.zeros(1)],
            w0=1.0,
        )
        x = np.linspace(-1, 1, 64)[:, None]
        assert float(np.abs(net.forward(x)).max()) > 1.0

    def test_sine_activations_bounded(self):
        net = init(_spec(), seed=5)
        rng = np.random.default_rng(6)
        x = rng.uniform(-1, 1, size=(512, 3))
        act = x
        for k in range(net.n_layers - 1):
            act = np.sin(net.layer_scale(k) * (act @ net.weights[k].T + net.biases[k]))
            assert np.all(np.abs(act) <= 1.0)

    def test_repeat_evaluation_is_bit_identical(self):
        net = init(_spec(), seed=7).astype(np.float32)
        rng = np.random.default_rng(8)
        x = rng.uniform(-1, 1, size=(4096, 3)).astype(np.float32)
        np.testing.assert_array_equal(net.forward(x), net.forward(x))

    def test_chunked_evaluation_agrees(self):
        """Fixed-size chunking (what decode does) reproduces the full pass
        within float rounding."""
        net = init(_spec(), seed=9).astype(np.float32)
        rng = np.random.default_rng(10)
        x = rng.uniform(-1, 1, size=(10000, 3)).astype(np.float32)
        full = net.forward(x)
        for chunk in (128, 4096):
            parts = np.concatenate(
                [net.forward(x[i : i + chunk]) for i in range(0, len(x), chunk)]
            )
            np.testing.assert_allclose(parts, full, atol=1e-6)

    def test_rejects_wrong_coord_shape(self):
        net = init(_spec(in_dim=3), seed=0)
        with pytest.raises(ValueError):
            net.forward(np.zeros((10, 2)))


class TestFlatLayout:
    def test_roundtrip_bit_exact(self):
        spec = _spec()
        net = init(spec, seed=11)
        flat = net.to_flat()
        assert flat.shape == (spec.n_params,)
        back = from_flat(spec, flat.copy())
        for a, b in zip(net.weights, back.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(net.biases, back.biases):
            np.testing.assert_array_equal(a, b)

    def test_layout_is_weights_then_bias_per_layer(self):
        """Per layer: weight rows (row-major) then the bias vector."""
        net = FunnelNetwork(
            [np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0, 6.0]])],
            [np.array([7.0, 8.0]), np.array([9.0])],
            w0=1.0,
        )
        np.testing.assert_array_equal(
            net.to_flat(), [1, 2, 3, 4, 7, 8, 5, 6, 9]
        )

    def test_from_flat_validates_length(self):
        spec = _spec()
        with pytest.raises(ValueError):
            from_flat(spec, np.zeros(spec.n_params - 1))

    def test_param_arrays_are_live_views(self):
        """Optimizer updates write through to the network."""
        net = init(_spec(), seed=12)
        arrays = net.param_arrays()
        arrays[0][:] = 0.0
        assert not np.any(net.weights[0])

    def test_spec_roundtrip(self):
        spec = _spec(widths=(9, 4, 4, 1), in_dim=2, w0=15.0, fr=2.2)
        net = init(spec, seed=13)
        assert net.spec() == spec


class TestValidation:
    def test_shape_chain_mismatch_rejected(self):
        with pytest.raises(ValueError):
            FunnelNetwork(
                [np.zeros((4, 3)), np.zeros((2, 5))],
                [np.zeros(4), np.zeros(2)],
                w0=1.0,
            )

    def test_bias_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            FunnelNetwork(
                [np.zeros((4, 3)), np.zeros((1, 4))],
                [np.zeros(3), np.zeros(1)],
                w0=1.0,
            )
