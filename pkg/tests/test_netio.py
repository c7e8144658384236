from __future__ import annotations

import json
import math

import numpy as np
import pytest

from certirl.netio import (
    NetworkFormatError,
    NetworkSpec,
    NetworkValidationError,
    forward,
    forward_batch,
    input_gradient,
    load_network,
    save_network,
    softmax,
)

from conftest import FIXTURE_DIR, make_linear_net, make_random_net


def identity_net() -> NetworkSpec:
    return make_linear_net(np.eye(2), np.zeros(2))


class TestLoadNetwork:
    def test_cartpole_fixture_shape(self, cartpole_fixture_path):
        net = load_network(cartpole_fixture_path)
        assert net.input_dim == 4
        assert net.num_actions == 2
        assert net.hidden_widths == (4, 4)
        assert net.num_layers == 3

    def test_dimension_mismatch_names_layer(self, tmp_path):
        doc = {
            "input_dim": 2,
            "action_labels": ["a", "b"],
            "layers": [
                {"weights": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.0, 0.0]},
                {"weights": [[1.0, 0.0, 0.0]], "bias": [0.0]},  # 3 cols vs 2 rows above
                {"weights": [[1.0], [1.0]], "bias": [0.0, 0.0]},
            ],
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(NetworkValidationError, match="layer 2"):
            load_network(path)

    def test_single_layer_identity(self, tmp_path):
        doc = {
            "input_dim": 2,
            "action_labels": ["a", "b"],
            "layers": [{"weights": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.0, 0.0]}],
        }
        path = tmp_path / "id.json"
        path.write_text(json.dumps(doc))
        net = load_network(path)
        assert net.num_layers == 1
        np.testing.assert_array_equal(forward(net, np.array([3.0, -1.0])), [3.0, -1.0])

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text(json.dumps({"input_dim": 1, "layers": []}))
        with pytest.raises(NetworkFormatError, match="action_labels"):
            load_network(path)

    def test_non_numeric_weights_named(self, tmp_path):
        doc = {
            "input_dim": 1,
            "action_labels": ["a"],
            "layers": [{"weights": [["x"]], "bias": [0.0]}],
        }
        path = tmp_path / "nonnum.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(NetworkFormatError, match="layer 1 field 'weights'"):
            load_network(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(NetworkFormatError):
            load_network(path)

    def test_nonfinite_rejected(self):
        with pytest.raises(NetworkValidationError, match="layer 1"):
            NetworkSpec(((np.array([[np.inf]]), np.zeros(1)),), 1, ("a",))


class TestSaveRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path, rng):
        net = make_random_net(rng)
        path = tmp_path / "net.json"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.input_dim == net.input_dim
        assert loaded.action_labels == net.action_labels
        for (w0, b0), (w1, b1) in zip(net.layers, loaded.layers):
            np.testing.assert_array_equal(w0, w1)
            np.testing.assert_array_equal(b0, b1)

    def test_seventeen_digit_serialization(self, tmp_path):
        w = np.array([[1.0 / 3.0]])
        net = make_linear_net(w, np.array([0.1]))
        path = tmp_path / "digits.json"
        save_network(net, path)
        text = path.read_text()
        assert "0.33333333333333331" in text


class TestForward:
    def test_identity(self):
        np.testing.assert_array_equal(forward(identity_net(), [1.0, 2.0]), [1.0, 2.0])

    def test_hand_relu_trace(self):
        # relu(3) + relu(-3) through W1 = [[1], [-1]]
        net = NetworkSpec(
            (
                (np.array([[1.0], [-1.0]]), np.zeros(2)),
                (np.array([[1.0, 1.0]]), np.zeros(1)),
            ),
            1,
            ("a",),
        )
        np.testing.assert_allclose(forward(net, [3.0]), [3.0])
        np.testing.assert_allclose(forward(net, [-3.0]), [3.0])

    def test_fixture_recorded_value(self, cartpole_fixture_path):
        expected = json.loads(
            (FIXTURE_DIR / "cartpole_dqn.expected.json").read_text()
        )
        net = load_network(cartpole_fixture_path)
        q = forward(net, np.array(expected["obs"]))
        np.testing.assert_allclose(q, expected["q"], rtol=0, atol=1e-12)

    def test_pure_function(self, rng):
        net = make_random_net(rng)
        obs = rng.normal(size=net.input_dim)
        np.testing.assert_array_equal(forward(net, obs), forward(net, obs))

    def test_batch_matches_single(self, rng):
        net = make_random_net(rng)
        xs = rng.normal(size=(32, net.input_dim))
        batch = forward_batch(net, xs)
        for i in range(32):
            np.testing.assert_allclose(batch[i], forward(net, xs[i]), atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            forward(identity_net(), [1.0, 2.0, 3.0])


class TestInputGradient:
    def test_symmetric_softmax_linear(self):
        # Q1 == Q2 -> softmax is (0.5, 0.5); gradient = (softmax - onehot) @ W
        g = input_gradient(identity_net(), [0.7, 0.7], [1.0, 0.0])
        np.testing.assert_allclose(g, [-0.5, 0.5], atol=1e-15)

    def test_finite_difference_oracle(self, rng):
        h = 1e-5
        checked = 0
        for _ in range(20):
            net = make_random_net(rng)
            obs = rng.normal(size=net.input_dim)
            # skip points too close to a ReLU kink for clean central differences
            kink = False
            x = obs.copy()
            for k, (w, b) in enumerate(net.layers):
                z = w @ x + b
                if k < net.num_layers - 1:
                    if np.any(np.abs(z) < 1e-3):
                        kink = True
                        break
                    x = np.maximum(z, 0.0)
            if kink:
                continue
            target = np.zeros(net.num_actions)
            target[int(rng.integers(net.num_actions))] = 1.0
            grad = input_gradient(net, obs, target)

            def loss(point):
                p = softmax(forward(net, point))
                return -float(np.log(p[np.argmax(target)]))

            for i in range(net.input_dim):
                step = np.zeros(net.input_dim)
                step[i] = h
                fd = (loss(obs + step) - loss(obs - step)) / (2 * h)
                denom = max(abs(fd), abs(grad[i]), 1e-8)
                assert abs(fd - grad[i]) / denom < 1e-4
            checked += 1
        assert checked >= 5

    def test_permutation_equivariance(self, rng):
        net = make_random_net(rng, num_actions=3)
        obs = rng.normal(size=net.input_dim)
        target = np.array([0.0, 1.0, 0.0])
        g = input_gradient(net, obs, target)
        perm = [2, 0, 1]
        w_last, b_last = net.layers[-1]
        permuted = NetworkSpec(
            net.layers[:-1] + ((w_last[perm], b_last[perm]),),
            net.input_dim,
            tuple(net.action_labels[i] for i in perm),
        )
        g_perm = input_gradient(permuted, obs, target[perm])
        np.testing.assert_allclose(g, g_perm, atol=1e-14)

    def test_rejects_non_onehot(self):
        with pytest.raises(ValueError):
            input_gradient(identity_net(), [0.0, 0.0], [0.5, 0.5])
