import math

import numpy as np
import pytest

from invlab.network import (
    DimensionError,
    LayerWeights,
    Network,
    affine_net,
    concat,
    extend_depth,
    full_parallelize,
    identity_net,
    load_network,
    metrics,
    network,
    parallelize,
    realize,
    realize_batch,
    save_network,
)


def random_net(rng, input_dim=None, depth=None, max_width=6, sparsity=0.3):
    input_dim = input_dim or rng.integers(1, 5)
    depth = depth or rng.integers(1, 5)
    widths = [input_dim] + [int(rng.integers(1, max_width + 1)) for _ in range(depth)]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        m = rng.standard_normal((fan_out, fan_in))
        m[rng.random(m.shape) < sparsity] = 0.0
        b = rng.standard_normal(fan_out)
        b[rng.random(b.shape) < sparsity] = 0.0
        layers.append(LayerWeights(m, b))
    return Network(tuple(layers), int(input_dim))


def test_realize_single_affine_layer():
    net = network([(np.array([[1.0]]), np.array([0.0]))])
    assert realize(net, [3.0]) == pytest.approx([3.0])


def test_realize_identity_decomposition():
    net = network([
        (np.array([[1.0], [-1.0]]), np.zeros(2)),
        (np.array([[1.0, -1.0]]), np.zeros(1)),
    ])
    assert realize(net, [-2.0]) == pytest.approx([-2.0])
    assert realize(net, [5.0]) == pytest.approx([5.0])


def test_realize_hand_evaluated_relu():
    # relu(x - 1) then 2h + 3
    net = network([
        (np.array([[1.0]]), np.array([-1.0])),
        (np.array([[2.0]]), np.array([3.0])),
    ])
    assert realize(net, [0.5]) == pytest.approx([3.0])
    assert realize(net, [2.0]) == pytest.approx([5.0])


def test_network_interface_validation():
    good = LayerWeights(np.ones((2, 3)), np.zeros(2))
    with pytest.raises(DimensionError):
        Network((good,), input_dim=2)  # expects 3 inputs
    with pytest.raises(DimensionError):
        LayerWeights(np.ones((2, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        LayerWeights(np.array([[np.inf]]), np.zeros(1))
    with pytest.raises(DimensionError):
        realize(network([(np.ones((1, 2)), np.zeros(1))]), [1.0, 2.0, 3.0])


def test_concat_matches_sequential_evaluation():
    rng = np.random.default_rng(7)
    for _ in range(30):
        phi2 = random_net(rng)
        phi1 = random_net(rng, input_dim=phi2.output_dim)
        comp = concat(phi1, phi2)
        assert comp.depth == phi1.depth + phi2.depth
        xs = rng.standard_normal((40, phi2.input_dim))
        got = realize_batch(comp, xs)
        want = realize_batch(phi1, realize_batch(phi2, xs))
        scale = 1.0 + np.abs(want)
        assert (np.abs(got - want) / scale).max() <= 1e-12


def test_concat_weight_bounds():
    rng = np.random.default_rng(11)
    for _ in range(100):
        phi2 = random_net(rng)
        phi1 = random_net(rng, input_dim=phi2.output_dim)
        m1, m2, mc = metrics(phi1), metrics(phi2), metrics(concat(phi1, phi2))
        assert mc["W"] <= 2 * m1["W"] + 2 * m2["W"]
        # the junction construction also satisfies the refined bound
        assert mc["W"] <= m1["W"] + m2["W"] + m1["W_first"] + m2["W_last"]


def test_concat_depth_example():
    rng = np.random.default_rng(3)
    phi2 = random_net(rng, depth=2)
    phi1 = random_net(rng, input_dim=phi2.output_dim, depth=3)
    assert concat(phi1, phi2).depth == 5


def test_concat_interface_mismatch():
    rng = np.random.default_rng(5)
    phi2 = random_net(rng, input_dim=2, depth=2)
    phi1 = random_net(rng, input_dim=phi2.output_dim + 1, depth=2)
    with pytest.raises(DimensionError):
        concat(phi1, phi2)


def test_parallelize_outputs_and_weights():
    rng = np.random.default_rng(13)
    for _ in range(30):
        depth = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        phi1 = random_net(rng, input_dim=d, depth=depth)
        phi2 = random_net(rng, input_dim=d, depth=depth)
        par = parallelize(phi1, phi2)
        xs = rng.standard_normal((40, d))
        got = realize_batch(par, xs)
        want = np.hstack([realize_batch(phi1, xs), realize_batch(phi2, xs)])
        # same arithmetic up to BLAS reassociating the zero-padded dot products
        assert np.allclose(got, want, rtol=1e-13, atol=1e-13)
        assert metrics(par)["W"] == metrics(phi1)["W"] + metrics(phi2)["W"]


def test_parallelize_self_duplicates():
    rng = np.random.default_rng(17)
    phi = random_net(rng, input_dim=3, depth=2)
    par = parallelize(phi, phi)
    x = rng.standard_normal(3)
    out = realize(par, x)
    assert out.size == 2 * phi.output_dim
    assert np.allclose(out[: phi.output_dim], out[phi.output_dim :], rtol=1e-13, atol=1e-13)


def test_parallelize_requires_matching_shape():
    rng = np.random.default_rng(19)
    with pytest.raises(DimensionError):
        parallelize(random_net(rng, input_dim=2, depth=2), random_net(rng, input_dim=2, depth=3))
    with pytest.raises(DimensionError):
        parallelize(random_net(rng, input_dim=2, depth=2), random_net(rng, input_dim=3, depth=2))


def test_full_parallelize_joint_evaluation():
    rng = np.random.default_rng(23)
    for _ in range(30):
        depth = int(rng.integers(1, 4))
        phi1 = random_net(rng, depth=depth)
        phi2 = random_net(rng, depth=depth)
        fp = full_parallelize(phi1, phi2)
        assert fp.input_dim == phi1.input_dim + phi2.input_dim
        xs1 = rng.standard_normal((25, phi1.input_dim))
        xs2 = rng.standard_normal((25, phi2.input_dim))
        got = realize_batch(fp, np.hstack([xs1, xs2]))
        want = np.hstack([realize_batch(phi1, xs1), realize_batch(phi2, xs2)])
        assert np.allclose(got, want, rtol=1e-13, atol=1e-13)
        mfp, m1, m2 = metrics(fp), metrics(phi1), metrics(phi2)
        for key in ("W", "W_first", "W_last"):
            assert mfp[key] == m1[key] + m2[key]


def test_full_parallelize_identity_pair():
    fp = full_parallelize(identity_net(1, 2), identity_net(1, 2))
    assert realize(fp, [3.5, -2.0]) == pytest.approx([3.5, -2.0])


def test_identity_net_exact():
    rng = np.random.default_rng(29)
    assert realize(identity_net(3, 4), [1.0, -2.0, 0.5]) == pytest.approx([1.0, -2.0, 0.5])
    for d, L in [(1, 1), (5, 3), (10, 7)]:
        net = identity_net(d, L)
        assert net.depth == L
        assert metrics(net)["W"] <= 2 * d * L
        xs = rng.standard_normal((10_000, d)) * 3.0
        assert np.array_equal(realize_batch(net, xs), xs)


def test_extend_depth_preserves_realization():
    rng = np.random.default_rng(31)
    phi = random_net(rng, depth=2)
    assert extend_depth(phi, phi.depth) is phi
    xs = rng.standard_normal((1000, phi.input_dim))
    base = realize_batch(phi, xs)
    for target in (3, 5, 8):
        ext = extend_depth(phi, target)
        assert ext.depth == target
        scale = 1.0 + np.abs(base)
        assert (np.abs(realize_batch(ext, xs) - base) / scale).max() <= 1e-12
    with pytest.raises(DimensionError):
        extend_depth(phi, phi.depth - 1)


def test_metrics_counts():
    net = network([(np.ones((3, 2)), np.ones(3))])
    m = metrics(net)
    assert m == {
        "L": 1,
        "W": 9,
        "N": 5,
        "W_first": 9,
        "W_last": 9,
        "architecture": (2, 3),
    }
    zero = network([(np.zeros((3, 2)), np.zeros(3))])
    assert metrics(zero)["W"] == 0


def test_positive_homogeneity_of_hidden_scaling():
    # scaling a hidden layer by c > 0 and the next layer by 1/c leaves the
    # realization unchanged; this fails if ReLU were applied to the last layer
    rng = np.random.default_rng(37)
    for _ in range(20):
        phi = random_net(rng, depth=3)
        c = float(rng.uniform(0.5, 4.0))
        layers = list(phi.layers)
        layers[0] = LayerWeights(layers[0].matrix * c, layers[0].bias * c)
        layers[1] = LayerWeights(layers[1].matrix / c, layers[1].bias)
        scaled = Network(tuple(layers), phi.input_dim)
        xs = rng.standard_normal((50, phi.input_dim))
        want = realize_batch(phi, xs)
        got = realize_batch(scaled, xs)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_piecewise_linearity_locally_constant_slope():
    rng = np.random.default_rng(41)
    checked = 0
    while checked < 20:
        phi = random_net(rng, depth=3)
        x = rng.standard_normal(phi.input_dim)
        direction = rng.standard_normal(phi.input_dim)
        direction /= np.linalg.norm(direction)
        # certify no kink crossing: all preactivations keep a safe margin
        margin_ok = True
        for h in (0.0, 1e-4, 1e-5):
            v = x + h * direction
            for layer in phi.layers[:-1]:
                z = layer.matrix @ v + layer.bias
                if np.abs(z).min() < 1e-3:
                    margin_ok = False
                v = np.maximum(z, 0.0)
        if not margin_ok:
            continue
        checked += 1
        f0 = realize(phi, x)
        s1 = (realize(phi, x + 1e-4 * direction) - f0) / 1e-4
        s2 = (realize(phi, x + 1e-5 * direction) - f0) / 1e-5
        assert np.abs(s1 - s2).max() <= 1e-9 * (1.0 + np.abs(s1).max())


def test_serialization_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(43)
    for i in range(5):
        net = random_net(rng)
        path = tmp_path / f"net{i}.txt"
        save_network(net, path)
        back = load_network(path)
        assert back.input_dim == net.input_dim
        assert back.depth == net.depth
        for a, b in zip(net.layers, back.layers):
            assert np.array_equal(a.matrix, b.matrix)
            assert np.array_equal(a.bias, b.bias)


def test_affine_net():
    net = affine_net(np.array([[2.0, 1.0]]), np.array([-1.0]))
    assert realize(net, [1.0, 3.0]) == pytest.approx([4.0])
