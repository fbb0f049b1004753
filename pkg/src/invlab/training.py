"""Noisy dataset generation and from-scratch MLP regression.

Datasets pair noisy forward measurements with the coefficient vectors that
produced them; training minimizes the mean squared Euclidean error with
minibatch gradient descent and an adaptive-moment optimizer (two accumulators
with bias correction).  Everything is plain numpy and fully deterministic
given the three seeds involved (dataset, initialization, shuffling).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from invlab.network import LayerWeights, Network, realize_batch
from invlab.quadrature import DEFAULT_QUAD, QuadratureSpec
from invlab.sampling import ProblemSpec, ftilde_batch


class TrainingDivergence(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class DatasetMeta:
    spec: ProblemSpec
    delta: float
    seed: object
    m: int


@dataclass(frozen=True)
class Dataset:
    """Rows of (noisy measurement, coefficient vector) with generation metadata."""

    inputs: np.ndarray
    targets: np.ndarray
    meta: DatasetMeta

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have matching row counts")
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise ValueError("dataset contains non-finite entries")

    @property
    def m(self) -> int:
        return self.inputs.shape[0]


def gen_dataset(spec: ProblemSpec, delta: float, m: int, seed,
                quad: QuadratureSpec = DEFAULT_QUAD) -> Dataset:
    """Draw m coefficient vectors uniformly from the box and perturb their measurements.

    Noise is Gaussian, independent per component, with standard deviation delta.
    ``seed`` may be an int or a tuple of ints (used as SeedSequence entropy).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    root = np.random.SeedSequence(seed)
    s_alpha, s_noise = root.spawn(2)
    lo, hi = spec.coefficient_box
    alphas = np.random.default_rng(s_alpha).uniform(lo, hi, size=(m, spec.d))
    clean = ftilde_batch(spec, alphas, quad)
    if delta > 0:
        clean = clean + np.random.default_rng(s_noise).normal(0.0, delta, size=clean.shape)
    return Dataset(clean, alphas, DatasetMeta(spec, float(delta), seed, m))


@dataclass(frozen=True)
class TrainConfig:
    hidden_layers: int = 4
    width: int = 100
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    # exponential decay: lr at the final epoch equals learning_rate * final_lr_fraction
    final_lr_fraction: float = 1.0
    # train on per-component standardized inputs; the affine rescaling is folded
    # into the first layer of the returned network, which acts on raw inputs
    normalize_inputs: bool = True
    seed: object = 0

    def __post_init__(self):
        if min(self.hidden_layers, self.width, self.epochs, self.batch_size) < 1:
            raise ValueError("hidden_layers, width, epochs, batch_size must be positive")
        if self.learning_rate <= 0 or not 0 < self.final_lr_fraction <= 1:
            raise ValueError("invalid learning-rate settings")


@dataclass(frozen=True)
class TrainedModel:
    network: Network
    history: np.ndarray  # mean train loss per epoch
    config: TrainConfig
    dataset_meta: DatasetMeta
    final_test_mse: float | None = None

    @property
    def max_abs_weight(self) -> float:
        return max(
            max(np.abs(l.matrix).max(), np.abs(l.bias).max() if l.bias.size else 0.0)
            for l in self.network.layers
        )


def init_mlp(input_dim: int, output_dim: int, config: TrainConfig, seed=None) -> Network:
    """He-style initialization: weights N(0, 2/fan_in), zero biases."""
    if input_dim < 1 or output_dim < 1:
        raise ValueError("dimensions must be positive")
    if seed is None:
        seed = np.random.SeedSequence(config.seed)
    elif not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    rng = np.random.default_rng(seed)
    widths = [input_dim] + [config.width] * config.hidden_layers + [output_dim]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append(LayerWeights(w, np.zeros(fan_out)))
    return Network(tuple(layers), input_dim)


def _forward_backward(weights, biases, X, Y):
    """Loss (mean squared Euclidean error) and gradients for one batch."""
    acts = [X]
    for W, b in zip(weights[:-1], biases[:-1]):
        acts.append(np.maximum(acts[-1] @ W.T + b, 0.0))
    out = acts[-1] @ weights[-1].T + biases[-1]
    resid = out - Y
    m = X.shape[0]
    loss = float(np.einsum("ij,ij->", resid, resid) / m)
    delta = (2.0 / m) * resid
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for idx in range(len(weights) - 1, -1, -1):
        grads_w[idx] = delta.T @ acts[idx]
        grads_b[idx] = delta.sum(axis=0)
        if idx > 0:
            delta = (delta @ weights[idx]) * (acts[idx] > 0.0)
    return loss, grads_w, grads_b


def loss_and_grad(net: Network, batch_inputs, batch_targets):
    """Public gradient interface on the immutable Network type."""
    X = np.asarray(batch_inputs, dtype=float)
    Y = np.asarray(batch_targets, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"batch inputs must have shape (m, {net.input_dim})")
    if Y.shape != (X.shape[0], net.output_dim):
        raise ValueError(f"batch targets must have shape ({X.shape[0]}, {net.output_dim})")
    weights = [l.matrix for l in net.layers]
    biases = [l.bias for l in net.layers]
    loss, gw, gb = _forward_backward(weights, biases, X, Y)
    return loss, list(zip(gw, gb))


def train(dataset: Dataset, config: TrainConfig) -> TrainedModel:
    """Minibatch adaptive-moment gradient descent; deterministic given seeds."""
    if config.batch_size > dataset.m:
        raise ValueError("batch_size exceeds the dataset size")
    root = np.random.SeedSequence(config.seed)
    s_init, s_shuffle = root.spawn(2)
    net0 = init_mlp(dataset.inputs.shape[1], dataset.targets.shape[1], config, seed=s_init)
    weights = [l.matrix.copy() for l in net0.layers]
    biases = [l.bias.copy() for l in net0.layers]
    mw = [np.zeros_like(w) for w in weights]
    vw = [np.zeros_like(w) for w in weights]
    mb = [np.zeros_like(b) for b in biases]
    vb = [np.zeros_like(b) for b in biases]

    shuffle_rng = np.random.default_rng(s_shuffle)
    X, Y = dataset.inputs, dataset.targets
    if config.normalize_inputs:
        mu = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0
        X = (X - mu) / scale
    n = dataset.m
    bs = config.batch_size
    b1, b2, eps = config.beta1, config.beta2, config.adam_eps
    decay = config.final_lr_fraction ** (1.0 / max(config.epochs - 1, 1))

    history = np.empty(config.epochs)
    step = 0
    lr = config.learning_rate
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for lo in range(0, n - bs + 1, bs):
            idx = order[lo : lo + bs]
            loss, gw, gb = _forward_backward(weights, biases, X[idx], Y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch}, step {step} (last finite epoch mean "
                    f"{history[epoch - 1] if epoch else float('nan'):.3g})"
                )
            epoch_loss += loss
            batches += 1
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for i in range(len(weights)):
                mw[i] = b1 * mw[i] + (1 - b1) * gw[i]
                vw[i] = b2 * vw[i] + (1 - b2) * gw[i] ** 2
                weights[i] -= lr * (mw[i] / c1) / (np.sqrt(vw[i] / c2) + eps)
                mb[i] = b1 * mb[i] + (1 - b1) * gb[i]
                vb[i] = b2 * vb[i] + (1 - b2) * gb[i] ** 2
                biases[i] -= lr * (mb[i] / c1) / (np.sqrt(vb[i] / c2) + eps)
        history[epoch] = epoch_loss / max(batches, 1)
        lr *= decay

    if config.normalize_inputs:
        # fold x -> (x - mu) / scale into the first layer so the returned
        # network consumes raw measurements
        biases[0] = biases[0] - (weights[0] / scale) @ mu
        weights[0] = weights[0] / scale
    net = Network(tuple(LayerWeights(w, b) for w, b in zip(weights, biases)), net0.input_dim)
    return TrainedModel(net, history, config, dataset.meta)


def mse(network: Network, dataset: Dataset) -> float:
    pred = realize_batch(network, dataset.inputs)
    resid = pred - dataset.targets
    return float(np.einsum("ij,ij->", resid, resid) / dataset.m)


def evaluate(model: TrainedModel, test: Dataset) -> float:
    """Mean squared Euclidean test error; warns when the test spec differs."""
    train_meta = model.dataset_meta
    if test.meta.spec != train_meta.spec or test.meta.delta != train_meta.delta:
        warnings.warn("test set was generated with a different spec or noise level")
    return mse(model.network, test)
