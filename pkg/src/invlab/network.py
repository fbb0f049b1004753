"""Exact ReLU network data type and its composition algebra.

A network is an ordered list of affine layers (matrix, bias).  Evaluation
applies ReLU after every layer except the last, which stays affine.  All
operations here (composition, parallelization, identity emulation, depth
extension) are exact: the resulting network realizes the stated function for
every input, with weight counts controlled by the usual sparse constructions.

Weight counts refer to nonzero entries; matrices are stored dense and
sparsity is purely an accounting notion.  All values are float64 and
instances are immutable after construction, so they can be shared freely
across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    """Raised when layer interfaces or input shapes do not line up."""


def _as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"layer matrix must be 2-D, got shape {m.shape}")
    m.setflags(write=False)
    return m


def _as_vector(b) -> np.ndarray:
    v = np.array(b, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"layer bias must be 1-D, got shape {v.shape}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class LayerWeights:
    """One affine layer: y = matrix @ x + bias."""

    matrix: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_matrix(self.matrix))
        object.__setattr__(self, "bias", _as_vector(self.bias))
        if self.matrix.shape[0] != self.bias.shape[0]:
            raise DimensionError(
                f"matrix has {self.matrix.shape[0]} rows but bias has length {self.bias.shape[0]}"
            )
        if not (np.isfinite(self.matrix).all() and np.isfinite(self.bias).all()):
            raise ValueError("layer weights must be finite")

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.matrix)) + int(np.count_nonzero(self.bias))


@dataclass(frozen=True)
class Network:
    """A ReLU network: nonempty layer list plus declared input dimension."""

    layers: tuple[LayerWeights, ...]
    input_dim: int

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise DimensionError("a network needs at least one layer")
        if self.input_dim < 1:
            raise DimensionError("input dimension must be positive")
        prev = self.input_dim
        for i, layer in enumerate(layers):
            if layer.in_dim != prev:
                raise DimensionError(
                    f"layer {i} expects input of size {layer.in_dim}, previous width is {prev}"
                )
            prev = layer.out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def architecture(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(layer.out_dim for layer in self.layers)


def network(layers, input_dim: int | None = None) -> Network:
    """Build a Network from (matrix, bias) pairs, inferring input_dim if omitted."""
    built = tuple(
        layer if isinstance(layer, LayerWeights) else LayerWeights(layer[0], layer[1])
        for layer in layers
    )
    if input_dim is None:
        input_dim = built[0].in_dim
    return Network(built, input_dim)


def realize(net: Network, x) -> np.ndarray:
    """Evaluate the network at a single input vector."""
    v = np.asarray(x, dtype=float)
    if v.shape != (net.input_dim,):
        raise DimensionError(f"expected input of shape ({net.input_dim},), got {v.shape}")
    for layer in net.layers[:-1]:
        v = np.maximum(layer.matrix @ v + layer.bias, 0.0)
    last = net.layers[-1]
    return last.matrix @ v + last.bias


def realize_batch(net: Network, xs) -> np.ndarray:
    """Evaluate the network on a batch of row vectors of shape (m, input_dim)."""
    v = np.asarray(xs, dtype=float)
    if v.ndim != 2 or v.shape[1] != net.input_dim:
        raise DimensionError(f"expected batch of shape (m, {net.input_dim}), got {v.shape}")
    for layer in net.layers[:-1]:
        v = np.maximum(v @ layer.matrix.T + layer.bias, 0.0)
    last = net.layers[-1]
    return v @ last.matrix.T + last.bias


def metrics(net: Network) -> dict:
    """Depth, weight counts, neuron count, and architecture of a network."""
    per_layer = [layer.nonzeros() for layer in net.layers]
    return {
        "L": net.depth,
        "W": sum(per_layer),
        "N": net.input_dim + sum(layer.out_dim for layer in net.layers),
        "W_first": per_layer[0],
        "W_last": per_layer[-1],
        "architecture": net.architecture,
    }


def concat(phi1: Network, phi2: Network) -> Network:
    """Sparse composition: realize(concat(phi1, phi2), x) = phi1(phi2(x)).

    The junction layer emits (relu(z), relu(-z)) for the affine output z of
    phi2's last layer, and phi1's first layer consumes the difference.  The
    weight count satisfies W <= W1 + W2 + W_first(phi1) + W_last(phi2).
    """
    if phi1.input_dim != phi2.output_dim:
        raise DimensionError(
            f"cannot compose: inner network outputs {phi2.output_dim}, outer expects {phi1.input_dim}"
        )
    last2 = phi2.layers[-1]
    junction = LayerWeights(
        np.vstack([last2.matrix, -last2.matrix]),
        np.concatenate([last2.bias, -last2.bias]),
    )
    first1 = phi1.layers[0]
    bridge = LayerWeights(
        np.hstack([first1.matrix, -first1.matrix]),
        first1.bias,
    )
    layers = phi2.layers[:-1] + (junction, bridge) + phi1.layers[1:]
    return Network(layers, phi2.input_dim)


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def parallelize(phi1: Network, phi2: Network) -> Network:
    """Shared-input parallelization: x maps to (phi1(x), phi2(x)).

    Requires equal depth and equal input dimension; weight counts add exactly.
    """
    if phi1.depth != phi2.depth:
        raise DimensionError("parallelize needs equal depth; use extend_depth first")
    if phi1.input_dim != phi2.input_dim:
        raise DimensionError("parallelize needs a shared input dimension")
    layers = []
    for i, (l1, l2) in enumerate(zip(phi1.layers, phi2.layers)):
        if i == 0:
            m = np.vstack([l1.matrix, l2.matrix])
        else:
            m = _block_diag(l1.matrix, l2.matrix)
        layers.append(LayerWeights(m, np.concatenate([l1.bias, l2.bias])))
    return Network(tuple(layers), phi1.input_dim)


def full_parallelize(phi1: Network, phi2: Network) -> Network:
    """Distinct-input parallelization: (x1, x2) maps to (phi1(x1), phi2(x2))."""
    if phi1.depth != phi2.depth:
        raise DimensionError("full_parallelize needs equal depth; use extend_depth first")
    layers = tuple(
        LayerWeights(_block_diag(l1.matrix, l2.matrix), np.concatenate([l1.bias, l2.bias]))
        for l1, l2 in zip(phi1.layers, phi2.layers)
    )
    return Network(layers, phi1.input_dim + phi2.input_dim)


def _stack_layers(nets: list[Network], shared_input: bool) -> Network:
    depth = nets[0].depth
    if any(n.depth != depth for n in nets):
        raise DimensionError("parallelization needs equal depth; use extend_depth first")
    layers = []
    for i in range(depth):
        parts = [n.layers[i] for n in nets]
        out_dim = sum(p.out_dim for p in parts)
        if i == 0 and shared_input:
            m = np.vstack([p.matrix for p in parts])
        else:
            in_dim = sum(p.in_dim for p in parts)
            m = np.zeros((out_dim, in_dim))
            r = c = 0
            for p in parts:
                m[r : r + p.out_dim, c : c + p.in_dim] = p.matrix
                r += p.out_dim
                c += p.in_dim
        layers.append(LayerWeights(m, np.concatenate([p.bias for p in parts])))
    input_dim = nets[0].input_dim if shared_input else sum(n.input_dim for n in nets)
    if shared_input and any(n.input_dim != input_dim for n in nets):
        raise DimensionError("parallelize needs a shared input dimension")
    return Network(tuple(layers), input_dim)


def parallelize_many(nets: list[Network]) -> Network:
    if len(nets) == 1:
        return nets[0]
    return _stack_layers(list(nets), shared_input=True)


def full_parallelize_many(nets: list[Network]) -> Network:
    if len(nets) == 1:
        return nets[0]
    return _stack_layers(list(nets), shared_input=False)


def identity_net(d: int, L: int) -> Network:
    """A depth-L network realizing the identity on R^d exactly, W <= 2dL.

    For L >= 2 the input is split into positive and negative parts, which
    survive the hidden ReLUs unchanged and are recombined by the last layer.
    """
    if d < 1 or L < 1:
        raise DimensionError("identity_net needs d >= 1 and L >= 1")
    eye = np.eye(d)
    if L == 1:
        return Network((LayerWeights(eye, np.zeros(d)),), d)
    layers = [LayerWeights(np.vstack([eye, -eye]), np.zeros(2 * d))]
    for _ in range(L - 2):
        layers.append(LayerWeights(np.eye(2 * d), np.zeros(2 * d)))
    layers.append(LayerWeights(np.hstack([eye, -eye]), np.zeros(d)))
    return Network(tuple(layers), d)


def extend_depth(phi: Network, L_target: int) -> Network:
    """Pad a network with identity layers so its depth becomes exactly L_target."""
    if L_target < phi.depth:
        raise DimensionError(f"cannot shrink depth {phi.depth} to {L_target}")
    if L_target == phi.depth:
        return phi
    return concat(identity_net(phi.output_dim, L_target - phi.depth), phi)


def affine_net(matrix, bias=None) -> Network:
    """Single-layer network for an affine map."""
    m = np.asarray(matrix, dtype=float)
    b = np.zeros(m.shape[0]) if bias is None else np.asarray(bias, dtype=float)
    return Network((LayerWeights(m, b),), m.shape[1])


# --- serialization ---------------------------------------------------------
#
# Self-describing text format: a header with the architecture, then one line
# per matrix row and one line per bias, each number printed with %.17g so the
# round trip is bit-identical.


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        fh.write("relunet 1\n")
        fh.write(f"input_dim {net.input_dim}\n")
        fh.write(f"layers {net.depth}\n")
        for layer in net.layers:
            fh.write(f"layer {layer.out_dim} {layer.in_dim}\n")
            for row in layer.matrix:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write(" ".join(f"{v:.17g}" for v in layer.bias) + "\n")


def load_network(path) -> Network:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].split() != ["relunet", "1"]:
        raise ValueError(f"{path}: not a network file")
    input_dim = int(lines[1].split()[1])
    n_layers = int(lines[2].split()[1])
    pos = 3
    layers = []
    for _ in range(n_layers):
        tag, rows, cols = lines[pos].split()
        if tag != "layer":
            raise ValueError(f"{path}: malformed layer header at line {pos + 1}")
        rows, cols = int(rows), int(cols)
        pos += 1
        mat = np.array(
            [[float(v) for v in lines[pos + r].split()] for r in range(rows)]
        ).reshape(rows, cols)
        pos += rows
        bias = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        layers.append(LayerWeights(mat, bias))
    return Network(tuple(layers), input_dim)
