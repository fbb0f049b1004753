"""Laboratory for discretized inverse problems solved with noise-robust ReLU networks.

The package is organized around six pieces:

* ``network``    -- the exact ReLU network data type and its composition algebra
* ``construct``  -- constructive approximation networks (multiplication, piecewise
                    linear interpolation, partitions of unity, manifold assembly)
                    and the probabilistic bound calculators
* ``operators``  -- the four forward integral operators, their derivatives, and
                    analytic inversion baselines
* ``sampling``   -- coefficient bases, parameter-to-function maps, and the
                    discretized forward map
* ``training``   -- noisy dataset generation and from-scratch MLP training
* ``sweep``      -- the experiment harness (grids over problem, d, D, noise level)
"""

from invlab.network import (
    LayerWeights,
    Network,
    concat,
    extend_depth,
    full_parallelize,
    identity_net,
    metrics,
    parallelize,
    realize,
)

__all__ = [
    "LayerWeights",
    "Network",
    "realize",
    "concat",
    "parallelize",
    "full_parallelize",
    "identity_net",
    "extend_depth",
    "metrics",
]
