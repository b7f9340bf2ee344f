"""Residual graph generator and the GCN discriminator.

The generator is a graph autoencoder: a two-layer GCN encoder maps node
features to latent vectors Z, an inner-product decoder turns Z into a
bounded residual tanh(Z Z^T), and the residual is added onto the input
adjacency. Clamping the sum into [0, 1] yields a per-edge probability
matrix that doubles as the sampling distribution at inference time. A
zero residual therefore reproduces the input exactly.

Both models expose a taped forward (training) and a plain-numpy forward
(inference); the two paths compute the same function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor, constant
from .graphs import Graph
from .nn import GcnLayer, LinearLayer, gcn_forward, normalize_adjacency


@dataclass(frozen=True)
class GeneratedGraph:
    """Output of one generator pass (plain arrays, no gradient state).

    prob is the edge-probability matrix the sampler consumes:
    clamp(adjacency + residual, 0, 1) with a forced-zero diagonal.
    """

    x_hat: np.ndarray
    residual: np.ndarray
    combined: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        p = self.prob
        assert p.min() >= 0.0 and p.max() <= 1.0
        assert np.array_equal(p, p.T)
        assert not p.diagonal().any()


def _offdiag_mask(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


class ResidualGenerator:
    """GAE with a tanh inner-product residual head.

    Encoder stack: GCN(d -> hidden, tanh) then GCN(hidden -> latent,
    linear). Features pass through unchanged unless a learned feature
    head is requested.
    """

    def __init__(self, feature_dim: int, hidden: int = 32, latent: int = 16,
                 seed: int = 0, learn_features: bool = False,
                 explainee_class: int | None = None,
                 init_scale: float = 0.02):
        rng = np.random.default_rng(seed)
        self.feature_dim = feature_dim
        self.hidden = hidden
        self.latent = latent
        self.learn_features = learn_features
        self.explainee_class = explainee_class
        self.init_scale = init_scale
        # Damped init keeps the initial residual near zero so the inner
        # product stays out of tanh saturation; a saturated start leaves
        # the encoder with no usable gradient and the residual never
        # recovers structure.
        self.enc1 = GcnLayer(feature_dim, hidden, rng, activation="tanh",
                             init_gain=init_scale)
        self.enc2 = GcnLayer(hidden, latent, rng, activation="identity",
                             init_gain=init_scale)
        self.feature_head = (
            LinearLayer(latent, feature_dim, rng) if learn_features else None
        )

    def params(self) -> list[Tensor]:
        out = self.enc1.params() + self.enc2.params()
        if self.feature_head is not None:
            out += self.feature_head.params()
        return out

    # -- training path ----------------------------------------------------

    def encode_t(self, tape: Tape, x: Tensor, a_norm: Tensor) -> Tensor:
        return self.enc2.forward(tape, self.enc1.forward(tape, x, a_norm), a_norm)

    def generate_t(self, tape: Tape, x: Tensor, a: Tensor, a_norm: Tensor,
                   mask: Tensor) -> tuple[Tensor, Tensor]:
        """Differentiable generation; returns (prob, residual) tensors.

        a, a_norm and mask (ones with zero diagonal) are constants of the
        input instance; only encoder weights carry gradients.
        """
        z = self.encode_t(tape, x, a_norm)
        raw = tape.tanh(tape.matmul(z, tape.transpose(z)))
        residual = tape.mul(raw, mask)
        prob = tape.clamp01(tape.add(a, residual))
        return prob, residual

    # -- inference path ---------------------------------------------------

    def encode(self, g: Graph) -> np.ndarray:
        a_norm = normalize_adjacency(g.adjacency)
        h = gcn_forward(g.node_features, a_norm, self.enc1.weight.data, "tanh",
                        self.enc1.bias.data)
        return gcn_forward(h, a_norm, self.enc2.weight.data, "identity",
                           self.enc2.bias.data)

    def generate(self, g: Graph) -> GeneratedGraph:
        z = self.encode(g)
        # Mirror the upper triangle so the stored residual is exactly
        # symmetric (BLAS does not guarantee bit-symmetric Z @ Z.T).
        upper = np.triu(z @ z.T, 1)
        residual = np.tanh(upper + upper.T) * _offdiag_mask(g.n)
        combined = g.adjacency + residual
        prob = np.clip(combined, 0.0, 1.0)
        np.fill_diagonal(prob, 0.0)
        x_hat = g.node_features
        if self.feature_head is not None:
            x_hat = z @ self.feature_head.weight.data + self.feature_head.bias.data
        return GeneratedGraph(x_hat=x_hat, residual=residual,
                              combined=combined, prob=prob)


class GcnDiscriminator:
    """Two GCN layers, mean pooling over nodes, linear head, sigmoid."""

    def __init__(self, feature_dim: int, hidden: int = 32, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.feature_dim = feature_dim
        self.hidden = hidden
        self.gcn1 = GcnLayer(feature_dim, hidden, rng, activation="tanh")
        self.gcn2 = GcnLayer(hidden, hidden, rng, activation="tanh")
        self.head = LinearLayer(hidden, 1, rng)

    def params(self) -> list[Tensor]:
        return self.gcn1.params() + self.gcn2.params() + self.head.params()

    def conv_params(self) -> list[Tensor]:
        return self.gcn1.params() + self.gcn2.params()

    def readout_params(self) -> list[Tensor]:
        return self.head.params()

    def forward_t(self, tape: Tape, x: Tensor, a_norm: Tensor) -> Tensor:
        n = x.data.shape[0]
        h = self.gcn2.forward(tape, self.gcn1.forward(tape, x, a_norm), a_norm)
        pooled = tape.matmul(constant(np.full((1, n), 1.0 / n)), h)
        return tape.sigmoid(self.head.forward(tape, pooled))

    def pooled(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Mean-pooled convolutional representation, shape (hidden,)."""
        a_norm = normalize_adjacency(np.clip(a, 0.0, None))
        h = gcn_forward(x, a_norm, self.gcn1.weight.data, "tanh",
                        self.gcn1.bias.data)
        h = gcn_forward(h, a_norm, self.gcn2.weight.data, "tanh",
                        self.gcn2.bias.data)
        return h.mean(axis=0)

    def predict_proba(self, x: np.ndarray, a: np.ndarray) -> float:
        """Plain forward on a raw adjacency (clamped nonnegative first)."""
        pooled = self.pooled(x, a)[None, :]
        logit = pooled @ self.head.weight.data + self.head.bias.data
        return float(1.0 / (1.0 + np.exp(-logit[0, 0])))


def _pack_arrays(prefix: str, layers: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {f"{prefix}.{name}": t.data for name, t in layers.items()}


def generator_arrays(gen: ResidualGenerator) -> dict[str, np.ndarray]:
    layers = {"enc1.weight": gen.enc1.weight, "enc1.bias": gen.enc1.bias,
              "enc2.weight": gen.enc2.weight, "enc2.bias": gen.enc2.bias}
    if gen.feature_head is not None:
        layers["feature_head.weight"] = gen.feature_head.weight
        layers["feature_head.bias"] = gen.feature_head.bias
    return _pack_arrays("gen", layers)

def discriminator_arrays(disc: GcnDiscriminator) -> dict[str, np.ndarray]:
    return _pack_arrays("disc", {
        "gcn1.weight": disc.gcn1.weight,
        "gcn1.bias": disc.gcn1.bias,
        "gcn2.weight": disc.gcn2.weight,
        "gcn2.bias": disc.gcn2.bias,
        "head.weight": disc.head.weight,
        "head.bias": disc.head.bias,
    })


def build_pair_from_arrays(meta: dict, arrays: dict[str, np.ndarray]):
    """Reconstruct (generator, discriminator) from checkpoint contents."""
    gen = ResidualGenerator(
        feature_dim=int(meta["feature_dim"]),
        hidden=int(meta["gen_hidden"]),
        latent=int(meta["gen_latent"]),
        learn_features=meta.get("learn_features", "False") == "True",
        explainee_class=int(meta["explainee_class"]),
    )
    disc = GcnDiscriminator(
        feature_dim=int(meta["feature_dim"]),
        hidden=int(meta["disc_hidden"]),
    )
    targets: dict[str, Tensor] = {
        "gen.enc1.weight": gen.enc1.weight,
        "gen.enc1.bias": gen.enc1.bias,
        "gen.enc2.weight": gen.enc2.weight,
        "gen.enc2.bias": gen.enc2.bias,
        "disc.gcn1.weight": disc.gcn1.weight,
        "disc.gcn1.bias": disc.gcn1.bias,
        "disc.gcn2.weight": disc.gcn2.weight,
        "disc.gcn2.bias": disc.gcn2.bias,
        "disc.head.weight": disc.head.weight,
        "disc.head.bias": disc.head.bias,
    }
    if gen.feature_head is not None:
        targets["gen.feature_head.weight"] = gen.feature_head.weight
        targets["gen.feature_head.bias"] = gen.feature_head.bias
    for name, tensor in targets.items():
        if name not in arrays:
            raise KeyError(f"checkpoint is missing array {name!r}")
        if arrays[name].shape != tensor.data.shape:
            raise ValueError(
                f"checkpoint array {name!r} has shape {arrays[name].shape}, "
                f"expected {tensor.data.shape}"
            )
        tensor.data = arrays[name].copy()
    return gen, disc
