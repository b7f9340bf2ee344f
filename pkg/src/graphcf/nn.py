"""Graph-convolution building blocks, the optimizer, and checkpoint I/O.

Everything here operates on :class:`graphcf.autodiff.Tensor` values for the
trainable path, with plain-numpy twins where no gradient is needed (e.g.
normalizing the fixed input adjacency once per instance).
"""

from __future__ import annotations

import io

import numpy as np

from .autodiff import Tape, Tensor, parameter

CHECKPOINT_MAGIC = "graphcf-checkpoint 1"


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization with self-loops.

    Returns D^{-1/2} (A + I) D^{-1/2} where D is the degree matrix of
    A + I. Self-loops guarantee strictly positive degrees, so the result
    is defined for any nonnegative symmetric input.
    """
    n = a.shape[0]
    with_loops = a + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return with_loops * np.outer(inv_sqrt, inv_sqrt)


def normalize_adjacency_t(tape: Tape, a: Tensor) -> Tensor:
    """Differentiable twin of :func:`normalize_adjacency`."""
    n = a.data.shape[0]
    ones = Tensor(np.ones((n, 1)))
    row_sum = tape.matmul(a, ones)
    inv_sqrt = tape.pow_const(tape.add_const(row_sum, 1.0), -0.5)
    scale = tape.matmul(inv_sqrt, tape.transpose(inv_sqrt))
    return tape.mul(tape.add_const(a, np.eye(n)), scale)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class GcnLayer:
    """Single graph-convolution layer: activation(A_norm @ X @ W + b).

    The zero-initialised per-channel bias matters more than it looks:
    with scalar nonnegative node features every row of A_norm @ X @ W
    is a positive multiple of the same weight row, so without a bias all
    hidden vectors share one orthant and any inner-product decoder built
    on them is trapped in all-nonnegative outputs. Trained biases center
    the channels and let hidden signs differ per node.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 activation: str = "tanh", init_gain: float = 1.0):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.weight = parameter(init_gain * glorot_uniform(rng, in_dim, out_dim))
        self.bias = parameter(np.zeros((1, out_dim)))

    def forward(self, tape: Tape, x: Tensor, a_norm: Tensor) -> Tensor:
        h = tape.add_bias(tape.matmul(tape.matmul(a_norm, x), self.weight),
                          self.bias)
        if self.activation == "tanh":
            return tape.tanh(h)
        if self.activation == "identity":
            return h
        raise ValueError(f"unknown activation {self.activation!r}")

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]


def gcn_forward(x: np.ndarray, a_norm: np.ndarray, weight: np.ndarray,
                activation: str = "identity",
                bias: np.ndarray | None = None) -> np.ndarray:
    """Gradient-free GCN layer application (shapes: n x d, n x n, d x h)."""
    h = a_norm @ x @ weight
    if bias is not None:
        h = h + bias
    if activation == "tanh":
        return np.tanh(h)
    if activation == "identity":
        return h
    raise ValueError(f"unknown activation {activation!r}")


class LinearLayer:
    """Affine map with weight and bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.weight = parameter(glorot_uniform(rng, in_dim, out_dim))
        self.bias = parameter(np.zeros((1, out_dim)))

    def forward(self, tape: Tape, x: Tensor) -> Tensor:
        return tape.add(tape.matmul(x, self.weight), self.bias)

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]


def fit_logistic_head(features: np.ndarray, targets: np.ndarray,
                      ridge: float, iters: int = 50) -> np.ndarray:
    """Ridge-regularised logistic regression by Newton/IRLS.

    Returns the stacked coefficient vector [weights..., intercept]. The
    problem is convex, so the fit is deterministic and lands on margins
    that per-sample stochastic steps only approach; curvature is floored
    to keep the normal equations well-posed once predictions saturate.
    """
    xb = np.hstack([features, np.ones((len(targets), 1))])
    y = np.asarray(targets, dtype=float)
    w = np.zeros(xb.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(xb @ w)))
        curv = np.maximum(p * (1.0 - p), 1e-6)
        hess = xb.T @ (xb * curv[:, None]) + ridge * np.eye(len(w))
        grad = xb.T @ (p - y) + ridge * w
        step = np.linalg.solve(hess, grad)
        w = w - step
        if float(np.linalg.norm(step)) < 1e-10:
            break
    return w


class Adam:
    """Bias-corrected adaptive-moment optimizer over a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        correct1 = 1.0 - self.beta1 ** t
        correct2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} != parameter shape {p.data.shape}"
                )
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Plain-text header plus a flat little-endian float64 block.

    The header lists metadata and per-array shapes in order; the binary
    block concatenates the arrays row-major. Loading restores every value
    bit-exactly on the same platform.
    """
    header = io.StringIO()
    header.write(CHECKPOINT_MAGIC + "\n")
    for key in sorted(meta):
        header.write(f"meta {key}={meta[key]}\n")
    for name, arr in arrays.items():
        if arr.ndim != 2:
            raise CheckpointError(f"array {name!r} must be 2-D")
        header.write(f"array {name} {arr.shape[0]} {arr.shape[1]}\n")
    header.write("---\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = b"---\n"
    cut = blob.find(sep)
    if cut < 0:
        raise CheckpointError(f"{path}: missing header separator")
    lines = blob[:cut].decode("utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_MAGIC!r} file")
    meta: dict[str, str] = {}
    shapes: list[tuple[str, int, int]] = []
    for ln in lines[1:]:
        if ln.startswith("meta "):
            key, _, value = ln[5:].partition("=")
            meta[key] = value
        elif ln.startswith("array "):
            name, rows, cols = ln[6:].rsplit(" ", 2)
            shapes.append((name, int(rows), int(cols)))
        else:
            raise CheckpointError(f"{path}: unrecognized header line {ln!r}")
    data = blob[cut + len(sep):]
    expected = sum(r * c for _, r, c in shapes) * 8
    if len(data) != expected:
        raise CheckpointError(
            f"{path}: parameter block is {len(data)} bytes, expected {expected}"
        )
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, rows, cols in shapes:
        nbytes = rows * cols * 8
        arrays[name] = np.frombuffer(
            data[offset:offset + nbytes], dtype="<f8"
        ).reshape(rows, cols).astype(float)
        offset += nbytes
    return meta, arrays
