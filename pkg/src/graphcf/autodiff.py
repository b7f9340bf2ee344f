"""Minimal reverse-mode automatic differentiation over dense numpy matrices.

A :class:`Tape` records primitive operations in execution order; since
every node is appended when it is created, the list itself is a valid
topological order and the backward pass is a single reversed sweep. Only
the primitives the models need are provided.

Finite-difference agreement for every primitive is enforced by the test
suite; the tape is the production path, numeric differentiation is the
oracle only.
"""

from __future__ import annotations

import numpy as np

# When true, every freshly produced value is checked for NaN/inf.
CHECK_FINITE = False

BCE_EPS = 1e-7


class Tensor:
    """A matrix value in the computation graph.

    Leaves are parameters (``needs_grad=True``, created by
    :func:`parameter`) or constants. Interior nodes are created through
    :class:`Tape` operations and carry a backward closure.
    """

    __slots__ = ("data", "grad", "needs_grad", "_backward")

    def __init__(self, data, needs_grad: bool = False):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.needs_grad = needs_grad
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, needs_grad={self.needs_grad})"

    # Slots have no __dict__; make checkpointed parameters picklable.
    def __getstate__(self):
        return (self.data, self.needs_grad)

    def __setstate__(self, state):
        self.data, self.needs_grad = state
        self.grad = None
        self._backward = None


def parameter(data) -> Tensor:
    """A trainable leaf; its ``grad`` accumulates across a backward pass."""
    return Tensor(np.array(data, dtype=float), needs_grad=True)


def constant(data) -> Tensor:
    return Tensor(data, needs_grad=False)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # Copy on first write: g may be a view or a buffer shared with a
    # sibling (add hands the same upstream array to both parents).
    if t.grad is None:
        t.grad = np.array(g)
    else:
        t.grad += g


class BackwardWithoutForwardError(RuntimeError):
    pass


class Tape:
    """Execution-ordered record of primitive operations."""

    def __init__(self):
        self._nodes: list[Tensor] = []

    def _emit(self, data, needs: bool, backward) -> Tensor:
        if CHECK_FINITE and not np.all(np.isfinite(data)):
            raise FloatingPointError("non-finite value produced on the tape")
        out = Tensor(data, needs)
        if needs:
            out._backward = backward
            self._nodes.append(out)
        return out

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every reachable parameter."""
        if loss._backward is None:
            raise BackwardWithoutForwardError(
                "loss was not produced by operations recorded on a tape"
            )
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node.grad is not None:
                node._backward(node.grad)

    # ---- primitives -----------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        needs = a.needs_grad or b.needs_grad

        def backward(g):
            if a.needs_grad:
                _accumulate(a, g @ b.data.T)
            if b.needs_grad:
                _accumulate(b, a.data.T @ g)

        return self._emit(a.data @ b.data, needs, backward)

    def transpose(self, a: Tensor) -> Tensor:
        def backward(g):
            _accumulate(a, g.T)

        return self._emit(a.data.T, a.needs_grad, backward)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        needs = a.needs_grad or b.needs_grad

        def backward(g):
            if a.needs_grad:
                _accumulate(a, g)
            if b.needs_grad:
                _accumulate(b, g)

        return self._emit(a.data + b.data, needs, backward)

    def add_const(self, a: Tensor, c) -> Tensor:
        def backward(g):
            _accumulate(a, g)

        return self._emit(a.data + c, a.needs_grad, backward)

    def add_bias(self, a: Tensor, b: Tensor) -> Tensor:
        """Row-broadcast add: (n, h) + (1, h); the bias gradient sums rows."""
        needs = a.needs_grad or b.needs_grad

        def backward(g):
            if a.needs_grad:
                _accumulate(a, g)
            if b.needs_grad:
                _accumulate(b, g.sum(axis=0, keepdims=True))

        return self._emit(a.data + b.data, needs, backward)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        needs = a.needs_grad or b.needs_grad

        def backward(g):
            if a.needs_grad:
                _accumulate(a, g * b.data)
            if b.needs_grad:
                _accumulate(b, g * a.data)

        return self._emit(a.data * b.data, needs, backward)

    def mul_const(self, a: Tensor, c) -> Tensor:
        def backward(g):
            _accumulate(a, g * c)

        return self._emit(a.data * c, a.needs_grad, backward)

    def pow_const(self, a: Tensor, p: float) -> Tensor:
        def backward(g):
            _accumulate(a, g * p * np.power(a.data, p - 1.0))

        return self._emit(np.power(a.data, p), a.needs_grad, backward)

    def tanh(self, a: Tensor) -> Tensor:
        out_data = np.tanh(a.data)

        def backward(g):
            _accumulate(a, g * (1.0 - out_data * out_data))

        return self._emit(out_data, a.needs_grad, backward)

    def sigmoid(self, a: Tensor) -> Tensor:
        out_data = 1.0 / (1.0 + np.exp(-a.data))

        def backward(g):
            _accumulate(a, g * out_data * (1.0 - out_data))

        return self._emit(out_data, a.needs_grad, backward)

    def clamp01(self, a: Tensor) -> Tensor:
        """Clip to [0, 1] with pass-through subgradient inside the range.

        Outside the range the gradient is zero, so saturated entries are
        absorbing until some other term moves the pre-clamp value back.
        That ratchet is deliberate: letting boundary entries pass inward
        gradient keeps every edge decision perpetually revisable, and
        the adversarial loop then churns instead of committing.
        """

        def backward(g):
            _accumulate(a, g * ((a.data >= 0.0) & (a.data <= 1.0)))

        return self._emit(np.clip(a.data, 0.0, 1.0), a.needs_grad, backward)

    def bce(self, p: Tensor, target: float) -> Tensor:
        """Binary cross-entropy against a fixed 0/1 target.

        The probability is clamped into [eps, 1-eps] so a saturated
        discriminator yields a large but finite loss; the clamp region has
        zero gradient.
        """
        pc = np.clip(p.data, BCE_EPS, 1.0 - BCE_EPS)
        val = -(target * np.log(pc) + (1.0 - target) * np.log(1.0 - pc))

        def backward(g):
            inside = (p.data > BCE_EPS) & (p.data < 1.0 - BCE_EPS)
            _accumulate(p, g * inside * (pc - target) / (pc * (1.0 - pc)))

        return self._emit(val, p.needs_grad, backward)


def bce_value(p: float, target: float) -> float:
    """Loss value of :meth:`Tape.bce` without building a graph."""
    pc = float(np.clip(p, BCE_EPS, 1.0 - BCE_EPS))
    return -(target * np.log(pc) + (1.0 - target) * np.log(1.0 - pc))


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


def set_trainable(params, flag: bool) -> None:
    """Freeze or unfreeze leaves; frozen leaves cost nothing in backward."""
    for p in params:
        p.needs_grad = flag
