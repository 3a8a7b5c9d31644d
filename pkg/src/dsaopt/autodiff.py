"""Reverse-mode automatic differentiation over dense float64 tensors.

A `Tape` records every primitive applied during a forward pass; `backward`
replays it once in reverse and writes gradients into each tensor's `grad`
slot.  The primitive set is deliberately small: exactly what the bundled
objectives (quadratics, linear regression, a small MLP classifier) need.

All arithmetic is double precision.  Detection-style learning-rate
adaptation compares products of gradients that can sit near 1e-6, where
single precision would corrupt the sign decisions the optimizers rely on.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform for a primitive."""


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced NaN or Inf."""


class TapeError(RuntimeError):
    """Tape misuse: backward on a consumed/empty tape or a non-scalar loss."""


def _as_f64(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    return arr


class Tensor:
    """Dense row-major float64 array with an optional gradient buffer.

    Tensors are treated as immutable after construction except for `grad`:
    no operation in this package writes to `data`, so optimizer steps
    replace tensors instead of mutating them and value snapshots taken
    before a step stay valid afterwards.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data):
        self.data = _as_f64(data)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has shape {self.data.shape}, expected a scalar")
        return float(self.data.reshape(()))

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


class Tape:
    """Append-only record of primitives, consumed by a single backward pass.

    Construct with ``recording=False`` for loss-only evaluations: primitives
    then skip node bookkeeping entirely.
    """

    __slots__ = ("nodes", "recording", "consumed")

    def __init__(self, recording: bool = True):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self.recording = recording
        self.consumed = False

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], vjp) -> None:
        if self.recording:
            self.nodes.append((out, inputs, vjp))


def backward(loss: Tensor, tape: Tape) -> None:
    """Propagate d(loss)/d(tensor) into every recorded tensor's grad slot.

    The tape is consumed: a second backward on the same tape is an error.
    """
    if tape.consumed:
        raise TapeError("backward: tape already consumed")
    if not tape.nodes:
        raise TapeError("backward: tape is empty (was it created with recording=False?)")
    if loss.size != 1:
        raise ShapeError(f"backward: loss has shape {loss.shape}, expected a scalar")
    if tape.nodes[-1][0] is not loss:
        raise TapeError("backward: loss is not the tape's final node")
    tape.consumed = True
    loss.grad = np.ones_like(loss.data)
    for out, inputs, vjp in reversed(tape.nodes):
        if out.grad is None:
            continue
        grads = vjp(out.grad)
        for t, g in zip(inputs, grads):
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("backward: non-finite gradient encountered")
            t.accumulate_grad(g)


def _finish(tape: Tape, name: str, out_data: np.ndarray,
            inputs: tuple[Tensor, ...], vjp) -> Tensor:
    if not np.all(np.isfinite(out_data)):
        raise NonFiniteError(f"{name}: non-finite output")
    out = Tensor(out_data)
    tape.record(out, inputs, vjp)
    return out


def matmul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = a.data @ b.data

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _finish(tape, "matmul", out, (a, b), vjp)


def add_bias(tape: Tape, x: Tensor, b: Tensor) -> Tensor:
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: shapes {x.shape} and {b.shape} do not conform")
    out = x.data + b.data

    def vjp(g):
        return g, g.sum(axis=0)

    return _finish(tape, "add_bias", out, (x, b), vjp)


def _elementwise_guard(name: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} do not match")


def add(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    _elementwise_guard("add", a, b)
    return _finish(tape, "add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    _elementwise_guard("sub", a, b)
    return _finish(tape, "sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    _elementwise_guard("mul", a, b)
    return _finish(tape, "mul", a.data * b.data,
                   (a, b), lambda g: (g * b.data, g * a.data))


def scale(tape: Tape, x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _finish(tape, "scale", x.data * c, (x,), lambda g: (g * c,))


def square(tape: Tape, x: Tensor) -> Tensor:
    return _finish(tape, "square", x.data * x.data, (x,), lambda g: (2.0 * x.data * g,))


def total(tape: Tape, x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out = np.asarray(x.data.sum())

    def vjp(g):
        return (np.full_like(x.data, g.item()),)

    return _finish(tape, "sum", out, (x,), vjp)


def dot(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot: shapes {a.shape} and {b.shape} do not conform")
    out = np.asarray(a.data @ b.data)

    def vjp(g):
        s = g.item()
        return s * b.data, s * a.data

    return _finish(tape, "dot", out, (a, b), vjp)


def sigmoid(tape: Tape, x: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _finish(tape, "sigmoid", out, (x,), vjp)


def prelu(tape: Tape, x: Tensor, slope: Tensor) -> Tensor:
    """PReLU with a single learnable slope for the whole layer."""
    if slope.size != 1:
        raise ShapeError(f"prelu: slope has shape {slope.shape}, expected a scalar")
    s = float(slope.data.reshape(()))
    neg = x.data < 0
    out = np.where(neg, s * x.data, x.data)

    def vjp(g):
        dx = np.where(neg, s * g, g)
        ds = np.asarray((g * np.where(neg, x.data, 0.0)).sum()).reshape(slope.shape)
        return dx, ds

    return _finish(tape, "prelu", out, (x, slope), vjp)


def log_softmax(tape: Tape, x: Tensor) -> Tensor:
    """Row-wise log-softmax over a 2-D batch of logits."""
    if x.data.ndim != 2:
        raise ShapeError(f"log_softmax: expected 2-D input, got shape {x.shape}")
    m = x.data.max(axis=1, keepdims=True)
    shifted = x.data - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse
    softmax = np.exp(out)

    def vjp(g):
        return (g - softmax * g.sum(axis=1, keepdims=True),)

    return _finish(tape, "log_softmax", out, (x,), vjp)


def nll_loss(tape: Tape, logp: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer class labels."""
    if logp.data.ndim != 2:
        raise ShapeError(f"nll_loss: expected 2-D log-probabilities, got shape {logp.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logp.shape[0]:
        raise ShapeError(
            f"nll_loss: labels shape {labels.shape} does not match batch {logp.shape}")
    if labels.min() < 0 or labels.max() >= logp.shape[1]:
        raise ShapeError("nll_loss: label index out of range")
    n = logp.shape[0]
    rows = np.arange(n)
    out = np.asarray(-logp.data[rows, labels].mean())

    def vjp(g):
        dlogp = np.zeros_like(logp.data)
        dlogp[rows, labels] = -g.item() / n
        return (dlogp,)

    return _finish(tape, "nll_loss", out, (logp,), vjp)


class Rng:
    """Deterministic random source: PCG64 streams spawned from one seed.

    `split()` hands out child generators derived through NumPy's
    SeedSequence spawning, in call order, so a run's streams are fully
    determined by (seed, split order) on every platform.
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed) if _seq is None else _seq
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def split(self) -> "Rng":
        child = self._seq.spawn(1)[0]
        return Rng(self.seed, _seq=child)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, shape) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)


def kaiming_uniform_init(shape, fan_in: int, rng: Rng) -> Tensor:
    """Uniform(-b, b) with b = gain * sqrt(3 / fan_in), gain = sqrt(2 / (1 + a^2)),
    a = sqrt(5) -- which collapses to b = 1 / sqrt(fan_in)."""
    if fan_in < 1:
        raise ValueError(f"kaiming_uniform_init: fan_in must be >= 1, got {fan_in}")
    a = np.sqrt(5.0)
    gain = np.sqrt(2.0 / (1.0 + a * a))
    bound = gain * np.sqrt(3.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, shape))


class ParamSet:
    """Ordered collection of trainable tensors.

    Optimizer steps replace tensors wholesale (tensors themselves stay
    immutable), so a list of `.values()` captured before a step remains a
    valid snapshot afterwards.
    """

    def __init__(self, tensors):
        self.tensors: list[Tensor] = list(tensors)

    @classmethod
    def from_values(cls, values) -> "ParamSet":
        return cls(Tensor(v) for v in values)

    def __len__(self) -> int:
        return len(self.tensors)

    def __iter__(self):
        return iter(self.tensors)

    def __getitem__(self, i: int) -> Tensor:
        return self.tensors[i]

    def values(self) -> list[np.ndarray]:
        return [t.data for t in self.tensors]

    def grads(self) -> list[np.ndarray]:
        out = []
        for t in self.tensors:
            if t.grad is None:
                raise TapeError("grads: a parameter has no gradient (no backward ran?)")
            out.append(t.grad)
        return out

    def zero_grads(self) -> None:
        for t in self.tensors:
            t.grad = None

    def replace(self, values) -> None:
        self.tensors = [Tensor(v) for v in values]

    def component_count(self) -> int:
        return sum(t.size for t in self.tensors)
