"""Objective zoo: every cost function the benchmark harness optimizes.

Each objective builds its own parameters, evaluates a scalar loss through
the autodiff tape, and hands optimizers a gradient oracle.  Objectives are
immutable after construction; parameter sets are owned by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamSet, Rng, Tape, Tensor, backward, kaiming_uniform_init


class Objective:
    name: str = "objective"
    optimum: list[np.ndarray] | None = None

    def build_params(self, rng: Rng) -> ParamSet:
        raise NotImplementedError

    def forward(self, tape: Tape, params: ParamSet, batch) -> Tensor:
        raise NotImplementedError

    def loss_and_grads(self, params: ParamSet, batch=None):
        params.zero_grads()
        tape = Tape()
        out = self.forward(tape, params, batch)
        backward(out, tape)
        return out.item(), params.grads()

    def loss(self, params: ParamSet, batch=None) -> float:
        tape = Tape(recording=False)
        return self.forward(tape, params, batch).item()

    def oracle(self, batch=None):
        """GradOracle over a fixed batch: ParamSet -> (loss, grads)."""
        return lambda params: self.loss_and_grads(params, batch)

    def loss_at(self, batch=None):
        """Loss-only evaluator over raw value arrays, for miss probing."""
        return lambda values: self.loss(ParamSet.from_values(values), batch)


class Quadratic(Objective):
    """loss = a*w1^2 + b*w2^2 over a single [2] parameter tensor."""

    def __init__(self, a: float, b: float, start=(-1.0, 1.0)):
        if not (a > 0 and b > 0):
            raise ValueError(f"quadratic: coefficients must be positive, got ({a}, {b})")
        self.a = float(a)
        self.b = float(b)
        self.start = (float(start[0]), float(start[1]))
        self.name = f"quadratic({a:g},{b:g})"
        self.coeffs = Tensor([self.a, self.b])
        self.optimum = [np.zeros(2)]

    def build_params(self, rng: Rng) -> ParamSet:
        return ParamSet([Tensor(list(self.start))])

    def forward(self, tape, params, batch) -> Tensor:
        w = params[0]
        return ad.total(tape, ad.mul(tape, self.coeffs, ad.square(tape, w)))


class ScalarSquare(Objective):
    """loss = x^2 over a single scalar parameter."""

    name = "scalar_square"

    def __init__(self, start: float = 1.0):
        self.start = float(start)
        self.optimum = [np.zeros(1)]

    def build_params(self, rng: Rng) -> ParamSet:
        return ParamSet([Tensor([self.start])])

    def forward(self, tape, params, batch) -> Tensor:
        return ad.total(tape, ad.square(tape, params[0]))


class SumRegression(Objective):
    """Fit y = sum(x_i) with a linear model; mean squared residual loss.

    Construction draws the dataset: n samples of x ~ U[0,1)^4 with the row
    sum as the label.  The weight vector's optimum is all ones.
    """

    name = "sum_regression"

    def __init__(self, rng: Rng, n_samples: int = 10_000, dim: int = 4):
        self.dim = dim
        x = rng.uniform(0.0, 1.0, (n_samples, dim))
        y = x.sum(axis=1)
        self.features = Tensor(x)
        self.targets = Tensor(y[:, None])
        self.optimum = [np.ones((dim, 1))]

    def build_params(self, rng: Rng) -> ParamSet:
        return ParamSet([kaiming_uniform_init((self.dim, 1), self.dim, rng)])

    def forward(self, tape, params, batch) -> Tensor:
        if batch is None:
            x, y = self.features, self.targets
        else:
            x, y = Tensor(batch[0]), Tensor(np.asarray(batch[1], dtype=float).reshape(-1, 1))
        pred = ad.matmul(tape, x, params[0])
        resid = ad.sub(tape, pred, y)
        return ad.scale(tape, ad.total(tape, ad.square(tape, resid)), 1.0 / x.shape[0])


class MinibatchTrap(Objective):
    """Fit the two points (1,2) and (1,3) with y = w*x; squared loss, summed.

    The two one-point batches pull toward w=2 and w=3; the full batch has
    its optimum at w=2.5.  Feeding the batches alternately is the trap.
    """

    name = "minibatch_trap"

    def __init__(self):
        self.batch_a = (np.array([[1.0]]), np.array([2.0]))
        self.batch_b = (np.array([[1.0]]), np.array([3.0]))
        self.optimum = [np.full((1, 1), 2.5)]

    def batches(self):
        return [self.batch_a, self.batch_b]

    def build_params(self, rng: Rng) -> ParamSet:
        return ParamSet([kaiming_uniform_init((1, 1), 1, rng)])

    def forward(self, tape, params, batch) -> Tensor:
        if batch is None:
            x = np.vstack([self.batch_a[0], self.batch_b[0]])
            y = np.concatenate([self.batch_a[1], self.batch_b[1]])
        else:
            x, y = batch
        pred = ad.matmul(tape, Tensor(x), params[0])
        resid = ad.sub(tape, pred, Tensor(np.asarray(y, dtype=float).reshape(-1, 1)))
        return ad.total(tape, ad.square(tape, resid))


@dataclass(frozen=True)
class MlpSpec:
    """Five fully connected layers; hidden activations alternate
    sigmoid / prelu / sigmoid / prelu, output goes through log-softmax."""

    input_dim: int
    output_dim: int
    hidden: tuple[int, ...] = (32, 64, 256, 128)
    activations: tuple[str, ...] = ("sigmoid", "prelu", "sigmoid", "prelu")

    def __post_init__(self):
        dims = (self.input_dim, self.output_dim, *self.hidden)
        if any(d <= 0 for d in dims):
            raise ValueError(f"MlpSpec: dimensions must be positive, got {dims}")
        if len(self.hidden) != len(self.activations):
            raise ValueError("MlpSpec: one activation per hidden layer required")

    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden, self.output_dim]
        return list(zip(sizes[:-1], sizes[1:]))

    def parameter_count(self) -> int:
        n = sum(i * o + o for i, o in self.layer_dims())
        n += sum(1 for a in self.activations if a == "prelu")
        return n


class MlpObjective(Objective):
    """Feature-dataset classifier: MLP forward + cross-entropy (log-softmax
    followed by mean negative log-likelihood)."""

    def __init__(self, spec: MlpSpec):
        self.spec = spec
        self.name = f"mlp({spec.input_dim}->{spec.output_dim})"

    def build_params(self, rng: Rng) -> ParamSet:
        tensors = []
        for fan_in, fan_out in self.spec.layer_dims():
            tensors.append(kaiming_uniform_init((fan_in, fan_out), fan_in, rng))
            tensors.append(Tensor(np.zeros(fan_out)))
        for act in self.spec.activations:
            if act == "prelu":
                tensors.append(Tensor([0.25]))
        return ParamSet(tensors)

    def _logits(self, tape, params, x: Tensor) -> Tensor:
        n_layers = len(self.spec.layer_dims())
        slopes = params.tensors[2 * n_layers:]
        h = x
        slope_idx = 0
        for layer in range(n_layers):
            w, b = params[2 * layer], params[2 * layer + 1]
            h = ad.add_bias(tape, ad.matmul(tape, h, w), b)
            if layer < len(self.spec.activations):
                act = self.spec.activations[layer]
                if act == "sigmoid":
                    h = ad.sigmoid(tape, h)
                elif act == "prelu":
                    h = ad.prelu(tape, h, slopes[slope_idx])
                    slope_idx += 1
                else:
                    raise ValueError(f"mlp: unknown activation '{act}'")
        return h

    def forward(self, tape, params, batch) -> Tensor:
        if batch is None:
            raise ValueError("mlp: a (features, labels) batch is required")
        x, y = batch
        if x.shape[1] != self.spec.input_dim:
            raise ad.ShapeError(
                f"mlp: batch has {x.shape[1]} features, spec expects {self.spec.input_dim}")
        logits = self._logits(tape, params, Tensor(x))
        logp = ad.log_softmax(tape, logits)
        return ad.nll_loss(tape, logp, np.asarray(y))

    def log_probs(self, params: ParamSet, x: np.ndarray) -> np.ndarray:
        tape = Tape(recording=False)
        logits = self._logits(tape, params, Tensor(x))
        return ad.log_softmax(tape, logits).data

    def predict(self, params: ParamSet, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.log_probs(params, x), axis=1)


def quadratic(a: float, b: float, start=(-1.0, 1.0)) -> Quadratic:
    return Quadratic(a, b, start)


def scalar_square(start: float = 1.0) -> ScalarSquare:
    return ScalarSquare(start)


def sum_regression(rng: Rng, n_samples: int = 10_000) -> SumRegression:
    return SumRegression(rng, n_samples)


def minibatch_trap() -> MinibatchTrap:
    return MinibatchTrap()


def mlp(spec: MlpSpec) -> MlpObjective:
    return MlpObjective(spec)
