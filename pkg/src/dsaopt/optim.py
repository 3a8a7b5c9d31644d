"""Optimizer suite: eight classic rules, hypergradient descent, and the
detection-based self-adaptive optimizer (DSA) with its ablation flags.

Every optimizer advances a `ParamSet` in place (tensors are replaced, not
mutated) and keeps its buffers in an `OptState`.  DSA and HD drive a
`GradOracle`: a callable mapping a ParamSet to ``(loss, [grads])`` that is
deterministic within one step, so DSA may evaluate it twice on the same
data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, ParamSet


class NonFiniteGradientError(FloatingPointError):
    """Step rejected: a gradient contained NaN or Inf."""


class StateError(RuntimeError):
    """Optimizer state missing or initialized for a different rule."""


class OracleContractError(RuntimeError):
    """The gradient oracle returned different losses for identical parameters."""


CLASSIC_RULES = ("sgd", "momentum", "adagrad", "adadelta", "rmsprop",
                 "adam", "adamw", "adamax")

# Standard published definitions; the adaptation papers cite but do not
# restate them, so these constants follow the dominant conventions.
DEFAULT_HYPER = {
    "sgd": {"lr": 0.1},
    "momentum": {"lr": 0.1, "mu": 0.9},
    "adagrad": {"lr": 0.01, "eps": 1e-10},
    "adadelta": {"lr": 1.0, "decay": 0.9, "eps": 1e-6},
    "rmsprop": {"lr": 0.01, "decay": 0.99, "eps": 1e-8},
    "adam": {"lr": 0.001, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "adamw": {"lr": 0.001, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
              "weight_decay": 0.01},
    "adamax": {"lr": 0.002, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
}


@dataclass
class DsaConfig:
    """Knobs of the detection step.

    beta: step size of the pre-sigmoid rate variable alpha.
    gamma: learning-rate ceiling; the effective rate is gamma*sigmoid(alpha).
    alpha0: initial alpha (-4.6 puts the initial rate at ~0.001 with gamma 0.1).
    epsilon: sign-guard infinitesimal for the x/(|x|+eps) normalizations.
    per_parameter: one alpha per parameter component instead of one scalar.
    sign_param_step: parameter displacement g/(|g|+eps) so step size equals
        the effective learning rate.
    raw_alpha_step: (scalar alpha only) use the raw gradient dot product as
        the alpha increment instead of its sign; kept for comparison runs.
    """

    beta: float = 0.1
    gamma: float = 0.1
    alpha0: float = -4.6
    epsilon: float = 1e-12
    per_parameter: bool = True
    sign_param_step: bool = True
    raw_alpha_step: bool = False

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0 and self.epsilon > 0):
            raise ValueError("DsaConfig: beta, gamma and epsilon must be positive")


@dataclass
class OptState:
    """Per-run mutable optimizer buffers; one OptState belongs to one run."""

    rule: str
    step_count: int = 0
    # hd / dsa (scalar variant)
    alpha: float | None = None
    prev_grads: list[np.ndarray] | None = None
    # dsa (per-parameter)
    alpha_per_param: list[np.ndarray] | None = None
    # momentum
    velocity: list[np.ndarray] | None = None
    # adagrad / rmsprop / adadelta
    accum: list[np.ndarray] | None = None
    accum_delta: list[np.ndarray] | None = None
    # adam family (v doubles as the infinity-norm buffer for adamax)
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


@dataclass
class MissStats:
    """Adaptation-miss bookkeeping: rate = misses / (steps - 1)."""

    misses: int = 0
    steps: int = 0
    flags: list[bool] = field(default_factory=list)

    def record_step(self) -> None:
        self.steps += 1

    def record_probe(self, miss: bool) -> None:
        self.flags.append(bool(miss))
        if miss:
            self.misses += 1

    @property
    def rate(self) -> float:
        if self.steps <= 1:
            return 0.0
        return self.misses / (self.steps - 1)


@dataclass
class StepInfo:
    """What a single optimizer step saw and did, for telemetry and probing.

    lr_before/lr_after are per-parameter arrays of effective learning rates
    (constant arrays for scalar-rate optimizers).  step_dir is the direction
    each rate multiplied; the committed update was lr_after * step_dir.
    """

    loss: float
    grads: list[np.ndarray]
    lr_before: list[np.ndarray]
    lr_after: list[np.ndarray]
    step_dir: list[np.ndarray]
    adapted: bool


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def effective_lr(alpha, gamma: float):
    """gamma * sigmoid(alpha); always inside (0, gamma)."""
    return gamma * _sigmoid(alpha)


def _check_finite_grads(rule: str, grads) -> None:
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"{rule}: non-finite gradient, step rejected")


def init_state(rule: str, params: ParamSet, cfg: DsaConfig | None = None) -> OptState:
    shapes = [t.shape for t in params]
    zeros = lambda: [np.zeros(s) for s in shapes]
    state = OptState(rule=rule)
    if rule == "momentum":
        state.velocity = zeros()
    elif rule in ("adagrad", "rmsprop"):
        state.accum = zeros()
    elif rule == "adadelta":
        state.accum = zeros()
        state.accum_delta = zeros()
    elif rule in ("adam", "adamw", "adamax"):
        state.m = zeros()
        state.v = zeros()
    elif rule == "hd":
        state.alpha = None  # set on first hd_step from alpha0
        state.prev_grads = None
    elif rule == "dsa":
        if cfg is None:
            raise StateError("init_state: dsa requires a DsaConfig")
        if cfg.per_parameter:
            state.alpha_per_param = [np.full(s, float(cfg.alpha0)) for s in shapes]
        else:
            state.alpha = float(cfg.alpha0)
    elif rule != "sgd":
        raise StateError(f"init_state: unknown rule '{rule}'")
    return state


def classic_step(rule: str, params: ParamSet, grads, state: OptState,
                 hyper: dict | None = None) -> StepInfo:
    """One step of a classic rule, per its standard published definition."""
    if rule not in CLASSIC_RULES:
        raise StateError(f"classic_step: unknown rule '{rule}'")
    if state.rule != rule:
        raise StateError(f"classic_step: state initialized for '{state.rule}', not '{rule}'")
    h = dict(DEFAULT_HYPER[rule])
    if hyper:
        h.update(hyper)
    _check_finite_grads(rule, grads)
    lr = h["lr"]
    values = params.values()
    new_values = []

    if rule == "sgd":
        for w, g in zip(values, grads):
            new_values.append(w - lr * g)
    elif rule == "momentum":
        if state.velocity is None:
            raise StateError("momentum: uninitialized velocity buffer")
        for i, (w, g) in enumerate(zip(values, grads)):
            state.velocity[i] = h["mu"] * state.velocity[i] - lr * g
            new_values.append(w + state.velocity[i])
    elif rule == "adagrad":
        if state.accum is None:
            raise StateError("adagrad: uninitialized accumulator")
        for i, (w, g) in enumerate(zip(values, grads)):
            state.accum[i] = state.accum[i] + g * g
            new_values.append(w - lr * g / (np.sqrt(state.accum[i]) + h["eps"]))
    elif rule == "rmsprop":
        if state.accum is None:
            raise StateError("rmsprop: uninitialized accumulator")
        d = h["decay"]
        for i, (w, g) in enumerate(zip(values, grads)):
            state.accum[i] = d * state.accum[i] + (1 - d) * g * g
            new_values.append(w - lr * g / (np.sqrt(state.accum[i]) + h["eps"]))
    elif rule == "adadelta":
        if state.accum is None or state.accum_delta is None:
            raise StateError("adadelta: uninitialized accumulators")
        d, eps = h["decay"], h["eps"]
        for i, (w, g) in enumerate(zip(values, grads)):
            state.accum[i] = d * state.accum[i] + (1 - d) * g * g
            delta = np.sqrt(state.accum_delta[i] + eps) / np.sqrt(state.accum[i] + eps) * g
            state.accum_delta[i] = d * state.accum_delta[i] + (1 - d) * delta * delta
            new_values.append(w - lr * delta)
    else:  # adam family
        if state.m is None or state.v is None:
            raise StateError(f"{rule}: uninitialized moment buffers")
        b1, b2, eps = h["beta1"], h["beta2"], h["eps"]
        t = state.step_count + 1
        for i, (w, g) in enumerate(zip(values, grads)):
            state.m[i] = b1 * state.m[i] + (1 - b1) * g
            if rule == "adamax":
                state.v[i] = np.maximum(b2 * state.v[i], np.abs(g))
                step = (lr / (1 - b1 ** t)) * state.m[i] / (state.v[i] + eps)
            else:
                state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
                mhat = state.m[i] / (1 - b1 ** t)
                vhat = state.v[i] / (1 - b2 ** t)
                step = lr * mhat / (np.sqrt(vhat) + eps)
            if rule == "adamw":
                step = step + lr * h["weight_decay"] * w
            new_values.append(w - step)

    state.step_count += 1
    params.replace(new_values)
    lrs = [np.full_like(g, lr) for g in grads]
    return StepInfo(loss=float("nan"), grads=list(grads), lr_before=lrs,
                    lr_after=lrs, step_dir=list(grads), adapted=False)


def hd_step(params: ParamSet, oracle, state: OptState,
            beta: float, alpha0: float) -> StepInfo:
    """Hypergradient descent (on top of plain gradient descent).

    From the second step on, the rate moves by beta times the dot product
    of the current and previous gradients, taken over all parameters
    flattened; the first step applies alpha0 unchanged.  The rate is not
    clamped: it may go negative, which callers surface via telemetry.
    """
    if state.rule != "hd":
        raise StateError(f"hd_step: state initialized for '{state.rule}', not 'hd'")
    loss, grads = oracle(params)
    _check_finite_grads("hd", grads)
    if state.alpha is None:
        state.alpha = float(alpha0)
    alpha_before = state.alpha
    if state.prev_grads is not None:
        hypergrad = sum(float(np.dot(g.ravel(), pg.ravel()))
                        for g, pg in zip(grads, state.prev_grads))
        state.alpha = state.alpha + beta * hypergrad
        adapted = True
    else:
        adapted = False
    alpha = state.alpha
    params.replace([w - alpha * g for w, g in zip(params.values(), grads)])
    state.prev_grads = grads
    state.step_count += 1
    return StepInfo(loss=loss, grads=grads,
                    lr_before=[np.full_like(g, alpha_before) for g in grads],
                    lr_after=[np.full_like(g, alpha) for g in grads],
                    step_dir=grads, adapted=adapted)


def _sign_guard(x, eps: float):
    """x / (|x| + eps): the sign of x, shrunk toward 0 only when |x| ~ eps."""
    return x / (np.abs(x) + eps)


def dsa_step(params: ParamSet, oracle, state: OptState, cfg: DsaConfig) -> StepInfo:
    """One detection step.

    With the current rate, take a trial step and re-evaluate the gradient
    there; per component, the sign of (trial gradient * current gradient)
    says whether the trial stayed on the descending slope (raise the rate)
    or crossed the optimum (lower it).  The committed update then uses the
    adapted rate.  The trial uses the same direction as the commit, so the
    detection measures exactly the step that will be taken.
    """
    if state.rule != "dsa":
        raise StateError(f"dsa_step: state initialized for '{state.rule}', not 'dsa'")
    eps = cfg.epsilon
    loss, grads = oracle(params)
    _check_finite_grads("dsa", grads)
    values = params.values()

    if cfg.sign_param_step:
        step_dir = [_sign_guard(g, eps) for g in grads]
    else:
        step_dir = grads

    if cfg.per_parameter:
        if state.alpha_per_param is None:
            raise StateError("dsa: uninitialized per-parameter alpha")
        lr_before = [effective_lr(a, cfg.gamma) for a in state.alpha_per_param]
    else:
        if state.alpha is None:
            raise StateError("dsa: uninitialized scalar alpha")
        lr_b = effective_lr(state.alpha, cfg.gamma)
        lr_before = [np.full_like(g, lr_b) for g in grads]

    trial_values = [w - lr * d for w, lr, d in zip(values, lr_before, step_dir)]
    trial = ParamSet.from_values(trial_values)
    trial_loss, trial_grads = oracle(trial)
    _check_finite_grads("dsa", trial_grads)
    if all(np.array_equal(tv, w) for tv, w in zip(trial_values, values)):
        if trial_loss != loss:
            raise OracleContractError(
                "dsa: oracle returned different losses for identical parameters")

    if cfg.per_parameter:
        for i, (g, gt) in enumerate(zip(grads, trial_grads)):
            p = gt * g
            state.alpha_per_param[i] = state.alpha_per_param[i] + cfg.beta * _sign_guard(p, eps)
        lr_after = [effective_lr(a, cfg.gamma) for a in state.alpha_per_param]
    else:
        p = sum(float(np.dot(gt.ravel(), g.ravel()))
                for g, gt in zip(grads, trial_grads))
        if cfg.raw_alpha_step:
            state.alpha = state.alpha + cfg.beta * p
        else:
            state.alpha = state.alpha + cfg.beta * float(_sign_guard(p, eps))
        lr_a = effective_lr(state.alpha, cfg.gamma)
        lr_after = [np.full_like(g, lr_a) for g in grads]

    params.replace([w - lr * d for w, lr, d in zip(values, lr_after, step_dir)])
    state.step_count += 1
    return StepInfo(loss=loss, grads=grads, lr_before=lr_before,
                    lr_after=lr_after, step_dir=step_dir, adapted=True)


def miss_probe(params_before, step_dir, lr_before, lr_after, loss_fn) -> bool:
    """Did this step's rate adaptation hurt?

    Compares the loss of the step that would have been taken without
    adaptation, f(W - lr_before * dir), against the adapted one,
    f(W - lr_after * dir); a miss is a strict increase.  Read-only: both
    candidates are evaluated on snapshots, nothing is committed.
    """
    before = [w - lr * d for w, lr, d in zip(params_before, lr_before, step_dir)]
    after = [w - lr * d for w, lr, d in zip(params_before, lr_after, step_dir)]
    loss_plain = loss_fn(before)
    loss_adapted = loss_fn(after)
    if not (np.isfinite(loss_plain) and np.isfinite(loss_adapted)):
        raise NonFiniteError("miss_probe: non-finite loss at a probe point")
    return loss_adapted > loss_plain
