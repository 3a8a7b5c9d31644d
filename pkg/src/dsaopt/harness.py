"""Benchmark driver: experiment presets, deterministic runs, CSV telemetry,
finetuning, ablations and sensitivity sweeps.

A run is fully described by a flat `RunConfig`; identical (config, seed)
produce byte-identical records.csv.  Wall-clock time lives only in the
summary file so it never breaks determinism checks.
"""

from __future__ import annotations

import csv
import io
import math
import time
import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import data as datamod
from . import problems
from .autodiff import NonFiniteError, ParamSet, Rng
from .metrics import classification_report
from .optim import (CLASSIC_RULES, DEFAULT_HYPER, DsaConfig, MissStats,
                    NonFiniteGradientError, classic_step, dsa_step,
                    effective_lr, hd_step, init_state, miss_probe)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


OPTIMIZERS = CLASSIC_RULES + ("hd", "dsa")
OBJECTIVES = ("quadratic", "scalar_square", "sum_regression", "minibatch_trap", "mlp")

DEFAULT_LR = {rule: DEFAULT_HYPER[rule]["lr"] for rule in CLASSIC_RULES}
DEFAULT_LR["hd"] = 0.1
DEFAULT_BETA = {"hd": 0.01, "dsa": 0.1}
DEFAULT_DSA_ALPHA0 = -4.6  # effective initial rate ~0.001 with gamma 0.1

# capture epochs per feature dataset
EPOCH_DEFAULTS = {"iris": 30, "wine": 1000, "car": 500, "agaricus": 100}

CSV_COLUMNS = ("run_id", "iter", "epoch", "loss", "lr_min", "lr_mean", "lr_max",
               "miss", "cum_miss_rate", "w1", "w2", "accuracy", "f1_min", "f1_max",
               "recall_min", "recall_max", "precision_min", "precision_max")


def alpha_for_lr(lr: float, gamma: float) -> float:
    """Pre-sigmoid value whose effective rate gamma*sigmoid(alpha) equals lr."""
    if not 0.0 < lr < gamma:
        raise ConfigError(f"dsa initial rate {lr} must lie strictly inside (0, {gamma})")
    p = lr / gamma
    return math.log(p / (1.0 - p))


@dataclass
class RunConfig:
    experiment: str = "run"
    objective: str = "quadratic"
    dataset: str = ""
    optimizer: str = "sgd"
    seed: int = 0
    epochs: int = 100
    batch_size: int = 0          # 0 = full batch
    shuffle: bool = True
    lr: float | None = None      # None = per-optimizer default
    beta: float | None = None    # hd / dsa adaptation step size
    gamma: float = 0.1
    alpha0: float | None = None  # dsa pre-sigmoid init; derived from lr when absent
    per_parameter: bool = True
    sign_step: bool = True
    miss_probe: bool = False
    quad_a: float = 1.0
    quad_b: float = 95.0
    start_w1: float | None = None
    start_w2: float | None = None
    data_dir: str = "datasets"
    out_dir: str = "runs"

    def resolved(self) -> "RunConfig":
        cfg = replace(self)
        if cfg.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer '{cfg.optimizer}'")
        if cfg.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective '{cfg.objective}'")
        if cfg.objective == "mlp" and not cfg.dataset:
            raise ConfigError("mlp objective requires a dataset")
        if cfg.dataset and cfg.dataset not in datamod.DATASETS:
            raise ConfigError(f"unknown dataset '{cfg.dataset}'")
        if cfg.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if cfg.batch_size < 0:
            raise ConfigError("batch_size must be >= 0 (0 = full batch)")
        if cfg.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if cfg.optimizer == "dsa":
            if cfg.alpha0 is None:
                cfg.alpha0 = (DEFAULT_DSA_ALPHA0 if cfg.lr is None
                              else alpha_for_lr(cfg.lr, cfg.gamma))
            cfg.lr = float(effective_lr(cfg.alpha0, cfg.gamma))
        elif cfg.lr is None:
            cfg.lr = DEFAULT_LR[cfg.optimizer]
        if cfg.beta is None:
            cfg.beta = DEFAULT_BETA.get(cfg.optimizer, 0.0)
        if cfg.lr <= 0 and cfg.optimizer != "dsa":
            raise ConfigError("lr must be positive")
        return cfg


def variant_label(cfg: RunConfig) -> str:
    if cfg.optimizer != "dsa":
        return cfg.optimizer
    label = "dsa"
    if not cfg.per_parameter:
        label += "-sharedalpha"
    if not cfg.sign_step:
        label += "-gradstep"
    return label


def run_id(cfg: RunConfig) -> str:
    return f"{cfg.experiment}-{variant_label(cfg)}-s{cfg.seed}"


# --- flat key=value config files --------------------------------------------

def _field_types() -> dict[str, object]:
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in fields(RunConfig)}


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text: str, ftype) -> object:
    text = text.strip()
    if typing.get_origin(ftype) is not None:  # Optional[float] fields
        if text.lower() == "none":
            return None
        return float(text)
    if ftype is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if ftype is int:
        return int(text)
    if ftype is float:
        return float(text)
    return text


def emit_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    types = _field_types()
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'")
        try:
            values[key] = _parse_value(val, types[key])
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# --- presets -----------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    base: dict
    per_optimizer: dict


PRESETS: dict[str, Preset] = {
    # trap for SGD: the steep axis makes it oscillate at lr 0.01
    "quadratic-95": Preset(
        base=dict(objective="quadratic", quad_a=1.0, quad_b=95.0,
                  start_w1=-1.0, start_w2=1.0, epochs=1000, lr=0.01),
        per_optimizer={"hd": dict(beta=1e-7), "dsa": dict(beta=0.1)}),
    # trap for Adam: extreme curvature ratio, start on the steep slope
    "quadratic-1000": Preset(
        base=dict(objective="quadratic", quad_a=1.0, quad_b=1000.0,
                  start_w1=-0.06, start_w2=0.001, epochs=1000, lr=0.001),
        per_optimizer={"hd": dict(beta=1e-4), "dsa": dict(beta=0.3)}),
    # same surface, the alternative published start point
    "quadratic-1000-text": Preset(
        base=dict(objective="quadratic", quad_a=1.0, quad_b=1000.0,
                  start_w1=-1.0, start_w2=1.0, epochs=1000, lr=0.001),
        per_optimizer={"hd": dict(beta=1e-4), "dsa": dict(beta=0.3)}),
    "scalar-square": Preset(
        base=dict(objective="scalar_square", epochs=100, lr=0.1),
        per_optimizer={"dsa": dict(alpha0=0.0, beta=0.1)}),
    "sum-regression": Preset(
        base=dict(objective="sum_regression", epochs=300),
        per_optimizer={"adam": dict(lr=0.1), "adamw": dict(lr=0.1),
                       "adamax": dict(lr=0.1), "adagrad": dict(lr=0.1),
                       "sgd": dict(lr=0.01),
                       "dsa": dict(lr=0.05, beta=0.5)}),
    "trap-full": Preset(
        base=dict(objective="minibatch_trap", epochs=1000, batch_size=0),
        per_optimizer={}),
    "trap-minibatch": Preset(
        base=dict(objective="minibatch_trap", epochs=500, batch_size=1, shuffle=False),
        per_optimizer={}),
}
for _ds, _ep in EPOCH_DEFAULTS.items():
    PRESETS[f"mlp-{_ds}-{_ep}"] = Preset(
        base=dict(objective="mlp", dataset=_ds, epochs=_ep, batch_size=0),
        per_optimizer={})


def make_config(preset: str, optimizer: str, seed: int = 0, **overrides) -> RunConfig:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}' (known: {', '.join(sorted(PRESETS))})")
    p = PRESETS[preset]
    kwargs = dict(p.base)
    kwargs.update(p.per_optimizer.get(optimizer, {}))
    kwargs.update(overrides)
    return RunConfig(experiment=preset, optimizer=optimizer, seed=seed, **kwargs)


# --- run loop ----------------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    epoch: int
    loss: float
    lr_min: float
    lr_mean: float
    lr_max: float
    miss: bool | None = None
    cum_miss_rate: float | None = None
    w1: float | None = None
    w2: float | None = None
    accuracy: float | None = None
    f1_min: float | None = None
    f1_max: float | None = None
    recall_min: float | None = None
    recall_max: float | None = None
    precision_min: float | None = None
    precision_max: float | None = None


@dataclass
class RunResult:
    config: RunConfig
    run_dir: Path
    records: list[IterationRecord]
    summary: dict
    params: ParamSet
    miss_stats: MissStats
    aborted: bool = False


def _build_problem(cfg: RunConfig, problem_rng: Rng, split_rng: Rng):
    """Returns (objective, batch_plan) where batch_plan(epoch_rng) yields the
    epoch's batches (a batch of None means the objective's full data)."""
    if cfg.objective == "quadratic":
        start = (cfg.start_w1 if cfg.start_w1 is not None else -1.0,
                 cfg.start_w2 if cfg.start_w2 is not None else 1.0)
        return problems.quadratic(cfg.quad_a, cfg.quad_b, start), None, None
    if cfg.objective == "scalar_square":
        start = cfg.start_w1 if cfg.start_w1 is not None else 1.0
        return problems.scalar_square(start), None, None
    if cfg.objective == "sum_regression":
        obj = problems.sum_regression(problem_rng)
        if cfg.batch_size:
            arrays = (np.asarray(obj.features.data), np.asarray(obj.targets.data).ravel())
            return obj, arrays, None
        return obj, None, None
    if cfg.objective == "minibatch_trap":
        obj = problems.minibatch_trap()
        if cfg.batch_size:
            return obj, obj.batches(), None
        return obj, None, None
    # mlp
    loaded = datamod.load_dataset(cfg.dataset, cfg.data_dir)
    split_ = datamod.split(loaded, split_rng)
    obj = problems.mlp(problems.MlpSpec(input_dim=split_.feature_dim,
                                        output_dim=split_.class_count))
    return obj, None, split_


def _epoch_batches(cfg: RunConfig, plan, split_, batch_rng: Rng):
    if cfg.objective == "mlp":
        if cfg.batch_size:
            yield from datamod.epoch_batches(split_, cfg.batch_size, batch_rng, cfg.shuffle)
        else:
            yield split_.train_x, split_.train_y
    elif cfg.objective == "minibatch_trap" and cfg.batch_size:
        yield from plan  # the two one-point batches, in fixed alternation
    elif cfg.objective == "sum_regression" and cfg.batch_size:
        x, y = plan
        n = x.shape[0]
        order = batch_rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            yield x[idx], y[idx]
    else:
        yield None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return repr(float(v))


def _records_csv(rid: str, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([rid, r.iteration, r.epoch, _fmt(r.loss), _fmt(r.lr_min),
                    _fmt(r.lr_mean), _fmt(r.lr_max), _fmt(r.miss),
                    _fmt(r.cum_miss_rate), _fmt(r.w1), _fmt(r.w2), _fmt(r.accuracy),
                    _fmt(r.f1_min), _fmt(r.f1_max), _fmt(r.recall_min),
                    _fmt(r.recall_max), _fmt(r.precision_min), _fmt(r.precision_max)])
    return buf.getvalue()


def _lr_stats(lr_arrays) -> tuple[float, float, float]:
    lo = min(float(a.min()) for a in lr_arrays)
    hi = max(float(a.max()) for a in lr_arrays)
    total = sum(float(a.sum()) for a in lr_arrays)
    count = sum(a.size for a in lr_arrays)
    return lo, total / count, hi


def run(cfg: RunConfig, initial_params: ParamSet | None = None) -> RunResult:
    """Execute one training run and write records.csv, summary.txt and the
    resolved config under out_dir/<run_id>/."""
    cfg = cfg.resolved()
    rid = run_id(cfg)
    t0 = time.perf_counter()

    root = Rng(cfg.seed)
    split_rng = root.split()
    init_rng = root.split()
    batch_rng = root.split()
    problem_rng = root.split()

    objective, plan, split_ = _build_problem(cfg, problem_rng, split_rng)
    params = initial_params if initial_params is not None else objective.build_params(init_rng)

    dsa_cfg = None
    if cfg.optimizer == "dsa":
        dsa_cfg = DsaConfig(beta=cfg.beta, gamma=cfg.gamma, alpha0=cfg.alpha0,
                            per_parameter=cfg.per_parameter,
                            sign_param_step=cfg.sign_step)
    state = init_state(cfg.optimizer, params, dsa_cfg)

    snapshot_dims = params.component_count() if params.component_count() <= 2 else 0
    stats = MissStats()
    records: list[IterationRecord] = []
    aborted = False
    abort_iteration = None
    negative_lr_steps = 0
    it = 0

    for epoch in range(1, cfg.epochs + 1):
        for batch in _epoch_batches(cfg, plan, split_, batch_rng):
            it += 1
            oracle = objective.oracle(batch)
            before = params.values()
            try:
                if cfg.optimizer == "dsa":
                    info = dsa_step(params, oracle, state, dsa_cfg)
                    loss = info.loss
                elif cfg.optimizer == "hd":
                    info = hd_step(params, oracle, state, beta=cfg.beta, alpha0=cfg.lr)
                    loss = info.loss
                else:
                    loss, grads = oracle(params)
                    info = classic_step(cfg.optimizer, params, grads, state,
                                        {"lr": cfg.lr})
                stats.record_step()
                miss = None
                if cfg.miss_probe and info.adapted and stats.steps >= 2:
                    miss = miss_probe(before, info.step_dir, info.lr_before,
                                      info.lr_after, objective.loss_at(batch))
                    stats.record_probe(miss)
            except (NonFiniteError, NonFiniteGradientError):
                aborted = True
                abort_iteration = it
                break
            lo, mean, hi = _lr_stats(info.lr_after)
            if lo < 0:
                negative_lr_steps += 1
            rec = IterationRecord(
                iteration=it, epoch=epoch, loss=loss, lr_min=lo, lr_mean=mean,
                lr_max=hi, miss=miss,
                cum_miss_rate=stats.rate if cfg.miss_probe and info.adapted else None)
            if snapshot_dims:
                flat = np.concatenate([v.ravel() for v in params.values()])
                rec.w1 = float(flat[0])
                if snapshot_dims == 2:
                    rec.w2 = float(flat[1])
            records.append(rec)
        if aborted:
            break
        if split_ is not None and records:
            report = classification_report(objective.predict(params, split_.test_x),
                                           split_.test_y, split_.class_count)
            last = records[-1]
            last.accuracy = report.accuracy
            last.f1_min, last.f1_max = report.span("f1")
            last.recall_min, last.recall_max = report.span("recall")
            last.precision_min, last.precision_max = report.span("precision")

    final_metrics: dict = {}
    if split_ is not None:
        report = classification_report(objective.predict(params, split_.test_x),
                                       split_.test_y, split_.class_count)
        accs = [r.accuracy for r in records if r.accuracy is not None]
        final_metrics = {
            "final_accuracy": report.accuracy,
            "best_accuracy": max(accs) if accs else report.accuracy,
            "final_f1_span": report.format_span("f1"),
            "final_recall_span": report.format_span("recall"),
            "final_precision_span": report.format_span("precision"),
        }

    losses = [r.loss for r in records]
    summary = {
        "run_id": rid,
        "experiment": cfg.experiment,
        "optimizer": cfg.optimizer,
        "variant": variant_label(cfg),
        "seed": cfg.seed,
        "iterations": it if not aborted else it - 1,
        "aborted": aborted,
        "abort_iteration": abort_iteration,
        "final_loss": losses[-1] if losses else None,
        "best_loss": min(losses) if losses else None,
        "miss_rate": stats.rate if cfg.miss_probe else None,
        "probed_steps": len(stats.flags) if cfg.miss_probe else None,
        "negative_lr_steps": negative_lr_steps,
        **final_metrics,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }

    run_dir = Path(cfg.out_dir) / rid
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "records.csv").write_text(_records_csv(rid, records))
    (run_dir / "config.txt").write_text(emit_config(cfg))
    (run_dir / "summary.txt").write_text(
        "".join(f"{k} = {_format_value(v)}\n" for k, v in summary.items()))
    return RunResult(config=cfg, run_dir=run_dir, records=records, summary=summary,
                     params=params, miss_stats=stats, aborted=aborted)


def run_finetune(pre_cfg: RunConfig, fine_cfg: RunConfig) -> tuple[RunResult, RunResult]:
    """Minibatch pretraining with a classic optimizer followed by full-batch
    detection-based finetuning, logged under one run id."""
    pre_cfg = pre_cfg.resolved()
    fine_cfg = replace(fine_cfg, seed=pre_cfg.seed).resolved()
    if pre_cfg.optimizer == "dsa":
        raise ConfigError("finetune: phase 1 must use a non-dsa optimizer")
    if fine_cfg.optimizer != "dsa":
        raise ConfigError("finetune: phase 2 must use dsa")
    if fine_cfg.batch_size != 0:
        raise ConfigError("finetune: phase 2 must run full-batch")
    if fine_cfg.dataset != pre_cfg.dataset:
        raise ConfigError(f"finetune: phase-2 dataset mismatch "
                          f"('{fine_cfg.dataset}' vs '{pre_cfg.dataset}')")
    parent = Path(pre_cfg.out_dir) / f"{pre_cfg.experiment}-finetune-s{pre_cfg.seed}"
    pre = run(replace(pre_cfg, out_dir=str(parent / "phase1")))
    fine = run(replace(fine_cfg, out_dir=str(parent / "phase2")),
               initial_params=pre.params)
    combined = {f"pretrain_{k}": v for k, v in pre.summary.items()}
    combined.update({f"finetune_{k}": v for k, v in fine.summary.items()})
    (parent / "summary.txt").write_text(
        "".join(f"{k} = {_format_value(v)}\n" for k, v in combined.items()))
    return pre, fine


ABLATION_VARIANTS = (
    ("sgd", True, True),
    ("adam", True, True),
    ("dsa", False, True),   # shared scalar alpha
    ("dsa", True, False),   # plain gradient step
    ("dsa", True, True),
)


def run_ablation(target: str, seed: int = 0, out_dir: str = "runs",
                 data_dir: str = "datasets", epochs: int | None = None) -> tuple[Path, list[dict]]:
    """Compare full DSA against its two ablations and the SGD/Adam baselines
    on a feature dataset or a case preset; emits ablation.csv."""
    rows = []
    is_dataset = target in datamod.DATASETS
    if not is_dataset and target not in PRESETS:
        raise ConfigError(f"unknown ablation target '{target}'")
    for optimizer, per_param, sign in ABLATION_VARIANTS:
        overrides: dict = dict(out_dir=out_dir, per_parameter=per_param, sign_step=sign)
        if is_dataset:
            cfg = RunConfig(experiment=f"ablate-{target}", objective="mlp",
                            dataset=target, optimizer=optimizer, seed=seed,
                            epochs=epochs or EPOCH_DEFAULTS[target],
                            data_dir=data_dir, **overrides)
            if optimizer == "dsa":
                cfg = replace(cfg, lr=0.001, beta=0.1)
        else:
            cfg = make_config(target, optimizer, seed, **overrides)
        if epochs is not None:
            cfg = replace(cfg, epochs=epochs)
        result = run(cfg)
        row = {
            "optimizer": optimizer,
            "per_parameter": per_param,
            "sign_step": sign,
            "final_loss": result.summary["final_loss"],
        }
        if is_dataset:
            row["accuracy"] = result.summary["final_accuracy"]
            row["best_accuracy"] = result.summary["best_accuracy"]
        rows.append(row)
    table_dir = Path(out_dir)
    table_dir.mkdir(parents=True, exist_ok=True)
    path = table_dir / f"ablation-{target}-s{seed}.csv"
    cols = list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_format_value(row[c]) for c in cols])
    path.write_text(buf.getvalue())
    return path, rows


def iterations_to_tolerance(records, tol: float) -> int | None:
    """First iteration whose 2-D parameter snapshot is within tol of the origin."""
    for r in records:
        if r.w1 is None:
            return None
        norm = abs(r.w1) if r.w2 is None else max(abs(r.w1), abs(r.w2))
        if norm <= tol:
            return r.iteration
    return None


def run_sweep(axis: str, values, base_cfg: RunConfig,
              tol: float = 1e-3) -> tuple[Path, list[dict]]:
    """One run per value along the alpha0 (given as initial learning rates)
    or beta axis; emits iterations-to-tolerance per value."""
    if axis not in ("alpha0", "beta"):
        raise ConfigError(f"sweep axis must be 'alpha0' or 'beta', got '{axis}'")
    values = list(values)
    if not values:
        raise ConfigError("sweep: values must be non-empty")
    rows = []
    for v in values:
        out = Path(base_cfg.out_dir) / f"sweep-{axis}" / f"{v:g}"
        if axis == "alpha0":
            cfg = replace(base_cfg, lr=float(v), alpha0=None, out_dir=str(out))
        else:
            cfg = replace(base_cfg, beta=float(v), out_dir=str(out))
        result = run(cfg)
        rows.append({
            "axis": axis,
            "value": float(v),
            "iterations_to_tolerance": iterations_to_tolerance(result.records, tol),
            "tolerance": tol,
            "final_loss": result.summary["final_loss"],
        })
    path = Path(base_cfg.out_dir) / f"sweep-{axis}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_format_value(row[c]) for c in cols])
    path.write_text(buf.getvalue())
    return path, rows
