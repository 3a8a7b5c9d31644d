"""Command-line driver for the benchmark harness.

Exit code 0 on success; on failure a single machine-parsable line
``error: <kind>: <message>`` goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import data as datamod
from . import harness
from .autodiff import NonFiniteError
from .data import DataError
from .harness import ConfigError, RunConfig
from .optim import NonFiniteGradientError
from .plots import PlotError, emit_plots


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--optimizer", help="sgd|momentum|adagrad|adadelta|rmsprop|"
                                       "adam|adamw|adamax|hd|dsa")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: runs)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--data-dir")
    p.add_argument("--no-per-parameter", action="store_true",
                   help="dsa: one shared rate variable instead of per-parameter")
    p.add_argument("--no-sign-step", action="store_true",
                   help="dsa: plain gradient step instead of the sign-normalized one")
    p.add_argument("--miss-probe", action="store_true",
                   help="record whether each rate adaptation raised the loss")


def _apply_common(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    mapping = {"optimizer": args.optimizer, "seed": args.seed, "out_dir": args.out,
               "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
               "beta": args.beta, "gamma": args.gamma, "data_dir": args.data_dir}
    for key, val in mapping.items():
        if val is not None:
            updates[key] = val
    if args.no_per_parameter:
        updates["per_parameter"] = False
    if args.no_sign_step:
        updates["sign_step"] = False
    if args.miss_probe:
        updates["miss_probe"] = True
    return replace(cfg, **updates)


def _base_config(args, **kwargs) -> RunConfig:
    if getattr(args, "config", None):
        cfg = harness.load_config(args.config)
        cfg = replace(cfg, **kwargs)
    else:
        cfg = RunConfig(**kwargs)
    return _apply_common(cfg, args)


def _cmd_case(args) -> int:
    if args.config:
        cfg = _base_config(args)
    else:
        cfg = harness.make_config(args.preset, args.optimizer or "dsa",
                                  args.seed if args.seed is not None else 0)
        cfg = _apply_common(cfg, args)
    result = harness.run(cfg)
    print(result.run_dir)
    return 1 if result.aborted else 0


def _cmd_train(args) -> int:
    epochs = args.epochs or harness.EPOCH_DEFAULTS.get(args.dataset, 100)
    cfg = _base_config(args, experiment=f"train-{args.dataset}", objective="mlp",
                       dataset=args.dataset, epochs=epochs)
    if args.epochs is None:
        cfg = replace(cfg, epochs=epochs)
    result = harness.run(cfg)
    print(result.run_dir)
    if result.aborted:
        return 1
    acc = result.summary.get("final_accuracy")
    if acc is not None:
        print(f"final test accuracy: {acc:.2f}%")
    return 0


def _cmd_finetune(args) -> int:
    pre = _base_config(args, experiment=f"pretrain-{args.dataset}", objective="mlp",
                       dataset=args.dataset, optimizer=args.pre_optimizer,
                       epochs=args.pre_epochs, batch_size=args.batch_size or 32)
    pre = replace(pre, optimizer=args.pre_optimizer)  # --optimizer applies to phase 2
    fine = RunConfig(experiment=f"pretrain-{args.dataset}", objective="mlp",
                     dataset=args.dataset, optimizer="dsa",
                     epochs=args.epochs if args.epochs is not None else 10,
                     batch_size=0, lr=args.lr if args.lr is not None else 1e-5,
                     beta=args.beta if args.beta is not None else 0.3,
                     seed=pre.seed, out_dir=pre.out_dir, data_dir=pre.data_dir,
                     miss_probe=args.miss_probe)
    pre_result, fine_result = harness.run_finetune(pre, fine)
    print(fine_result.run_dir.parent.parent)
    pre_acc = pre_result.summary.get("final_accuracy")
    fine_acc = fine_result.summary.get("final_accuracy")
    print(f"pretrain accuracy: {pre_acc:.2f}%  finetuned: {fine_acc:.2f}%")
    return 1 if (pre_result.aborted or fine_result.aborted) else 0


def _cmd_ablate(args) -> int:
    path, rows = harness.run_ablation(args.target,
                                      seed=args.seed if args.seed is not None else 0,
                                      out_dir=args.out or "runs",
                                      data_dir=args.data_dir or "datasets",
                                      epochs=args.epochs)
    print(path)
    for row in rows:
        label = row["optimizer"]
        if label == "dsa":
            label += f"(pp={row['per_parameter']}, sign={row['sign_step']})"
        metric = row.get("accuracy")
        shown = f"accuracy {metric:.2f}%" if metric is not None else \
            f"final loss {row['final_loss']:.3e}"
        print(f"  {label}: {shown}")
    return 0


def _cmd_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    base = harness.make_config(args.preset, "dsa",
                               args.seed if args.seed is not None else 0)
    base = _apply_common(base, args)
    path, rows = harness.run_sweep(args.axis, values, base, tol=args.tol)
    print(path)
    for row in rows:
        print(f"  {row['axis']}={row['value']:g}: iterations to {args.tol:g} = "
              f"{row['iterations_to_tolerance']}")
    return 0


def _cmd_plot(args) -> int:
    for path in emit_plots(args.run_dir):
        print(path)
    return 0


def _cmd_fetch_data(args) -> int:
    target = args.dir or "datasets"
    if args.bootstrap_sklearn:
        for path in datamod.bootstrap_sklearn(target):
            print(path)
        return 0
    ids = args.datasets.split(",") if args.datasets else sorted(datamod.DATASETS)
    failures = []
    for ds in ids:
        try:
            print(datamod.fetch_dataset(ds.strip(), target))
        except Exception as exc:  # noqa: BLE001 - per-dataset reporting
            failures.append((ds, exc))
            print(f"fetch failed for {ds}: {exc}", file=sys.stderr)
    if failures:
        raise DataError(f"could not fetch: {', '.join(ds for ds, _ in failures)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsaopt",
                                     description="optimizer benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("case", help="run a case-study preset")
    p.add_argument("preset", help=f"one of: {', '.join(sorted(harness.PRESETS))}")
    _add_common(p)
    p.set_defaults(fn=_cmd_case)

    p = sub.add_parser("train", help="train the MLP on a feature dataset")
    p.add_argument("--dataset", required=True,
                   help=f"one of: {', '.join(sorted(datamod.DATASETS))}")
    _add_common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("finetune", help="minibatch pretrain, then full-batch dsa")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pre-optimizer", default="momentum")
    p.add_argument("--pre-epochs", type=int, default=180)
    _add_common(p)
    p.set_defaults(fn=_cmd_finetune)

    p = sub.add_parser("ablate", help="dsa ablation table on a dataset or case")
    p.add_argument("target", help="dataset id or case preset")
    _add_common(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("sweep", help="sensitivity sweep on quadratic(1,1000)")
    p.add_argument("--axis", required=True, choices=("alpha0", "beta"),
                   help="alpha0 takes initial learning rates as values")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--preset", default="quadratic-1000")
    p.add_argument("--tol", type=float, default=1e-3)
    _add_common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("plot", help="emit SVG charts for a finished run")
    p.add_argument("run_dir")
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("fetch-data", help="download and verify the UCI files")
    p.add_argument("--dir", help="target directory (default: datasets)")
    p.add_argument("--datasets", help="comma-separated subset (default: all)")
    p.add_argument("--bootstrap-sklearn", action="store_true",
                   help="materialize iris and wine from scikit-learn instead")
    p.set_defaults(fn=_cmd_fetch_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
    except PlotError as exc:
        print(f"error: plot: {exc}", file=sys.stderr)
    except (NonFiniteError, NonFiniteGradientError) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
