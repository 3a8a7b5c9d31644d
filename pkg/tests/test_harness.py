import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsaopt import harness
from dsaopt.harness import (CSV_COLUMNS, ConfigError, PRESETS, RunConfig,
                            alpha_for_lr, emit_config, iterations_to_tolerance,
                            make_config, parse_config, run, run_ablation,
                            run_finetune, run_id, run_sweep, variant_label)

from conftest import DATA_DIR, require_dataset


def tiny_cfg(tmp_path, **kw):
    base = dict(experiment="tiny", objective="scalar_square", optimizer="sgd",
                epochs=5, lr=0.1, out_dir=str(tmp_path / "runs"))
    base.update(kw)
    return RunConfig(**base)


# --- configuration -----------------------------------------------------------

def test_config_round_trip_for_all_presets():
    for name, preset in PRESETS.items():
        for optimizer in ["sgd", "adam", "hd", "dsa"]:
            cfg = make_config(name, optimizer, seed=3)
            assert parse_config(emit_config(cfg)) == cfg
            resolved = cfg.resolved()
            assert parse_config(emit_config(resolved)) == resolved
            assert resolved.resolved() == resolved  # idempotent


@given(st.sampled_from(sorted(PRESETS)), st.sampled_from(harness.OPTIMIZERS),
       st.integers(0, 10_000), st.booleans(), st.booleans())
@settings(max_examples=40, deadline=None)
def test_config_round_trip_property(preset, optimizer, seed, per_param, sign):
    cfg = make_config(preset, optimizer, seed, per_parameter=per_param,
                      sign_step=sign, miss_probe=True)
    assert parse_config(emit_config(cfg)) == cfg


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config("experiment = x\nnot_a_field = 1\n")


def test_parse_rejects_bad_value():
    with pytest.raises(ConfigError, match="bad value"):
        parse_config("epochs = three\n")


def test_parse_rejects3_malformed_line():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config("epochs 3\n")


def test_parse_ignores_comments_and_blanks():
    cfg = parse_config("# a comment\n\nexperiment = demo  # trailing\nepochs = 7\n")
    assert cfg.experiment == "demo" and cfg.epochs == 7


def test_alpha_for_lr_inverts_the_rate():
    alpha = alpha_for_lr(0.01, 0.1)
    assert 0.1 / (1 + np.exp(-alpha)) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ConfigError):
        alpha_for_lr(0.2, 0.1)


def test_resolution_fills_dsa_alpha():
    cfg = RunConfig(objective="quadratic", optimizer="dsa").resolved()
    assert cfg.alpha0 == -4.6
    assert cfg.lr == pytest.approx(0.001, abs=5e-6)
    cfg2 = RunConfig(objective="quadratic", optimizer="dsa", lr=0.01).resolved()
    assert cfg2.alpha0 == pytest.approx(np.log(1 / 9))


def test_resolution_validations():
    with pytest.raises(ConfigError, match="optimizer"):
        RunConfig(optimizer="lion").resolved()
    with pytest.raises(ConfigError, match="objective"):
        RunConfig(objective="rosenbrock").resolved()
    with pytest.raises(ConfigError, match="dataset"):
        RunConfig(objective="mlp").resolved()
    with pytest.raises(ConfigError, match="dataset"):
        RunConfig(objective="mlp", dataset="mnist").resolved()


def test_variant_labels():
    assert variant_label(RunConfig(optimizer="dsa")) == "dsa"
    assert variant_label(RunConfig(optimizer="dsa", per_parameter=False)) == "dsa-sharedalpha"
    assert variant_label(RunConfig(optimizer="dsa", sign_step=False)) == "dsa-gradstep"
    assert variant_label(RunConfig(optimizer="adam", sign_step=False)) == "adam"


# --- the run loop -------------------------------------------------------------

def test_run_writes_schema_exact_records(tmp_path):
    result = run(tiny_cfg(tmp_path))
    text = (result.run_dir / "records.csv").read_text()
    header = text.splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert len(result.records) == 5
    iters = [r.iteration for r in result.records]
    assert iters == sorted(iters) and len(set(iters)) == 5
    for r in result.records:
        assert r.lr_min <= r.lr_mean <= r.lr_max


def test_run_is_byte_deterministic_per_seed(tmp_path):
    cfg_a = tiny_cfg(tmp_path / "a", objective="quadratic", optimizer="dsa",
                     epochs=40, lr=0.01)
    cfg_b = tiny_cfg(tmp_path / "b", objective="quadratic", optimizer="dsa",
                     epochs=40, lr=0.01)
    ra, rb = run(cfg_a), run(cfg_b)
    assert (ra.run_dir / "records.csv").read_bytes() == \
        (rb.run_dir / "records.csv").read_bytes()
    rc = run(tiny_cfg(tmp_path / "c", objective="quadratic", optimizer="dsa",
                      epochs=40, lr=0.01, seed=1))
    assert (ra.run_dir / "records.csv").read_bytes() != \
        (rc.run_dir / "records.csv").read_bytes()


def test_miss_probe_is_read_only(tmp_path):
    base = dict(objective="quadratic", optimizer="dsa", epochs=60, lr=0.01)
    plain = run(tiny_cfg(tmp_path / "plain", **base))
    probed = run(tiny_cfg(tmp_path / "probed", miss_probe=True, **base))
    for a, b in zip(plain.records, probed.records):
        assert a.loss == b.loss and a.w1 == b.w1 and a.w2 == b.w2
        assert (a.lr_min, a.lr_mean, a.lr_max) == (b.lr_min, b.lr_mean, b.lr_max)
        assert a.miss is None
    assert any(r.miss is not None for r in probed.records[1:])


def test_dsa_lr_telemetry_stays_inside_ceiling(tmp_path):
    result = run(tiny_cfg(tmp_path, objective="quadratic", optimizer="dsa",
                          epochs=300, lr=0.01, miss_probe=True))
    for r in result.records:
        assert 0.0 < r.lr_min and r.lr_max < result.config.gamma


def test_non_finite_loss_aborts_with_iteration_recorded(tmp_path):
    cfg = tiny_cfg(tmp_path, objective="quadratic", optimizer="sgd",
                   lr=50.0, epochs=500)
    with np.errstate(over="ignore", invalid="ignore"):
        result = run(cfg)
    assert result.aborted
    assert result.summary["abort_iteration"] is not None
    assert (result.run_dir / "records.csv").exists()
    assert len(result.records) == result.summary["abort_iteration"] - 1


def test_scalar_case_snapshots_single_parameter(tmp_path):
    result = run(tiny_cfg(tmp_path))
    assert all(r.w1 is not None and r.w2 is None for r in result.records)


def test_quadratic_case_snapshots_both_parameters(tmp_path):
    result = run(tiny_cfg(tmp_path, objective="quadratic"))
    assert all(r.w1 is not None and r.w2 is not None for r in result.records)


def test_hd_negative_rate_reaches_telemetry(tmp_path):
    cfg = tiny_cfg(tmp_path, experiment="trap", objective="minibatch_trap",
                   optimizer="hd", epochs=200, batch_size=1, shuffle=False,
                   lr=0.1, beta=0.01, seed=0)
    result = run(cfg)
    assert "negative_lr_steps" in result.summary
    if result.summary["negative_lr_steps"]:
        assert min(r.lr_min for r in result.records) < 0


def test_mlp_run_records_epoch_metrics(tmp_path):
    require_dataset("iris")
    cfg = RunConfig(experiment="iris-smoke", objective="mlp", dataset="iris",
                    optimizer="adam", epochs=3, data_dir=str(DATA_DIR),
                    out_dir=str(tmp_path))
    result = run(cfg)
    assert len(result.records) == 3  # full batch: one iteration per epoch
    assert all(r.accuracy is not None for r in result.records)
    assert result.summary["final_accuracy"] is not None
    spans = (result.records[-1].f1_min, result.records[-1].f1_max)
    assert spans[0] <= spans[1]


def test_minibatch_epochs_cover_training_rows(tmp_path):
    require_dataset("iris")
    cfg = RunConfig(experiment="iris-mb", objective="mlp", dataset="iris",
                    optimizer="sgd", epochs=2, batch_size=32,
                    data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    result = run(cfg)
    assert len(result.records) == 2 * 4  # ceil(120/32) batches per epoch
    assert [r.epoch for r in result.records] == [1] * 4 + [2] * 4


# --- finetune / ablation / sweep ----------------------------------------------

def test_finetune_validations(tmp_path):
    require_dataset("iris")
    good_pre = RunConfig(experiment="ft", objective="mlp", dataset="iris",
                         optimizer="momentum", epochs=1, batch_size=32,
                         data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    good_fine = RunConfig(experiment="ft", objective="mlp", dataset="iris",
                          optimizer="dsa", epochs=1, batch_size=0,
                          data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="phase 1"):
        run_finetune(dataclasses.replace(good_pre, optimizer="dsa"), good_fine)
    with pytest.raises(ConfigError, match="phase 2"):
        run_finetune(good_pre, dataclasses.replace(good_fine, optimizer="adam"))
    with pytest.raises(ConfigError, match="full-batch"):
        run_finetune(good_pre, dataclasses.replace(good_fine, batch_size=16))
    with pytest.raises(ConfigError, match="dataset mismatch"):
        run_finetune(good_pre, dataclasses.replace(good_fine, dataset="wine"))


def test_finetune_zero_epoch_phase2_keeps_phase1_metrics(tmp_path):
    require_dataset("iris")
    pre = RunConfig(experiment="ft0", objective="mlp", dataset="iris",
                    optimizer="momentum", epochs=2, batch_size=32,
                    data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    fine = RunConfig(experiment="ft0", objective="mlp", dataset="iris",
                     optimizer="dsa", epochs=0, batch_size=0,
                     data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    pre_result, fine_result = run_finetune(pre, fine)
    assert fine_result.summary["final_accuracy"] == pre_result.summary["final_accuracy"]
    assert fine_result.summary["iterations"] == 0
    parent = fine_result.run_dir.parent.parent
    assert (parent / "summary.txt").exists()


def test_finetune_continues_from_phase1_parameters(tmp_path):
    require_dataset("iris")
    pre = RunConfig(experiment="ft2", objective="mlp", dataset="iris",
                    optimizer="momentum", epochs=2, batch_size=32,
                    data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    fine = RunConfig(experiment="ft2", objective="mlp", dataset="iris",
                     optimizer="dsa", epochs=2, batch_size=0, lr=1e-5, beta=0.3,
                     data_dir=str(DATA_DIR), out_dir=str(tmp_path))
    pre_result, fine_result = run_finetune(pre, fine)
    first_fine_loss = fine_result.records[0].loss
    pre_final_loss = pre_result.records[-1].loss
    # phase 2's first full-batch loss should be in the ballpark the
    # pretrained parameters left off at, not a fresh-initialization loss
    assert abs(first_fine_loss - pre_final_loss) < 0.5


def test_ablation_table_flags_round_trip(tmp_path):
    path, rows = run_ablation("quadratic-95", seed=0, out_dir=str(tmp_path),
                              epochs=25)
    text = path.read_text().splitlines()
    assert text[0].startswith("optimizer,per_parameter,sign_step")
    assert len(rows) == 5
    parsed = [line.split(",")[:3] for line in text[1:]]
    expected = [[o, str(p).lower(), str(s).lower()]
                for o, p, s in harness.ABLATION_VARIANTS]
    assert parsed == expected


def test_ablation_rejects_unknown_target(tmp_path):
    with pytest.raises(ConfigError, match="ablation target"):
        run_ablation("cifar", out_dir=str(tmp_path))


def test_sweep_single_value_equals_plain_run(tmp_path):
    base = make_config("quadratic-1000", "dsa", seed=0,
                       out_dir=str(tmp_path / "sweep"), epochs=50)
    path, rows = run_sweep("alpha0", [0.001], base)
    plain = run(dataclasses.replace(
        base, lr=0.001, alpha0=None, out_dir=str(tmp_path / "plain")))
    sweep_records = (tmp_path / "sweep" / "sweep-alpha0" / "0.001" /
                     run_id(plain.config) / "records.csv").read_bytes()
    assert sweep_records == (plain.run_dir / "records.csv").read_bytes()
    assert rows[0]["iterations_to_tolerance"] == \
        iterations_to_tolerance(plain.records, 1e-3)


def test_sweep_validations(tmp_path):
    base = make_config("quadratic-1000", "dsa", out_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="axis"):
        run_sweep("epochs", [1], base)
    with pytest.raises(ConfigError, match="non-empty"):
        run_sweep("beta", [], base)


def test_iterations_to_tolerance_reads_snapshots():
    recs = [harness.IterationRecord(iteration=i, epoch=i, loss=1.0, lr_min=0,
                                    lr_mean=0, lr_max=0, w1=w, w2=w)
            for i, w in enumerate([0.5, 0.1, 0.0005, 0.0001], start=1)]
    assert iterations_to_tolerance(recs, 1e-3) == 3
    assert iterations_to_tolerance(recs, 1e-9) is None


# --- CLI ----------------------------------------------------------------------

def test_cli_case_and_plot(tmp_path, capsys):
    from dsaopt.cli import main

    out = str(tmp_path / "runs")
    assert main(["case", "scalar-square", "--optimizer", "sgd", "--epochs", "5",
                 "--out", out]) == 0
    run_dir = capsys.readouterr().out.strip()
    assert main(["plot", run_dir]) == 0
    assert "loss.svg" in capsys.readouterr().out


def test_cli_unknown_preset_is_one_line_error(tmp_path, capsys):
    from dsaopt.cli import main

    assert main(["case", "nope"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: config:") and err.count("\n") == 1


def test_cli_config_file_with_flag_overrides(tmp_path, capsys):
    from dsaopt.cli import main

    cfg = tiny_cfg(tmp_path, epochs=3)
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(emit_config(cfg))
    assert main(["case", "ignored", "--config", str(cfg_path), "--seed", "9"]) == 0
    run_dir = capsys.readouterr().out.strip()
    assert run_dir.endswith("tiny-sgd-s9")


def test_cli_sweep_and_ablate(tmp_path, capsys):
    from dsaopt.cli import main

    assert main(["sweep", "--axis", "beta", "--values", "0.3", "--epochs", "20",
                 "--out", str(tmp_path)]) == 0
    assert "sweep-beta.csv" in capsys.readouterr().out
    assert main(["ablate", "quadratic-95", "--epochs", "10",
                 "--out", str(tmp_path / "ab")]) == 0
    out = capsys.readouterr().out
    assert "ablation-quadratic-95-s0.csv" in out and "dsa(pp=" in out
