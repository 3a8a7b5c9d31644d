import math
import xml.etree.ElementTree as ET

import pytest

from dsaopt import plots
from dsaopt.harness import RunConfig, run
from dsaopt.plots import LOG_FLOOR, PlotError, emit_plots

SVG_NS = "{http://www.w3.org/2000/svg}"


def _parse(path):
    root = ET.parse(path).getroot()
    area = next(r for r in root.iter(f"{SVG_NS}rect")
                if r.get("class") == "plot-area")
    series = next(p for p in root.iter(f"{SVG_NS}polyline")
                  if p.get("id") == "series")
    points = [tuple(map(float, pt.split(",")))
              for pt in series.get("points").split()]
    box = {k: float(area.get(k)) for k in ("x", "y", "width", "height")}
    return box, points


def make_run(tmp_path, **kw):
    base = dict(experiment="plotme", objective="quadratic", optimizer="dsa",
                epochs=30, out_dir=str(tmp_path))
    base.update(kw)
    return run(RunConfig(**base))


def test_loss_chart_written_and_labeled(tmp_path):
    result = make_run(tmp_path)
    paths = emit_plots(result.run_dir)
    names = {p.name for p in paths}
    assert {"loss.svg", "trajectory.svg"} <= names
    text = (result.run_dir / "loss.svg").read_text()
    assert "iteration" in text and "loss" in text
    ET.fromstring(text)  # well-formed XML


def test_trajectory_final_point_matches_final_csv_row(tmp_path):
    result = make_run(tmp_path)
    emit_plots(result.run_dir)
    box, points = _parse(result.run_dir / "trajectory.svg")
    w1 = [r.w1 for r in result.records]
    w2 = [r.w2 for r in result.records]

    def span(vals):
        lo, hi = min(vals), max(vals)
        if hi - lo < 1e-12:
            pad = max(abs(lo) * 0.1, 0.5)
            lo, hi = lo - pad, hi + pad
        return lo, hi

    x0, x1 = span(w1)
    y0, y1 = span(w2)
    expected_x = box["x"] + (w1[-1] - x0) / (x1 - x0) * box["width"]
    expected_y = box["y"] + (1 - (w2[-1] - y0) / (y1 - y0)) * box["height"]
    assert points[-1][0] == pytest.approx(expected_x, abs=0.02)
    assert points[-1][1] == pytest.approx(expected_y, abs=0.02)
    assert len(points) == len(result.records)


def test_zero_loss_is_drawn_at_documented_floor(tmp_path):
    run_dir = tmp_path / "zero"
    run_dir.mkdir()
    header = ",".join(plots.__dict__.get("CSV_COLUMNS", ())) or \
        "run_id,iter,epoch,loss,lr_min,lr_mean,lr_max,miss,cum_miss_rate,w1,w2," \
        "accuracy,f1_min,f1_max,recall_min,recall_max,precision_min,precision_max"
    rows = ["z,1,1,1.0,,,,,,,,,,,,,,",
            "z,2,1,0.0,,,,,,,,,,,,,,"]
    (run_dir / "records.csv").write_text(header + "\n" + "\n".join(rows) + "\n")
    emit_plots(run_dir)
    box, points = _parse(run_dir / "loss.svg")
    y0, y1 = math.log10(LOG_FLOOR), math.log10(1.0)
    floor_y = box["y"] + (1 - (math.log10(LOG_FLOOR) - y0) / (y1 - y0)) * box["height"]
    assert points[-1][1] == pytest.approx(floor_y, abs=0.02)  # bottom of the box


def test_accuracy_and_miss_charts_appear_when_columns_present(tmp_path):
    result = make_run(tmp_path, miss_probe=True)
    names = {p.name for p in emit_plots(result.run_dir)}
    assert "miss_rate.svg" in names


def test_missing_records_is_an_error(tmp_path):
    with pytest.raises(PlotError, match="missing"):
        emit_plots(tmp_path)


def test_empty_records_is_an_error(tmp_path):
    (tmp_path / "records.csv").write_text(
        "run_id,iter,epoch,loss,lr_min,lr_mean,lr_max,miss,cum_miss_rate,w1,w2,"
        "accuracy,f1_min,f1_max,recall_min,recall_max,precision_min,precision_max\n")
    with pytest.raises(PlotError, match="no data rows"):
        emit_plots(tmp_path)
