"""Self-contained SVG charts rendered straight from a run's records.csv.

No plotting dependency: each chart is a polyline inside a labeled axis
frame.  The plot area is emitted as a ``<rect class="plot-area">`` so tests
(and downstream tools) can recover the data-to-pixel mapping.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

# losses of exactly 0 cannot sit on a log axis; they are drawn at this floor
LOG_FLOOR = 1e-16

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 75, 20, 40, 55


class PlotError(RuntimeError):
    """records.csv missing, empty, or lacking the columns a chart needs."""


def _read_records(run_dir) -> list[dict]:
    path = Path(run_dir) / "records.csv"
    if not path.exists():
        raise PlotError(f"missing records: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise PlotError(f"no data rows in {path}")
    parsed = []
    for row in rows:
        parsed.append({k: (float(v) if v not in ("", None) and k != "run_id" else v)
                       for k, v in row.items()})
    return parsed


def _span(values, log: bool) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi - lo < 1e-12:
        pad = max(abs(lo) * 0.1, 0.5)
        lo, hi = lo - pad, hi + pad
    return lo, hi


class _Chart:
    def __init__(self, title: str, xlabel: str, ylabel: str, log_y: bool = False):
        self.title, self.xlabel, self.ylabel, self.log_y = title, xlabel, ylabel, log_y
        self.parts: list[str] = []

    def render(self, xs, ys, path: Path) -> Path:
        if self.log_y:
            ys = [max(y, LOG_FLOOR) for y in ys]
        x0, x1 = _span(xs, log=False)
        y0, y1 = _span(ys, log=self.log_y)
        pw = WIDTH - MARGIN_L - MARGIN_R
        ph = HEIGHT - MARGIN_T - MARGIN_B

        def px(x):
            return MARGIN_L + (x - x0) / (x1 - x0) * pw

        def py(y):
            v = math.log10(y) if self.log_y else y
            return MARGIN_T + (1.0 - (v - y0) / (y1 - y0)) * ph

        p = self.parts
        p.append(f'<?xml version="1.0" encoding="UTF-8"?>\n'
                 f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
                 f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
        p.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
        p.append(f'<rect class="plot-area" x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" '
                 f'height="{ph}" fill="none" stroke="black" stroke-width="1"/>')
        p.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" '
                 f'font-size="15">{self.title}</text>')
        p.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 12}" '
                 f'text-anchor="middle" font-size="12">{self.xlabel}</text>')
        p.append(f'<text x="18" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" '
                 f'font-size="12" transform="rotate(-90 18 {MARGIN_T + ph / 2:.1f})">'
                 f'{self.ylabel}</text>')
        for i in range(5):
            f = i / 4.0
            xv = x0 + f * (x1 - x0)
            xp = MARGIN_L + f * pw
            p.append(f'<line x1="{xp:.1f}" y1="{MARGIN_T + ph}" x2="{xp:.1f}" '
                     f'y2="{MARGIN_T + ph + 5}" stroke="black"/>')
            p.append(f'<text x="{xp:.1f}" y="{MARGIN_T + ph + 18}" text-anchor="middle" '
                     f'font-size="10">{xv:.4g}</text>')
            yv = y0 + f * (y1 - y0)
            yp = MARGIN_T + (1 - f) * ph
            label = f"1e{yv:.1f}" if self.log_y else f"{yv:.4g}"
            p.append(f'<line x1="{MARGIN_L - 5}" y1="{yp:.1f}" x2="{MARGIN_L}" '
                     f'y2="{yp:.1f}" stroke="black"/>')
            p.append(f'<text x="{MARGIN_L - 8}" y="{yp + 3:.1f}" text-anchor="end" '
                     f'font-size="10">{label}</text>')
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        p.append(f'<polyline id="series" fill="none" stroke="#1f6fb2" '
                 f'stroke-width="1.5" points="{pts}"/>')
        p.append("</svg>\n")
        path.write_text("\n".join(p))
        return path


def emit_plots(run_dir) -> list[Path]:
    """Render every chart the run's records support; always at least the
    loss curve.  Returns the written SVG paths."""
    run_dir = Path(run_dir)
    records = _read_records(run_dir)
    written = []

    iters = [r["iter"] for r in records]
    losses = [r["loss"] for r in records]
    if any(v is None or v == "" for v in losses):
        raise PlotError("records lack loss values")
    written.append(_Chart("training loss", "iteration", "loss", log_y=True)
                   .render(iters, losses, run_dir / "loss.svg"))

    acc = [(r["epoch"], r["accuracy"]) for r in records if r["accuracy"] not in ("", None)]
    if acc:
        written.append(_Chart("test accuracy", "epoch", "accuracy (%)")
                       .render([a[0] for a in acc], [a[1] for a in acc],
                               run_dir / "accuracy.svg"))

    has_w2 = all(r["w2"] not in ("", None) for r in records)
    if has_w2:
        written.append(_Chart("parameter trajectory", "w1", "w2")
                       .render([r["w1"] for r in records], [r["w2"] for r in records],
                               run_dir / "trajectory.svg"))

    mr = [(r["iter"], r["cum_miss_rate"]) for r in records
          if r["cum_miss_rate"] not in ("", None)]
    if mr:
        written.append(_Chart("running miss frequency", "iteration", "miss rate")
                       .render([m[0] for m in mr], [m[1] for m in mr],
                               run_dir / "miss_rate.svg"))
    return written
