"""Convergence plots for the ruin / exceedance rate series.

The input is the CSV schema emitted by the hawkesim CLI:

    fig1/fig2:  u, log_estimate_over_u, theta_star
    fig3:       t, log_estimate_over_t, rate

Each series is drawn as ordinate-vs-x with the decay-rate asymptote
(-theta_star or -rate) as an annotated horizontal reference. Rendering
never alters or reorders the data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class SchemaMismatch(Exception):
    """CSV does not match the emitted series schema."""


_SCHEMAS = {
    ("u", "log_estimate_over_u", "theta_star"): (r"$u$", r"$u^{-1}\log p_n(u)$"),
    ("t", "log_estimate_over_t", "rate"): (r"$t$", r"$t^{-1}\log q_{t,n}$"),
}

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 11,
}


@dataclass(frozen=True)
class SeriesFile:
    x: tuple
    ordinate: tuple
    asymptote: float
    x_label: str
    y_label: str


def load_series(path) -> SeriesFile:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path}: empty file")
    header = tuple(rows[0])
    if header not in _SCHEMAS:
        raise SchemaMismatch(f"{path}: unexpected columns {header!r}")
    body = rows[1:]
    if not body:
        raise SchemaMismatch(f"{path}: no data rows")
    try:
        xs = tuple(float(r[0]) for r in body)
        ords = tuple(float(r[1]) for r in body)
        rates = {float(r[2]) for r in body}
    except (ValueError, IndexError) as exc:
        raise SchemaMismatch(f"{path}: non-numeric data ({exc})") from exc
    if len(rates) != 1:
        raise SchemaMismatch(f"{path}: asymptote column is not constant: {sorted(rates)}")
    x_label, y_label = _SCHEMAS[header]
    return SeriesFile(xs, ords, -rates.pop(), x_label, y_label)


def build_figure(series: SeriesFile):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(series.x, series.ordinate, marker="o", color="tab:blue", label="estimate")
        ax.axhline(
            series.asymptote, color="tab:red", linestyle="--",
            label=f"asymptote {series.asymptote:.4g}",
        )
        ax.annotate(
            f"{series.asymptote:.4g}",
            xy=(series.x[-1], series.asymptote),
            xytext=(0, 6),
            textcoords="offset points",
            ha="right",
            color="tab:red",
        )
        ax.set_xlabel(series.x_label)
        ax.set_ylabel(series.y_label)
        ax.legend()
        fig.tight_layout()
    return fig


def render(csv_path, out_path) -> Path:
    """Render one series CSV to an image file (format from the suffix)."""
    series = load_series(csv_path)
    fig = build_figure(series)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
