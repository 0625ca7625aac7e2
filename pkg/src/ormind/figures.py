"""Figure rendering for benchmark reports and temperature sweeps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .bench import BenchReport, SweepResult  # noqa: E402

_METRIC_COLORS = {
    "SR": "#2a7f62",
    "MFFR": "#c1553d",
    "IEFR": "#d19a2f",
    "WrongAnswer": "#5c6f91",
}


def render_report_figure(report: BenchReport, path: str | Path) -> Path:
    """Bar chart of the classification rates, saved as an image file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = list(_METRIC_COLORS)
    values = [
        float(report.sr) * 100,
        float(report.mffr) * 100,
        float(report.iefr) * 100,
        float(report.wrong_answer_rate) * 100,
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(labels, values, color=[_METRIC_COLORS[l] for l in labels])
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.1f}%",
            (bar.get_x() + bar.get_width() / 2, value),
            ha="center", va="bottom", fontsize=9,
        )
    ax.set_ylabel("share of problems (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"Benchmark outcome mix (n={report.n})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_sweep_figure(sweep: SweepResult, path: str | Path) -> Path:
    """Metric-versus-temperature line plot, saved as an image file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temps = list(sweep.temps)
    series = {
        "SR": [float(sweep.reports[t].sr) * 100 for t in temps],
        "MFFR": [float(sweep.reports[t].mffr) * 100 for t in temps],
        "IEFR": [float(sweep.reports[t].iefr) * 100 for t in temps],
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in series.items():
        ax.plot(temps, values, marker="o", label=name, color=_METRIC_COLORS[name])
    ax.set_xlabel("temperature")
    ax.set_ylabel("rate (%)")
    ax.set_ylim(-2, 105)
    ax.set_title("Temperature sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
