"""Static SVG plots: distribution panels, coverage heatmaps, learning curves.

Plain data plots, not publication graphics. SVG output is made
byte-reproducible (fixed hash salt, no embedded date) so identical runs
produce identical files.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analytics import CoverageResult, DistributionReport
from .quantize import CLASS_ORDER
from .scaling import LearningCurveFit, predict_loss

plt.rcParams["svg.hashsalt"] = "drumforge"
_SAVEFIG_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVEFIG_KWARGS)
    plt.close(fig)


def plot_distributions(
    reports: dict[str, DistributionReport], path: str | Path
) -> None:
    """Five stacked panels (tempo, velocity, onset interval, meter, class),
    one normalized trace per dataset."""
    fig, axes = plt.subplots(5, 1, figsize=(8, 14))
    tempo_ax, velocity_ax, interval_ax, meter_ax, class_ax = axes

    for label, report in sorted(reports.items()):
        hist = report.tempo_hist
        tempo_ax.stairs(hist.normalized(), hist.edges(), label=label)
        hist = report.velocity_hist
        velocity_ax.stairs(hist.normalized(), hist.edges(), label=label)
        hist = report.onset_interval_hist
        interval_ax.stairs(hist.normalized(), hist.edges(), label=label)

    tempo_ax.set_xlabel("tempo (bpm)")
    velocity_ax.set_xlabel("velocity")
    interval_ax.set_xlabel("onset interval (beats)")
    for ax in (tempo_ax, velocity_ax, interval_ax):
        ax.set_ylabel("fraction")
        ax.legend(fontsize=8)

    signatures = sorted({
        sig for report in reports.values() for sig in report.time_signature_counts
    })
    width = 0.8 / max(len(reports), 1)
    for offset, (label, report) in enumerate(sorted(reports.items())):
        total = sum(report.time_signature_counts.values()) or 1
        values = [report.time_signature_counts.get(s, 0) / total for s in signatures]
        xs = np.arange(len(signatures)) + offset * width
        meter_ax.bar(xs, values, width=width, label=label)
        class_total = sum(report.class_counts.values()) or 1
        class_values = [
            report.class_counts.get(c, 0) / class_total for c in CLASS_ORDER
        ]
        class_ax.bar(np.arange(len(CLASS_ORDER)) + offset * width, class_values,
                     width=width, label=label)
    meter_ax.set_xticks(np.arange(len(signatures)) + 0.4 - width / 2)
    meter_ax.set_xticklabels([f"{n}/{d}" for n, d in signatures])
    meter_ax.set_ylabel("fraction of bars")
    meter_ax.legend(fontsize=8)
    class_ax.set_xticks(np.arange(len(CLASS_ORDER)) + 0.4 - width / 2)
    class_ax.set_xticklabels([c.value for c in CLASS_ORDER])
    class_ax.set_ylabel("fraction of notes")
    class_ax.legend(fontsize=8)

    fig.tight_layout()
    _save(fig, path)


def plot_coverage_heatmap(
    matrix: dict[tuple[str, str], CoverageResult],
    sources: list[str],
    targets: list[str],
    path: str | Path,
    measure: str = "beat_coverage",
) -> None:
    """Source x target heatmap; cells annotated with the coverage value and
    the target's beat or unique-sequence count in parentheses."""
    values = np.zeros((len(sources), len(targets)))
    for i, source in enumerate(sources):
        for j, target in enumerate(targets):
            values[i, j] = getattr(matrix[(source, target)], measure)

    fig, ax = plt.subplots(figsize=(2 + 1.4 * len(targets), 1.5 + 1.0 * len(sources)))
    image = ax.imshow(values, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(targets)), targets, rotation=30, ha="right")
    ax.set_yticks(range(len(sources)), sources)
    ax.set_xlabel("target")
    ax.set_ylabel("source")
    for i in range(len(sources)):
        for j in range(len(targets)):
            result = matrix[(sources[i], targets[j])]
            count = (result.target_beats if measure == "beat_coverage"
                     else result.target_unique)
            ax.text(j, i, f"{values[i, j]:.2f}\n({count})", ha="center",
                    va="center", fontsize=8,
                    color="white" if values[i, j] < 0.6 else "black")
    fig.colorbar(image, ax=ax, label=measure.replace("_", " "))
    fig.tight_layout()
    _save(fig, path)


def plot_learning_curves(
    fits: dict[str, LearningCurveFit], path: str | Path
) -> None:
    """Log-log points and fitted curves; dashed lines mark each gamma floor."""
    fig, ax = plt.subplots(figsize=(7, 5))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for idx, (label, fit) in enumerate(sorted(fits.items())):
        color = colors[idx % len(colors)]
        if fit.points:
            ns = [p.n_tracks for p in fit.points]
            losses = [p.loss for p in fit.points]
            ax.scatter(ns, losses, s=18, color=color)
            grid = np.geomspace(min(ns), max(ns), 200)
        else:
            grid = np.geomspace(1, 8192, 200)
        ax.plot(grid, [predict_loss(fit, n) for n in grid], color=color,
                label=f"{label} (floor {fit.gamma:.3g})")
        if fit.gamma > 0:
            ax.axhline(fit.gamma, color=color, linestyle="--", linewidth=1)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("training tracks")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
