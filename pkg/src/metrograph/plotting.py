"""Matplotlib figures written next to command reports.

Signals are drawn on station coordinates; magenta marks positive values
(net out-flow, high centrality) and blue negative ones.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
MAGENTA = "#c2185b"
BLUE = "#1f5fbf"
GREY = "#9e9e9e"

# fixed metadata keeps PNG bytes stable across runs
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, bbox_inches="tight", metadata=_META if str(path).endswith(".png") else None)
    plt.close(fig)


def _draw_links(ax, g, lw=1.0):
    for i, j in g.edge_index_pairs:
        a, b = g.stations[i], g.stations[j]
        ax.plot([a.lon, b.lon], [a.lat, b.lat], color=GREY, lw=lw, zorder=1)


def _map_axes(ax, title):
    ax.set_title(title)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_aspect(1.0 / np.cos(np.radians(51.5)))


def centrality_bars(g, report, path):
    with plt.rc_context(RC):
        order = np.argsort(-report.values, kind="stable")
        fig, ax = plt.subplots(figsize=(max(6, 0.18 * g.n), 3))
        ax.bar(range(g.n), report.values[order], color=MAGENTA)
        ax.set_xticks(range(g.n))
        ax.set_xticklabels([g.ids[i] for i in order], rotation=90)
        ax.set_ylabel("betweenness")
        ax.set_title("Station betweenness centrality")
        _save(fig, path)


def signal_map(g, values, path, title, label, signed=True):
    """Station signal as marker size and colour (magenta positive, blue negative).

    ``signed=False`` is for non-negative signals such as relative population.
    """
    with plt.rc_context(RC):
        values = np.asarray(values, dtype=float)
        fig, ax = plt.subplots(figsize=(6, 5))
        _draw_links(ax, g)
        scale = np.max(np.abs(values)) or 1.0
        sizes = 15 + 250 * np.abs(values) / scale
        colours = [MAGENTA if v >= 0 else BLUE for v in values]
        ax.scatter([s.lon for s in g.stations], [s.lat for s in g.stations], s=sizes, c=colours,
                   alpha=0.8, zorder=2, edgecolors="white", linewidths=0.5)
        if signed:
            ax.scatter([], [], c=MAGENTA, label=f"{label} > 0")
            ax.scatter([], [], c=BLUE, label=f"{label} < 0")
            ax.legend(loc="lower right", frameon=False)
        _map_axes(ax, title)
        _save(fig, path)


def augmentation_map(g, plan, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 5))
        _draw_links(ax, g)
        for a, b in plan.added:
            sa, sb = g.station(a), g.station(b)
            ax.plot([sa.lon, sb.lon], [sa.lat, sb.lat], color=MAGENTA, lw=1.6, ls="--", zorder=3)
        ax.scatter([s.lon for s in g.stations], [s.lat for s in g.stations], s=14, c="black", zorder=2)
        suffix = f", d < {plan.threshold_km:g} km" if plan.constrained else ""
        _map_axes(ax, f"{plan.k}-edge augmentation: {plan.size} new links{suffix}")
        _save(fig, path)


def prediction_scatter(report, targets, path):
    """Predicted against observed evening net out-flow, train and test marked separately."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 4))
        for ids, colour, name in ((report.train_ids, GREY, "train"), (report.test_ids, MAGENTA, "test")):
            if not ids:
                continue
            ax.scatter([targets[s] for s in ids], [report.predictions[s] for s in ids], s=18, c=colour, label=name)
        lo = min(min(targets.values()), min(report.predictions.values()))
        hi = max(max(targets.values()), max(report.predictions.values()))
        ax.plot([lo, hi], [lo, hi], color="black", lw=0.8)
        ax.set_xlabel("observed evening net out-flow")
        ax.set_ylabel("predicted")
        ax.set_title(f"{report.kind}: test MSE {report.test_mse:.4f}" if report.test_mse is not None else report.kind)
        ax.legend(frameon=False)
        _save(fig, path)
