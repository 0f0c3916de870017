"""Matplotlib helpers for report figures (file output only, Agg backend)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}


def style():
    plt.rcParams.update({
        "figure.figsize": (6.4, 4.2),
        "figure.dpi": 100,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.titlesize": 11,
        "axes.labelsize": 10,
        "legend.fontsize": 8,
        "legend.frameon": False,
        "lines.linewidth": 1.4,
        "svg.hashsalt": "dnnchoice",
    })


def save(fig, path):
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def slice_curves(grid, per_model, mean, alt_names, feature_name, path, title=None):
    """Per-model curves (thin, translucent) under the ensemble mean (thick), one colour
    per alternative.

    ``per_model`` is M x G x K, ``mean`` is G x K.
    """
    style()
    fig, ax = plt.subplots()
    colors = plt.get_cmap("tab10").colors
    for k, alt in enumerate(alt_names):
        c = colors[k % len(colors)]
        for curve in per_model:
            ax.plot(grid, curve[:, k], color=c, alpha=0.25, linewidth=0.7)
        ax.plot(grid, mean[:, k], color=c, linewidth=2.2, label=alt)
    ax.set_xlabel(feature_name)
    ax.set_ylabel("choice probability")
    ax.set_ylim(0, 1)
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    save(fig, path)


def vot_histogram(values, path, xlabel="value of time (currency per hour)", title=None, bins=40):
    style()
    fig, ax = plt.subplots()
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size:
        lo, hi = np.percentile(v, [1, 99])
        if hi <= lo:
            lo, hi = lo - 1, hi + 1
        ax.hist(np.clip(v, lo, hi), bins=bins, range=(lo, hi), color="0.35")
        med = float(np.median(v))
        ax.axvline(med, color="C3", linestyle="--", label=f"median {med:.2f}")
        ax.legend(loc="best")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    save(fig, path)
