"""Plain-text summary of an econ bundle plus figures rendered next to it."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import plotting


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _fmt(v, nd=3) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return "n/a"
    return f"{v:.{nd}f}"


def _table(header, rows) -> list[str]:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(c).rjust(w) if i else str(c).ljust(w)  # noqa: E731
                               for i, (c, w) in enumerate(zip(r, widths)))
    return [line(header), "-" * len(line(header)), *map(line, rows)]


def render(bundle: Path, summary: dict, out) -> None:
    groups = summary["groups"]
    names = list(groups)
    alts = summary["alt_names"]
    text = [f"Economic information report ({summary['split']} split, n={summary['n_obs']})", ""]

    text += ["Prediction accuracy", ""]
    text += _table(["group", "models", "depth", "width", "ensemble acc", "mean model acc"],
                   [[g, groups[g]["n_models"], groups[g]["hyperparameters"]["depth"],
                     groups[g]["hyperparameters"]["width"], _fmt(groups[g]["test_accuracy"]),
                     _fmt(groups[g]["per_model_accuracy_mean"])] for g in names])
    text.append("")

    text += ["Market shares", ""]
    text += _table(["alternative", "observed", *names],
                   [[a, _fmt(summary["observed_shares"][a]),
                     *(_fmt(groups[g]["market_shares"][a]) for g in names)] for a in alts])
    text.append("")

    for g in names:
        h, mean = _read_csv(bundle / g / "elasticity_mean.csv")
        _, std = _read_csv(bundle / g / "elasticity_std.csv")
        rows = [[m[0], *(f"{float(a):.3f}({float(b):.2f})" for a, b in zip(m[1:], s[1:]))]
                for m, s in zip(mean, std)]
        text += [f"Elasticities, {g}: mean across trainings (std)", ""]
        text += _table(h, rows)
        text.append(f"undefined cells excluded: {groups[g]['elasticity_undefined']}")
        text.append("")

    if any("vot" in groups[g] for g in names):
        text += ["Value of time", ""]
        rows = []
        for g in names:
            v = groups[g].get("vot")
            if not v:
                continue
            for mode in ("per_individual", "per_training"):
                st = v[mode]
                rows.append([g, mode.replace("_", "-"), _fmt(st["median"], 2),
                             _fmt(st["share_negative"]), _fmt(st["share_undefined"])])
        text += _table(["group", "mode", "median", "share negative", "share undefined"], rows)
        first = next(groups[g]["vot"] for g in names if "vot" in groups[g])
        text.append(f"time feature {first['time_feature']}, cost feature {first['cost_feature']}, "
                    f"scale {first['scale']:g}")
        text.append("")

    if any("welfare" in groups[g] for g in names):
        text += ["Welfare change", ""]
        rows = []
        for g in names:
            w = groups[g].get("welfare")
            if not w:
                continue
            if "error" in w:
                rows.append([g, "n/a", "n/a", w["error"]])
            else:
                rows.append([g, _fmt(w["total_delta"], 2), f"{w['excluded']}/{w['n']}", ""])
        text += _table(["group", "total change", "excluded", "note"], rows)
        text.append("")

    text += ["Capacity diagnostic (W*L*log2 W, order of magnitude only)", ""]
    text += _table(["group", "weights", "layers", "bound"],
                   [[g, groups[g]["vc_bound"]["n_weights"], groups[g]["vc_bound"]["layers"],
                     _fmt(groups[g]["vc_bound"]["bound"], 0)] for g in names])
    out.write_text("report.txt", "\n".join(text) + "\n")

    for g in names:
        header, rows = _read_csv(bundle / g / "slice_curve.csv")
        data = np.array(rows, dtype=float)
        K = len(alts)
        M = (len(header) - 1) // K - 1
        per_model = data[:, 1:1 + K * M].reshape(len(data), M, K).transpose(1, 0, 2)
        mean = data[:, 1 + K * M:]
        plotting.slice_curves(data[:, 0], per_model, mean, alts, groups[g]["slice_feature"],
                              out.path(f"figures/slice_{g}.png"), title=g)
        if (bundle / g / "vot_individual.csv").exists():
            _, vrows = _read_csv(bundle / g / "vot_individual.csv")
            plotting.vot_histogram([float(r[1]) for r in vrows], out.path(f"figures/vot_{g}.png"),
                                   title=f"{g}: value of time across individuals")
