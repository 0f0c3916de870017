"""Pipeline commands behind the CLI. Each writes into one output directory and
finishes with a ``manifest.json`` listing every file it produced."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, econinfo, synthetic
from .data import DataError, Dataset, load_dataset, save_dataset, split
from .hypersearch import VC_BOUND_NOTE, SearchSpace, default_space, random_search, vc_bound
from .parallel import default_workers
from .training import Ensemble, Hyperparameters, TrainedModel, TrainingError, accuracy, repeat_train, train

log = logging.getLogger(__name__)


class CommandError(RuntimeError):
    pass


def _num(v):
    return repr(float(v))


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


class Output:
    """Output directory that records what it writes; timings go to a side file
    so the manifest itself stays byte-stable."""

    def __init__(self, root, command: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files: list[str] = []
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        if rel not in self.files:
            self.files.append(rel)
        return p

    def write_text(self, rel: str, text: str) -> Path:
        p = self.path(rel)
        p.write_text(text, encoding="utf-8")
        return p

    def write_csv(self, rel: str, header, rows) -> Path:
        lines = [",".join(header)]
        for r in rows:
            lines.append(",".join(_num(v) if isinstance(v, (float, np.floating)) else str(v) for v in r))
        return self.write_text(rel, "\n".join(lines) + "\n")

    def stage(self, name: str, t0: float):
        self.timings[name] = time.perf_counter() - t0

    def finish(self, config_echo: dict, **extra) -> dict:
        self.timings["total"] = time.perf_counter() - self._t0
        self.write_text("timings.json", _dump_json(self.timings))
        manifest = {"command": self.command, "tool_version": __version__,
                    "config": config_echo, "artifacts": sorted(self.files), **extra}
        (self.root / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")
        return manifest


def _echo(cfg: dict, *sections) -> dict:
    out = {s: cfg[s] for s in sections if s in cfg}
    if "data" in out:
        d = dict(out["data"])
        for k in ("path", "schema"):
            if d.get(k):
                d[k] = Path(d[k]).name
        out["data"] = d
    return out


def _workers(cfg) -> int:
    w = cfg["run"]["workers"]
    return default_workers() if w is None else max(1, w)


def load_data(cfg) -> Dataset:
    path = cfg["data"]["path"]
    if not path:
        raise CommandError("no dataset given (use --data or data.path)")
    return load_dataset(path, cfg["data"]["schema"])


def splits_for(cfg, data: Dataset):
    return split(data.n_obs, tuple(cfg["split"]["ratios"]), cfg["split"]["seed"])


def hyper_from(cfg) -> Hyperparameters:
    t = cfg["train"]
    return Hyperparameters(depth=t["depth"], width=t["width"], l1=float(t["l1"]), l2=float(t["l2"]),
                           dropout_rate=float(t["dropout_rate"]), learn_rate=float(t["learn_rate"]),
                           batch_size=t["batch_size"], epochs=t["epochs"], seed=t["seed"],
                           patience=t["patience"])


def space_from(cfg) -> SearchSpace:
    s, d = cfg["search"], default_space()
    return SearchSpace(*(s[k] if s[k] is not None else getattr(d, k)
                         for k in ("depth_choices", "width_choices", "l1_choices",
                                   "l2_choices", "dropout_choices")))


def _log_lines(model: TrainedModel) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in model.history)


# -- synth --------------------------------------------------------------------

def cmd_synth(cfg, out) -> dict:
    o = Output(out, "synth")
    t0 = time.perf_counter()
    try:
        data, truth = synthetic.build(cfg["synth"])
    except (KeyError, ValueError, TypeError) as e:
        raise CommandError(f"invalid synthetic spec: {e}") from e
    save_dataset(data, o.path("data.csv"))
    o.path("data.schema.json")
    o.write_text("ground_truth.json", _dump_json(truth.to_dict()))
    o.stage("synth", t0)
    return o.finish(_echo(cfg, "synth"), data_fingerprint=data.fingerprint(),
                    seeds={"synth": cfg["synth"]["seed"]}, n_obs=data.n_obs,
                    n_features=data.n_features, n_alts=data.n_alts)


# -- train --------------------------------------------------------------------

def cmd_train(cfg, out) -> dict:
    o = Output(out, "train")
    data = load_data(cfg)
    sp = splits_for(cfg, data)
    hyper = hyper_from(cfg)
    t0 = time.perf_counter()
    model = train(data, sp, hyper, cfg["data"]["standardize"])
    o.stage("train", t0)
    model.save(o.path("model.json"))
    o.write_text("train_log.jsonl", _log_lines(model))
    return o.finish(_echo(cfg, "data", "split", "train"), data_fingerprint=data.fingerprint(),
                    seeds={"split": cfg["split"]["seed"], "train": hyper.seed},
                    val_accuracy=model.val_accuracy,
                    test_accuracy=accuracy(model, data, sp.test))


# -- search -------------------------------------------------------------------

def cmd_search(cfg, out) -> dict:
    o = Output(out, "search")
    data = load_data(cfg)
    sp = splits_for(cfg, data)
    s = cfg["search"]
    t0 = time.perf_counter()
    res = random_search(data, sp, space_from(cfg), s["s"], s["seed"], hyper_from(cfg),
                        cfg["data"]["standardize"], _workers(cfg))
    o.stage("search", t0)
    lines, walls = [], {}
    for c in res.candidates:
        rel = None
        if c.ok:
            rel = f"candidates/cand_{c.index:03d}.json"
            c.model.save(o.path(rel))
        walls[f"cand_{c.index:03d}"] = c.wall_time
        lines.append(json.dumps({"index": c.index, "config": c.hyper.to_dict(), "seed": c.hyper.seed,
                                 "val_accuracy": c.val_accuracy, "model_path": rel,
                                 "error": c.error}, sort_keys=True))
    o.write_text("search_manifest.jsonl", "\n".join(lines) + "\n")
    res.best.model.save(o.path("best_model.json"))
    o.timings.update({f"wall_{k}": v for k, v in walls.items()})
    return o.finish(_echo(cfg, "data", "split", "train", "search"),
                    data_fingerprint=data.fingerprint(),
                    seeds={"split": cfg["split"]["seed"], "search": s["seed"],
                           "candidates": [c.hyper.seed for c in res.candidates]},
                    best_index=res.best_index, best_val_accuracy=res.best.val_accuracy,
                    failures=res.failures, space_cardinality=space_from(cfg).cardinality())


# -- repeat -------------------------------------------------------------------

def cmd_repeat(cfg, out, model_path=None) -> dict:
    o = Output(out, "repeat")
    data = load_data(cfg)
    sp = splits_for(cfg, data)
    hyper = TrainedModel.load(model_path).hyper if model_path else hyper_from(cfg)
    r = cfg["repeat"]
    t0 = time.perf_counter()
    ens = repeat_train(data, sp, hyper, r["m"], r["seed_base"], cfg["data"]["standardize"], _workers(cfg))
    o.stage("repeat", t0)
    for i, m in enumerate(ens):
        m.save(o.path(f"models/model_{i:03d}.json"))
        o.write_text(f"logs/model_{i:03d}.jsonl", _log_lines(m))
    return o.finish(_echo(cfg, "data", "split", "repeat"), data_fingerprint=data.fingerprint(),
                    hyperparameters=replace(hyper, seed=0).to_dict(),
                    seeds={"split": cfg["split"]["seed"], "models": [m.hyper.seed for m in ens]},
                    val_accuracies=[m.val_accuracy for m in ens])


def load_ensemble(path) -> Ensemble:
    path = Path(path)
    files = sorted((path / "models").glob("model_*.json")) if (path / "models").is_dir() else []
    if not files and path.is_file():
        files = [path]
    if not files:
        raise CommandError(f"no model files under {path}")
    return Ensemble(tuple(TrainedModel.load(f) for f in files))


# -- econ ---------------------------------------------------------------------

def _grid(spec, column) -> np.ndarray:
    if spec is None:
        return np.linspace(column.min(), column.max(), 25)
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec.get("num", 25)))
    return np.asarray(spec, dtype=np.float64)


def _edits(data: Dataset, spec) -> list[econinfo.Edit]:
    return [econinfo.Edit(data.feature_index(e["feature"]), e.get("op", "add"), float(e["value"]))
            for e in spec]


def _econ_options(cfg, data: Dataset) -> dict:
    e = cfg["econ"]
    amap = data.attribute_map
    vot_alt = next((k for k, a in sorted(amap.items()) if a.cost is not None and a.time), None)
    opts = {}
    if (e["vot_time"] or e["vot_cost"]) and not amap:
        raise CommandError("VOT requested but the dataset schema has no attribute_map")
    if e["scenario1"] and not amap:
        raise CommandError("welfare requested but the dataset schema has no attribute_map")
    if e["vot_time"] and e["vot_cost"]:
        opts["vot"] = (data.feature_index(e["vot_time"]), data.feature_index(e["vot_cost"]))
    elif vot_alt is not None:
        a = amap[vot_alt]
        opts["vot"] = (a.time[-1], a.cost)
    if e["slice_feature"]:
        opts["slice"] = data.feature_index(e["slice_feature"])
    elif "vot" in opts:
        opts["slice"] = opts["vot"][1]
    else:
        opts["slice"] = 0
    if e["scenario1"] is not None:
        opts["welfare"] = (_edits(data, e["scenario0"]), _edits(data, e["scenario1"]))
    elif "vot" in opts:
        opts["welfare"] = ([], [econinfo.Edit(opts["vot"][1], "add", -1.0)])
    K = data.n_alts
    if e["substitution"]:
        opts["pairs"] = [(data.alt_index(a), data.alt_index(b)) for a, b in e["substitution"]]
    else:
        opts["pairs"] = [(a, b) for a in range(K) for b in range(K) if a != b]
    return opts


def _group_bundle(o: Output, name: str, ens: Ensemble, data: Dataset, idx, opts, scale) -> dict:
    x = data.features[idx]
    y = data.choices[idx]
    alts, feats = data.alt_names, data.feature_names

    s = econinfo.choice_probabilities(ens, x)
    pred = np.argmax(s, axis=1)
    o.write_csv(f"{name}/probabilities.csv", ["row", *[f"p_{a}" for a in alts], "predicted", "chosen"],
                [[int(i), *p, int(k), int(c)] for i, p, k, c in zip(idx, s, pred, y)])
    shares = s.mean(axis=0)

    base = x.mean(axis=0)
    sub_rows = []
    s_base = econinfo.choice_probabilities(ens, base)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        for k1, k2 in opts["pairs"]:
            per_i = s[:, k1] / s[:, k2]
            sub_rows.append([alts[k1], alts[k2], float(s_base[k1] / s_base[k2]),
                             float(np.median(per_i))])
    o.write_csv(f"{name}/substitution.csv", ["alt1", "alt2", "ratio_at_mean", "median_ratio"], sub_rows)

    deriv = econinfo.probability_derivatives(ens, x).mean(axis=0).T
    o.write_csv(f"{name}/derivatives.csv", ["feature", *alts],
                [[f, *row] for f, row in zip(feats, deriv)])

    et = econinfo.elasticity_table(ens, x, feats, alts)
    o.write_csv(f"{name}/elasticity_mean.csv", ["feature", *alts], [[f, *r] for f, r in zip(feats, et.mean)])
    o.write_csv(f"{name}/elasticity_std.csv", ["feature", *alts], [[f, *r] for f, r in zip(feats, et.std)])

    grid = opts.get("grid")
    if grid is None:
        grid = _grid(None, x[:, opts["slice"]])
    sc = econinfo.slice_curve(ens, x, opts["slice"], grid)
    header = ["grid"]
    for m in ens:
        header += [f"m{m.hyper.seed}_{a}" for a in alts]
    header += [f"mean_{a}" for a in alts]
    rows = []
    for g in range(sc.grid.size):
        r = [float(sc.grid[g])]
        for pm in sc.per_model_probs:
            r += list(pm[g])
        r += list(sc.ensemble_mean[g])
        rows.append(r)
    o.write_csv(f"{name}/slice_curve.csv", header, rows)

    per_model_acc = [float(np.mean(m.predict(x) == y)) for m in ens]
    summary = {
        "n_models": len(ens),
        "hyperparameters": replace(ens.hyper, seed=0).to_dict(),
        "seeds": [m.hyper.seed for m in ens],
        "test_accuracy": float(np.mean(pred == y)),
        "per_model_accuracy_mean": float(np.mean(per_model_acc)),
        "per_model_accuracy": per_model_acc,
        "market_shares": dict(zip(alts, map(float, shares))),
        "elasticity_undefined": et.undefined,
        "slice_feature": feats[opts["slice"]],
        "vc_bound": _vc(ens, data),
    }

    if "vot" in opts:
        jt, jc = opts["vot"]
        ind = econinfo.vot_stats(ens, x, jt, jc, "per-individual", scale)
        trn = econinfo.vot_stats(ens, x, jt, jc, "per-training", scale)
        o.write_csv(f"{name}/vot_individual.csv", ["row", "vot", "mrs_literal"],
                    [[int(i), float(v), float(-v)] for i, v in zip(idx, ind.values)])
        o.write_csv(f"{name}/vot_training.csv", ["seed", "median_vot"],
                    [[m.hyper.seed, float(v)] for m, v in zip(ens, trn.values)])
        summary["vot"] = {"time_feature": feats[jt], "cost_feature": feats[jc], "scale": scale,
                          **{mode: {"median": st.median, "share_negative": st.share_negative,
                                    "share_undefined": st.share_undefined}
                             for mode, st in (("per_individual", ind), ("per_training", trn))}}

    if "welfare" in opts:
        sc0, sc1 = opts["welfare"]
        alphas = econinfo.individual_alphas(ens, x, data.attribute_map)
        try:
            wr = econinfo.welfare_change(ens, x, sc0, sc1, alphas)
        except ValueError as e:
            summary["welfare"] = {"error": str(e)}
        else:
            o.write_csv(f"{name}/welfare.csv", ["row", "alpha", "delta"],
                        [[int(i), float(a), float(d)] for i, a, d in zip(idx, alphas, wr.per_individual_delta)])
            summary["welfare"] = {"total_delta": wr.total_delta, "excluded": int(wr.excluded.size),
                                  "n": int(len(idx)),
                                  "scenario0": [vars(e) | {"feature": feats[e.feature]} for e in sc0],
                                  "scenario1": [vars(e) | {"feature": feats[e.feature]} for e in sc1]}
    return summary


def _vc(ens: Ensemble, data: Dataset) -> dict:
    arch = ens.hyper.architecture(data.n_features, data.n_alts)
    W = arch.n_weights()
    L = arch.depth + 1
    return {"n_weights": W, "layers": L, "bound": vc_bound(W, L) if W >= 2 else None,
            "note": VC_BOUND_NOTE}


def baseline_for(ens: Ensemble, data, sp, standardize: bool) -> Ensemble:
    h = replace(ens.hyper, depth=0, width=0, l1=0.0, l2=0.0, dropout_rate=0.0, patience=0)
    return Ensemble((train(data, sp, h, standardize),))


def cmd_econ(cfg, out, ensemble_path) -> dict:
    o = Output(out, "econ")
    data = load_data(cfg)
    sp = splits_for(cfg, data)
    ens = load_ensemble(ensemble_path)
    if ens[0].data_fingerprint != data.fingerprint():
        raise CommandError("ensemble was trained on a different dataset")
    opts = _econ_options(cfg, data)
    if cfg["econ"]["slice_grid"] is not None:
        opts["grid"] = _grid(cfg["econ"]["slice_grid"], None)
    idx = sp.get(cfg["econ"]["split"])
    scale = float(cfg["econ"]["vot_scale"])

    groups = {"dnn": ens}
    if cfg["econ"]["baseline"]:
        t0 = time.perf_counter()
        groups["mnl"] = baseline_for(ens, data, sp, cfg["data"]["standardize"])
        o.stage("baseline", t0)
    summaries = {}
    t0 = time.perf_counter()
    for name, g in groups.items():
        summaries[name] = _group_bundle(o, name, g, data, idx, opts, scale)
    o.stage("econ", t0)

    observed = np.bincount(data.choices[idx], minlength=data.n_alts) / len(idx)
    o.write_csv("shares.csv", ["alternative", "observed", *groups],
                [[a, float(observed[k]), *(summaries[g]["market_shares"][a] for g in groups)]
                 for k, a in enumerate(data.alt_names)])
    summary = {"split": cfg["econ"]["split"], "n_obs": int(len(idx)),
               "alt_names": list(data.alt_names), "feature_names": list(data.feature_names),
               "observed_shares": dict(zip(data.alt_names, map(float, observed))),
               "groups": summaries, "data_fingerprint": data.fingerprint()}
    o.write_text("summary.json", _dump_json(summary))
    return o.finish(_echo(cfg, "data", "split", "econ"), data_fingerprint=data.fingerprint(),
                    seeds={"split": cfg["split"]["seed"],
                           **{g: [m.hyper.seed for m in e] for g, e in groups.items()}})


# -- report -------------------------------------------------------------------

def cmd_report(bundle, out=None) -> dict:
    from .report import render

    bundle = Path(bundle)
    if not (bundle / "summary.json").exists():
        raise CommandError(f"malformed bundle: no summary.json in {bundle}")
    o = Output(out or bundle / "report", "report")
    try:
        summary = json.loads((bundle / "summary.json").read_text(encoding="utf-8"))
        render(bundle, summary, o)
    except (KeyError, ValueError) as e:
        raise CommandError(f"malformed bundle: {e}") from e
    return o.finish({"bundle": bundle.name})


COMMAND_ERRORS = (CommandError, DataError, TrainingError, ValueError, KeyError, OSError)
