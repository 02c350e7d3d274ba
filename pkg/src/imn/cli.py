"""Command-line entry point: ``imn generate | train | explain | benchmark``.

Every overridable setting resolves as flag > ``--config`` JSON file > default.
All artifacts are written with sorted keys and ``repr`` floats so that a rerun
with the same seed reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .baselines import auroc, gain, train_cart, train_logreg
from .data import (
    XAI_KINDS,
    Dataset,
    PreprocessorState,
    XaiDatasetSpec,
    dataset_to_csv,
    fit_preprocessor,
    gen_half_moons,
    gen_xai_dataset,
    infer_schema,
    infer_task,
    load_csv,
    split_indices,
    transform,
)
from .explain import (
    decision_boundary,
    dumps_attributions,
    global_importance,
    grouped_importance,
    impacts,
    local_attribution,
    neighborhood_accuracy,
)
from .metrics import (
    MetricReport,
    faithfulness,
    mean_infidelity,
    mean_monotonicity,
    random_attributions,
    retrain_accuracy,
    roar_score,
    shapley_corr,
)
from .net import NetConfig
from .train import SnapshotEnsemble, TrainConfig, checkpoint_dict, net_config_for, train

logger = logging.getLogger("imn")

FORMAT_VERSION = 1
KIND_ALIASES = {"gaussian-piecewise": "gaussian-piecewise-constant"}
DATASET_KINDS = ("half-moons",) + XAI_KINDS

# flag destination -> default; these are the keys a --config file may set
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    # training
    "epochs": 500,
    "batch_size": 64,
    "lr": 0.01,
    "weight_decay": 0.01,
    "warmup_epochs": 5,
    "lambda_l1": 0.1,
    "cycles": 5,
    "blocks": 2,
    "width": 128,
    "dropout": 0.25,
    # data
    "kind": "half-moons",
    "n": 1000,
    "noise": 0.1,
    "rho": 0.0,
    "n_features": 5,
    "n_train": 500,
    "n_val": 50,
    "target": "label",
    "categorical": "",
    "task": "auto",
    "val_fraction": 0.2,
    "shrinkage": 10.0,
    # explain
    "mode": "global",
    "index": 0,
    "k": 5,
    "class_choice": "predicted",
    "grid_n": 200,
    "percentile": 1.0,
    # benchmark
    "suite": "xai",
    "kinds": "gaussian-linear",
    "rhos": "0.0",
    "seeds": "",
    "roar_epochs": 50,
    "roar_fractions": "0.0,0.2,0.4,0.6,0.8",
    "n_perturb": 1000,
    "sigma": 0.1,
    "tree_depth": 5,
    "datasets": "half-moons,gaussian-nonlinear-additive",
}


class CLIError(Exception):
    """A user-facing failure reported on stderr with exit code 1."""


# ---------------------------------------------------------------- config plumbing


def train_config_from(cfg: dict[str, Any]) -> TrainConfig:
    return TrainConfig(
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        peak_lr=float(cfg["lr"]),
        weight_decay=float(cfg["weight_decay"]),
        warmup_epochs=int(cfg["warmup_epochs"]),
        lambda_l1=float(cfg["lambda_l1"]),
        n_cycles=int(cfg["cycles"]),
        seed=int(cfg["seed"]),
    )


def net_overrides_from(cfg: dict[str, Any]) -> dict[str, Any]:
    return {
        "n_blocks": int(cfg["blocks"]),
        "hidden_width": int(cfg["width"]),
        "dropout_p": float(cfg["dropout"]),
        "seed": int(cfg["seed"]),
    }


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the optional JSON config file and explicit flags."""
    cfg = dict(DEFAULTS)
    explicit = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            from_file = json.load(fh)
        if not isinstance(from_file, dict):
            raise CLIError("config file must hold a JSON object")
        unknown = sorted(set(from_file) - set(DEFAULTS))
        if unknown:
            raise CLIError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(from_file)
    cfg.update(explicit)
    return cfg


def _csv_list(text: str, cast=str) -> list:
    return [cast(t.strip()) for t in str(text).split(",") if t.strip()]


def _kind(name: str) -> str:
    name = KIND_ALIASES.get(name, name)
    if name not in DATASET_KINDS:
        raise CLIError(f"unknown dataset kind {name!r}; choose from {', '.join(DATASET_KINDS)}")
    return name


def _seeds(cfg: dict[str, Any]) -> list[int]:
    return _csv_list(cfg["seeds"], int) or [int(cfg["seed"])]


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- generate


def xai_spec_from(cfg: dict[str, Any], kind: str, rho: float, seed: int) -> XaiDatasetSpec:
    return XaiDatasetSpec(
        kind=kind,
        n_features=int(cfg["n_features"]),
        n_train=int(cfg["n_train"]),
        n_val=int(cfg["n_val"]),
        rho=float(rho),
        seed=int(seed),
    )


def cmd_generate(cfg: dict[str, Any], out: Path) -> None:
    kind = _kind(cfg["kind"])
    seed = int(cfg["seed"])
    if kind == "half-moons":
        ds = gen_half_moons(int(cfg["n"]), float(cfg["noise"]), seed)
        truth = None
    else:
        spec = xai_spec_from(cfg, kind, cfg["rho"], seed)
        ds, truth = gen_xai_dataset(spec)
    out.mkdir(parents=True, exist_ok=True)
    dataset_to_csv(ds, out / "data.csv", target=cfg["target"])
    if truth is not None:
        params = spec.resolved()
        record = {
            "format_version": FORMAT_VERSION,
            "spec": {
                "kind": kind,
                "n_features": spec.n_features,
                "n_train": spec.n_train,
                "n_val": spec.n_val,
                "rho": spec.rho,
                "seed": spec.seed,
            },
            "weights": [float(w) for w in params["weights"]],
            "nonlinearities": params["nonlinearities"],
            "thresholds": [float(t) for t in params["thresholds"]],
            "attributions": [[float(v) for v in row] for row in truth],
        }
        _write(out / "ground_truth.json", _dumps(record) + "\n")
    print(f"wrote {ds.n_rows} rows x {ds.n_features} features to {out / 'data.csv'}")


# ---------------------------------------------------------------- train


@dataclass
class TrainedRun:
    ensemble: SnapshotEnsemble
    preprocessor: PreprocessorState
    train_config: TrainConfig
    train_set: Dataset
    val_set: Dataset
    summary: dict[str, Any]


def summarize(ens: SnapshotEnsemble, ds: Dataset) -> dict[str, float]:
    if ds.task == "regression":
        pred = ens.predict(ds.X)
        return {"rmse": float(np.sqrt(np.mean((pred - ds.y) ** 2)))}
    out = {"accuracy": float(np.mean(ens.predict(ds.X) == ds.y))}
    try:
        out["auroc"] = auroc(ens.predict_proba(ds.X), ds.y)
    except ValueError:
        out["auroc"] = None  # one class only in this split
    return out


def train_from_csv(path: str | Path, cfg: dict[str, Any], on_epoch=None) -> TrainedRun:
    """Preprocess a CSV (fit on the training split only), train, and summarize."""
    schema = infer_schema(path, cfg["target"], _csv_list(cfg["categorical"]))
    table = load_csv(path, schema)
    task = cfg["task"]
    if task == "auto":
        task = infer_task(table.column(cfg["target"]))
    seed = int(cfg["seed"])
    target_cells = table.column(cfg["target"])
    if any(c is None for c in target_cells):
        raise CLIError("target column has missing values")
    stratify = task != "regression"
    tr_idx, va_idx = split_indices(np.array(target_cells), float(cfg["val_fraction"]), seed, stratify)
    state = fit_preprocessor(table, tr_idx, task, float(cfg["shrinkage"]))
    full = transform(table, state)
    tr, va = full.subset(tr_idx), full.subset(va_idx)
    tcfg = train_config_from(cfg)
    ens = train(tr, tcfg, net_config_for(tr, **net_overrides_from(cfg)), on_epoch=on_epoch)
    summary = {
        "format_version": FORMAT_VERSION,
        "task": task,
        "n_train": tr.n_rows,
        "n_val": va.n_rows,
        "n_features": tr.n_features,
        "train": summarize(ens, tr),
        "val": summarize(ens, va),
        "final_train_loss": ens.history[-1]["train_loss"],
    }
    return TrainedRun(ens, state, tcfg, tr, va, summary)


def cmd_train(cfg: dict[str, Any], data: str, out: Path) -> None:
    log_lines: list[str] = []
    run = train_from_csv(data, cfg, on_epoch=lambda rec: log_lines.append(_dumps(rec)))
    ckpt = checkpoint_dict(
        run.ensemble,
        run.train_config,
        preprocessor=run.preprocessor.to_dict(),
        split={"seed": int(cfg["seed"]), "val_fraction": float(cfg["val_fraction"])},
    )
    _write(out / "checkpoint.json", _dumps(ckpt) + "\n")
    _write(out / "epochs.jsonl", "\n".join(log_lines) + "\n")
    _write(out / "summary.json", _dumps(run.summary) + "\n")
    print(_dumps({"train": run.summary["train"], "val": run.summary["val"]}))


def load_checkpoint(path: str | Path) -> tuple[SnapshotEnsemble, PreprocessorState, dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        ckpt = json.load(fh)
    if ckpt.get("format_version") != FORMAT_VERSION:
        raise CLIError(f"unsupported checkpoint format_version {ckpt.get('format_version')!r}")
    ens = SnapshotEnsemble.from_dict(ckpt["ensemble"])
    state = PreprocessorState.from_dict(ckpt["preprocessor"])
    return ens, state, ckpt


# ---------------------------------------------------------------- explain


def cmd_explain(cfg: dict[str, Any], checkpoint: str, data: str, out: Path) -> None:
    ens, state, _ = load_checkpoint(checkpoint)
    schema = {name: kind for name, kind in state.columns}
    ds = transform(load_csv(data, schema), state)
    if ds.n_features != ens.config.input_dim:
        raise CLIError(f"data has {ds.n_features} features, checkpoint expects {ens.config.input_dim}")
    mode = cfg["mode"]
    if mode == "local":
        i = int(cfg["index"])
        if not 0 <= i < ds.n_rows:
            raise CLIError(f"instance index {i} out of range for {ds.n_rows} rows")
        att = local_attribution(ens, ds.X[i], cfg["class_choice"], index=i)
        text = dumps_attributions([att], ds.feature_names)
        _write(out / "local.jsonl", text)
        sys.stdout.write(text)
    elif mode == "global":
        gi = global_importance(ens, ds)
        grouped = grouped_importance(gi, state.feature_groups)
        _write(out / "global_importance.csv", gi.to_csv())
        _write(out / "global_importance_grouped.csv", grouped.to_csv())
        sys.stdout.write(grouped.to_csv())
    elif mode == "boundary":
        if ens.config.input_dim != 2:
            raise CLIError(f"boundary mode needs 2-D data, checkpoint has {ens.config.input_dim} features")
        lo, hi = ds.X.min(axis=0), ds.X.max(axis=0)
        pad = 0.1 * (hi - lo)
        box = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
        pts = decision_boundary(ens, box, int(cfg["grid_n"]), float(cfg["percentile"]))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ds.feature_names)
        writer.writerows([repr(float(a)), repr(float(b))] for a, b in pts)
        _write(out / "boundary.csv", buf.getvalue())
        print(f"wrote {len(pts)} boundary points")
    elif mode == "neighborhood":
        k = int(cfg["k"])
        mean, per = neighborhood_accuracy(ens, ds, k)
        record = {"format_version": FORMAT_VERSION, "k_per_class": k, "mean": mean, "per_instance": per.tolist()}
        _write(out / "neighborhood.json", _dumps(record) + "\n")
        print(_dumps({"k_per_class": k, "mean": mean}))
    else:
        raise CLIError(f"unknown explain mode {mode!r}")


# ---------------------------------------------------------------- benchmark: xai


def _roar_config(tcfg: TrainConfig, roar_epochs: int) -> TrainConfig:
    warmup = min(tcfg.warmup_epochs, roar_epochs - 1)
    return replace(tcfg, epochs=roar_epochs, warmup_epochs=warmup, n_cycles=1)


def run_xai_cell(
    spec: XaiDatasetSpec,
    tcfg: TrainConfig,
    net_overrides: dict[str, Any],
    roar_epochs: int = 50,
    roar_fractions: Sequence[float] = (0.0, 0.2, 0.4, 0.6, 0.8),
    n_perturb: int = 1000,
    sigma: float = 0.1,
    metrics: Sequence[str] = ("faithfulness", "monotonicity", "roar-monotonicity", "infidelity", "shapley-corr"),
) -> tuple[list[MetricReport], list[dict[str, Any]]]:
    """Train one IMN on a synthetic dataset and score IMN and random attributions.

    Metrics are computed on the training rows. Returns the metric reports and
    a list of error records for metrics that failed.
    """
    ds, truth = gen_xai_dataset(spec)
    tr_idx, va_idx = split_indices(ds.y, spec.val_fraction, spec.seed) if spec.n_val else (np.arange(ds.n_rows), None)
    tr = ds.subset(tr_idx)
    va = ds.subset(va_idx) if va_idx is not None else tr
    truth = truth[tr_idx]
    ens = train(tr, tcfg, net_config_for(tr, **net_overrides))
    X = tr.X
    N, M = X.shape

    def prob(Z):
        return ens.predict_proba(Z)[:, 1]

    def logit(Z):
        return ens.logits(Z)[:, 1]

    imn_attr = impacts(ens, X, 1)[0]
    rand_attr = random_attributions(N, M, spec.seed)
    explainers = {
        "imn": (imn_attr, ens.generate(X).weights[:, 1, :]),
        "random": (rand_attr, rand_attr),
    }
    roar_cfg = _roar_config(tcfg, roar_epochs)
    roar_cache: dict[tuple[int, ...], float] = {}

    def roar_accuracy(removed: Sequence[int]) -> float:
        key = tuple(sorted(removed))
        if key not in roar_cache:
            roar_cache[key] = retrain_accuracy(tr, va, list(key), roar_cfg, net_overrides)
        return roar_cache[key]

    reports, errors = [], []
    for name, (attr, grad_like) in explainers.items():
        for metric in metrics:
            try:
                if metric == "faithfulness":
                    value = faithfulness(prob, attr, X)
                elif metric == "monotonicity":
                    value = mean_monotonicity(prob, attr, X)
                elif metric == "roar-monotonicity":
                    ranking = np.argsort(-np.abs(attr).mean(axis=0), kind="stable")
                    curve = []
                    for frac in sorted(roar_fractions):
                        k = int(round(frac * M))
                        if k >= M:
                            raise ValueError(f"fraction {frac} removes all {M} features")
                        curve.append((frac, roar_accuracy(ranking[:k])))
                    value = roar_score(curve)
                elif metric == "infidelity":
                    value = mean_infidelity(logit, grad_like, X, sigma, n_perturb, spec.seed)
                elif metric == "shapley-corr":
                    value = shapley_corr(attr, truth)
                else:
                    raise ValueError(f"unknown metric {metric!r}")
                if not math.isfinite(value):
                    raise ValueError("metric value is not finite")
                reports.append(MetricReport(spec.kind, spec.rho, name, metric, float(value), N, spec.seed))
            except (ValueError, FloatingPointError) as exc:
                errors.append({"dataset": spec.kind, "rho": spec.rho, "explainer": name, "metric": metric,
                               "seed": spec.seed, "error": str(exc)})
    return reports, errors


def aggregate_reports(reports: Sequence[MetricReport]) -> str:
    groups: dict[tuple, list[float]] = {}
    for r in reports:
        groups.setdefault((r.dataset, r.rho, r.explainer, r.metric), []).append(r.value)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "rho", "explainer", "metric", "mean", "std", "n_seeds"])
    for key in sorted(groups):
        vals = np.array(groups[key])
        writer.writerow([key[0], repr(key[1]), key[2], key[3], repr(float(vals.mean())), repr(float(vals.std())), len(vals)])
    return buf.getvalue()


def bench_xai(cfg: dict[str, Any], out: Path) -> None:
    tcfg_base = train_config_from(cfg)
    reports: list[MetricReport] = []
    lines: list[str] = []
    for kind in _csv_list(cfg["kinds"]):
        kind = _kind(kind)
        if kind == "half-moons":
            raise CLIError("the xai suite needs a synthetic kind with ground truth")
        for rho in _csv_list(cfg["rhos"], float):
            for seed in _seeds(cfg):
                spec = xai_spec_from(cfg, kind, rho, seed)
                logger.info("xai cell %s rho=%s seed=%d", kind, rho, seed)
                over = {**net_overrides_from(cfg), "seed": seed}
                rep, errs = run_xai_cell(
                    spec, replace(tcfg_base, seed=seed), over, int(cfg["roar_epochs"]),
                    _csv_list(cfg["roar_fractions"], float), int(cfg["n_perturb"]), float(cfg["sigma"]),
                )
                reports.extend(rep)
                lines.extend(r.dumps() for r in rep)
                lines.extend(_dumps(e) for e in errs)
    _write(out / "xai_metrics.jsonl", "\n".join(lines) + "\n")
    _write(out / "xai_summary.csv", aggregate_reports(reports))
    print(f"wrote {len(reports)} metric rows to {out / 'xai_metrics.jsonl'}")


# ---------------------------------------------------------------- benchmark: whitebox


def whitebox_split(cfg: dict[str, Any], kind: str, seed: int) -> tuple[Dataset, Dataset]:
    kind = _kind(kind)
    if kind == "half-moons":
        ds = gen_half_moons(int(cfg["n"]), float(cfg["noise"]), seed)
        tr, va = split_indices(ds.y, float(cfg["val_fraction"]), seed, stratified=True)
    else:
        spec = xai_spec_from(cfg, kind, cfg["rho"], seed)
        ds, _ = gen_xai_dataset(spec)
        tr, va = split_indices(ds.y, spec.val_fraction, seed, stratified=True)
    return ds.subset(tr), ds.subset(va)


def run_whitebox(
    tr: Dataset, va: Dataset, tcfg: TrainConfig, net_overrides: dict[str, Any], tree_depth: int = 5
) -> dict[str, float]:
    """Validation AUROC of IMN, logistic regression and a depth-limited tree."""
    ens = train(tr, tcfg, net_config_for(tr, **net_overrides))
    return {
        "imn": auroc(ens.predict_proba(va.X), va.y),
        "logreg": auroc(train_logreg(tr).predict_proba(va.X), va.y),
        "cart": auroc(train_cart(tr, max_depth=tree_depth).predict_proba(va.X), va.y),
    }


def bench_whitebox(cfg: dict[str, Any], out: Path) -> None:
    tcfg_base = train_config_from(cfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "seed", "method", "val_auroc", "gain_over_tree", "error"])
    n_rows = 0
    for kind in _csv_list(cfg["datasets"]):
        for seed in _seeds(cfg):
            logger.info("whitebox %s seed=%d", kind, seed)
            try:
                tr, va = whitebox_split(cfg, kind, seed)
                scores = run_whitebox(tr, va, replace(tcfg_base, seed=seed),
                                      {**net_overrides_from(cfg), "seed": seed}, int(cfg["tree_depth"]))
            except (ValueError, FloatingPointError) as exc:
                writer.writerow([kind, seed, "", "", "", str(exc)])
                continue
            for method, value in scores.items():
                writer.writerow([kind, seed, method, repr(value), repr(gain(value, scores["cart"])), ""])
                n_rows += 1
    _write(out / "whitebox.csv", buf.getvalue())
    print(f"wrote {n_rows} rows to {out / 'whitebox.csv'}")


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--config", default=None, help="JSON file of settings; flags override it")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")

    training = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = training.add_argument_group("training")
    g.add_argument("--epochs", type=int, help="default 500")
    g.add_argument("--batch-size", dest="batch_size", type=int, help="default 64")
    g.add_argument("--lr", type=float, help="peak learning rate, default 0.01")
    g.add_argument("--weight-decay", dest="weight_decay", type=float, help="default 0.01")
    g.add_argument("--warmup-epochs", dest="warmup_epochs", type=int, help="default 5")
    g.add_argument("--lambda-l1", dest="lambda_l1", type=float, help="L1 penalty on generated models, default 0.1")
    g.add_argument("--cycles", type=int, help="cosine cycles = snapshots, default 5")
    g.add_argument("--blocks", type=int, help="residual blocks, default 2")
    g.add_argument("--width", type=int, help="hidden units, default 128")
    g.add_argument("--dropout", type=float, help="default 0.25")

    synth = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    s = synth.add_argument_group("synthetic data")
    s.add_argument("--n", type=int, help="half-moons rows, default 1000")
    s.add_argument("--noise", type=float, help="half-moons noise std, default 0.1")
    s.add_argument("--rho", type=float, help="feature correlation, default 0.0")
    s.add_argument("--n-features", dest="n_features", type=int, help="default 5")
    s.add_argument("--n-train", dest="n_train", type=int, help="default 500")
    s.add_argument("--n-val", dest="n_val", type=int, help="default 50")

    parser = argparse.ArgumentParser(prog="imn", description="Interpretable mesomorphic networks for tabular data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common, synth], help="write a synthetic dataset CSV",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--kind", help=f"one of {', '.join(DATASET_KINDS)}")
    p.add_argument("--target", help="label column name, default 'label'")

    p = sub.add_parser("train", parents=[common, training], help="fit an IMN on a CSV",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--data", required=True)
    p.add_argument("--target")
    p.add_argument("--categorical", help="comma-separated categorical column names")
    p.add_argument("--task", choices=["auto", "binary", "multiclass", "regression"])
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--shrinkage", type=float, help="target-encoding shrinkage, default 10")

    p = sub.add_parser("explain", parents=[common], help="explain a trained checkpoint",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=["local", "global", "boundary", "neighborhood"])
    p.add_argument("--index", type=int, help="row for local mode")
    p.add_argument("--k", type=int, help="neighbours per class for neighborhood mode")
    p.add_argument("--class", dest="class_choice", help="'predicted' or a class index")
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--percentile", type=float)

    p = sub.add_parser("benchmark", parents=[common, training, synth], help="run the xai or whitebox suite",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--suite", choices=["xai", "whitebox"])
    p.add_argument("--kinds", help="xai: comma-separated synthetic kinds")
    p.add_argument("--rhos", help="xai: comma-separated correlations")
    p.add_argument("--seeds", help="comma-separated seeds (default: --seed)")
    p.add_argument("--roar-epochs", dest="roar_epochs", type=int)
    p.add_argument("--roar-fractions", dest="roar_fractions")
    p.add_argument("--n-perturb", dest="n_perturb", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--tree-depth", dest="tree_depth", type=int)
    p.add_argument("--datasets", help="whitebox: comma-separated dataset kinds")
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    paths = {k: vars(args).pop(k) for k in ("data", "checkpoint") if k in vars(args)}
    out = Path(getattr(args, "out", "."))
    try:
        cfg = resolve_config(args)
        if args.command == "generate":
            cmd_generate(cfg, out)
        elif args.command == "train":
            cmd_train(cfg, paths["data"], out)
        elif args.command == "explain":
            cmd_explain(cfg, paths["checkpoint"], paths["data"], out)
        elif cfg["suite"] == "xai":
            bench_xai(cfg, out)
        else:
            bench_whitebox(cfg, out)
    except (CLIError, ValueError, OSError, KeyError, FloatingPointError) as exc:
        print(f"imn: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
