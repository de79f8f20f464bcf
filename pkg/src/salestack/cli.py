"""Command-line interface: prepare, train, evaluate, importance, stack, synth, cv.

Configuration is a JSON file (``--config``); flags override its fields.
Every failure prints one JSON line ``{"error": <kind>, "message": <text>}``
to stderr and exits with status 2.
"""
import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import artifact, evalx, svg, synth
from ._rng import child_seed
from .folds import holdout_split, stratified_kfold
from .frame import (CATEGORICAL, DERIVED_FEATURES, MARKET_SCHEMA, REAL, SOCIO_COLUMNS, TARGET,
                    ColumnSpec, Schema, atomic_write, load_csv, load_socio_csv, prepare,
                    write_csv)
from .pipeline import FAMILIES, stage_spec
from .stack import StackSpec, ablation_table, build_stack
from .tune import DEFAULT_GRIDS, cv_report_csv, nested_cv

METRICS_HEADER = ["model", "stage", "accuracy", "precision", "recall", "f1", "error_rate"]
PREPARED_SCHEMA = Schema(MARKET_SCHEMA.columns
                         + (ColumnSpec(TARGET, CATEGORICAL),)
                         + tuple(ColumnSpec(c, REAL) for c in DERIVED_FEATURES)
                         + tuple(ColumnSpec(c, REAL, required=False) for c in SOCIO_COLUMNS))


class CLIError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


DEFAULTS = {
    "market_csv": None, "socio_csv": None, "prepared_csv": None, "out_dir": "out",
    "seed": None, "stage": 1,
    "protocol": {"holdout": 0.25},
    "model": {"family": "boosted", "params": {}},
    "params": {},
    "grid": None,
    "encoding": {"k": 20.0, "folds": 5},
    "stack": {"generators": {"F1": "boosted", "F2": "boosted"}, "generator_params": {},
              "meta_folds": 5},
    "families": list(FAMILIES),
    "n_jobs": 1,
    "synth": {"rows": 10000, "strength": 1.0},
    "cv": {"outer_k": 10, "inner_k": 5, "select_features": True, "metric": "accuracy"},
}


def load_config(args):
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        if not os.path.exists(args.config):
            raise CLIError("config", f"config file not found: {args.config}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                user = json.load(fh)
        except json.JSONDecodeError as e:
            raise CLIError("config", f"invalid JSON in {args.config}: {e}") from None
        base = os.path.dirname(os.path.abspath(args.config))
        for k in ("market_csv", "socio_csv", "prepared_csv", "out_dir"):
            if user.get(k) and not os.path.isabs(user[k]):
                user[k] = os.path.join(base, user[k])
        for k, v in user.items():
            if isinstance(v, dict) and isinstance(cfg.get(k), dict):
                cfg[k].update(v)
            else:
                cfg[k] = v
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.stage is not None:
        cfg["stage"] = args.stage
    if args.model is not None and args.model != cfg["model"]["family"]:
        # model.params belong to the configured family; per-family params still apply
        cfg["model"] = {"family": args.model, "params": {}}
    if args.out is not None:
        cfg["out_dir"] = args.out
    if cfg["seed"] is None:
        raise CLIError("config", "a seed is required (--seed or \"seed\" in the config)")
    if int(cfg["seed"]) < 0:
        raise CLIError("config", "seed must be a nonnegative integer")
    cfg["seed"] = int(cfg["seed"])
    if cfg["stage"] not in (1, 2, 3):
        raise CLIError("config", f"stage must be 1, 2 or 3, got {cfg['stage']!r}")
    if cfg["model"]["family"] not in FAMILIES:
        raise CLIError("config", f"unknown model family {cfg['model']['family']!r}")
    return cfg


def _need_file(cfg, key):
    path = cfg.get(key)
    if not path:
        raise CLIError("config", f"config lacks {key!r}")
    if not os.path.exists(path):
        raise CLIError("io", f"{key} not found: {path}")
    return path


def training_frame(cfg):
    """Prepared frame: from ``prepared_csv`` if given, else prepared from the raw inputs."""
    if cfg.get("prepared_csv"):
        return load_csv(_need_file(cfg, "prepared_csv"), PREPARED_SCHEMA)
    market = _need_file(cfg, "market_csv")
    socio_path = cfg.get("socio_csv")
    if socio_path:
        _need_file(cfg, "socio_csv")
    elif cfg["stage"] > 1:
        raise CLIError("config", "stages 2 and 3 need socio_csv")
    socio = load_socio_csv(socio_path) if socio_path else None
    return prepare(load_csv(market, MARKET_SCHEMA), socio)[0]


def _protocol(cfg):
    p = cfg["protocol"]
    if "cv" in p and p["cv"]:
        return "cv", int(p["cv"])
    return "holdout", float(p.get("holdout", 0.25))


def split_rows(cfg, frame):
    kind, val = _protocol(cfg)
    y = frame[TARGET]
    if kind == "holdout":
        return holdout_split(y, val, child_seed(cfg["seed"], "split"))
    return np.arange(frame.n_rows), np.arange(0)


def model_params(cfg, family):
    params = dict(cfg["model"].get("params") or {}) if family == cfg["model"]["family"] else {}
    extra = cfg.get("params") or {}
    params.update(extra.get(family, {}))
    return params


def make_spec(cfg, family=None):
    family = family or cfg["model"]["family"]
    seed, stage = cfg["seed"], cfg["stage"]
    enc = cfg["encoding"]
    if stage in (1, 2):
        return stage_spec(stage, family, model_params(cfg, family), seed=child_seed(seed, "model"),
                          enc_k=float(enc["k"]), enc_folds=int(enc["folds"]),
                          n_jobs=int(cfg["n_jobs"]))
    st = cfg["stack"]
    return StackSpec(family, model_params(cfg, family), dict(st["generators"]),
                     {k: dict(v) for k, v in st.get("generator_params", {}).items()},
                     int(st["meta_folds"]), float(enc["k"]), int(enc["folds"]),
                     child_seed(seed, "stack"), int(cfg["n_jobs"]))


def fit_spec(spec, frame):
    if isinstance(spec, StackSpec):
        return build_stack(frame, spec)
    return spec.fit(frame)


def _artifact_path(cfg, args):
    if getattr(args, "artifact", None):
        return args.artifact
    return os.path.join(cfg["out_dir"], f"model_{cfg['model']['family']}_stage{cfg['stage']}.json")


def _config_record(cfg):
    keep = ("seed", "stage", "protocol", "model", "params", "encoding", "stack")
    rec = {k: cfg[k] for k in keep}
    if cfg["stage"] != 3:
        rec.pop("stack")
    return rec


def cmd_prepare(cfg, args):
    market = _need_file(cfg, "market_csv")
    socio = load_socio_csv(_need_file(cfg, "socio_csv")) if cfg.get("socio_csv") else None
    frame, rep = prepare(load_csv(market, MARKET_SCHEMA), socio)
    out = cfg["out_dir"]
    write_csv(frame, os.path.join(out, "prepared.csv"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item", "count"])
    w.writerows(rep.to_rows())
    atomic_write(os.path.join(out, "prepare_report.csv"), buf.getvalue())
    print(f"prepared {rep.n_out} of {rep.n_in} rows ({rep.n_rejected} rejected) -> "
          f"{os.path.join(out, 'prepared.csv')}")


def cmd_train(cfg, args):
    frame = training_frame(cfg)
    tr, _ = split_rows(cfg, frame)
    model = fit_spec(make_spec(cfg), frame.take(tr))
    path = _artifact_path(cfg, args)
    artifact.save(path, model, cfg["stage"], _config_record(cfg))
    print(f"trained {cfg['model']['family']} stage {cfg['stage']} on {tr.size} rows -> {path}")


def _metrics_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for fam, stage, rep in rows:
        w.writerow([fam, stage] + [f"{v:.6f}" for v in rep.as_row()])
    return buf.getvalue()


def _oof_proba(cfg, frame, spec):
    _, k = _protocol(cfg)
    p = np.empty(frame.n_rows)
    for tr, te in stratified_kfold(frame[TARGET], k, child_seed(cfg["seed"], "outer")).splits():
        p[te] = fit_spec(spec, frame.take(tr)).predict_proba(frame.take(te))
    return p


def cmd_evaluate(cfg, args):
    path = _artifact_path(cfg, args)
    if not os.path.exists(path):
        raise CLIError("io", f"artifact not found: {path}")
    model, rec = artifact.load(path)
    frame = training_frame(cfg)
    kind, _ = _protocol(cfg)
    if kind == "holdout":
        _, te = split_rows(cfg, frame)
        test = frame.take(te)
        proba = model.predict_proba(test)
        y = test[TARGET]
    else:
        proba = _oof_proba(cfg, frame, make_spec(cfg, rec["family"]))
        y = frame[TARGET]
    pred = (proba >= 0.5).astype(np.int64)
    rep = evalx.report(y, pred)
    out = cfg["out_dir"]
    fam, stage = rec["family"], rec["stage"]
    ks, thr = evalx.ks_statistic(proba, y)
    auc = evalx.roc_auc(proba, y)
    text = rep.text(f"{fam} stage {stage} ({kind})") + f"auc {auc:.4f}  K-S {ks:.4f} at {thr:.4f}\n"
    atomic_write(os.path.join(out, "report.txt"), text)
    atomic_write(os.path.join(out, "metrics.csv"), _metrics_csv([(fam, stage, rep)]))
    for (kind_c, cls), curve in evalx.class_curves(proba, y).items():
        stem = os.path.join(out, "curves", f"{kind_c}_class{cls}")
        atomic_write(stem + ".csv", curve.to_csv())
        atomic_write(stem + ".svg", curve.to_svg())
    sys.stdout.write(text)


def cmd_importance(cfg, args):
    path = _artifact_path(cfg, args)
    if not os.path.exists(path):
        raise CLIError("io", f"artifact not found: {path}")
    model, rec = artifact.load(path)
    imp = np.asarray(model.importances(), dtype=np.float64)
    names = list(model.feature_order)
    order = np.argsort(-imp, kind="stable")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "feature", "importance"])
    for r, j in enumerate(order, 1):
        w.writerow([r, names[j], repr(float(imp[j]))])
    out = cfg["out_dir"]
    atomic_write(os.path.join(out, "importance.csv"), buf.getvalue())
    atomic_write(os.path.join(out, "importance.svg"),
                 svg.bar_chart([names[j] for j in order], imp[order],
                               f"Feature importance: {rec['family']} stage {rec['stage']}",
                               "normalised importance"))
    sys.stdout.write(buf.getvalue())


def cmd_stack(cfg, args):
    frame = training_frame(cfg)
    kind, val = _protocol(cfg)
    st = make_spec(dict(cfg, stage=3))
    params = {f: model_params(cfg, f) for f in cfg["families"]}
    rows = ablation_table(frame, tuple(cfg["families"]), (1, 2, 3), params, kind,
                          val if kind == "holdout" else 0.25, int(val) if kind == "cv" else 10,
                          child_seed(cfg["seed"], "ablation"), st, int(cfg["n_jobs"]))
    text = _metrics_csv([(r.family, r.stage, r.report) for r in rows])
    out = cfg["out_dir"]
    atomic_write(os.path.join(out, "ablation.csv"), text)
    atomic_write(os.path.join(out, "ablation_protocol.txt"), f"{rows[0].protocol}\n")
    sys.stdout.write(f"# protocol: {rows[0].protocol}\n" + text)


def cmd_synth(cfg, args):
    rows = args.rows if args.rows is not None else int(cfg["synth"]["rows"])
    strength = args.strength if args.strength is not None else float(cfg["synth"]["strength"])
    side = synth.write_synth(cfg["out_dir"], rows, cfg["seed"], strength)
    print(f"wrote {rows} rows to {cfg['out_dir']} (Bayes accuracy {side['bayes_accuracy']:.4f})")


def cmd_cv(cfg, args):
    if cfg["stage"] == 3:
        raise CLIError("config", "nested cv runs on stage 1 or 2 pipelines")
    frame = training_frame(cfg)
    spec = make_spec(cfg)
    grid = cfg["grid"] or DEFAULT_GRIDS[spec.family]
    c = cfg["cv"]
    res = nested_cv(spec, grid, frame, int(c["outer_k"]), int(c["inner_k"]),
                    child_seed(cfg["seed"], "cv"), c["metric"], bool(c["select_features"]))
    out = cfg["out_dir"]
    atomic_write(os.path.join(out, "cv_report.csv"), cv_report_csv(res))
    lines = [f"fold {j}: {s:.4f} params={json.dumps(p, sort_keys=True)} features={len(f)}"
             for j, (s, p, f) in enumerate(zip(res.outer_scores, res.params, res.features))]
    text = "\n".join(lines) + f"\nmean {c['metric']} {res.mean:.4f}\n"
    atomic_write(os.path.join(out, "cv_summary.txt"), text)
    sys.stdout.write(text)


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "evaluate": cmd_evaluate,
            "importance": cmd_importance, "stack": cmd_stack, "synth": cmd_synth, "cv": cmd_cv}


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as exceptions instead of printing and exiting."""

    def error(self, message):
        raise CLIError("usage", message)


def build_parser():
    p = _Parser(prog="salestack", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--stage", type=int, choices=(1, 2, 3))
    p.add_argument("--model", choices=FAMILIES)
    p.add_argument("--out", help="output directory")
    p.add_argument("--artifact", help="model artifact path (train, evaluate, importance)")
    p.add_argument("--rows", type=int, help="synth: number of rows")
    p.add_argument("--strength", type=float, help="synth: socio/market signal strength")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
        COMMANDS[args.command](cfg, args)
    except CLIError as e:
        return _fail(e.kind, str(e))
    except (artifact.ArtifactError,) as e:
        return _fail("artifact", str(e))
    except (FileNotFoundError, OSError) as e:
        return _fail("io", str(e))
    except (ValueError, KeyError) as e:
        return _fail("input", str(e).strip("'\""))
    except TypeError as e:
        return _fail("config", f"invalid parameter: {e}")
    return 0


def _fail(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": " ".join(str(message).split())}) + "\n")
    return 2


if __name__ == "__main__":
    sys.exit(main())
