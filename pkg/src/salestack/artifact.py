"""Versioned JSON model artifacts.

Layout::

    {"format_version": 1, "kind": "pipeline" | "stack", "family": ..., "stage": ...,
     "feature_order": [...], "encodings": {...}, "model": {...},
     "config": {...}, "config_fingerprint": "<sha256 of canonical config JSON>"}

Encodings are lifted out of the model records into the top-level
``encodings`` map (keyed by component) and put back on load. Files are
written with sorted keys and ``repr`` floats, so a load/save cycle is
byte-identical.
"""
import hashlib
import json

import numpy as np

from .frame import atomic_write
from .pipeline import FittedPipeline
from .stack import StackedModel

FORMAT_VERSION = 1


class ArtifactError(ValueError):
    pass


def _plain(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_plain)


def fingerprint(config):
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _components(kind, body):
    if kind == "pipeline":
        return {"model": body}
    return {k: body[k] for k in ("socio_model", "market_model", "final_model")}


def to_record(model, stage, config):
    if isinstance(model, StackedModel):
        kind, family = "stack", model.spec.final_family
    elif isinstance(model, FittedPipeline):
        kind, family = "pipeline", model.spec.family
    else:
        raise TypeError(f"cannot store {type(model).__name__}")
    body = model.to_dict()
    encodings = {}
    for name, comp in _components(kind, body).items():
        encodings[name] = comp.pop("encodings")
    return {
        "format_version": FORMAT_VERSION, "kind": kind, "family": family, "stage": int(stage),
        "feature_order": list(model.feature_order), "encodings": encodings, "model": body,
        "config": config, "config_fingerprint": fingerprint(config),
    }


def from_record(rec):
    version = rec.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"artifact format version {version!r} is not supported "
                            f"(expected {FORMAT_VERSION})")
    if rec.get("config_fingerprint") != fingerprint(rec.get("config")):
        raise ArtifactError("artifact config fingerprint does not match its config")
    kind = rec["kind"]
    body = json.loads(json.dumps(rec["model"]))
    for name, comp in _components(kind, body).items():
        comp["encodings"] = rec["encodings"][name]
    if kind == "pipeline":
        return FittedPipeline.from_dict(body)
    if kind == "stack":
        return StackedModel.from_dict(body)
    raise ArtifactError(f"unknown artifact kind {kind!r}")


def dumps(model, stage, config):
    return json.dumps(to_record(model, stage, config), sort_keys=True, indent=1,
                      default=_plain) + "\n"


def save(path, model, stage, config):
    atomic_write(path, dumps(model, stage, config))


def load(path):
    """Return ``(model, record)``."""
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    return from_record(rec), rec
