"""Parameter checkpoints: raw float64 vector plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DimensionError
from .params import LAYOUT_VERSION, ModelParams, ModelSpec


def save_params(params: ModelParams, path):
    """Write ``<path>.npy`` and ``<path>.json``; returns the two paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vec_path = path.with_suffix(".npy")
    meta_path = path.with_suffix(".json")
    np.save(vec_path, params.vector.astype("<f8"))
    meta = {"spec": params.spec.to_dict(), "size": params.spec.size,
            "order": [e[0] for e in params.spec.layout[:-1]]}
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return vec_path, meta_path


def load_params(path) -> ModelParams:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    spec_d = dict(meta["spec"])
    version = spec_d.pop("layout_version", None)
    if version != LAYOUT_VERSION:
        raise DimensionError(f"unsupported parameter layout version {version}")
    spec = ModelSpec(**spec_d)
    vec = np.load(path.with_suffix(".npy"))
    return ModelParams(spec, vec)
