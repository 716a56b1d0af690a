"""Self-contained JSON model files.

A file carries the grid, the basis (mean, functions, eigenvalues) and, per
component, the coefficients, smoother settings and training index/target
pairs, so predictions need no access to the original data. Floats are
written with full precision and reload bit-for-bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .fpca import Basis
from .functional_data import TimeGrid
from .index import IndexModel
from .multi_index import MultiIndexModel
from .smoother import SmootherConfig

__all__ = ["FORMAT_NAME", "FORMAT_VERSION", "ModelFormatError", "save_model", "load_model",
           "model_to_dict", "model_from_dict"]

FORMAT_NAME = "fsir-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The model file is unreadable, from another format, or internally inconsistent."""


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def _component_dict(c: IndexModel) -> dict:
    return {
        "coefficients": _floats(c.coefficients),
        "smoother": {
            "kind": c.smoother.kind,
            "bandwidth": float(c.smoother.bandwidth),
            "threshold": float(c.smoother.threshold),
        },
        "index_values": _floats(c.index_values),
        "targets": _floats(c.targets),
    }


def model_to_dict(model: IndexModel | MultiIndexModel) -> dict:
    if isinstance(model, IndexModel):
        kind, comps, basis = "single", [model], model.basis
    elif isinstance(model, MultiIndexModel):
        kind, comps, basis = "multi", model.components, model.basis
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    out = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "type": kind,
        "grid": _floats(basis.grid.points),
        "basis": {
            "mean": _floats(basis.mean),
            "eigenvalues": _floats(basis.eigenvalues),
            "functions": [_floats(f) for f in basis.functions],
        },
        "components": [_component_dict(c) for c in comps],
    }
    if kind == "multi":
        delta = model.final_delta
        out["fit"] = {
            "iterations_used": int(model.iterations_used),
            "converged": bool(model.converged),
            "final_delta": None if not math.isfinite(delta) else float(delta),
            "tol": float(model.tol),
        }
    return out


def model_from_dict(d: dict) -> IndexModel | MultiIndexModel:
    try:
        if d.get("format") != FORMAT_NAME:
            raise ModelFormatError(f"not an {FORMAT_NAME} file")
        if d.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
        grid = TimeGrid(np.array(d["grid"], dtype=float))
        b = d["basis"]
        basis = Basis(grid, np.array(b["functions"], dtype=float),
                      np.array(b["eigenvalues"], dtype=float), np.array(b["mean"], dtype=float))
        comps = []
        for c in d["components"]:
            s = c["smoother"]
            cfg = SmootherConfig(s["kind"], float(s["bandwidth"]), float(s["threshold"]))
            comps.append(IndexModel(basis, np.array(c["coefficients"], dtype=float), cfg,
                                    np.array(c["index_values"], dtype=float),
                                    np.array(c["targets"], dtype=float)))
        if not comps:
            raise ModelFormatError("model has no components")
        if d["type"] == "single":
            if len(comps) != 1:
                raise ModelFormatError("single-index model must have exactly one component")
            return comps[0]
        if d["type"] == "multi":
            fit = d.get("fit", {})
            delta = fit.get("final_delta")
            return MultiIndexModel(
                comps,
                iterations_used=int(fit.get("iterations_used", 0)),
                converged=bool(fit.get("converged", False)),
                final_delta=float("nan") if delta is None else float(delta),
                tol=float(fit.get("tol", 0.01)),
            )
        raise ModelFormatError(f"unknown model type {d['type']!r}")
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ModelFormatError(f"corrupt model: {exc}") from exc


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")


def load_model(path) -> IndexModel | MultiIndexModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ModelFormatError("model file must contain a JSON object")
    return model_from_dict(d)
