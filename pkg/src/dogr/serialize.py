"""JSON encoding of models and reports.

Floats are written with 17 significant digits so doubles survive a
write/read cycle unchanged.
"""

from __future__ import annotations

import json
import math

import numpy as np

from dogr.exceptions import DataError
from dogr.model import Component, FitConfig, Model

FORMAT_VERSION = 1


def _encode(obj, precision: int, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        text = format(v, f".{precision}g")
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, precision, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_encode(v, precision, indent, level + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[" + pad + sep.join(items) + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, precision: int = 17, indent: int = 2) -> str:
    return _encode(obj, precision, indent, 0) + "\n"


def model_to_dict(m: Model) -> dict:
    return {
        "version": FORMAT_VERSION,
        "feature_names": list(m.feature_names),
        "outcome_name": m.outcome_name,
        "components": [
            {
                "weight": c.weight,
                "mean": c.mean,
                "covariance": c.covariance.ravel(),
                "coefficients": c.coefficients,
                "residual_variance": c.residual_variance,
                "standard_errors": c.coefficient_standard_errors,
            }
            for c in m.components
        ],
        "fit": {
            "log_likelihood_trace": list(m.fit_trace),
            "converged": m.converged,
            "iterations": m.iterations,
            "config": m.config.to_dict() if m.config is not None else None,
            "diagnostics": list(m.diagnostics),
        },
    }


def model_from_dict(obj: dict) -> Model:
    if obj.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {obj.get('version')!r}")
    try:
        names = tuple(obj["feature_names"])
        p = len(names)
        comps = tuple(
            Component(
                weight=c["weight"],
                mean=c["mean"],
                covariance=np.asarray(c["covariance"], dtype=float).reshape(p, p),
                coefficients=c["coefficients"],
                residual_variance=c["residual_variance"],
                coefficient_standard_errors=c.get("standard_errors"),
            )
            for c in obj["components"]
        )
        fit_info = obj.get("fit") or {}
        cfg = fit_info.get("config")
        return Model(
            components=comps,
            feature_names=names,
            outcome_name=obj.get("outcome_name", "y"),
            fit_trace=tuple(fit_info.get("log_likelihood_trace", ())),
            converged=bool(fit_info.get("converged", False)),
            iterations=int(fit_info.get("iterations", 0)),
            config=FitConfig(**cfg) if cfg else None,
            diagnostics=tuple(fit_info.get("diagnostics", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model JSON: {exc}") from exc


def model_to_json(m: Model, precision: int = 17) -> str:
    return dumps(model_to_dict(m), precision)


def model_from_json(text: str) -> Model:
    return model_from_dict(json.loads(text))


def save_model(m: Model, path, precision: int = 17):
    from dogr.preprocess import atomic_write

    atomic_write(path, model_to_json(m, precision))


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
