"""Model persistence: one JSON container for score, KDE, and GMM estimators.

Arrays are stored as base64 of their raw little-endian bytes, so a load is
bit-exact.  JSON keeps the containers diffable and inspectable next to the
CSV artifacts; model files are small (at most a few MB for the KDE data).
"""

from __future__ import annotations

import base64
import json
import os

import numpy as np

from .baselines import GmmModel, KdeModel
from .diffusion import NoiseSchedule
from .errors import ConfigError, DataError
from .scorenet import ScoreModel, ScoreNetConfig
from .spaces import Space

__all__ = ["save_model", "load_model", "FORMAT_VERSION"]

FORMAT_VERSION = 1
_FORMAT_NAME = "scorefes-model"


def _encode_array(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr)
    if a.dtype != np.float64:
        a = a.astype(np.float64)
    if a.dtype.byteorder not in ("<", "="):
        a = a.astype("<f8")
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(obj["data"].encode("ascii"))
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64, copy=True)
        return arr.reshape(tuple(obj["shape"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"model file holds a malformed array block: {exc}") from exc


def _space_to_json(space: Space) -> dict:
    return {"kind": space.kind, "dim": space.dim}


def _space_from_json(obj: dict) -> Space:
    try:
        return Space(str(obj["kind"]), int(obj["dim"]))
    except (KeyError, TypeError) as exc:
        raise DataError(f"model file holds a malformed space block: {exc}") from exc


def _score_payload(model: ScoreModel) -> dict:
    payload = {
        "config": {
            "hidden_sizes": list(model.config.hidden_sizes),
            "time_features": model.config.time_features,
            "activation": model.config.activation,
            "seed": model.config.seed,
        },
        "schedule": {
            "sigma_min": model.schedule.sigma_min,
            "sigma_max": model.schedule.sigma_max,
            "t_min": model.schedule.t_min,
        },
        "params": _encode_array(model.params),
        "standardization": None,
    }
    if model.standardization is not None:
        payload["standardization"] = {
            "mean": _encode_array(model.standardization[0]),
            "scale": _encode_array(model.standardization[1]),
        }
    if model.history is not None:
        payload["history"] = {k: list(map(float, v)) for k, v in model.history.items()
                              if isinstance(v, (list, tuple, np.ndarray))}
        payload["history"].update({k: v for k, v in model.history.items()
                                   if isinstance(v, (int, float, bool))})
    return payload


def _score_from_payload(payload: dict, space: Space) -> ScoreModel:
    cfg = payload["config"]
    config = ScoreNetConfig(
        hidden_sizes=tuple(cfg["hidden_sizes"]),
        time_features=int(cfg["time_features"]),
        activation=str(cfg["activation"]),
        seed=int(cfg["seed"]),
    )
    sch = payload["schedule"]
    schedule = NoiseSchedule(
        sigma_min=float(sch["sigma_min"]),
        sigma_max=float(sch["sigma_max"]),
        t_min=float(sch["t_min"]),
    )
    standardization = None
    if payload.get("standardization") is not None:
        standardization = (
            _decode_array(payload["standardization"]["mean"]),
            _decode_array(payload["standardization"]["scale"]),
        )
    return ScoreModel(
        params=_decode_array(payload["params"]),
        config=config,
        schedule=schedule,
        space=space,
        standardization=standardization,
        history=payload.get("history"),
    )


def save_model(model, path: str) -> None:
    """Write a score / KDE / GMM model to a JSON container file."""
    if isinstance(model, ScoreModel):
        kind, payload = "score", _score_payload(model)
    elif isinstance(model, KdeModel):
        kind = "kde"
        payload = {
            "data": _encode_array(model.data),
            "bandwidth": _encode_array(model.bandwidth),
        }
    elif isinstance(model, GmmModel):
        kind = "gmm"
        payload = {
            "weights": _encode_array(model.weights),
            "means": _encode_array(model.means),
            "covariances": _encode_array(model.covariances),
            "converged": bool(model.converged),
            "loglik": float(model.loglik),
            "loglik_history": [float(v) for v in model.loglik_history],
            "n_reinit": int(model.n_reinit),
        }
    else:
        raise ConfigError(f"save_model: unsupported model type {type(model).__name__}")

    space = model.space if isinstance(model, (ScoreModel, KdeModel)) else None
    doc = {
        "format": _FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "space": _space_to_json(space) if space is not None else None,
        "payload": payload,
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str):
    """Read a model container; returns ScoreModel, KdeModel, or GmmModel."""
    try:
        with open(path, encoding="ascii") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"model file not found: {path}") from None
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse model file {path}: {exc}") from exc

    if not isinstance(doc, dict) or doc.get("format") != _FORMAT_NAME:
        raise DataError(f"{path} is not a model container")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"{path}: unsupported container version {doc.get('format_version')!r}"
        )
    kind = doc.get("kind")
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise DataError(f"{path}: missing payload")
    try:
        if kind == "score":
            return _score_from_payload(payload, _space_from_json(doc["space"]))
        if kind == "kde":
            return KdeModel(
                data=_decode_array(payload["data"]),
                bandwidth=_decode_array(payload["bandwidth"]),
                space=_space_from_json(doc["space"]),
            )
        if kind == "gmm":
            return GmmModel(
                weights=_decode_array(payload["weights"]),
                means=_decode_array(payload["means"]),
                covariances=_decode_array(payload["covariances"]),
                converged=bool(payload["converged"]),
                loglik=float(payload["loglik"]),
                loglik_history=tuple(float(v) for v in payload["loglik_history"]),
                n_reinit=int(payload["n_reinit"]),
            )
    except KeyError as exc:
        raise DataError(f"{path}: payload is missing field {exc}") from exc
    raise DataError(f"{path}: unknown model kind {kind!r}")
