"""Frame containers and the CSV interchange format.

A dataset file is plain CSV with one metadata comment line, a column-name
row, then one frame per row:

    # space=torus dim=2 units=radians T_h=3.0 T=1.0 kB=1.0 seed=7
    z1,z2
    0.5235987755982988,-1.0471975511965976

Floats are written with repr(), so parse(serialize(d)) round-trips
bit-exactly.  A trailing ``weight`` column is tolerated and ignored on
read.  Torus datasets must already live in [-pi, pi); out-of-chart angles
are a data error, not something silently fixed.
"""

import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptyDataset, InvalidInput
from .spaces import Space


def stable_hash(*parts) -> str:
    """Short hex digest of a canonical repr; used as a generator fingerprint."""

    def canon(obj):
        if isinstance(obj, np.ndarray):
            return "array(" + ",".join(repr(float(v)) for v in obj.ravel()) + ")"
        if isinstance(obj, float):
            return repr(obj)
        if isinstance(obj, (list, tuple)):
            return "(" + ",".join(canon(v) for v in obj) + ")"
        if isinstance(obj, dict):
            return "{" + ",".join(f"{k}:{canon(v)}" for k, v in sorted(obj.items())) + "}"
        return repr(obj)

    text = "|".join(canon(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Dataset:
    """An (N, n) block of frames on a known space, plus provenance metadata."""

    samples: np.ndarray
    space: Space
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise InvalidInput(f"Dataset: samples must be 2-D, got shape {samples.shape}")
        if samples.shape[1] != self.space.dim:
            raise InvalidInput(
                f"Dataset: {samples.shape[1]} columns but space dim is {self.space.dim}"
            )
        if samples.shape[0] == 0:
            raise EmptyDataset("Dataset: no frames")
        if not np.all(np.isfinite(samples)):
            raise DataError("Dataset: non-finite frame values")
        if self.space.is_torus and not (
            np.all(samples >= -math.pi) and np.all(samples < math.pi)
        ):
            raise DataError("Dataset: torus angles outside [-pi, pi)")
        object.__setattr__(self, "samples", samples)

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _meta_token(key, value):
    if isinstance(value, float):
        return f"{key}={value!r}"
    return f"{key}={value}"


def write_dataset_csv(dataset: Dataset, path: str) -> None:
    meta = {"space": dataset.space.kind, "dim": dataset.space.dim}
    if dataset.space.is_torus:
        meta["units"] = "radians"
    for key, value in dataset.meta.items():
        if key not in meta:
            meta[key] = value
    header = "# " + " ".join(_meta_token(k, v) for k, v in meta.items())
    names = ",".join(f"z{c + 1}" for c in range(dataset.dim))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        fh.write(names + "\n")
        for row in dataset.samples:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _parse_meta(line: str) -> dict:
    meta = {}
    for token in line.lstrip("#").split():
        if "=" not in token:
            continue
        key, _, raw = token.partition("=")
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        meta[key] = value
    return meta


def read_dataset_csv(path: str) -> Dataset:
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    meta = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            meta.update(_parse_meta(line))
        elif line.strip():
            body.append(line)
    if not body:
        raise EmptyDataset(f"dataset file has no rows: {path}")

    kind = meta.pop("space", None)
    dim = meta.pop("dim", None)
    if kind not in ("torus", "euclidean") or not isinstance(dim, int):
        raise DataError(
            f"dataset file {path} is missing a '# space=... dim=...' metadata line"
        )
    meta.pop("units", None)
    space = Space(kind, dim)

    columns = [c.strip() for c in body[0].split(",")]
    expected = [f"z{c + 1}" for c in range(dim)]
    keep = len(expected)
    if columns[:keep] != expected or len(columns) > keep + 1 or (
        len(columns) == keep + 1 and columns[keep] != "weight"
    ):
        raise DataError(f"dataset file {path}: expected columns {expected}, got {columns}")
    rows = []
    for lineno, line in enumerate(body[1:], start=3):
        parts = line.split(",")
        if len(parts) != len(columns):
            raise DataError(f"dataset file {path}: row {lineno} has {len(parts)} fields")
        try:
            rows.append([float(p) for p in parts[:keep]])
        except ValueError as exc:
            raise DataError(f"dataset file {path}: row {lineno}: {exc}") from exc
    if not rows:
        raise EmptyDataset(f"dataset file has no frames: {path}")
    return Dataset(samples=np.array(rows, dtype=float), space=space, meta=meta)
