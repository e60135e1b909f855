"""Dataset file formats: a small binary container and a CSV import path.

Binary layout: 24-byte header (magic "DLDS", u32 version, u64 n, u64 p,
all little-endian), then n*p float64 design entries row-major, then n
float64 responses. CSV files must carry the header row ``y,x1,...,xp``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import Dataset, GroundTruth
from .errors import InvalidInputError

_MAGIC = b"DLDS"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_dataset(path, data: Dataset) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, data.n, data.p))
        fh.write(np.ascontiguousarray(data.x, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(data.y, dtype="<f8").tobytes())


def read_dataset(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"dataset file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    magic, version, n, p = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise InvalidInputError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * (n * p + n)
    if len(raw) != expected:
        raise InvalidInputError(
            f"{path}: size {len(raw)} != expected {expected} for n={n}, p={p}"
        )
    x = np.frombuffer(raw, dtype="<f8", count=n * p, offset=_HEADER.size)
    y = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size + 8 * n * p)
    return Dataset(x=x.reshape(n, p).copy(), y=y.copy())


def read_csv_dataset(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"dataset file not found: {path}")
    with open(path, "r") as fh:
        header = fh.readline().strip()
        cols = [c.strip() for c in header.split(",")]
        if not cols or cols[0] != "y" or cols[1:] != [f"x{i}" for i in range(1, len(cols))]:
            raise InvalidInputError(
                f"{path}: header must be y,x1,...,xp, got {header!r}"
            )
        try:
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise InvalidInputError(f"{path}: unparseable numeric row: {exc}") from exc
    if body.shape[1] != len(cols):
        raise InvalidInputError(
            f"{path}: rows have {body.shape[1]} fields, header has {len(cols)}"
        )
    return Dataset(x=body[:, 1:], y=body[:, 0])


def load_dataset(path) -> Dataset:
    """Dispatch on extension: .csv imports, anything else reads the binary."""
    if str(path).endswith(".csv"):
        return read_csv_dataset(path)
    return read_dataset(path)


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_sidecar(path, cfg, truth: GroundTruth) -> None:
    """Record the generating configuration and coefficients next to a dataset."""
    meta = {
        "n": cfg.n,
        "p": cfg.p,
        "s": cfg.s,
        "cov_kind": cfg.cov.kind,
        "rho": cfg.cov.rho,
        "sigma_y": cfg.sigma_y,
        "amplitude": cfg.amplitude,
        "seed": cfg.seed,
        "response": cfg.response,
        "support": list(truth.support),
        "beta_star": truth.beta_star.tolist(),
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=1) + "\n")


def read_sidecar(path) -> dict:
    sp = sidecar_path(path)
    if not sp.exists():
        raise InvalidInputError(f"sidecar file not found: {sp}")
    return json.loads(sp.read_text())
