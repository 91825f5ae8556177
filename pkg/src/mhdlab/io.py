"""
File formats: time-series CSV, binary checkpoints and the JSON run manifest.

All writers go through :func:`atomic_write` (temporary file in the target
directory, then ``os.replace``), so readers never observe partial files.

Checkpoint layout, little-endian throughout::

    b"MHDS" | int32 version | int32 n | int32 N | int32 regime tag
    | float64 t | n x float64 background vector
    | u payload | b payload

Each payload stores, per component, the half-spectrum coefficients in C
order of the stored array as (real, imaginary) float64 pairs.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import platform
import struct
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .diagnostics import NormSeries, s_label
from .linear import Regime
from .spectral import Lattice, SpectralField, make_lattice

__all__ = [
    "atomic_write",
    "series_columns",
    "write_series_csv",
    "read_series_csv",
    "Checkpoint",
    "write_checkpoint",
    "read_checkpoint",
    "write_manifest",
    "platform_fingerprint",
]

MAGIC = b"MHDS"
VERSION = 1
_TAGS = {Regime.VISCOUS: 0, Regime.RESISTIVE: 1}
_HEADER = struct.Struct("<4siiiid")


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "w" if isinstance(data, str) else "wb"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({"newline": "", "encoding": "utf-8"} if mode == "w" else {})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        # mkstemp creates 0600; give the result the usual umask-derived mode
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def series_columns(s_list) -> list:
    cols = ["t"]
    for s in s_list:
        cols += [f"u_h{s_label(s)}", f"b_h{s_label(s)}"]
    return cols + ["u_gradlinf", "b_gradlinf", "energy_l2", "q_m", "f_func", "dt"]


def _fmt(v) -> str:
    v = float(v)
    return "" if math.isnan(v) else f"{v:.17g}"


def series_csv_text(series: NormSeries, s_list) -> str:
    cols = series_columns(s_list)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for t, row in zip(series.times, series.rows):
        w.writerow([_fmt(t)] + [_fmt(row.get(c, math.nan)) for c in cols[1:]])
    return buf.getvalue()


def write_series_csv(path, series: NormSeries, s_list) -> None:
    atomic_write(path, series_csv_text(series, s_list))


def read_series_csv(path) -> NormSeries:
    """Load a series; blank cells become NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "t":
            raise ValueError(f"{path}: first column must be 't'")
        out = NormSeries()
        for line in reader:
            if not line:
                continue
            vals = [float(x) if x != "" else math.nan for x in line]
            out.append(vals[0], dict(zip(header[1:], vals[1:])))
    return out


@dataclass(frozen=True)
class Checkpoint:
    u: SpectralField
    b: SpectralField
    t: float
    regime: Regime
    bvec: tuple

    @property
    def lattice(self) -> Lattice:
        return self.u.lattice


def checkpoint_bytes(u: SpectralField, b: SpectralField, t: float, regime, bvec) -> bytes:
    lat = u.lattice
    regime = Regime.parse(regime)
    head = _HEADER.pack(MAGIC, VERSION, lat.n, lat.N, _TAGS[regime], float(t))
    vec = np.asarray(bvec, dtype="<f8").tobytes()
    body = b"".join(np.ascontiguousarray(f.coeffs).astype("<c16").tobytes() for f in (u, b))
    return head + vec + body


def write_checkpoint(path, u: SpectralField, b: SpectralField, t: float, regime, bvec) -> None:
    atomic_write(path, checkpoint_bytes(u, b, t, regime, bvec))


def read_checkpoint(path) -> Checkpoint:
    """Parse a checkpoint file.

    Raises:
        ValueError: on a wrong magic, version or payload size.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, n, N, tag, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    regime = {v: k for k, v in _TAGS.items()}.get(tag)
    if regime is None:
        raise ValueError(f"{path}: unknown regime tag {tag}")
    lat = make_lattice(n, N)
    off = _HEADER.size
    bvec = tuple(float(x) for x in np.frombuffer(data, "<f8", n, off))
    off += 8 * n
    shape = (n,) + lat.spectral_shape
    count = int(np.prod(shape))
    if len(data) != off + 2 * 16 * count:
        raise ValueError(f"{path}: payload size mismatch")
    fields_ = []
    for _ in range(2):
        arr = np.frombuffer(data, "<c16", count, off).astype(complex).reshape(shape)
        fields_.append(SpectralField(lat, arr))
        off += 16 * count
    return Checkpoint(u=fields_[0], b=fields_[1], t=t, regime=regime, bvec=bvec)


def platform_fingerprint() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "machine": platform.machine(),
        "system": platform.system(),
        "byteorder": sys.byteorder,
    }


def write_manifest(path, manifest: dict) -> None:
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Regime):
        return o.value
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")
