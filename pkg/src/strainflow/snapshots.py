"""Snapshot file format: text header + raw little-endian float64 arrays.

Layout::

    strainflow snapshot 1
    kind = velocity            # or strain
    n = 32
    time = 0.125
    viscosity = 1.0
    components = 3
    ---
    <components * n^3 little-endian float64 values>

Each component array is written x-fastest (the [ix, iy, iz] indexing
used everywhere, flattened in Fortran order), one component after the
other.  velocity stores (u1, u2, u3); strain stores the five independent
entries (m11, m22, m12, m13, m23).  Floats in the header are printed
with repr, so save/load round-trips are bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

MAGIC = "strainflow snapshot 1"
_COMPONENTS = {"velocity": 3, "strain": 5}


@dataclass
class Snapshot:
    kind: str
    n: int
    time: float
    viscosity: float
    data: np.ndarray  # (components, n, n, n) float64 physical fields


def save_snapshot(path, kind: str, time: float, viscosity: float, data) -> None:
    data = np.ascontiguousarray(np.asarray(data, dtype="<f8"))
    if kind not in _COMPONENTS:
        raise ConfigError(f"unknown snapshot kind {kind!r}")
    if data.ndim != 4 or data.shape[0] != _COMPONENTS[kind]:
        raise ConfigError(
            f"{kind} snapshot needs shape ({_COMPONENTS[kind]}, n, n, n), got {data.shape}")
    n = data.shape[1]
    if data.shape[1:] != (n, n, n):
        raise ConfigError(f"snapshot grid must be cubic, got {data.shape[1:]}")
    header = (f"{MAGIC}\n"
              f"kind = {kind}\n"
              f"n = {n}\n"
              f"time = {time!r}\n"
              f"viscosity = {viscosity!r}\n"
              f"components = {data.shape[0]}\n"
              f"---\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for comp in data:
            fh.write(comp.ravel(order="F").astype("<f8").tobytes())


def load_snapshot(path) -> Snapshot:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read snapshot {path}: {exc}") from exc
    marker = b"---\n"
    split = blob.find(marker)
    if split < 0:
        raise ConfigError(f"{path}: missing header terminator")
    try:
        header_text = blob[:split].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: malformed header") from exc
    lines = [ln for ln in header_text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MAGIC:
        raise ConfigError(f"{path}: not a strainflow snapshot")
    fields = {}
    for line in lines[1:]:
        if "=" not in line:
            raise ConfigError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    try:
        kind = fields["kind"]
        n = int(fields["n"])
        time = float(fields["time"])
        viscosity = float(fields["viscosity"])
        components = int(fields["components"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed header ({exc})") from exc
    if kind not in _COMPONENTS or components != _COMPONENTS[kind]:
        raise ConfigError(f"{path}: inconsistent kind/components")
    payload = blob[split + len(marker):]
    expected = components * n ** 3 * 8
    if len(payload) != expected:
        raise ConfigError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}")
    flat = np.frombuffer(payload, dtype="<f8")
    data = np.stack([
        flat[i * n ** 3:(i + 1) * n ** 3].reshape((n, n, n), order="F")
        for i in range(components)
    ])
    return Snapshot(kind, n, time, viscosity, data)
