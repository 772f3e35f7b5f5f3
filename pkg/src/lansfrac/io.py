"""Config parsing, binary snapshot persistence, CSV emission, run manifests.

The config grammar is deliberately line-oriented ``key = value`` with ``#``
comments: zero-dependency parsing and diff-friendly experiment records. The
snapshot format is a fixed little-endian header (magic "FLNS", version 1)
followed by the raw complex coefficient payload, components outermost,
k-indices in FFT-standard order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    BadValueError,
    CorruptPayloadError,
    EmptyOutputError,
    MissingKeyError,
    VersionMismatchError,
)
from .integrator import InitialData, SchemeKind, SimConfig, StepScheme
from .spectral import Params, SpectralField, infer_regime, make_grid, measure_flags

SNAPSHOT_MAGIC = b"FLNS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4s3I4d")  # magic, version, dim, N, alpha, nu, s, t


@dataclass(frozen=True)
class SnapshotMeta:
    alpha: float
    nu: float
    s: float
    t: float


def write_snapshot(field: SpectralField, meta: SnapshotMeta, path: str | Path) -> None:
    """Write header + complex128 coefficient payload; bit-exact round trip."""
    grid = field.grid
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        grid.dim,
        grid.N,
        meta.alpha,
        meta.nu,
        meta.s,
        meta.t,
    )
    payload = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_snapshot(path: str | Path) -> tuple[SpectralField, SnapshotMeta]:
    """Read and validate a snapshot: magic, version, payload size, realness."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CorruptPayloadError(f"{path}: file shorter than header")
    magic, version, dim, n, alpha, nu, s, t = _HEADER.unpack(blob[: _HEADER.size])
    if magic != SNAPSHOT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version} != {SNAPSHOT_VERSION}")
    grid = make_grid(int(dim), int(n))
    expected = dim * n**dim * 16
    payload = blob[_HEADER.size :]
    if len(payload) != expected:
        raise CorruptPayloadError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    coeffs = np.frombuffer(payload, dtype="<c16").reshape((dim,) + grid.shape)
    herm, _, _ = measure_flags(grid, coeffs)
    if not herm:
        raise CorruptPayloadError(f"{path}: coefficients violate hermitian symmetry")
    field = SpectralField.from_coeffs(grid, coeffs.astype(np.complex128))
    return field, SnapshotMeta(alpha=alpha, nu=nu, s=s, t=t)


def _format_value(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def emit_csv(rows: Sequence[Any], path: str | Path) -> None:
    """Write records (dataclasses or mappings) as CSV at full precision."""
    rows = list(rows)
    if not rows:
        raise EmptyOutputError(f"refusing to write empty CSV to {path}")
    first = rows[0]
    if dataclasses.is_dataclass(first):
        names = [f.name for f in dataclasses.fields(first)]
        get = lambda row, name: getattr(row, name)
    elif isinstance(first, Mapping):
        names = list(first.keys())
        get = lambda row, name: row[name]
    else:
        raise TypeError(f"cannot serialize rows of type {type(first)!r}")
    lines = [",".join(names)]
    for row in rows:
        lines.append(",".join(_format_value(get(row, n)) for n in names))
    Path(path).write_text("\n".join(lines) + "\n")


_REQUIRED_KEYS = ("dim", "N", "alpha", "nu", "s", "dt", "t_end", "init")
_KNOWN_KEYS = _REQUIRED_KEYS + (
    "scheme",
    "galerkin_N",
    "snapshot_every",
    "amplitude",
    "seed",
    "decay_exponent",
    "band",
    "out_dir",
)


def parse_config(path: str | Path) -> SimConfig:
    """Parse a key = value config file into a validated SimConfig.

    The admissibility regime is inferred from (dim, s) and recorded on the
    returned Params; command-level range gating is the CLI's job.
    """
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise BadValueError(body, lineno, "expected 'key = value'")
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise BadValueError(key, lineno, "unknown key")
        raw[key] = (value, lineno)

    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise MissingKeyError(key)

    def take(key: str, conv, default=None):
        if key not in raw:
            return default
        value, lineno = raw[key]
        try:
            return conv(value)
        except (ValueError, TypeError) as exc:
            raise BadValueError(key, lineno, str(exc)) from None

    def wrap(key: str, builder):
        try:
            return builder()
        except Exception as exc:
            lineno = raw[key][1] if key in raw else 0
            raise BadValueError(key, lineno, str(exc)) from None

    dim = take("dim", int)
    if dim not in (2, 3):
        raise BadValueError("dim", raw["dim"][1], f"dim must be 2 or 3, got {dim}")
    n = take("N", int)
    grid = wrap("N", lambda: make_grid(dim, n))

    alpha = take("alpha", float)
    if alpha < 0:
        raise BadValueError("alpha", raw["alpha"][1], "alpha must be nonnegative")
    nu = take("nu", float)
    if nu <= 0:
        raise BadValueError("nu", raw["nu"][1], "nu must be positive")
    s = take("s", float)
    if not 0.0 < s < 1.0:
        raise BadValueError("s", raw["s"][1], "s must lie in (0, 1)")
    params = Params(alpha=alpha, nu=nu, s=s, regime=infer_regime(dim, s))

    scheme_name = take("scheme", str, "etd2rk").lower()
    try:
        kind = SchemeKind(scheme_name)
    except ValueError:
        raise BadValueError("scheme", raw["scheme"][1], f"unknown scheme {scheme_name!r}") from None
    scheme = wrap("dt", lambda: StepScheme(kind=kind, dt=take("dt", float)))

    init_spec = take("init", str)
    kind_name, _, snap_path = init_spec.partition(":")
    kind_name = kind_name.strip().lower()
    if kind_name == "random":
        kind_name = "random-spectrum"
    initial = wrap(
        "init",
        lambda: InitialData(
            kind=kind_name,
            amplitude=take("amplitude", float, 1.0),
            seed=take("seed", int, 0),
            decay_exponent=take("decay_exponent", float),
            band=take("band", int),
            path=snap_path.strip() or None,
        ),
    )

    return wrap(
        "t_end",
        lambda: SimConfig(
            grid=grid,
            params=params,
            scheme=scheme,
            t_end=take("t_end", float),
            initial=initial,
            galerkin_N=take("galerkin_N", int),
            snapshot_every=take("snapshot_every", int, 1),
            out_dir=take("out_dir", str),
        ),
    )


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    """Record of one CLI invocation: config echo, version, outputs + checksums."""

    config: dict[str, Any]
    version: str
    started: str
    finished: str
    wall_seconds: float
    outputs: list[dict[str, Any]]

    def add_output(self, path: str | Path) -> None:
        p = Path(path)
        self.outputs.append(
            {"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
        )


def config_echo(config: SimConfig) -> dict[str, Any]:
    """JSON-friendly echo of a parsed configuration."""
    return {
        "dim": config.grid.dim,
        "N": config.grid.N,
        "alpha": config.params.alpha,
        "nu": config.params.nu,
        "s": config.params.s,
        "regime": config.params.regime.value,
        "scheme": config.scheme.kind.value,
        "dt": config.scheme.dt,
        "t_end": config.t_end,
        "galerkin_N": config.galerkin_N,
        "snapshot_every": config.snapshot_every,
        "init": config.initial.kind,
        "amplitude": config.initial.amplitude,
        "seed": config.initial.seed,
        "decay_exponent": config.initial.decay_exponent,
        "band": config.initial.band,
        "out_dir": config.out_dir,
    }


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataclasses.asdict(manifest), indent=2) + "\n")
