"""Versioned line-oriented text persistence for trained denoiser models.

Format (one record per line, space separated):

    NLDAE-MODEL v1
    mode <DAE|nlDAE>
    dims <d0> <d1> ... <dn>
    scaler_in <lo> <hi> <a> <b>
    scaler_out <lo> <hi> <a> <b>
    layer <weights row-major> <biases>     (one line per layer)

Floats are written with repr(), which round-trips exactly in Python, so a
reloaded model reproduces forward outputs bit-identically on the machine
that wrote the file.
"""

from __future__ import annotations

import numpy as np

from .denoise import AffineScaler, DenoiserModel, MODES
from .nn import MlpParams

HEADER = "NLDAE-MODEL v1"


class ModelFormatError(ValueError):
    """Malformed or truncated model file; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_model(m: DenoiserModel, path: str) -> None:
    lines = [HEADER,
             f"mode {m.mode}",
             "dims " + " ".join(str(d) for d in m.mlp.dims),
             f"scaler_in {_fmt((m.scaler_in.lo, m.scaler_in.hi, m.scaler_in.a, m.scaler_in.b))}",
             f"scaler_out {_fmt((m.scaler_out.lo, m.scaler_out.hi, m.scaler_out.a, m.scaler_out.b))}"]
    for w, b in zip(m.mlp.weights, m.mlp.biases):
        lines.append("layer " + _fmt(w.ravel()) + " " + _fmt(b))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _take(lines: list[str], idx: int, tag: str) -> list[str]:
    """Fetch line `idx`, check its leading tag, return the remaining fields."""
    if idx >= len(lines):
        raise ModelFormatError(len(lines), f"file ends before '{tag}' record "
                                           f"(last valid line {len(lines)})")
    fields = lines[idx].split()
    if not fields or fields[0] != tag:
        raise ModelFormatError(idx + 1, f"expected '{tag}' record, got {lines[idx][:40]!r}")
    return fields[1:]


def load_model(path: str) -> DenoiserModel:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines or lines[0] != HEADER:
        raise ModelFormatError(1, f"bad header, expected {HEADER!r}")

    mode = _take(lines, 1, "mode")
    if len(mode) != 1 or mode[0] not in MODES:
        raise ModelFormatError(2, f"mode must be one of {MODES}")
    try:
        dims = tuple(int(v) for v in _take(lines, 2, "dims"))
    except ValueError as exc:
        raise ModelFormatError(3, f"bad dims: {exc}") from None
    if len(dims) < 2:
        raise ModelFormatError(3, "dims needs at least two widths")

    scalers = []
    for i, tag in enumerate(("scaler_in", "scaler_out")):
        vals = _take(lines, 3 + i, tag)
        if len(vals) != 4:
            raise ModelFormatError(4 + i, f"{tag} needs 4 values, got {len(vals)}")
        try:
            scalers.append(AffineScaler(*(float(v) for v in vals)))
        except ValueError as exc:
            raise ModelFormatError(4 + i, f"bad {tag}: {exc}") from None

    weights, biases = [], []
    for l in range(len(dims) - 1):
        line_no = 6 + l
        vals = _take(lines, 5 + l, "layer")
        n_w, n_b = dims[l + 1] * dims[l], dims[l + 1]
        if len(vals) != n_w + n_b:
            raise ModelFormatError(line_no, f"layer {l} needs {n_w + n_b} values, "
                                            f"got {len(vals)}")
        try:
            arr = np.array([float(v) for v in vals])
        except ValueError as exc:
            raise ModelFormatError(line_no, f"bad float in layer {l}: {exc}") from None
        weights.append(arr[:n_w].reshape(dims[l + 1], dims[l]))
        biases.append(arr[n_w:])
    if len(lines) > 5 + len(dims) - 1:
        raise ModelFormatError(5 + len(dims), "trailing content after last layer")

    return DenoiserModel(mode[0], MlpParams(dims, weights, biases), scalers[0], scalers[1])
