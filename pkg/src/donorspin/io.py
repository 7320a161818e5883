"""Key-value text formats: parameter files, experiment manifests, and
columnar output with a provenance header.

Values carry explicit units (e.g. ``hyperfine_A = 117 MHz``); frequencies
are converted to angular rad/s on ingestion. Output headers are ``# key =
value`` lines and round-trip through the same parser.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .model import TWO_PI, SystemParams

_FREQ_UNITS = {"hz": TWO_PI, "khz": TWO_PI * 1e3, "mhz": TWO_PI * 1e6,
               "ghz": TWO_PI * 1e9, "rad/s": 1.0}
_GYRO_UNITS = {"hz/t": TWO_PI, "khz/t": TWO_PI * 1e3, "mhz/t": TWO_PI * 1e6,
               "ghz/t": TWO_PI * 1e9, "rad/s/t": 1.0}
_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12}
_EFIELD_UNITS = {"v/m": 1.0, "kv/m": 1e3, "mv/m": 1e-3}
_BFIELD_UNITS = {"t": 1.0, "mt": 1e-3, "ut": 1e-6}

PARAM_UNITS = {
    "hyperfine_A": _FREQ_UNITS,
    "gamma_e": _GYRO_UNITS,
    "gamma_n": _GYRO_UNITS,
    "delta_gamma": None,
    "donor_depth_d": _LENGTH_UNITS,
    "B0": _BFIELD_UNITS,
    "Vt": _FREQ_UNITS,
    "dE_idle": _EFIELD_UNITS,
}


class ManifestError(ValueError):
    """A manifest or parameter file failed validation."""


def parse_keyvalues(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"line {lineno}: expected 'key = value', "
                                f"got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def parse_quantity(text: str, units: dict | None, field: str) -> float:
    """Parse a number with an optional unit token."""
    parts = text.split()
    try:
        value = float(parts[0])
    except ValueError as exc:
        raise ManifestError(f"field {field!r}: cannot parse number from "
                            f"{text!r}") from exc
    if len(parts) == 1:
        return value
    if units is None:
        raise ManifestError(f"field {field!r} is dimensionless but got unit "
                            f"{parts[1]!r}")
    unit = parts[1].lower()
    if unit not in units:
        raise ManifestError(f"field {field!r}: unknown unit {parts[1]!r} "
                            f"(expected one of {sorted(units)})")
    return value * units[unit]


def parse_angle(text: str, field: str) -> float:
    """Angles in rad; accepts 'pi', '-pi/4', '3pi/4', '0.5 pi' and degrees."""
    t = text.strip().lower().replace(" ", "")
    if t.endswith("deg"):
        return float(t[:-3]) * math.pi / 180
    m = re.fullmatch(r"([+-]?[\d.e+-]*)\*?pi(?:/([\d.]+))?", t)
    if m:
        num = m.group(1)
        sign_only = num in ("", "+", "-")
        factor = float(num + "1") if sign_only else float(num)
        if m.group(2):
            factor /= float(m.group(2))
        return factor * math.pi
    try:
        return float(t)
    except ValueError as exc:
        raise ManifestError(f"field {field!r}: cannot parse angle {text!r}") from exc


def parse_list(text: str, item_parser, field: str):
    return [item_parser(part.strip(), field) for part in text.split(",") if part.strip()]


def load_params(path_or_text: str) -> SystemParams:
    """Build SystemParams from a parameter file or its contents."""
    text = path_or_text
    if "\n" not in path_or_text and "=" not in path_or_text:
        with open(path_or_text) as fh:
            text = fh.read()
    raw = parse_keyvalues(text)
    kwargs = {}
    for key, value in raw.items():
        if key not in PARAM_UNITS:
            raise ManifestError(f"unknown parameter {key!r} (expected one of "
                                f"{sorted(PARAM_UNITS)})")
        if key == "Vt" and value.lower() == "auto":
            continue
        kwargs[key] = parse_quantity(value, PARAM_UNITS[key], key)
    return SystemParams(**kwargs)


def format_params(params: SystemParams) -> dict:
    """Conventional-unit view of SystemParams for provenance headers."""
    return {
        "hyperfine_A": f"{params.hyperfine_A / TWO_PI / 1e6:.9g} MHz",
        "gamma_e": f"{params.gamma_e / TWO_PI / 1e9:.9g} GHz/T",
        "gamma_n": f"{params.gamma_n / TWO_PI / 1e6:.9g} MHz/T",
        "delta_gamma": f"{params.delta_gamma:.9g}",
        "donor_depth_d": f"{params.donor_depth_d / 1e-9:.9g} nm",
        "B0": f"{params.B0:.9g} T",
        "Vt": f"{params.Vt / TWO_PI / 1e9:.12g} GHz",
        "dE_idle": f"{params.dE_idle:.9g} V/m",
    }


def write_columns(path, provenance: dict, column_names, rows) -> None:
    """Columnar text with '# key = value' provenance lines."""
    with open(path, "w") as fh:
        for key, value in provenance.items():
            fh.write(f"# {key} = {value}\n")
        fh.write("# columns: " + " ".join(column_names) + "\n")
        for row in rows:
            fh.write(" ".join(f"{v:.12e}" for v in row) + "\n")


def read_columns(path):
    """Inverse of write_columns: (provenance dict, data array)."""
    provenance = {}
    data = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, _, v = body.partition("=")
                    provenance[k.strip()] = v.strip()
                continue
            if line:
                data.append([float(x) for x in line.split()])
    return provenance, np.array(data)
