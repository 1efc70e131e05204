"""Map records and audit reports, with their JSON and CSV encodings.

Floats are written with ``repr`` (shortest round-trip decimal), so a record
read back reproduces its values bit for bit and repeated runs give
byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dc_field
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import FormatError, GridTooSmallError
from .field import ComplexField, GridSpec
from .metric import metric_from_descriptor

FORMAT_VERSION = 1


@dataclass
class MapRecord:
    """A sampled map with the metric of its target and optional family data."""

    f: ComplexField
    metric: Any
    alpha: Optional[complex] = None
    inverse: Optional[ComplexField] = None  # g = f^-1 on its own grid, when known
    name: str = "map"

    @property
    def grid(self) -> GridSpec:
        return self.f.grid


# --- JSON ----------------------------------------------------------------------

def _pairs(values: np.ndarray) -> list:
    return [[float(v.real), float(v.imag)] for v in values.reshape(-1)]


def _field_json(fld: ComplexField) -> dict:
    vals = fld.values
    if fld.mask is not None:
        vals = np.where(fld.mask, vals, 0)  # masked entries carry no data
    out = {"grid": fld.grid.to_dict(), "values": _pairs(vals)}
    if fld.mask is not None:
        out["mask"] = [bool(b) for b in fld.mask.reshape(-1)]
    return out


def record_to_json(rec: MapRecord) -> dict:
    out: Dict[str, Any] = {"format_version": FORMAT_VERSION, "name": rec.name}
    out.update(_field_json(rec.f))
    out["metric"] = rec.metric.descriptor()
    if rec.alpha is not None:
        out["alpha"] = [float(complex(rec.alpha).real), float(complex(rec.alpha).imag)]
    if rec.inverse is not None:
        out["inverse"] = _field_json(rec.inverse)
    return out


def _grid_from(d: dict) -> GridSpec:
    try:
        g = d["grid"]
        return GridSpec(float(g["x0"]), float(g["y0"]), int(g["nx"]), int(g["ny"]), float(g["h"]))
    except GridTooSmallError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad grid block: {exc}") from exc


def _field_from(d: dict) -> ComplexField:
    grid = _grid_from(d)
    try:
        vals = np.array(d["values"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad values block: {exc}") from exc
    if vals.ndim != 2 or vals.shape[1] != 2 or vals.shape[0] != grid.size:
        raise FormatError(f"expected {grid.size} [re, im] pairs, got array of shape {vals.shape}")
    z = (vals[:, 0] + 1j * vals[:, 1]).reshape(grid.shape)
    mask = d.get("mask")
    if mask is not None:
        mask = np.array(mask, dtype=bool)
        if mask.size != grid.size:
            raise FormatError("mask length does not match the grid")
        mask = mask.reshape(grid.shape)
    elif not np.all(np.isfinite(z)):
        raise FormatError("non-finite values without a mask")
    return ComplexField(grid, z, mask)


def record_from_json(d: dict) -> MapRecord:
    if not isinstance(d, dict):
        raise FormatError("record must be a JSON object")
    if d.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {d.get('format_version')!r}")
    f = _field_from(d)
    try:
        metric = metric_from_descriptor(d["metric"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad metric block: {exc}") from exc
    alpha = d.get("alpha")
    if alpha is not None:
        alpha = complex(float(alpha[0]), float(alpha[1]))
    inv = _field_from(d["inverse"]) if d.get("inverse") is not None else None
    return MapRecord(f, metric, alpha, inv, d.get("name", "map"))


def dumps(obj: dict) -> str:
    # json uses repr() for floats, the shortest round-trip form
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_record(rec: MapRecord, path: str):
    with open(path, "w") as fh:
        fh.write(dumps(record_to_json(rec)))


def read_record(path: str) -> MapRecord:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    return record_from_json(d)


# --- audit reports -----------------------------------------------------------

def json_number(x):
    """Finite floats as-is; NaN as null and infinities as strings, keeping the file strict JSON."""
    if x is None:
        return None
    x = float(x)
    if np.isnan(x):
        return None
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class AuditCheck:
    name: str
    residual: float
    tolerance: float
    grid_h: float
    refinement_ratio: Optional[float] = None
    applicable: bool = True
    note: str = ""

    @property
    def verdict(self) -> str:
        if not self.applicable:
            return "not-applicable"
        return "pass" if self.residual <= self.tolerance else "fail"

    def to_json(self) -> dict:
        out = {"name": self.name, "residual": json_number(self.residual),
               "tolerance": json_number(self.tolerance), "grid_h": self.grid_h, "verdict": self.verdict}
        if self.refinement_ratio is not None:
            out["refinement_ratio"] = json_number(self.refinement_ratio)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class AuditReport:
    map_id: str
    checks: List[AuditCheck] = dc_field(default_factory=list)
    environment: Dict[str, Any] = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.verdict != "fail" for c in self.checks)

    def to_json(self) -> dict:
        return {"format_version": FORMAT_VERSION, "map": self.map_id,
                "checks": [c.to_json() for c in self.checks], "environment": self.environment,
                "passed": self.passed}

    def lines(self) -> List[str]:
        out = []
        for c in self.checks:
            ratio = "" if c.refinement_ratio is None else f"  ratio={c.refinement_ratio:.3f}"
            out.append(f"{c.verdict.upper():>14}  {c.name}: {c.residual:.3e} (tol {c.tolerance:.1e}){ratio}")
        return out


# --- CSV -----------------------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-trip text for a number; complex numbers as ``re+imj``."""
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(header: List[str], rows: List[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()
