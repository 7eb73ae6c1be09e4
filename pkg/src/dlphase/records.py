"""Flat result records and their CSV serialization.

Numeric CSV fields are printed in scientific notation with 12 significant
digits, dot decimal separator, LF line endings; this keeps figure
pipelines byte-reproducible across platforms and locales.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, fields

SWEEP_COLUMNS = ("gamma", "branch", "q_d", "q_x", "m_d", "m_x", "Q_x",
                 "mse_d", "mse_x", "phi_finite", "phi_logdiv", "dominant")


@dataclass(frozen=True)
class SweepRecord:
    gamma: float
    branch: str
    q_d: float
    q_x: float
    m_d: float
    m_x: float
    Q_x: float
    mse_d: float
    mse_x: float
    phi_finite: float
    phi_logdiv: float
    dominant: bool


def format_float(x: float) -> str:
    """12-significant-digit scientific notation; inf/nan spelled plainly."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".11e")


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def records_to_csv(records, columns) -> str:
    """Serialize an iterable of dataclass records with a header row."""
    out = io.StringIO()
    out.write(",".join(columns))
    out.write("\n")
    for rec in records:
        out.write(",".join(_format_cell(getattr(rec, c)) for c in columns))
        out.write("\n")
    return out.getvalue()


def sweep_records_to_csv(records) -> str:
    return records_to_csv(records, SWEEP_COLUMNS)


def _parse_cell(text: str, typ):
    if typ is bool:
        if text not in ("true", "false"):
            raise ValueError(f"expected boolean cell, got {text!r}")
        return text == "true"
    if typ is float:
        return float(text)
    return text


def sweep_records_from_csv(text: str) -> list[SweepRecord]:
    """Parse CSV produced by sweep_records_to_csv (round-trip companion)."""
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or tuple(lines[0].split(",")) != SWEEP_COLUMNS:
        raise ValueError("unexpected sweep CSV header")
    types = {f.name: f.type for f in fields(SweepRecord)}
    typ_of = {"float": float, "str": str, "bool": bool}
    out = []
    for ln in lines[1:]:
        cells = ln.split(",")
        kwargs = {c: _parse_cell(v, typ_of[types[c]])
                  for c, v in zip(SWEEP_COLUMNS, cells)}
        out.append(SweepRecord(**kwargs))
    return out


@dataclass(frozen=True)
class BoundaryRow:
    parameter: float
    value: float
    status: str


BOUNDARY_COLUMNS = ("parameter", "value", "status")


def boundary_rows_to_csv(rows) -> str:
    return records_to_csv(rows, BOUNDARY_COLUMNS)


@dataclass(frozen=True)
class PhaseCell:
    alpha: float
    rho: float
    region: str


PHASE_COLUMNS = ("alpha", "rho", "region")


def phase_cells_to_csv(cells) -> str:
    return records_to_csv(cells, PHASE_COLUMNS)


@dataclass(frozen=True)
class FreeEntropyRow:
    gamma: float
    branch: str
    phi_finite: float
    phi_logdiv: float


FREE_ENTROPY_COLUMNS = ("gamma", "branch", "phi_finite", "phi_logdiv")


def free_entropy_rows_to_csv(rows) -> str:
    return records_to_csv(rows, FREE_ENTROPY_COLUMNS)
