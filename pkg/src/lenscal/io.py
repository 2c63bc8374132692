"""CSV/JSON readers and writers.  Floats are written with 17 significant digits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .oscillator import CalibrationSequence
from .pfa import NORMALIZATIONS, PROVENANCES, ForceGradientCurve

SCHEMA_VERSION = 1

CURVE_COLUMNS = ("d_m", "k_value", "normalization", "provenance")
SEQUENCE_COLUMNS = ("seq_id", "d_m", "V_volt", "nu_hz")


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_json(path, obj: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **obj}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def load_json(path) -> dict:
    """Read a JSON file, turning syntax errors into :class:`ConfigError` with line/column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


# -- curves ------------------------------------------------------------------

def write_curve_csv(path, curve: ForceGradientCurve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CURVE_COLUMNS) + "\n")
        for d, v in zip(curve.d, curve.values):
            fh.write(f"{fmt(d)},{fmt(v)},{curve.normalization},{curve.provenance}\n")


def read_curve_csv(path) -> ForceGradientCurve:
    rows, bad = _read_rows(path, CURVE_COLUMNS)
    d, v, norms, provs = [], [], set(), set()
    for lineno, row in rows:
        try:
            d.append(float(row["d_m"]))
            v.append(float(row["k_value"]))
        except ValueError:
            bad.append(lineno)
            continue
        if row["normalization"] not in NORMALIZATIONS or row["provenance"] not in PROVENANCES:
            bad.append(lineno)
            continue
        norms.add(row["normalization"])
        provs.add(row["provenance"])
    if bad:
        raise ConfigError(f"{path}: malformed rows at line(s) {', '.join(map(str, sorted(bad)))}")
    if not d:
        raise ConfigError(f"{path}: no data rows")
    if len(norms) != 1 or len(provs) != 1:
        raise ConfigError(f"{path}: a curve file must use a single normalization and provenance")
    try:
        return ForceGradientCurve(np.array(d), np.array(v), norms.pop(), provs.pop())
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# -- calibration sequences ---------------------------------------------------------

def write_sequence_csv(path, sequences) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SEQUENCE_COLUMNS) + "\n")
        for seq in sequences:
            for d, V, nu in zip(seq.d, seq.V, seq.nu):
                fh.write(f"{seq.seq_id},{fmt(d)},{fmt(V)},{fmt(nu)}\n")


def read_sequence_csv(path) -> list[CalibrationSequence]:
    """Parse a sequence CSV into one :class:`CalibrationSequence` per ``seq_id``.

    Every malformed row is reported by line number in a single
    :class:`ConfigError`.
    """
    rows, bad = _read_rows(path, SEQUENCE_COLUMNS)
    if not rows and not bad:
        raise ConfigError(f"{path}: no data rows")
    data: dict[int, list] = {}
    for lineno, row in rows:
        try:
            sid = int(row["seq_id"])
            d = float(row["d_m"])
            V = float(row["V_volt"])
            nu = float(row["nu_hz"])
        except (TypeError, ValueError):
            bad.append(lineno)
            continue
        if not (d > 0.0 and math.isfinite(d) and math.isfinite(V) and nu >= 0.0 and math.isfinite(nu)):
            bad.append(lineno)
            continue
        data.setdefault(sid, []).append((d, V, nu))
    if bad:
        raise ConfigError(f"{path}: malformed rows at line(s) {', '.join(map(str, sorted(bad)))}")
    out = []
    for sid in sorted(data):
        arr = np.asarray(data[sid])
        out.append(CalibrationSequence(arr[:, 0], arr[:, 1], arr[:, 2], sid))
    return out


def _read_rows(path, columns) -> tuple[list[tuple[int, dict]], list[int]]:
    """Rows keyed by column name with their line numbers, plus line numbers of ragged rows."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise ConfigError(f"{path}: line 1: missing column(s) {', '.join(missing)}")
        idx = {c: header.index(c) for c in columns}
        rows = []
        bad = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != len(header):
                bad.append(lineno)
                continue
            rows.append((lineno, {c: rec[i].strip() for c, i in idx.items()}))
    return rows, bad


# -- figure data ------------------------------------------------------------------

@dataclass(frozen=True)
class FigureSeries:
    name: str
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.size == 0 or np.any(np.diff(x) <= 0.0):
            raise ValueError(f"series {self.name!r}: x must be non-empty and strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


@dataclass(frozen=True)
class FigureDataset:
    """Labelled series plus the axis scalings they are meant to be viewed in."""

    title: str
    x_label: str
    y_label: str
    series: tuple[FigureSeries, ...]
    scales: tuple[str, ...] = ("linear", "log-log")
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.series:
            raise ValueError("a figure dataset needs at least one series")

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "x_label": self.x_label,
            "y_label": self.y_label,
            "scales": list(self.scales),
            "notes": self.notes,
            "series": [
                {"name": s.name, "x": [float(v) for v in s.x], "y": [float(v) for v in s.y]}
                for s in self.series
            ],
        }
