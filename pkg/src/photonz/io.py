"""CSV and JSON formats for quadrature records, z records and results.

Floats are written with ``repr`` so every file re-parses to the exact same
values.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from photonz.errors import ParseError
from photonz.measurement import QuadratureBatch, ZBatch
from photonz.spd import ThresholdCurvePoint

QUADRATURE_HEADERS = (("x3", "p4"), ("x3", "p4", "theta"))
Z_HEADER = ("z",)
CURVE_HEADER = ("threshold", "efficiency", "dark_count", "ratio")


def _read_rows(path):
    """Return (header, header line number, data array) of a headed numeric CSV."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=path) from exc
    with handle:
        reader = csv.reader(handle)
        header = None
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            cells = [cell.strip() for cell in row]
            if header is None:
                header = tuple(cells)
                header_line = lineno
                continue
            if len(cells) != len(header):
                raise ParseError(
                    f"expected {len(header)} columns, found {len(cells)}", path=path, line=lineno
                )
            try:
                values = [float(cell) for cell in cells]
            except ValueError:
                raise ParseError(f"not a number in row {cells}", path=path, line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError("non-finite value", path=path, line=lineno)
            rows.append(values)
    if header is None:
        raise ParseError("empty file, missing header", path=path, line=1)
    return header, header_line, np.array(rows, dtype=float).reshape(-1, len(header))


def _missing_header(path, header, line, expected):
    try:
        [float(cell) for cell in header]
        hint = "missing header"
    except ValueError:
        hint = "unexpected header"
    wanted = " or ".join(",".join(h) for h in expected)
    return ParseError(f"{hint} {','.join(header)!r}; expected {wanted}", path=path, line=line)


def read_quadratures(path) -> QuadratureBatch:
    header, line, data = _read_rows(path)
    if header not in QUADRATURE_HEADERS:
        raise _missing_header(path, header, line, QUADRATURE_HEADERS)
    if data.shape[0] == 0:
        raise ParseError("no data rows", path=path, line=line + 1)
    phases = data[:, 2] if data.shape[1] == 3 else None
    return QuadratureBatch(data[:, 0], data[:, 1], phases, source_tag=str(path))


def read_z(path) -> ZBatch:
    header, line, data = _read_rows(path)
    if header != Z_HEADER:
        raise _missing_header(path, header, line, (Z_HEADER,))
    if data.shape[0] == 0:
        raise ParseError("no data rows", path=path, line=line + 1)
    if np.any(data[:, 0] < 0):
        bad = int(np.argmax(data[:, 0] < 0))
        raise ParseError("negative z value", path=path, line=line + 1 + bad)
    return ZBatch(data[:, 0], str(path))


def read_records(path):
    """Read either file kind, dispatching on the header."""
    header, line, _ = _read_rows(path)
    if header == Z_HEADER:
        return read_z(path)
    if header in QUADRATURE_HEADERS:
        return read_quadratures(path)
    raise _missing_header(path, header, line, (Z_HEADER, *QUADRATURE_HEADERS))


def emit(path, text: str) -> None:
    """Write ``text`` to ``path``; ``None`` or ``-`` means stdout."""
    if path is None or str(path) == "-":
        print(text, end="" if text.endswith("\n") else "\n")
    else:
        Path(path).write_text(text)


def _write_lines(path, header, columns):
    lines = [",".join(header)]
    lines.extend(",".join(repr(float(v)) for v in row) for row in zip(*columns))
    emit(path, "\n".join(lines) + "\n")


def write_quadratures(path, batch: QuadratureBatch) -> None:
    if batch.phases is None:
        _write_lines(path, QUADRATURE_HEADERS[0], (batch.x3, batch.p4))
    else:
        _write_lines(path, QUADRATURE_HEADERS[1], (batch.x3, batch.p4, batch.phases))


def write_z(path, batch: ZBatch) -> None:
    _write_lines(path, Z_HEADER, (batch.values,))


def write_curve(path, points) -> None:
    _write_lines(
        path, CURVE_HEADER, [[getattr(p, name) for p in points] for name in CURVE_HEADER]
    )


def read_curve(path) -> list[ThresholdCurvePoint]:
    header, line, data = _read_rows(path)
    if header != CURVE_HEADER:
        raise _missing_header(path, header, line, (CURVE_HEADER,))
    return [ThresholdCurvePoint(*map(float, row)) for row in data]


def write_histogram(path, columns: dict) -> None:
    """Unit-width integer bins: column ``n`` then one column per distribution."""
    names = list(columns)
    size = max(len(v) for v in columns.values())
    lines = [",".join(["n", *names])]
    for n in range(size):
        cells = [str(n)]
        for name in names:
            vals = columns[name]
            cells.append(repr(float(vals[n])) if n < len(vals) else "0.0")
        lines.append(",".join(cells))
    emit(path, "\n".join(lines) + "\n")


def write_json(path, data) -> None:
    emit(path, json.dumps(data, indent=2, allow_nan=False) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc

