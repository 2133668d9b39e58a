"""Measurement CSV ingestion/emission and atomic JSON report writing.

Dense files have the header ``m,n,error`` with an optional ``replicate``
column. Pruning files start with ``depth,width_scale,density,n,error`` and may
add ``replicate`` and ``eps_np``. Without ``eps_np`` each ``(depth,
width_scale, n, replicate)`` group must contain its unpruned ``density = 1``
row, whose error becomes the group's ``eps_np``.

Lines starting with ``#`` are comments. Row numbers in error messages are
physical line numbers, so the header is row 1. Floats are written with
``repr`` so emitting and reloading is exact.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import warnings
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DomainError, ParseError
from .forms import DenseMeasurement, PruneMeasurement

SCHEMA_VERSION = 1

DENSE_COLUMNS = ("m", "n", "error")
PRUNE_COLUMNS = ("depth", "width_scale", "density", "n", "error")
_OPTIONAL = {"dense": ("replicate",), "prune": ("replicate", "eps_np")}


class LadderWarning(UserWarning):
    """A pruning group has densities off the ``0.8**i`` ladder."""


def _rows(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, next(csv.reader([line]))


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not valid UTF-8: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc


def _header(rows, required: Sequence[str], optional: Sequence[str]) -> tuple[int, list[str]]:
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("file has no header") from None
    header = [h.strip() for h in header]
    extra = header[len(required):]
    if tuple(header[: len(required)]) != tuple(required) or any(h not in optional for h in extra) \
            or len(set(extra)) != len(extra):
        raise ParseError(
            f"expected header {','.join(required)} optionally followed by {'/'.join(optional)}, "
            f"got {','.join(header)}",
            row=lineno,
        )
    return lineno, header


def _float(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{text!r} is not a decimal number", row=lineno, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"{text!r} is not finite", row=lineno, column=column)
    return value


def _int(text: str, lineno: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{text!r} is not an integer", row=lineno, column=column) from None


def _parse_records(text: str, required, optional):
    rows = _rows(text)
    _, header = _header(rows, required, optional)
    for lineno, cells in rows:
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(cells)}", row=lineno)
        rec = {}
        for name, cell in zip(header, cells):
            cell = cell.strip()
            rec[name] = _int(cell, lineno, name) if name == "replicate" else _float(cell, lineno, name)
        yield lineno, rec


def _positive(rec: dict, names: Sequence[str], lineno: int) -> None:
    for name in names:
        if rec[name] <= 0:
            raise DomainError(f"row {lineno}, column {name!r}: must be positive, got {rec[name]!r}")


def load_dense_csv(path) -> list[DenseMeasurement]:
    """Read a dense measurement table."""
    out = []
    for lineno, rec in _parse_records(_read(path), DENSE_COLUMNS, _OPTIONAL["dense"]):
        _positive(rec, DENSE_COLUMNS, lineno)
        out.append(DenseMeasurement(rec["m"], rec["n"], rec["error"], rec.get("replicate")))
    return out


def dense_csv(records: Sequence[DenseMeasurement]) -> str:
    with_rep = any(r.replicate is not None for r in records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DENSE_COLUMNS + (("replicate",) if with_rep else ()))
    for r in records:
        row = [repr(r.m), repr(r.n), repr(r.error)]
        if with_rep:
            row.append("" if r.replicate is None else str(r.replicate))
        writer.writerow(row)
    return buf.getvalue()


def on_ladder(d: float, ratio: float = 0.8, rtol: float = 1e-9) -> bool:
    """Whether ``d`` equals ``ratio**i`` for some integer ``i >= 0``."""
    i = round(math.log(d) / math.log(ratio))
    return i >= 0 and abs(d - ratio**i) <= rtol * ratio**i


def load_prune_csv(path) -> list[PruneMeasurement]:
    """Read a pruning table, attaching each group's unpruned error as ``eps_np``.

    Emits :class:`LadderWarning` once per group whose densities are not all of
    the form ``0.8**i``.
    """
    parsed = list(_parse_records(_read(path), PRUNE_COLUMNS, _OPTIONAL["prune"]))
    groups: dict[tuple, list] = {}
    for lineno, rec in parsed:
        _positive(rec, ("depth", "width_scale", "n", "error"), lineno)
        if not 0 < rec["density"] <= 1:
            raise DomainError(f"row {lineno}, column 'density': must lie in (0, 1], got {rec['density']!r}")
        if "eps_np" in rec:
            _positive(rec, ("eps_np",), lineno)
        key = (rec["depth"], rec["width_scale"], rec["n"], rec.get("replicate"))
        groups.setdefault(key, []).append((lineno, rec))
    anchors = {}
    for key, members in groups.items():
        unpruned = [rec["error"] for _, rec in members if rec["density"] == 1.0]
        if unpruned:
            anchors[key] = unpruned[0]
        elif "eps_np" not in members[0][1]:
            l, w, n, rep = key
            where = f"depth={l!r}, width_scale={w!r}, n={n!r}" + ("" if rep is None else f", replicate={rep}")
            raise ParseError(f"group ({where}) has no density = 1 row to anchor eps_np", row=members[0][0])
        if not all(on_ladder(rec["density"]) for _, rec in members):
            warnings.warn(
                f"group {key[:3]} has densities off the 0.8^i ladder", LadderWarning, stacklevel=2,
            )
    out = []
    for lineno, rec in parsed:
        key = (rec["depth"], rec["width_scale"], rec["n"], rec.get("replicate"))
        eps_np = rec["eps_np"] if "eps_np" in rec else anchors[key]
        out.append(PruneMeasurement(
            rec["depth"], rec["width_scale"], rec["density"], rec["n"], rec["error"], eps_np,
            replicate=rec.get("replicate"),
        ))
    return out


def prune_csv(records: Sequence[PruneMeasurement], include_eps_np: bool = True) -> str:
    with_rep = any(r.replicate is not None for r in records)
    header = PRUNE_COLUMNS + (("replicate",) if with_rep else ()) + (("eps_np",) if include_eps_np else ())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in records:
        row = [repr(r.depth), repr(r.width), repr(r.density), repr(r.n), repr(r.error)]
        if with_rep:
            row.append("" if r.replicate is None else str(r.replicate))
        if include_eps_np:
            row.append(repr(r.eps_np))
        writer.writerow(row)
    return buf.getvalue()


def table_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def landscape_csv(points) -> str:
    """``log10 m, log10 n, actual, estimated`` per dense point result."""
    return table_csv(
        ("log10_m", "log10_n", "actual", "estimated"),
        ((math.log10(p.config["m"]), math.log10(p.config["n"]), p.actual, p.estimated) for p in points),
    )


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _jsonable(value.item())
    return value


def report_json(command: str, payload: dict) -> str:
    """Serialize a report; floats use the shortest round-trip form, non-finite become null."""
    doc = {"schema": SCHEMA_VERSION, "command": command, **_jsonable(payload)}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_report(directory, command: str, payload: dict) -> Path:
    path = Path(directory) / "report.json"
    atomic_write_text(path, report_json(command, payload))
    return path
