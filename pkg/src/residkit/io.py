# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Module for reading residkit inputs and writing its artifacts."""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import pandas as pd

from residkit.distributions import EmpiricalDistribution, PredictiveDistribution
from residkit.errors import DomainError, InputFormatError
from residkit.residuals import CSV_COLUMNS, ResidualRecord

FLOAT_FORMAT = "%.10g"
_TRUE = {"true", "1", "yes"}
_FALSE = {"false", "0", "no"}


def round_floats(obj: Any) -> Any:
    """Round every float in a JSON-like structure to 10 significant digits."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(FLOAT_FORMAT % obj)
    if isinstance(obj, dict):
        return {key: round_floats(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(value) for value in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return round_floats(obj.item())
    return obj


def dump_json(data: Any, path: str | Path) -> Path:
    """Write data as indented JSON with floats at 10 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(round_floats(data), f, indent=2)
        f.write("\n")
    return path


def load_json(path: str | Path) -> Any:
    """Load a JSON file, reporting the failing line on syntax errors.

    Raises:
        FileNotFoundError: If the file doesn't exist
        InputFormatError: If the file is not valid JSON
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InputFormatError(path, e.lineno, f"Invalid JSON: {e.msg}") from e


def write_frame(frame: pd.DataFrame, path: str | Path, fmt: str = "csv") -> Path:
    """Write a data frame as CSV or as a JSON list of row objects."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        return dump_json(frame.to_dict(orient="records"), path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _read_csv(path: str | Path, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputFormatError(path, None, f"Unreadable CSV: {e}") from e

    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise InputFormatError(
            path, 1, f"Missing column(s) {', '.join(missing)}; header is {list(frame.columns)}"
        )
    return frame


def _numeric_column(frame: pd.DataFrame, column: str, path: str | Path) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | ~values.map(lambda v: math.isfinite(v) if v == v else False)
    if bad.any():
        row = int(bad.to_numpy().nonzero()[0][0])
        raise InputFormatError(
            path, row + 2, f"Column '{column}' has non-numeric value {frame[column].iloc[row]!r}"
        )
    return values.astype(float)


def _unit_ids(frame: pd.DataFrame, path: str | Path) -> pd.Series:
    ids = frame["unit_id"].str.strip()
    empty = ids == ""
    if empty.any():
        row = int(empty.to_numpy().nonzero()[0][0])
        raise InputFormatError(path, row + 2, "Empty unit_id")
    return ids


def load_observations(path: str | Path) -> List[Tuple[str, float]]:
    """Load observations from a CSV with header ``unit_id,y``.

    Returns:
        (unit_id, y) pairs in file order

    Raises:
        InputFormatError: With the 1-based line number of the first bad row
    """
    frame = _read_csv(path, ("unit_id", "y"))
    ids = _unit_ids(frame, path)
    ys = _numeric_column(frame, "y", path)
    return list(zip(ids.tolist(), ys.tolist()))


def load_draws_csv(
    path: str | Path, units: Sequence[str] | None = None
) -> Dict[str, EmpiricalDistribution]:
    """Load long-format predictive draws (``unit_id,draw``) as Empirical laws.

    Units may have different numbers of draws.

    Args:
        path: Draws CSV
        units: Optional subset of unit_ids to keep

    Raises:
        InputFormatError: On a malformed row or a unit with fewer than 2 draws
    """
    frame = _read_csv(path, ("unit_id", "draw"))
    frame = frame.assign(unit_id=_unit_ids(frame, path))
    frame = frame.assign(draw=_numeric_column(frame, "draw", path))
    if units is not None:
        frame = frame[frame["unit_id"].isin(set(units))]

    dists: Dict[str, EmpiricalDistribution] = {}
    for unit_id, group in frame.groupby("unit_id", sort=False):
        if len(group) < 2:
            raise InputFormatError(
                path, int(group.index[0]) + 2, f"Unit {unit_id} has fewer than 2 draws"
            )
        dists[str(unit_id)] = EmpiricalDistribution(group["draw"].to_numpy())
    return dists


def load_distribution_map(path: str | Path) -> Dict[str, PredictiveDistribution]:
    """Load a JSON map of unit_id to distribution descriptor.

    Empirical descriptors may reference a draws CSV instead of listing draws
    inline: ``{"kind": "Empirical", "draws_csv": "draws.csv"}``, optionally
    with ``"unit_id"`` naming the unit inside that file (defaults to the
    map key). Relative CSV paths resolve against the JSON file's directory.
    """
    path = Path(path)
    data = load_json(path)
    if not isinstance(data, dict):
        raise InputFormatError(path, 1, "Expected a JSON object mapping unit_id to distribution")

    draw_files: Dict[Path, Dict[str, EmpiricalDistribution]] = {}
    dists: Dict[str, PredictiveDistribution] = {}
    for unit_id, spec in data.items():
        if isinstance(spec, dict) and "draws_csv" in spec:
            csv_path = (path.parent / spec["draws_csv"]).resolve()
            if csv_path not in draw_files:
                draw_files[csv_path] = load_draws_csv(csv_path)
            key = str(spec.get("unit_id", unit_id))
            if key not in draw_files[csv_path]:
                raise InputFormatError(path, None, f"Unit {key} not found in {csv_path}")
            dists[str(unit_id)] = draw_files[csv_path][key]
            continue
        try:
            dists[str(unit_id)] = PredictiveDistribution.from_dict(spec)
        except DomainError as e:
            raise InputFormatError(path, None, f"Unit {unit_id}: {e}") from e
    return dists


def load_distributions(path: str | Path) -> Dict[str, PredictiveDistribution]:
    """Load predictive distributions from a JSON map or a long-format draws CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_draws_csv(path)
    return load_distribution_map(path)


def parse_distribution_spec(text: str) -> PredictiveDistribution:
    """Parse a distribution given inline as JSON or as a path to a JSON file.

    Raises:
        InputFormatError: If the text is neither valid JSON nor a readable
            descriptor file, or the descriptor is invalid
    """
    path = Path(text)
    if path.suffix.lower() == ".json" and path.exists():
        source: str | Path = path
        data = load_json(path)
    else:
        source = "<inline>"
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputFormatError(source, e.lineno, f"Invalid distribution JSON: {e.msg}") from e
    try:
        return PredictiveDistribution.from_dict(data)
    except DomainError as e:
        raise InputFormatError(source, None, str(e)) from e


def records_frame(records: Sequence[ResidualRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.to_row() for record in records], columns=list(CSV_COLUMNS))


def write_residuals(
    records: Sequence[ResidualRecord], path: str | Path, fmt: str = "csv"
) -> Path:
    """Write residual records with the standard column layout."""
    return write_frame(records_frame(records), path, fmt)


def _flag(value: str, path: str | Path, line: int, column: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE or lowered == "":
        return False
    raise InputFormatError(path, line, f"Column '{column}' has non-boolean value {value!r}")


def read_residuals(path: str | Path) -> List[ResidualRecord]:
    """Read a residuals CSV written by ``write_residuals``.

    An optional ``fitted`` column is picked up when present.
    """
    frame = _read_csv(path, CSV_COLUMNS)
    ids = _unit_ids(frame, path)
    numeric = {
        column: pd.to_numeric(frame[column], errors="coerce")
        for column in ("y", "percentile", "r_star", "r_ddag")
    }
    fitted = (
        pd.to_numeric(frame["fitted"], errors="coerce")
        if "fitted" in frame.columns
        else pd.Series([math.nan] * len(frame))
    )

    records = []
    for row in range(len(frame)):
        line = row + 2
        values = {column: float(series.iloc[row]) for column, series in numeric.items()}
        if math.isnan(values["y"]) or math.isnan(values["r_ddag"]):
            raise InputFormatError(path, line, "Columns 'y' and 'r_ddag' must be numeric")
        records.append(
            ResidualRecord(
                unit_id=ids.iloc[row],
                y=values["y"],
                percentile=values["percentile"],
                r_star=values["r_star"],
                r_ddag=values["r_ddag"],
                r_star_truncated=_flag(
                    frame["r_star_truncated"].iloc[row], path, line, "r_star_truncated"
                ),
                r_ddag_truncated=_flag(
                    frame["r_ddag_truncated"].iloc[row], path, line, "r_ddag_truncated"
                ),
                fitted=float(fitted.iloc[row]),
            )
        )
    return records
