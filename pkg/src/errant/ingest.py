"""Speed-test CSV ingestion: parsing, row validation, signal-quality binning.

The canonical input schema is one measurement per row with the columns
``timestamp, country, operator, rat, rssi, download_kbps, upload_kbps,
latency_ms``. Files using different column names can be read by passing a
schema mapping from canonical names to the names actually present.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

from .errors import FormatError

COLUMNS = (
    "timestamp",
    "country",
    "operator",
    "rat",
    "rssi",
    "download_kbps",
    "upload_kbps",
    "latency_ms",
)


class Rat(str, enum.Enum):
    """Radio access technology of a measurement."""

    THREE_G = "3G"
    FOUR_G = "4G"

    def __str__(self) -> str:
        return self.value


class SignalQuality(str, enum.Enum):
    """Signal-strength level, binned per RAT."""

    BAD = "bad"
    ORDINARY = "ordinary"
    GOOD = "good"

    def __str__(self) -> str:
        return self.value


# Per-RAT rssi bin edges in dB: (bad upper bound, ordinary upper bound),
# both inclusive on the weaker side.
_BIN_EDGES = {
    Rat.THREE_G: (-100.0, -85.0),
    Rat.FOUR_G: (-85.0, -75.0),
}


def bin_signal(rat: Rat, rssi: float) -> SignalQuality:
    """Map a signal strength in dB to a quality level for the given RAT."""
    bad_upper, ordinary_upper = _BIN_EDGES[rat]
    if rssi <= bad_upper:
        return SignalQuality.BAD
    if rssi <= ordinary_upper:
        return SignalQuality.ORDINARY
    return SignalQuality.GOOD


@dataclass(frozen=True)
class SpeedTestRecord:
    """One validated speed-test measurement."""

    timestamp: float
    country: str
    operator: str
    rat: Rat
    rssi: float
    download_kbps: float
    upload_kbps: float
    latency_ms: float


@dataclass(frozen=True)
class RejectedRow:
    """An input row that failed validation, with the first reason found."""

    line: int
    fields: tuple[str, ...]
    reason: str


# Columns that must parse as numbers.
_NUMERIC = ("timestamp", "rssi", "download_kbps", "upload_kbps", "latency_ms")
# Short labels used in reject reasons for the measurement columns.
_MEASUREMENTS = (
    ("download_kbps", "download"),
    ("upload_kbps", "upload"),
    ("latency_ms", "latency"),
)


def parse_speedtests(
    source: Iterable[str],
    schema: Optional[Mapping[str, str]] = None,
) -> tuple[list[SpeedTestRecord], list[RejectedRow]]:
    """Parse a speed-test CSV into accepted records and rejected rows.

    ``source`` is an iterable of text lines starting with a header row.
    ``schema`` maps canonical column names to the names used in the file.
    Every data row ends up either as a record or as a ``RejectedRow`` with
    the reason it was refused; nothing is silently dropped. A missing header
    or required column is fatal and raises :class:`FormatError`.
    """
    reader = csv.reader(source)
    try:
        header = [cell.strip() for cell in next(reader)]
    except StopIteration:
        raise FormatError("input has no header row") from None
    mapping = dict(schema) if schema else {}
    positions = {}
    for column in COLUMNS:
        name = mapping.get(column, column)
        try:
            positions[column] = header.index(name)
        except ValueError:
            raise FormatError(f"required column {name!r} not in header") from None

    records: list[SpeedTestRecord] = []
    rejects: list[RejectedRow] = []
    width = max(positions.values()) + 1
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        result = _parse_row(row, positions, width)
        if isinstance(result, str):
            rejects.append(RejectedRow(line=line, fields=tuple(row), reason=result))
        else:
            records.append(result)
    return records, rejects


def _parse_row(
    row: list[str], positions: dict[str, int], width: int
) -> Union[SpeedTestRecord, str]:
    """Validate one data row; returns a record or the reject reason."""
    if len(row) < width:
        return "short row"
    raw = {column: row[index].strip() for column, index in positions.items()}
    # rssi and rat are the metadata needed to place a record in a profile
    if not raw["rssi"] or not raw["rat"]:
        return "missing metadata"
    for column in COLUMNS:
        if not raw[column]:
            return f"missing {column}"
    try:
        rat = Rat(raw["rat"].upper())
    except ValueError:
        return f"unknown rat {raw['rat']!r}"
    values = {}
    for column in _NUMERIC:
        try:
            values[column] = float(raw[column])
        except ValueError:
            return f"unparseable {column}"
        if not math.isfinite(values[column]):
            return f"non-finite {column}"
    if values["rssi"] > 0:
        return "positive rssi"
    for column, label in _MEASUREMENTS:
        if values[column] <= 0:
            return f"nonpositive {label}"
    return SpeedTestRecord(
        timestamp=values["timestamp"],
        country=raw["country"].lower(),
        operator=raw["operator"].lower(),
        rat=rat,
        rssi=values["rssi"],
        download_kbps=values["download_kbps"],
        upload_kbps=values["upload_kbps"],
        latency_ms=values["latency_ms"],
    )


def write_rejects(
    rejects: Iterable[RejectedRow],
    path: str,
    header: Optional[Iterable[str]] = None,
) -> None:
    """Write rejected rows to a CSV with the reason appended as a last column."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        if header is not None:
            writer.writerow(list(header) + ["reason"])
        for reject in rejects:
            writer.writerow(list(reject.fields) + [reject.reason])
