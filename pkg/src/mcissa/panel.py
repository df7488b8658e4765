"""Loading, validating and pre-transforming panels of time series.

A panel holds ``M`` series observed at the same ``T`` time points and is
stored series-by-time (``values[i, t]``).  On disk the layout is the
transpose: one CSV row per time point, one column per series, with an
optional leading ``date`` column of labels.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import PanelFormatError, ParameterError

__all__ = [
    "TimeSeriesPanel",
    "load_panel",
    "read_panel",
    "write_panel",
    "format_panel",
    "format_float",
    "demean",
    "rebase_index",
]

MIN_LENGTH = 4
LABEL_COLUMN = "date"


def format_float(x: float) -> str:
    """17 significant digits: enough for a lossless float round trip."""
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """``M`` real series of common length ``T``.

    Parameters
    ----------
    values : array_like, shape (M, T)
        Observations, one row per series.
    series_names : sequence of str
        ``M`` unique identifiers.
    time_labels : sequence of str, optional
        ``T`` labels for the time points (dates as read from file).
    means : ndarray, shape (M,), optional
        Per-series means removed by :func:`demean`; ``None`` when the
        panel has not been demeaned.
    """

    values: np.ndarray
    series_names: tuple
    time_labels: tuple | None = None
    means: np.ndarray | None = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2:
            raise PanelFormatError(f"panel values must be 2-d (series x time), got shape {values.shape}")
        M, T = values.shape
        if M < 1:
            raise PanelFormatError("panel must contain at least one series")
        if T < MIN_LENGTH:
            raise PanelFormatError(f"panel must have at least {MIN_LENGTH} time points, got {T}")
        bad = ~np.isfinite(values)
        if bad.any():
            i, t = np.argwhere(bad)[0]
            raise PanelFormatError(f"non-finite value at series {i}, time {t}")
        names = tuple(str(n) for n in self.series_names)
        if len(names) != M:
            raise PanelFormatError(f"expected {M} series names, got {len(names)}")
        if len(set(names)) != M:
            dup = sorted({n for n in names if names.count(n) > 1})
            raise PanelFormatError(f"duplicate series names: {', '.join(dup)}")
        labels = self.time_labels
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != T:
                raise PanelFormatError(f"expected {T} time labels, got {len(labels)}")
        means = self.means
        if means is not None:
            means = np.array(means, dtype=float, copy=True).reshape(M)
            means.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "series_names", names)
        object.__setattr__(self, "time_labels", labels)
        object.__setattr__(self, "means", means)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def with_values(self, values, means=None) -> "TimeSeriesPanel":
        """Same names and labels, new values (and optionally new stored means)."""
        return replace(self, values=values, means=means)

    def take(self, order: Sequence[int]) -> "TimeSeriesPanel":
        """Panel with series reordered (or subset) by position."""
        order = list(order)
        means = None if self.means is None else self.means[order]
        return TimeSeriesPanel(
            self.values[order],
            [self.series_names[i] for i in order],
            self.time_labels,
            means,
        )

    def restored(self) -> np.ndarray:
        """Values with any stored means added back."""
        if self.means is None:
            return np.array(self.values)
        return self.values + self.means[:, None]


def _parse_rows(rows, source):
    try:
        header = next(rows)
    except StopIteration:
        raise PanelFormatError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    has_labels = bool(header) and header[0].lower() == LABEL_COLUMN
    names = header[1:] if has_labels else header
    if not names:
        raise PanelFormatError(f"{source}: header row has no series columns")
    seen = {}
    for col, name in enumerate(names, start=2 if has_labels else 1):
        if not name:
            raise PanelFormatError(f"{source}: row 1, column {col}: empty series name")
        if name in seen:
            raise PanelFormatError(
                f"{source}: row 1: duplicate series name {name!r} in columns {seen[name]} and {col}"
            )
        seen[name] = col

    width = len(header)
    labels, data = [], []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise PanelFormatError(
                f"{source}: row {lineno}: expected {width} fields, found {len(row)} (ragged row)"
            )
        if has_labels:
            labels.append(row[0].strip())
            cells = row[1:]
        else:
            cells = row
        parsed = []
        for j, cell in enumerate(cells):
            col = j + (2 if has_labels else 1)
            try:
                x = float(cell)
            except ValueError:
                raise PanelFormatError(
                    f"{source}: row {lineno}, column {col} ({names[j]}): non-numeric value {cell.strip()!r}"
                ) from None
            if not math.isfinite(x):
                raise PanelFormatError(
                    f"{source}: row {lineno}, column {col} ({names[j]}): non-finite value {cell.strip()!r}"
                )
            parsed.append(x)
        data.append(parsed)

    if len(data) < MIN_LENGTH:
        raise PanelFormatError(f"{source}: need at least {MIN_LENGTH} data rows, found {len(data)}")
    values = np.array(data, dtype=float).T
    return TimeSeriesPanel(values, names, labels if has_labels else None)


def load_panel(path, *, delimiter: str = ",") -> TimeSeriesPanel:
    """Read a panel from a CSV file.

    The first row holds series names; every later row is one time point.
    A first column headed ``date`` (any case) is kept as time labels.
    Blank lines are ignored.

    Raises
    ------
    FileNotFoundError
        If `path` does not exist.
    PanelFormatError
        On ragged rows, non-numeric or non-finite cells, duplicate names,
        with the offending row and column in the message.
    """
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse_rows(csv.reader(fh, delimiter=delimiter), path)


def read_panel(text: str, *, delimiter: str = ",", source: str = "<string>") -> TimeSeriesPanel:
    """Parse CSV text with the same rules as :func:`load_panel`."""
    return _parse_rows(csv.reader(io.StringIO(text), delimiter=delimiter), source)


def format_panel(panel: TimeSeriesPanel, values=None) -> str:
    """Render `panel` (or `values` under its names and labels) as CSV text."""
    values = panel.values if values is None else np.asarray(values, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(panel.series_names)
    if panel.time_labels is not None:
        header = [LABEL_COLUMN] + header
    writer.writerow(header)
    for t in range(values.shape[1]):
        row = [format_float(x) for x in values[:, t]]
        if panel.time_labels is not None:
            row = [panel.time_labels[t]] + row
        writer.writerow(row)
    return buf.getvalue()


def write_panel(panel: TimeSeriesPanel, path, values=None) -> None:
    """Write `panel` in the canonical CSV layout read by :func:`load_panel`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(format_panel(panel, values))


def demean(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Remove each series' sample mean.

    The removed means are accumulated in ``panel.means`` so that
    :meth:`TimeSeriesPanel.restored` recovers the original levels.
    """
    mu = panel.values.mean(axis=1)
    centred = panel.values - mu[:, None]
    total = mu if panel.means is None else panel.means + mu
    return panel.with_values(centred, means=total)


def rebase_index(panel: TimeSeriesPanel, base_range) -> TimeSeriesPanel:
    """Scale every series so its mean over `base_range` equals 100.

    Parameters
    ----------
    base_range : slice or (start, stop) tuple
        Half-open range of time positions, ``0 <= start < stop <= T``.
    """
    if isinstance(base_range, slice):
        start, stop, step = base_range.indices(panel.T)
        if step != 1:
            raise ParameterError("base range must be contiguous")
    else:
        start, stop = base_range
    if not 0 <= start < stop <= panel.T:
        raise ParameterError(f"base range [{start}, {stop}) is empty or outside [0, {panel.T})")
    base = panel.values[:, start:stop].mean(axis=1)
    scale = np.abs(panel.values).max(axis=1)
    for i, b in enumerate(base):
        if b == 0 or abs(b) <= 1e-14 * scale[i]:
            raise ParameterError(
                f"series {panel.series_names[i]!r} has zero mean over base range [{start}, {stop})"
            )
    factor = 100.0 / base
    means = None if panel.means is None else panel.means * factor
    return panel.with_values(panel.values * factor[:, None], means=means)
