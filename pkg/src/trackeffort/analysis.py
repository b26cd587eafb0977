"""Correlation study over measure score tables.

Collects per-run (sequence x detector x tracker) measure values into a
table, computes pairwise Pearson coefficients with pairwise-complete
handling of missing values, and renders the matrix as a self-contained
SVG heatmap. Extra numeric columns ingested from external tools ride
along untouched, so externally computed scores can join the comparison.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .baselines import BaselineScores
from .effort import TemScores

KEY_COLUMNS = ("sequence", "detector", "tracker")
MEASURE_COLUMNS = ("ap50", "recall", "precision", "tp", "fp", "fn", "mota", "motp",
                   "idf1", "ata", "idsw", "e_intra", "e_inter", "tem")
SCORE_CSV_COLUMNS = KEY_COLUMNS + MEASURE_COLUMNS


class RunKey(NamedTuple):
    sequence: str
    detector: str
    tracker: str


@dataclass(frozen=True)
class ScoreTable:
    """Numeric measure values per run; NaN marks a missing entry."""

    keys: tuple[RunKey, ...]
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")
        if self.values.shape != (len(self.keys), len(self.columns)):
            raise ValueError("values shape must be (n_rows, n_columns)")

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(KEY_COLUMNS + self.columns)
            for key, row in zip(self.keys, self.values):
                writer.writerow(list(key) + [_format_value(v) for v in row])

    @classmethod
    def read_csv(cls, path: str | Path) -> "ScoreTable":
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            if header[:3] != list(KEY_COLUMNS):
                raise ValueError(f"score CSV must start with columns {KEY_COLUMNS}")
            columns = tuple(header[3:])
            keys = []
            rows = []
            for record in reader:
                if not record:
                    continue
                keys.append(RunKey(*record[:3]))
                rows.append([float(v) if v.strip() else math.nan for v in record[3:]])
        values = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
        return cls(keys=tuple(keys), columns=columns, values=values)


def _format_value(value: float) -> str:
    if math.isnan(value):
        return ""
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def aggregate(runs: Iterable[tuple[RunKey, TemScores, BaselineScores]],
              include_means: bool = False) -> ScoreTable:
    """One table row per run triple, optionally plus per-(detector, tracker)
    mean rows over sequences (keyed with sequence name ``ALL``)."""
    keys: list[RunKey] = []
    rows: list[list[float]] = []
    seen: set[RunKey] = set()
    for key, tem, base in sorted(runs, key=lambda item: item[0]):
        if key in seen:
            raise ValueError(f"duplicate run triple {key}")
        seen.add(key)
        keys.append(key)
        rows.append([base.ap50, base.recall, base.precision, float(base.tp),
                     float(base.fp), float(base.fn), base.mota, base.motp,
                     base.idf1, base.ata, float(base.idsw_total),
                     tem.intra_effort, tem.inter_effort, tem.tem])
    values = np.array(rows, dtype=float) if rows else np.empty((0, len(MEASURE_COLUMNS)))
    if include_means and rows:
        groups: dict[tuple[str, str], list[int]] = {}
        for index, key in enumerate(keys):
            groups.setdefault((key.detector, key.tracker), []).append(index)
        for (detector, tracker), indices in sorted(groups.items()):
            keys.append(RunKey("ALL", detector, tracker))
            values = np.vstack([values, values[indices].mean(axis=0)])
    return ScoreTable(keys=tuple(keys), columns=MEASURE_COLUMNS, values=values)


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Pearson product-moment coefficient, or None when undefined.

    Pairs where either entry is missing (NaN) are dropped first; the
    population form is used, and zero variance on either side makes the
    coefficient undefined (None), never 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("vectors must have equal length")
    mask = ~(np.isnan(x) | np.isnan(y))
    x, y = x[mask], y[mask]
    if x.size < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if denom == 0.0:
        return None
    return float(np.dot(dx, dy)) / denom


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric Pearson matrix (NaN = undefined) with pairwise sample counts."""

    labels: tuple[str, ...]
    r: np.ndarray
    n: np.ndarray

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["measure_a", "measure_b", "r", "n"])
            for i, label_a in enumerate(self.labels):
                for j in range(i, len(self.labels)):
                    value = self.r[i, j]
                    writer.writerow([label_a, self.labels[j],
                                     "" if math.isnan(value) else repr(float(value)),
                                     int(self.n[i, j])])

    def get(self, a: str, b: str) -> float:
        return float(self.r[self.labels.index(a), self.labels.index(b)])


def correlation_matrix(table: ScoreTable) -> CorrelationMatrix:
    """Pairwise Pearson over all column pairs, pairwise-complete rows."""
    if len(table.keys) < 2:
        raise ValueError("correlation needs at least 2 rows")
    size = len(table.columns)
    r = np.full((size, size), np.nan)
    n = np.zeros((size, size), dtype=int)
    for i in range(size):
        for j in range(i, size):
            x = table.values[:, i]
            y = table.values[:, j]
            mask = ~(np.isnan(x) | np.isnan(y))
            n[i, j] = n[j, i] = int(mask.sum())
            value = pearson(x, y)
            if value is not None:
                r[i, j] = r[j, i] = value
    return CorrelationMatrix(labels=table.columns, r=r, n=n)


def _cell_color(value: float) -> str:
    # Diverging scale: blue (-1) -> white (0) -> red (+1); gray for missing.
    if math.isnan(value):
        return "#d9d9d9"
    value = max(-1.0, min(1.0, value))
    low = (59, 76, 192)
    high = (180, 4, 38)
    white = (255, 255, 255)
    anchor = low if value < 0 else high
    t = abs(value)
    channel = [round(w + (a - w) * t) for w, a in zip(white, anchor)]
    return "#{:02x}{:02x}{:02x}".format(*channel)


def render_heatmap(matrix: CorrelationMatrix, path: str | Path) -> None:
    """Write the correlation matrix as a labeled, self-contained SVG."""
    cell = 46
    label_space = 86
    size = len(matrix.labels)
    width = label_space + size * cell + 10
    height = label_space + size * cell + 10
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for j, label in enumerate(matrix.labels):
        x = label_space + j * cell + cell / 2
        parts.append(f'<text x="{x:.1f}" y="{label_space - 8}" font-size="11" '
                     f'text-anchor="start" transform="rotate(-45 {x:.1f} {label_space - 8})"'
                     f'>{label}</text>')
    for i, label in enumerate(matrix.labels):
        y = label_space + i * cell + cell / 2 + 4
        parts.append(f'<text x="{label_space - 6}" y="{y:.1f}" font-size="11" '
                     f'text-anchor="end">{label}</text>')
        for j in range(size):
            x = label_space + j * cell
            y0 = label_space + i * cell
            value = float(matrix.r[i, j])
            parts.append(f'<rect x="{x}" y="{y0}" width="{cell}" height="{cell}" '
                         f'fill="{_cell_color(value)}" stroke="#ffffff" stroke-width="1"/>')
            if not math.isnan(value):
                fill = "#ffffff" if abs(value) > 0.55 else "#1a1a1a"
                parts.append(f'<text x="{x + cell / 2:.1f}" y="{y0 + cell / 2 + 4:.1f}" '
                             f'font-size="11" text-anchor="middle" fill="{fill}"'
                             f'>{value:.2f}</text>')
    parts.append("</svg>")
    Path(path).write_bytes("\n".join(parts).encode("utf-8"))
