"""Rendering of per-iteration clustering CSVs into comparison figures.

Input schema (one file per run):

    iteration,wall_seconds,score,avg_center_movement,reassigned_count,engine,k,seed

One line is drawn per file. The legend is sorted by each run's best (minimum)
score, best first. A run whose first iteration already exceeded the time limit
is marked with a trailing "*". Rendering is a pure function of the CSVs and
options; SVG output is byte-deterministic.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

EXPECTED_HEADER = ["iteration", "wall_seconds", "score", "avg_center_movement",
                   "reassigned_count", "engine", "k", "seed"]


class SchemaError(ValueError):
    """A CSV did not match the expected run schema."""


@dataclass
class RunSeries:
    label: str
    points: list  # [(wall_seconds, score)], wall strictly increasing

    @property
    def best_score(self):
        return min(s for _, s in self.points)

    @property
    def first_wall(self):
        return self.points[0][0]


@dataclass
class PlotOptions:
    title: str = None
    log_y: bool = False
    time_limit: float = 500.0


def load_series(path) -> RunSeries:
    """Parse one run CSV; the label is the file name without its extension."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != EXPECTED_HEADER:
            for i, (got, want) in enumerate(zip(header, EXPECTED_HEADER)):
                if got != want:
                    raise SchemaError(
                        f"{path}: column {i} is {got!r}, expected {want!r}")
            raise SchemaError(f"{path}: expected {len(EXPECTED_HEADER)} columns, "
                              f"got {len(header)}")
        points = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EXPECTED_HEADER):
                raise SchemaError(f"{path}: line {lineno} has {len(row)} fields")
            try:
                wall = float(row[1])
                score = float(row[2])
            except ValueError as e:
                raise SchemaError(f"{path}: line {lineno}: {e}") from None
            points.append((wall, score))
    if not points:
        raise SchemaError(f"{path}: no data rows")
    for (w1, _), (w2, _) in zip(points, points[1:]):
        if w2 <= w1:
            raise SchemaError(f"{path}: wall_seconds not strictly increasing "
                              f"({w1} -> {w2})")
    label = os.path.splitext(os.path.basename(path))[0]
    return RunSeries(label=label, points=points)


def render(csv_paths, out_path, options: PlotOptions = None):
    """Draw one line per CSV and write an SVG or PNG figure."""
    if not csv_paths:
        raise SchemaError("at least one CSV is required")
    options = options or PlotOptions()
    series = [load_series(p) for p in csv_paths]
    # legend sorted by best score, best first; late starters flagged
    series.sort(key=lambda s: (s.best_score, s.label))

    with plt.rc_context({"svg.hashsalt": "sheesh-plots", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for s in series:
            label = s.label + ("*" if s.first_wall > options.time_limit else "")
            ax.plot([w for w, _ in s.points], [v for _, v in s.points],
                    marker="o", markersize=3, linewidth=1.2, label=label)
        if options.log_y:
            ax.set_yscale("log")
        ax.set_xlabel("wall time (s)")
        ax.set_ylabel("score")
        if options.title:
            ax.set_title(options.title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_path, metadata=_deterministic_metadata(out_path))
        plt.close(fig)


def _deterministic_metadata(out_path):
    ext = os.path.splitext(out_path)[1].lower()
    if ext == ".svg":
        return {"Date": None}
    return {}
