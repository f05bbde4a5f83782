"""Score-vs-time comparison figures for clustering benchmark CSVs."""

from .render import PlotOptions, RunSeries, SchemaError, load_series, render

__version__ = "0.1.0"
