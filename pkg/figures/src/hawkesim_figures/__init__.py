"""Render hawkesim convergence-series CSVs as annotated plots."""

from .render import SchemaMismatch, SeriesFile, build_figure, load_series, render

__version__ = "0.1.0"
