"""Convergence-rate and conservation figures from solver CSV output."""

from .plots import (
    CONSERVATION_COLUMNS,
    EmptyDataError,
    KINDS,
    MissingColumnError,
    PlotError,
    PlotSpec,
    REFERENCE_LEVEL,
    SpecError,
    load_specs,
    plot,
    spec_from_doc,
)

__all__ = [
    "CONSERVATION_COLUMNS",
    "EmptyDataError",
    "KINDS",
    "MissingColumnError",
    "PlotError",
    "PlotSpec",
    "REFERENCE_LEVEL",
    "SpecError",
    "load_specs",
    "plot",
    "spec_from_doc",
]
