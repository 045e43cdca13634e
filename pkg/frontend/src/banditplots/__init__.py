"""Static figure rendering for banditlab output files."""

from .figures import (
    COVERED_COLOR,
    MISSED_COLOR,
    FigureSpec,
    SchemaError,
    build_figure,
    render,
)

__all__ = [
    "FigureSpec",
    "SchemaError",
    "build_figure",
    "render",
    "COVERED_COLOR",
    "MISSED_COLOR",
]
