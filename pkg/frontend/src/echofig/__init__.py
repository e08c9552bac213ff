from .render import (
    ColumnMismatchError,
    FigureJob,
    render,
    render_fringe,
    render_poincare,
    render_sweep,
)

__all__ = [
    "ColumnMismatchError",
    "FigureJob",
    "render",
    "render_fringe",
    "render_poincare",
    "render_sweep",
]
__version__ = "0.1.0"
