from .render import CsvTable, FigureJob, FigureKind, RenderError, ir_inside_fraction, read_table, render

__all__ = [
    "CsvTable",
    "FigureJob",
    "FigureKind",
    "RenderError",
    "ir_inside_fraction",
    "read_table",
    "render",
]
__version__ = "0.1.0"
