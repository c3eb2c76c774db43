"""Figure rendering for dsm-spectra experiment CSVs.

The package consumes the documented CSV schemas only; it never
recomputes statistics beyond histogram binning and the zero-mean
Gaussian overlay fitted to the recorded sample variance.
"""

from .render import KINDS, PlotSpec, build_figure, render
from .schema import SchemaError

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "PlotSpec",
    "SchemaError",
    "build_figure",
    "render",
    "__version__",
]
