"""Figure rendering for stochwave result files."""

__version__ = "0.1.0"

from .csvio import ResultData, SchemaError, load_result
from .figures import PlotSpec, plot_convergence, plot_energy, render_result_file

__all__ = [
    "__version__",
    "ResultData",
    "SchemaError",
    "load_result",
    "PlotSpec",
    "plot_convergence",
    "plot_energy",
    "render_result_file",
]
