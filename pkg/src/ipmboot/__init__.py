"""Response-surface designs, inverse polynomial fits and residual bootstrap.

Modules
-------
doe
    Factorial and central composite designs, orthogonality, rotatability and
    uniform-precision audits.
ipm
    Two-factor inverse polynomial models and starting values.
gauss_newton
    Damped Gauss-Newton solver and restart checks.
bootstrap
    Residual bootstrap, standard errors and confidence intervals.
diagnostics, plotting
    QQ, residual and variance-function plot data; SVG/CSV output.
"""

from importlib import resources

from ._backend import HAVE_KERNEL
from .bootstrap import BootstrapConfig, BootstrapResult
from .doe import Design, ModelMatrix, augment_ccd, generate_factorial, model_matrix
from .gauss_newton import FitResult, SolverConfig, fit, verify_global
from .ipm import Dataset, ModelSpec

__version__ = "0.1.0"

__all__ = [
    "HAVE_KERNEL",
    "BootstrapConfig",
    "BootstrapResult",
    "Dataset",
    "Design",
    "FitResult",
    "ModelMatrix",
    "ModelSpec",
    "SolverConfig",
    "augment_ccd",
    "data_file",
    "fit",
    "generate_factorial",
    "model_matrix",
    "verify_global",
]


def data_file(name: str):
    """Path to a packaged data file such as ``synth13.csv``."""
    return resources.files(__name__) / "data" / name
