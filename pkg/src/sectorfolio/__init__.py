"""Walk-forward stock forecasting and Monte-Carlo mean-variance portfolios."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
