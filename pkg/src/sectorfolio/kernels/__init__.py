"""Hot-loop kernels with a compiled core and a numpy fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
pure numpy module ``_pykernels`` is loaded. Set ``SECTORFOLIO_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels


def get_backend(name=None):
    """Return the kernel module called ``name``, or the active one."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


def _select():
    if os.environ.get("SECTORFOLIO_PURE_PYTHON") == "1" or _ckernels is None:
        return _pykernels
    return _ckernels


_active = _select()
BACKEND = _active.NAME

css_residuals = _active.css_residuals
best_split_mse = _active.best_split_mse
best_split_gini = _active.best_split_gini
hinge_gain_update = _active.hinge_gain_update
arma_css = _active.arma_css
arma_css_minimize = _active.arma_css_minimize

__all__ = [
    "BACKEND",
    "BACKENDS",
    "get_backend",
    "css_residuals",
    "best_split_mse",
    "best_split_gini",
    "hinge_gain_update",
    "arma_css",
    "arma_css_minimize",
]
