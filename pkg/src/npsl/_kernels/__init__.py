"""Kernel backend selection: compiled core if available, numpy otherwise."""

try:
    from ._core import legendre_sum

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from .numpy_backend import legendre_sum

    BACKEND = "numpy"

__all__ = ["legendre_sum", "BACKEND"]
