"""Kernel backend chosen once at import.

``HPSIM_BACKEND=python`` forces the numpy fallback even when the compiled
extension is present.
"""
import os

BACKEND = "python"
if os.environ.get("HPSIM_BACKEND", "").lower() != "python":
    try:
        from hpsim import _kernels as kernels

        BACKEND = "cython"
    except ImportError:
        kernels = None
if BACKEND == "python":
    from hpsim import _pykernels as kernels

from hpsim import _pykernels as pykernels  # noqa: E402  (always importable, used by benchmarks)

__all__ = ["BACKEND", "kernels", "pykernels"]
