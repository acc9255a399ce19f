"""Select the compiled kernels when importable, else the pure-Python ones.

Set ``LASTRECORD_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

python_kernels = _pykernels
compiled_kernels = None

if os.environ.get("LASTRECORD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_kernels  # type: ignore[no-redef]
    except ImportError:
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = kernels.BACKEND


def get_kernels(name: str | None = None):
    """Kernel module by name (``"compiled"`` / ``"python"``); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return python_kernels
    if name == "compiled":
        if compiled_kernels is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
