"""Backend selection for the particle-physics kernel.

The compiled ``_kernels`` extension is used when it imports; otherwise the
pure-Python version. Set ``COORDPRIOR_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _physics_py

python_physics_step = _physics_py.physics_step

try:
    if os.environ.get("COORDPRIOR_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from ._kernels import physics_step as compiled_physics_step
except ImportError:
    compiled_physics_step = None

if compiled_physics_step is not None:
    physics_step = compiled_physics_step
    BACKEND = "compiled"
else:
    physics_step = python_physics_step
    BACKEND = "python"

__all__ = ["physics_step", "python_physics_step", "compiled_physics_step", "BACKEND"]
