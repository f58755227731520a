"""UCB phase kernels.

The compiled extension ``_ucb`` is used when it was built; otherwise the
pure-Python implementation in :mod:`._ucb_py` is used.  Set
``CREATOR_ECON_PURE_PYTHON=1`` to force the fallback.  Both consume the
same pre-drawn uniforms and produce identical trajectories.
"""
import os

from . import _ucb_py

python_ucb_phase = _ucb_py.ucb_phase

try:
    from ._ucb import ucb_phase as compiled_ucb_phase
except ImportError:  # extension not built
    compiled_ucb_phase = None

if compiled_ucb_phase is not None and os.environ.get("CREATOR_ECON_PURE_PYTHON", "") in ("", "0"):
    ucb_phase = compiled_ucb_phase
    BACKEND = "cython"
else:
    ucb_phase = python_ucb_phase
    BACKEND = "python"

__all__ = ["ucb_phase", "python_ucb_phase", "compiled_ucb_phase", "BACKEND"]
