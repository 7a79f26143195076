"""Selects the compiled kernel core when importable, else the numpy fallback.

Set ``DUALALIGN_BACKEND=python`` to force the fallback.
"""

import os

from . import _core_py

if os.environ.get("DUALALIGN_BACKEND", "").lower() == "python":
    core = _core_py
else:
    try:
        from . import _core as core
    except ImportError:
        core = _core_py

BACKEND = core.BACKEND
