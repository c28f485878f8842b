"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_core_py`` module.  Setting ``RANKLAB_PURE_PYTHON=1`` forces
the fallback.
"""

import os

if os.environ.get("RANKLAB_PURE_PYTHON", "") not in ("", "0"):
    from . import _core_py as backend
else:
    try:
        from . import _core as backend
    except ImportError:
        from . import _core_py as backend

BACKEND = "compiled" if backend.__name__.endswith("._core") else "python"

integrate = backend.integrate
log_post = backend.log_post
ascending_pairs = backend.ascending_pairs


def available_backends():
    """Return the importable kernel modules keyed by name."""
    from . import _core_py

    mods = {"python": _core_py}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        mods["compiled"] = _core
    return mods
