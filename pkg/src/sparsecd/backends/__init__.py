"""Kernel backend selection.

Prefers the compiled extension; falls back to the pure-NumPy kernels when
the extension is missing or when the environment variable
``SPARSECD_PURE_PYTHON=1`` is set.  ``BACKEND`` reports which one is live.
"""

import os

if os.environ.get("SPARSECD_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import pycore as _impl

    BACKEND = "python"
else:
    try:
        from . import _cdcore as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import pycore as _impl

        BACKEND = "python"

cd_cycle = _impl.cd_cycle
group_cycle = _impl.group_cycle


def get_backend(name: str = "auto"):
    """Return (cd_cycle, group_cycle, label) for an explicit backend choice."""
    if name == "auto":
        return cd_cycle, group_cycle, BACKEND
    if name == "python":
        from . import pycore

        return pycore.cd_cycle, pycore.group_cycle, "python"
    if name == "compiled":
        from . import _cdcore  # raises ImportError if not built

        return _cdcore.cd_cycle, _cdcore.group_cycle, "compiled"
    raise ValueError(f"unknown backend {name!r}")
