"""Backend selection: compiled stencil core with a pure-numpy fallback.

The compiled extension (``pulsefront._core``) is optional.  Set the
environment variable ``PULSEFRONT_NO_EXTENSION=1`` to force the numpy
fallback, e.g. for benchmarking or debugging.
"""

from __future__ import annotations

import os

from . import _corepy

if os.environ.get("PULSEFRONT_NO_EXTENSION"):
    _impl = _corepy
    COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        _impl = _corepy
        COMPILED = False

stencil_apply = _impl.stencil_apply
dispersal_rhs = _impl.dispersal_rhs


def backend_name() -> str:
    return "compiled" if COMPILED else "numpy"
