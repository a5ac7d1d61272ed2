"""Tick-stepping kernel with a compiled fast path.

The network update loop is the hot inner loop of every simulation mode,
so it is implemented twice with identical numerics: a Cython extension
(``_speedups``) and a pure-Python reference (``pure``). The compiled
backend is preferred at import time; set HEXCPG_PURE=1 to force the
reference implementation. Both produce bit-identical spike trains
(asserted by the test suite and the ``hexcpg bench`` command).
"""

import os

from . import pure

try:
    from . import _speedups
except ImportError:  # extension not built
    _speedups = None

if os.environ.get("HEXCPG_PURE") or _speedups is None:
    _active = pure
    BACKEND = "pure"
else:
    _active = _speedups
    BACKEND = "compiled"

step_tick = _active.step_tick


def available_backends():
    """Names of the kernel backends importable in this environment."""
    names = ["pure"]
    if _speedups is not None:
        names.append("compiled")
    return names


def get_backend(name):
    if name == "pure":
        return pure
    if name == "compiled":
        if _speedups is None:
            raise RuntimeError("compiled kernel is not built")
        return _speedups
    raise ValueError(f"unknown backend {name!r}")
