"""Engine selection: compiled kernel when available, pure Python otherwise.

Both engines execute identical semantics; the compiled one memoizes
controller transitions as integer tables and falls back to the Python step
functions only on cache misses, so the controllers themselves exist once.
Set GRIDSCOUT_ENGINE=py|c to force a choice.
"""

from __future__ import annotations

import os

from .runtime import RunConfig, World

try:
    from . import _kernel  # compiled extension, optional

    HAVE_KERNEL = True
except ImportError:  # pragma: no cover - depends on the build environment
    _kernel = None
    HAVE_KERNEL = False


def default_engine() -> str:
    forced = os.environ.get("GRIDSCOUT_ENGINE")
    if forced in ("py", "c"):
        return forced
    return "c" if HAVE_KERNEL else "py"


def make_world(config: RunConfig, engine: str | None = None):
    engine = engine or default_engine()
    if engine == "c":
        if not HAVE_KERNEL:
            raise RuntimeError("compiled kernel not available; build the extension "
                               "or set GRIDSCOUT_ENGINE=py")
        if config.trace:
            return World(config)  # traces come from the reference engine
        return _kernel.KernelWorld(config)
    return World(config)
