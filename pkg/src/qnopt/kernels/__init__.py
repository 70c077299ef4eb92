"""Round-kernel backends.

The compiled backend is used when the extension built; the pure-python
one is always available. Both expose the same functions and produce
identical edge states, so they are interchangeable. Select explicitly
with :func:`use_backend` or the ``QNOPT_BACKEND`` environment variable
(``cython`` or ``python``).
"""

import os

from ..exceptions import ConfigurationError
from . import _core_py

_BACKENDS = {"python": _core_py}

try:
    from . import _core_cy
    _BACKENDS["cython"] = _core_cy
except ImportError:
    _core_cy = None

_env = os.environ.get("QNOPT_BACKEND")
if _env:
    if _env not in _BACKENDS:
        raise ConfigurationError(
            f"QNOPT_BACKEND={_env!r} not available; "
            f"choose from {sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[_env]
else:
    _active = _BACKENDS.get("cython", _core_py)


def available_backends():
    """Names of the importable backends."""
    return sorted(_BACKENDS)


def backend_name():
    """Name of the backend currently in use."""
    return _active.BACKEND_NAME


def use_backend(name):
    """Switch the active backend ("cython" or "python")."""
    global _active
    if name not in _BACKENDS:
        raise ConfigurationError(
            f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[name]


def impl():
    """The active backend module; resolved at call time by consumers."""
    return _active
