"""Quantum-jump telegraph simulation and inference toolkit."""

try:
    from ._qjump import *  # noqa: F401,F403
    from ._qjump import __doc__  # noqa: F401
except ImportError:  # in-tree builds put the module next to the package
    from _qjump import *  # noqa: F401,F403
