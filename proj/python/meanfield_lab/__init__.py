"""Mean-field network dynamics lab.

Python surface over the C++ core: finite-network SGD, particle ODEs, the
fixed-point solver, neuronal-embedding coupling diagnostics, the reduced
i.i.d. dynamics and the experiment runner.
"""

try:
    from ._mflab import *  # noqa: F401,F403  (installed wheel layout)
    from ._mflab import __version__  # noqa: F401
except ImportError:  # pragma: no cover - build-tree layout used by ctest
    from _mflab import *  # noqa: F401,F403
    from _mflab import __version__  # noqa: F401
