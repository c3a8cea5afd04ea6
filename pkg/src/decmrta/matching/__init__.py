"""Exact maximum-weight bipartite matching with deterministic tie-breaking.

The assignment kernel comes from the compiled extension when it is built and
falls back to the numpy implementation otherwise.  Set ``DECMRTA_PURE_PYTHON=1``
to force the fallback.
"""

from __future__ import annotations

import os

from ._kernel_py import solve_assignment as solve_assignment_py

try:
    if os.environ.get("DECMRTA_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from ._kernel import solve_assignment as solve_assignment_ext
except ImportError:
    solve_assignment_ext = None

solve_assignment = solve_assignment_ext or solve_assignment_py
BACKEND = "cython" if solve_assignment_ext is not None else "python"

from .core import (  # noqa: E402
    TOL,
    Matching,
    MatchingTooLarge,
    brute_force_matching,
    max_weight_matching,
)

__all__ = [
    "BACKEND",
    "TOL",
    "Matching",
    "MatchingTooLarge",
    "brute_force_matching",
    "max_weight_matching",
    "solve_assignment",
    "solve_assignment_py",
    "solve_assignment_ext",
]
