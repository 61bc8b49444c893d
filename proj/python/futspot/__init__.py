"""Two-stage electricity market equilibria.

Closed-form spot equilibria for physical futures, contracts for
differences and a futures-free market, plus a CVaR-weighted first-stage
equilibrium solver, reproducible scenario generation and batch sweep
runners. Everything is implemented in the C++ core; this package is a
thin binding.
"""

from ._core import *  # noqa: F401,F403
