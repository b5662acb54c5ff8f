"""Radial node solutions of weighted quasilinear equations by shooting.

The package integrates ``(q φ_p(v'))' + q f(v) = 0`` from ``v(0) = λ``,
``v'(0) = 0``, counts sign changes through generalized polar coordinates and
brackets the amplitudes ``λ_k`` of solutions with exactly k nodes.
"""

__version__ = "0.1.0"

from .ptrig import PExponent, cos_sin_pp, pi_p  # noqa: E402
from .problem import ConfigError, Problem, load_problem, make_problem, problem_from_dict  # noqa: E402
from .integrator import SolveOptions, Trajectory, solve  # noqa: E402
from .shooter import SearchOptions, ShootResult, classify, find_k_node, node_count  # noqa: E402

__all__ = ["PExponent", "cos_sin_pp", "pi_p", "ConfigError", "Problem", "load_problem", "make_problem",
           "problem_from_dict", "SolveOptions", "Trajectory", "solve", "SearchOptions", "ShootResult",
           "classify", "find_k_node", "node_count", "__version__"]
