"""Differentially private optimization with second-order guarantees.

Solvers that take noisy gradient steps and, when the gradient stalls, noisy
negative-curvature steps, returning a point whose exact gradient norm and
smallest Hessian eigenvalue meet requested tolerances.  Privacy is tracked
in zCDP, RDP, or (epsilon, delta)-DP by the accountant module.
"""

__version__ = "0.1.0"
