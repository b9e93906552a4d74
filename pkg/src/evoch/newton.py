"""Damped Newton iteration for the monolithic (order parameter, potential) system."""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, StepError

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
MAX_ITER = 25
MAX_HALVINGS = 8


def sparse_solve(A, b):
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:  # singular factor
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values")
    return x


def newton(residual, jacobian, x0, inside, tol, sharp=False, max_iter=MAX_ITER):
    """Solve residual(x) = 0.

    ``inside(x)`` reports whether every quadrature value of the order
    parameter lies in the safeguard region; updates are halved while they
    would leave it.  With a sharp potential leaving the region is fatal,
    otherwise the full halving budget is spent and the step is accepted.
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    history = [float(np.max(np.abs(r)))]
    for it in range(max_iter):
        if history[-1] <= tol:
            return x, history
        dx = sparse_solve(jacobian(x), -r)
        step = 1.0
        was_inside = inside(x)
        trial = x + dx
        if was_inside:
            for _ in range(MAX_HALVINGS):
                if inside(trial):
                    break
                step *= 0.5
                trial = x + step * dx
            else:
                if sharp and not inside(trial):
                    raise StepError("Newton update left the domain of the sharp potential", history)
        x = trial
        r = residual(x)
        history.append(float(np.max(np.abs(r))))
        log.debug("newton it=%d step=%g residual=%.3e", it, step, history[-1])
    if history[-1] <= tol:
        return x, history
    raise StepError(
        f"Newton did not converge in {max_iter} iterations (residual {history[-1]:.3e} > {tol:.1e})",
        history,
    )
