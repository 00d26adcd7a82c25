"""Derivative-free simplex minimisation."""

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteObjective


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def nelder_mead(objective, x0, scale=1.0, tol=1e-8, max_iter=1000, ftol=0.0):
    """Minimise ``objective`` with the Nelder-Mead simplex method.

    Parameters
    ----------
    objective : callable
        Maps an ``(n,)`` array to a float.
    x0 : array_like
        Starting point; the initial simplex is ``x0`` plus ``scale[i] * e_i``.
    scale : float or array_like
        Per-coordinate step of the initial simplex and reference length for
        the stopping rule.
    tol : float
        Stop when every vertex lies within ``tol * scale`` of the best one.
    max_iter : int
        Iteration cap; the result then has ``converged=False``.
    ftol : float
        Also stop when the spread of objective values is at most ``ftol``.

    Uses the standard coefficients (reflection 1, expansion 2, contraction
    1/2, shrink 1/2) and is deterministic.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,)).copy()
    if np.any(scale <= 0):
        raise ValueError("simplex scale must be positive")

    evaluations = 0

    def f(x):
        nonlocal evaluations
        evaluations += 1
        return float(objective(x))

    simplex = np.vstack([x0, x0 + np.diag(scale)])
    values = np.array([f(v) for v in simplex])
    if not np.all(np.isfinite(values)):
        raise NonFiniteObjective("objective is not finite on the initial simplex")

    it = 0
    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        spread = np.max(np.abs(simplex[1:] - simplex[0]) / scale)
        if spread <= tol or values[-1] - values[0] <= ftol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        values[1:] = [f(v) for v in simplex[1:]]

    return NelderMeadResult(simplex[0].copy(), float(values[0]), it, evaluations, converged)
