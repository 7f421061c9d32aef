"""Integrating-factor RK4 stepping shared by the solvers.

The evolved equations all have the form d/dt y = nu*laplacian(y) + N(y, t)
componentwise, so the stiff viscous part is removed exactly with the
diagonal factor exp(-nu |k|^2 dt) and classical RK4 handles the rest. With
nu = 0 the factor is 1 and the scheme reduces to plain RK4.
"""
from __future__ import annotations

import numpy as np

from .errors import BlowUpError, CFLViolationError
from .grid import Grid, tables

__all__ = ["if_rk4_step", "check_cfl", "ensure_finite", "viscous_decay"]


def viscous_decay(grid: Grid, nu: float, half_dt: float) -> np.ndarray:
    """exp(-nu |k|^2 dt/2), broadcastable over stacked spectral states."""
    return np.exp(-nu * tables(grid).k2 * half_dt)


def if_rk4_step(yhat: np.ndarray, t: float, dt: float, decay_half: np.ndarray, rhs):
    """One integrating-factor RK4 step; ``rhs(yhat, t)`` returns N in spectral space."""
    e = decay_half
    e2 = e * e
    n1 = rhs(yhat, t)
    n2 = rhs(e * (yhat + 0.5 * dt * n1), t + 0.5 * dt)
    n3 = rhs(e * yhat + 0.5 * dt * n2, t + 0.5 * dt)
    n4 = rhs(e2 * yhat + dt * e * n3, t + dt)
    return e2 * yhat + (dt / 6.0) * (e2 * n1 + 2.0 * e * (n2 + n3) + n4)


def check_cfl(max_u: float, dt: float, h: float, limit: float) -> None:
    if max_u * dt / h > limit:
        raise CFLViolationError(dt, h, max_u, limit)


def ensure_finite(arr: np.ndarray, what: str, t: float) -> None:
    if not np.all(np.isfinite(arr)):
        raise BlowUpError(f"non-finite values in {what}; blow-up or instability", t=t)
