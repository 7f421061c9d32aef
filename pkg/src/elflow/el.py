"""Displacement / virtual-velocity formulation of incompressible flow.

State: the displacement ``ell`` (the back-to-labels map is A = x + ell), the
virtual velocity ``v`` and the scalar potential ``n``. The Eulerian velocity
is reconstructed nonlocally as u = P((grad A)^T v), equivalently
u = (grad A)^T v - grad n with laplacian(n) = div((grad A)^T v).

Evolution (advection-diffusion operator G = d_t + u.grad - nu*laplacian):

    G ell + u = 0
    G v_i     = 2 nu C[m,k;i] d_k v_m + Q[i,j] f_j
    G n       = R_i R_j(u^i u^j) - |u|^2/2 + c      (dynamic potential mode)

Q is the pointwise inverse of grad A (adjugate over determinant, never an
iterative solve) and C[m,k;i] = Q[i,j] d_j d_k A_m are the coefficients of
the commutator between label and Eulerian derivatives; they vanish at t = 0
and multiply the only term that distinguishes the viscous evolution of v
from a passive rearrangement.

Index conventions follow ``fields``: gradA[i, m] = d_i A_m, Q is its
pointwise matrix inverse (gradA @ Q = I), C[m, k, i]. The label derivative
of a scalar is (Q[i, j] d_j g) and Eulerian derivatives recombine as
d_i g = gradA[i, m] (Q[m, j] d_j g); all label-index contractions below run
through the first Q index.

The module also provides the cotangent variable w_i = (d_i A^m) v_m with its
own dynamics G w + (grad u)^T w = f, u = P(w), label resetting, and gauge
transformations v_i -> v_i + Q[i,j] d_j phi, n -> n + phi.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvertibilityError, NearSingularJacobianError
from .fields import (
    ScalarField, Tensor2Field, Tensor3Field, VectorField, scalar_zeros,
    vector_zeros,
)
from .forcing import ForcingSpec
from .grid import Grid, tables
from .spectral import (
    dealias_hat, divergence, grad_hat, gradient, inverse_laplacian, leray_hat,
    quadratic_pressure_hat, to_physical, to_spectral, _zero_mode,
)
from .stepping import check_cfl, ensure_finite, if_rk4_step, viscous_decay

__all__ = [
    "ELState", "ELDerived", "initial_state", "compute_Q", "compute_C",
    "compute_w", "reconstruct_u", "derive", "el_rhs", "el_step",
    "el_step_with_passive", "reset_labels", "gauge_transform",
    "WState", "cotangent_step", "grad_ell_sup",
]

POTENTIAL_MODES = ("static", "dynamic")
DEFAULT_DET_FLOOR = 0.1


@dataclass
class ELState:
    t: float
    ell: VectorField
    v: VectorField
    n_pot: ScalarField
    potential_mode: str = "static"
    reset_count: int = 0


@dataclass
class ELDerived:
    """Quantities derived pointwise/spectrally from one state (never cached)."""

    A: VectorField
    grad_A: Tensor2Field
    Q: Tensor2Field
    C: Tensor3Field
    u: VectorField
    w: VectorField
    n: ScalarField
    det: ScalarField


def initial_state(u0: VectorField, potential_mode: str = "static") -> ELState:
    """Fresh state at t = 0: zero displacement, v = u0, zero potential."""
    grid = u0.grid
    return ELState(0.0, vector_zeros(grid), u0.copy(), scalar_zeros(grid),
                   potential_mode=potential_mode)


# -- pointwise deformation algebra -------------------------------------------

def _identity_plus(gl: np.ndarray, dim: int) -> np.ndarray:
    gA = gl.copy()
    for i in range(dim):
        gA[i, i] += 1.0
    return gA


def _q_and_det(gA: np.ndarray, dim: int, det_floor: float):
    """Pointwise adjugate/determinant inverse; raises on near-singular points."""
    if dim == 2:
        a, b = gA[0, 0], gA[0, 1]
        c, d = gA[1, 0], gA[1, 1]
        det = a * d - b * c
        _check_det(det, det_floor)
        inv = 1.0 / det
        q = np.empty_like(gA)
        q[0, 0] = d * inv
        q[0, 1] = -b * inv
        q[1, 0] = -c * inv
        q[1, 1] = a * inv
        return q, det
    g = gA
    c00 = g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1]
    c01 = g[1, 2] * g[2, 0] - g[1, 0] * g[2, 2]
    c02 = g[1, 0] * g[2, 1] - g[1, 1] * g[2, 0]
    det = g[0, 0] * c00 + g[0, 1] * c01 + g[0, 2] * c02
    _check_det(det, det_floor)
    inv = 1.0 / det
    q = np.empty_like(gA)
    q[0, 0] = c00 * inv
    q[1, 0] = c01 * inv
    q[2, 0] = c02 * inv
    q[0, 1] = (g[0, 2] * g[2, 1] - g[0, 1] * g[2, 2]) * inv
    q[1, 1] = (g[0, 0] * g[2, 2] - g[0, 2] * g[2, 0]) * inv
    q[2, 1] = (g[0, 1] * g[2, 0] - g[0, 0] * g[2, 1]) * inv
    q[0, 2] = (g[0, 1] * g[1, 2] - g[0, 2] * g[1, 1]) * inv
    q[1, 2] = (g[0, 2] * g[1, 0] - g[0, 0] * g[1, 2]) * inv
    q[2, 2] = (g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]) * inv
    return q, det


def _check_det(det: np.ndarray, floor: float) -> None:
    worst = np.argmin(np.abs(det))
    worst_val = det.flat[worst]
    if abs(worst_val) <= floor:
        point = np.unravel_index(worst, det.shape)
        raise NearSingularJacobianError(worst_val, point, floor)


def compute_Q(grad_A: Tensor2Field, *, det_floor: float = DEFAULT_DET_FLOOR) -> Tensor2Field:
    """Pointwise inverse of the deformation jacobian."""
    q, _ = _q_and_det(grad_A.components, grad_A.grid.dim, det_floor)
    return Tensor2Field(grad_A.grid, q)


def _second_derivs(grid: Grid, lhat: np.ndarray) -> np.ndarray:
    """d2[m, k, j] = d_j d_k ell_m, spectral, using j<->k symmetry."""
    tab = tables(grid)
    d = grid.dim
    out = np.empty((d, d, d, *grid.shape))
    for k in range(d):
        for j in range(k, d):
            block = to_physical(grid, -(tab.k[j] * tab.k[k]) * lhat)
            out[:, k, j] = block
            out[:, j, k] = block
    return out


def compute_C(ell: VectorField, Q: Tensor2Field) -> Tensor3Field:
    """Commutator coefficients C[m, k; i], the label derivative of d_k ell_m.

    With the conventions here (gradA[i, m] = d_i A_m and gradA @ Q = I
    pointwise) the label derivative acts through the first Q index,
    C[m, k; i] = Q[i, j] d_j d_k A_m. Second derivatives of A equal those of
    the (periodic) displacement, so they are evaluated spectrally from ell.
    """
    grid = ell.grid
    d2 = _second_derivs(grid, to_spectral(grid, ell.components))
    c = np.einsum("ij...,mkj...->mki...", Q.components, d2)
    return Tensor3Field(grid, c)


def compute_w(ell: VectorField, v: VectorField) -> VectorField:
    """Cotangent variable w_i = (d_i A^m) v_m = v_i + (d_i ell_m) v_m."""
    grid = ell.grid
    gl = to_physical(grid, grad_hat(grid, to_spectral(grid, ell.components)))
    w = v.components + np.einsum("im...,m...->i...", gl, v.components)
    return VectorField(grid, w)


def reconstruct_u(ell: VectorField, v: VectorField) -> tuple[VectorField, ScalarField]:
    """Velocity and potential from the state: the explicit-potential route.

    n solves laplacian(n) = div((grad A)^T v) with zero mean and
    u = (grad A)^T v - grad n, which coincides with the divergence-free
    projection of (grad A)^T v.
    """
    w = compute_w(ell, v)
    n = inverse_laplacian(divergence(w))
    u = VectorField(ell.grid, w.components - gradient(n).components)
    return u, n


def derive(state: ELState, *, det_floor: float = DEFAULT_DET_FLOOR) -> ELDerived:
    """All derived quantities of a state; recomputed from scratch each call."""
    grid = state.ell.grid
    lhat = to_spectral(grid, state.ell.components)
    gl = to_physical(grid, grad_hat(grid, lhat))
    gA = _identity_plus(gl, grid.dim)
    q, det = _q_and_det(gA, grid.dim, det_floor)
    c = np.einsum("ij...,mkj...->mki...", q, _second_derivs(grid, lhat))
    w = state.v.components + np.einsum("im...,m...->i...", gl, state.v.components)
    w_field = VectorField(grid, w)
    n = inverse_laplacian(divergence(w_field))
    u = VectorField(grid, w - gradient(n).components)
    coords = np.stack(grid.coords())
    return ELDerived(
        A=VectorField(grid, coords + state.ell.components),
        grad_A=Tensor2Field(grid, gA),
        Q=Tensor2Field(grid, q),
        C=Tensor3Field(grid, c),
        u=u,
        w=w_field,
        n=n,
        det=ScalarField(grid, det),
    )


def grad_ell_sup(state: ELState) -> float:
    """sup over points of the Frobenius norm of grad ell (reset monitor)."""
    grid = state.ell.grid
    gl = to_physical(grid, grad_hat(grid, to_spectral(grid, state.ell.components)))
    return float(np.max(np.sqrt(np.sum(gl**2, axis=(0, 1)))))


# -- right-hand sides ---------------------------------------------------------

def _stage_terms(grid: Grid, nu: float, lhat, vhat, force: VectorField | None,
                 det_floor: float):
    """Shared stage evaluation: returns (G_ell_hat, G_v_hat, u, uhat).

    G_* are the non-viscous right-hand sides in spectral space with every
    quadratic product dealiased; u is reconstructed from the dealiased
    cotangent product.
    """
    gl = to_physical(grid, grad_hat(grid, lhat))
    gA = _identity_plus(gl, grid.dim)
    q, _ = _q_and_det(gA, grid.dim, det_floor)
    v = to_physical(grid, vhat)
    w = v + np.einsum("im...,m...->i...", gl, v)
    what = dealias_hat(grid, to_spectral(grid, w))
    uhat = leray_hat(grid, what)
    u = to_physical(grid, uhat)

    adv_l = np.einsum("i...,im...->m...", u, gl)
    g_ell = -dealias_hat(grid, to_spectral(grid, adv_l)) - uhat

    gv = to_physical(grid, grad_hat(grid, vhat))  # gv[k, m] = d_k v_m
    adv_v = np.einsum("k...,km...->m...", u, gv)
    g_v = -dealias_hat(grid, to_spectral(grid, adv_v))
    if nu > 0.0:
        d2l = _second_derivs(grid, lhat)
        c = np.einsum("ij...,mkj...->mki...", q, d2l)
        source = np.einsum("mki...,km...->i...", c, gv)
        g_v += 2.0 * nu * dealias_hat(grid, to_spectral(grid, source))
    if force is not None:
        g = np.einsum("ij...,j...->i...", q, force.components)
        g_v += dealias_hat(grid, to_spectral(grid, g))
    return g_ell, g_v, u, uhat


def _potential_rhs_hat(grid: Grid, nhat, u: np.ndarray) -> np.ndarray:
    """Dynamic-potential source: -u.grad n + R_iR_j(u^i u^j) - |u|^2/2 + c."""
    gn = to_physical(grid, grad_hat(grid, nhat))
    adv = np.einsum("j...,j...->...", u, gn)
    out = -dealias_hat(grid, to_spectral(grid, adv))
    out += quadratic_pressure_hat(grid, u)
    out -= dealias_hat(grid, to_spectral(grid, 0.5 * np.sum(u * u, axis=0)))
    out[_zero_mode(grid)] = 0.0  # the free constant fixes a zero spatial mean
    return out


def el_rhs(state: ELState, derived: ELDerived, force: VectorField | None = None,
           *, nu: float):
    """Full time derivatives (including viscous terms) of (ell, v[, n]).

    Returns ``(d ell/dt, d v/dt)`` in static potential mode and additionally
    ``d n/dt`` in dynamic mode. ``derived`` must belong to ``state``.
    """
    grid = state.ell.grid
    k2 = tables(grid).k2
    lhat = to_spectral(grid, state.ell.components)
    vhat = to_spectral(grid, state.v.components)
    g_ell, g_v, u, _ = _stage_terms(grid, nu, lhat, vhat, force,
                                    DEFAULT_DET_FLOOR)
    dl = to_physical(grid, g_ell - nu * k2 * lhat)
    dv = to_physical(grid, g_v - nu * k2 * vhat)
    out = (VectorField(grid, dl), VectorField(grid, dv))
    if state.potential_mode == "dynamic":
        nhat = to_spectral(grid, state.n_pot.values)
        dn = to_physical(grid, _potential_rhs_hat(grid, nhat, u) - nu * k2 * nhat)
        out = out + (ScalarField(grid, dn),)
    return out


# -- time stepping ------------------------------------------------------------

def _advance(state: ELState, forcing: ForcingSpec, dt: float, *, nu: float,
             cfl_limit: float, det_floor: float, max_grad_ell: float | None,
             passive: tuple[ScalarField, ...]):
    grid = state.ell.grid
    d = grid.dim
    dynamic = state.potential_mode == "dynamic"
    force = None if forcing.is_zero else forcing.field(grid, state.t)

    rows = 2 * d + (1 if dynamic else 0) + len(passive)
    yhat = np.empty((rows, *tables(grid).kshape), dtype=complex)
    yhat[:d] = to_spectral(grid, state.ell.components)
    yhat[d:2 * d] = to_spectral(grid, state.v.components)
    pos = 2 * d
    if dynamic:
        yhat[pos] = to_spectral(grid, state.n_pot.values)
        pos += 1
    for row, s in enumerate(passive):
        yhat[pos + row] = to_spectral(grid, s.values)

    cfl_pending = [True]

    def rhs(y, t):
        out = np.empty_like(y)
        g_ell, g_v, u, _ = _stage_terms(grid, nu, y[:d], y[d:2 * d], force, det_floor)
        if cfl_pending[0]:
            # first stage sees the input state's own velocity
            check_cfl(float(np.max(np.sqrt(np.sum(u * u, axis=0)))),
                      dt, grid.spacing, cfl_limit)
            cfl_pending[0] = False
        out[:d] = g_ell
        out[d:2 * d] = g_v
        row = 2 * d
        if dynamic:
            out[row] = _potential_rhs_hat(grid, y[row], u)
            row += 1
        for extra in range(len(passive)):
            gs = to_physical(grid, grad_hat(grid, y[row + extra]))
            adv = np.einsum("j...,j...->...", u, gs)
            out[row + extra] = -dealias_hat(grid, to_spectral(grid, adv))
        return out

    decay = viscous_decay(grid, nu, 0.5 * dt)
    ynew = if_rk4_step(yhat, state.t, dt, decay, rhs)

    ell_new = to_physical(grid, ynew[:d])
    v_new = to_physical(grid, ynew[d:2 * d])
    ensure_finite(ell_new, "displacement", state.t + dt)
    ensure_finite(v_new, "virtual velocity", state.t + dt)
    ell_field = VectorField(grid, ell_new)
    v_field = VectorField(grid, v_new)
    if dynamic:
        n_field = ScalarField(grid, to_physical(grid, ynew[2 * d]))
    else:
        _, n_field = reconstruct_u(ell_field, v_field)
    new_state = ELState(state.t + dt, ell_field, v_field, n_field,
                        potential_mode=state.potential_mode,
                        reset_count=state.reset_count)

    if max_grad_ell is not None:
        sup = grad_ell_sup(new_state)
        if sup > max_grad_ell:
            raise InvertibilityError(sup, max_grad_ell)

    row = 2 * d + (1 if dynamic else 0)
    passive_new = [ScalarField(grid, to_physical(grid, ynew[row + j]))
                   for j in range(len(passive))]
    return new_state, passive_new


def el_step(state: ELState, forcing: ForcingSpec, dt: float, *, nu: float,
            cfl_limit: float = 0.4, det_floor: float = DEFAULT_DET_FLOOR,
            max_grad_ell: float | None = None) -> ELState:
    """One integrating-factor RK4 step of (ell, v[, n]).

    The velocity is reconstructed from (ell, v) at every stage. Raises
    ``CFLViolationError``/``BlowUpError`` like the classical solver,
    ``NearSingularJacobianError`` when the deformation determinant crosses
    ``det_floor`` and ``InvertibilityError`` when ``max_grad_ell`` is given
    and breached (a label reset is then recommended).
    """
    new_state, _ = _advance(state, forcing, dt, nu=nu, cfl_limit=cfl_limit,
                            det_floor=det_floor, max_grad_ell=max_grad_ell,
                            passive=())
    return new_state


def el_step_with_passive(state: ELState, forcing: ForcingSpec, dt: float, *,
                         nu: float, passive: tuple[ScalarField, ...],
                         cfl_limit: float = 0.4,
                         det_floor: float = DEFAULT_DET_FLOOR):
    """Like ``el_step`` but co-evolves scalars by pure advection-diffusion."""
    return _advance(state, forcing, dt, nu=nu, cfl_limit=cfl_limit,
                    det_floor=det_floor, max_grad_ell=None, passive=tuple(passive))


def reset_labels(state: ELState) -> ELState:
    """Restart the labels: v' = (grad A)^T v, ell' = 0.

    The reconstructed velocity is unchanged (both states project the same
    cotangent field); Q and C return to the identity and zero exactly.
    """
    grid = state.ell.grid
    w = compute_w(state.ell, state.v)
    ell0 = vector_zeros(grid)
    _, n_new = reconstruct_u(ell0, w)
    return ELState(state.t, ell0, w, n_new,
                   potential_mode=state.potential_mode,
                   reset_count=state.reset_count + 1)


def gauge_transform(state: ELState, phi: ScalarField) -> ELState:
    """Apply the gauge shift v -> v + (label gradient of phi), n -> n + phi.

    Leaves the reconstructed velocity unchanged for any smooth phi.
    """
    grid = state.ell.grid
    gl = to_physical(grid, grad_hat(grid, to_spectral(grid, state.ell.components)))
    gA = _identity_plus(gl, grid.dim)
    q, _ = _q_and_det(gA, grid.dim, DEFAULT_DET_FLOOR)
    dphi = gradient(phi)
    v_new = state.v.components + np.einsum("ij...,j...->i...", q, dphi.components)
    n_new = ScalarField(grid, state.n_pot.values + phi.values)
    return replace(state, v=VectorField(grid, v_new), n_pot=n_new)


# -- cotangent dynamics --------------------------------------------------------

@dataclass
class WState:
    t: float
    w: VectorField


def _cotangent_nonlinear_hat(grid: Grid, what, force: VectorField | None):
    uhat = leray_hat(grid, dealias_hat(grid, what))
    u = to_physical(grid, uhat)
    w = to_physical(grid, what)
    gw = to_physical(grid, grad_hat(grid, what))   # gw[k, m] = d_k w_m
    gu = to_physical(grid, grad_hat(grid, uhat))   # gu[i, j] = d_i u_j
    adv = np.einsum("k...,km...->m...", u, gw)
    stretch = np.einsum("ij...,j...->i...", gu, w)
    out = -dealias_hat(grid, to_spectral(grid, adv + stretch))
    if force is not None:
        out += dealias_hat(grid, to_spectral(grid, force.components))
    return out, u


def cotangent_step(state: WState, forcing: ForcingSpec, dt: float, *, nu: float,
                   cfl_limit: float = 0.4) -> WState:
    """Advance G w + (grad u)^T w = f with u = P(w) at every stage."""
    grid = state.w.grid
    force = None if forcing.is_zero else forcing.field(grid, state.t)
    cfl_pending = [True]

    def rhs(yhat, t):
        out, u = _cotangent_nonlinear_hat(grid, yhat, force)
        if cfl_pending[0]:
            check_cfl(float(np.max(np.sqrt(np.sum(u * u, axis=0)))),
                      dt, grid.spacing, cfl_limit)
            cfl_pending[0] = False
        return out

    what = to_spectral(grid, state.w.components)
    decay = viscous_decay(grid, nu, 0.5 * dt)
    new_hat = if_rk4_step(what, state.t, dt, decay, rhs)
    w_new = to_physical(grid, new_hat)
    ensure_finite(w_new, "cotangent variable", state.t + dt)
    return WState(state.t + dt, VectorField(grid, w_new))
