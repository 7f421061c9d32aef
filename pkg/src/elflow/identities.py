"""Numerical certification of the operator identities behind the formulation.

Each check evaluates both sides of one identity on arbitrary smooth periodic
fields and reports a normalized maximum pointwise residual. Purely algebraic
identities are exact at collocation points up to spectral truncation of
derivative evaluations; identities involving the advection-diffusion
operator G are certified semi-discretely, with the time derivative realized
by integrator steps (centered differencing where second order is needed).

The test-field corpus is seeded and band limited to n//4 with a decaying
spectrum; displacement amplitudes are scaled to prescribed sup |grad ell|
values so the deformation stays well inside the invertibility region while
still exercising the nonlinearity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .el import (
    ELState, compute_C, derive, el_step_with_passive, initial_state,
    _identity_plus, _q_and_det, _second_derivs,
)
from .fields import (
    ScalarField, Tensor2Field, VectorField, l2_norm, sup_norm, integral,
)
from .forcing import ForcingSpec
from .grid import Grid, tables
from .initial import random_bandlimited, random_scalar
from .spectral import grad_hat, gradient, hessian, to_physical, to_spectral

__all__ = [
    "IdentityReport", "TOLERANCES", "random_displacement", "make_test_state",
    "check_el_derivative_roundtrip", "check_commutator", "check_product_rule",
    "check_braces", "check_adjoint", "check_gamma_commutation",
    "check_C_evolution", "check_Z_stability", "run_identity_suite",
]

TOLERANCES = {
    "el_derivative_roundtrip": 1e-9,
    "commutator": 1e-8,
    "product_rule": 1e-9,
    "braces": 1e-10,
    "adjoint": 1e-9,
    "z_stability": 1e-11,
}

# Residuals of the time-differenced identities scale with the differencing
# error; these prefactors multiply dt**order to give the tolerance.
GAMMA_COMMUTATION_COEFF = 50.0   # O(dt^2), centered differencing
C_EVOLUTION_COEFF = 20.0         # O(dt), forward differencing

_TINY = 1e-300


@dataclass
class IdentityReport:
    name: str
    residual: float
    tolerance: float
    passed: bool
    scales: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "identity": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "scales": self.scales,
            "note": self.note,
        }


def _report(name, residual, tolerance, scales, note="") -> IdentityReport:
    residual = float(residual)
    return IdentityReport(name, residual, float(tolerance),
                          residual < tolerance, scales, note)


# -- corpus --------------------------------------------------------------------

CORPUS_SPECTRAL_WIDTH = 2.0  # fast decay keeps Q's spectrum inside the band


def random_displacement(grid: Grid, seed: int, grad_inf: float,
                        band: int | None = None) -> VectorField:
    """Band-limited displacement scaled to sup-Frobenius |grad ell| = grad_inf."""
    rng_seeds = np.random.default_rng(seed).integers(0, 2**31, size=grid.dim)
    comps = np.stack([
        random_scalar(grid, int(s), band=band, width=CORPUS_SPECTRAL_WIDTH).values
        for s in rng_seeds
    ])
    ell = VectorField(grid, comps)
    gl = to_physical(grid, grad_hat(grid, to_spectral(grid, ell.components)))
    peak = float(np.max(np.sqrt(np.sum(gl**2, axis=(0, 1)))))
    if peak > 0:
        ell.components *= grad_inf / peak
    return ell


def make_test_state(grid: Grid, seed: int, grad_inf: float,
                    potential_mode: str = "static") -> ELState:
    """A valid state with corpus displacement and a random virtual velocity."""
    ell = random_displacement(grid, seed, grad_inf)
    v = random_bandlimited(grid, seed + 1000, amplitude=1.0)
    state = initial_state(v, potential_mode=potential_mode)
    state.ell = ell
    from .el import reconstruct_u
    _, state.n_pot = reconstruct_u(ell, v)
    return state


def _label_gradient(Q: np.ndarray, grad_g: np.ndarray) -> np.ndarray:
    """(Q[i, j] d_j g): label derivative of a scalar from its gradient."""
    return np.einsum("ij...,j...->i...", Q, grad_g)


def _q_of(ell: VectorField):
    grid = ell.grid
    gl = to_physical(grid, grad_hat(grid, to_spectral(grid, ell.components)))
    gA = _identity_plus(gl, grid.dim)
    return _q_and_det(gA, grid.dim, 0.05)


# -- algebraic identities --------------------------------------------------------

def check_el_derivative_roundtrip(g: ScalarField, ell: VectorField) -> IdentityReport:
    """Eulerian derivatives recombine from label derivatives:
    d_i g = (d_i A_m)(label grad g)_m."""
    grid = g.grid
    gA = _identity_plus(
        to_physical(grid, grad_hat(grid, to_spectral(grid, ell.components))), grid.dim)
    q, _ = _q_and_det(gA, grid.dim, 0.05)
    grad_g = gradient(g).components
    lag = _label_gradient(q, grad_g)
    rhs = np.einsum("im...,m...->i...", gA, lag)
    scale = max(float(np.max(np.abs(grad_g))), _TINY)
    residual = np.max(np.abs(grad_g - rhs)) / scale
    return _report("el_derivative_roundtrip", residual,
                   TOLERANCES["el_derivative_roundtrip"], {"grad_g_inf": scale})


def check_commutator(g: ScalarField, ell: VectorField) -> IdentityReport:
    """[label_i, d_k] g = C[m, k; i] (label grad g)_m, for all (i, k)."""
    grid = g.grid
    q, _ = _q_of(ell)
    Q = Tensor2Field(grid, q)
    C = compute_C(ell, Q).components
    grad_g = gradient(g).components
    hess = hessian(g).components          # hess[j, k] = d_j d_k g
    lag = _label_gradient(q, grad_g)
    # label_i(d_k g): pointwise algebra on the exact Hessian
    term1 = np.einsum("ij...,jk...->ik...", q, hess)
    # d_k(label_i g): spectral derivative of a non-band-limited product
    term2 = to_physical(grid, grad_hat(grid, to_spectral(grid, lag)))  # [k, i]
    comm = term1 - np.einsum("ki...->ik...", term2)
    rhs = np.einsum("mki...,m...->ik...", C, lag)
    scale = max(float(np.max(np.abs(hess))), _TINY)
    residual = np.max(np.abs(comm - rhs)) / scale
    return _report("commutator", residual, TOLERANCES["commutator"],
                   {"hess_g_inf": scale})


def check_product_rule(f: ScalarField, g: ScalarField, u: VectorField,
                       nu: float = 0.05) -> IdentityReport:
    """Spatial part of the modified product rule for G = d_t + u.grad - nu lap:
    (u.grad - nu lap)(fg) - ((u.grad - nu lap)f) g - f ((u.grad - nu lap)g)
    + 2 nu (d_k f)(d_k g) = 0. The time part is Leibniz identically."""
    grid = f.grid

    def spatial(s: ScalarField) -> np.ndarray:
        grad_s = gradient(s).components
        advect = np.einsum("j...,j...->...", u.components, grad_s)
        k2 = tables(grid).k2
        lap = to_physical(grid, -k2 * to_spectral(grid, s.values))
        return advect - nu * lap

    fg = ScalarField(grid, f.values * g.values)
    cross = np.einsum("j...,j...->...",
                      gradient(f).components, gradient(g).components)
    lhs = spatial(fg)
    rhs = spatial(f) * g.values + f.values * spatial(g) - 2.0 * nu * cross
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), _TINY)
    residual = np.max(np.abs(lhs - rhs)) / scale
    return _report("product_rule", residual, TOLERANCES["product_rule"],
                   {"term_inf": scale})


def check_braces(ell: VectorField) -> IdentityReport:
    """(d_i A^m) C[r, q; m] = d_q d_i A^r (the cancellation behind the
    cotangent equation)."""
    grid = ell.grid
    q, _ = _q_of(ell)
    gA = _identity_plus(
        to_physical(grid, grad_hat(grid, to_spectral(grid, ell.components))), grid.dim)
    C = compute_C(ell, Tensor2Field(grid, q)).components
    d2 = _second_derivs(grid, to_spectral(grid, ell.components))  # [r, q, j]
    lhs = np.einsum("im...,rqm...->iqr...", gA, C)
    rhs = np.einsum("rqi...->iqr...", d2)
    scale = max(float(np.max(np.abs(d2))), _TINY)
    residual = np.max(np.abs(lhs - rhs)) / scale
    return _report("braces", residual, TOLERANCES["braces"], {"d2A_inf": scale})


def check_adjoint(f: ScalarField, g: ScalarField, ell: VectorField) -> IdentityReport:
    """Integration by parts for the label derivative:
    int (label_i f) g dx = int f (-(label_i g) + Q[i, j] C[p, j; p] g) dx."""
    grid = f.grid
    q, _ = _q_of(ell)
    C = compute_C(ell, Tensor2Field(grid, q)).components
    lag_f = _label_gradient(q, gradient(f).components)
    lag_g = _label_gradient(q, gradient(g).components)
    trace_c = np.einsum("pjp...->j...", C)
    correction = np.einsum("ij...,j...->i...", q, trace_c)
    denom = (l2_norm(gradient(f)) * l2_norm(g) +
             l2_norm(f) * l2_norm(gradient(g)) + _TINY)
    worst = 0.0
    for i in range(grid.dim):
        lhs = integral(ScalarField(grid, lag_f[i] * g.values))
        rhs = integral(ScalarField(
            grid, f.values * (-lag_g[i] + correction[i] * g.values)))
        worst = max(worst, abs(lhs - rhs))
    residual = worst / denom
    return _report("adjoint", residual, TOLERANCES["adjoint"],
                   {"norm_scale": denom})


# -- semi-discrete identities (G realized by time stepping) ----------------------

def _label_gradient_of(state: ELState, g: ScalarField) -> np.ndarray:
    q, _ = _q_of(state.ell)
    return _label_gradient(q, gradient(g).components)


def check_gamma_commutation(state: ELState, g: ScalarField, dt: float, *,
                            nu: float, forcing: ForcingSpec | None = None,
                            tol_coeff: float = GAMMA_COMMUTATION_COEFF) -> IdentityReport:
    """[G, label_i] g = 2 nu C[m, k; i] d_k (label grad g)_m.

    g is co-evolved passively (G g = 0), so the left side reduces to
    G(label_i g), realized with a centered time difference around the
    midpoint of two integrator steps; residual is O(dt^2).
    """
    grid = state.ell.grid
    forcing = forcing or ForcingSpec("zero")
    s1, (g1,) = el_step_with_passive(state, forcing, dt, nu=nu, passive=(g,))
    s2, (g2,) = el_step_with_passive(s1, forcing, dt, nu=nu, passive=(g1,))

    h0 = _label_gradient_of(state, g)
    h1 = _label_gradient_of(s1, g1)
    h2 = _label_gradient_of(s2, g2)

    d1 = derive(s1)
    dt_h = (h2 - h0) / (2.0 * dt)
    grad_h = to_physical(grid, grad_hat(grid, to_spectral(grid, h1)))  # [k, i]
    advect = np.einsum("k...,ki...->i...", d1.u.components, grad_h)
    k2 = tables(grid).k2
    lap_h = to_physical(grid, -k2 * to_spectral(grid, h1))
    gamma_h = dt_h + advect - nu * lap_h

    grad_lag = to_physical(grid, grad_hat(grid, to_spectral(grid, h1)))  # [k, m]
    rhs = 2.0 * nu * np.einsum("mki...,km...->i...", d1.C.components, grad_lag)

    scale = max(sup_norm(hessian(g1)) * max(sup_norm(d1.u), 1.0), _TINY)
    residual = np.max(np.abs(gamma_h - rhs)) / scale
    return _report("gamma_commutation", residual, tol_coeff * dt**2,
                   {"dt": dt, "scale": scale},
                   note="centered time differencing, residual = O(dt^2)")


def check_C_evolution(state: ELState, dt: float, *, nu: float,
                      forcing: ForcingSpec | None = None,
                      tol_coeff: float = C_EVOLUTION_COEFF) -> IdentityReport:
    """G C[m,k;i] = -(d_l A_m) label_i(d_k u_l) - (d_k u_l) C[m,l;i]
    + 2 nu C[j,l;i] d_l C[m,k;j], with G C realized by one forward step."""
    grid = state.ell.grid
    forcing = forcing or ForcingSpec("zero")
    d0 = derive(state)
    s1 = el_step_with_passive(state, forcing, dt, nu=nu, passive=())[0]
    c0 = d0.C.components
    c1 = derive(s1).C.components

    c0_hat = to_spectral(grid, c0)
    dt_c = (c1 - c0) / dt
    grad_c = to_physical(grid, grad_hat(grid, c0_hat))      # [l, m, k, j]
    advect = np.einsum("l...,lmkj...->mkj...", d0.u.components, grad_c)
    k2 = tables(grid).k2
    lap_c = to_physical(grid, -k2 * c0_hat)
    gamma_c = dt_c + advect - nu * lap_c

    uhat = to_spectral(grid, d0.u.components)
    gu = to_physical(grid, grad_hat(grid, uhat))            # gu[k, l] = d_k u_l
    hess_u = _second_derivs(grid, uhat)                     # [l, k, j] = d_j d_k u_l
    lag_gu = np.einsum("ij...,lkj...->ikl...", d0.Q.components, hess_u)
    term1 = np.einsum("lm...,ikl...->mki...", d0.grad_A.components, lag_gu)
    term2 = np.einsum("kl...,mli...->mki...", gu, c0)
    term3 = 2.0 * nu * np.einsum("jli...,lmkj...->mki...", c0, grad_c)
    residual_field = gamma_c + term1 + term2 - term3

    scale = max(float(np.max(np.abs(term1))), float(np.max(np.abs(gamma_c))), _TINY)
    residual = np.max(np.abs(residual_field)) / scale
    return _report("c_evolution", residual, tol_coeff * dt,
                   {"dt": dt, "scale": scale},
                   note="forward time differencing, residual = O(dt)")


def check_Z_stability(states) -> IdentityReport:
    """Conditioning certificate over a run: max ||(grad A) Q - I||_inf and the
    range of det(grad A)."""
    worst = 0.0
    det_min, det_max = np.inf, -np.inf
    for state in states:
        d = derive(state)
        grid = state.ell.grid
        z = np.einsum("im...,mj...->ij...", d.grad_A.components, d.Q.components)
        for i in range(grid.dim):
            z[i, i] -= 1.0
        worst = max(worst, float(np.max(np.abs(z))))
        det_min = min(det_min, float(np.min(d.det.values)))
        det_max = max(det_max, float(np.max(d.det.values)))
    return _report("z_stability", worst, TOLERANCES["z_stability"],
                   {"det_min": det_min, "det_max": det_max})


# -- suite ----------------------------------------------------------------------

def run_identity_suite(grid: Grid | None = None, *, seed: int = 1,
                       amplitudes=(0.01, 0.05, 0.2), nu: float = 0.05,
                       dt: float = 2e-3) -> list[IdentityReport]:
    """Run every identity check on the fixed corpus; returns all reports.

    Canonical desk grids: n = 64 in 2D, n = 48 in 3D. Coarser grids cannot
    resolve the inverse-jacobian spectrum of the largest-amplitude corpus
    entry to the commutator tolerance.
    """
    grid = grid or Grid(2, 64, 2.0 * np.pi)
    reports = []
    g = random_scalar(grid, seed + 1, width=CORPUS_SPECTRAL_WIDTH)
    f = random_scalar(grid, seed + 2, width=CORPUS_SPECTRAL_WIDTH)
    u = random_bandlimited(grid, seed + 3, amplitude=1.0)
    for amp in amplitudes:
        ell = random_displacement(grid, seed, amp)
        for rep in (
            check_el_derivative_roundtrip(g, ell),
            check_commutator(g, ell),
            check_braces(ell),
            check_adjoint(f, g, ell),
        ):
            rep.name = f"{rep.name}[grad_ell={amp}]"
            reports.append(rep)
    reports.append(check_product_rule(f, g, u, nu=nu))

    state = make_test_state(grid, seed, 0.05)
    reports.append(check_gamma_commutation(state, g, dt, nu=nu))
    reports.append(check_C_evolution(state, dt, nu=nu))
    return reports
