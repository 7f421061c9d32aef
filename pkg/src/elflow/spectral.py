"""FFT-based field algebra on the periodic box.

Transforms, differentiation, Poisson inversion, divergence-free projection,
Riesz-transform pressure and 2/3-rule dealiasing. All operations are pure
functions of their inputs and exact for band-limited data; products of
fields are the caller's responsibility to dealias.

The array-level helpers (suffix ``_hat``) operate on spectral arrays whose
last ``dim`` axes follow the rfftn layout; leading axes are treated as
component axes. Field-level operations wrap them behind the public types.
"""
from __future__ import annotations

import numpy as np
import scipy.fft

from .errors import FieldCompatibilityError
from .fields import ScalarField, VectorField, Tensor2Field
from .grid import Grid, tables

__all__ = [
    "to_spectral", "to_physical",
    "gradient", "jacobian", "divergence", "curl", "laplacian",
    "inverse_laplacian", "leray_project", "riesz_pressure", "dealias",
    "resample", "hessian",
]

# Thread-spawn overhead dominates at desk-scale transforms; keep FFTs single
# threaded (measured faster up to at least 64^3 on small-core hosts).
_WORKERS = 1


def to_spectral(grid: Grid, values: np.ndarray) -> np.ndarray:
    """rfftn over the trailing ``dim`` axes; leading axes are components."""
    axes = tuple(range(-grid.dim, 0))
    return scipy.fft.rfftn(values, axes=axes, workers=_WORKERS)

def to_physical(grid: Grid, hat: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    return scipy.fft.irfftn(hat, s=grid.shape, axes=axes, workers=_WORKERS)


# -- array-level operators ---------------------------------------------------

def deriv_hat(grid: Grid, hat: np.ndarray, axis: int) -> np.ndarray:
    return tables(grid).ik[axis] * hat


def grad_hat(grid: Grid, shat: np.ndarray) -> np.ndarray:
    """Gradient of a (stack of) spectral scalar(s); prepends the derivative axis."""
    ik = tables(grid).ik
    out = np.empty((grid.dim, *shat.shape), dtype=complex)
    for a in range(grid.dim):
        np.multiply(ik[a], shat, out=out[a])
    return out


def div_hat(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    ik = tables(grid).ik
    out = ik[0] * vhat[0]
    for a in range(1, grid.dim):
        out += ik[a] * vhat[a]
    return out


def leray_hat(grid: Grid, vhat: np.ndarray) -> np.ndarray:
    """Remove the gradient part: v_hat - k (k . v_hat) / |k|^2.

    Built entirely from the derivative wavenumbers so it is an exact
    projection; modes carrying only Nyquist indices pass through untouched.
    """
    tab = tables(grid)
    kdotv = tab.k[0] * vhat[0]
    for a in range(1, grid.dim):
        kdotv += tab.k[a] * vhat[a]
    kdotv *= tab.inv_k2_deriv
    out = np.array(vhat, dtype=complex, copy=True)
    for a in range(grid.dim):
        out[a] -= tab.k[a] * kdotv
    return out


def _zero_mode(grid: Grid) -> tuple:
    return (Ellipsis,) + (0,) * grid.dim


def poisson_hat(grid: Grid, shat: np.ndarray) -> np.ndarray:
    """Zero-mean solution of laplacian(n) = s in spectral space."""
    tab = tables(grid)
    out = -shat * tab.inv_k2
    out[_zero_mode(grid)] = 0.0
    return out


def dealias_hat(grid: Grid, hat: np.ndarray) -> np.ndarray:
    return hat * tables(grid).dealias_mask


# -- field-level operations ---------------------------------------------------

def gradient(s: ScalarField) -> VectorField:
    """Spectral gradient; exact for band-limited input, each component zero-mean."""
    grid = s.grid
    return VectorField(grid, to_physical(grid, grad_hat(grid, to_spectral(grid, s.values))))


def jacobian(v: VectorField) -> Tensor2Field:
    """Componentwise gradient with entry (i, m) = d_i v_m."""
    grid = v.grid
    vhat = to_spectral(grid, v.components)
    out = to_physical(grid, grad_hat(grid, vhat))  # (i, m, ...)
    return Tensor2Field(grid, out)


def divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    return ScalarField(grid, to_physical(grid, div_hat(grid, to_spectral(grid, v.components))))


def curl(v: VectorField):
    """Curl: a VectorField in 3D, the scalar d_1 v_2 - d_2 v_1 in 2D."""
    grid = v.grid
    vhat = to_spectral(grid, v.components)
    k = tables(grid).k
    if grid.dim == 2:
        what = 1j * (k[0] * vhat[1] - k[1] * vhat[0])
        return ScalarField(grid, to_physical(grid, what))
    out = np.stack([
        1j * (k[1] * vhat[2] - k[2] * vhat[1]),
        1j * (k[2] * vhat[0] - k[0] * vhat[2]),
        1j * (k[0] * vhat[1] - k[1] * vhat[0]),
    ])
    return VectorField(grid, to_physical(grid, out))


def laplacian(f: ScalarField | VectorField):
    grid = f.grid
    k2 = tables(grid).k2
    if isinstance(f, ScalarField):
        return ScalarField(grid, to_physical(grid, -k2 * to_spectral(grid, f.values)))
    return VectorField(grid, to_physical(grid, -k2 * to_spectral(grid, f.components)))


def inverse_laplacian(s: ScalarField) -> ScalarField:
    """Unique zero-mean solution of laplacian(n) = s; input must be zero-mean."""
    rms = float(np.sqrt(np.mean(s.values**2)))
    m = float(np.mean(s.values))
    if abs(m) > 1e-10 * max(rms, 1e-300):
        raise FieldCompatibilityError(
            f"inverse_laplacian needs zero-mean input: mean={m:.3e}, rms={rms:.3e}"
        )
    grid = s.grid
    return ScalarField(grid, to_physical(grid, poisson_hat(grid, to_spectral(grid, s.values))))


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields (means preserved)."""
    grid = v.grid
    return VectorField(grid, to_physical(grid, leray_hat(grid, to_spectral(grid, v.components))))


def quadratic_pressure_hat(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Spectral R_i R_j(u^i u^j): the zero-mean quadratic pressure part.

    The products u_i u_j are dealiased before differentiation.
    """
    tab = tables(grid)
    out = np.zeros(tab.kshape, dtype=complex)
    for i in range(grid.dim):
        for j in range(i, grid.dim):
            qhat = dealias_hat(grid, to_spectral(grid, u[i] * u[j]))
            weight = 1.0 if i == j else 2.0
            out += -weight * tab.k[i] * tab.k[j] * qhat
    out *= tab.inv_k2_deriv
    out[_zero_mode(grid)] = 0.0
    return out


def riesz_pressure(u: VectorField, c: float = 0.0) -> ScalarField:
    """Pressure R_i R_j(u^i u^j) + c of a divergence-free velocity."""
    grid = u.grid
    values = to_physical(grid, quadratic_pressure_hat(grid, u.components)) + c
    return ScalarField(grid, values)


def dealias(field):
    """2/3-rule truncation: modes with any |index| above n//3 are zeroed."""
    grid = field.grid
    if isinstance(field, ScalarField):
        return ScalarField(grid, to_physical(grid, dealias_hat(grid, to_spectral(grid, field.values))))
    data = to_physical(grid, dealias_hat(grid, to_spectral(grid, field.components)))
    return type(field)(grid, data)


def hessian(s: ScalarField) -> Tensor2Field:
    """Matrix of second derivatives d_j d_k s (symmetric)."""
    grid = s.grid
    shat = to_spectral(grid, s.values)
    k = tables(grid).k
    d = grid.dim
    out = np.empty((d, d, *grid.shape))
    for j in range(d):
        for kk in range(j, d):
            val = to_physical(grid, -(k[j] * k[kk]) * shat)
            out[j, kk] = val
            out[kk, j] = val
    return Tensor2Field(grid, out)


def resample(field, n_new: int):
    """Re-sample a field on a grid with ``n_new`` points per axis.

    Spectral zero-padding (or truncation), exact for band-limited fields.
    """
    grid = field.grid
    fine = Grid(grid.dim, n_new, grid.length)
    data = field.values if isinstance(field, ScalarField) else field.components
    hat = scipy.fft.fftn(data, axes=tuple(range(-grid.dim, 0)), workers=_WORKERS)
    half = min(grid.n, n_new) // 2
    src = np.fft.fftfreq(grid.n, 1.0 / grid.n).astype(int)
    dst = np.fft.fftfreq(n_new, 1.0 / n_new).astype(int)
    take = np.where(np.abs(src) < half)[0]
    put = np.where(np.abs(dst) < half)[0]
    new_hat = np.zeros(data.shape[: data.ndim - grid.dim] + fine.shape, dtype=complex)
    idx_take = np.ix_(*([take] * grid.dim))
    idx_put = np.ix_(*([put] * grid.dim))
    new_hat[(Ellipsis, *idx_put)] = hat[(Ellipsis, *idx_take)]
    new_hat *= (n_new / grid.n) ** grid.dim
    data_new = scipy.fft.ifftn(new_hat, axes=tuple(range(-grid.dim, 0)), workers=_WORKERS).real
    if isinstance(field, ScalarField):
        return ScalarField(fine, data_new)
    return type(field)(fine, data_new)
