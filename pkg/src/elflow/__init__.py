"""Periodic-box incompressible flow in displacement / virtual-velocity
variables, a classical pseudo-spectral reference solver, identity
certification and rigorous-bound diagnostics."""

from .grid import Grid
from .fields import ScalarField, VectorField, Tensor2Field, Tensor3Field
from .forcing import ForcingSpec
from .classical import NSState, ns_rhs, ns_step
from .el import (
    ELState, ELDerived, WState, initial_state, compute_Q, compute_C,
    compute_w, reconstruct_u, derive, el_rhs, el_step, reset_labels,
    gauge_transform, cotangent_step,
)
from .config import RunConfig, load_config, preset

__all__ = [
    "Grid", "ScalarField", "VectorField", "Tensor2Field", "Tensor3Field",
    "ForcingSpec", "NSState", "ns_rhs", "ns_step",
    "ELState", "ELDerived", "WState", "initial_state", "compute_Q",
    "compute_C", "compute_w", "reconstruct_u", "derive", "el_rhs", "el_step",
    "reset_labels", "gauge_transform", "cotangent_step",
    "RunConfig", "load_config", "preset",
]

__version__ = "0.1.0"
