"""Kinetic-fluid laboratory for the Vlasov-Poisson-Boltzmann system.

Modules
-------
grids            velocity lattice, periodic spatial grid, sphere quadratures
maxwellian       local/global Maxwellians, moments, null basis, projection P
collision        hard-sphere lattice collision operator, linearized operator L,
                 transport coefficients, BGK surrogate
euler_poisson    zeroth-order isentropic Euler-Poisson solver (pseudo-spectral)
expansion        first Hilbert coefficient, truncated expansions, growth factors
characteristics  trajectories in a self-consistent field, variational Jacobians
kinetic          full VPB time stepping at small Knudsen number, remainder norms
harness          run configuration, convergence studies, report emission
cli              command-line entry points
"""

from .grids import (
    SpatialGrid,
    SphereQuadrature,
    VelocityGrid,
    build_spatial_grid,
    build_velocity_grid,
    integrate_v,
    integrate_x,
    lattice_sphere_quadrature,
    product_sphere_quadrature,
)
from .maxwellian import (
    GlobalMaxwellian,
    MaxwellianParams,
    WeightSpec,
    local_maxwellian,
    moments,
    null_basis,
    project_P,
    weight_w,
)

__all__ = [
    "SpatialGrid",
    "SphereQuadrature",
    "VelocityGrid",
    "build_spatial_grid",
    "build_velocity_grid",
    "integrate_v",
    "integrate_x",
    "lattice_sphere_quadrature",
    "product_sphere_quadrature",
    "GlobalMaxwellian",
    "MaxwellianParams",
    "WeightSpec",
    "local_maxwellian",
    "moments",
    "null_basis",
    "project_P",
    "weight_w",
]

__version__ = "0.1.0"
