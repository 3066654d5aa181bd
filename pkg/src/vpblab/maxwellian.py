"""Local and global Maxwellians, their lattice moments, the five-dimensional
null basis chi_0..chi_4 of the linearized collision operator, the orthogonal
projection P onto that basis, and the polynomial velocity weights w(v).

Conventions: a local Maxwellian with density rho, bulk velocity u and
temperature theta is

    omega(v) = rho / (2 pi theta)^{3/2} * exp(-|v - u|^2 / (2 theta)),

and the null basis at (rho, u, theta) is

    chi_0 = sqrt(omega) / sqrt(rho),
    chi_i = (v_i - u_i) sqrt(omega) / sqrt(rho theta),          i = 1, 2, 3,
    chi_4 = (|v - u|^2 / theta - 3) sqrt(omega) / sqrt(6 rho),

orthonormal in L^2_v.  The global Maxwellian omega_M is the local Maxwellian of
the constant background state (rho_bar, 0, theta_M) with theta_M = K rho_bar^{2/3}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import VelocityGrid, integrate_v


@dataclass(frozen=True)
class MaxwellianParams:
    """Pointwise fluid parameters (rho, u, theta) of a local Maxwellian."""

    rho: float
    u: tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta: float = 1.0

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError(f"rho must be positive (got {self.rho})")
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive (got {self.theta})")
        object.__setattr__(self, "u", tuple(float(c) for c in self.u))
        if len(self.u) != 3:
            raise ValueError("u must be a 3-vector")


@dataclass(frozen=True)
class GlobalMaxwellian:
    """Reference Maxwellian at the uniform background charge state."""

    rho_bar: float
    K_eos: float

    def __post_init__(self):
        if self.rho_bar <= 0.0 or self.K_eos <= 0.0:
            raise ValueError("rho_bar and K_eos must be positive")

    @property
    def theta_M(self) -> float:
        return self.K_eos * self.rho_bar ** (2.0 / 3.0)

    def evaluate(self, grid: VelocityGrid) -> np.ndarray:
        """omega_M on the lattice (unit mass normalization, density 1)."""
        p = MaxwellianParams(rho=1.0, u=(0.0, 0.0, 0.0), theta=self.theta_M)
        return local_maxwellian(p, grid)


@dataclass(frozen=True)
class WeightSpec:
    """Polynomial weight w(v) = (1 + |v|^2)^beta, beta >= 7/2."""

    beta: float = 3.5

    def __post_init__(self):
        if self.beta < 3.5:
            raise ValueError(f"beta must be >= 7/2 (got {self.beta})")


def weight_w(v: np.ndarray, spec: WeightSpec) -> float | np.ndarray:
    """(1 + |v|^2)^beta for a single 3-vector or an (N, 3) array of nodes."""
    v = np.asarray(v, dtype=float)
    s2 = np.sum(v * v, axis=-1)
    out = (1.0 + s2) ** spec.beta
    if out.ndim == 0:
        return float(out)
    return out


def local_maxwellian(p: MaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """omega(v) on the lattice, shape (N,); strictly positive."""
    dv = grid.nodes - np.asarray(p.u)
    q2 = np.sum(dv * dv, axis=1)
    norm = p.rho / (2.0 * np.pi * p.theta) ** 1.5
    return norm * np.exp(-q2 / (2.0 * p.theta))


def maxwellian_fields(rho: np.ndarray, u1: np.ndarray, theta: np.ndarray,
                      grid: VelocityGrid) -> np.ndarray:
    """Local Maxwellians for per-x fields (1D flow: u = (u1, 0, 0)).

    rho, u1, theta have shape (n_x,); returns (n_x, N).
    """
    rho = np.asarray(rho, dtype=float)[:, None]
    u1 = np.asarray(u1, dtype=float)[:, None]
    theta = np.asarray(theta, dtype=float)[:, None]
    v1 = grid.nodes[None, :, 0]
    s2_perp = (grid.nodes[:, 1] ** 2 + grid.nodes[:, 2] ** 2)[None, :]
    q2 = (v1 - u1) ** 2 + s2_perp
    norm = rho / (2.0 * np.pi * theta) ** 1.5
    return norm * np.exp(-q2 / (2.0 * theta))


def moments(F: np.ndarray, grid: VelocityGrid):
    """(rho, momentum 3-vector, energy) with energy = integral |v|^2 F dv.

    F may be (N,) or batched (..., N); outputs broadcast accordingly.
    """
    F = np.asarray(F)
    rho = integrate_v(F, grid)
    mom = np.stack([integrate_v(F * grid.nodes[:, i], grid) for i in range(3)],
                   axis=-1)
    energy = integrate_v(F * grid.speed2(), grid)
    return rho, mom, energy


def null_basis(p: MaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """The five basis functions chi_0..chi_4 on the lattice, shape (5, N)."""
    omega = local_maxwellian(p, grid)
    sqrt_w = np.sqrt(omega)
    dv = grid.nodes - np.asarray(p.u)
    q2 = np.sum(dv * dv, axis=1)
    chi = np.empty((5, grid.n_nodes))
    chi[0] = sqrt_w / np.sqrt(p.rho)
    scale = 1.0 / np.sqrt(p.rho * p.theta)
    for i in range(3):
        chi[1 + i] = dv[:, i] * sqrt_w * scale
    chi[4] = (q2 / p.theta - 3.0) * sqrt_w / np.sqrt(6.0 * p.rho)
    return chi


def gram_matrix(basis: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """5x5 Gram matrix of the basis in the lattice inner product."""
    return np.asarray(integrate_v(basis[:, None, :] * basis[None, :, :], grid))


def project_P(g: np.ndarray, basis: np.ndarray, grid: VelocityGrid,
              gram_tol: float = 1e-4) -> np.ndarray:
    """Orthogonal projection of g onto span(chi_0..chi_4).

    The basis must be orthonormal within gram_tol (max |Gram - I|); a larger
    deviation signals a broken basis or grid and raises.
    """
    gram = gram_matrix(basis, grid)
    defect = float(np.max(np.abs(gram - np.eye(5))))
    if defect > gram_tol:
        raise ValueError(
            f"null basis is not orthonormal on this grid: max|Gram - I| = {defect:.3e}"
        )
    coeff = integrate_v(basis * np.asarray(g)[None, :], grid)
    return np.asarray(coeff) @ basis


def project_P_fields(g: np.ndarray, bases: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """x-local projection for batched fields: g (n_x, N), bases (n_x, 5, N)."""
    coeff = np.einsum("xkn,xn->xk", bases, g) * grid.cell_volume
    return np.einsum("xk,xkn->xn", coeff, bases)


def null_basis_fields(rho: np.ndarray, u1: np.ndarray, theta: np.ndarray,
                      grid: VelocityGrid) -> np.ndarray:
    """Per-x null bases for 1D-flow fields; returns (n_x, 5, N)."""
    omega = maxwellian_fields(rho, u1, theta, grid)
    sqrt_w = np.sqrt(omega)
    rho = np.asarray(rho, dtype=float)[:, None]
    u1 = np.asarray(u1, dtype=float)[:, None]
    theta = np.asarray(theta, dtype=float)[:, None]
    dv1 = grid.nodes[None, :, 0] - u1
    q2 = dv1 ** 2 + (grid.nodes[:, 1] ** 2 + grid.nodes[:, 2] ** 2)[None, :]
    n_x = sqrt_w.shape[0]
    chi = np.empty((n_x, 5, grid.n_nodes))
    chi[:, 0, :] = sqrt_w / np.sqrt(rho)
    scale = 1.0 / np.sqrt(rho * theta)
    chi[:, 1, :] = dv1 * sqrt_w * scale
    chi[:, 2, :] = grid.nodes[None, :, 1] * sqrt_w * scale
    chi[:, 3, :] = grid.nodes[None, :, 2] * sqrt_w * scale
    chi[:, 4, :] = (q2 / theta - 3.0) * sqrt_w / np.sqrt(6.0 * rho)
    return chi
