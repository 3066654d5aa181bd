"""First-order Hilbert coefficient and truncated expansions.

The first coefficient splits into a macroscopic part carried by the null basis
and a microscopic part fixed by the order-epsilon^0 collision balance:

    {I-P}(F_1/sqrt(omega)) = L^{-1}( -(d_t + v.grad_x + grad phi_0 . grad_v) omega
                                      / sqrt(omega) ),

while (rho_1, u_1, theta_1, phi_1) obey a linear symmetric-hyperbolic system
forced by the Navier-Stokes-type fluxes d_x(mu(theta_0) d_x u_0) and
div(kappa(theta_0) grad theta_0) + 2 mu(theta_0) |d_x u_0|^2.  This module also
assembles the truncated field omega + sum_i eps^i F_i, the residual source of
the truncation, and the growth factors used by the energy diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .collision import CollisionConfig, FieldsOperator, collide, transport_table
from .euler_poisson import (
    FluidState,
    NumericalError,
    cfl_bound,
    dealias,
    euler_poisson_rhs,
    solve_poisson,
    spectral_dx,
)
from .grids import SpatialGrid, VelocityGrid, fd1_matrix
from .maxwellian import maxwellian_fields, null_basis_fields


@dataclass(frozen=True)
class ExpansionTruncation:
    """Highest coefficient index kept, and the Knudsen number."""

    k_trunc: int = 1
    epsilon: float = 0.05

    def __post_init__(self):
        if self.k_trunc < 1:
            raise ValueError("k_trunc must be >= 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class CoeffState:
    """Order-i coefficient: macroscopic fields plus the microscopic slice.

    micro holds {I-P}(F_i / sqrt(omega)) on the velocity lattice per spatial
    point (None until computed; it is a function of the fluid state, not an
    evolved quantity).
    """

    order: int
    time: float
    rho_i: np.ndarray = field(repr=False)
    u_i: np.ndarray = field(repr=False)
    theta_i: np.ndarray = field(repr=False)
    phi_i: np.ndarray = field(repr=False)
    micro: np.ndarray | None = field(default=None, repr=False)

    def validate(self, fluid: FluidState, vgrid: VelocityGrid | None = None,
                 tol: float = 1e-8, micro_tol: float = 1e-6) -> None:
        lap = spectral_dx(self.phi_i, fluid.grid, order=2)
        scale = max(float(np.max(np.abs(self.rho_i))), 1e-30)
        if np.max(np.abs(lap - self.rho_i)) > tol * scale:
            raise NumericalError("coefficient Poisson identity broken")
        if self.micro is not None and vgrid is not None:
            bases = null_basis_fields(fluid.rho, fluid.u, fluid.theta, vgrid)
            coeff = np.einsum("xkn,xn->xk", bases, self.micro) * vgrid.cell_volume
            proj = np.einsum("xk,xkn->xn", coeff, bases)
            num = float(np.linalg.norm(proj))
            den = float(np.linalg.norm(self.micro))
            if den > 0 and num > micro_tol * den:
                raise NumericalError(
                    f"micro slice is not microscopic: |P micro|/|micro| = {num/den:.2e}"
                )


def zero_coeff_state(grid: SpatialGrid, order: int = 1, time: float = 0.0) -> CoeffState:
    z = np.zeros(grid.n_x)
    return CoeffState(order=order, time=time, rho_i=z.copy(), u_i=z.copy(),
                      theta_i=z.copy(), phi_i=z.copy())


class TransportModel:
    """mu_long(theta), kappa(theta), mu_shear(theta) by cubic interpolation of
    bracket values precomputed at a handful of temperatures."""

    def __init__(self, thetas: np.ndarray, table: np.ndarray):
        thetas = np.asarray(thetas, dtype=float)
        table = np.asarray(table, dtype=float)
        self.thetas = thetas
        self.table = table
        if len(thetas) == 1 or np.ptp(thetas) < 1e-12:
            vals = table[0]
            self._mu_shear = lambda th: np.full_like(np.asarray(th, float), vals[0])
            self._mu_long = lambda th: np.full_like(np.asarray(th, float), vals[1])
            self._kappa = lambda th: np.full_like(np.asarray(th, float), vals[2])
        else:
            s0 = CubicSpline(thetas, table[:, 0])
            s1 = CubicSpline(thetas, table[:, 1])
            s2 = CubicSpline(thetas, table[:, 2])
            self._mu_shear, self._mu_long, self._kappa = s0, s1, s2

    def mu_shear(self, theta):
        return np.asarray(self._mu_shear(theta), dtype=float)

    def mu_long(self, theta):
        return np.asarray(self._mu_long(theta), dtype=float)

    def kappa(self, theta):
        return np.asarray(self._kappa(theta), dtype=float)

    @classmethod
    def constant(cls, mu_shear: float, mu_long: float, kappa: float) -> "TransportModel":
        return cls(np.array([1.0]), np.array([[mu_shear, mu_long, kappa]]))

    @classmethod
    def from_run(cls, theta_min: float, theta_max: float, vgrid: VelocityGrid,
                 cfg: CollisionConfig | None = None, n_samples: int = 8,
                 tol: float = 1e-8) -> "TransportModel":
        """Bracket table spanning [theta_min, theta_max] with a little padding."""
        if theta_max < theta_min:
            raise ValueError("theta_max < theta_min")
        pad = 0.05 * max(theta_max - theta_min, 1e-3 * theta_min)
        lo, hi = theta_min - pad, theta_max + pad
        if (hi - lo) / max(lo, 1e-30) < 1e-9:
            thetas = np.array([0.5 * (lo + hi)])
        else:
            thetas = np.linspace(lo, hi, n_samples)
        table = transport_table(thetas, vgrid, cfg, tol=tol)
        return cls(thetas, table)


def transport_source(fluid: FluidState, fluid_rhs, vgrid: VelocityGrid) -> np.ndarray:
    """-(d_t + v.grad_x + grad phi_0 . grad_v) omega / sqrt(omega), shape (n_x, N).

    Time derivatives of (rho_0, u_0) come from the Euler-Poisson right side;
    theta_0 follows by the isentropic slaving d theta = (2/3)(theta/rho) d rho.
    """
    g = fluid.grid
    drho_dt, du_dt = fluid_rhs
    drho_dx = spectral_dx(fluid.rho, g)
    du_dx = spectral_dx(fluid.u, g)
    dtheta_dt = (2.0 / 3.0) * fluid.theta / fluid.rho * drho_dt
    dtheta_dx = (2.0 / 3.0) * fluid.theta / fluid.rho * drho_dx
    dphi_dx = spectral_dx(fluid.phi, g)

    omega = maxwellian_fields(fluid.rho, fluid.u, fluid.theta, vgrid)
    sqrt_w = np.sqrt(omega)
    v1 = vgrid.nodes[None, :, 0]
    c1 = v1 - fluid.u[:, None]
    q2 = c1 ** 2 + (vgrid.nodes[:, 1] ** 2 + vgrid.nodes[:, 2] ** 2)[None, :]
    th = fluid.theta[:, None]
    rho = fluid.rho[:, None]

    # D log(omega) along the transport field, with grad_v omega = -(v-u)/theta omega
    d_rho = (drho_dt[:, None] + v1 * drho_dx[:, None]) / rho
    d_u = c1 * (du_dt[:, None] + v1 * du_dx[:, None]) / th
    d_th = (q2 / (2.0 * th ** 2) - 1.5 / th) \
        * (dtheta_dt[:, None] + v1 * dtheta_dx[:, None])
    d_phi = -dphi_dx[:, None] * c1 / th
    return -(d_rho + d_u + d_th + d_phi) * sqrt_w


def micro_F1(fluid: FluidState, fluid_rhs=None, vgrid: VelocityGrid = None,
             cfg: CollisionConfig | None = None, tol: float = 1e-8,
             op: FieldsOperator | None = None) -> np.ndarray:
    """{I-P}(F_1/sqrt(omega)) per spatial point, shape (n_x, N).

    Solves the microscopic balance with one batched conjugate-gradient sweep
    over all spatial points; pass a prebuilt FieldsOperator to reuse it.
    fluid_rhs defaults to the instantaneous Euler-Poisson right side.
    """
    if fluid_rhs is None:
        fluid_rhs = euler_poisson_rhs(fluid)
    if op is None:
        op = FieldsOperator(fluid.rho, fluid.u, fluid.theta, vgrid, cfg)
    src = transport_source(fluid, fluid_rhs, vgrid)
    return op.solve_microscopic(src, tol=tol)


def step_coeff1(c: CoeffState, fluid: FluidState, transport: TransportModel,
                dt: float) -> CoeffState:
    """Advance (rho_1, u_1, theta_1) by RK4 on the linear coefficient system.

    The fluid background is frozen over the step (its variation enters at the
    next order in dt, below the RK4 truncation level for the small steps used);
    phi_1 is re-solved from Delta phi_1 = rho_1 afterwards.
    """
    g = fluid.grid
    if dt > cfl_bound(fluid) * (1.0 + 1e-12):
        raise NumericalError(
            f"coefficient CFL violation: dt={dt:.3e} > {cfl_bound(fluid):.3e}"
        )
    rho0, u0, th0 = fluid.rho, fluid.u, fluid.theta
    du0 = spectral_dx(u0, g)
    dth0 = spectral_dx(th0, g)
    p0 = rho0 * th0
    dp0 = spectral_dx(p0, g)
    mu_l = transport.mu_long(th0)
    kap = transport.kappa(th0)
    visc = spectral_dx(dealias(mu_l * du0, g), g)
    heat = spectral_dx(dealias(kap * dth0, g), g) + 2.0 * mu_l * du0 ** 2

    def rhs(r1, v1, t1):
        phi1 = solve_poisson(r1, g)
        dr1 = -spectral_dx(dealias(rho0 * v1 + r1 * u0, g), g)
        dv1 = (-dealias(v1 * du0 + u0 * spectral_dx(v1, g), g)
               + spectral_dx(phi1, g)
               + dealias(r1 / rho0 ** 2 * dp0, g)
               - dealias(spectral_dx(rho0 * t1 + 3.0 * th0 * r1, g) / (3.0 * rho0), g)
               + visc / rho0)
        dt1 = (-dealias((2.0 / 3.0) * (t1 * du0 + 3.0 * th0 * spectral_dx(v1, g)), g)
               - dealias(u0 * spectral_dx(t1, g) + 3.0 * v1 * dth0, g)
               + heat / rho0)
        return dr1, dv1, dt1

    r0, v0, t0 = c.rho_i, c.u_i, c.theta_i
    k1 = rhs(r0, v0, t0)
    k2 = rhs(r0 + 0.5 * dt * k1[0], v0 + 0.5 * dt * k1[1], t0 + 0.5 * dt * k1[2])
    k3 = rhs(r0 + 0.5 * dt * k2[0], v0 + 0.5 * dt * k2[1], t0 + 0.5 * dt * k2[2])
    k4 = rhs(r0 + dt * k3[0], v0 + dt * k3[1], t0 + dt * k3[2])
    rho1 = r0 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    u1 = v0 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    th1 = t0 + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    phi1 = solve_poisson(rho1, g)
    return CoeffState(order=c.order, time=c.time + dt, rho_i=rho1, u_i=u1,
                      theta_i=th1, phi_i=phi1, micro=None)


def assemble_F1(c: CoeffState, fluid: FluidState, vgrid: VelocityGrid) -> np.ndarray:
    """F_1 on the lattice from the macroscopic fields and the micro slice.

    F_1/sqrt(omega) = rho_1 chi_0/sqrt(rho_0) + sqrt(rho_0/theta_0) u_1 chi_1
                      + sqrt(rho_0/6) (theta_1/theta_0) chi_4 + micro.
    """
    bases = null_basis_fields(fluid.rho, fluid.u, fluid.theta, vgrid)
    sqrt_w = np.sqrt(maxwellian_fields(fluid.rho, fluid.u, fluid.theta, vgrid))
    a0 = (c.rho_i / np.sqrt(fluid.rho))[:, None]
    a1 = (np.sqrt(fluid.rho / fluid.theta) * c.u_i)[:, None]
    a4 = (np.sqrt(fluid.rho / 6.0) * c.theta_i / fluid.theta)[:, None]
    g = a0 * bases[:, 0, :] + a1 * bases[:, 1, :] + a4 * bases[:, 4, :]
    if c.micro is not None:
        g = g + c.micro
    return g * sqrt_w


def assemble_truncated(fluid: FluidState, coeffs: list[CoeffState],
                       tr: ExpansionTruncation, vgrid: VelocityGrid) -> np.ndarray:
    """omega + sum_{i<=k_trunc} eps^i F_i on the lattice, shape (n_x, N)."""
    F = maxwellian_fields(fluid.rho, fluid.u, fluid.theta, vgrid)
    for c in coeffs[:tr.k_trunc]:
        F = F + tr.epsilon ** c.order * assemble_F1(c, fluid, vgrid)
    return F


def expansion_potential(fluid: FluidState, coeffs: list[CoeffState],
                        tr: ExpansionTruncation) -> np.ndarray:
    phi = fluid.phi.copy()
    for c in coeffs[:tr.k_trunc]:
        phi = phi + tr.epsilon ** c.order * c.phi_i
    return phi


def positivity_threshold(fluid: FluidState, coeffs: list[CoeffState],
                         vgrid: VelocityGrid,
                         eps_list: np.ndarray) -> float:
    """Largest epsilon in eps_list with nodewise-positive truncated field."""
    best = 0.0
    for eps in sorted(float(e) for e in eps_list):
        tr = ExpansionTruncation(k_trunc=max(len(coeffs), 1), epsilon=eps)
        F = assemble_truncated(fluid, coeffs, tr, vgrid)
        if float(np.min(F)) > 0.0:
            best = eps
    return best


def growth_factors(epsilon: float, t: float, k: int) -> tuple[float, float]:
    """The two finite growth sums of the remainder energy inequality.

    I1 = S + S^2 with S = sum_{i=1}^{2k-1} [eps (1+t)]^{i-1};
    I2 = sum over ordered pairs 1 <= i, j <= 2k-1 with i+j >= 2k of
         eps^{i+j-2k} (1+t)^{i+j-2}.
    """
    if epsilon <= 0.0 or t < 0.0 or k < 1:
        raise ValueError("need epsilon > 0, t >= 0, k >= 1")
    z = epsilon * (1.0 + t)
    S = sum(z ** (i - 1) for i in range(1, 2 * k))
    I1 = S + S * S
    I2 = 0.0
    for i in range(1, 2 * k):
        for j in range(1, 2 * k):
            if i + j >= 2 * k:
                I2 += epsilon ** (i + j - 2 * k) * (1.0 + t) ** (i + j - 2)
    return float(I1), float(I2)


def d_dv1(F: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """4th-order finite-difference d/dv_1 of (n_x, N) lattice fields."""
    n = vgrid.n_per_axis
    D = fd1_matrix(n, vgrid.spacing)
    blocks = np.asarray(F).reshape(-1, n, n, n)
    out = np.einsum("ap,xpbc->xabc", D, blocks)
    return out.reshape(np.asarray(F).shape)


def assemble_A(fluid: FluidState, coeff: CoeffState, tr: ExpansionTruncation,
               vgrid: VelocityGrid, cfg: CollisionConfig,
               dF1_dt: np.ndarray) -> np.ndarray:
    """Residual source of the first-order truncation, shape (n_x, N).

    A = Q(F_1, F_1) - grad phi_0 . grad_v F_1 - grad phi_1 . grad_v F_0
        - eps grad phi_1 . grad_v F_1 - (d_t F_1 + v . grad_x F_1),

    so that the defect of F_0 + eps F_1 in the rescaled system equals -eps A.
    dF1_dt is supplied by the caller (finite difference of assemble_F1 along
    the stored histories).
    """
    g = fluid.grid
    F1 = assemble_F1(coeff, fluid, vgrid)
    omega = maxwellian_fields(fluid.rho, fluid.u, fluid.theta, vgrid)
    dphi0 = spectral_dx(fluid.phi, g)[:, None]
    dphi1 = spectral_dx(coeff.phi_i, g)[:, None]
    v1 = vgrid.nodes[None, :, 0]
    c1 = v1 - fluid.u[:, None]
    dv_F0 = -c1 / fluid.theta[:, None] * omega
    dv_F1 = d_dv1(F1, vgrid)
    QF1F1 = collide(F1, F1, vgrid, cfg)
    dx_F1 = spectral_dx(F1, g)
    return (QF1F1 - dphi0 * dv_F1 - dphi1 * dv_F0
            - tr.epsilon * dphi1 * dv_F1 - dF1_dt - v1 * dx_F1)


def coefficient_energy(c: CoeffState, fluid: FluidState) -> tuple[float, float]:
    """(plain, symmetrizer) energies of the coefficient fields.

    plain = ||U||^2 + ||V||^2 with U = (rho_1, u_1, theta_1), V = grad phi_1;
    the symmetrizer weighs the components by (theta_0^2, rho_0^2 theta_0,
    rho_0^2/6).
    """
    g = fluid.grid
    dphi = spectral_dx(c.phi_i, g)
    dx = g.dx
    plain = float(np.sum(c.rho_i ** 2 + c.u_i ** 2 + c.theta_i ** 2) * dx
                  + np.sum(dphi ** 2) * dx)
    sym = float(np.sum(fluid.theta ** 2 * c.rho_i ** 2
                       + fluid.rho ** 2 * fluid.theta * c.u_i ** 2
                       + fluid.rho ** 2 / 6.0 * c.theta_i ** 2) * dx
                + np.sum(dphi ** 2) * dx)
    return plain, sym


def energy_envelope_report(times: np.ndarray, energies: np.ndarray,
                           p: float = 1.25) -> dict:
    """Fit the smallest C with dE/dt <= C (1+t)^{-p} (E + sqrt(E)) along the run."""
    times = np.asarray(times, dtype=float)
    E = np.asarray(energies, dtype=float)
    dE = np.gradient(E, times)
    denom = (1.0 + times) ** (-p) * (E + np.sqrt(np.maximum(E, 0.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, dE / denom, 0.0)
    C = float(np.max(ratio))
    return {"C": max(C, 0.0), "p": p, "max_energy": float(np.max(E))}
