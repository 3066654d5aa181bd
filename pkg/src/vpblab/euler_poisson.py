"""Zeroth-order isentropic Euler-Poisson flow on the periodic interval.

The electron-gas system in the 1D reduction (fields constant in x2, x3, bulk
velocity aligned with x1):

    d_t rho + d_x(rho u)                          = 0
    d_t u   + u d_x u + d_x(K rho^{5/3}) / rho    = d_x phi
    d_xx phi = rho - rho_bar,   mean(phi) = 0,

with the temperature slaved to the isentropic law theta = K rho^{2/3}
(adiabatic exponent 5/3).  Derivatives are pseudo-spectral with 2/3-rule
dealiasing, time stepping is classical RK4.  Linearizing about (rho_bar, 0)
gives the Langmuir dispersion relation

    Omega(k)^2 = rho_bar + (5/3) K rho_bar^{2/3} k^2,

the plasma-frequency mechanism that keeps small solutions smooth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grids import SpatialGrid, integrate_x

GAMMA = 5.0 / 3.0


class NumericalError(RuntimeError):
    """CFL violation, loss of positivity, or solver breakdown during a run."""


def dealias_mask(grid: SpatialGrid) -> np.ndarray:
    k = np.fft.fftfreq(grid.n_x) * grid.n_x
    return np.abs(k) <= grid.n_x // 3


def spectral_dx(f: np.ndarray, grid: SpatialGrid, order: int = 1) -> np.ndarray:
    """d^order f / dx^order along the leading axis, periodic spectral."""
    k = grid.wavenumbers()
    fh = np.fft.fft(f, axis=0)
    shape = (-1,) + (1,) * (f.ndim - 1)
    out = np.fft.ifft(fh * (1j * k.reshape(shape)) ** order, axis=0)
    return np.real(out)


def dealias(f: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    fh = np.fft.fft(f, axis=0)
    mask = dealias_mask(grid).reshape((-1,) + (1,) * (f.ndim - 1))
    return np.real(np.fft.ifft(fh * mask, axis=0))


def solve_poisson(source: np.ndarray, grid: SpatialGrid,
                  mean_tol: float = 1e-8) -> np.ndarray:
    """Zero-mean phi with d_xx phi = source; linear in source.

    Periodic solvability demands a zero-mean source; a violation means the
    neutrality constraint was broken upstream.
    """
    source = np.asarray(source, dtype=float)
    scale = max(float(np.max(np.abs(source))), 1.0)
    mean = float(np.mean(source))
    if abs(mean) > mean_tol * scale:
        raise NumericalError(
            f"Poisson source has nonzero mean {mean:.3e} (tolerance "
            f"{mean_tol:.1e} x {scale:.3e}): neutrality violated"
        )
    k = grid.wavenumbers()
    fh = np.fft.fft(source - mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        ph = np.where(k != 0.0, -fh / (k ** 2), 0.0)
    return np.real(np.fft.ifft(ph))


@dataclass(frozen=True)
class FluidState:
    """(rho, u, theta, phi) on the spatial grid at one time.

    theta is slaved to K rho^{2/3} and phi to the Poisson equation; both are
    recomputed rather than integrated, so the isentropic constraint and the
    zero-mean gauge hold exactly at every step.
    """

    time: float
    grid: SpatialGrid
    rho: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    K_eos: float = 1.0
    rho_bar: float = 1.0

    def validate(self, tol: float = 1e-10) -> None:
        if np.any(self.rho <= 0.0) or np.any(self.theta <= 0.0):
            raise NumericalError("rho and theta must stay positive")
        if np.max(np.abs(self.theta - self.K_eos * self.rho ** (2.0 / 3.0))) > tol:
            raise NumericalError("isentropic constraint theta = K rho^(2/3) broken")
        neutral = integrate_x(self.rho - self.rho_bar, self.grid)
        if abs(neutral) > tol * max(1.0, self.rho_bar * self.grid.length):
            raise NumericalError(f"neutrality violated: {neutral:.3e}")
        if abs(float(np.mean(self.phi))) > tol:
            raise NumericalError("phi gauge broken (nonzero mean)")


def make_fluid_state(grid: SpatialGrid, rho: np.ndarray, u: np.ndarray,
                     K_eos: float = 1.0, rho_bar: float = 1.0,
                     time: float = 0.0) -> FluidState:
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    theta = K_eos * rho ** (2.0 / 3.0)
    phi = solve_poisson(rho - rho_bar, grid)
    state = FluidState(time=time, grid=grid, rho=rho, u=u, theta=theta,
                       phi=phi, K_eos=K_eos, rho_bar=rho_bar)
    state.validate()
    return state


def standing_wave_state(grid: SpatialGrid, amplitude: float,
                        wavenumber_index: int = 1, K_eos: float = 1.0,
                        rho_bar: float = 1.0) -> FluidState:
    """rho = rho_bar (1 + a cos(k x)), u = 0: the small irrotational datum."""
    k = 2.0 * np.pi * wavenumber_index / grid.length
    rho = rho_bar * (1.0 + amplitude * np.cos(k * grid.nodes))
    return make_fluid_state(grid, rho, np.zeros(grid.n_x), K_eos, rho_bar)


def euler_poisson_rhs(s: FluidState) -> tuple[np.ndarray, np.ndarray]:
    """(d_t rho, d_t u) of the quoted system, with phi refreshed from rho."""
    g = s.grid
    phi = solve_poisson(s.rho - s.rho_bar, g)
    flux = dealias(s.rho * s.u, g)
    drho = -spectral_dx(flux, g)
    pressure = s.K_eos * s.rho ** GAMMA
    adv = dealias(s.u * spectral_dx(s.u, g), g)
    du = -adv - dealias(spectral_dx(pressure, g) / s.rho, g) + spectral_dx(phi, g)
    return drho, du


def cfl_bound(s: FluidState) -> float:
    """Largest admissible dt: dt (max|u| + sqrt(gamma theta) + 1)/dx <= 0.5."""
    speed = float(np.max(np.abs(s.u) + np.sqrt(GAMMA * s.theta))) + 1.0
    return 0.5 * s.grid.dx / speed


def step_euler_poisson(s: FluidState, dt: float) -> FluidState:
    """One RK4 step; re-imposes the isentropic law and the Poisson gauge."""
    if dt > cfl_bound(s) * (1.0 + 1e-12):
        raise NumericalError(
            f"CFL violation: dt={dt:.3e} exceeds bound {cfl_bound(s):.3e}"
        )

    def rhs(rho, u):
        tmp = replace(s, rho=rho, u=u)
        return euler_poisson_rhs(tmp)

    r0, u0 = s.rho, s.u
    k1r, k1u = rhs(r0, u0)
    k2r, k2u = rhs(r0 + 0.5 * dt * k1r, u0 + 0.5 * dt * k1u)
    k3r, k3u = rhs(r0 + 0.5 * dt * k2r, u0 + 0.5 * dt * k2u)
    k4r, k4u = rhs(r0 + dt * k3r, u0 + dt * k3u)
    rho = r0 + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    u = u0 + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    if np.any(rho <= 0.0):
        raise NumericalError(
            f"density lost positivity at t={s.time + dt:.4f} "
            f"(min rho = {float(np.min(rho)):.3e}): blow-up"
        )
    theta = s.K_eos * rho ** (2.0 / 3.0)
    phi = solve_poisson(rho - s.rho_bar, s.grid)
    return FluidState(time=s.time + dt, grid=s.grid, rho=rho, u=u, theta=theta,
                      phi=phi, K_eos=s.K_eos, rho_bar=s.rho_bar)


def run_fluid(s0: FluidState, t_final: float, dt: float) -> list[FluidState]:
    """March to t_final (last step shortened to land exactly); returns history."""
    history = [s0]
    s = s0
    n_steps = int(np.ceil((t_final - s0.time) / dt - 1e-12))
    for i in range(n_steps):
        step = min(dt, t_final - s.time)
        s = step_euler_poisson(s, step)
        history.append(s)
    return history


def langmuir_frequency(k: float, rho_bar: float = 1.0, K_eos: float = 1.0) -> float:
    """Omega(k) = sqrt(rho_bar + (5/3) K rho_bar^(2/3) k^2)."""
    return float(np.sqrt(rho_bar + GAMMA * K_eos * rho_bar ** (2.0 / 3.0) * k * k))


def measure_decay(history: list[FluidState], growth_flag: float = 2.0) -> dict:
    """Sup-norm time series, a fitted decay exponent, and a boundedness verdict.

    On the periodic box no dispersive decay is expected; the report checks that
    the perturbation norms stay bounded (no growth beyond growth_flag times the
    initial amplitude, the shock proxy threshold).
    """
    if not history:
        raise ValueError("history must be nonempty")
    times = np.array([s.time for s in history])
    sup = np.array([
        float(np.max(np.abs(s.rho - s.rho_bar)) + np.max(np.abs(s.u))
              + np.max(np.abs(spectral_dx(s.phi, s.grid))))
        for s in history
    ])
    initial = sup[0]
    if initial <= 0.0:
        exponent = 0.0
        bounded = bool(np.all(sup <= 1e-14))
        flagged = not bounded
    else:
        mask = sup > 0
        # fit sup ~ C (1+t)^{-p} on the positive samples
        if np.count_nonzero(mask) >= 2:
            coef = np.polyfit(np.log1p(times[mask]), np.log(sup[mask]), 1)
            exponent = -float(coef[0])
        else:
            exponent = 0.0
        bounded = bool(np.max(sup) <= growth_flag * initial)
        flagged = not bounded
    return {
        "times": times,
        "sup_norms": sup,
        "fitted_exponent": exponent,
        "bounded": bounded,
        "flagged_growth": flagged,
    }
