"""Particle trajectories in a self-consistent electrostatic field and their
variational Jacobians.

Characteristics through the anchor (t, x, v):

    dX/dtau = V,    dV/dtau = grad_x phi(tau, X),    X(t) = x, V(t) = v,

integrated backward in tau with RK4.  The variational blocks solve

    d(dX)/dtau = dV,    d(dV)/dtau = hess phi(tau, X) dX

alongside, which keeps the Jacobian ratio test well conditioned as tau -> t
(finite differences lose exactly those digits).  In the 1D reduction the field
acts on (x1, v1) only; the transverse components stream freely, so the 3x3
blocks are diagonal around the nontrivial (x1, v1) entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline


class FieldSampler:
    """Time-indexed electrostatic field: grad_x phi and its x-derivatives."""

    def grad_phi(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_phi(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def third_phi(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    t_min: float = -np.inf
    t_max: float = np.inf

    def check_time(self, t: float) -> None:
        if t < self.t_min - 1e-12 or t > self.t_max + 1e-12:
            raise ValueError(
                f"time {t} outside the field sampler range "
                f"[{self.t_min}, {self.t_max}]"
            )


class ZeroField(FieldSampler):
    def grad_phi(self, t, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    hess_phi = grad_phi
    third_phi = grad_phi


class UniformField(FieldSampler):
    """Constant acceleration g along x1."""

    def __init__(self, g: float):
        self.g = float(g)

    def grad_phi(self, t, x):
        return np.full_like(np.asarray(x, dtype=float), self.g)

    def hess_phi(self, t, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    third_phi = hess_phi


class StandingWaveField(FieldSampler):
    """phi(t, x) = A cos(k x) cos(Omega t); hess sup norm is A k^2."""

    def __init__(self, amplitude: float, k: float, omega: float = 0.0):
        self.A = float(amplitude)
        self.k = float(k)
        self.omega = float(omega)

    def hess_sup(self) -> float:
        return abs(self.A) * self.k ** 2

    def grad_phi(self, t, x):
        return -self.A * self.k * np.sin(self.k * np.asarray(x, dtype=float)) \
            * np.cos(self.omega * t)

    def hess_phi(self, t, x):
        return -self.A * self.k ** 2 * np.cos(self.k * np.asarray(x, dtype=float)) \
            * np.cos(self.omega * t)

    def third_phi(self, t, x):
        return self.A * self.k ** 3 * np.sin(self.k * np.asarray(x, dtype=float)) \
            * np.cos(self.omega * t)


class SpectralHistoryField(FieldSampler):
    """Field from a stored periodic run: spectral in x, cubic spline in t."""

    def __init__(self, times: np.ndarray, phi_history: np.ndarray, length: float):
        times = np.asarray(times, dtype=float)
        phi_history = np.asarray(phi_history, dtype=float)
        self.length = float(length)
        self.n_x = phi_history.shape[1]
        self.t_min = float(times[0])
        self.t_max = float(times[-1])
        coeffs = np.fft.fft(phi_history, axis=1)
        if len(times) >= 4:
            self._re = CubicSpline(times, coeffs.real, axis=0)
            self._im = CubicSpline(times, coeffs.imag, axis=0)
        else:
            self._re = lambda t: coeffs.real[0]
            self._im = lambda t: coeffs.imag[0]
        self.k = 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.length / self.n_x)

    def _eval(self, t: float, x, order: int) -> np.ndarray:
        self.check_time(t)
        ch = (self._re(t) + 1j * self._im(t)) * (1j * self.k) ** order / self.n_x
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * np.outer(x, self.k))
        return np.real(phase @ ch).reshape(np.shape(x))

    def grad_phi(self, t, x):
        return self._eval(t, x, 1)

    def hess_phi(self, t, x):
        return self._eval(t, x, 2)

    def third_phi(self, t, x):
        return self._eval(t, x, 3)


@dataclass(frozen=True)
class Trajectory:
    """Backward characteristic samples and variational blocks at requested tau.

    jacobians maps tau -> dict of 3x3 blocks dX_dx, dX_dv, dV_dx, dV_dv built
    from the 1D reduction (transverse components stream freely).
    """

    t_anchor: float
    x: np.ndarray
    v: np.ndarray
    taus: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)          # (n_tau, 3)
    V: np.ndarray = field(repr=False)          # (n_tau, 3)
    jac: list = field(default=None, repr=False)  # per tau: dict of 3x3 blocks


def _rk4_backward(state: np.ndarray, rhs, t_from: float, t_to: float,
                  max_step: float) -> np.ndarray:
    """Integrate d state/dtau = rhs(tau, state) from t_from to t_to (any order)."""
    span = t_to - t_from
    n = max(1, int(np.ceil(abs(span) / max_step - 1e-12)))
    h = span / n
    s = state
    tau = t_from
    for _ in range(n):
        k1 = rhs(tau, s)
        k2 = rhs(tau + 0.5 * h, s + 0.5 * h * k1)
        k3 = rhs(tau + 0.5 * h, s + 0.5 * h * k2)
        k4 = rhs(tau + h, s + h * k3)
        s = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau += h
    return s


def integrate_trajectory(t: float, x, v, fieldsampler: FieldSampler, tau_list,
                         max_step: float = 1e-3,
                         with_jacobian: bool = True) -> Trajectory:
    """Backward trajectory through (t, x, v) sampled at the requested taus.

    taus must lie in [0, t] and inside the sampler's time range.  The
    variational system is integrated in the same augmented RK4 sweep.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    v = np.asarray(v, dtype=float).reshape(3)
    taus = np.asarray(sorted(float(s) for s in tau_list), dtype=float)
    if taus.size and (taus[0] < -1e-12 or taus[-1] > t + 1e-12):
        raise ValueError("tau_list must lie in [0, t]")
    for s in (t, *taus):
        fieldsampler.check_time(s)

    # state: X1, V1, dX/dx1, dX/dv1, dV/dx1, dV/dv1
    def rhs(tau, s):
        X1, V1, jxx, jxv, jvx, jvv = s
        g = float(fieldsampler.grad_phi(tau, X1))
        h = float(fieldsampler.hess_phi(tau, X1))
        return np.array([V1, g, jvx, jvv, h * jxx, h * jxv])

    state = np.array([x[0], v[0], 1.0, 0.0, 0.0, 1.0])
    out_X, out_V, out_jac = [], [], []
    tau_now = t
    for tau in taus[::-1]:
        state = _rk4_backward(state, rhs, tau_now, tau, max_step)
        tau_now = tau
        dtau = tau - t
        X = np.array([state[0], x[1] + dtau * v[1], x[2] + dtau * v[2]])
        V = np.array([state[1], v[1], v[2]])
        out_X.append(X)
        out_V.append(V)
        if with_jacobian:
            dX_dx = np.diag([state[2], 1.0, 1.0])
            dX_dv = np.diag([state[3], dtau, dtau])
            dV_dx = np.diag([state[4], 0.0, 0.0])
            dV_dv = np.diag([state[5], 1.0, 1.0])
            out_jac.append({"dX_dx": dX_dx, "dX_dv": dX_dv,
                            "dV_dx": dV_dx, "dV_dv": dV_dv})
    return Trajectory(t_anchor=t, x=x, v=v, taus=taus,
                      X=np.array(out_X[::-1]), V=np.array(out_V[::-1]),
                      jac=out_jac[::-1] if with_jacobian else None)


def variational_jacobian(t: float, x, v, fieldsampler: FieldSampler, tau_list,
                         max_step: float = 1e-3) -> Trajectory:
    """Trajectory with variational blocks (alias making the augmented solve
    explicit at call sites)."""
    return integrate_trajectory(t, x, v, fieldsampler, tau_list, max_step, True)


def phase_volume_defect(traj: Trajectory) -> float:
    """Max |det of the (x1, v1) phase-plane Jacobian - 1| over the samples.

    The flow is Hamiltonian, so the exact determinant is 1; the defect measures
    integration error and implies consistency with the determinant windows.
    """
    worst = 0.0
    for blocks in traj.jac:
        m = np.array([[blocks["dX_dx"][0, 0], blocks["dX_dv"][0, 0]],
                      [blocks["dV_dx"][0, 0], blocks["dV_dv"][0, 0]]])
        worst = max(worst, abs(float(np.linalg.det(m)) - 1.0))
    return worst


def jacobian_window_check(traj: Trajectory, T0_candidate: float | None = None) -> dict:
    """Verdicts for the four determinant/entry windows on tau in [t - T0, t]:

        (1/2)|t-tau|^3 <= |det dX/dv| <= 2|t-tau|^3
        |dX/dv entries| <= 2|t-tau|
        1/2 <= |det dV/dv| <= 2
        1/2 <= |det dX/dx| <= 2

    Returns per-bound pass flags, the ratio series, and the largest T0 among
    the sampled taus for which all four hold.
    """
    t = traj.t_anchor
    taus = traj.taus
    if T0_candidate is None:
        T0_candidate = t - float(taus[0])
    sel = [i for i, tau in enumerate(taus)
           if t - tau <= T0_candidate + 1e-12 and t - tau > 0.0]
    rows = []
    for i in sel:
        tau = taus[i]
        blocks = traj.jac[i]
        dt3 = abs(t - tau) ** 3
        det_xv = abs(float(np.linalg.det(blocks["dX_dv"])))
        ratio = det_xv / dt3
        ok1 = 0.5 <= ratio <= 2.0
        max_entry = float(np.max(np.abs(blocks["dX_dv"])))
        ok2 = max_entry <= 2.0 * abs(t - tau)
        det_vv = abs(float(np.linalg.det(blocks["dV_dv"])))
        ok3 = 0.5 <= det_vv <= 2.0
        det_xx = abs(float(np.linalg.det(blocks["dX_dx"])))
        ok4 = 0.5 <= det_xx <= 2.0
        rows.append({"tau": tau, "det_ratio": ratio, "det_vv": det_vv,
                     "det_xx": det_xx, "max_dX_dv": max_entry,
                     "ok": (ok1, ok2, ok3, ok4)})
    largest_T0 = 0.0
    for row in sorted(rows, key=lambda r: t - r["tau"]):
        if all(row["ok"]):
            largest_T0 = t - row["tau"]
        else:
            break
    return {
        "rows": rows,
        "all_pass": all(all(r["ok"]) for r in rows),
        "largest_T0": largest_T0,
    }


def empirical_T0(field: StandingWaveField, t: float = 4.0, v1: float = 0.4,
                 n_tau: int = 160, max_step: float = 2e-3) -> float:
    """Largest backward window on which all four bounds hold for one anchor."""
    taus = np.linspace(max(0.0, t - 4.0), t, n_tau, endpoint=False)
    traj = integrate_trajectory(t, (0.3, 0.0, 0.0), (v1, 0.0, 0.0), field,
                                taus, max_step=max_step)
    return jacobian_window_check(traj)["largest_T0"]
