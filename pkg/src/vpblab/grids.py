"""Discretization substrate: periodic spatial grid, truncated velocity lattice,
and the quadrature rules every other module integrates with.

The velocity grid is a uniform tensor-product lattice of cell centers on
[-v_max, v_max]^3 with equal (midpoint) volume weights.  Cell centers keep the
node set exactly closed under v -> -v for even n and give the collision module
a lattice on which pairwise node differences are again lattice vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centered velocity lattice with midpoint quadrature weights."""

    n_per_axis: int
    v_max: float
    axis: np.ndarray = field(repr=False)       # (n,) 1D node coordinates per axis
    nodes: np.ndarray = field(repr=False)      # (N, 3) tensor-product nodes, C order
    weights: np.ndarray = field(repr=False)    # (N,) equal volume weights

    @property
    def spacing(self) -> float:
        return 2.0 * self.v_max / self.n_per_axis

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis ** 3

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.n_per_axis
        return (n, n, n)

    def speed2(self) -> np.ndarray:
        """|v|^2 at every node, shape (N,)."""
        return np.sum(self.nodes ** 2, axis=1)


def build_velocity_grid(n_per_axis: int, v_max: float) -> VelocityGrid:
    """Build the cell-centered velocity lattice.

    n_per_axis must be even and at least 4 so that the node set is closed under
    v -> -v; v_max must be positive.
    """
    if n_per_axis < 4 or n_per_axis % 2 != 0:
        raise ValueError(
            f"n_per_axis must be even and >= 4 (got {n_per_axis}); "
            "odd counts break the v -> -v symmetry of the lattice"
        )
    if v_max <= 0.0:
        raise ValueError(f"v_max must be positive (got {v_max})")
    n = int(n_per_axis)
    dv = 2.0 * v_max / n
    axis = -v_max + (np.arange(n) + 0.5) * dv
    v1, v2, v3 = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.stack([v1.ravel(), v2.ravel(), v3.ravel()], axis=1)
    weights = np.full(n ** 3, dv ** 3)
    return VelocityGrid(n_per_axis=n, v_max=float(v_max), axis=axis,
                        nodes=nodes, weights=weights)


def integrate_v(values: np.ndarray, grid: VelocityGrid) -> float | np.ndarray:
    """Velocity integral sum(weights * values) over the lattice.

    Accepts (..., N); integrates the trailing axis.  Uses numpy's pairwise
    summation on a contiguous product so repeated calls are bit-identical.
    """
    values = np.asarray(values)
    if values.shape[-1] != grid.n_nodes:
        raise ValueError(
            f"values last axis {values.shape[-1]} != node count {grid.n_nodes}"
        )
    out = np.sum(values, axis=-1) * grid.cell_volume
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic 1D grid of n_x points on [0, L)."""

    n_x: int
    length: float
    nodes: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return self.length / self.n_x

    def wavenumbers(self) -> np.ndarray:
        """FFT wavenumbers 2*pi*freq/L matching np.fft.fft layout."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx)


def build_spatial_grid(n_x: int, length: float) -> SpatialGrid:
    if n_x < 2:
        raise ValueError(f"n_x must be >= 2 (got {n_x})")
    if length <= 0.0:
        raise ValueError(f"length must be positive (got {length})")
    nodes = np.arange(n_x) * (length / n_x)
    return SpatialGrid(n_x=int(n_x), length=float(length), nodes=nodes)


def integrate_x(values: np.ndarray, grid: SpatialGrid) -> float | np.ndarray:
    """Periodic trapezoid (= midpoint) x-integral along the leading axis."""
    values = np.asarray(values)
    if values.shape[0] != grid.n_x:
        raise ValueError(f"values first axis {values.shape[0]} != n_x {grid.n_x}")
    out = np.sum(values, axis=0) * grid.dx
    if out.ndim == 0:
        return float(out)
    return out


# Lattice direction classes usable by the collision module: every direction is
# parallel to an integer vector m in {-1,0,1}^3.  Reflections along these map
# lattice node pairs to lattice node pairs (axis class unconditionally, face
# diagonals when d.m is even, body diagonals when d.m is divisible by 3).
_AXIS_VECS = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
_FACE_VECS = [(1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1)]
_BODY_VECS = [(1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1)]

# Lebedev 26-point weights (relative, sum to 1): 6 axis, 12 face, 8 body points.
_LEBEDEV26_AXIS = 1.0 / 21.0
_LEBEDEV26_FACE = 4.0 / 105.0
_LEBEDEV26_BODY = 27.0 / 840.0


@dataclass(frozen=True)
class SphereQuadrature:
    """Quadrature over S^2: unit directions and positive weights summing to 4*pi."""

    directions: np.ndarray = field(repr=False)  # (M, 3)
    weights: np.ndarray = field(repr=False)     # (M,)

    def __post_init__(self):
        norms = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("sphere quadrature directions must be unit vectors")
        if np.any(self.weights <= 0.0):
            raise ValueError("sphere quadrature weights must be positive")
        if abs(float(np.sum(self.weights)) - FOUR_PI) > 1e-10:
            raise ValueError("sphere quadrature weights must sum to 4*pi")

    @property
    def n_points(self) -> int:
        return self.directions.shape[0]


def lattice_sphere_quadrature() -> SphereQuadrature:
    """26-point rule on the lattice directions with Lebedev weights.

    Exact for spherical polynomials through degree 7 and the only family whose
    reflections keep collision pairs on the velocity lattice.
    """
    dirs = []
    wts = []
    for sign in (1, -1):
        for m in _AXIS_VECS:
            dirs.append(sign * np.asarray(m, dtype=float))
            wts.append(_LEBEDEV26_AXIS)
        for m in _FACE_VECS:
            dirs.append(sign * np.asarray(m, dtype=float) / np.sqrt(2.0))
            wts.append(_LEBEDEV26_FACE)
        for m in _BODY_VECS:
            dirs.append(sign * np.asarray(m, dtype=float) / np.sqrt(3.0))
            wts.append(_LEBEDEV26_BODY)
    directions = np.asarray(dirs)
    weights = FOUR_PI * np.asarray(wts)
    return SphereQuadrature(directions=directions, weights=weights)


def product_sphere_quadrature(n_cos: int = 4, n_phi: int = 4) -> SphereQuadrature:
    """Product rule: Gauss-Legendre in cos(theta) times uniform in phi."""
    if n_cos * n_phi < 8:
        raise ValueError("product rule needs at least 8 points total")
    x, w = np.polynomial.legendre.leggauss(n_cos)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    sin_t = np.sqrt(1.0 - x ** 2)
    dirs = np.empty((n_cos * n_phi, 3))
    wts = np.empty(n_cos * n_phi)
    k = 0
    for i in range(n_cos):
        for j in range(n_phi):
            dirs[k] = (sin_t[i] * np.cos(phi[j]), sin_t[i] * np.sin(phi[j]), x[i])
            wts[k] = w[i] * (2.0 * np.pi / n_phi)
            k += 1
    return SphereQuadrature(directions=dirs, weights=wts)


def integrate_sphere(values: np.ndarray, quad: SphereQuadrature) -> float:
    """Weighted sum over the quadrature directions."""
    values = np.asarray(values)
    if values.shape[-1] != quad.n_points:
        raise ValueError("values length must match quadrature point count")
    return float(np.sum(values * quad.weights, axis=-1))


def fd1_matrix(n: int, h: float) -> np.ndarray:
    """Dense 4th-order first-derivative matrix on n uniform non-periodic nodes.

    Five-point centered stencils inside, one-sided at the two nodes on each end.
    """
    if n < 5:
        raise ValueError("need at least 5 nodes for the 4th-order stencil")
    D = np.zeros((n, n))
    c_int = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = c_int
    D[0, :5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25]
    D[1, :5] = [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0]
    D[n - 2, n - 5:] = [-1.0 / 12.0, 0.5, -1.5, 5.0 / 6.0, 0.25]
    D[n - 1, n - 5:] = [0.25, -4.0 / 3.0, 3.0, -4.0, 25.0 / 12.0]
    return D / h
