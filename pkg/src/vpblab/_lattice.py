"""Lattice kernels for the hard-sphere collision operator.

The angular integral runs over the 26 directions parallel to integer vectors
m in {-1,0,1}^3 (axis, face-diagonal, body-diagonal classes).  For a node pair
(v, u) with index difference d = (u - v)/dv, the post-collision pair

    v' = v + ((u - v).m / |m|^2) m,     u' = u - ((u - v).m / |m|^2) m

lies on the lattice exactly when s = d.m / |m|^2 is an integer (always for the
axis class, d.m even for face diagonals, d.m = 0 mod 3 for body diagonals).
Only such combinations, with all four nodes inside the box, contribute; the
map (v, u) -> (v', u') is then an involution on admissible pairs, which makes
the discrete operator conserve mass, momentum and energy to rounding and
annihilate Maxwellian pairs exactly.

Every routine here takes distribution arrays shaped (B, n, n, n) with a leading
batch axis (spatial points, basis columns, ...) and broadcasts B=1 against
larger batches.  Sums are grouped per direction line and per reflection shift s,
so one operator application costs O(B n^4) instead of O(B n^6).
"""

from __future__ import annotations

import numpy as np

from .grids import (
    _AXIS_VECS,
    _BODY_VECS,
    _FACE_VECS,
    _LEBEDEV26_AXIS,
    _LEBEDEV26_BODY,
    _LEBEDEV26_FACE,
    FOUR_PI,
)

# Admissibility compensation: face diagonals act on half of all pairs, body
# diagonals on a third; the compensated weights restore the angular measure on
# average while keeping the involution structure (weights constant on orbits).
_COMP_FACE = 2.0
_COMP_BODY = 3.0


def _axis_pair(G1: np.ndarray, G2: np.ndarray, dv: float):
    """(gain, loss_rate) of one axis line acting on the leading velocity axis.

    gain[b,a,:,:]  = sum_p dv|a-p| G1[b,p,:,:] * sum_{q,r} G2[b,a,q,r]
    loss_rate[b,a] = sum_p dv|a-p| sum_{q,r} G2[b,p,q,r]
    """
    n = G1.shape[-1]
    idx = np.arange(n, dtype=float)
    T = dv * np.abs(idx[:, None] - idx[None, :])
    P2 = G2.sum(axis=(2, 3))                      # (B2, n)
    M1 = np.einsum("ap,bpqr->baqr", T, G1)        # (B1, n, n, n)
    gain = M1 * P2[:, :, None, None]
    loss_rate = np.einsum("ap,bp->ba", T, P2)     # (B2, n)
    return gain, loss_rate[:, :, None, None] * np.ones_like(G1[:1, :1])


def _diag_partial_sums(Z: np.ndarray):
    """Cumulative anti-diagonal structure of Z (B, n, n[, r]).

    Returns C with C[b, t, p(, r)] = sum_{p' <= p} Z[b, p', t - p'(, r)]
    (zero where t - p' is out of range), so windowed anti-diagonal sums are
    differences of two gathers.
    """
    n = Z.shape[1]
    p_idx, q_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    sigma = (p_idx + q_idx).ravel()
    p_flat = p_idx.ravel()
    q_flat = q_idx.ravel()
    shape = (Z.shape[0], 2 * n - 1, n) + Z.shape[3:]
    A = np.zeros(shape, dtype=Z.dtype)
    A[:, sigma, p_flat] = Z[:, p_flat, q_flat]
    return np.cumsum(A, axis=2)


def _windowed_diag(C: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """D[b, t(, r)] = sum over p+q = t with p, q in [lo, hi], from cumsums C."""
    n = C.shape[2]
    t = np.arange(2 * n - 1)
    p_hi = np.minimum(hi, t - lo)
    p_lo = np.maximum(lo, t - hi)
    valid = p_hi >= p_lo
    p_hi_c = np.clip(p_hi, 0, n - 1)
    p_lo_c = np.clip(p_lo, 0, n - 1)
    take = lambda idx: np.take_along_axis(
        C, idx.reshape((1, -1, 1) + (1,) * (C.ndim - 3)), axis=2
    )[:, :, 0]
    upper = take(p_hi_c)
    lower = np.where((p_lo_c > 0)[None, :].reshape((1, -1) + (1,) * (C.ndim - 3)),
                     take(np.maximum(p_lo_c - 1, 0)), 0.0)
    D = upper - lower
    mask = valid.reshape((1, -1) + (1,) * (C.ndim - 3))
    return np.where(mask, D, 0.0)


def _face_pair(G1: np.ndarray, G2: np.ndarray, dv: float):
    """(gain, loss) of the canonical face line m = (1, 1, 0) (axes 0, 1 active).

    Returns the gain field and the loss field (already multiplied by G1).
    """
    n = G1.shape[-1]
    B1 = G1.shape[0]
    Z = G2.sum(axis=3)                          # (B2, n, n) passive axis summed
    C = _diag_partial_sums(Z)                   # (B2, 2n-1, n)

    sig2 = np.arange(n)[:, None] + np.arange(n)[None, :]   # a+b
    gain = np.zeros(np.broadcast_shapes(G1.shape, (Z.shape[0], n, n, n)))
    loss = np.zeros_like(gain)

    D = {}
    for s in range(-(n - 1), n):
        if s == 0:
            continue
        lo, hi = max(0, -s), min(n - 1, n - 1 - s)
        D[s] = _windowed_diag(C, lo, hi)        # (B2, 2n-1)

    for s in range(-(n - 1), n):
        if s == 0:
            continue
        ks = np.sqrt(2.0) * dv * abs(s)
        lo, hi = max(0, -s), min(n - 1, n - 1 - s)
        sl = slice(lo, hi + 1)
        sl_sh = slice(lo + s, hi + 1 + s)
        sig_w = sig2[sl, sl]
        gain[:, sl, sl, :] += ks * G1[:, sl_sh, sl_sh, :] * \
            D[s][:, sig_w][:, :, :, None]
        loss[:, sl, sl, :] += ks * G1[:, sl, sl, :] * \
            D[-s][:, sig_w + 2 * s][:, :, :, None]
    return gain, loss


def _body_pair(G1: np.ndarray, G2: np.ndarray, dv: float):
    """(gain, loss) of the canonical body line m = (1, 1, 1)."""
    n = G1.shape[-1]
    C3 = _diag_partial_sums(G2)                 # (B2, 2n-1, n, n): over axes 0,1
    sig3 = (np.arange(n)[:, None, None] + np.arange(n)[None, :, None]
            + np.arange(n)[None, None, :])

    gain = np.zeros(np.broadcast_shapes(G1.shape, (G2.shape[0], n, n, n)))
    loss = np.zeros_like(gain)

    D = {}
    for s in range(-(n - 1), n):
        if s == 0:
            continue
        lo, hi = max(0, -s), min(n - 1, n - 1 - s)
        AD = _windowed_diag(C3, lo, hi)         # (B2, 2n-1, n): p+q diag, r free
        # second stage: sum over r in [lo, hi] of AD[t, r] at sigma = t + r
        B2 = AD.shape[0]
        A2 = np.zeros((B2, 3 * n - 2, 2 * n - 1))
        t_idx, r_idx = np.meshgrid(np.arange(2 * n - 1), np.arange(lo, hi + 1),
                                   indexing="ij")
        A2[:, (t_idx + r_idx).ravel(), t_idx.ravel()] = AD[:, t_idx.ravel(),
                                                           r_idx.ravel()]
        D[s] = A2.sum(axis=2)                   # (B2, 3n-2)

    for s in range(-(n - 1), n):
        if s == 0:
            continue
        ks = np.sqrt(3.0) * dv * abs(s)
        lo, hi = max(0, -s), min(n - 1, n - 1 - s)
        sl = slice(lo, hi + 1)
        sl_sh = slice(lo + s, hi + 1 + s)
        sig_w = sig3[sl, sl, sl]
        gain[:, sl, sl, sl] += ks * G1[:, sl_sh, sl_sh, sl_sh] * D[s][:, sig_w]
        loss[:, sl, sl, sl] += ks * G1[:, sl, sl, sl] * D[-s][:, sig_w + 3 * s]
    return gain, loss


def _oriented(G: np.ndarray, perm, flips) -> np.ndarray:
    """Bring the active axes of G (B, n, n, n) into canonical position."""
    out = np.transpose(G, (0,) + tuple(p + 1 for p in perm))
    for ax in flips:
        out = np.flip(out, axis=ax + 1)
    return out


def _unoriented(G: np.ndarray, perm, flips) -> np.ndarray:
    for ax in flips:
        G = np.flip(G, axis=ax + 1)
    inv = np.argsort(perm)
    return np.transpose(G, (0,) + tuple(p + 1 for p in inv))


# (permutation bringing the line to canonical axes, axes to flip afterwards)
_FACE_ORIENT = {
    (1, 1, 0): ((0, 1, 2), ()),
    (1, -1, 0): ((0, 1, 2), (1,)),
    (1, 0, 1): ((0, 2, 1), ()),
    (1, 0, -1): ((0, 2, 1), (1,)),
    (0, 1, 1): ((1, 2, 0), ()),
    (0, 1, -1): ((1, 2, 0), (1,)),
}
_BODY_ORIENT = {
    (1, 1, 1): ((0, 1, 2), ()),
    (1, 1, -1): ((0, 1, 2), (2,)),
    (1, -1, 1): ((0, 1, 2), (1,)),
    (1, -1, -1): ((0, 1, 2), (1, 2)),
}


def collide_lattice(G1: np.ndarray, G2: np.ndarray, dv: float,
                    compensate: bool = True,
                    classes: tuple[str, ...] = ("axis", "face", "body")) -> np.ndarray:
    """Q(G1, G2) on the lattice; G1, G2 shaped (B, n, n, n) (B=1 broadcasts)."""
    cell = dv ** 3
    out = np.zeros(np.broadcast_shapes(G1.shape, G2.shape))

    if "axis" in classes:
        w_line = 2.0 * FOUR_PI * _LEBEDEV26_AXIS * cell
        for axis in range(3):
            perm = {0: (0, 1, 2), 1: (1, 0, 2), 2: (2, 0, 1)}[axis]
            g1 = _oriented(G1, perm, ())
            g2 = _oriented(G2, perm, ())
            gain, loss_rate = _axis_pair(g1, g2, dv)
            out += _unoriented(w_line * (gain - g1 * loss_rate), perm, ())

    if "face" in classes:
        comp = _COMP_FACE if compensate else 1.0
        w_line = 2.0 * FOUR_PI * _LEBEDEV26_FACE * comp * cell
        for m, (perm, flips) in _FACE_ORIENT.items():
            g1 = _oriented(G1, perm, flips)
            g2 = _oriented(G2, perm, flips)
            gain, loss = _face_pair(g1, g2, dv)
            out += _unoriented(w_line * (gain - loss), perm, flips)

    if "body" in classes:
        comp = _COMP_BODY if compensate else 1.0
        w_line = 2.0 * FOUR_PI * _LEBEDEV26_BODY * comp * cell
        for m, (perm, flips) in _BODY_ORIENT.items():
            g1 = _oriented(G1, perm, flips)
            g2 = _oriented(G2, perm, flips)
            gain, loss = _body_pair(g1, g2, dv)
            out += _unoriented(w_line * (gain - loss), perm, flips)

    return out


def loss_rate_lattice(G2: np.ndarray, dv: float, compensate: bool = True,
                      classes: tuple[str, ...] = ("axis", "face", "body")) -> np.ndarray:
    """Admissible-combination loss rate sum_adm K G2(u), shaped like G2.

    With G2 = omega this is the multiplication part nu(omega) of the discrete
    linearized operator.
    """
    cell = dv ** 3
    ones = np.ones((1,) + G2.shape[1:])
    out = np.zeros_like(G2, dtype=float)

    if "axis" in classes:
        w_line = 2.0 * FOUR_PI * _LEBEDEV26_AXIS * cell
        for axis in range(3):
            perm = {0: (0, 1, 2), 1: (1, 0, 2), 2: (2, 0, 1)}[axis]
            g2 = _oriented(G2, perm, ())
            _, lr = _axis_pair(np.ones((1,) + g2.shape[1:]), g2, dv)
            out += _unoriented(w_line * lr * np.ones_like(g2), perm, ())

    if "face" in classes:
        comp = _COMP_FACE if compensate else 1.0
        w_line = 2.0 * FOUR_PI * _LEBEDEV26_FACE * comp * cell
        for m, (perm, flips) in _FACE_ORIENT.items():
            g2 = _oriented(G2, perm, flips)
            _, loss = _face_pair(np.ones((1,) + g2.shape[1:]), g2, dv)
            out += _unoriented(w_line * loss, perm, flips)

    if "body" in classes:
        comp = _COMP_BODY if compensate else 1.0
        w_line = 2.0 * FOUR_PI * _LEBEDEV26_BODY * comp * cell
        for m, (perm, flips) in _BODY_ORIENT.items():
            g2 = _oriented(G2, perm, flips)
            _, loss = _body_pair(np.ones((1,) + g2.shape[1:]), g2, dv)
            out += _unoriented(w_line * loss, perm, flips)

    return out
