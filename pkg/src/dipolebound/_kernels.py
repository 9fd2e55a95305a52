"""Compiled inner loops of the log-derivative propagators.

All kernels propagate in a coordinate s that increases along the direction of
propagation, solving psi'' = W(s) psi with W = 2M(U - E). A sector is
[s_a, s_b] with midpoint s_c and half-width h; Y is the log-derivative matrix
d psi/ds psi^-1. Node counts follow Johnson's rule: negative eigenvalues of the
matrix inverted in each half-sector plus nodes of the reference solution.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_SERIES = 1e-10


@njit(cache=True)
def _const_ref(p, h):
    """Half-sector propagator elements for a constant reference W = p over width h."""
    x = p * h * h
    if abs(x) < _SERIES:
        return 1.0 / h + p * h / 3.0, 1.0 / h - p * h / 6.0, 0
    if p > 0.0:
        k = math.sqrt(p)
        t = math.exp(-2.0 * k * h)
        y1 = k * (1.0 + t) / (1.0 - t)
        y2 = 2.0 * k * math.sqrt(t) / (1.0 - t)
        return y1, y2, 0
    k = math.sqrt(-p)
    th = k * h
    return k / math.tan(th), k / math.sin(th), int(th / math.pi)


@njit(cache=True)
def _ldl_inverse(Z, Zi):
    """Inverse of symmetric Z by LDL^T without pivoting; returns negative pivots or -1 if unsafe.

    By Sylvester's law of inertia the negative pivots count the negative eigenvalues.
    """
    N = Z.shape[0]
    L = np.zeros((N, N))
    d = np.empty(N)
    scale = 0.0
    for i in range(N):
        for j in range(N):
            scale = max(scale, abs(Z[i, j]))
    neg = 0
    for j in range(N):
        s = Z[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k] * d[k]
        if not abs(s) > 1e-11 * scale:
            return -1
        d[j] = s
        if s < 0.0:
            neg += 1
        L[j, j] = 1.0
        for i in range(j + 1, N):
            t = Z[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k] * d[k]
            L[i, j] = t / s
    # Z^-1 = L^-T D^-1 L^-1; invert unit lower-triangular L in place
    Li = np.zeros((N, N))
    for j in range(N):
        Li[j, j] = 1.0
        for i in range(j + 1, N):
            t = 0.0
            for k in range(j, i):
                t -= L[i, k] * Li[k, j]
            Li[i, j] = t
    for i in range(N):
        for j in range(i, N):
            t = 0.0
            for k in range(j, N):
                t += Li[k, i] * Li[k, j] / d[k]
            Zi[i, j] = t
            Zi[j, i] = t
    return neg


@njit(cache=True)
def _half_step(Y, y1, y2, y4):
    """Y -> diag(y4) - diag(y2) (Y + diag(y1))^-1 diag(y2); returns negative-eigenvalue count."""
    N = Y.shape[0]
    Z = Y.copy()
    for i in range(N):
        Z[i, i] += y1[i]
    Zi = np.empty((N, N))
    neg = _ldl_inverse(Z, Zi)
    if neg < 0:
        w, V = np.linalg.eigh(Z)
        neg = 0
        for i in range(N):
            if w[i] < 0.0:
                neg += 1
        Zi = (V / w) @ V.T
    for i in range(N):
        for j in range(N):
            Y[i, j] = -y2[i] * Zi[i, j] * y2[j]
        Y[i, i] += y4[i]
    return neg


@njit(cache=True)
def _symmetrize(Y):
    N = Y.shape[0]
    dev = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            d = abs(Y[i, j] - Y[j, i])
            s = 0.5 * (Y[i, j] + Y[j, i])
            Y[i, j] = s
            Y[j, i] = s
            scale = max(abs(s), 1.0)
            if d / scale > dev:
                dev = d / scale
    return dev


@njit(cache=True)
def _ld_sector(Y, Wa, Wc, Wb, h):
    """One modified log-derivative sector with a constant diagonal reference (diag Wc)."""
    N = Y.shape[0]
    y1 = np.empty(N)
    y2 = np.empty(N)
    nref = 0
    for i in range(N):
        a, b, n = _const_ref(Wc[i, i], h)
        y1[i] = a
        y2[i] = b
        nref += n
    Uc = Wc.copy()
    for i in range(N):
        Uc[i, i] = 0.0
    for i in range(N):
        for j in range(N):
            Y[i, j] += h / 3.0 * Wa[i, j]
        Y[i, i] -= h / 3.0 * Wc[i, i]
    nodes = _half_step(Y, y1, y2, y1) + nref
    if N > 1:
        M = np.eye(N) - (h * h / 6.0) * Uc
        Y += (4.0 * h / 3.0) * np.linalg.solve(M, Uc)
    nodes += _half_step(Y, y1, y2, y1) + nref
    for i in range(N):
        for j in range(N):
            Y[i, j] += h / 3.0 * Wb[i, j]
        Y[i, i] -= h / 3.0 * Wc[i, i]
    return nodes


@njit(cache=True)
def _analytic_w(R, cent, Wd, c3, c6, c12, two_m, e2m, out):
    N = cent.shape[0]
    r2 = 1.0 / (R * R)
    r3 = r2 / R
    r6 = r3 * r3
    iso = c3 * r3 + c12 * r6 * r6 - c6 * r6
    for i in range(N):
        for j in range(N):
            out[i, j] = two_m * Wd[i, j] * r3
        out[i, i] += cent[i] * r2 + two_m * iso - e2m


@njit(cache=True)
def ld_fixed_analytic(Y, s0, h, n_sect, direction, cent, Wd, c3, c6, c12, two_m, e2m):
    """Fixed-step propagation of an analytic model over ``n_sect`` sectors of width 2h.

    ``direction`` is +1 (outward in R) or -1 (inward); s0 is the starting radius.
    ``cent`` already carries the 1/(2M) so that two_m * cent is L(L+1).
    Returns (nodes, max symmetry deviation, index of first non-finite sector or -1).
    """
    N = Y.shape[0]
    Wa = np.empty((N, N))
    Wc = np.empty((N, N))
    Wb = np.empty((N, N))
    cent2 = cent * two_m
    nodes = 0
    dev = 0.0
    R = s0
    _analytic_w(R, cent2, Wd, c3, c6, c12, two_m, e2m, Wa)
    for k in range(n_sect):
        Rc = s0 + direction * (2 * k + 1) * h
        Rb = s0 + direction * (2 * k + 2) * h
        _analytic_w(Rc, cent2, Wd, c3, c6, c12, two_m, e2m, Wc)
        _analytic_w(Rb, cent2, Wd, c3, c6, c12, two_m, e2m, Wb)
        nodes += _ld_sector(Y, Wa, Wc, Wb, h)
        d = _symmetrize(Y)
        if d > dev:
            dev = d
        if not np.all(np.isfinite(Y)):
            return nodes, dev, k
        Wa[:, :] = Wb
    return nodes, dev, -1


@njit(cache=True)
def ld_fixed_tabulated(Y, W0, e2m, h):
    """Fixed-step propagation with 2M*U tabulated at every half-step point (shape (2n+1, N, N))."""
    N = Y.shape[0]
    n_pts = W0.shape[0]
    nodes = 0
    dev = 0.0
    shift = e2m * np.eye(N)
    for k in range((n_pts - 1) // 2):
        i = 2 * k
        nodes += _ld_sector(Y, W0[i] - shift, W0[i + 1] - shift, W0[i + 2] - shift, h)
        d = _symmetrize(Y)
        if d > dev:
            dev = d
        if not np.all(np.isfinite(Y)):
            return nodes, dev, k
    return nodes, dev, -1


@njit(cache=True)
def ld_variable_tabulated(Y, W0, e2m, hs):
    """Like ld_fixed_tabulated but with a half-width ``hs[k]`` per sector."""
    N = Y.shape[0]
    nodes = 0
    dev = 0.0
    shift = e2m * np.eye(N)
    for k in range(hs.shape[0]):
        i = 2 * k
        nodes += _ld_sector(Y, W0[i] - shift, W0[i + 1] - shift, W0[i + 2] - shift, hs[k])
        d = _symmetrize(Y)
        if d > dev:
            dev = d
        if not np.all(np.isfinite(Y)):
            return nodes, dev, k
    return nodes, dev, -1


@njit(cache=True)
def airy_sectors(Y, Q, Ra, Rb, hs, y1a, y2a, y4a, y1b, y2b, y4b, nref):
    """Linear-reference (Airy) propagation through precomputed local-basis sectors.

    Y enters in the local basis of sector 0 and leaves in the basis of the last
    sector. Q[k] = T_{k-1}^T T_k rotates between consecutive local bases. The
    residual (local W minus the linear reference) vanishes at the sector midpoint,
    so only the endpoint quadrature terms Ra, Rb contribute.
    """
    nodes = 0
    dev = 0.0
    for k in range(hs.shape[0]):
        if k > 0:
            Y[:, :] = Q[k].T @ Y @ Q[k]
        h = hs[k]
        Y += (h / 3.0) * Ra[k]
        nodes += _half_step(Y, y1a[k], y2a[k], y4a[k])
        nodes += _half_step(Y, y1b[k], y2b[k], y4b[k])
        Y += (h / 3.0) * Rb[k]
        nodes += nref[k]
        d = _symmetrize(Y)
        if d > dev:
            dev = d
        if not np.all(np.isfinite(Y)):
            return nodes, dev, k
    return nodes, dev, -1
