"""Finite-volume assembly and tridiagonal solves for the radial operators.

Both operators are discretised on a vertex-centred radial grid: node i owns the
control volume between neighbouring face midpoints, ``vol[i]`` is its measure
divided by the sphere area constant, and ``wf[i]`` is the face weight
r_{i+1/2}^(N-1).  Every kernel fills the residual

    res_i = a0 * vol_i * u_i - rhs_i - (F_{i+1/2} - F_{i-1/2})

and its tridiagonal Jacobian (lo, di, up).  With a0 = 1/dt and rhs = vol*u_old
this is an implicit Euler step; with a0 = 1/(2-p) or 1/(1-m) and rhs = 0 it is
the blow-up elliptic operator.  Dirichlet rows are imposed by the callers.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from . import _accel
from ._accel import njit


def radial_geometry(r: np.ndarray, N: int):
    """Cell widths h, face weights r_f^(N-1) and control volumes for nodes r."""
    r = np.asarray(r, dtype=float)
    h = np.diff(r)
    rf = 0.5 * (r[1:] + r[:-1])
    edges = np.concatenate(([r[0]], rf, [r[-1]]))
    vol = (edges[1:] ** N - edges[:-1] ** N) / N
    return h, rf ** (N - 1), vol


# ---------------------------------------------------------------- p-Laplacian

@njit
def _plap_loop(u, h, wf, vol, p, sigma, a0, rhs, res, lo, di, up):
    n = u.size
    s2r = sigma * sigma
    for i in range(n):
        res[i] = a0 * vol[i] * u[i] - rhs[i]
        di[i] = a0 * vol[i]
        lo[i] = 0.0
        up[i] = 0.0
    for i in range(n - 1):
        D = (u[i + 1] - u[i]) / h[i]
        s2 = D * D + s2r
        g = wf[i] * s2 ** (0.5 * (p - 2.0))
        F = g * D
        dF = g / s2 * ((p - 1.0) * D * D + s2r) / h[i]
        res[i] -= F
        res[i + 1] += F
        di[i] += dF
        di[i + 1] += dF
        up[i] = -dF
        lo[i + 1] = -dF


def _plap_vec(u, h, wf, vol, p, sigma, a0, rhs, res, lo, di, up):
    D = np.diff(u) / h
    s2 = D * D + sigma * sigma
    g = wf * s2 ** (0.5 * (p - 2.0))
    F = g * D
    dF = g / s2 * ((p - 1.0) * D * D + sigma * sigma) / h
    res[:] = a0 * vol * u - rhs
    res[:-1] -= F
    res[1:] += F
    di[:] = a0 * vol
    di[:-1] += dF
    di[1:] += dF
    up[:-1] = -dF
    up[-1] = 0.0
    lo[1:] = -dF
    lo[0] = 0.0


def plap_flux(u, h, wf, p, sigma):
    """Face fluxes r^(N-1) (D^2 + sigma^2)^((p-2)/2) D."""
    D = np.diff(u) / h
    return wf * (D * D + sigma * sigma) ** (0.5 * (p - 2.0)) * D


# --------------------------------------------------------------- porous medium

@njit
def _pme_pair(u, m, floor, shift, slope):
    # (phi(u), phi'(u)) with one pow
    if u >= floor:
        um = u ** m
        return um - shift, m * um / u
    return slope * u, slope


@njit
def _pme_loop(u, h, wf, vol, m, floor, a0, rhs, res, lo, di, up):
    n = u.size
    for i in range(n):
        res[i] = a0 * vol[i] * u[i] - rhs[i]
        di[i] = a0 * vol[i]
        lo[i] = 0.0
        up[i] = 0.0
    shift = (1.0 - m) * floor ** m
    slope = m * floor ** (m - 1.0)
    phi_l, dphi_l = _pme_pair(u[0], m, floor, shift, slope)
    for i in range(n - 1):
        phi_r, dphi_r = _pme_pair(u[i + 1], m, floor, shift, slope)
        w = wf[i] / h[i]
        F = w * (phi_r - phi_l)
        res[i] -= F
        res[i + 1] += F
        di[i] += w * dphi_l
        up[i] = -w * dphi_r
        di[i + 1] += w * dphi_r
        lo[i + 1] = -w * dphi_l
        phi_l = phi_r
        dphi_l = dphi_r


def pme_phi(u, m, floor):
    """u^m with the diffusivity m u^(m-1) capped at its value at ``floor`` (C^1 join)."""
    u = np.asarray(u, dtype=float)
    safe = np.maximum(u, floor)
    return np.where(u >= floor, safe ** m - (1.0 - m) * floor ** m, m * floor ** (m - 1.0) * u)


def pme_dphi(u, m, floor):
    u = np.asarray(u, dtype=float)
    return m * np.maximum(u, floor) ** (m - 1.0)


def _pme_vec(u, h, wf, vol, m, floor, a0, rhs, res, lo, di, up):
    phi = pme_phi(u, m, floor)
    dphi = pme_dphi(u, m, floor)
    w = wf / h
    F = w * np.diff(phi)
    res[:] = a0 * vol * u - rhs
    res[:-1] -= F
    res[1:] += F
    di[:] = a0 * vol
    di[:-1] += w * dphi[:-1]
    di[1:] += w * dphi[1:]
    up[:-1] = -w * dphi[1:]
    up[-1] = 0.0
    lo[1:] = -w * dphi[:-1]
    lo[0] = 0.0


def pme_flux(u, h, wf, m, floor):
    return wf / h * np.diff(pme_phi(u, m, floor))


# ----------------------------------------------------------------- tridiagonal

@njit
def _thomas_loop(lo, di, up, b):
    n = b.size
    c = np.empty(n)
    d = np.empty(n)
    x = np.empty(n)
    c[0] = up[0] / di[0]
    d[0] = b[0] / di[0]
    for i in range(1, n):
        piv = di[i] - lo[i] * c[i - 1]
        c[i] = up[i] / piv
        d[i] = (b[i] - lo[i] * d[i - 1]) / piv
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _thomas_vec(lo, di, up, b):
    ab = np.empty((3, b.size))
    ab[0, 0] = 0.0
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    ab[2, -1] = 0.0
    return solve_banded((1, 1), ab, b, overwrite_ab=True, check_finite=False)


# ------------------------------------------------------------------- dispatch

def assemble_plap(u, h, wf, vol, p, sigma, a0, rhs, res, lo, di, up):
    if _accel.get_backend() == "numba":
        _plap_loop(u, h, wf, vol, p, sigma, a0, rhs, res, lo, di, up)
    else:
        _plap_vec(u, h, wf, vol, p, sigma, a0, rhs, res, lo, di, up)


def assemble_pme(u, h, wf, vol, m, floor, a0, rhs, res, lo, di, up):
    if _accel.get_backend() == "numba":
        _pme_loop(u, h, wf, vol, m, floor, a0, rhs, res, lo, di, up)
    else:
        _pme_vec(u, h, wf, vol, m, floor, a0, rhs, res, lo, di, up)


def solve_tridiagonal(lo, di, up, b):
    """Solve the system with sub-diagonal lo[1:], diagonal di and super-diagonal up[:-1]."""
    if _accel.get_backend() == "numba":
        return _thomas_loop(lo, di, up, b)
    return _thomas_vec(lo, di, up, b)


class Operator:
    """Residual/Jacobian assembly for one model on one grid, with reusable buffers."""

    def __init__(self, model, r, N, sigma=0.0, floor=0.0):
        self.model = model
        self.r = np.asarray(r, dtype=float)
        self.h, self.wf, self.vol = radial_geometry(self.r, N)
        n = self.r.size
        self.res = np.empty(n)
        self.lo = np.empty(n)
        self.di = np.empty(n)
        self.up = np.empty(n)
        self.sigma = float(sigma)
        self.floor = float(floor)

    def assemble(self, u, a0, rhs):
        if self.model.is_plaplace:
            assemble_plap(u, self.h, self.wf, self.vol, self.model.exponent, self.sigma,
                          a0, rhs, self.res, self.lo, self.di, self.up)
        else:
            assemble_pme(u, self.h, self.wf, self.vol, self.model.exponent, self.floor,
                         a0, rhs, self.res, self.lo, self.di, self.up)

    def flux(self, u):
        if self.model.is_plaplace:
            return plap_flux(u, self.h, self.wf, self.model.exponent, self.sigma)
        return pme_flux(u, self.h, self.wf, self.model.exponent, self.floor)

    def residual_scale(self, u, a0, rhs):
        """Magnitude of the terms in each residual row, for relative residuals."""
        F = np.abs(self.flux(u))
        s = np.abs(a0 * self.vol * u) + np.abs(rhs)
        s[:-1] += F
        s[1:] += F
        return s
