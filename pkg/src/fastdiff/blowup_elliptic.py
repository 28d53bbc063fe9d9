"""Radial boundary blow-up solutions of -Delta_p v + v/(2-p) = 0 and Delta w^m = w/(1-m).

The blow-up condition is replaced by a Dirichlet value c * delta^(-k) at
distance ``delta`` from each blow-up sphere (the leading asymptote), and the
exterior problem is truncated at r_inf with v = 0.  The discrete problem is
solved by damped Newton iteration in z = log v, which keeps iterates positive
across the many decades between the boundary layer and the interior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .domains import GridSpec, RadialDomain, RadialField, Shape
from .kernels import Operator, solve_tridiagonal
from .models import ConvergenceError, DiffusionModel, ParameterError, blowup_constant

DEFAULT_BLOWUP_GRID = GridSpec(n_space=2000, refinement_ratio=1.05)


def _geom(d0, d1, n):
    return np.geomspace(d0, d1, n)


def blowup_grid(domain: RadialDomain, delta: float, n: int, max_ratio: float, r_infinity: float):
    """Nodes graded geometrically away from each boundary sphere, starting at distance delta."""
    lo_b = hi_b = None
    if domain.shape is Shape.BALL:
        rho = domain.radii[0]
        if not delta < rho:
            raise ParameterError("offset must be smaller than the ball radius")
        d = _geom(delta, rho, n)
        r = np.maximum(rho - d[::-1], 0.0)
        r[0] = 0.0
        hi_b = rho
    elif domain.shape is Shape.EXTERIOR_BALL:
        rho = domain.radii[0]
        r = rho + _geom(delta, r_infinity - rho, n)
        lo_b = rho
    else:
        a, b = domain.radii
        w = 0.5 * (b - a)
        if not delta < w:
            raise ParameterError("offset must be smaller than half the annulus width")
        n1 = n // 2 + 1
        left = a + _geom(delta, w, n1)
        right = b - _geom(delta, w, n - n1 + 1)[::-1]
        r = np.concatenate((left, right[1:]))
        lo_b, hi_b = a, b
    widths = np.diff(r)
    ratios = np.maximum(widths[1:] / widths[:-1], widths[:-1] / widths[1:])
    if ratios.max() > max_ratio * (1 + 1e-9):
        raise ParameterError(f"grid width ratio {ratios.max():.4f} exceeds {max_ratio}; raise n_space")
    return r, lo_b, hi_b


def _elliptic_operator(model, r, N, sigma, vscale):
    if model.is_plaplace:
        return Operator(model, r, N, sigma=sigma)
    return Operator(model, r, N, floor=1e-30 * vscale)


def solve_blowup(model: DiffusionModel, domain: RadialDomain, offset: float = 1e-4,
                 grid: Optional[GridSpec] = None, r_infinity: Optional[float] = None,
                 tol: float = 1e-10, max_iter: int = 200) -> RadialField:
    """Radial boundary blow-up solution with the blow-up truncated at distance ``offset``.

    Returns a RadialField whose meta carries the final scaled residual, the
    iteration count, delta and r_inf.  If Newton from the asymptotic initial
    guess fails, the solve is repeated by continuation from a larger offset.
    """
    if not offset > 0:
        raise ParameterError("offset must be positive")
    grid = grid or DEFAULT_BLOWUP_GRID
    if domain.shape is Shape.EXTERIOR_BALL:
        r_infinity = 100.0 * domain.radii[0] if r_infinity is None else float(r_infinity)
        if not r_infinity > domain.radii[0] + 10 * offset:
            raise ParameterError("r_infinity must lie well outside the ball")
    else:
        r_infinity = None
    r, lo_b, hi_b = blowup_grid(domain, offset, grid.n_space, grid.refinement_ratio, r_infinity)
    c = blowup_constant(model)
    k = model.decay_exponent
    vb = c * offset ** (-k)
    L = domain.scale
    sigma = grid.regularization_sigma or 1e-12 * c * L ** (-k - 1.0)
    op = _elliptic_operator(model, r, domain.dimension, sigma, vb)

    dists = [np.abs(r - b) for b in (lo_b, hi_b) if b is not None]
    dist = np.minimum.reduce(dists)
    fixed = np.zeros(r.size, dtype=bool)
    v = c * np.maximum(dist, offset) ** (-k)
    if lo_b is not None:
        fixed[0] = True
        v[0] = vb
    if hi_b is not None:
        fixed[-1] = True
        v[-1] = vb
    if domain.shape is Shape.EXTERIOR_BALL:
        fixed[-1] = True
        v[-1] = 0.0
        v[:-1] *= 1.0 - (r[:-1] - r[0]) / (r[-1] - r[0])
    try:
        v, info = _newton_log(op, model.elliptic_coefficient, v, fixed, tol, max_iter)
    except ConvergenceError:
        v, info = _continuation(model, domain, offset, grid, r_infinity, tol, max_iter, op, fixed, r, lo_b, hi_b)
    meta = {
        "model": model.to_dict(), "delta": offset, "r_infinity": r_infinity, "sigma": sigma,
        "negative_clamped": False, **info,
    }
    return RadialField(r, v, domain, None, meta)


def _scaled_residual(op, a0, v, fixed):
    zero = np.zeros_like(v)
    op.assemble(v, a0, zero)
    scale = op.residual_scale(v, a0, zero)
    res = op.res.copy()
    res[fixed] = 0.0
    return res / scale


def _newton_log(op, a0, v, fixed, tol, max_iter):
    v = v.copy()
    free = ~fixed
    zero = np.zeros_like(v)
    rel = _scaled_residual(op, a0, v, fixed)
    merit = float(np.linalg.norm(rel))
    for it in range(1, max_iter + 1):
        op.assemble(v, a0, zero)
        res = op.res.copy()
        lo, di, up = op.lo.copy(), op.di.copy(), op.up.copy()
        # chain rule for z = log v: scale each column by v_j
        di *= v
        lo[1:] *= v[:-1]
        up[:-1] *= v[1:]
        res[fixed] = 0.0
        di[fixed] = 1.0
        lo[fixed] = 0.0
        up[fixed] = 0.0
        dz = solve_tridiagonal(lo, di, up, -res)
        dz[fixed] = 0.0
        if not np.all(np.isfinite(dz)):
            raise ConvergenceError("non-finite Newton step")
        step = min(1.0, 2.0 / max(float(np.max(np.abs(dz))), 1e-300))
        for _ in range(31):
            trial = v.copy()
            trial[free] = v[free] * np.exp(step * dz[free])
            rel_t = _scaled_residual(op, a0, trial, fixed)
            merit_t = float(np.linalg.norm(rel_t))
            if np.isfinite(merit_t) and merit_t < merit:
                break
            step *= 0.5
        else:
            if float(np.max(np.abs(rel))) <= 10 * tol:
                return v, {"residual": float(np.max(np.abs(rel))), "iterations": it}
            raise ConvergenceError("line search failed to reduce the residual")
        v, rel, merit = trial, rel_t, merit_t
        if float(np.max(np.abs(rel))) <= tol or float(np.max(np.abs(step * dz))) < 1e-14:
            return v, {"residual": float(np.max(np.abs(rel))), "iterations": it}
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {np.max(np.abs(rel)):.3g})")


def _continuation(model, domain, offset, grid, r_infinity, tol, max_iter, op, fixed, r, lo_b, hi_b):
    """Solve for a sequence of shrinking offsets, interpolating each solution in log v."""
    start = min(1e-2 * domain.scale, 0.1 * domain.scale)
    offsets = list(np.geomspace(start, offset, max(2, int(math.log10(start / offset)) + 2))) if start > offset else [offset]
    field = None
    for off in offsets:
        f = solve_blowup(model, domain, off, grid, r_infinity, tol, max_iter) if field is None and off != offset else None
        field = f or field
    if field is None:
        raise ConvergenceError("continuation could not start")
    c, k = blowup_constant(model), model.decay_exponent
    v = np.exp(np.interp(r, field.r, np.log(np.maximum(field.values, 1e-300))))
    dists = np.minimum.reduce([np.abs(r - b) for b in (lo_b, hi_b) if b is not None])
    near = dists < 2 * field.meta["delta"]
    v[near] = c * np.maximum(dists[near], offset) ** (-k)
    if lo_b is not None:
        v[0] = c * offset ** (-k)
    if hi_b is not None:
        v[-1] = c * offset ** (-k)
    if domain.shape is Shape.EXTERIOR_BALL:
        v[-1] = 0.0
    v, info = _newton_log(op, model.elliptic_coefficient, v, fixed, tol, max_iter)
    info["continuation"] = [float(o) for o in offsets]
    return v, info


def elliptic_residual(field: RadialField, model: DiffusionModel) -> np.ndarray:
    """Scaled residual of the discrete blow-up equation at the free nodes of ``field``."""
    vb = float(np.max(field.values))
    sigma = field.meta.get("sigma", 0.0)
    op = _elliptic_operator(model, field.r, field.domain.dimension, sigma, vb)
    fixed = np.zeros(field.r.size, dtype=bool)
    if field.domain.shape is not Shape.BALL:
        fixed[0] = True
    fixed[-1] = True
    return _scaled_residual(op, model.elliptic_coefficient, np.array(field.values), fixed)[~fixed]


@dataclass(frozen=True, eq=False)
class BoundaryRate:
    """v * d^k against the distance d to one blow-up sphere."""

    boundary_radius: float
    d: np.ndarray
    ratio: np.ndarray

    @property
    def monotone(self) -> bool:
        """True when the ratio approaches its boundary value monotonically."""
        dr = np.diff(self.ratio)
        return bool(np.all(dr >= 0) or np.all(dr <= 0))


def boundary_rate_report(field: RadialField, model: DiffusionModel, d_max: Optional[float] = None) -> list:
    """Tabulate v * d^k against d near each blow-up sphere, nearest node first."""
    dom = field.domain
    k = model.decay_exponent
    d_max = 0.1 * dom.scale if d_max is None else d_max
    spheres = dom.radii
    out = []
    for b in spheres:
        d = np.abs(field.r - b)
        other = [abs(field.r - o) for o in spheres if o != b]
        sel = d <= d_max
        if other:
            sel &= d < np.minimum.reduce(other)
        sel &= field.values > 0
        idx = np.nonzero(sel)[0]
        idx = idx[np.argsort(d[idx])]
        out.append(BoundaryRate(b, d[idx], field.values[idx] * d[idx] ** k))
    return out


def shoot_ball_blowup(model: DiffusionModel, rho: float, N: int, tol: float = 1e-11) -> float:
    """Centre value v(0) of the exact blow-up solution on the ball of radius rho, by shooting.

    The radial ODE is integrated from the centre with v(0) = a, v'(0) = 0 until
    v blows up; the blow-up radius decreases in a, and bisection on log(a) puts
    it at rho.  Independent of the finite-volume solver and of any truncation.
    """
    if not rho > 0:
        raise ParameterError("rho must be positive")
    e = model.exponent
    coef = model.elliptic_coefficient

    if model.is_plaplace:
        def rhs(r, y):
            v, G = y
            vp = (max(G, 0.0) / r ** (N - 1)) ** (1.0 / (e - 1.0))
            return [vp, r ** (N - 1) * coef * v]

        def start(a, r0):
            G0 = coef * a * r0 ** N / N
            v0 = a + (e - 1.0) / e * (coef * a / N) ** (1.0 / (e - 1.0)) * r0 ** (e / (e - 1.0))
            return [v0, G0]
    else:
        def rhs(r, y):
            W, G = y
            return [G / r ** (N - 1), r ** (N - 1) * coef * max(W, 0.0) ** (1.0 / e)]

        def start(a, r0):
            W0 = a ** e
            G0 = coef * a * r0 ** N / N
            return [W0 + coef * a * r0 ** 2 / (2 * N), G0]

    c, k = blowup_constant(model), model.decay_exponent

    def blowup_radius(a):
        # stop once v reaches 1e12 a and add the asymptotic remaining distance (c/v)^(1/k)
        r0 = 1e-8 * rho
        v_stop = 1e12 * a
        y_stop = v_stop if model.is_plaplace else v_stop ** e

        def ev(r, y):
            return y[0] - y_stop
        ev.terminal = True
        sol = solve_ivp(rhs, (r0, 1e3 * rho), start(a, r0), method="DOP853", rtol=1e-12, atol=1e-300, events=ev)
        if sol.t_events[0].size:
            return float(sol.t_events[0][0]) + (c / v_stop) ** (1.0 / k)
        if sol.status < 0:
            raise ConvergenceError(f"shooting integration failed: {sol.message}")
        return math.inf

    a_ref = c * rho ** (-k)
    lo, hi = a_ref, a_ref
    while blowup_radius(lo) < rho:
        lo *= 0.5
    while blowup_radius(hi) > rho:
        hi *= 2.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if blowup_radius(mid) > rho:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < tol:
            return math.sqrt(lo * hi)
    raise ConvergenceError("blow-up shooting did not converge")
