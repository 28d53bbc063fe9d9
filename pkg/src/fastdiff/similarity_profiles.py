"""One-dimensional similarity profiles of both fast diffusion equations.

p-Laplacian profiles are explicit up to one scalar:

    phi(xi) = top - K * int_0^xi (eta^2 -/+ 2 p eps S(eta) + lam)^(-q) d eta,
    q = 1/(2-p),  K = ((2-p)/(2p(p-1)))^(-q),  S(eta) = int_0^eta sqrt(1+s^2) ds,

with ``lam`` fixed by phi(inf) = 0 (:func:`solve_lambda`).  Porous-medium
profiles solve (f^m)'' + xi f'/2 = 0 with f(0) = gamma (half line) or
f(-inf) = gamma (whole line) and f(inf) = 0; they are computed by integrating
inward from the decaying tail (:func:`solve_pme_profile`), with forward
shooting on f'(0) kept as an independent check (:func:`shoot_pme_slope`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .models import ConvergenceError, DiffusionModel, ParameterError, blowup_constant


class Side(str, Enum):
    HALF_LINE = "half_line"
    WHOLE_LINE = "whole_line"


class Perturbation(str, Enum):
    NONE = "none"
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class ProfileVariant:
    """Half line (boundary data) or whole line (Cauchy data), optionally perturbed by +/- eps."""

    side: Side = Side.HALF_LINE
    perturbation: Perturbation = Perturbation.NONE
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "perturbation", Perturbation(self.perturbation))
        eps = float(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if self.perturbation is Perturbation.NONE:
            if eps != 0.0:
                raise ParameterError("an unperturbed variant carries epsilon = 0")
        elif not 0.0 < eps < 0.25:
            raise ParameterError(f"perturbation needs 0 < eps < 1/4, got {eps}")

    @classmethod
    def plus(cls, eps: float, side: Side = Side.HALF_LINE) -> "ProfileVariant":
        return cls(side, Perturbation.PLUS, eps)

    @classmethod
    def minus(cls, eps: float, side: Side = Side.HALF_LINE) -> "ProfileVariant":
        return cls(side, Perturbation.MINUS, eps)

    @property
    def sign(self) -> int:
        return {Perturbation.NONE: 0, Perturbation.PLUS: 1, Perturbation.MINUS: -1}[self.perturbation]

    @property
    def whole_line(self) -> bool:
        return self.side is Side.WHOLE_LINE

    def unperturbed(self) -> "ProfileVariant":
        return ProfileVariant(self.side)

    def to_dict(self) -> dict:
        return {"side": self.side.value, "perturbation": self.perturbation.value, "epsilon": self.epsilon}


@dataclass(frozen=True, eq=False)
class SimilarityProfile:
    """A tabulated strictly decreasing profile with exact slopes at the nodes.

    Evaluation uses cubic Hermite interpolation inside the grid, the power-law
    tail ``values[-1] * (xi_max/xi)^k`` to the right, and the left limit
    ``plateau`` to the left of a whole-line grid.
    """

    model: DiffusionModel
    variant: ProfileVariant
    beta: float
    lam: Optional[float]
    xi: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    blowup_constant: float
    decay_exponent: float
    asymptote: float
    plateau: float
    eta: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("xi", "values", "slopes"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def top(self) -> float:
        """Supremum of the profile: beta, beta + eps or beta - eps."""
        return self.beta + self.variant.sign * self.variant.epsilon

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.xi, self.values, self.slopes, extrapolate=False)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        lo, hi = self.xi[0], self.xi[-1]
        left = xi < lo
        right = xi > hi
        mid = ~(left | right)
        if np.any(left):
            if not self.variant.whole_line:
                raise ParameterError("half-line profile evaluated at negative xi")
            out[left] = self.plateau
        out[mid] = self._spline(xi[mid])
        out[right] = self.values[-1] * (hi / xi[right]) ** self.decay_exponent
        return out if out.ndim else float(out)

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros_like(xi)
        lo, hi = self.xi[0], self.xi[-1]
        mid = (xi >= lo) & (xi <= hi)
        right = xi > hi
        out[mid] = self._spline(xi[mid], 1)
        k = self.decay_exponent
        out[right] = -k * self.values[-1] * hi ** k * xi[right] ** (-k - 1.0)
        return out if out.ndim else float(out)

    def metadata(self) -> dict:
        return {
            "kind": self.model.kind.value,
            "exponent": self.model.exponent,
            "variant": self.variant.to_dict(),
            "beta": self.beta,
            "epsilon": self.variant.epsilon,
            "lambda": self.lam,
            "eta": self.eta,
            "blowup_constant": self.blowup_constant,
            "decay_exponent": self.decay_exponent,
            "asymptote": self.asymptote,
            "plateau": self.plateau,
            "n": int(self.xi.size),
            **self.meta,
        }

    def to_csv(self, path):
        from .io import write_csv
        return write_csv(path, ("xi", "value"), (self.xi, self.values))


def profile_asymptote_ratio(profile: SimilarityProfile, xi):
    """value(xi) * xi^k, interpolated; xi must lie in the positive tabulated range."""
    x = np.asarray(xi, dtype=float)
    if np.any(x <= 0) or np.any(x < profile.xi[0]) or np.any(x > profile.xi[-1]):
        raise ParameterError("xi outside the positive tabulated range of the profile")
    return profile(x) * x ** profile.decay_exponent


def tail_limit(model: DiffusionModel, variant: ProfileVariant, eta: Optional[float] = None) -> float:
    """Limit of value * xi^k for the given profile family."""
    c = blowup_constant(model)
    s = variant.sign
    if s == 0:
        return c
    if model.is_plaplace:
        p = model.exponent
        return c * (1.0 - s * p * variant.epsilon) ** (-1.0 / (2.0 - p))
    m = model.exponent
    eta = default_eta(variant.epsilon) if eta is None else eta
    return c * (1.0 - s * 2.0 * eta) ** (-1.0 / (1.0 - m))


def geometric_xi_grid(a: float, xi_max: float, n: int, whole_line: bool,
                      left: Optional[float] = None, left_uniform: bool = False) -> np.ndarray:
    """Nodes a*(exp(i h) - 1), dense near 0, up to xi_max.

    For the whole line half of the nodes cover [-left, 0) (default left = xi_max),
    either mirrored-geometric or uniform when ``left_uniform``.
    """
    if not xi_max > a > 0:
        raise ParameterError("need 0 < a < xi_max")
    n_pos = n // 2 + 1 if whole_line else n
    h = math.log1p(xi_max / a) / (n_pos - 1)
    pos = a * np.expm1(h * np.arange(n_pos))
    pos[-1] = xi_max
    if not whole_line:
        return pos
    left = xi_max if left is None else float(left)
    n_neg = n - n_pos
    if left_uniform:
        neg = np.linspace(left, 0.0, n_neg + 1)[:-1]
    else:
        hl = math.log1p(left / a) / n_neg
        neg = a * np.expm1(hl * np.arange(n_neg, 0, -1))
    return np.concatenate((-neg, pos))


def _nonuniform_derivatives(x, y):
    """Second-order first and second derivatives at interior nodes of a nonuniform grid."""
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    y0, y1, y2 = y[:-2], y[1:-1], y[2:]
    d1 = (-h1 / (h0 * (h0 + h1))) * y0 + ((h1 - h0) / (h0 * h1)) * y1 + (h0 / (h1 * (h0 + h1))) * y2
    d2 = 2.0 * (y0 / (h0 * (h0 + h1)) - y1 / (h0 * h1) + y2 / (h1 * (h0 + h1)))
    return d1, d2


def _trim_plateau(xi, values, slopes, plateau, rel=1e-11):
    """Drop whole-line nodes so close to the plateau that values stop being resolvable."""
    keep = (plateau - values) > rel * plateau
    keep |= xi >= 0
    first = int(np.argmax(keep))
    return xi[first:], values[first:], slopes[first:]


# ============================================================== p-Laplacian

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def plaplace_constants(p: float):
    """(q, K) with q = 1/(2-p) and K = ((2-p)/(2p(p-1)))^(-q)."""
    q = 1.0 / (2.0 - p)
    return q, ((2.0 - p) / (2.0 * p * (p - 1.0))) ** (-q)


def arc_integral(eta):
    """S(eta) = int_0^eta sqrt(1+s^2) ds."""
    eta = np.asarray(eta, dtype=float)
    return 0.5 * (eta * np.sqrt(1.0 + eta * eta) + np.arcsinh(eta))


def _plap_base(eta, lam, p, eps, sign):
    return eta * eta - sign * 2.0 * p * eps * arc_integral(eta) + lam


def _plap_lambda_floor(p, variant):
    """Smallest admissible lambda (the base must stay positive on the integration range)."""
    s, eps = variant.sign, variant.epsilon
    if s == 0 or (s < 0 and not variant.whole_line):
        return 0.0, None
    pe = p * eps
    eta_star = pe / math.sqrt(1.0 - pe * pe)
    g = eta_star ** 2 - 2.0 * pe * float(arc_integral(eta_star))
    # for the whole line and the minus sign the minimum sits at -eta_star
    return -g, (eta_star if s > 0 else -eta_star)


def _quad(f, a, b, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            if points is not None and math.isfinite(a) and math.isfinite(b):
                pts = [x for x in points if a < x < b]
                val, err = quad(f, a, b, points=pts or None, epsabs=0.0, epsrel=1e-12, limit=400)
            else:
                val, err = quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=400)
        except IntegrationWarning as exc:
            raise ConvergenceError(f"quadrature did not converge on [{a}, {b}]: {exc}") from exc
    if not math.isfinite(val) or err > 1e-9 * abs(val) + 1e-300:
        raise ConvergenceError(f"quadrature error estimate {err:g} too large for value {val:g}")
    return val


def plaplace_drop(model: DiffusionModel, variant: ProfileVariant, lam: float) -> float:
    """K * integral of the base^(-q) over the profile's line: the total drop of the profile."""
    p = model.exponent
    q, K = plaplace_constants(p)
    eps, sign = variant.epsilon, variant.sign
    floor, peak = _plap_lambda_floor(p, variant)
    if not lam > floor:
        raise ParameterError(f"lambda={lam} not above its admissible floor {floor}")

    def f(x):
        return _plap_base(x, lam, p, eps, sign) ** (-q)

    L = 10.0 * math.sqrt(lam + 1.0)
    pts = None if peak is None else [peak]
    total = _quad(f, 0.0, L, pts) + _quad(f, L, math.inf)
    if variant.whole_line:
        total += _quad(f, -L, 0.0, pts) + _quad(f, -math.inf, -L)
    return K * total


def solve_lambda(model: DiffusionModel, variant: ProfileVariant = ProfileVariant(), beta: float = 1.0,
                 tol: float = 1e-10, max_iter: int = 300, max_doublings: int = 40) -> float:
    """The shooting constant lambda making the p-Laplace profile vanish at infinity.

    The drop lambda -> K*int(base^(-q)) is strictly decreasing, infinite at the
    admissible floor and zero at infinity.  Bisection runs on log(lambda - floor)
    after a doubling/halving search for a bracket from lambda - floor = 1.
    """
    if not model.is_plaplace:
        raise ParameterError("solve_lambda applies to the p-Laplacian only")
    if not beta > 0 or not math.isfinite(beta):
        raise ParameterError(f"beta must be positive, got {beta}")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    target = beta + variant.sign * variant.epsilon
    if not target > 0:
        raise ParameterError(f"beta - eps must be positive, got {target}")
    floor, _ = _plap_lambda_floor(model.exponent, variant)

    def resid(mu):
        return (plaplace_drop(model, variant, floor + mu) - target) / target

    lo = hi = 1.0
    r = resid(1.0)
    if abs(r) <= tol:
        return floor + 1.0
    steps = 0
    if r > 0:  # drop too large: increase lambda
        while r > 0:
            lo, hi = hi, hi * 2.0
            steps += 1
            if steps > max_doublings:
                raise ConvergenceError("no lambda bracket found below 2^max_doublings")
            r = resid(hi)
    else:
        while r < 0:
            lo, hi = lo * 0.5, lo
            steps += 1
            if steps > max_doublings:
                raise ConvergenceError("no lambda bracket found above 2^-max_doublings")
            r = resid(lo)
    if abs(r) <= tol:
        return floor + (hi if r < 0 else lo)
    # invariant: resid(lo) > 0 > resid(hi)
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        r = resid(mid)
        if abs(r) <= tol:
            return floor + mid
        if r > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 4e-16:
            break
    raise ConvergenceError(f"lambda bisection stalled with relative residual {abs(r):.3g} > tol={tol:g}")


def tabulate_plaplace_profile(model: DiffusionModel, variant: ProfileVariant = ProfileVariant(),
                              beta: float = 1.0, lam: Optional[float] = None, xi_max: float = 1e4,
                              n: int = 4096, tol: float = 1e-10, ode_tol: float = 1e-3) -> SimilarityProfile:
    """Tabulate phi, psi or their perturbations on a geometric grid.

    Values are K times the integral from xi to infinity, accumulated panel by
    panel (16-point Gauss-Legendre per cell) from the right, so the tail keeps
    full relative precision; the part beyond xi_max is an adaptive quadrature.
    """
    if not model.is_plaplace:
        raise ParameterError("tabulate_plaplace_profile applies to the p-Laplacian only")
    if n < 8:
        raise ParameterError("n must be at least 8")
    if lam is None:
        lam = solve_lambda(model, variant, beta, tol)
    p = model.exponent
    q, K = plaplace_constants(p)
    eps, sign = variant.epsilon, variant.sign
    floor, _ = _plap_lambda_floor(p, variant)
    if not lam > floor:
        raise ParameterError(f"lambda={lam} not above its admissible floor {floor}")
    target = beta + sign * eps

    left = None
    if variant.whole_line:
        c_left = blowup_constant(model) * (1.0 + sign * p * eps) ** (-q)
        left = min(xi_max, max(10.0 * math.sqrt(lam), (c_left / (1e-12 * target)) ** (1.0 / model.decay_exponent)))
    xi = geometric_xi_grid(1e-2 * math.sqrt(lam), xi_max, n, variant.whole_line, left)
    half = 0.5 * np.diff(xi)
    mid = 0.5 * (xi[1:] + xi[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    panels = half * (_plap_base(nodes, lam, p, eps, sign) ** (-q) @ _GL_WEIGHTS)
    tail = _quad(lambda x: _plap_base(x, lam, p, eps, sign) ** (-q), xi_max, math.inf)
    suffix = np.concatenate((np.cumsum(panels[::-1])[::-1], [0.0])) + tail
    values = K * suffix
    slopes = -K * _plap_base(xi, lam, p, eps, sign) ** (-q)

    if variant.whole_line:
        left_tail = _quad(lambda x: _plap_base(x, lam, p, eps, sign) ** (-q), -math.inf, xi[0])
        plateau = K * (suffix[0] + left_tail)
        xi, values, slopes = _trim_plateau(xi, values, slopes, plateau)
    else:
        plateau = values[0]
    if abs(plateau - target) > max(100.0 * tol, 1e-9) * target:
        raise ConvergenceError(f"tabulated drop {plateau!r} misses the plateau {target!r}")

    prof = SimilarityProfile(
        model=model, variant=variant, beta=float(beta), lam=float(lam), xi=xi, values=values,
        slopes=slopes, blowup_constant=blowup_constant(model), decay_exponent=model.decay_exponent,
        asymptote=tail_limit(model, variant), plateau=float(plateau),
    )
    _check_profile(prof)
    res = plaplace_ode_residual(prof)
    if res.max() > ode_tol:
        raise ConvergenceError(f"profile ODE residual {res.max():.3g} exceeds {ode_tol:g}")
    prof.meta["ode_residual"] = float(res.max())
    return prof


def plaplace_ode_residual(profile: SimilarityProfile) -> np.ndarray:
    """Relative finite-difference residual of the profile ODE at interior nodes.

    (p-1)|phi'|^(p-2) phi'' + phi' (xi -/+ p eps sqrt(1+xi^2)) / p, divided by
    |phi'| (|xi| + p eps sqrt(1+xi^2) + sqrt(lambda)) / p.
    """
    p = profile.model.exponent
    eps, sign = profile.variant.epsilon, profile.variant.sign
    x = profile.xi
    d1, d2 = _nonuniform_derivatives(x, profile.values)
    xm = x[1:-1]
    drift = xm - sign * p * eps * np.sqrt(1.0 + xm * xm)
    res = (p - 1.0) * np.abs(d1) ** (p - 2.0) * d2 + d1 * drift / p
    scale = np.abs(d1) * (np.abs(xm) + p * eps * np.sqrt(1.0 + xm * xm) + math.sqrt(profile.lam)) / p
    return (np.abs(res) / scale)[_resolvable(x, profile.values)]


def _resolvable(x, v, rel=1e-7):
    """Interior nodes whose neighbour differences stand well above rounding of the values."""
    dv = np.minimum(np.abs(v[1:-1] - v[:-2]), np.abs(v[2:] - v[1:-1]))
    return dv > rel * np.abs(v[1:-1])


def _check_profile(prof: SimilarityProfile):
    v = prof.values
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ConvergenceError("profile values must be positive and finite")
    if np.any(np.diff(v) >= 0):
        raise ConvergenceError("profile values are not strictly decreasing")
    if v[0] > max(prof.top, prof.plateau) * (1.0 + 1e-9):
        raise ConvergenceError("profile exceeds its plateau")


# ============================================================ porous medium

PME_TAIL_DELTA = 1e-8


def default_eta(eps: float) -> float:
    """Scaling parameter of the perturbed porous-medium profiles (eta = eps^2)."""
    return eps * eps


def pme_stable_exponent(m: float) -> float:
    """Decaying exponent mu < 0 of perturbations f = c xi^(-k) (1 + a xi^mu) of the tail."""
    a = 2.0 * m / (1.0 - m)
    return 0.5 * (a - math.sqrt(a * a + 8.0 * (a + 1.0)))


def _pme_rhs(xi, y, m):
    f, F = y
    fp = F * f ** (1.0 - m) / m
    return [fp, -0.5 * xi * fp]


def _pme_jac(xi, y, m):
    f, F = y
    g = f ** (1.0 - m) / m
    dg = (1.0 - m) * f ** (-m) / m
    return [[F * dg, g], [-0.5 * xi * F * dg, -0.5 * xi * g]]


class _PMEOrbit:
    """f_gamma as an ODE orbit: dense output on [xi_lo, anchor], linear tail beyond.

    The orbit started at ``anchor`` from the tail expansion is rescaled exactly
    through f -> A f(B xi) with B = A^((1-m)/2), which maps solutions to solutions.
    """

    def __init__(self, m, sol, anchor, A=1.0):
        self.m = m
        self.sol = sol
        self.anchor = anchor
        self.A = A
        self.B = A ** ((1.0 - m) / 2.0)
        self.k = 2.0 / (1.0 - m)
        self.mu = pme_stable_exponent(m)
        self.c = blowup_constant(DiffusionModel.porous_medium(m))

    def rescaled(self, A):
        return _PMEOrbit(self.m, self.sol, self.anchor, self.A * A)

    @property
    def xi_right(self):
        return self.anchor / self.B

    @property
    def xi_left(self):
        return self.sol.t[-1] / self.B

    def state(self, xi):
        """(f, f') at xi, for xi >= xi_left."""
        xi = np.asarray(xi, dtype=float)
        z = self.B * xi
        f = np.empty_like(z)
        fp = np.empty_like(z)
        inner = z <= self.anchor
        if np.any(inner):
            y = self.sol.sol(z[inner])
            f[inner] = y[0]
            fp[inner] = y[1] * y[0] ** (1.0 - self.m) / self.m
        outer = ~inner
        if np.any(outer):
            zo = z[outer]
            s = PME_TAIL_DELTA * (zo / self.anchor) ** self.mu
            base = self.c * zo ** (-self.k)
            f[outer] = base * (1.0 - s)
            fp[outer] = base / zo * (-self.k * (1.0 - s) - self.mu * s)
        return self.A * f, self.A * self.B * fp

    @property
    def value_at_left(self):
        return self.A * float(self.sol.y[0, -1])


def _pme_integrate(m, xi0, y0, xi_end, whole_line, rtol=1e-12):
    """Integrate the profile ODE from xi0 down to xi_end, or to the plateau for the whole line."""
    events = []
    if whole_line:
        def plateau(xi, y, m):
            if xi >= 0.0:
                return 50.0
            return 50.0 - xi * xi * y[0] ** (1.0 - m) / (4.0 * m)
        plateau.terminal = True
        events.append(plateau)

    def vanish(xi, y, m):
        return y[0]
    vanish.terminal = True
    events.append(vanish)
    sol = solve_ivp(_pme_rhs, (xi0, xi_end), y0, args=(m,), method="DOP853", rtol=rtol,
                    atol=1e-300, dense_output=True, events=events)
    if sol.status < 0:
        raise ConvergenceError(f"profile integration failed: {sol.message}")
    if sol.y[0, -1] <= 0 or not np.all(np.isfinite(sol.y)):
        raise ConvergenceError("profile integration lost positivity")
    if whole_line and sol.status != 1:
        raise ConvergenceError("whole-line profile did not reach its plateau")
    return sol


def _pme_orbit(m, gamma, whole_line, xi_end_guess=-1e7):
    """Orbit with f(0) = gamma (half line) or f(-inf) = gamma (whole line)."""
    k = 2.0 / (1.0 - m)
    mu = pme_stable_exponent(m)
    c = blowup_constant(DiffusionModel.porous_medium(m))

    def run(anchor):
        s = PME_TAIL_DELTA
        f = c * anchor ** (-k) * (1.0 - s)
        fp = c * anchor ** (-k - 1.0) * (-k * (1.0 - s) - mu * s)
        F = m * f ** (m - 1.0) * fp
        end = xi_end_guess if whole_line else 0.0
        return _pme_integrate(m, anchor, [f, F], end, whole_line)

    anchor = 1.0
    for _ in range(2):
        sol = run(anchor)
        orbit = _PMEOrbit(m, sol, anchor)
        A = gamma / orbit.value_at_left
        anchor = anchor / A ** ((1.0 - m) / 2.0)
    return orbit.rescaled(gamma / orbit.value_at_left)


def solve_pme_profile(model: DiffusionModel, variant: ProfileVariant = ProfileVariant(), gamma: float = 1.0,
                      tol: float = 1e-10, xi_max: float = 1e4, n: int = 4096,
                      eta: Optional[float] = None) -> SimilarityProfile:
    """Porous-medium similarity profile f_gamma, its whole-line analogue, or f_+/-.

    The unperturbed profile is integrated from the decaying tail, where it
    leaves the asymptote c(m) xi^(-k) along the stable direction, toward
    xi = 0 (or -inf); the exact scaling symmetry then fixes f(0) = gamma
    (or f(-inf) = gamma).  Perturbed profiles are f_gamma+/-eps(sqrt(1 -/+ 2 eta) xi)
    for xi >= eta, continued to xi < eta as C^1 solutions of the unperturbed ODE.
    """
    if model.is_plaplace:
        raise ParameterError("solve_pme_profile applies to the porous medium equation only")
    if not gamma > 0 or not math.isfinite(gamma):
        raise ParameterError(f"gamma must be positive, got {gamma}")
    m = model.exponent
    sign, eps = variant.sign, variant.epsilon
    top = gamma + sign * eps
    if not top > 0:
        raise ParameterError("gamma - eps must be positive")
    orbit = _pme_orbit(m, top, variant.whole_line)
    # grid scale: the profile's core width, where f falls to half its top value
    core = _core_width(orbit, top)
    left = None
    if variant.whole_line:
        # the perturbed extension reaches its plateau a little further out
        left = 1.2 * abs(orbit.xi_left) + 1e-2 * core
    xi = geometric_xi_grid(1e-2 * core, xi_max, n, variant.whole_line, left, left_uniform=True)

    used_eta = None
    if sign == 0:
        sel = xi >= orbit.xi_left
        xi = xi[sel]
        values, slopes = orbit.state(xi)
        plateau = orbit.value_at_left if variant.whole_line else float(values[0])
    else:
        used_eta = default_eta(eps) if eta is None else float(eta)
        if not 0.0 < used_eta < 0.5:
            raise ParameterError("eta must lie in (0, 1/2)")
        sig = math.sqrt(1.0 - sign * 2.0 * used_eta)
        values = np.empty_like(xi)
        slopes = np.empty_like(xi)
        outer = xi >= used_eta
        values[outer], slopes[outer] = orbit.state(sig * xi[outer])
        slopes[outer] *= sig
        f_eta, fp_eta = orbit.state(np.array([sig * used_eta]))
        y0 = [float(f_eta[0]), m * float(f_eta[0]) ** (m - 1.0) * sig * float(fp_eta[0])]
        end = -1e7 if variant.whole_line else 0.0
        if used_eta > 0:
            ext = _pme_integrate(m, used_eta, y0, end, variant.whole_line)
            inner = ~outer & (xi >= ext.t[-1])
            y = ext.sol(xi[inner])
            values[inner] = y[0]
            slopes[inner] = y[1] * y[0] ** (1.0 - m) / m
            keep = outer | inner
            xi, values, slopes = xi[keep], values[keep], slopes[keep]
            plateau = float(ext.y[0, -1]) if variant.whole_line else float(values[0])
    if variant.whole_line:
        xi, values, slopes = _trim_plateau(xi, values, slopes, plateau)

    prof = SimilarityProfile(
        model=model, variant=variant, beta=float(gamma), lam=None, xi=xi, values=values, slopes=slopes,
        blowup_constant=blowup_constant(model), decay_exponent=model.decay_exponent,
        asymptote=tail_limit(model, variant, used_eta), plateau=float(plateau), eta=used_eta,
        meta={"slope_at_zero": float(orbit.state(np.array([0.0]))[1][0]) if orbit.xi_left <= 0 else None,
              "tail_anchor": float(orbit.xi_right)},
    )
    if sign == 0:
        ref = top
        if abs(plateau - ref) > max(1e3 * tol, 1e-9) * ref:
            raise ConvergenceError(f"profile plateau {plateau!r} misses gamma={ref!r}")
    _check_profile(prof)
    return prof


def _core_width(orbit: _PMEOrbit, top: float) -> float:
    """xi where the orbit has fallen to half of ``top`` (bisection on a log grid)."""
    lo = max(orbit.xi_left, 0.0)
    hi = orbit.xi_right
    xs = np.geomspace(max(hi * 1e-12, 1e-300), hi, 400)
    xs = xs[xs > lo]
    f, _ = orbit.state(xs)
    idx = np.nonzero(f < 0.5 * top)[0]
    if idx.size == 0:
        return hi
    return float(xs[idx[0]])


def pme_ode_residual(profile: SimilarityProfile, xi_from: Optional[float] = None) -> np.ndarray:
    """Relative residual of (f^m)'' + (1 -/+ 2 eta) xi f'/2 = 0 using the exact node slopes.

    (f^m)' = m f^(m-1) f' is differentiated by finite differences; the residual
    is divided by |xi f'| / 2 + |(f^m)''|.  Nodes with xi < ``xi_from`` are skipped
    (by default the interval below eta of a perturbed profile).
    """
    m = profile.model.exponent
    x = profile.xi
    flux = m * profile.values ** (m - 1.0) * profile.slopes
    d1, _ = _nonuniform_derivatives(x, flux)
    xm = x[1:-1]
    sp = profile.slopes[1:-1]
    eta = profile.eta or 0.0
    coef = 1.0 - profile.variant.sign * 2.0 * eta
    res = d1 + coef * 0.5 * xm * sp
    scale = np.abs(d1) + np.abs(0.5 * xm * sp) + 1e-300
    out = np.abs(res) / scale
    ok = _resolvable(x, flux)
    out, xm = out[ok], xm[ok]
    if xi_from is None:
        xi_from = eta if profile.variant.sign else -math.inf
    return out[xm >= xi_from]


def shoot_pme_slope(model: DiffusionModel, gamma: float = 1.0, tol: float = 1e-10,
                    max_iter: int = 200) -> float:
    """f'(0) of the half-line profile by forward shooting and bisection.

    An orbit started at f(0) = gamma with slope s is classified as too steep
    when its log-slope -xi f'/f exceeds 2k or f reaches 0, and too shallow when
    the log-slope falls back through k/2 or the diffusion length outgrows xi.
    """
    if model.is_plaplace:
        raise ParameterError("shoot_pme_slope applies to the porous medium equation only")
    m = model.exponent
    k = 2.0 / (1.0 - m)
    level = 10.0 * (1.0 + m) / (2.0 * (1.0 - m)) + 20.0

    def logslope(xi, y):
        f, F = y
        if f <= 0:
            return math.inf
        return -xi * F * f ** (1.0 - m) / m / f

    def steep(xi, y, m):
        return logslope(xi, y) - 2.0 * k
    steep.terminal = True

    def shallow(xi, y, m):
        return logslope(xi, y) - 0.5 * k
    shallow.terminal = True
    shallow.direction = -1

    def zero(xi, y, m):
        return y[0]
    zero.terminal = True

    def levels(xi, y, m):
        return xi * xi * max(y[0], 0.0) ** (1.0 - m) / (4.0 * m) - level
    levels.terminal = True
    levels.direction = 1

    def classify(s):
        F0 = m * gamma ** (m - 1.0) * s
        sol = solve_ivp(_pme_rhs, (0.0, 1e12), [gamma, F0], args=(m,), method="DOP853",
                        rtol=1e-12, atol=1e-300, events=[steep, shallow, zero, levels])
        if sol.t_events[0].size or sol.t_events[2].size:
            return "steep"
        if sol.t_events[1].size or sol.t_events[3].size:
            return "shallow"
        raise ConvergenceError("shooting orbit was not classified")

    s_ref = -(gamma ** ((3.0 - m) / 2.0))
    steep_s = shallow_s = None
    s = s_ref
    for _ in range(80):
        if classify(s) == "steep":
            steep_s = s
            if shallow_s is not None:
                break
            s *= 0.5
        else:
            shallow_s = s
            if steep_s is not None:
                break
            s *= 2.0
    if steep_s is None or shallow_s is None:
        raise ConvergenceError("slope bracket not found")
    for _ in range(max_iter):
        mid = 0.5 * (steep_s + shallow_s)
        if classify(mid) == "steep":
            steep_s = mid
        else:
            shallow_s = mid
        if abs(steep_s - shallow_s) <= tol * abs(mid):
            return 0.5 * (steep_s + shallow_s)
    raise ConvergenceError("slope bracket collapsed without meeting tol")


def profile_for(model: DiffusionModel, variant: ProfileVariant = ProfileVariant(), beta: float = 1.0,
                **kw) -> SimilarityProfile:
    """Dispatch to the p-Laplace or porous-medium constructor."""
    if model.is_plaplace:
        return tabulate_plaplace_profile(model, variant, beta, **kw)
    return solve_pme_profile(model, variant, beta, **kw)
