"""Level-set areas inside a touching ball, curvature products and ball volumes.

For a radial domain the distance level set at depth s is a sphere concentric
with the touched boundary sphere, so its intersection with the probe ball
B_R(x0) is a spherical cap whose area is a one-dimensional angle integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .domains import RadialDomain, Shape
from .models import ParameterError


class DivergentFlag:
    """Marker for an infinite limit (a vanishing factor 1/R - kappa_j)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIVERGENT"

    def to_dict(self):
        return "divergent"

    def __reduce__(self):
        return (DivergentFlag, ())


DIVERGENT = DivergentFlag()


def is_divergent(x) -> bool:
    return x is DIVERGENT


def unit_ball_volume(k: int) -> float:
    """omega_k = pi^(k/2) / Gamma(k/2 + 1)."""
    if k < 0 or int(k) != k:
        raise ParameterError("k must be a nonnegative integer")
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


def sphere_area(r: float, N: int) -> float:
    """Area of the sphere of radius r in R^N: N omega_N r^(N-1)."""
    return N * unit_ball_volume(N) * r ** (N - 1)


def curvature_product(R: float, curvatures: Sequence[float], atol: float = 1e-12):
    """prod_j (1/R - kappa_j), or DIVERGENT if a factor vanishes."""
    if not R > 0:
        raise ParameterError("R must be positive")
    prod = 1.0
    divergent = False
    for k in curvatures:
        f = 1.0 / R - float(k)
        if abs(f) <= atol:
            divergent = True
        elif f < 0:
            raise ParameterError(f"curvature {k} exceeds 1/R = {1.0 / R}: no interior touching ball")
        prod *= f
    return DIVERGENT if divergent else prod


@dataclass(frozen=True)
class TouchingBallConfig:
    """Probe ball B_R(x0) inside the domain whose closure touches one boundary sphere.

    The centre sits on the radial axis at distance R from the touched sphere,
    on the domain side; ``touch`` selects the sphere for an annulus (default:
    the inner one).  N is taken from the domain.
    """

    domain: RadialDomain
    R: float
    touch: Optional[float] = None

    def __post_init__(self):
        R = float(self.R)
        object.__setattr__(self, "R", R)
        if not R > 0 or not math.isfinite(R):
            raise ParameterError("R must be positive")
        dom = self.domain
        touch = dom.radii[0] if self.touch is None else float(self.touch)
        if not any(math.isclose(touch, b, rel_tol=1e-12) for b in dom.radii):
            raise ParameterError(f"touch={touch} is not a boundary radius")
        object.__setattr__(self, "touch", touch)
        if dom.shape is Shape.BALL and R > dom.radii[0] * (1 + 1e-12):
            raise ParameterError("probe ball larger than the domain ball")
        if dom.shape is Shape.ANNULUS and 2 * R > dom.radii[1] - dom.radii[0] + 1e-12:
            raise ParameterError("probe ball does not fit in the annulus")
        for k in dom.curvatures_at(touch):
            if k > 1.0 / R + 1e-12:
                raise ParameterError(f"curvature {k} exceeds 1/R")

    @property
    def N(self) -> int:
        return self.domain.dimension

    @property
    def center_distance(self) -> float:
        """|x0|, the distance of the probe-ball centre from the origin."""
        dom, R, b = self.domain, self.R, self.touch
        if dom.shape is Shape.BALL or (dom.shape is Shape.ANNULUS and math.isclose(b, dom.radii[1])):
            return b - R
        return b + R

    @property
    def inward(self) -> int:
        """+1 if the domain lies outside the touched sphere, -1 if inside."""
        return 1 if self.center_distance > self.touch else -1

    @property
    def curvatures(self) -> tuple:
        return self.domain.curvatures_at(self.touch)

    @property
    def degenerate(self) -> bool:
        return is_divergent(curvature_product(self.R, self.curvatures))

    def max_depth(self) -> float:
        """Largest admissible level s (the probe diameter, or the annulus half width)."""
        if self.domain.shape is Shape.ANNULUS:
            a, b = self.domain.radii
            return min(2.0 * self.R, 0.5 * (b - a))
        return 2.0 * self.R

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "R": self.R, "touch": self.touch}


def _angle_integral(theta: float, N: int) -> float:
    """int_0^theta sin^(N-2) t dt."""
    if N == 2:
        return theta
    if N == 3:
        return 1.0 - math.cos(theta)
    val, _ = quad(lambda t: math.sin(t) ** (N - 2), 0.0, theta, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def sphere_ball_area(r: float, D: float, R: float, N: int) -> float:
    """Area of {|x| = r} intersected with the open ball of radius R centred at distance D."""
    if r <= 0:
        return 0.0
    if D == 0.0:
        return sphere_area(r, N) if r < R else 0.0
    num = (R - r + D) * (R + r - D)  # R^2 - (r - D)^2, factored for accuracy near tangency
    if num <= 0:
        return 0.0
    one_minus_cos = num / (2.0 * r * D)
    if one_minus_cos >= 2.0:
        return sphere_area(r, N)
    theta = 2.0 * math.asin(math.sqrt(0.5 * one_minus_cos))
    if N == 3:
        return 2.0 * math.pi * r * r * one_minus_cos
    return (N - 1) * unit_ball_volume(N - 1) * r ** (N - 1) * _angle_integral(theta, N)


def sphere_ball_areas(r, D: float, R: float, N: int) -> np.ndarray:
    """Vectorised :func:`sphere_ball_area` (closed forms for N = 2, 3; quadrature otherwise)."""
    r = np.asarray(r, dtype=float)
    if N > 3 or D == 0.0:
        return np.array([sphere_ball_area(float(x), D, R, N) for x in r.ravel()]).reshape(r.shape)
    out = np.zeros_like(r)
    pos = r > 0
    num = (R - r + D) * (R + r - D)
    omc = np.where(pos & (num > 0), num / (2.0 * np.where(pos, r, 1.0) * D), 0.0)
    full = omc >= 2.0
    part = (omc > 0) & ~full
    out[full] = sphere_area(1.0, N) * r[full] ** (N - 1)
    if N == 2:
        theta = 2.0 * np.arcsin(np.sqrt(0.5 * omc[part]))
        out[part] = 2.0 * r[part] * theta
    else:
        out[part] = 2.0 * math.pi * r[part] ** 2 * omc[part]
    return out


def level_radii(config: TouchingBallConfig, s: float) -> list:
    """Radii of the distance-s level spheres of the domain."""
    dom = config.domain
    if dom.shape is Shape.BALL:
        return [dom.radii[0] - s]
    if dom.shape is Shape.EXTERIOR_BALL:
        return [dom.radii[0] + s]
    return [dom.radii[0] + s, dom.radii[1] - s]


def level_area(config: TouchingBallConfig, s: float) -> float:
    """Exact area of the distance-s level set of the domain inside the probe ball."""
    s = float(s)
    if not 0.0 < s < config.max_depth():
        raise ParameterError(f"level s={s} outside (0, {config.max_depth()})")
    D = config.center_distance
    return sum(sphere_ball_area(r, D, config.R, config.N) for r in level_radii(config, s))


def monte_carlo_level_area(config: TouchingBallConfig, s: float, n_samples: int,
                           rng: np.random.Generator, chunk: int = 200_000):
    """Rejection estimate of :func:`level_area` and its standard error.

    Points are drawn uniformly on each level sphere (normalised Gaussian
    vectors) and the fraction inside the probe ball scales the sphere area.
    """
    if not 0.0 < s < config.max_depth():
        raise ParameterError(f"level s={s} outside (0, {config.max_depth()})")
    N, R = config.N, config.R
    x0 = np.zeros(N)
    x0[0] = config.center_distance
    est, var = 0.0, 0.0
    for r in level_radii(config, s):
        hits = 0
        left = n_samples
        while left > 0:
            m = min(chunk, left)
            g = rng.standard_normal((m, N))
            g *= r / np.linalg.norm(g, axis=1)[:, None]
            hits += int(np.count_nonzero(np.sum((g - x0) ** 2, axis=1) < R * R))
            left -= m
        frac = hits / n_samples
        area = sphere_area(r, N)
        est += frac * area
        var += area * area * frac * (1.0 - frac) / n_samples
    return est, math.sqrt(var)


def lemma_limit(config: TouchingBallConfig):
    """2^((N-1)/2) omega_(N-1) prod (1/R - kappa_j)^(-1/2), or DIVERGENT."""
    prod = curvature_product(config.R, config.curvatures)
    if is_divergent(prod):
        return DIVERGENT
    N = config.N
    return 2.0 ** ((N - 1) / 2.0) * unit_ball_volume(N - 1) / math.sqrt(prod)


@dataclass(frozen=True, eq=False)
class LevelAreaTable:
    s: np.ndarray
    area: np.ndarray
    scaled: np.ndarray
    predicted: object

    @property
    def divergent(self) -> bool:
        return is_divergent(self.predicted)

    @property
    def relative_error(self) -> np.ndarray:
        if self.divergent:
            return np.full(self.s.shape, np.nan)
        return np.abs(self.scaled / self.predicted - 1.0)


def lemma71_limit_check(config: TouchingBallConfig, s_values: Sequence[float]) -> LevelAreaTable:
    """Tabulate s^(-(N-1)/2) * level_area(s) against the small-s limit.

    For a degenerate configuration the ``predicted`` column is DIVERGENT.
    """
    s = np.asarray(sorted(s_values, reverse=True), dtype=float)
    area = np.array([level_area(config, x) for x in s])
    scaled = s ** (-(config.N - 1) / 2.0) * area
    return LevelAreaTable(s, area, scaled, lemma_limit(config))
