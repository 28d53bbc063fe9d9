"""Radially symmetric domains, radial grid functions and grid settings."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .models import ParameterError


class Shape(str, Enum):
    BALL = "ball"
    EXTERIOR_BALL = "exterior_ball"
    ANNULUS = "annulus"


@dataclass(frozen=True)
class RadialDomain:
    """Ball {r < rho}, exterior {r > rho} or annulus {rho_in < r < rho_out} in R^N.

    Curvature convention: principal curvatures of a boundary sphere are taken
    with respect to the normal pointing into the domain, so a sphere bounding
    the domain from outside (ball, outer annulus sphere) has +1/radius and a
    sphere bounding it from inside (exterior ball, inner annulus sphere) has
    -1/radius.  :meth:`curvatures_at` is the only place signs are decided.
    """

    shape: Shape
    dimension: int
    radii: tuple

    def __post_init__(self):
        shape = Shape(self.shape)
        object.__setattr__(self, "shape", shape)
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ParameterError(f"dimension N must be an integer >= 2, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        expected = 2 if shape is Shape.ANNULUS else 1
        if len(radii) != expected:
            raise ParameterError(f"{shape.value} needs {expected} radii, got {len(radii)}")
        if not all(math.isfinite(r) and r > 0 for r in radii):
            raise ParameterError(f"radii must be positive and finite, got {radii}")
        if shape is Shape.ANNULUS and not radii[0] < radii[1]:
            raise ParameterError(f"annulus needs rho_in < rho_out, got {radii}")

    @classmethod
    def ball(cls, rho: float, N: int = 2) -> "RadialDomain":
        return cls(Shape.BALL, N, (rho,))

    @classmethod
    def exterior_ball(cls, rho: float, N: int = 2) -> "RadialDomain":
        return cls(Shape.EXTERIOR_BALL, N, (rho,))

    @classmethod
    def annulus(cls, rho_in: float, rho_out: float, N: int = 2) -> "RadialDomain":
        return cls(Shape.ANNULUS, N, (rho_in, rho_out))

    @property
    def boundary_radii(self) -> tuple:
        return self.radii

    @property
    def scale(self) -> float:
        """Length scale: the radius, or the annulus width."""
        if self.shape is Shape.ANNULUS:
            return self.radii[1] - self.radii[0]
        return self.radii[0]

    def curvatures_at(self, radius: float) -> tuple:
        """The N-1 principal curvatures of the boundary sphere of the given radius."""
        radius = float(radius)
        if not any(math.isclose(radius, b, rel_tol=1e-12) for b in self.radii):
            raise ParameterError(f"{radius} is not a boundary radius of {self}")
        if self.shape is Shape.BALL:
            k = 1.0 / radius
        elif self.shape is Shape.EXTERIOR_BALL:
            k = -1.0 / radius
        else:
            k = 1.0 / radius if math.isclose(radius, self.radii[1], rel_tol=1e-12) else -1.0 / radius
        return (k,) * (self.dimension - 1)

    def contains(self, r):
        r = np.asarray(r, dtype=float)
        if self.shape is Shape.BALL:
            return (r >= 0) & (r < self.radii[0])
        if self.shape is Shape.EXTERIOR_BALL:
            return r > self.radii[0]
        return (r > self.radii[0]) & (r < self.radii[1])

    def signed_distance(self, r):
        """Distance to the boundary, positive inside the domain and negative outside."""
        r = np.asarray(r, dtype=float)
        if self.shape is Shape.BALL:
            return self.radii[0] - r
        if self.shape is Shape.EXTERIOR_BALL:
            return r - self.radii[0]
        lo, hi = self.radii
        inside = np.minimum(r - lo, hi - r)
        # outside the annulus the nearest sphere decides
        return np.where(r < lo, r - lo, np.where(r > hi, hi - r, inside))

    def distance(self, r):
        return np.abs(self.signed_distance(r))

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "dimension": self.dimension, "radii": list(self.radii)}

    @classmethod
    def from_dict(cls, d: dict) -> "RadialDomain":
        return cls(Shape(d["shape"]), d["dimension"], tuple(d["radii"]))


@dataclass(frozen=True, eq=False)
class RadialField:
    """A radial grid function u(r), optionally stamped with a time."""

    r: np.ndarray
    values: np.ndarray
    domain: RadialDomain
    time: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ParameterError("r and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(r) <= 0):
            raise ParameterError("r grid must be strictly increasing")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    def interpolate(self, r, log=False):
        """Linear interpolation (in log of the values if ``log``) at radii r."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r[0] - 1e-14 * abs(self.r[0])) or np.any(r > self.r[-1] * (1 + 1e-14)):
            raise ParameterError("interpolation point outside the field grid")
        if log:
            return np.exp(np.interp(r, self.r, np.log(self.values)))
        return np.interp(r, self.r, self.values)


@dataclass(frozen=True)
class GridSpec:
    """Discretisation settings shared by the elliptic and parabolic solvers.

    ``n_space`` nodes are graded geometrically in the distance to each boundary
    sphere, from ``d_min`` outward; ``refinement_ratio`` caps the ratio of
    neighbouring cell widths.  ``n_time`` geometric steps run from ``t_start``
    (derived from ``d_min`` when omitted) to the last output time.
    ``regularization_sigma`` of None means the solver picks its scale-aware default.
    """

    n_space: int = 1500
    n_time: int = 2400
    refinement_ratio: float = 1.05
    regularization_sigma: Optional[float] = None
    truncation_radius: Optional[float] = None
    d_min: float = 1e-9
    t_start: Optional[float] = None

    def __post_init__(self):
        if self.n_space < 2 or self.n_time < 2:
            raise ParameterError("n_space and n_time must be >= 2")
        if not self.refinement_ratio >= 1.0:
            raise ParameterError("refinement_ratio must be >= 1")
        if not self.d_min > 0:
            raise ParameterError("d_min must be positive")
        if self.regularization_sigma is not None and not self.regularization_sigma > 0:
            raise ParameterError("regularization_sigma must be positive")
        if self.t_start is not None and not self.t_start > 0:
            raise ParameterError("t_start must be positive")

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same settings with n_space and n_time multiplied by ``factor``."""
        d = dict(self.__dict__)
        d["n_space"] = self.n_space * factor
        d["n_time"] = self.n_time * factor
        return GridSpec(**d)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def graded_distances(d_min: float, d_max: float, n: int, max_ratio: float = math.inf) -> np.ndarray:
    """n distances from 0 to d_max whose cell widths grow geometrically from d_min.

    The growth factor q solves d_min (q^(n-1) - 1)/(q - 1) = d_max.
    """
    if n < 3:
        raise ParameterError("need at least 3 nodes in a graded segment")
    if not 0 < d_min < d_max:
        raise ParameterError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")
    cells = n - 1
    if d_min * cells >= d_max:
        return np.linspace(0.0, d_max, n)

    def log_expm1(x):
        return x + math.log(-math.expm1(-x))

    def excess(logq):
        return math.log(d_min) + log_expm1(cells * logq) - log_expm1(logq) - math.log(d_max)

    upper = 1.001 * math.log(d_max / d_min) / (cells - 1) + 1e-12
    logq = brentq(excess, 1e-14, upper, xtol=1e-16, rtol=1e-15)
    q = math.exp(logq)
    if q > max_ratio * (1 + 1e-12):
        raise ParameterError(
            f"{n} nodes over [{d_min:g}, {d_max:g}] give width ratio {q:.4f} > {max_ratio}; raise n_space"
        )
    d = d_min * np.expm1(logq * np.arange(n)) / math.expm1(logq)
    d[-1] = d_max
    return d


def split_counts(total: int, weights) -> list:
    """Split ``total`` nodes across segments in proportion to ``weights``, each >= 3."""
    w = np.asarray(weights, dtype=float)
    raw = total * w / w.sum()
    counts = np.maximum(np.floor(raw).astype(int), 3)
    counts[np.argmax(w)] += total - counts.sum()
    return [int(c) for c in counts]
