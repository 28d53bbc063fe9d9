"""Short-time limit of the boundary integral functional: prediction and measurement.

For a probe ball B_R(x0) touching the boundary at one point, the integral
I(t) = int_{B_R} u^alpha dx behaves like t^theta * c * prod(1/R - kappa_j)^(-1/2)
with theta = (N+1)/(2p) or (N+1)/4 and

    c = 2^((N-1)/2) omega_(N-1) int_0^inf profile(xi)^alpha xi^((N-1)/2) d xi.

:func:`verify_theorem` runs the radial simulation, evaluates I(t) by the
co-area reduction and fits the limit.
"""
from __future__ import annotations

import math
import time as _time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domains import GridSpec, RadialField
from .geometry import (DIVERGENT, TouchingBallConfig, curvature_product, is_divergent, sphere_ball_areas,
                       unit_ball_volume)
from .models import ConvergenceError, DiffusionModel, ParameterError
from .radial_pde import EvolutionSpec, ProblemKind, simulate
from .similarity_profiles import ProfileVariant, Side, SimilarityProfile, profile_for

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


class NearThresholdWarning(UserWarning):
    """alpha lies within 10% of the integrability threshold; the tail of c converges slowly."""


def check_alpha(model: DiffusionModel, alpha: float, N: int):
    thr = model.alpha_threshold(N)
    if not alpha > thr:
        raise ParameterError(f"alpha={alpha} must exceed the threshold (N+1)(2-p)/(2p) or (N+1)(1-m)/4 = {thr}")
    if alpha < 1.1 * thr:
        warnings.warn(f"alpha={alpha} is within 10% of the threshold {thr}", NearThresholdWarning, stacklevel=3)


def c_integral(profile: SimilarityProfile, alpha: float, N: int):
    """(c, tail_fraction) for the given profile, using the positive half of its grid.

    The tabulated part is integrated with 8-point Gauss-Legendre panels over
    the Hermite interpolant; beyond xi_max the asymptote c_tail^alpha xi^e with
    e = (N-1)/2 - k alpha is integrated exactly.
    """
    model = profile.model
    check_alpha(model, alpha, N)
    xi = profile.xi[profile.xi >= 0]
    if xi[0] != 0.0:
        raise ParameterError("profile grid must contain xi = 0")
    half = 0.5 * np.diff(xi)
    mid = 0.5 * (xi[1:] + xi[:-1])
    nodes = mid[:, None] + half[:, None] * _GL8_X[None, :]
    vals = profile(nodes.ravel()).reshape(nodes.shape)
    e = 0.5 * (N - 1)
    body = float(np.sum(half * ((vals ** alpha * nodes ** e) @ _GL8_W)))
    ex = e - profile.decay_exponent * alpha
    xm = xi[-1]
    tail = profile.asymptote ** alpha * xm ** (ex + 1.0) / (-(ex + 1.0))
    total = body + tail
    frac = tail / total
    if frac > 0.1:
        raise ConvergenceError(f"tail correction is {frac:.1%} of c: xi_max={xm:g} is too small")
    return 2.0 ** e * unit_ball_volume(N - 1) * total, frac


def profile_for_problem(model: DiffusionModel, problem: ProblemKind, beta: float) -> SimilarityProfile:
    side = Side.WHOLE_LINE if ProblemKind(problem) is ProblemKind.CAUCHY else Side.HALF_LINE
    return profile_for(model, ProfileVariant(side), beta)


def compute_c(model: DiffusionModel, alpha: float, N: int, beta: float = 1.0,
              problem: ProblemKind = ProblemKind.INITIAL_BOUNDARY) -> float:
    """The constant c built from phi / f_gamma (boundary data) or psi / whole-line f (Cauchy data)."""
    if int(N) != N or N < 2:
        raise ParameterError("N must be an integer >= 2")
    check_alpha(model, alpha, N)
    return c_integral(profile_for_problem(model, problem, beta), alpha, N)[0]


def integral_functional(field: RadialField, alpha: float, config: TouchingBallConfig) -> float:
    """int over B_R(x0) of u^alpha dx = int u(r)^alpha A(r) dr, A the sphere-ball intersection area.

    u is interpolated linearly between nodes; A is exact.  Panels touching the
    ends of the radial range use the substitution r = end +/- L tau^2, which
    removes the square-root behaviour of A at tangency.
    """
    D, R, N = config.center_distance, config.R, config.N
    a, b = max(D - R, 0.0), D + R
    r = field.r
    if r[0] > a * (1 + 1e-12) + 1e-300 or r[-1] < b * (1 - 1e-12):
        raise ParameterError(f"probe ball radial range [{a}, {b}] exits the field grid [{r[0]}, {r[-1]}]")
    inner = r[(r > a) & (r < b)]
    br = np.concatenate(([a], inner, [b]))
    x0, x1 = br[:-1], br[1:]
    tau = 0.5 * (_GL8_X + 1.0)
    wts = 0.5 * _GL8_W
    L = x1 - x0
    pts = x0[:, None] + L[:, None] * tau[None, :]
    jac = np.repeat(L[:, None], tau.size, axis=1)
    sq = D > R  # square-root tangency at both ends
    if sq:
        pts[0] = x0[0] + L[0] * tau ** 2
        jac[0] = 2.0 * L[0] * tau
        pts[-1] = x1[-1] - L[-1] * tau ** 2
        jac[-1] = 2.0 * L[-1] * tau
    u = np.interp(pts.ravel(), r, field.values).reshape(pts.shape)
    A = sphere_ball_areas(pts.ravel(), D, R, N).reshape(pts.shape)
    return float(np.sum(np.maximum(u, 0.0) ** alpha * A * jac * wts[None, :]))


def predicted_limit(model: DiffusionModel, alpha: float, config: TouchingBallConfig, beta: float,
                    problem: ProblemKind):
    """(prediction or DIVERGENT, c, tail fraction)."""
    prod = curvature_product(config.R, config.curvatures)
    prof = profile_for_problem(model, problem, beta)
    c, frac = c_integral(prof, alpha, config.N)
    if is_divergent(prod):
        return DIVERGENT, c, frac
    return c / math.sqrt(prod), c, frac


DEFAULT_TIMES = tuple(float(t) for t in np.geomspace(1e-6, 1e-3, 10))


@dataclass(frozen=True)
class TheoremConfig:
    model: DiffusionModel
    alpha: float
    config: TouchingBallConfig
    beta: float = 1.0
    problem: ProblemKind = ProblemKind.INITIAL_BOUNDARY
    times: tuple = DEFAULT_TIMES
    grid: GridSpec = GridSpec()
    scheme: str = "bdf2"

    def __post_init__(self):
        object.__setattr__(self, "problem", ProblemKind(self.problem))
        object.__setattr__(self, "times", tuple(sorted(float(t) for t in self.times)))
        if len(self.times) < 4:
            raise ParameterError("need at least four output times")
        if not self.beta > 0:
            raise ParameterError("beta must be positive")
        check_alpha(self.model, self.alpha, self.config.N)

    @property
    def theta(self) -> float:
        return self.model.theta(self.config.N)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(), "alpha": self.alpha, "config": self.config.to_dict(),
            "beta": self.beta, "problem": self.problem.value, "times": list(self.times),
            "grid": self.grid.to_dict(), "scheme": self.scheme,
        }


@dataclass(frozen=True, eq=False)
class VerificationReport:
    config: dict
    theta_expected: float
    theta_fitted: float
    fitted_limit: float
    predicted: object
    relative_error: Optional[float]
    divergent: bool
    times: np.ndarray
    integrals: np.ndarray
    scaled: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def per_time_table(self):
        return list(zip(self.times.tolist(), self.integrals.tolist(), self.scaled.tolist()))

    def divergence_evidence(self, last: int = 4) -> bool:
        """Scaled integral strictly increases as t decreases over the ``last`` smallest times."""
        s = self.scaled[-last:]  # times are stored in decreasing order
        return bool(np.all(np.diff(s) > 0))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "theta_expected": self.theta_expected,
            "theta_fitted": self.theta_fitted,
            "L_hat": self.fitted_limit,
            "predicted": "divergent" if self.divergent else self.predicted,
            "relative_error": self.relative_error,
            "divergent": self.divergent,
            "per_time": [{"t": t, "integral": i, "scaled": s} for t, i, s in self.per_time_table],
            "diagnostics": self.diagnostics,
        }

    def to_csv(self, path):
        from .io import write_csv
        return write_csv(path, ("t", "integral", "scaled"), (self.times, self.integrals, self.scaled))


def fit_limit(times, integrals, theta: float, window: float = 10.0):
    """Least-squares fits on the final decade t <= window * t_min.

    Returns (theta_hat, L_hat, L_free, mask): theta_hat from the free fit of
    log I = theta log t + log L; L_hat from the fit with theta held at its
    theoretical value; L_free = exp(intercept) of the free fit.
    """
    t = np.asarray(times, dtype=float)
    I = np.asarray(integrals, dtype=float)
    mask = t <= window * t.min() * (1 + 1e-12)
    if mask.sum() < 2:
        raise ParameterError("need at least two times in the final decade")
    x, y = np.log(t[mask]), np.log(I[mask])
    slope, icept = np.polyfit(x, y, 1)
    L_hat = float(np.exp(np.mean(y - theta * x)))
    return float(slope), L_hat, float(np.exp(icept)), mask


def verify_theorem(tc: TheoremConfig) -> VerificationReport:
    """Simulate, evaluate I(t) at every output time and compare the fitted limit with the prediction."""
    t0 = _time.perf_counter()
    cfg = tc.config
    spec = EvolutionSpec(tc.model, cfg.domain, tc.problem, tc.beta, tc.times, tc.grid, tc.scheme)
    fields = simulate(spec)
    I = np.array([integral_functional(f, tc.alpha, cfg) for f in fields])
    t = np.array([f.time for f in fields])
    theta = tc.theta
    if np.any(I <= 0):
        raise ConvergenceError("integral functional vanished at an output time; the layer is unresolved")
    predicted, c, frac = predicted_limit(tc.model, tc.alpha, cfg, tc.beta, tc.problem)
    theta_hat, L_hat, L_free, mask = fit_limit(t, I, theta)
    drop = mask.copy()
    drop[np.nonzero(mask)[0][-1]] = False  # largest time of the window
    if drop.sum() >= 2:
        _, L_hat_drop, _, _ = fit_limit(t[drop], I[drop], theta, window=math.inf)
    else:
        L_hat_drop = float("nan")
    order = np.argsort(-t)
    t, I = t[order], I[order]
    scaled = I * t ** (-theta)
    divergent = is_divergent(predicted)
    diagnostics = {
        "c": c, "tail_fraction": frac, "L_free_intercept": L_free, "L_hat_without_largest_time": L_hat_drop,
        "fit_times": sorted(np.asarray([f.time for f in fields])[mask].tolist(), reverse=True),
        "max_residual": max(f.meta["residual"] for f in fields),
        "newton_iterations": fields[-1].meta["newton_iterations"],
        "substeps": fields[-1].meta["substeps"], "n_space": int(fields[0].r.size),
        "n_levels": fields[0].meta["n_levels"], "t_start": fields[0].meta["t_start"],
        "wall_time_s": _time.perf_counter() - t0,
    }
    report = VerificationReport(
        config=tc.to_dict(), theta_expected=theta, theta_fitted=theta_hat, fitted_limit=L_hat,
        predicted=predicted, relative_error=None if divergent else abs(L_hat / predicted - 1.0),
        divergent=divergent, times=t, integrals=I, scaled=scaled, diagnostics=diagnostics,
    )
    if divergent:
        if not report.divergence_evidence():
            raise ConvergenceError("prediction is divergent but t^(-theta) I(t) is not growing as t decreases")
    elif abs(theta_hat / theta - 1.0) > 0.15:
        raise ConvergenceError(
            f"fitted exponent {theta_hat:.4g} is off the predicted {theta:.4g} by more than 15%: the boundary "
            "layer is probably unresolved; refine n_space / d_min or move the output times"
        )
    return report
