"""Diffusion models, derived constants and shared error types."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ParameterError(ValueError):
    """Invalid user input (maps to CLI exit status 2)."""


class ConvergenceError(RuntimeError):
    """A numerical procedure failed (maps to CLI exit status 3)."""


class Kind(str, Enum):
    PLAPLACE = "plaplace"
    POROUS_MEDIUM = "porous_medium"


@dataclass(frozen=True)
class DiffusionModel:
    """Fast diffusion equation: p-Laplacian with 1 < p < 2 or porous medium with 0 < m < 1."""

    kind: Kind
    exponent: float

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        e = float(self.exponent)
        object.__setattr__(self, "exponent", e)
        if not math.isfinite(e):
            raise ParameterError(f"exponent must be finite, got {e}")
        if kind is Kind.PLAPLACE and not 1.0 < e < 2.0:
            raise ParameterError(f"p-Laplace exponent must satisfy 1 < p < 2, got p={e}")
        if kind is Kind.POROUS_MEDIUM and not 0.0 < e < 1.0:
            raise ParameterError(f"porous medium exponent must satisfy 0 < m < 1, got m={e}")

    @classmethod
    def plaplace(cls, p: float) -> "DiffusionModel":
        return cls(Kind.PLAPLACE, p)

    @classmethod
    def porous_medium(cls, m: float) -> "DiffusionModel":
        return cls(Kind.POROUS_MEDIUM, m)

    @property
    def is_plaplace(self) -> bool:
        return self.kind is Kind.PLAPLACE

    @property
    def symbol(self) -> str:
        return "p" if self.is_plaplace else "m"

    @property
    def decay_exponent(self) -> float:
        """k in the boundary blow-up rate c * d^(-k) and the profile tail c * xi^(-k)."""
        e = self.exponent
        return e / (2.0 - e) if self.is_plaplace else 2.0 / (1.0 - e)

    @property
    def separable_exponent(self) -> float:
        """e such that t^e v(x) is a separable solution."""
        e = self.exponent
        return 1.0 / (2.0 - e) if self.is_plaplace else 1.0 / (1.0 - e)

    @property
    def similarity_exponent(self) -> float:
        """s in the similarity variable xi = t^(-s) * distance."""
        return 1.0 / self.exponent if self.is_plaplace else 0.5

    @property
    def elliptic_coefficient(self) -> float:
        """Zeroth-order coefficient of the blow-up problem: 1/(2-p) or 1/(1-m)."""
        return self.separable_exponent

    def theta(self, N: int) -> float:
        """Short-time exponent of the boundary integral functional."""
        return (N + 1) * self.similarity_exponent / 2.0

    def alpha_threshold(self, N: int) -> float:
        """alpha must exceed this value for the limiting constant to be finite."""
        e = self.exponent
        if self.is_plaplace:
            return (N + 1) * (2.0 - e) / (2.0 * e)
        return (N + 1) * (1.0 - e) / 4.0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, d: dict) -> "DiffusionModel":
        return cls(Kind(d["kind"]), d["exponent"])


_LOG_FLOAT_MAX = math.log(1.7976931348623157e308)


def log_blowup_constant(model: DiffusionModel) -> float:
    """Natural log of the blow-up constant; finite for every valid model."""
    e = model.exponent
    if model.is_plaplace:
        q = 1.0 / (2.0 - e)
        return math.log((2.0 - e) / e) - q * math.log((2.0 - e) / (2.0 * e * (e - 1.0)))
    return math.log(2.0 * e * (1.0 + e) / (1.0 - e)) / (1.0 - e)


def blowup_constant(model: DiffusionModel) -> float:
    """c(p) = ((2-p)/p) ((2-p)/(2p(p-1)))^(-1/(2-p)) or c(m) = (2m(1+m)/(1-m))^(1/(1-m)).

    c(m) grows without bound as m -> 1; when it no longer fits in a double an
    OverflowError is raised instead of returning inf.  Use
    :func:`log_blowup_constant` in that regime.
    """
    if model.is_plaplace:
        p = model.exponent
        return (2.0 - p) / p * ((2.0 - p) / (2.0 * p * (p - 1.0))) ** (-1.0 / (2.0 - p))
    m = model.exponent
    logc = log_blowup_constant(model)
    if logc >= _LOG_FLOAT_MAX:
        raise OverflowError(f"c(m) overflows a double for m={m} (log c = {logc:.6g})")
    return (2.0 * m * (1.0 + m) / (1.0 - m)) ** (1.0 / (1.0 - m))
