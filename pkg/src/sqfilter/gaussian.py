"""
Single-mode quasi-free (Gaussian) state parameters.

A mean-zero Gaussian state of one boson mode is fixed by the number
parameter ``n = <a* a>`` and the complex squeezing ``m = <a a>``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError

#: relative tolerance on Delta / (n(n+1) + 1) used for classification
CLASSIFY_RTOL = 1e-9


class Squeezing(str, Enum):
    THERMAL = "thermal"
    SUB_MAXIMAL = "sub_maximal"
    MAXIMAL = "maximal"
    INVALID = "invalid"


@dataclass(frozen=True)
class SqueezingParams:
    """Number parameter ``n`` and squeezing ``m`` of a Gaussian mode.

    Construction does not validate, so that invalid parameters can still be
    classified; operations that need a state call :meth:`validate`.
    """

    n: float
    m: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "n", float(self.n))
        object.__setattr__(self, "m", complex(self.m))

    @property
    def delta(self) -> float:
        """Determinant ``n(n+1) - |m|^2`` of the covariance matrix."""
        return self.n * (self.n + 1.0) - abs(self.m) ** 2

    @property
    def _scale(self) -> float:
        return abs(self.n * (self.n + 1.0)) + 1.0

    def validate(self) -> "SqueezingParams":
        if not math.isfinite(self.n) or not cmath.isfinite(self.m):
            raise ValidationError(f"non-finite parameters n={self.n}, m={self.m}")
        if self.n < 0:
            raise ValidationError(f"n >= 0 violated: n = {self.n}")
        if self.delta < -CLASSIFY_RTOL * self._scale:
            raise ValidationError(
                f"n(n+1) - |m|^2 >= 0 violated: Delta = {self.delta:.6g} "
                f"(n = {self.n}, |m| = {abs(self.m)})"
            )
        return self


def covariance_matrix(p: SqueezingParams) -> np.ndarray:
    """Return ``[[n+1, m], [m*, n]]``."""
    p.validate()
    return np.array([[p.n + 1.0, p.m], [p.m.conjugate(), p.n]], dtype=complex)


def covariance_eigenvalues(p: SqueezingParams) -> tuple[float, float]:
    """Closed-form eigenvalues ``(lambda_+, lambda_-)`` of the covariance matrix."""
    p.validate()
    centre = 0.5 * (2.0 * p.n + 1.0)
    radius = math.sqrt(abs(p.m) ** 2 + 0.25)
    return centre + radius, centre - radius


def classify(p: SqueezingParams) -> Squeezing:
    if p.n < 0 or p.delta < -CLASSIFY_RTOL * p._scale:
        return Squeezing.INVALID
    if abs(p.m) <= 1e-12 * (1.0 + p.n):
        return Squeezing.THERMAL
    if abs(p.delta) <= CLASSIFY_RTOL * p._scale:
        return Squeezing.MAXIMAL
    return Squeezing.SUB_MAXIMAL


def characteristic_value(p: SqueezingParams, u: complex) -> float:
    """Gaussian characteristic function ``<exp(i u* a + i u a*)>``."""
    p.validate()
    u = complex(u)
    exponent = -0.5 * (2.0 * p.n + 1.0) * abs(u) ** 2 - (p.m * u.conjugate() ** 2).real
    return math.exp(exponent)


def quadrature_variance(p: SqueezingParams, lam: float = 0.0) -> float:
    """Variance rate of the quadrature ``e^{i lam} a + e^{-i lam} a*``."""
    p.validate()
    return 2.0 * p.n + 1.0 + 2.0 * (cmath.exp(2j * lam) * p.m).real
