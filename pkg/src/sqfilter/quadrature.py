"""
Commutant quadrature phase and transfer coefficients.

For a balanced representation acting on the joint vacuum ``Psi``::

    [dB, dB*]^T Psi = [[alpha, beta], [gamma, delta]] [dZ, dZ']^T Psi

where ``Z = B + B*`` is the measured quadrature and
``Z' = e^{i lam} B' + e^{-i lam} B'*`` a quadrature of the commuting mode.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .bogoliubov import BalancedCoeffs
from .errors import DegeneratePhaseError, SingularTransferError
from .gaussian import SqueezingParams, quadrature_variance


@dataclass(frozen=True)
class TransferCoeffs:
    alpha: complex
    beta: complex
    gamma: complex
    delta: complex
    lam: float
    var_z: float
    var_zp: float
    det: complex

    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.beta], [self.gamma, self.delta]])


def _reduce_phase(lam: float) -> float:
    """Map ``lam`` into ``(-pi/2, pi/2]``."""
    lam = math.remainder(lam, math.pi)
    if lam <= -math.pi / 2:
        lam += math.pi
    return lam


def independent_phase(u: complex, v: float) -> float:
    """Phase making ``Z`` and ``Z'`` uncorrelated, reduced to ``(-pi/2, pi/2]``.

    Solves ``cos(lam) (v + Re u) - sin(lam) Im u = 0``.
    """
    u = complex(u)
    num, den = v + u.real, u.imag
    if math.hypot(num, den) <= 1e-12 * (1.0 + abs(u) + abs(v)):
        raise DegeneratePhaseError(
            f"Z and Z' are uncorrelated for every phase (u = {u}, v = {v}); choose lam explicitly"
        )
    return _reduce_phase(math.atan2(num, den))


def cross_variation(b: BalancedCoeffs, lam: float) -> float:
    """Rate of ``dZ dZ'``."""
    u, v = b.correlations()
    return 2.0 * (math.cos(lam) * (v + u.real) - math.sin(lam) * u.imag)


def _vacuum_action(b: BalancedCoeffs, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Matrices taking ``[dA1*, dA2*] Psi`` to ``[dB, dB*] Psi`` and ``[dZ, dZ'] Psi``."""
    x, y, z, w = b.as_tuple()
    xc, zc = x.conjugate(), z.conjugate()
    e = cmath.exp(1j * lam)
    noise = np.array([[y, w], [xc, zc]])
    quad = np.array([[xc + y, zc + w], [e * w + zc / e, e * y + xc / e]])
    return noise, quad


def transfer_matrix(b: BalancedCoeffs, lam: float) -> TransferCoeffs:
    noise, quad = _vacuum_action(b, lam)
    det = quad[0, 0] * quad[1, 1] - quad[0, 1] * quad[1, 0]
    scale = 1.0 + sum(abs(c) for c in b.as_tuple())
    if abs(det) < 1e-12 * scale**2:
        raise SingularTransferError(f"transfer matrix singular: |D| = {abs(det):.3g}", det)
    quad_inv = np.array([[quad[1, 1], -quad[0, 1]], [-quad[1, 0], quad[0, 0]]]) / det
    (alpha, beta), (gamma, delta) = noise @ quad_inv
    p = b.marginal()
    return TransferCoeffs(
        alpha=complex(alpha),
        beta=complex(beta),
        gamma=complex(gamma),
        delta=complex(delta),
        lam=float(lam),
        var_z=quadrature_variance(p, 0.0),
        var_zp=quadrature_variance(p, lam),
        det=complex(det),
    )


def transfer_for(b: BalancedCoeffs, lam: float | None = None, fallback: float | None = None) -> TransferCoeffs:
    """Transfer coefficients at the independent phase, or at ``lam`` if given.

    When every phase is independent (e.g. the vacuum) the phase is
    ``fallback``; with ``fallback=None`` that case raises
    :class:`DegeneratePhaseError`.
    """
    if lam is None:
        try:
            lam = independent_phase(*b.correlations())
        except DegeneratePhaseError:
            if fallback is None:
                raise
            lam = fallback
    return transfer_matrix(b, lam)


def reconstructed_moments(t: TransferCoeffs) -> tuple[float, float, complex]:
    """``(<dB dB*>, <dB* dB>, <dB dB>)`` rebuilt from ``t`` (independent phase)."""
    a, b, g, d = t.alpha, t.beta, t.gamma, t.delta
    vz, vzp = t.var_z, t.var_zp
    return (
        abs(g) ** 2 * vz + abs(d) ** 2 * vzp,
        abs(a) ** 2 * vz + abs(b) ** 2 * vzp,
        g.conjugate() * a * vz + d.conjugate() * b * vzp,
    )


@dataclass(frozen=True)
class TransferReport:
    n: float
    n_plus_1: float
    m: float
    sum_alpha_gamma: float
    sum_beta_delta: float

    @property
    def max_residual(self) -> float:
        return max(self.n, self.n_plus_1, self.m, self.sum_alpha_gamma, self.sum_beta_delta)


def verify_transfer_identities(t: TransferCoeffs, p: SqueezingParams) -> TransferReport:
    """Residuals of the moment identities, using first-principles variances."""
    p.validate()
    var_z = quadrature_variance(p, 0.0)
    var_zp = quadrature_variance(p, t.lam)
    a, b, g, d = t.alpha, t.beta, t.gamma, t.delta
    return TransferReport(
        n=abs(abs(a) ** 2 * var_z + abs(b) ** 2 * var_zp - p.n),
        n_plus_1=abs(abs(g) ** 2 * var_z + abs(d) ** 2 * var_zp - p.n - 1.0),
        m=abs(g.conjugate() * a * var_z + d.conjugate() * b * var_zp - p.m),
        sum_alpha_gamma=abs(a + g - 1.0),
        sum_beta_delta=abs(b + d),
    )


@dataclass(frozen=True)
class ClosedFormCheck:
    """Tabulated closed forms for ``alpha, gamma`` against the transfer matrix.

    ``alpha_moment`` is ``(n + m) / (2n + 1 + 2 Re m)``, which is what the
    moment identities give when the quadrature variance is ``2n+1+2Re m``.
    """

    alpha_printed: complex
    gamma_printed: complex
    alpha_moment: complex
    gamma_moment: complex
    alpha_transfer: complex
    gamma_transfer: complex
    printed_discrepancy: float
    moment_discrepancy: float
    tol: float = 1e-9

    @property
    def consistent(self) -> bool:
        return self.printed_discrepancy <= self.tol

    @property
    def moment_form_matches(self) -> bool:
        return self.moment_discrepancy <= self.tol


def closed_form_alpha_gamma(p: SqueezingParams, b: BalancedCoeffs | None = None) -> ClosedFormCheck:
    """Compare the tabulated ``alpha, gamma`` with :func:`transfer_matrix`.

    ``b`` defaults to the BV representation of ``p``; the transfer matrix at
    the independent phase is authoritative.
    """
    from .bogoliubov import balanced_from_nm

    p.validate()
    n, m = p.n, p.m
    den = 2 * n + 1 + m.real
    alpha_p = complex(n + 0.5 * m.real, m.imag) / den
    gamma_p = complex(n + 1 + 0.5 * m.real, -m.imag) / den
    var_z = quadrature_variance(p, 0.0)
    alpha_m = (n + m) / var_z
    gamma_m = (n + 1 + m.conjugate()) / var_z
    if b is None:
        b = balanced_from_nm(p)
    try:
        t = transfer_for(b)
    except DegeneratePhaseError:
        t = transfer_matrix(b, 0.0)
    disc_p = max(abs(alpha_p - t.alpha), abs(gamma_p - t.gamma))
    disc_m = max(abs(alpha_m - t.alpha), abs(gamma_m - t.gamma))
    return ClosedFormCheck(alpha_p, gamma_p, alpha_m, gamma_m, t.alpha, t.gamma, disc_p, disc_m)


# ---------------------------------------------------------------------------
# phase curves for the BV family

#: rho used in place of infinity at tau = 1/2 (tanh(rho) == 1 in double precision)
RHO_CAP = 40.0


def formula_phase(tau: float, theta: float) -> float:
    """``arctan((2 tau + cos theta) / sin theta)``; NaN where ``sin theta = 0``."""
    s = math.sin(theta)
    if abs(s) <= 1e-12:
        return math.nan
    return math.atan((2.0 * tau + math.cos(theta)) / s)


def rho_for_tau(tau: float) -> float:
    """Single-mode squeezing ``rho`` with ``cosh^2(rho/2) / cosh(rho) = tau``.

    Equivalently ``2 tau = 1 + sech rho``; defined for ``tau`` in ``[1/2, 1]``
    with ``tau = 1/2`` mapped to :data:`RHO_CAP`.
    """
    if not 0.5 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [1/2, 1], got {tau}")
    if tau - 0.5 <= 1e-15:
        return RHO_CAP
    return min(math.acosh(1.0 / (2.0 * tau - 1.0)), RHO_CAP)


@dataclass(frozen=True)
class PhaseCurvePoint:
    tau: float
    theta: float
    rho: float
    lam_formula: float
    lam_derived: float
    degenerate: bool
    rho_capped: bool

    @property
    def difference(self) -> float:
        return self.lam_formula - self.lam_derived


def phase_curve(taus, thetas, r: float = 1.0) -> list[PhaseCurvePoint]:
    """Tabulated formula and independent phase of ``balanced_from_bv(r, rho(tau), theta)``.

    The independent phase does not depend on ``r > 0``.  Rows with
    ``sin theta = 0`` are kept and flagged ``degenerate``.
    """
    from .bogoliubov import balanced_from_bv

    if r <= 0:
        raise ValueError("r must be positive")
    out = []
    for tau in taus:
        rho = rho_for_tau(float(tau))
        for theta in thetas:
            theta = float(theta)
            b = balanced_from_bv(r, rho, theta)
            try:
                lam = independent_phase(*b.correlations())
            except DegeneratePhaseError:
                lam = math.nan
            out.append(PhaseCurvePoint(
                float(tau), theta, rho, formula_phase(float(tau), theta), lam,
                degenerate=abs(math.sin(theta)) <= 1e-12,
                rho_capped=rho == RHO_CAP,
            ))
    return out
