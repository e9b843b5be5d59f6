"""
Two-mode Bogoliubov transformations.

A transformation acting on vacuum modes ``a1, a2`` is stored as a 2x4 array
whose row ``i`` holds ``(x_i, y_i, z_i, w_i)``::

    b_i = x_i a1 + y_i a1* + z_i a2 + w_i a2*

Balanced transformations have their second row equal to the first with the
two mode labels interchanged, ``(z, w, x, y)``, so both output modes share
the same marginal state.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearMaximalWarning, SingularParametrizationError, ValidationError
from .gaussian import Squeezing, SqueezingParams, classify

DEFAULT_TOL = 1e-9
#: relative deficit Delta / (n(n+1) + 1) below which HKKR warns
NEAR_MAXIMAL_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class TwoModeCoeffs:
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=complex)
        if rows.shape != (2, 4):
            raise ValidationError(f"expected 2x4 coefficient rows, got {rows.shape}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, row1, row2) -> "TwoModeCoeffs":
        return cls(np.array([row1, row2], dtype=complex))

    @classmethod
    def identity(cls) -> "TwoModeCoeffs":
        return cls.from_rows((1, 0, 0, 0), (0, 0, 1, 0))

    @classmethod
    def araki_woods(cls, n: float) -> "TwoModeCoeffs":
        """Thermal Araki-Woods pair ``b1 = sqrt(n+1) a1 + sqrt(n) a2*``."""
        s1, s0 = math.sqrt(n + 1.0), math.sqrt(n)
        return cls.from_rows((s1, 0, 0, s0), (0, s0, s1, 0))

    @property
    def s_minus(self) -> np.ndarray:
        """Coefficients of the annihilators, ``[[x1, z1], [x2, z2]]``."""
        return self.rows[:, [0, 2]]

    @property
    def s_plus(self) -> np.ndarray:
        """Coefficients of the creators, ``[[y1, w1], [y2, w2]]``."""
        return self.rows[:, [1, 3]]

    def doubled(self) -> np.ndarray:
        """4x4 matrix mapping ``(a1, a2, a1*, a2*)`` to ``(b1, b2, b1*, b2*)``."""
        sm, sp = self.s_minus, self.s_plus
        return np.block([[sm, sp], [sp.conj(), sm.conj()]])

    def __repr__(self):
        return f"TwoModeCoeffs({self.rows.tolist()!r})"


@dataclass(frozen=True)
class BalancedCoeffs:
    x: complex
    y: complex
    z: complex
    w: complex

    def __post_init__(self):
        for name in "xyzw":
            object.__setattr__(self, name, complex(getattr(self, name)))

    @classmethod
    def vacuum(cls) -> "BalancedCoeffs":
        return cls(1, 0, 0, 0)

    def as_tuple(self) -> tuple[complex, complex, complex, complex]:
        return self.x, self.y, self.z, self.w

    def residuals(self) -> tuple[float, float]:
        """Residuals of the norm and cross identities of a balanced transform."""
        x, y, z, w = self.as_tuple()
        norm = abs(x) ** 2 + abs(z) ** 2 - abs(y) ** 2 - abs(w) ** 2 - 1.0
        cross = x * z.conjugate() + z * x.conjugate() - y * w.conjugate() - w * y.conjugate()
        return abs(norm), abs(cross)

    def check(self, tol: float = DEFAULT_TOL) -> "BalancedCoeffs":
        norm, cross = self.residuals()
        if max(norm, cross) > tol:
            raise ValidationError(
                f"not a balanced Bogoliubov transform: norm residual {norm:.3g}, "
                f"cross residual {cross:.3g} (tol {tol:.1g})"
            )
        return self

    def marginal(self) -> SqueezingParams:
        """Shared marginal ``(n, m) = (|y|^2 + |w|^2, xy + zw)``."""
        x, y, z, w = self.as_tuple()
        return SqueezingParams(abs(y) ** 2 + abs(w) ** 2, x * y + z * w)

    def correlations(self) -> tuple[complex, float]:
        """Inter-mode correlations ``(u, v) = (xw + zy, 2 Re(y* w))``."""
        x, y, z, w = self.as_tuple()
        return x * w + z * y, 2.0 * (y.conjugate() * w).real


@dataclass(frozen=True)
class BogoliubovReport:
    """Largest violation of each Bogoliubov coefficient identity."""

    commutator: float  # [b_i, b_j*] = delta_ij
    annihilators: float  # [b_1, b_2] = 0
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.commutator, self.annihilators)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def verify_bogoliubov(c: TwoModeCoeffs, tol: float = DEFAULT_TOL) -> BogoliubovReport:
    sm, sp = c.s_minus, c.s_plus
    gram = sm @ sm.conj().T - sp @ sp.conj().T
    commutator = float(np.max(np.abs(gram - np.eye(2))))
    x1, y1, z1, w1 = c.rows[0]
    x2, y2, z2, w2 = c.rows[1]
    annihilators = abs(x1 * y2 - y1 * x2 + z1 * w2 - w1 * z2)
    return BogoliubovReport(commutator, float(annihilators), tol)


def _require_bogoliubov(c: TwoModeCoeffs, tol: float) -> None:
    report = verify_bogoliubov(c, tol)
    if not report.passed:
        err = ValidationError(
            f"coefficients are not a Bogoliubov transform "
            f"(commutator residual {report.commutator:.3g}, "
            f"annihilator residual {report.annihilators:.3g}, tol {tol:.1g})"
        )
        err.report = report
        raise err


def marginals(c: TwoModeCoeffs, tol: float = DEFAULT_TOL) -> tuple[SqueezingParams, SqueezingParams]:
    _require_bogoliubov(c, tol)
    out = []
    for x, y, z, w in c.rows:
        n = abs(y) ** 2 + abs(w) ** 2
        # |x|^2 + |z|^2 = n + 1 follows from the commutator identity
        assert abs(abs(x) ** 2 + abs(z) ** 2 - n - 1.0) <= 10 * tol * (1.0 + n)
        out.append(SqueezingParams(n, x * y + z * w))
    return out[0], out[1]


def correlations(c: TwoModeCoeffs, tol: float = DEFAULT_TOL) -> tuple[complex, complex]:
    """Return ``(u, v) = (<b1 b2>, <b1 b2*>)`` on the joint vacuum."""
    _require_bogoliubov(c, tol)
    x1, y1, z1, w1 = c.rows[0]
    x2, y2, z2, w2 = c.rows[1]
    return x1 * y2 + z1 * w2, x1 * x2.conjugate() + z1 * z2.conjugate()


def invert(c: TwoModeCoeffs, tol: float = DEFAULT_TOL) -> TwoModeCoeffs:
    """Coefficients expressing ``a1, a2`` in terms of ``b1, b1*, b2, b2*``.

    ``a = S_-^dagger b - S_+^T b*``, so row ``i`` is
    ``(conj(S_-)[0, i], -S_+[0, i], conj(S_-)[1, i], -S_+[1, i])``.
    """
    _require_bogoliubov(c, tol)
    inv_minus = c.s_minus.conj().T
    inv_plus = -c.s_plus.T
    rows = np.empty((2, 4), dtype=complex)
    rows[:, 0] = inv_minus[:, 0]
    rows[:, 1] = inv_plus[:, 0]
    rows[:, 2] = inv_minus[:, 1]
    rows[:, 3] = inv_plus[:, 1]
    return TwoModeCoeffs(rows)


def compose(outer: TwoModeCoeffs, inner: TwoModeCoeffs) -> TwoModeCoeffs:
    """Coefficients of ``outer`` applied to the modes produced by ``inner``."""
    full = outer.doubled() @ inner.doubled()
    return TwoModeCoeffs(np.column_stack([full[:2, 0], full[:2, 2], full[:2, 1], full[:2, 3]]))


def lift_balanced(b: BalancedCoeffs, tol: float = DEFAULT_TOL) -> TwoModeCoeffs:
    b.check(tol)
    x, y, z, w = b.as_tuple()
    return TwoModeCoeffs.from_rows((x, y, z, w), (z, w, x, y))


def balanced_from_bv(r: float, rho: float, theta: float) -> BalancedCoeffs:
    """Balanced transform from two-mode squeezing ``r``, single-mode squeezing
    ``rho`` and rotation ``theta``."""
    cr, sr = math.cosh(r / 2), math.sinh(r / 2)
    cp, sp = math.cosh(rho / 2), math.sinh(rho / 2)
    phase = cmath.exp(0.5j * theta)
    return BalancedCoeffs(phase * cr * cp, phase * cr * sp, phase * sr * sp, phase * sr * cp)


def bv_parameters(p: SqueezingParams) -> tuple[float, float, float]:
    """Inverse of :func:`balanced_from_bv` at the level of marginals.

    Returns ``(r, rho, theta)`` whose balanced transform has marginal ``p``.
    Valid for every admissible ``p`` including maximal squeezing (``r = 0``).
    """
    p.validate()
    delta = max(p.delta, 0.0)
    r = math.asinh(2.0 * math.sqrt(delta))
    rho = math.asinh(2.0 * abs(p.m) / math.cosh(r))
    theta = cmath.phase(p.m) if p.m != 0 else 0.0
    return r, rho, theta


def balanced_from_nm(p: SqueezingParams) -> BalancedCoeffs:
    return balanced_from_bv(*bv_parameters(p))


def hkkr_raw(n: float, m: complex) -> tuple[complex, complex, complex, complex]:
    """The closed-form HKKR quadruple exactly as tabulated.

    Its marginal is ``(n, m)``, but for ``m != 0`` the cross identity
    ``x z* + z x* - y w* - w y* = 0`` fails, so the interchanged second row
    does not commute with the first.  :func:`balanced_from_hkkr` repairs this.
    """
    p = SqueezingParams(n, m)
    kind = classify(p)
    if kind in (Squeezing.INVALID, Squeezing.MAXIMAL):
        raise DomainError(f"HKKR construction needs sub-maximal squeezing, got {kind.value} ({n}, {m})")
    if kind is Squeezing.SUB_MAXIMAL and p.delta < NEAR_MAXIMAL_RTOL * p._scale:
        warnings.warn(
            f"HKKR coefficients near maximal squeezing (Delta = {p.delta:.3g}) lose precision; "
            "the bv representation is exact there",
            NearMaximalWarning,
            stacklevel=3,
        )
    m = complex(m)
    rho = math.sqrt(abs(m) ** 2 + 0.25)
    den_plus, den_minus = rho * (rho + m.real), rho * (rho - m.real)
    if den_plus <= 0 or den_minus <= 0:
        raise SingularParametrizationError(f"HKKR denominator vanishes: rho = {rho}, Re m = {m.real}")
    k_plus = math.sqrt((n + 0.5 + rho) / den_plus)
    k_minus = math.sqrt(max(n + 0.5 - rho, 0.0) / den_minus)
    return (
        k_plus * (rho / 2 + m / 2 + 0.25),
        k_plus * (rho / 2 + m / 2 - 0.25),
        k_minus * (rho / 2 - m / 2 - 0.25),
        k_minus * (rho / 2 - m / 2 + 0.25),
    )


def balanced_from_hkkr(n: float, m: complex) -> BalancedCoeffs:
    """HKKR representation of a sub-maximal ``(n, m)``, made balanced.

    The tabulated quadruple is phase-rotated on the second vacuum mode,
    ``(z, w) -> (e^{i phi} z, e^{-i phi} w)``.  The rotation leaves ``|z|``,
    ``|w|`` and ``zw`` (hence the marginal) unchanged and ``phi`` is chosen to
    zero the cross identity.  For ``m = 0`` no rotation is applied and the
    Araki-Woods coefficients are returned unchanged.
    """
    x, y, z, w = hkkr_raw(n, m)
    c = x * z.conjugate() - y.conjugate() * w
    if abs(c) > 1e-15 * (abs(x) * abs(z) + abs(y) * abs(w) + 1.0):
        # cross residual is 2 Re(e^{-i phi} c); make e^{-i phi} c imaginary
        phi = cmath.phase(c) - math.pi / 2
        rot = cmath.exp(1j * phi)
        z, w = rot * z, w / rot
    return BalancedCoeffs(x, y, z, w)


def doubled_matrix_inverse_check(s_minus, s_plus, conj=None) -> float:
    """Max-norm residual of ``S @ S_inv - I`` for the doubled matrix.

    ``conj`` is ``None`` for entrywise complex conjugation, or a symmetric
    unitary ``U`` describing the conjugation ``psi -> U conj(psi)``.
    """
    s_minus = np.asarray(s_minus, dtype=complex)
    s_plus = np.asarray(s_plus, dtype=complex)
    dim = s_minus.shape[0]
    u = np.eye(dim, dtype=complex) if conj is None else np.asarray(conj, dtype=complex)
    if np.max(np.abs(u @ u.conj() - np.eye(dim))) > 1e-12:
        raise ValidationError("conjugation matrix U must satisfy U conj(U) = I")

    def sharp(a):
        return u @ a.conj() @ u.conj()

    def transpose(a):
        return u @ a.T @ u.conj()

    doubled = np.block([[s_minus, s_plus], [sharp(s_plus), sharp(s_minus)]])
    inverse = np.block([
        [s_minus.conj().T, -transpose(s_plus)],
        [-s_plus.conj().T, transpose(s_minus)],
    ])
    return float(np.max(np.abs(doubled @ inverse - np.eye(2 * dim))))
