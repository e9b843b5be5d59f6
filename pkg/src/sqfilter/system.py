"""
Finite-dimensional open system driven by a single squeezed noise channel.

The unitary obeys ``dU = (L dB* - L* dB + K dt) U`` with the quantum Ito
table ``dB dB* = (n+1) dt``, ``dB* dB = n dt``, ``dB dB = m dt``.  Expanding
``dU* X dU`` with that table fixes the sign of every squeezing term below:
the ``m`` contributions enter the generator with a minus sign, and ``K``
carries ``+ m L*^2 / 2`` so that the evolution is isometric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gaussian import SqueezingParams

log = logging.getLogger(__name__)

# Qubit basis: |0> ground, |1> excited.  sigma_minus = |0><1|.
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
SIGMA_Z = SIGMA_PLUS @ SIGMA_MINUS - SIGMA_MINUS @ SIGMA_PLUS
SIGMA_X = SIGMA_MINUS + SIGMA_PLUS
SIGMA_Y = 1j * (SIGMA_MINUS - SIGMA_PLUS)

NAMED_QUBIT_OPERATORS = {
    "sx": SIGMA_X,
    "sy": SIGMA_Y,
    "sz": SIGMA_Z,
    "sm": SIGMA_MINUS,
    "sp": SIGMA_PLUS,
    "id": np.eye(2, dtype=complex),
}


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Hamiltonian ``H``, coupling ``L`` and the bath state of the input field."""

    H: np.ndarray
    L: np.ndarray
    bath: SqueezingParams

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        L = np.array(self.L, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValidationError(f"H must be square, got shape {H.shape}")
        if L.shape != H.shape:
            raise ValidationError(f"L has shape {L.shape}, expected {H.shape}")
        if np.max(np.abs(H - dag(H)), initial=0.0) > 1e-12 * (1.0 + np.max(np.abs(H), initial=0.0)):
            raise ValidationError("H is not Hermitian")
        self.bath.validate()
        H.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "L", L)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    def _check_shape(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != self.H.shape:
            raise ValidationError(f"operator shape {a.shape} does not match system dimension {self.d}")
        return a


def ito_drift_K(mdl: SystemModel) -> np.ndarray:
    """``dt`` coefficient of the unitary QSDE.

    Satisfies ``K + K* + (n+1) L*L + n LL* - m L*^2 - m* L^2 = 0``.
    """
    n, m = mdl.bath.n, mdl.bath.m
    L, Ld = mdl.L, dag(mdl.L)
    return (
        -0.5 * (n + 1) * Ld @ L
        - 0.5 * n * L @ Ld
        + 0.5 * m * Ld @ Ld
        + 0.5 * m.conjugate() * L @ L
        - 1j * mdl.H
    )


def lindblad_heisenberg(mdl: SystemModel, X: np.ndarray) -> np.ndarray:
    """Generator acting on an observable ``X``."""
    X = mdl._check_shape(X)
    n, m = mdl.bath.n, mdl.bath.m
    L, Ld, H = mdl.L, dag(mdl.L), mdl.H

    def block(A, B):
        # 1/2 [A, X] B + 1/2 A [X, B]
        return 0.5 * (A @ X - X @ A) @ B + 0.5 * A @ (X @ B - B @ X)

    return (
        (n + 1) * block(Ld, L)
        + n * block(L, Ld)
        - m * block(Ld, Ld)
        - m.conjugate() * block(L, L)
        - 1j * (X @ H - H @ X)
    )


def lindblad_schrodinger(mdl: SystemModel, rho: np.ndarray) -> np.ndarray:
    """Trace-dual of :func:`lindblad_heisenberg`, acting on a density matrix."""
    rho = mdl._check_shape(rho)
    n, m = mdl.bath.n, mdl.bath.m
    L, Ld, H = mdl.L, dag(mdl.L), mdl.H

    def dissipator(A, B):
        # trace-dual of A X B - 1/2 (X A B + A B X)
        return B @ rho @ A - 0.5 * (A @ B @ rho + rho @ A @ B)

    return (
        (n + 1) * dissipator(Ld, L)
        + n * dissipator(L, Ld)
        - m * dissipator(Ld, Ld)
        - m.conjugate() * dissipator(L, L)
        - 1j * (H @ rho - rho @ H)
    )


def superoperator(mdl: SystemModel) -> np.ndarray:
    """Matrix of :func:`lindblad_schrodinger` on row-major ``vec(rho)``."""
    d = mdl.d
    sup = np.empty((d * d, d * d), dtype=complex)
    unit = np.zeros((d, d), dtype=complex)
    for k in range(d * d):
        unit.flat[k] = 1.0
        sup[:, k] = lindblad_schrodinger(mdl, unit).ravel()
        unit.flat[k] = 0.0
    return sup


def stationary_state(mdl: SystemModel) -> np.ndarray:
    """Null vector of the generator, normalised to unit trace."""
    sup = superoperator(mdl)
    _, s, vh = np.linalg.svd(sup)
    if s[-1] > 1e-10 * max(s[0], 1.0) or (len(s) > 1 and s[-2] < 1e-10 * max(s[0], 1.0)):
        log.warning("stationary state is not unique (smallest singular values %s)", s[-2:])
    rho = vh[-1].conj().reshape(mdl.d, mdl.d)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + dag(rho))


def check_state(rho: np.ndarray, d: int | None = None, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or (d is not None and rho.shape[0] != d):
        raise ValidationError(f"density matrix has shape {rho.shape}")
    if np.max(np.abs(rho - dag(rho))) > tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-8:
        raise ValidationError(f"density matrix trace is {np.trace(rho).real:.6g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -1e-8:
        raise ValidationError("density matrix is not positive semidefinite")
    return rho


def _rk4_propagator(sup: np.ndarray, dt: float) -> np.ndarray:
    # classical RK4 applied to a linear ODE is exactly this Taylor polynomial
    a = dt * sup
    eye = np.eye(sup.shape[0], dtype=complex)
    a2 = a @ a
    return eye + a + a2 / 2 + a2 @ a / 6 + a2 @ a2 / 24


def master_equation_path(mdl: SystemModel, rho0: np.ndarray, times: np.ndarray, dt: float = 1e-3) -> np.ndarray:
    """States at each of ``times`` (ascending, starting at 0 or later).

    Each interval between requested times is covered by an integer number of
    RK4 steps no longer than ``dt``.
    """
    rho0 = check_state(rho0, mdl.d)
    if dt <= 0:
        raise ValidationError("dt must be positive")
    times = np.asarray(times, dtype=float)
    sup = superoperator(mdl)
    out = np.empty((len(times), mdl.d, mdl.d), dtype=complex)
    vec = rho0.ravel().copy()
    t_prev = 0.0
    cache: dict[float, np.ndarray] = {}
    for i, t in enumerate(times):
        span = t - t_prev
        if span < -1e-12:
            raise ValidationError("times must be ascending and non-negative")
        if span > 0:
            steps = max(1, int(np.ceil(span / dt - 1e-9)))
            h = span / steps
            prop = cache.get(h)
            if prop is None:
                prop = cache[h] = _rk4_propagator(sup, h)
            for _ in range(steps):
                vec = prop @ vec
        rho = vec.reshape(mdl.d, mdl.d)
        out[i] = 0.5 * (rho + dag(rho))
        t_prev = t
    return out


def master_equation_evolve(
    mdl: SystemModel,
    rho0: np.ndarray,
    T: float,
    dt: float = 1e-3,
    check_convergence: bool = True,
    rtol: float = 1e-8,
) -> np.ndarray:
    """Integrate the master equation to time ``T`` with classical RK4.

    With ``check_convergence`` the run is repeated at ``dt/2`` and a warning
    is logged if the two results differ by more than ``rtol``.
    """
    rho = master_equation_path(mdl, rho0, [T], dt)[0]
    if check_convergence:
        finer = master_equation_path(mdl, rho0, [T], dt / 2)[0]
        gap = float(np.max(np.abs(finer - rho)))
        if gap > rtol:
            log.warning("master equation not converged at dt=%g: step-halving change %.3g", dt, gap)
        rho = finer
    return rho
