"""
Quantum filters for homodyne detection of a squeezed-noise output.

States are propagated in the density (Schroedinger-dual) picture:
``sigma_t(X) = tr(varsigma_t X)`` for the unnormalised (Zakai) filter and
``pi_t(X) = tr(rho_t X)`` for the normalised (Kushner-Stratonovich) filter.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import StepFailure, ValidationError
from .system import SystemModel, check_state, dag, lindblad_schrodinger, superoperator
from .quadrature import TransferCoeffs

log = logging.getLogger(__name__)

SCHEMES = ("euler", "normalized")


@dataclass(frozen=True, eq=False)
class FilterState:
    rho: np.ndarray
    t: float = 0.0

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)


def tilde_L(mdl: SystemModel, tc: TransferCoeffs) -> np.ndarray:
    """Measurement operator ``gamma L - alpha L^dagger``."""
    return tc.gamma * mdl.L - tc.alpha * dag(mdl.L)


def _hermitize(a):
    return 0.5 * (a + dag(a))


def zakai_step(mdl: SystemModel, tc: TransferCoeffs, s: FilterState, dY: float, dt: float) -> FilterState:
    if dt <= 0:
        raise ValidationError("dt must be positive")
    lt = tilde_L(mdl, tc)
    rho = s.rho
    new = rho + lindblad_schrodinger(mdl, rho) * dt + (lt @ rho + rho @ dag(lt)) * dY
    return FilterState(_hermitize(new), s.t + dt)


def kushner_step(
    mdl: SystemModel,
    tc: TransferCoeffs,
    s: FilterState,
    dI: float,
    dt: float,
    scheme: str = "euler",
) -> FilterState:
    """One step of the normalised filter driven by the innovation ``dI``.

    ``scheme="euler"`` is Euler-Maruyama on the nonlinear equation;
    ``"normalized"`` takes an Euler step of the linear equation with
    ``dY = dI + var_z tr((tL + tL^dagger) rho) dt`` and renormalises.
    """
    if abs(s.trace - 1.0) > 1e-8:
        raise ValidationError(f"kushner_step needs a normalised state, trace = {s.trace}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    lt = tilde_L(mdl, tc)
    rho = s.rho
    gain = lt @ rho + rho @ dag(lt)
    c = np.trace(gain).real
    drift = lindblad_schrodinger(mdl, rho) * dt
    if scheme == "normalized":
        new = rho + drift + gain * (dI + tc.var_z * c * dt)
    else:
        new = rho + drift + (gain - c * rho) * dI
    new = _hermitize(new)
    tr = np.trace(new).real
    if not tr > 0:
        raise StepFailure(f"trace collapsed to {tr:.3g} at t={s.t + dt:.6g}; reduce dt", time=s.t + dt)
    return FilterState(new / tr, s.t + dt)


def innovations_increment(mdl: SystemModel, tc: TransferCoeffs, rho: np.ndarray, dY: float, dt: float) -> float:
    lt = tilde_L(mdl, tc)
    return float(dY - tc.var_z * np.trace((lt + dag(lt)) @ rho).real * dt)


def standard_normals(seed: int, n_traj: int, n_steps: int, first: int = 0) -> np.ndarray:
    """Unit normals, one independent stream per trajectory index.

    Row ``i`` depends only on ``(seed, first + i)``, so chunked or parallel
    runs reproduce a serial run exactly.
    """
    out = np.empty((n_traj, n_steps))
    for i in range(n_traj):
        ss = np.random.SeedSequence(seed, spawn_key=(first + i,))
        out[i] = np.random.default_rng(ss).standard_normal(n_steps)
    return out


def _observables(observables) -> tuple[list[str], np.ndarray]:
    if isinstance(observables, dict):
        names = list(observables)
        mats = [np.asarray(observables[k], dtype=complex) for k in names]
    else:
        mats = [np.asarray(x, dtype=complex) for x in observables]
        names = [f"obs{i}" for i in range(len(mats))]
    if not mats:
        raise ValidationError("at least one observable is required")
    return names, np.stack(mats)


def _grid(T: float, dt: float) -> int:
    if T <= 0 or dt <= 0:
        raise ValidationError("T and dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValidationError(f"T={T} is not an integer multiple of dt={dt}")
    return steps


@dataclass
class Trajectory:
    """One measurement record with the filter's estimates along it."""

    times: np.ndarray
    dY: np.ndarray
    estimates: dict[str, np.ndarray]
    seed: int
    index: int = 0
    dt: float = 0.0
    normalization: np.ndarray | None = None
    snapshots: np.ndarray | None = None
    min_eigenvalue: float | None = None


@dataclass
class Ensemble:
    """Estimates for many independent trajectories on a common grid.

    ``estimates`` has shape ``(M, R, k)``; ``times`` the ``R`` recorded times.
    """

    times: np.ndarray
    names: list[str]
    estimates: np.ndarray
    dY: np.ndarray
    dt: float
    var_z: float
    seed: int
    mode: str
    normalization: np.ndarray | None = None
    innovation_drift: np.ndarray | None = None
    min_eigenvalue: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_trajectories(self) -> int:
        return self.estimates.shape[0]

    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    def stderr(self) -> np.ndarray:
        M = self.n_trajectories
        if M < 2:
            return np.full(self.estimates.shape[1:], np.nan)
        re = self.estimates.real.std(axis=0, ddof=1)
        im = self.estimates.imag.std(axis=0, ddof=1)
        return np.hypot(re, im) / np.sqrt(M)

    def innovations(self) -> np.ndarray:
        """Innovation increments ``dY - tr((L + L^dagger) rho) dt`` (Kushner mode)."""
        return self.extra["dI"]

    def trajectory(self, i: int) -> Trajectory:
        est = {name: self.estimates[i, :, q] for q, name in enumerate(self.names)}
        norm = None if self.normalization is None else self.normalization[i]
        return Trajectory(self.times, self.dY[i], est, self.seed, i, self.dt, norm)


def _chunks(M: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, M))
    edges = np.linspace(0, M, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_chunks(fn, M, workers):
    chunks = _chunks(M, workers)
    if len(chunks) == 1:
        return [fn(*chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))


def run_kushner_ensemble(
    mdl: SystemModel,
    tc: TransferCoeffs,
    rho0,
    T: float,
    dt: float,
    seed: int,
    observables,
    n_traj: int = 1,
    stride: int = 1,
    scheme: str = "euler",
    monitor_positivity: bool = False,
    workers: int = 1,
    dI=None,
) -> Ensemble:
    """Simulate measurement records under the physical measure and filter them.

    Each step draws ``dI ~ N(0, var_z dt)`` and forms
    ``dY = dI + var_z tr((tL + tL^dagger) rho) dt``.  Innovation paths may be
    supplied as ``dI`` (shape ``(M, N)``) instead of being drawn.
    """
    rho0 = check_state(rho0, mdl.d)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    N = _grid(T, dt)
    names, obs = _observables(observables)
    sup, lt = superoperator(mdl), tilde_L(mdl, tc)
    scale = np.sqrt(tc.var_z * dt)
    given = None
    if dI is not None:
        given = np.atleast_2d(np.asarray(dI, dtype=float))
        if given.shape[1] != N:
            raise ValidationError(f"dI has {given.shape[1]} steps, grid has {N}")
        n_traj = given.shape[0]

    def work(a, b):
        inc = given[a:b] if given is not None else standard_normals(seed, b - a, N, first=a) * scale
        est, dY, min_eig, fail = _kernels.kushner_ensemble(
            rho0, sup, lt, obs, inc, dt, tc.var_z, stride, scheme == "normalized", monitor_positivity
        )
        return inc, est, dY, min_eig, fail

    parts = _run_chunks(work, n_traj, workers)
    dI, est, dY, min_eig, fail = (np.concatenate(x) for x in zip(*parts))
    bad = np.flatnonzero(fail >= 0)
    if bad.size:
        i = int(bad[0])
        t_fail = (fail[i] + 1) * dt
        raise StepFailure(f"trajectory {i}: trace collapsed at t={t_fail:.6g}; reduce dt", time=t_fail, trajectory=i)
    if monitor_positivity:
        worst = float(min_eig.min())
        if worst < -1e-6:
            log.warning("positivity violated: min eigenvalue %.3g", worst)
    times = np.arange(est.shape[1]) * stride * dt
    return Ensemble(
        times, names, est, dY, dt, tc.var_z, seed, "kushner",
        min_eigenvalue=min_eig if monitor_positivity else None,
        extra={"dI": dI, "scheme": scheme},
    )


def run_zakai_ensemble(
    mdl: SystemModel,
    tc: TransferCoeffs,
    rho0,
    T: float,
    dt: float,
    seed: int,
    observables,
    n_traj: int = 1,
    stride: int = 1,
    workers: int = 1,
    dY=None,
) -> Ensemble:
    """Unnormalised filter driven by reference-measure records.

    Under the reference measure ``Y`` is a Wiener process with variance rate
    ``var_z``.  ``dY`` may be supplied (shape ``(M, N)``) to drive the filter
    along given records instead.
    """
    rho0 = check_state(rho0, mdl.d)
    N = _grid(T, dt)
    names, obs = _observables(observables)
    sup, lt = superoperator(mdl), tilde_L(mdl, tc)
    lpl = mdl.L + dag(mdl.L)
    if dY is not None:
        dY = np.atleast_2d(np.asarray(dY, dtype=float))
        if dY.shape[1] != N:
            raise ValidationError(f"dY has {dY.shape[1]} steps, grid has {N}")
        n_traj = dY.shape[0]
    scale = np.sqrt(tc.var_z * dt)

    def work(a, b):
        inc = dY[a:b] if dY is not None else standard_normals(seed, b - a, N, first=a) * scale
        sig, trace, drift, fail = _kernels.zakai_ensemble(rho0, sup, lt, obs, lpl, inc, dt, stride)
        return inc, sig, trace, drift, fail

    parts = _run_chunks(work, n_traj, workers)
    inc, sig, trace, drift, fail = (np.concatenate(x) for x in zip(*parts))
    bad = np.flatnonzero(fail >= 0)
    if bad.size:
        i = int(bad[0])
        t_fail = (fail[i] + 1) * dt
        raise StepFailure(f"trajectory {i}: trace collapsed at t={t_fail:.6g}; reduce dt", time=t_fail, trajectory=i)
    times = np.arange(sig.shape[1]) * stride * dt
    return Ensemble(
        times, names, sig, inc, dt, tc.var_z, seed, "zakai",
        normalization=trace, innovation_drift=drift,
    )


def simulate_trajectory(mdl, tc, rho0, T, dt, seed, observables, index=0, scheme="euler", snapshot_stride=0):
    """Single physical-measure trajectory, stepped with :func:`kushner_step`.

    Uses the noise stream of trajectory ``index`` so it reproduces row
    ``index`` of :func:`run_kushner_ensemble` with the same seed.
    """
    rho0 = check_state(rho0, mdl.d)
    N = _grid(T, dt)
    names, obs = _observables(observables)
    dI = standard_normals(seed, 1, N, first=index)[0] * np.sqrt(tc.var_z * dt)
    lt = tilde_L(mdl, tc)
    lpl_t = lt + dag(lt)
    est = np.empty((N + 1, len(names)), dtype=complex)
    dY = np.empty(N)
    snaps = []
    state = FilterState(rho0, 0.0)
    est[0] = [np.trace(state.rho @ x) for x in obs]
    min_eig = np.linalg.eigvalsh(rho0)[0]
    for s in range(N):
        dY[s] = dI[s] + tc.var_z * np.trace(lpl_t @ state.rho).real * dt
        try:
            state = kushner_step(mdl, tc, state, dI[s], dt, scheme)
        except StepFailure as exc:
            exc.trajectory = index
            raise
        est[s + 1] = [np.trace(state.rho @ x) for x in obs]
        min_eig = min(min_eig, np.linalg.eigvalsh(state.rho)[0])
        if snapshot_stride and (s + 1) % snapshot_stride == 0:
            snaps.append(state.rho)
    times = np.arange(N + 1) * dt
    return Trajectory(
        times, dY, {k: est[:, q] for q, k in enumerate(names)}, seed, index, dt,
        snapshots=np.array(snaps) if snaps else None, min_eigenvalue=float(min_eig),
    )


def simulate_zakai_reference(mdl, tc, rho0, T, dt, seed, observables, index=0, dY=None):
    """Single reference-measure trajectory, stepped with :func:`zakai_step`.

    ``estimates`` holds ``sigma_t(X)``; ``normalization`` holds
    ``sigma_t(I)``, so ``estimates / normalization`` is the normalised filter.
    """
    rho0 = check_state(rho0, mdl.d)
    N = _grid(T, dt)
    names, obs = _observables(observables)
    if dY is None:
        dY = standard_normals(seed, 1, N, first=index)[0] * np.sqrt(tc.var_z * dt)
    dY = np.asarray(dY, dtype=float)
    est = np.empty((N + 1, len(names)), dtype=complex)
    norm = np.empty(N + 1)
    state = FilterState(rho0.copy(), 0.0)
    est[0] = [np.trace(state.rho @ x) for x in obs]
    norm[0] = state.trace
    for s in range(N):
        state = zakai_step(mdl, tc, state, dY[s], dt)
        est[s + 1] = [np.trace(state.rho @ x) for x in obs]
        norm[s + 1] = state.trace
    times = np.arange(N + 1) * dt
    return Trajectory(times, dY, {k: est[:, q] for q, k in enumerate(names)}, seed, index, dt, normalization=norm)
