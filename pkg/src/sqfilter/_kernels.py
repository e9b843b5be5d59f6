"""
Ensemble integration kernels for the Kushner-Stratonovich and Zakai filters.

Two interchangeable implementations share one calling convention:

* numba ``@njit`` loops over trajectories and steps (default), and
* pure numpy, vectorised over the trajectory axis.

Set ``SQFILTER_DISABLE_NUMBA=1`` to force the numpy path.  Both consume the
same pre-drawn noise, so results agree to round-off.

All kernels take the drift superoperator ``sup`` acting on row-major
``vec(rho)``, the measurement operator ``lt`` (``tilde L``) and a stack of
observables ``obs`` with shape ``(k, d, d)``.  Estimates are recorded at
step 0 and then every ``stride`` steps.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FALSE = {"", "0", "false", "no", "off"}


def numba_available() -> bool:
    return numba is not None


def backend() -> str:
    """``"numba"`` or ``"numpy"``; read from the environment at call time."""
    disabled = os.environ.get("SQFILTER_DISABLE_NUMBA", "").strip().lower() not in _FALSE
    return "numpy" if disabled or numba is None else "numba"


def n_records(n_steps: int, stride: int) -> int:
    return n_steps // stride + 1


# ---------------------------------------------------------------------------
# numpy implementation

def _np_expect(rho, obs):
    # tr(rho X_k) for a batch of states, shape (M, k)
    return np.einsum("mij,kji->mk", rho, obs)


def _np_min_eig(rho):
    return np.linalg.eigvalsh(rho)[:, 0]


def kushner_numpy(rho0, sup, lt, obs, dI, dt, var_z, stride, normalized, monitor):
    M, N = dI.shape
    d = rho0.shape[0]
    R = n_records(N, stride)
    est = np.empty((M, R, obs.shape[0]), dtype=np.complex128)
    dY = np.empty((M, N))
    min_eig = np.full(M, np.inf)
    fail = np.full(M, -1, dtype=np.int64)
    rho = np.broadcast_to(rho0, (M, d, d)).copy()
    ltd = lt.conj().T
    supT = sup.T.copy()
    est[:, 0] = _np_expect(rho, obs)
    if monitor:
        min_eig = np.minimum(min_eig, _np_min_eig(rho))
    for s in range(N):
        gain = lt @ rho + rho @ ltd
        c = np.trace(gain, axis1=1, axis2=2).real
        drift = (rho.reshape(M, d * d) @ supT).reshape(M, d, d)
        di = dI[:, s]
        dy = di + var_z * c * dt
        dY[:, s] = dy
        if normalized:
            new = rho + drift * dt + gain * dy[:, None, None]
        else:
            new = rho + drift * dt + (gain - c[:, None, None] * rho) * di[:, None, None]
        new = 0.5 * (new + new.conj().transpose(0, 2, 1))
        tr = np.trace(new, axis1=1, axis2=2).real
        bad = ~(tr > 0) & (fail < 0)
        fail[bad] = s
        tr = np.where(tr > 0, tr, 1.0)
        rho = new / tr[:, None, None]
        if monitor:
            min_eig = np.minimum(min_eig, _np_min_eig(rho))
        if (s + 1) % stride == 0:
            est[:, (s + 1) // stride] = _np_expect(rho, obs)
    return est, dY, min_eig, fail


def zakai_numpy(rho0, sup, lt, obs, lpl, dY, dt, stride):
    M, N = dY.shape
    d = rho0.shape[0]
    R = n_records(N, stride)
    sig = np.empty((M, R, obs.shape[0]), dtype=np.complex128)
    trace = np.empty((M, R))
    drift_sum = np.zeros(M)
    fail = np.full(M, -1, dtype=np.int64)
    vs = np.broadcast_to(rho0, (M, d, d)).copy()
    ltd = lt.conj().T
    supT = sup.T.copy()
    sig[:, 0] = _np_expect(vs, obs)
    trace[:, 0] = np.trace(vs, axis1=1, axis2=2).real
    for s in range(N):
        tr_now = np.trace(vs, axis1=1, axis2=2).real
        drift_sum += np.einsum("mij,ji->m", vs, lpl).real / tr_now * dt
        gain = lt @ vs + vs @ ltd
        drift = (vs.reshape(M, d * d) @ supT).reshape(M, d, d)
        new = vs + drift * dt + gain * dY[:, s, None, None]
        vs = 0.5 * (new + new.conj().transpose(0, 2, 1))
        tr = np.trace(vs, axis1=1, axis2=2).real
        bad = ~(tr > 0) & (fail < 0)
        fail[bad] = s
        if (s + 1) % stride == 0:
            r = (s + 1) // stride
            sig[:, r] = _np_expect(vs, obs)
            trace[:, r] = tr
    return sig, trace, drift_sum, fail


# ---------------------------------------------------------------------------
# numba implementation

if numba is not None:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _nb_expect(rho, obs, out):
        k, d = obs.shape[0], obs.shape[1]
        for q in range(k):
            acc = 0j
            for i in range(d):
                for j in range(d):
                    acc += rho[i, j] * obs[q, j, i]
            out[q] = acc

    @_jit
    def _nb_step_parts(rho, sup, lt, gain, drift):
        """Fill ``gain = lt rho + rho lt^dagger`` and ``drift = sup vec(rho)``."""
        d = rho.shape[0]
        for i in range(d):
            for j in range(d):
                acc = 0j
                for k in range(d):
                    acc += lt[i, k] * rho[k, j] + rho[i, k] * np.conj(lt[j, k])
                gain[i, j] = acc
        dd = d * d
        for a in range(dd):
            acc = 0j
            for b in range(dd):
                acc += sup[a, b] * rho[b // d, b % d]
            drift[a // d, a % d] = acc

    @_jit
    def _nb_min_eig(rho):
        return np.linalg.eigvalsh(rho)[0]

    @_jit
    def kushner_numba(rho0, sup, lt, obs, dI, dt, var_z, stride, normalized, monitor):
        M, N = dI.shape
        d = rho0.shape[0]
        R = N // stride + 1
        k = obs.shape[0]
        est = np.empty((M, R, k), dtype=np.complex128)
        dY = np.empty((M, N))
        min_eig = np.full(M, np.inf)
        fail = np.full(M, -1, dtype=np.int64)
        rho = np.empty((d, d), dtype=np.complex128)
        new = np.empty((d, d), dtype=np.complex128)
        gain = np.empty((d, d), dtype=np.complex128)
        drift = np.empty((d, d), dtype=np.complex128)
        buf = np.empty(k, dtype=np.complex128)
        for m in range(M):
            rho[:, :] = rho0
            _nb_expect(rho, obs, buf)
            est[m, 0, :] = buf
            if monitor:
                min_eig[m] = min(min_eig[m], _nb_min_eig(rho))
            for s in range(N):
                _nb_step_parts(rho, sup, lt, gain, drift)
                c = 0.0
                for i in range(d):
                    c += gain[i, i].real
                di = dI[m, s]
                dy = di + var_z * c * dt
                dY[m, s] = dy
                for i in range(d):
                    for j in range(d):
                        if normalized:
                            new[i, j] = rho[i, j] + drift[i, j] * dt + gain[i, j] * dy
                        else:
                            new[i, j] = rho[i, j] + drift[i, j] * dt + (gain[i, j] - c * rho[i, j]) * di
                tr = 0.0
                for i in range(d):
                    tr += new[i, i].real
                if not tr > 0:
                    fail[m] = s
                    break
                for i in range(d):
                    for j in range(i, d):
                        h = 0.5 * (new[i, j] + np.conj(new[j, i])) / tr
                        rho[i, j] = h
                        rho[j, i] = np.conj(h)
                if monitor:
                    min_eig[m] = min(min_eig[m], _nb_min_eig(rho))
                if (s + 1) % stride == 0:
                    _nb_expect(rho, obs, buf)
                    est[m, (s + 1) // stride, :] = buf
        return est, dY, min_eig, fail

    @_jit
    def zakai_numba(rho0, sup, lt, obs, lpl, dY, dt, stride):
        M, N = dY.shape
        d = rho0.shape[0]
        R = N // stride + 1
        k = obs.shape[0]
        sig = np.empty((M, R, k), dtype=np.complex128)
        trace = np.empty((M, R))
        drift_sum = np.zeros(M)
        fail = np.full(M, -1, dtype=np.int64)
        vs = np.empty((d, d), dtype=np.complex128)
        gain = np.empty((d, d), dtype=np.complex128)
        drift = np.empty((d, d), dtype=np.complex128)
        buf = np.empty(k, dtype=np.complex128)
        for m in range(M):
            vs[:, :] = rho0
            _nb_expect(vs, obs, buf)
            sig[m, 0, :] = buf
            tr = 0.0
            for i in range(d):
                tr += vs[i, i].real
            trace[m, 0] = tr
            for s in range(N):
                proj = 0.0
                for i in range(d):
                    for j in range(d):
                        proj += (vs[i, j] * lpl[j, i]).real
                drift_sum[m] += proj / tr * dt
                _nb_step_parts(vs, sup, lt, gain, drift)
                dy = dY[m, s]
                for i in range(d):
                    for j in range(i, d):
                        a = vs[i, j] + drift[i, j] * dt + gain[i, j] * dy
                        b = vs[j, i] + drift[j, i] * dt + gain[j, i] * dy
                        h = 0.5 * (a + np.conj(b))
                        vs[i, j] = h
                        vs[j, i] = np.conj(h)
                tr = 0.0
                for i in range(d):
                    tr += vs[i, i].real
                if not tr > 0 and fail[m] < 0:
                    fail[m] = s
                if (s + 1) % stride == 0:
                    r = (s + 1) // stride
                    _nb_expect(vs, obs, buf)
                    sig[m, r, :] = buf
                    trace[m, r] = tr
        return sig, trace, drift_sum, fail


def _prep(*arrays):
    return [np.ascontiguousarray(a, dtype=np.complex128) for a in arrays]


def kushner_ensemble(rho0, sup, lt, obs, dI, dt, var_z, stride=1, normalized=False, monitor=False, use=None):
    """Integrate the normalised filter for every row of ``dI``.

    Returns ``(estimates, dY, min_eigenvalue, fail_step)``; ``fail_step`` is
    -1 for trajectories that completed.
    """
    rho0, sup, lt, obs = _prep(rho0, sup, lt, obs)
    dI = np.ascontiguousarray(dI, dtype=np.float64)
    args = (rho0, sup, lt, obs, dI, float(dt), float(var_z), int(stride), bool(normalized), bool(monitor))
    if (use or backend()) == "numba":
        return kushner_numba(*args)
    return kushner_numpy(*args)


def zakai_ensemble(rho0, sup, lt, obs, lpl, dY, dt, stride=1, use=None):
    """Integrate the unnormalised filter for every row of ``dY``.

    Returns ``(sigma, trace, innovation_drift, fail_step)`` where
    ``innovation_drift`` is the per-trajectory sum of
    ``tr((L + L^dagger) rho_hat) dt`` over the normalised pre-step states.
    """
    rho0, sup, lt, obs, lpl = _prep(rho0, sup, lt, obs, lpl)
    dY = np.ascontiguousarray(dY, dtype=np.float64)
    args = (rho0, sup, lt, obs, lpl, dY, float(dt), int(stride))
    if (use or backend()) == "numba":
        return zakai_numba(*args)
    return zakai_numpy(*args)
