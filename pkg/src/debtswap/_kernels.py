"""Clearing kernels.

Each kernel is written once in numba-compatible numpy. With numba present
they are compiled with ``@njit``; setting ``DEBTSWAP_DISABLE_NUMBA=1``
runs the very same code as plain numpy (slower, but no JIT warm-up).

Array conventions: ``e[u]`` funds, ``L[u, v]`` liability of u towards v,
``l[u]`` total liabilities of u (may exceed ``L[u].sum()`` when the matrix
is a restriction of a larger network), ``r[u]`` recovery rate.
"""

import os

import numpy as np

_DISABLED = os.environ.get("DEBTSWAP_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by DEBTSWAP_DISABLE_NUMBA")
    from numba import njit, prange
    import numba as _numba
    NUMBA_ENABLED = True
except ImportError:
    _numba = None
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn
        return wrap

    prange = range

# relative slack when deciding insolvency, guards against 2/3*3 != 2 noise
INSOLVENCY_EPS = 1e-12
FDA_CHECK_TOL = 1e-9


def set_threads(n: int) -> None:
    if NUMBA_ENABLED and n > 0:
        _numba.set_num_threads(min(n, _numba.config.NUMBA_NUM_THREADS))


@njit(cache=True)
def recovery_map(e, L, l, r, beta):
    """One application of the clearing map: returns (assets, new recovery)."""
    a = e + L.T @ r
    safe_l = np.where(l > 0.0, l, 1.0)
    pay = np.where(a >= l, 1.0, beta * a / safe_l)
    return a, np.where(l > 0.0, pay, 1.0)


@njit(cache=True)
def picard(e, L, l, beta, tol, max_iter):
    """Iterate the clearing map from r = 1 down to the greatest fixed point.

    Stops once the step is below ``tol`` and the geometric tail bound
    ``step * rho / (1 - rho)`` (rho estimated from consecutive steps) is too.
    Returns ``(r, iterations, last_step, converged)``.
    """
    r = np.ones(e.shape[0])
    prev = np.inf
    step = 0.0
    for it in range(1, max_iter + 1):
        _, nr = recovery_map(e, L, l, r, beta)
        step = np.max(np.abs(nr - r)) if nr.shape[0] > 0 else 0.0
        r = nr
        if step == 0.0:
            return r, it, step, True
        bound = step
        if prev < np.inf and prev > 0.0:
            rho = step / prev
            if rho < 1.0:
                bound = step * rho / (1.0 - rho)
        if step <= tol and bound <= tol:
            return r, it, step, True
        prev = step
    return r, max_iter, step, False


@njit(cache=True)
def fixed_point_residual(e, L, l, r, beta):
    if r.shape[0] == 0:
        return 0.0
    _, nr = recovery_map(e, L, l, r, beta)
    return np.max(np.abs(nr - r))


@njit(cache=True)
def fictitious_default(e, L, l):
    """Fictitious default algorithm for the plain model (beta = 1).

    Starts with nobody in default, solves the linear system of the guessed
    default set, and enlarges the set by every newly insolvent bank at once.
    Returns ``(r, rounds, ok)``; ``ok`` is False on a singular system or if
    the result fails the fixed-point check, in which case callers fall back
    to Picard iteration.
    """
    n = e.shape[0]
    r = np.ones(n)
    default = np.zeros(n, dtype=np.bool_)
    rounds = 0
    for _ in range(n + 1):
        a = e + L.T @ r
        newly = (~default) & (l > 0.0) & (a < l - INSOLVENCY_EPS * np.maximum(l, 1.0))
        if not newly.any():
            break
        default = default | newly
        rounds += 1
        idx = np.nonzero(default)[0]
        rest = np.nonzero(~default)[0]
        sub = L[idx][:, idx]
        M = np.diag(l[idx]) - sub.T
        rhs = e[idx] + L[rest][:, idx].sum(axis=0)
        try:
            x = np.linalg.solve(M, rhs)
        except Exception:
            return r, rounds, False
        if not np.all(np.isfinite(x)):
            return r, rounds, False
        r[idx] = np.minimum(np.maximum(x, 0.0), 1.0)
    ok = fixed_point_residual(e, L, l, r, 1.0) <= FDA_CHECK_TOL
    return r, rounds, ok


@njit(cache=True)
def clear_recovery(e, L, l, beta, tol, max_iter):
    """Greatest clearing vector: fictitious default when beta = 1, else Picard.

    Returns ``(r, converged)``.
    """
    if beta == 1.0:
        r, _, ok = fictitious_default(e, L, l)
        if ok:
            return r, True
    r, _, _, conv = picard(e, L, l, beta, tol, max_iter)
    return r, conv


@njit(cache=True, parallel=True)
def batch_target_assets(E, L, l, target, beta, tol, max_iter):
    """Assets of bank ``target`` for every funds vector (row) of ``E``.

    Rows whose solve does not converge come back as NaN.
    """
    B = E.shape[0]
    out = np.empty(B)
    col = L[:, target].copy()
    for b in prange(B):
        e = E[b].copy()
        r, conv = clear_recovery(e, L, l, beta, tol, max_iter)
        if conv:
            out[b] = e[target] + np.dot(r, col)
        else:
            out[b] = np.nan
    return out


@njit(cache=True)
def min_plus(f, g, K):
    """(min, +) convolution ``h[k] = min_{j <= k} f[j] + g[k - j]`` for k <= K.

    Returns ``(h, steps)`` where ``steps`` counts the candidate sums examined.
    """
    h = np.empty(K + 1)
    steps = 0
    for k in range(K + 1):
        best = np.inf
        for j in range(k + 1):
            s = f[j] + g[k - j]
            steps += 1
            if s < best:
                best = s
        h[k] = best
    return h, steps
