"""Finite-horizon backward-induction kernels.

Non-exponential discounting makes every value a function of (state, elapsed
time), so the solvers sweep time layers backward with rolling state vectors
instead of iterating a stationary Bellman operator. Both kernels are batched:
the leading axis of the mask arrays indexes independent policies evaluated in
a single sweep, which is what makes exhaustive policy enumerations cheap.

Kernels return the t = 1 layer; the t = 0 layer differs between entrance and
hitting conventions and is assembled by the caller. The t = H boundary is 0,
a one-sided (lower) truncation whose error is bounded separately.

When numba is importable the sweeps run as compiled loops; otherwise a numpy
fallback applies the same recursion one time layer at a time.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


USE_NUMBA = _HAVE_NUMBA


@njit(cache=True)
def _joint_sweep_nb(P, delta, stop_mask, stop_val, horizon):
    B, n = stop_mask.shape
    W = np.zeros((B, n))
    Wn = np.zeros((B, n))
    for t in range(horizon - 1, 0, -1):
        dt = delta[t]
        for b in range(B):
            for y in range(n):
                if stop_mask[b, y]:
                    Wn[b, y] = dt * stop_val[b, y]
                else:
                    acc = 0.0
                    for z in range(n):
                        acc += P[y, z] * W[b, z]
                    Wn[b, y] = acc
        W, Wn = Wn, W
    return W


@njit(cache=True)
def _constrained_sweep_nb(P, delta, opp_mask, forced_mask, f, maxhg, horizon):
    B, n = opp_mask.shape
    W = np.zeros((B, n))
    Wn = np.zeros((B, n))
    for t in range(horizon - 1, 0, -1):
        dt = delta[t]
        for b in range(B):
            for y in range(n):
                if opp_mask[b, y]:
                    Wn[b, y] = dt * maxhg[y]
                elif forced_mask[b, y]:
                    Wn[b, y] = dt * f[y]
                else:
                    acc = 0.0
                    for z in range(n):
                        acc += P[y, z] * W[b, z]
                    sv = dt * f[y]
                    Wn[b, y] = sv if sv > acc else acc
        W, Wn = Wn, W
    return W


def _joint_sweep_np(P, delta, stop_mask, stop_val, horizon):
    W = np.zeros_like(stop_val)
    Pt = P.T.copy()
    for t in range(horizon - 1, 0, -1):
        W = np.where(stop_mask, delta[t] * stop_val, W @ Pt)
    return W


def _constrained_sweep_np(P, delta, opp_mask, forced_mask, f, maxhg, horizon):
    B = opp_mask.shape[0]
    W = np.zeros((B, opp_mask.shape[1]))
    Pt = P.T.copy()
    for t in range(horizon - 1, 0, -1):
        cont = np.maximum(delta[t] * f, W @ Pt)
        W = np.where(opp_mask, delta[t] * maxhg, np.where(forced_mask, delta[t] * f, cont))
    return W


def joint_sweep(P, delta, stop_mask, stop_val, horizon):
    """Layer t=1 of the 'both policies fixed' value recursion, batched.

    stop_mask marks states where somebody stops (S union T per batch row),
    stop_val holds the undiscounted payoff collected there (h on S&T, f on
    S only, g on T only).
    """
    stop_mask = np.ascontiguousarray(stop_mask, dtype=np.bool_)
    stop_val = np.ascontiguousarray(stop_val, dtype=np.float64)
    if USE_NUMBA:
        return _joint_sweep_nb(P, delta, stop_mask, stop_val, horizon)
    return _joint_sweep_np(P, delta, stop_mask, stop_val, horizon)


def constrained_sweep(P, delta, opp_mask, forced_mask, f, maxhg, horizon):
    """Layer t=1 of the constrained-optimum recursion, batched.

    Cells: opponent region pays max(h, g); own region outside it forces an
    immediate stop at f; elsewhere the player chooses the better of stopping
    at f and continuing. Ties go to continuation.
    """
    opp_mask = np.ascontiguousarray(opp_mask, dtype=np.bool_)
    forced_mask = np.ascontiguousarray(forced_mask, dtype=np.bool_)
    f = np.ascontiguousarray(f, dtype=np.float64)
    maxhg = np.ascontiguousarray(maxhg, dtype=np.float64)
    if USE_NUMBA:
        return _constrained_sweep_nb(P, delta, opp_mask, forced_mask, f, maxhg, horizon)
    return _constrained_sweep_np(P, delta, opp_mask, forced_mask, f, maxhg, horizon)
