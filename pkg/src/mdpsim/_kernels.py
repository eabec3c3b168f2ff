"""Compiled inner loops for path simulation.

Both kernels consume a block of standard normals and stop early when the
path leaves the materialized part of the environment, returning how many
normals were used so the caller can extend the environment and resume.
"""

import numba as nb
import numpy as np

# accumulator slots shared with sde.py
LOGW = 0        # Girsanov log-weight of the driftless path
TILT_A = 1      # sum (c/s) dB under the target law
TILT_Q = 2      # sum (c/s)^2 dt
SUP_DEV = 3     # sup |X_t - x0 - b_eff t|
INT_B = 4       # int (b - b_eff) ds
SUP_INT_B = 5
INT_S2 = 6      # int (sigma^2 - a_eff) ds
SUP_INT_S2 = 7
QV = 8          # sum (dX)^2
QV_PRED = 9     # sum s^2 dt
N_ACC = 10


@nb.njit(nogil=True, cache=True)
def locate(edges, u, k):
    """Segment index holding ``u`` starting the search at ``k``; -1 if outside."""
    n = edges.shape[0] - 1
    if u < edges[0] or u >= edges[n]:
        return -1
    if k < 0 or k >= n:
        lo, hi = 0, n
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if edges[mid] <= u:
                lo = mid
            else:
                hi = mid
        return lo
    while u < edges[k]:
        k -= 1
    while u >= edges[k + 1]:
        k += 1
    return k


@nb.njit(nogil=True, cache=True)
def euler_block(state, xi, edges, sig_seg, b_seg, periodic, sig_tab, b_tab,
                inv_eps, eps_kappa, dt, drift_on, c_sim, c_abs, x0, b_eff,
                a_eff, acc, store):
    """Advance an Euler-Maruyama path over the normals in ``xi``.

    ``state`` holds ``[x, step_index, segment_index]`` and is updated in
    place. Returns the number of normals consumed.
    """
    x = state[0]
    i = int(state[1])
    k = int(state[2])
    sqdt = np.sqrt(dt)
    res = sig_tab.shape[0]
    nstore = store.shape[0]
    used = 0
    for j in range(xi.shape[0]):
        u = x * inv_eps
        if periodic:
            fr = u - np.floor(u)
            idx = int(fr * res)
            if idx >= res:
                idx = res - 1
            sig = sig_tab[idx]
            b = b_tab[idx]
        else:
            k = locate(edges, u, k)
            if k < 0:
                break
            sig = sig_seg[k]
            b = b_seg[k]
        s = eps_kappa * sig
        dB = sqdt * xi[j]
        drift = c_sim
        if drift_on:
            drift += b
        dx = drift * dt + s * dB
        r = b / s
        acc[LOGW] += r * dB - 0.5 * r * r * dt
        if c_abs != 0.0:
            cs = c_abs / s
            acc[TILT_A] += cs * (dB + (c_sim / s) * dt)
            acc[TILT_Q] += cs * cs * dt
        acc[INT_B] += (b - b_eff) * dt
        acc[INT_S2] += (sig * sig - a_eff) * dt
        acc[QV] += dx * dx
        acc[QV_PRED] += s * s * dt
        x += dx
        i += 1
        dev = abs(x - x0 - b_eff * i * dt)
        if dev > acc[SUP_DEV]:
            acc[SUP_DEV] = dev
        v = abs(acc[INT_B])
        if v > acc[SUP_INT_B]:
            acc[SUP_INT_B] = v
        v = abs(acc[INT_S2])
        if v > acc[SUP_INT_S2]:
            acc[SUP_INT_S2] = v
        if i < nstore:
            store[i] = x
        used += 1
    state[0] = x
    state[1] = i
    state[2] = k
    return used


@nb.njit(nogil=True, cache=True)
def timechange_block(state, xi, edges, sig_seg, b_seg, periodic, sig_tab, b_tab, inv_eps,
                     eps2kappa, h_beta, dt, n_steps, x0, drift_on, out):
    """Run the auxiliary Brownian motion and invert its additive clock.

    ``state`` holds ``[beta, clock, next_grid_index, segment_index]``.
    ``out[j]`` receives ``x0 + beta(tau_{j dt})``. With ``drift_on`` the
    auxiliary motion carries the drift ``b / (eps^{2 kappa} sigma^2)`` per
    unit of its own time, which is the drifted equation seen on its
    quadratic-variation clock. Returns the number of normals consumed; the
    path is complete when ``state[2] > n_steps``.
    """
    beta = state[0]
    clock = state[1]
    j = int(state[2])
    k = int(state[3])
    sqh = np.sqrt(h_beta)
    res = sig_tab.shape[0]
    used = 0
    for m in range(xi.shape[0]):
        if j > n_steps:
            break
        u = (beta + x0) * inv_eps
        if periodic:
            fr = u - np.floor(u)
            idx = int(fr * res)
            if idx >= res:
                idx = res - 1
            sig = sig_tab[idx]
            b = b_tab[idx]
        else:
            k = locate(edges, u, k)
            if k < 0:
                break
            sig = sig_seg[k]
            b = b_seg[k]
        dc = h_beta / (eps2kappa * sig * sig)
        nb_beta = beta + sqh * xi[m]
        if drift_on:
            nb_beta += b * dc
        nclock = clock + dc
        while j <= n_steps and j * dt <= nclock:
            w = (j * dt - clock) / dc
            out[j] = x0 + beta + w * (nb_beta - beta)
            j += 1
        beta = nb_beta
        clock = nclock
        used += 1
    state[0] = beta
    state[1] = clock
    state[2] = j
    state[3] = k
    return used
