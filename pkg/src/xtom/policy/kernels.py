"""Recurrent-net inner loops.

The two stacked gated-memory layers are the hot path of both rollout and
training, so the sequence kernels here come in two builds: a numba-jitted
one and the identical pure-numpy source. Selection is by environment flag:

    XTOM_NUMBA=0   force the pure-numpy path
    XTOM_NUMBA=1   require numba (import error if unavailable)

unset: use numba when importable, fall back to numpy silently. The jitted
and plain variants run the same statements in the same order.
"""

from __future__ import annotations

import os

import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _lstm_forward(x, wx, wh, b, h0, c0):
    """Unroll one gated layer over a sequence.

    x: (T, D) inputs; wx: (4H, D); wh: (4H, H); b: (4H,).
    Returns hidden states (T, H), cell states (T, H) and the four gate
    activation caches needed by the backward pass.
    """
    T = x.shape[0]
    H = h0.shape[0]
    hs = np.empty((T, H))
    cs = np.empty((T, H))
    gi = np.empty((T, H))
    gf = np.empty((T, H))
    gg = np.empty((T, H))
    go = np.empty((T, H))
    zx = x @ wx.T
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        z = zx[t] + wh @ h + b
        i = _sigmoid(z[0:H])
        f = _sigmoid(z[H : 2 * H])
        g = np.tanh(z[2 * H : 3 * H])
        o = _sigmoid(z[3 * H : 4 * H])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[t] = h
        cs[t] = c
        gi[t] = i
        gf[t] = f
        gg[t] = g
        go[t] = o
    return hs, cs, gi, gf, gg, go


def _lstm_backward(x, hs, cs, gi, gf, gg, go, wx, wh, h0, c0, dh_out):
    """Backpropagate through one unrolled layer.

    dh_out: (T, H) loss gradient arriving at each hidden state from above
    (heads and/or the upper layer). Returns parameter gradients, the
    gradient w.r.t. the layer inputs, and w.r.t. the initial state.
    """
    T = x.shape[0]
    H = h0.shape[0]
    whT = np.ascontiguousarray(wh.T)
    dzs = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        c_prev = cs[t - 1] if t > 0 else c0
        i = gi[t]
        f = gf[t]
        g = gg[t]
        o = go[t]
        tanh_c = np.tanh(cs[t])
        dh = dh_out[t] + dh_next
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
        dzs[t, 0:H] = dc * g * i * (1.0 - i)
        dzs[t, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dzs[t, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dzs[t, 3 * H : 4 * H] = do * o * (1.0 - o)
        dh_next = whT @ dzs[t]
        dc_next = dc * f
    h_prev = np.empty((T, H))
    h_prev[0] = h0
    for t in range(1, T):
        h_prev[t] = hs[t - 1]
    dwx = dzs.T @ x
    dwh = dzs.T @ h_prev
    db = dzs.sum(axis=0)
    dx = dzs @ wx
    return dwx, dwh, db, dx, dh_next, dc_next


def _lstm_step(x, wx, wh, b, h, c):
    """Single timestep; shares the exact recurrence with the sequence
    kernel so incremental session use matches training replays."""
    H = h.shape[0]
    z = wx @ x + wh @ h + b
    i = _sigmoid(z[0:H])
    f = _sigmoid(z[H : 2 * H])
    g = np.tanh(z[2 * H : 3 * H])
    o = _sigmoid(z[3 * H : 4 * H])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def _want_numba() -> bool | None:
    flag = os.environ.get("XTOM_NUMBA", "").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    if flag in ("1", "true", "on", "yes"):
        return True
    return None


_requested = _want_numba()
BACKEND = "numpy"
if _requested is not False:
    try:
        import numba

        _jit = numba.njit(cache=True, fastmath=False)
        _sigmoid = _jit(_sigmoid)
        lstm_forward = _jit(_lstm_forward)
        lstm_backward = _jit(_lstm_backward)
        lstm_step = _jit(_lstm_step)
        BACKEND = "numba"
    except ImportError:
        if _requested is True:
            raise
if BACKEND == "numpy":
    lstm_forward = _lstm_forward
    lstm_backward = _lstm_backward
    lstm_step = _lstm_step


def backend_name() -> str:
    return BACKEND
