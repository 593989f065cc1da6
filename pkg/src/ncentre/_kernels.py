"""Compiled right-hand sides and an adaptive DOP853 stepper with event location.

The state vector always has six slots so that a single stepper serves every
chart:

* Cartesian chart: ``(x, y, vx, vy, t, L)`` integrated in physical time.
* Levi-Civita chart around centre ``j`` (only for ``alpha == 1``):
  ``(q1, q2, q1', q2', t, L)`` integrated in the regularized time ``s`` with
  ``dt/ds = 2|q|^2``.

In both charts the last slot accumulates the Jacobi length
``int sqrt(|x'|^2 (V - 1)) dt``.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

CARTESIAN = 0
LEVI_CIVITA = 1

EV_NONE = 0
EV_CIRCLE = 1  # |x|^2 - level^2
EV_TIME = 2  # t - level
EV_GUARD = 3  # min_j |x - c_j| - level (Cartesian chart)
EV_LC_EXIT = 4  # |q|^2 - level (Levi-Civita chart)

ST_END = 0
ST_EVENT_A = 1
ST_EVENT_B = 2
ST_MAX_STEPS = -1
ST_STEP_TOO_SMALL = -2

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)


@njit(cache=True)
def potential_xy(x, y, cx, cy, m, alpha):
    total = 0.0
    for i in range(m.shape[0]):
        r = np.sqrt((x - cx[i]) ** 2 + (y - cy[i]) ** 2)
        total += m[i] / (alpha * r**alpha)
    return total


@njit(cache=True)
def grad_xy(x, y, cx, cy, m, alpha):
    gx = 0.0
    gy = 0.0
    for i in range(m.shape[0]):
        dx = x - cx[i]
        dy = y - cy[i]
        r2 = dx * dx + dy * dy
        f = m[i] / r2 ** (0.5 * alpha + 1.0)
        gx -= f * dx
        gy -= f * dy
    return gx, gy


@njit(cache=True)
def _rhs(mode, s, cx, cy, m, alpha, j, out):
    if mode == CARTESIAN:
        x, y, vx, vy = s[0], s[1], s[2], s[3]
        gx, gy = grad_xy(x, y, cx, cy, m, alpha)
        w = potential_xy(x, y, cx, cy, m, alpha) - 1.0
        out[0] = vx
        out[1] = vy
        out[2] = gx
        out[3] = gy
        out[4] = 1.0
        out[5] = np.sqrt((vx * vx + vy * vy) * max(w, 0.0))
    else:
        q1, q2, p1, p2 = s[0], s[1], s[2], s[3]
        x = q1 * q1 - q2 * q2 + cx[j]
        y = 2.0 * q1 * q2 + cy[j]
        # field of the other centres
        vj = 0.0
        gx = 0.0
        gy = 0.0
        for i in range(m.shape[0]):
            if i == j:
                continue
            dx = x - cx[i]
            dy = y - cy[i]
            r = np.sqrt(dx * dx + dy * dy)
            vj += m[i] / r
            f = m[i] / (r * r * r)
            gx -= f * dx
            gy -= f * dy
        qq = q1 * q1 + q2 * q2
        out[0] = p1
        out[1] = p2
        # q'' = 2|q|^2 conj(q) grad V^j + 2 (V^j - 1) q
        out[2] = 2.0 * qq * (q1 * gx + q2 * gy) + 2.0 * (vj - 1.0) * q1
        out[3] = 2.0 * qq * (q1 * gy - q2 * gx) + 2.0 * (vj - 1.0) * q2
        out[4] = 2.0 * qq
        out[5] = 2.0 * np.sqrt((p1 * p1 + p2 * p2) * max(m[j] + (vj - 1.0) * qq, 0.0))


@njit(cache=True)
def _position(mode, s, cx, cy, j):
    if mode == CARTESIAN:
        return s[0], s[1]
    return s[0] * s[0] - s[1] * s[1] + cx[j], 2.0 * s[0] * s[1] + cy[j]


@njit(cache=True)
def _event_value(kind, level, mode, s, cx, cy, j):
    if kind == EV_CIRCLE:
        x, y = _position(mode, s, cx, cy, j)
        return x * x + y * y - level * level
    if kind == EV_TIME:
        return s[4] - level
    if kind == EV_GUARD:
        best = np.inf
        for i in range(cx.shape[0]):
            d = np.sqrt((s[0] - cx[i]) ** 2 + (s[1] - cy[i]) ** 2)
            if d < best:
                best = d
        return best - level
    if kind == EV_LC_EXIT:
        return s[0] * s[0] + s[1] * s[1] - level
    return 1.0


@njit(cache=True)
def _step(mode, s, f0, h, cx, cy, m, alpha, j, K, y_new, f_new):
    n = s.shape[0]
    for c in range(n):
        K[0, c] = f0[c]
    tmp = np.empty(n)
    for st in range(1, _NS):
        for c in range(n):
            acc = 0.0
            for k in range(st):
                acc += _A[st, k] * K[k, c]
            tmp[c] = s[c] + h * acc
        _rhs(mode, tmp, cx, cy, m, alpha, j, K[st])
    for c in range(n):
        acc = 0.0
        for k in range(_NS):
            acc += _B[k] * K[k, c]
        y_new[c] = s[c] + h * acc
    _rhs(mode, y_new, cx, cy, m, alpha, j, f_new)
    for c in range(n):
        K[_NS, c] = f_new[c]


@njit(cache=True)
def _error_norm(s, y_new, K, h, rtol, atol):
    n = s.shape[0]
    e5 = 0.0
    e3 = 0.0
    for c in range(n):
        sc = atol + rtol * max(abs(s[c]), abs(y_new[c]))
        a5 = 0.0
        a3 = 0.0
        for k in range(_NS + 1):
            a5 += _E5[k] * K[k, c]
            a3 += _E3[k] * K[k, c]
        e5 += (a5 / sc) ** 2
        e3 += (a3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / np.sqrt((e5 + 0.01 * e3) * n)


@njit(cache=True)
def _geometric_cap(mode, s, cx, cy):
    # keep the swept angle about every centre small within one step
    if mode != CARTESIAN:
        return np.inf
    speed = np.sqrt(s[2] * s[2] + s[3] * s[3])
    if speed == 0.0:
        return np.inf
    best = np.inf
    for i in range(cx.shape[0]):
        d = np.sqrt((s[0] - cx[i]) ** 2 + (s[1] - cy[i]) ** 2)
        if d < best:
            best = d
    return 0.25 * best / speed


@njit(cache=True)
def integrate(
    mode,
    s0,
    s_end,
    cx,
    cy,
    m,
    alpha,
    j,
    ev_a_kind,
    ev_a_level,
    ev_a_dir,
    ev_b_kind,
    ev_b_level,
    ev_b_dir,
    rtol,
    atol,
    max_steps,
    record,
):
    """Integrate from independent variable 0 to ``s_end`` (sign gives direction).

    Returns ``(status, s_final, state_final, times, states)`` where ``times`` and
    ``states`` hold every accepted step when ``record`` is true (otherwise only
    the end points).
    """
    n = s0.shape[0]
    direction = 1.0 if s_end >= 0.0 else -1.0
    cap = max_steps + 2 if record else 2
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    ts[0] = 0.0
    ys[0] = s0
    count = 1

    s = s0.copy()
    f0 = np.empty(n)
    _rhs(mode, s, cx, cy, m, alpha, j, f0)
    K = np.empty((_NS + 1, n))
    y_new = np.empty(n)
    f_new = np.empty(n)
    y_try = np.empty(n)
    f_try = np.empty(n)
    Kt = np.empty((_NS + 1, n))

    scale0 = np.sqrt(f0[0] ** 2 + f0[1] ** 2) + 1e-300
    pos_scale = np.sqrt(s[0] ** 2 + s[1] ** 2) + 1e-3
    h_abs = min(1e-3 * pos_scale / scale0, abs(s_end) + 1e-300)
    h_abs = min(h_abs, _geometric_cap(mode, s, cx, cy))
    cur = 0.0
    status = ST_MAX_STEPS
    ga = _event_value(ev_a_kind, ev_a_level, mode, s, cx, cy, j)
    gb = _event_value(ev_b_kind, ev_b_level, mode, s, cx, cy, j)

    for _ in range(max_steps):
        remaining = abs(s_end - cur)
        if remaining <= 1e-15 * max(1.0, abs(s_end)):
            status = ST_END
            break
        h_abs = min(h_abs, remaining, _geometric_cap(mode, s, cx, cy))
        min_step = 1e-14 * max(1.0, abs(cur))
        accepted = False
        while not accepted:
            if h_abs < min_step:
                status = ST_STEP_TOO_SMALL
                break
            h = direction * h_abs
            _step(mode, s, f0, h, cx, cy, m, alpha, j, K, y_new, f_new)
            err = _error_norm(s, y_new, K, h, rtol, atol)
            if err < 1.0:
                factor = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
                accepted = True
                h_next = h_abs * factor
            else:
                h_abs *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
        if not accepted:
            break

        # event check on the accepted step
        new_a = _event_value(ev_a_kind, ev_a_level, mode, y_new, cx, cy, j)
        new_b = _event_value(ev_b_kind, ev_b_level, mode, y_new, cx, cy, j)
        hit = 0
        if ev_a_kind != EV_NONE and ((ev_a_dir >= 0 and ga < 0.0 and new_a >= 0.0) or (ev_a_dir <= 0 and ga > 0.0 and new_a <= 0.0)):
            hit = 1
        elif ev_b_kind != EV_NONE and ((ev_b_dir >= 0 and gb < 0.0 and new_b >= 0.0) or (ev_b_dir <= 0 and gb > 0.0 and new_b <= 0.0)):
            hit = 2
        if hit > 0:
            kind = ev_a_kind if hit == 1 else ev_b_kind
            level = ev_a_level if hit == 1 else ev_b_level
            g_lo = ga if hit == 1 else gb
            g_hi = new_a if hit == 1 else new_b
            # Illinois iteration on the fraction of the step
            lo = 0.0
            hi = 1.0
            side = 0
            for _it in range(100):
                frac = (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
                if not (frac > lo and frac < hi):
                    frac = 0.5 * (lo + hi)
                _step(mode, s, f0, h * frac, cx, cy, m, alpha, j, Kt, y_try, f_try)
                g_mid = _event_value(kind, level, mode, y_try, cx, cy, j)
                if g_mid == 0.0 or (hi - lo) * h_abs < 1e-15:
                    break
                if (g_mid < 0.0) == (g_lo < 0.0):
                    lo = frac
                    g_lo = g_mid
                    if side == -1:
                        g_hi *= 0.5
                    side = -1
                else:
                    hi = frac
                    g_hi = g_mid
                    if side == 1:
                        g_lo *= 0.5
                    side = 1
                if abs(g_mid) < 1e-15:
                    break
            cur = cur + h * frac
            for c in range(n):
                s[c] = y_try[c]
            if record:
                ts[count] = cur
                ys[count] = s
                count += 1
            else:
                ts[1] = cur
                ys[1] = s
                count = 2
            status = ST_EVENT_A if hit == 1 else ST_EVENT_B
            return status, cur, s, ts[:count], ys[:count]

        cur += h
        for c in range(n):
            s[c] = y_new[c]
            f0[c] = f_new[c]
        ga = new_a
        gb = new_b
        if record:
            ts[count] = cur
            ys[count] = s
            count += 1
        h_abs = h_next
    if status == ST_MAX_STEPS and abs(s_end - cur) <= 1e-15 * max(1.0, abs(s_end)):
        status = ST_END
    if not record:
        ts[1] = cur
        ys[1] = s
        count = 2
    return status, cur, s, ts[:count], ys[:count]
