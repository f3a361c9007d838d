"""Hot loops: fixed-step RK4 for u' = a u + b max_{[t-h,t]} u + f(t).

All arrays share one index space. Index ``n_hist`` is the initial time t0,
indices below it hold the initial history on [t0 - h, t0] and the window
length h spans exactly ``n_hist`` steps. ``d`` holds right derivatives; the
history's left derivative at t0 is passed separately as ``d_hist_end`` since
the solution is generally not C^1 there.
"""

import numpy as np

from ._accel import njit

MODE_MAX = 0
MODE_DELAY = 1

STATUS_DONE = 0
STATUS_EVENTS = 1


@njit
def hermite_value(y0, y1, m0, m1, dt, th):
    th2 = th * th
    th3 = th2 * th
    return ((2.0 * th3 - 3.0 * th2 + 1.0) * y0
            + (th3 - 2.0 * th2 + th) * dt * m0
            + (-2.0 * th3 + 3.0 * th2) * y1
            + (th3 - th2) * dt * m1)


@njit
def hermite_slope(y0, y1, m0, m1, dt, th):
    th2 = th * th
    return ((6.0 * th2 - 6.0 * th) * y0
            + (3.0 * th2 - 4.0 * th + 1.0) * dt * m0
            + (-6.0 * th2 + 6.0 * th) * y1
            + (3.0 * th2 - 2.0 * th) * dt * m1) / dt


@njit
def _slope_roots(y0, y1, m0, m1, dt):
    # p'(th) = A th^2 + B th + C in local coordinates
    c1 = dt * m0
    c2 = -3.0 * y0 - 2.0 * dt * m0 + 3.0 * y1 - dt * m1
    c3 = 2.0 * y0 + dt * m0 - 2.0 * y1 + dt * m1
    A = 3.0 * c3
    B = 2.0 * c2
    C = c1
    r1 = np.nan
    r2 = np.nan
    scale = abs(A) + abs(B) + abs(C)
    if scale == 0.0:
        return r1, r2
    if abs(A) <= 1e-14 * scale:
        if B != 0.0:
            r1 = -C / B
        return r1, r2
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        return r1, r2
    sq = np.sqrt(disc)
    qq = -0.5 * (B + sq) if B >= 0.0 else -0.5 * (B - sq)
    if qq != 0.0:
        r1 = qq / A
        r2 = C / qq
    else:
        r1 = 0.0
    return r1, r2


@njit
def hermite_max(y0, y1, m0, m1, dt, ta, tb):
    """Maximum of the cubic Hermite interpolant over [ta, tb] in cell units."""
    best = hermite_value(y0, y1, m0, m1, dt, ta)
    v = hermite_value(y0, y1, m0, m1, dt, tb)
    if v > best:
        best = v
    r1, r2 = _slope_roots(y0, y1, m0, m1, dt)
    if r1 == r1 and ta < r1 < tb:
        v = hermite_value(y0, y1, m0, m1, dt, r1)
        if v > best:
            best = v
    if r2 == r2 and ta < r2 < tb:
        v = hermite_value(y0, y1, m0, m1, dt, r2)
        if v > best:
            best = v
    return best


@njit
def peak_in_cell(y0, y1, m0, m1, dt):
    """Location (cell units) of a +/- sign change of the interpolant slope, or -1."""
    r1, r2 = _slope_roots(y0, y1, m0, m1, dt)
    best = -1.0
    for r in (r1, r2):
        if r == r and -1e-12 <= r <= 1.0 + 1e-12:
            # second derivative sign decides max vs min
            c2 = -3.0 * y0 - 2.0 * dt * m0 + 3.0 * y1 - dt * m1
            c3 = 2.0 * y0 + dt * m0 - 2.0 * y1 + dt * m1
            if 6.0 * c3 * r + 2.0 * c2 <= 0.0:
                best = min(max(r, 0.0), 1.0)
    return best


@njit
def cell_slopes(d, k, n_hist, d_hist_end):
    m0 = d[k]
    m1 = d[k + 1]
    if k + 1 == n_hist:
        m1 = d_hist_end
    return m0, m1


@njit
def cell_max(u, d, n_hist, d_hist_end, dt, k, ta, tb):
    m0, m1 = cell_slopes(d, k, n_hist, d_hist_end)
    return hermite_max(u[k], u[k + 1], m0, m1, dt, ta, tb)


@njit
def cell_value(u, d, n_hist, d_hist_end, dt, k, th):
    m0, m1 = cell_slopes(d, k, n_hist, d_hist_end)
    return hermite_value(u[k], u[k + 1], m0, m1, dt, th)


@njit
def refined_grid_max(u, d, n_hist, d_hist_end, dt, lo, hi, w):
    """Max over grid range [lo, hi] with winner ``w``, refined on adjacent cells."""
    best = u[w]
    if w - 1 >= lo:
        v = cell_max(u, d, n_hist, d_hist_end, dt, w - 1, 0.0, 1.0)
        if v > best:
            best = v
    if w + 1 <= hi:
        v = cell_max(u, d, n_hist, d_hist_end, dt, w, 0.0, 1.0)
        if v > best:
            best = v
    return best


@njit
def window_max_at(u, d, n_hist, d_hist_end, dt, last, tq):
    """Max of the interpolant over [tq - h, tq]; tq is in index units.

    Only samples up to index ``last`` are used, so tq <= last.
    """
    N = n_hist
    k_right = int(np.floor(tq))
    if k_right > last:
        k_right = last
    th_r = tq - k_right
    left = tq - N
    k_left = int(np.floor(left))
    th_l = left - k_left
    if k_left == k_right:
        return cell_max(u, d, N, d_hist_end, dt, k_left, th_l, th_r)
    best = cell_max(u, d, N, d_hist_end, dt, k_left, th_l, 1.0)
    if th_r > 0.0 and k_right < last:
        v = cell_max(u, d, N, d_hist_end, dt, k_right, 0.0, th_r)
        if v > best:
            best = v
    lo = k_left + 1
    hi = k_right
    if hi >= lo:
        w = lo
        for i in range(lo + 1, hi + 1):
            if u[i] > u[w]:
                w = i
        v = refined_grid_max(u, d, N, d_hist_end, dt, lo, hi, w)
        if v > best:
            best = v
    return best


@njit
def forcing_at(f_half, step, th):
    """Quadratic interpolation of the forcing inside step ``step`` (th in [0, 1])."""
    f0 = f_half[2 * step]
    f1 = f_half[2 * step + 1]
    f2 = f_half[2 * step + 2]
    return (f0 * (2.0 * th - 1.0) * (th - 1.0) - 4.0 * f1 * th * (th - 1.0)
            + f2 * th * (2.0 * th - 1.0))


@njit
def committed_max(u, d, n_hist, d_hist_end, dt, n, gmax, th):
    """max over [t_n + th*dt - h, t_n] given the grid max over (n - N, n]."""
    v = cell_max(u, d, n_hist, d_hist_end, dt, n - n_hist, th, 1.0)
    return v if v > gmax else gmax


@njit
def _rk4_piece(a, b, u0, k1, t_lo, t_hi, u, d, n_hist, d_hist_end, dt, n, gmax, f_half, step):
    # one RK4 step over [t_lo, t_hi] (fractions of the grid step) for the max equation
    span = (t_hi - t_lo) * dt
    tm = 0.5 * (t_lo + t_hi)
    wm = committed_max(u, d, n_hist, d_hist_end, dt, n, gmax, tm)
    we = committed_max(u, d, n_hist, d_hist_end, dt, n, gmax, t_hi)
    fm = forcing_at(f_half, step, tm)
    fe = forcing_at(f_half, step, t_hi)
    um = u0 + 0.5 * span * k1
    k2 = a * um + b * max(wm, um) + fm
    um = u0 + 0.5 * span * k2
    k3 = a * um + b * max(wm, um) + fm
    ue = u0 + span * k3
    k4 = a * ue + b * max(we, ue) + fe
    return u0 + span * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@njit
def integrate_kernel(a, b, dt, n_hist, u_hist, d_hist, f_half, n_steps, mode,
                     max_events, eps_steps, qual_tol):
    """Advance the solution ``n_steps`` steps (or until enough peaks).

    Returns (u, d, w, n_done, status, ev_pos, n_ev). ``ev_pos`` are event
    locations in index units (fractional); they only drive early stopping.
    """
    N = n_hist
    M = N + 1 + n_steps
    u = np.empty(M)
    d = np.empty(M)
    w = np.full(M, np.nan)
    for i in range(N + 1):
        u[i] = u_hist[i]
        d[i] = d_hist[i]
    d_hist_end = d_hist[N]

    cap = N + 4
    dq = np.empty(cap, dtype=np.int64)
    head = 0
    cnt = 0
    for i in range(N + 1):
        while cnt > 0 and u[dq[(head + cnt - 1) % cap]] <= u[i]:
            cnt -= 1
        dq[(head + cnt) % cap] = i
        cnt += 1
    w[N] = refined_grid_max(u, d, N, d_hist_end, dt, 0, N, dq[head])
    if mode == MODE_MAX:
        d[N] = a * u[N] + b * w[N] + f_half[0]
    else:
        d[N] = a * u[N] + b * u[0] + f_half[0]

    n_ev_cap = max_events if max_events > 0 else 1
    ev_pos = np.empty(n_ev_cap)
    n_ev = 0
    pending = -1
    pending_val = 0.0
    pending_pos = 0.0
    pending_until = 0
    status = STATUS_DONE
    n_done = n_steps

    for step in range(n_steps):
        n = N + step
        fm = f_half[2 * step + 1]
        fe = f_half[2 * step + 2]
        k1 = d[n]
        gmax = 0.0
        wend = 0.0
        if mode == MODE_MAX:
            # committed window max for the midpoint and endpoint stages
            front = dq[head]
            if front == n - N:
                wi = dq[(head + 1) % cap]
            else:
                wi = front
            gmax = refined_grid_max(u, d, N, d_hist_end, dt, n - N + 1, n, wi)
            wmid = cell_max(u, d, N, d_hist_end, dt, n - N, 0.5, 1.0)
            if gmax > wmid:
                wmid = gmax
            wend = gmax
            um = u[n] + 0.5 * dt * k1
            k2 = a * um + b * max(wmid, um) + fm
            um = u[n] + 0.5 * dt * k2
            k3 = a * um + b * max(wmid, um) + fm
            ue = u[n] + dt * k3
            k4 = a * ue + b * max(wend, ue) + fe
        else:
            ymid = cell_value(u, d, N, d_hist_end, dt, n - N, 0.5)
            yend = u[n - N + 1]
            um = u[n] + 0.5 * dt * k1
            k2 = a * um + b * ymid + fm
            um = u[n] + 0.5 * dt * k2
            k3 = a * um + b * ymid + fm
            ue = u[n] + dt * k3
            k4 = a * ue + b * yend + fe
        unew = u[n] + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if mode == MODE_MAX and u[n] < w[n] - 1e-13 * (1.0 + abs(w[n])) and unew > wend:
            # u overtakes the committed window max inside the step: the right-hand
            # side has a kink there, so split the step at the crossing
            dp = a * unew + b * max(wend, unew) + fe
            lo_th = 0.0
            hi_th = 1.0
            for _ in range(60):
                mid = 0.5 * (lo_th + hi_th)
                g = (hermite_value(u[n], unew, k1, dp, dt, mid)
                     - committed_max(u, d, N, d_hist_end, dt, n, gmax, mid))
                if g < 0.0:
                    lo_th = mid
                else:
                    hi_th = mid
            thc = 0.5 * (lo_th + hi_th)
            if 1e-9 < thc < 1.0 - 1e-9:
                uc = _rk4_piece(a, b, u[n], k1, 0.0, thc, u, d, N, d_hist_end, dt, n, gmax,
                                f_half, step)
                wc = committed_max(u, d, N, d_hist_end, dt, n, gmax, thc)
                kc = a * uc + b * max(wc, uc) + forcing_at(f_half, step, thc)
                unew = _rk4_piece(a, b, uc, kc, thc, 1.0, u, d, N, d_hist_end, dt, n, gmax,
                                  f_half, step)
        m = n + 1
        u[m] = unew

        while cnt > 0 and u[dq[(head + cnt - 1) % cap]] <= unew:
            cnt -= 1
        dq[(head + cnt) % cap] = m
        cnt += 1
        while dq[head] < m - N:
            head = (head + 1) % cap
            cnt -= 1

        wi = dq[head]
        lo = m - N
        wv = u[wi]
        if wi - 1 >= lo and wi - 1 < n:
            v = cell_max(u, d, N, d_hist_end, dt, wi - 1, 0.0, 1.0)
            if v > wv:
                wv = v
        if wi + 1 <= n:
            v = cell_max(u, d, N, d_hist_end, dt, wi, 0.0, 1.0)
            if v > wv:
                wv = v
        if mode == MODE_MAX:
            dprov = a * unew + b * wv + fe
        else:
            dprov = a * unew + b * u[m - N] + fe
        if wi >= n:
            v = hermite_max(u[n], unew, d[n], dprov, dt, 0.0, 1.0)
            if v > wv:
                wv = v
        w[m] = wv
        if mode == MODE_MAX:
            d[m] = a * unew + b * wv + fe
        else:
            d[m] = dprov

        if mode != MODE_MAX or max_events <= 0:
            continue

        if pending >= 0 and m >= pending_until:
            ok = True
            for j in range(pending + 1, m + 1):
                if u[j] >= pending_val:
                    ok = False
                    break
            if ok:
                ev_pos[n_ev] = pending_pos
                n_ev += 1
            pending = -1
            if n_ev >= max_events:
                status = STATUS_EVENTS
                n_done = step + 1
                break

        if pending < 0 and d[n] > 0.0 and d[m] <= 0.0:
            th = peak_in_cell(u[n], unew, d[n], d[m], dt)
            if th >= 0.0 and not (n == N and th < 1e-6):
                val = hermite_value(u[n], unew, d[n], d[m], dt, th)
                past = cell_max(u, d, N, d_hist_end, dt, n - N, th, 1.0)
                front = dq[head]
                if u[front] > past:
                    past = u[front]
                if val >= past - qual_tol:
                    pending = n
                    pending_val = val
                    pending_pos = n + th
                    pending_until = m + eps_steps

    return u, d, w, n_done, status, ev_pos[:n_ev], n_ev
