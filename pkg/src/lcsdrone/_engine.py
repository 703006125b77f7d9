"""Compiled time-stepping kernels.

Every public stepping routine in the package funnels into these functions, so
single steps, full scenario runs and planner sweeps share one arithmetic path.
Frames are assumed to carry proper rotations; inputs are validated upstream.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EV_CONTACT_START = 0
EV_CONTACT_END = 1
EV_MODE_SWITCH = 2
EV_COLLISION_DETECTED = 3

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_EVENT_OVERFLOW = 2

_CACHE = True


@njit(cache=_CACHE, inline='always')
def lcp_terms(x, v, a, k, f, m, b, h):
    """Scalar implicit-Euler contact LCP along the normal.

    Returns (M, q, c, v_free, x_free) where the end-of-step normal velocity is
    v_free + c * lam.
    """
    damp = 1.0 + h * b
    c = (h / m) / damp
    v_free = (v + h * a) / damp
    x_free = x + h * v_free
    M = 1.0 + (k * h + f) * c
    q = k * x_free + f * v_free
    return M, q, c, v_free, x_free


@njit(cache=_CACHE, inline='always')
def contact_step_cf(xcf, vcf, acf, bcf, k, f, mu, nu, m, h, out_x, out_v, out_lam):
    """Advance a collision-frame state by one contact step.

    Returns the complementarity slack w evaluated at the end-of-step state.
    """
    M, q, c, v_free, x_free = lcp_terms(xcf[0], vcf[0], acf[0], k, f, m, bcf[0], h)
    lam_x = max(-q / M, 0.0)
    vx = v_free + c * lam_x
    # friction is solved against the end-of-step lateral velocity
    dy = 1.0 + h * bcf[1]
    cy = (h / m) / dy
    vy_free = (vcf[1] + h * acf[1]) / dy
    vy = vy_free / (1.0 + cy * mu * lam_x)
    lam_y = -mu * lam_x * vy
    lam_z = -nu * lam_x / (1.0 + lam_x)
    vz = (vcf[2] + h * (acf[2] + lam_z / m)) / (1.0 + h * bcf[2])
    out_v[0] = vx
    out_v[1] = vy
    out_v[2] = vz
    out_x[0] = xcf[0] + h * vx
    out_x[1] = xcf[1] + h * vy
    out_x[2] = xcf[2] + h * vz
    out_lam[0] = lam_x
    out_lam[1] = lam_y
    out_lam[2] = lam_z
    return lam_x + k * out_x[0] + f * vx


@njit(cache=_CACHE, inline='always')
def free_step(p, v, a, b, h, out_p, out_v):
    for i in range(3):
        out_v[i] = (v[i] + h * a[i]) / (1.0 + h * b[i])
        out_p[i] = p[i] + h * out_v[i]


@njit(cache=_CACHE, inline='always')
def pid_accel(p, v, sp, ref_vel, gains, integ, e_prev, has_prev, h, out_a):
    """P position loop feeding a PID velocity loop, clamped per axis.

    ``gains`` = (kp, kv, ki, kd, accel_limit, vel_limit). Updates ``integ`` and
    ``e_prev`` in place.
    """
    kp = gains[0]
    kv = gains[1]
    ki = gains[2]
    kd = gains[3]
    amax = gains[4]
    vmax = gains[5]
    # integrator never asks for more than the actuator can give
    ilim = amax / ki if ki > 0.0 else np.inf
    dscale = kd / h if has_prev else 0.0
    for i in range(3):
        vr = min(max(ref_vel[i] + kp * (sp[i] - p[i]), -vmax), vmax)
        e = vr - v[i]
        integ[i] = min(max(integ[i] + e * h, -ilim), ilim)
        d = dscale * (e - e_prev[i])
        e_prev[i] = e
        out_a[i] = min(max(kv * e + ki * integ[i] + d, -amax), amax)


@njit(cache=_CACHE, inline='always')
def _gap(p, origin, rot, offset):
    return rot[0, 0] * (p[0] - origin[0]) + rot[1, 0] * (p[1] - origin[1]) + rot[2, 0] * (p[2] - origin[2]) - offset


@njit(cache=_CACHE, inline='always')
def _push_event(ev_t, ev_kind, ev_frame, n_ev, t, kind, frame):
    if n_ev < ev_t.shape[0]:
        ev_t[n_ev] = t
        ev_kind[n_ev] = kind
        ev_frame[n_ev] = frame
        return n_ev + 1, False
    return n_ev, True


@njit(cache=_CACHE, nogil=True)
def run(p0, v0, h, n_steps, gvec, mass, drag,
        f_origin, f_rot, f_off, f_par,
        mode_seq, ctrl_on, lam_th, alpha, gains, sp0, approach_vel, hold_time,
        noise_std, seed, record, max_events):
    """Integrate one scenario.

    f_par[j, mode - 1] = (k, f, mu, nu) for frame j. alpha[i] holds the
    recovery gains for the i-th detected collision (last row repeats).
    approach_vel[i] is the reference velocity of approach phase i; phase 0
    starts at t = 0, phase i > 0 starts ``hold_time`` after the i-th detection.
    """
    n_frames = f_origin.shape[0]
    n_rec = n_steps + 1 if record else 1
    T = np.zeros(n_rec)
    P = np.zeros((n_rec, 3))
    V = np.zeros((n_rec, 3))
    LAM = np.zeros((n_rec, 3))
    ACT = np.zeros(n_rec, dtype=np.bool_)
    FIDX = np.full(n_rec, -1, dtype=np.int64)
    SP = np.zeros((n_rec, 3))
    MODE = np.zeros(n_rec, dtype=np.int64)
    LHAT = np.zeros((n_rec, 3))
    W = np.zeros(n_rec)

    ev_t = np.zeros(max_events)
    ev_kind = np.zeros(max_events, dtype=np.int64)
    ev_frame = np.zeros(max_events, dtype=np.int64)
    n_ev = 0
    overflow = False

    p = p0.copy()
    v = v0.copy()
    p_new = np.zeros(3)
    v_new = np.zeros(3)
    a_in = np.zeros(3)
    a_pid = np.zeros(3)
    lhat = np.zeros(3)

    xcf = np.zeros(3)
    vcf = np.zeros(3)
    acf = np.zeros(3)
    bcf = np.zeros(3)
    xcf_new = np.zeros(3)
    vcf_new = np.zeros(3)
    lam_cf = np.zeros(3)

    # drag expressed per collision axis (exact for axis-aligned planes)
    f_drag = np.zeros((n_frames, 3))
    for j in range(n_frames):
        for c in range(3):
            for i in range(3):
                f_drag[j, c] += f_rot[j, i, c] * f_rot[j, i, c] * drag[i]

    active = np.zeros(n_frames, dtype=np.bool_)
    latch = np.zeros(n_frames, dtype=np.int64)

    n_modes = mode_seq.shape[0]
    cur_mode = mode_seq[0]
    n_collisions = 0
    armed = True

    integ = np.zeros(3)
    e_prev = np.zeros(3)
    has_prev = False
    sp = sp0.copy()
    ref_origin = sp0.copy()
    ref_vel = np.zeros(3)
    ref_t0 = 0.0
    n_approach = approach_vel.shape[0]
    pending_approach = -1
    approach_at = 0.0
    if ctrl_on and n_approach > 0:
        for i in range(3):
            ref_vel[i] = approach_vel[0, i]
    if ctrl_on and noise_std > 0.0:
        np.random.seed(seed)

    if record:
        P[0] = p
        V[0] = v
        if ctrl_on:
            SP[0] = sp
        MODE[0] = cur_mode

    status = STATUS_OK
    fail_step = -1
    steps_done = 0
    for n in range(n_steps):
        t = n * h
        # --- control -------------------------------------------------------
        if ctrl_on:
            if pending_approach >= 0 and t >= approach_at - 1e-12:
                for i in range(3):
                    ref_origin[i] = p[i]
                    ref_vel[i] = approach_vel[pending_approach, i]
                ref_origin[2] = sp0[2]
                ref_t0 = t
                for i in range(3):
                    integ[i] = 0.0
                pending_approach = -1
            for i in range(3):
                sp[i] = ref_origin[i] + ref_vel[i] * (t - ref_t0)
            pid_accel(p, v, sp, ref_vel, gains, integ, e_prev, has_prev, h, a_pid)
            has_prev = True
            for i in range(3):
                a_in[i] = a_pid[i]  # gravity compensation cancels gvec exactly
        else:
            for i in range(3):
                a_in[i] = gvec[i]

        # --- contact gate --------------------------------------------------
        j_best = -1
        g_best = 0.0
        for j in range(n_frames):
            g = _gap(p, f_origin[j], f_rot[j], f_off[j])
            if g <= 0.0 and (j_best < 0 or g < g_best):
                j_best = j
                g_best = g

        lam_x = 0.0
        w = 0.0
        if j_best >= 0:
            R = f_rot[j_best]
            mode_used = latch[j_best] if latch[j_best] > 0 else cur_mode
            k = f_par[j_best, mode_used - 1, 0]
            f = f_par[j_best, mode_used - 1, 1]
            mu = f_par[j_best, mode_used - 1, 2]
            nu = f_par[j_best, mode_used - 1, 3]
            for c in range(3):
                xcf[c] = (R[0, c] * (p[0] - f_origin[j_best, 0]) + R[1, c] * (p[1] - f_origin[j_best, 1])
                          + R[2, c] * (p[2] - f_origin[j_best, 2]))
                vcf[c] = R[0, c] * v[0] + R[1, c] * v[1] + R[2, c] * v[2]
                acf[c] = R[0, c] * a_in[0] + R[1, c] * a_in[1] + R[2, c] * a_in[2]
                bcf[c] = f_drag[j_best, c]
            xcf[0] = g_best
            w = contact_step_cf(xcf, vcf, acf, bcf, k, f, mu, nu, mass, h, xcf_new, vcf_new, lam_cf)
            lam_x = lam_cf[0]
            for i in range(3):
                v_new[i] = R[i, 0] * vcf_new[0] + R[i, 1] * vcf_new[1] + R[i, 2] * vcf_new[2]
                p_new[i] = p[i] + h * v_new[i]
            if lam_x > 0.0 and not active[j_best]:
                active[j_best] = True
                latch[j_best] = mode_used
                n_ev, of = _push_event(ev_t, ev_kind, ev_frame, n_ev, t + h, EV_CONTACT_START, j_best)
                overflow = overflow or of
        else:
            free_step(p, v, a_in, drag, h, p_new, v_new)
            for i in range(3):
                lam_cf[i] = 0.0

        for j in range(n_frames):
            if active[j] and (j != j_best or lam_x <= 0.0):
                active[j] = False
                latch[j] = 0
                n_ev, of = _push_event(ev_t, ev_kind, ev_frame, n_ev, t + h, EV_CONTACT_END, j)
                overflow = overflow or of

        finite = True
        for i in range(3):
            if not (np.isfinite(p_new[i]) and np.isfinite(v_new[i])):
                finite = False
        if not finite:
            status = STATUS_NONFINITE
            fail_step = n
            break

        # --- force estimate and collision detection -------------------------
        for i in range(3):
            meas = (v_new[i] - v[i]) / h
            expected = a_in[i] - drag[i] * v_new[i]
            lhat[i] = mass * (meas - expected)
        if ctrl_on:
            if noise_std > 0.0:
                for i in range(3):
                    lhat[i] += noise_std * np.random.standard_normal()
            mag = max(abs(lhat[0]), abs(lhat[1]))
            if armed and mag >= lam_th:
                armed = False
                tc = t + h
                n_collisions += 1
                n_ev, of = _push_event(ev_t, ev_kind, ev_frame, n_ev, tc, EV_COLLISION_DETECTED, j_best)
                overflow = overflow or of
                ia = n_collisions - 1
                if ia >= alpha.shape[0]:
                    ia = alpha.shape[0] - 1
                ref_origin[0] = p_new[0] + alpha[ia, 0] * lhat[0]
                ref_origin[1] = p_new[1] - alpha[ia, 1] * lhat[1]
                ref_origin[2] = sp0[2]
                for i in range(3):
                    ref_vel[i] = 0.0
                    integ[i] = 0.0
                ref_t0 = tc
                if n_collisions < n_approach:
                    pending_approach = n_collisions
                    approach_at = tc + hold_time
                if n_collisions < n_modes and mode_seq[n_collisions] != cur_mode:
                    cur_mode = mode_seq[n_collisions]
                    n_ev, of = _push_event(ev_t, ev_kind, ev_frame, n_ev, tc, EV_MODE_SWITCH, cur_mode)
                    overflow = overflow or of
            elif (not armed) and mag < 0.5 * lam_th:
                armed = True

        for i in range(3):
            p[i] = p_new[i]
            v[i] = v_new[i]
        steps_done = n + 1
        if record:
            r = n + 1
            T[r] = (n + 1) * h
            for i in range(3):
                P[r, i] = p[i]
                V[r, i] = v[i]
                LAM[r, i] = lam_cf[i]
                SP[r, i] = sp[i] if ctrl_on else 0.0
                LHAT[r, i] = lhat[i]
            ACT[r] = lam_x > 0.0
            FIDX[r] = j_best
            MODE[r] = cur_mode
            W[r] = w

    if overflow and status == STATUS_OK:
        status = STATUS_EVENT_OVERFLOW
    return (status, fail_step, steps_done, p, v, n_collisions,
            T, P, V, LAM, ACT, FIDX, SP, MODE, LHAT, W,
            ev_t[:n_ev], ev_kind[:n_ev], ev_frame[:n_ev])
