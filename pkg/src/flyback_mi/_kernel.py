"""Compiled fixed-step integrator for the flyback + filter + grid system.

Everything here works on flat float arrays so numba can compile it. The public
wrappers live in :mod:`flyback_mi.simulator`.

State vector layout (``NX`` entries)::

    0      i_m        magnetizing current, primary referred
    1..4   filter     CL uses 1..2 (v_c, i_l); LCL uses 1..4 (v_a, i_li, v_cf, i_lg)
    5      E_in       source energy
    6..10  E_loss     r1, switches, r2, diode, filter inductors
    11     E_out      energy delivered to the grid source

The energy integrals ride along in the same RK4 stages as the circuit, so the
power audit is consistent with the trajectory to integration accuracy.
"""

import math

import numpy as np
from numba import njit

NX = 12
I_M = 0
E_IN = 5
E_R1, E_RON, E_R2, E_DIODE, E_FILTER = 6, 7, 8, 9, 10
E_OUT = 11

CHARGE, DISCHARGE, IDLE = 0, 1, 2
CL, LCL = 0, 1

# parameter vector layout
P_VDC, P_LM, P_N, P_R1, P_R2, P_RON, P_VD = 0, 1, 2, 3, 4, 5, 6
P_F0, P_VG, P_M, P_DMAX = 7, 8, 9, 10
P_KIND, P_L1, P_C1, P_C2, P_L2, P_RS = 11, 12, 13, 14, 15, 16
P_INJ_AMP, P_INJ_F = 17, 18
# reciprocals of the reactive elements, filled by pack()
P_ILM, P_IL1, P_IC1, P_IC2, P_IL2 = 19, 20, 21, 22, 23
NP = 24

TWO_PI = 2.0 * math.pi

# status codes
OK = 0
NONFINITE = 1


def pack(fly, m, d_max, fp, v_g_amp, f0, inj_amp=0.0, inj_f=0.0):
    """Flatten parameter records into the kernel's parameter vector.

    ``fp`` only needs the attributes of :class:`FilterParams`; tests use this
    to build networks that the validated dataclass would refuse.
    """
    p = np.zeros(NP)
    p[P_VDC], p[P_LM], p[P_N] = fly.v_dc, fly.l_m, fly.n
    p[P_R1], p[P_R2], p[P_RON], p[P_VD] = fly.r1, fly.r2, fly.r_on, fly.v_d
    p[P_F0], p[P_VG], p[P_M], p[P_DMAX] = f0, v_g_amp, m, d_max
    if str(getattr(fp.kind, "value", fp.kind)).upper() == "CL":
        p[P_KIND], p[P_L1], p[P_C1] = CL, fp.l, fp.c
    else:
        p[P_KIND], p[P_L1], p[P_C1] = LCL, fp.l_i, fp.c_s
        p[P_C2], p[P_L2] = fp.c_f, fp.l_g
    p[P_RS] = fp.r_l_series
    p[P_INJ_AMP], p[P_INJ_F] = inj_amp, inj_f
    for src, dst in ((P_LM, P_ILM), (P_L1, P_IL1), (P_C1, P_IC1), (P_C2, P_IC2), (P_L2, P_IL2)):
        p[dst] = 1.0 / p[src] if p[src] != 0.0 else 0.0
    return p


@njit(cache=True)
def duty(t, p):
    d = p[P_M] * abs(math.sin(TWO_PI * p[P_F0] * t))
    return min(d, p[P_DMAX])


@njit(cache=True)
def polarity(t, f0):
    return -1.0 if math.sin(TWO_PI * f0 * t) < 0.0 else 1.0


@njit(cache=True)
def grid_current(x, p):
    return x[2] if p[P_KIND] == CL else x[4]


@njit(cache=True, inline="always")
def deriv(x, mode, t, vg, pol, p, out):
    i_m = x[0]
    n = p[P_N]
    for j in range(NX):
        out[j] = 0.0
    inj = 0.0
    if mode == CHARGE:
        r_sw = 2.0 * p[P_RON]
        out[0] = (p[P_VDC] - (p[P_R1] + r_sw) * i_m) * p[P_ILM]
        out[E_IN] = p[P_VDC] * i_m
        out[E_R1] = p[P_R1] * i_m * i_m
        out[E_RON] = r_sw * i_m * i_m
    elif mode == DISCHARGE:
        out[0] = -(n * (pol * x[1] + p[P_VD]) + n * n * p[P_R2] * i_m) * p[P_ILM]
        inj = n * i_m * pol
        out[E_R2] = n * n * p[P_R2] * i_m * i_m
        out[E_DIODE] = p[P_VD] * n * i_m
    if p[P_INJ_AMP] != 0.0:
        inj += p[P_INJ_AMP] * math.sin(TWO_PI * p[P_INJ_F] * t)
    r = p[P_RS]
    if p[P_KIND] == CL:
        out[1] = (inj - x[2]) * p[P_IC1]
        out[2] = (x[1] - vg - r * x[2]) * p[P_IL1]
        out[E_FILTER] = r * x[2] * x[2]
        out[E_OUT] = vg * x[2]
    else:
        out[1] = (inj - x[2]) * p[P_IC1]
        out[2] = (x[1] - x[3] - r * x[2]) * p[P_IL1]
        out[3] = (x[2] - x[4]) * p[P_IC2]
        out[4] = (x[3] - vg - r * x[4]) * p[P_IL2]
        out[E_FILTER] = r * (x[2] * x[2] + x[4] * x[4])
        out[E_OUT] = vg * x[4]


@njit(cache=True, inline="always")
def grid_voltages(t, h, p):
    """Grid voltage at ``t``, ``t + h/2`` and ``t + h`` from one sin/cos pair."""
    w = TWO_PI * p[P_F0]
    a = w * t
    s, c = math.sin(a), math.cos(a)
    b = 0.5 * w * h
    if b < 1e-2:
        b2 = b * b
        sb = b * (1.0 - b2 / 6.0 * (1.0 - b2 / 20.0 * (1.0 - b2 / 42.0)))
        cb = 1.0 - b2 / 2.0 * (1.0 - b2 / 12.0 * (1.0 - b2 / 30.0))
    else:
        sb, cb = math.sin(b), math.cos(b)
    s2b = 2.0 * sb * cb
    c2b = cb * cb - sb * sb
    v = p[P_VG]
    return v * s, v * (s * cb + c * sb), v * (s * c2b + c * s2b)


@njit(cache=True, inline="always")
def rk4(x, mode, t, h, pol, p, k1, k2, k3, k4, xt):
    """Advance ``x`` in place by ``h`` with the conduction mode held fixed."""
    vg0, vg1, vg2 = grid_voltages(t, h, p)
    deriv(x, mode, t, vg0, pol, p, k1)
    for j in range(NX):
        xt[j] = x[j] + 0.5 * h * k1[j]
    deriv(xt, mode, t + 0.5 * h, vg1, pol, p, k2)
    for j in range(NX):
        xt[j] = x[j] + 0.5 * h * k2[j]
    deriv(xt, mode, t + 0.5 * h, vg1, pol, p, k3)
    for j in range(NX):
        xt[j] = x[j] + h * k3[j]
    deriv(xt, mode, t + h, vg2, pol, p, k4)
    for j in range(NX):
        x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True)
def free_segment(x, mode, t, h, pol, p, k1, k2, k3, k4, xt, x0, mode_time):
    """Gate-off interval: DISCHARGE until i_m reaches zero, then IDLE.

    The zero crossing is located by linear interpolation of i_m across the
    trial step; the segment is then re-integrated up to the event, i_m is
    clamped to zero and the remainder runs in IDLE.
    """
    if mode == DISCHARGE:
        for j in range(NX):
            x0[j] = x[j]
        rk4(x, DISCHARGE, t, h, pol, p, k1, k2, k3, k4, xt)
        if x[0] > 0.0:
            mode_time[DISCHARGE] += h
            return DISCHARGE
        theta = x0[0] / (x0[0] - x[0])
        for j in range(NX):
            x[j] = x0[j]
        h1 = theta * h
        if h1 > 0.0:
            rk4(x, DISCHARGE, t, h1, pol, p, k1, k2, k3, k4, xt)
        x[0] = 0.0
        mode_time[DISCHARGE] += h1
        if h - h1 > 0.0:
            rk4(x, IDLE, t + h1, h - h1, pol, p, k1, k2, k3, k4, xt)
        mode_time[IDLE] += h - h1
        return IDLE
    rk4(x, IDLE, t, h, pol, p, k1, k2, k3, k4, xt)
    mode_time[IDLE] += h
    return IDLE


@njit(cache=True)
def step(x, k, n_sw, dt, p, k1, k2, k3, k4, xt, x0, mode_time):
    """Advance one integrator step starting at ``t = k*dt``; returns the end mode.

    The carrier resets at multiples of ``n_sw`` steps. The trailing PWM edge
    (carrier crossing the duty reference) is located inside the step.
    """
    t = k * dt
    s0 = (k % n_sw) / n_sw
    d0 = duty(t, p)
    pol = polarity(t + 0.5 * dt, p[P_F0])
    if s0 < d0:
        d1 = duty(t + dt, p)
        h1 = s0 + 1.0 / n_sw - d1
        if h1 > 0.0:
            tau = (d0 - s0) / ((d0 - s0) + h1)
            hc = tau * dt
            rk4(x, CHARGE, t, hc, pol, p, k1, k2, k3, k4, xt)
            mode_time[CHARGE] += hc
            mode = DISCHARGE if x[0] > 0.0 else IDLE
            return free_segment(x, mode, t + hc, dt - hc, pol, p, k1, k2, k3, k4, xt, x0, mode_time)
        rk4(x, CHARGE, t, dt, pol, p, k1, k2, k3, k4, xt)
        mode_time[CHARGE] += dt
        return CHARGE
    mode = DISCHARGE if x[0] > 0.0 else IDLE
    return free_segment(x, mode, t, dt, pol, p, k1, k2, k3, k4, xt, x0, mode_time)


@njit(cache=True)
def simulate(x, p, dt, n_sw, k0, n_settle, n_capture, record):
    """Integrate ``n_settle`` discarded steps then ``n_capture`` captured ones.

    Returns ``(status, k_fail, traces, e_start, mode_time, sum_vi, last_mode)``.
    ``traces`` rows are grid current, grid voltage, i_m (sampled at step
    starts) and source current averaged over each step. ``e_start`` holds the
    state at capture start so the caller can difference the energy integrals.
    """
    k1, k2, k3, k4 = np.zeros(NX), np.zeros(NX), np.zeros(NX), np.zeros(NX)
    xt, x0 = np.zeros(NX), np.zeros(NX)
    mode_time = np.zeros(3)
    n_rec = n_capture if record else 0
    traces = np.zeros((4, n_rec))
    e_start = x.copy()
    sum_vi = 0.0
    mode = IDLE
    f0 = p[P_F0]
    vg_amp = p[P_VG]
    inv_vdc_dt = 1.0 / (p[P_VDC] * dt)
    n_total = n_settle + n_capture
    for i in range(n_total):
        k = k0 + i
        if i == n_settle:
            for j in range(NX):
                e_start[j] = x[j]
            mode_time[:] = 0.0
        if i >= n_settle:
            t = k * dt
            vg = vg_amp * math.sin(TWO_PI * f0 * t)
            ig = grid_current(x, p)
            sum_vi += vg * ig
            e_in = x[E_IN]
            if record:
                c = i - n_settle
                traces[0, c] = ig
                traces[1, c] = vg
                traces[2, c] = x[0]
            mode = step(x, k, n_sw, dt, p, k1, k2, k3, k4, xt, x0, mode_time)
            if record:
                traces[3, i - n_settle] = (x[E_IN] - e_in) * inv_vdc_dt
        else:
            mode = step(x, k, n_sw, dt, p, k1, k2, k3, k4, xt, x0, mode_time)
        for j in range(5):
            if not math.isfinite(x[j]):
                return NONFINITE, k, traces, e_start, mode_time, sum_vi, mode
    if n_capture == 0:
        for j in range(NX):
            e_start[j] = x[j]
    return OK, 0, traces, e_start, mode_time, sum_vi, mode


@njit(cache=True)
def single_pulse(x, p, t_on, dt, max_steps):
    """One gate pulse of width ``t_on`` from the given state, then free-run.

    Runs until the magnetizing current returns to zero (or ``max_steps``).
    Returns ``(peak_i_m, t_end, x_at_peak)``; ``x`` is left at the end state.
    """
    k1, k2, k3, k4 = np.zeros(NX), np.zeros(NX), np.zeros(NX), np.zeros(NX)
    xt, x0 = np.zeros(NX), np.zeros(NX)
    mode_time = np.zeros(3)
    t = 0.0
    n_on = int(t_on / dt)
    for _ in range(n_on):
        rk4(x, CHARGE, t, dt, 1.0, p, k1, k2, k3, k4, xt)
        t += dt
    rem = t_on - n_on * dt
    if rem > 0.0:
        rk4(x, CHARGE, t, rem, 1.0, p, k1, k2, k3, k4, xt)
        t += rem
    peak = x[0]
    x_peak = x.copy()
    mode = DISCHARGE if x[0] > 0.0 else IDLE
    for _ in range(max_steps):
        if mode == IDLE:
            break
        mode = free_segment(x, mode, t, dt, 1.0, p, k1, k2, k3, k4, xt, x0, mode_time)
        t += dt
    return peak, t, x_peak
