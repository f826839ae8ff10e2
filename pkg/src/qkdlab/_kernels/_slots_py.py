"""Pure-Python slot loop. Reference semantics for the compiled kernel.

Parameter rows (one per detector) are laid out as::

    0 center  1 rise  2 plateau  3 fall  4 peak  5 dead_time  6 dark_p
    7 bright_threshold  8 afterpulse_p  9 jitter_sigma  10 centroid_offset

Random inputs are pre-drawn by the caller so both kernels consume identical
numbers: ``u_slot[i, j] = (dark, dark_pos, afterpulse, afterpulse_pos)``,
``z[i, j]`` jitter normals, ``u_pulse[p] = (route, click)``.
"""
import math

import numpy as np

_DEG = math.pi / 180.0


def _eff(row, t):
    center, rise, plateau, fall, peak = row[0], row[1], row[2], row[3], row[4]
    p0 = center - 0.5 * plateau
    p1 = center + 0.5 * plateau
    start = p0 - rise
    end = p1 + fall
    if t <= start or t >= end:
        return 0.0
    if t < p0:
        x = (t - start) / rise
        return peak * (1.0 - math.cos(math.pi * x)) * 0.5
    if t <= p1:
        return peak
    x = (t - p1) / fall
    return peak * (1.0 + math.cos(math.pi * x)) * 0.5


def _p_d0(pol, theta):
    ang = math.fmod(pol - 2.0 * theta, 180.0)
    if ang < 0.0:
        ang += 180.0
    if ang >= 180.0:
        ang = 0.0
    return 0.5 * (1.0 + math.cos((2.0 * ang) * _DEG))


def simulate_slots(first_slot, bob_basis, period, origin, p_slot, p_time, p_int, p_pol,
                   params, gate_offsets, u_pulse, u_slot, z, dead_until, armed):
    n = len(bob_basis)
    m = len(p_slot)
    rows = params.tolist()
    goff = gate_offsets.tolist()
    gstart = [goff[j] + rows[j][0] - 0.5 * rows[j][2] - rows[j][1] for j in (0, 1)]
    glen = [rows[j][1] + rows[j][2] + rows[j][3] for j in (0, 1)]
    basis = bob_basis.tolist()
    ps, pt, pi_, pp = p_slot.tolist(), p_time.tolist(), p_int.tolist(), p_pol.tolist()
    up = u_pulse.tolist()
    us = u_slot.tolist()
    zz = z.tolist()
    dead = [float(dead_until[0]), float(dead_until[1])]
    arm = [int(armed[0]), int(armed[1])]

    kinds = np.zeros(n, dtype=np.int8)
    stamps = np.full(n, np.nan)
    q = 0
    if m and ps[0] < first_slot:
        raise ValueError("pulse slot precedes chunk start")
    for i in range(n):
        k = first_slot + i
        T = k * period + origin
        clicked = [False, False]
        first = [0.0, 0.0]
        last = [0.0, 0.0]
        theta = 0.0 if basis[i] == 0 else 22.5

        for j in (0, 1):
            u = us[i][j]
            if arm[j]:
                arm[j] = 0
                if u[2] < rows[j][8]:
                    t = gstart[j] + u[3] * glen[j]
                    if T + t >= dead[j]:
                        if not clicked[j] or t < first[j]:
                            first[j] = t
                        if not clicked[j] or t > last[j]:
                            last[j] = t
                        clicked[j] = True
            if u[0] < rows[j][6]:
                t = gstart[j] + u[1] * glen[j]
                if T + t >= dead[j]:
                    if not clicked[j] or t < first[j]:
                        first[j] = t
                    if not clicked[j] or t > last[j]:
                        last[j] = t
                    clicked[j] = True

        while q < m and ps[q] == k:
            inten = pi_[q]
            t = pt[q]
            if inten < 0.0:
                raise ValueError("pulse intensity must be non-negative")
            p0 = _p_d0(pp[q], theta)
            if inten <= 1.0:
                if inten > 0.0:
                    j = 0 if up[q][0] < p0 else 1
                    if T + t >= dead[j] and up[q][1] < inten * _eff(rows[j], t - goff[j]):
                        if not clicked[j] or t < first[j]:
                            first[j] = t
                        if not clicked[j] or t > last[j]:
                            last[j] = t
                        clicked[j] = True
            else:
                for j in (0, 1):
                    power = inten * (p0 if j == 0 else 1.0 - p0)
                    if power >= rows[j][7]:
                        if not clicked[j] or t < first[j]:
                            first[j] = t
                        if not clicked[j] or t > last[j]:
                            last[j] = t
                        clicked[j] = True
                    elif power > 0.0:
                        arm[j] = 1
            q += 1

        if clicked[0] or clicked[1]:
            s = [0.0, 0.0]
            for j in (0, 1):
                if clicked[j]:
                    dead[j] = T + last[j] + rows[j][5]
                    s[j] = first[j] + rows[j][10] + rows[j][9] * zz[i][j]
            if clicked[0] and clicked[1]:
                kinds[i] = 3
                stamps[i] = s[0] if s[0] <= s[1] else s[1]
            elif clicked[0]:
                kinds[i] = 1
                stamps[i] = s[0]
            else:
                kinds[i] = 2
                stamps[i] = s[1]

    if q != m:
        raise ValueError("pulse slots outside chunk or not sorted")
    dead_until[0], dead_until[1] = dead[0], dead[1]
    armed[0], armed[1] = arm[0], arm[1]
    return kinds, stamps
