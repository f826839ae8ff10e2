# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot loop. Must stay operation-for-operation identical to _slots_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, fmod, M_PI, NAN

cnp.import_array()

cdef double _DEG = M_PI / 180.0


cdef inline double _eff(const double[:, ::1] rows, int j, double t) noexcept nogil:
    cdef double center = rows[j, 0], rise = rows[j, 1], plateau = rows[j, 2]
    cdef double fall = rows[j, 3], peak = rows[j, 4]
    cdef double p0 = center - 0.5 * plateau
    cdef double p1 = center + 0.5 * plateau
    cdef double start = p0 - rise
    cdef double end = p1 + fall
    cdef double x
    if t <= start or t >= end:
        return 0.0
    if t < p0:
        x = (t - start) / rise
        return peak * (1.0 - cos(M_PI * x)) * 0.5
    if t <= p1:
        return peak
    x = (t - p1) / fall
    return peak * (1.0 + cos(M_PI * x)) * 0.5


cdef inline double _p_d0(double pol, double theta) noexcept nogil:
    cdef double ang = fmod(pol - 2.0 * theta, 180.0)
    if ang < 0.0:
        ang += 180.0
    if ang >= 180.0:
        ang = 0.0
    return 0.5 * (1.0 + cos((2.0 * ang) * _DEG))


cdef inline void _click(bint* clicked, double* first, double* last, int j, double t) noexcept nogil:
    if not clicked[j] or t < first[j]:
        first[j] = t
    if not clicked[j] or t > last[j]:
        last[j] = t
    clicked[j] = True


def simulate_slots(long long first_slot, const cnp.int8_t[::1] bob_basis, double period,
                   double origin, const cnp.int64_t[::1] p_slot, const double[::1] p_time,
                   const double[::1] p_int, const double[::1] p_pol,
                   const double[:, ::1] params, const double[::1] gate_offsets,
                   const double[:, ::1] u_pulse, const double[:, :, ::1] u_slot,
                   const double[:, ::1] z, double[::1] dead_until, cnp.uint8_t[::1] armed):
    cdef Py_ssize_t n = bob_basis.shape[0]
    cdef Py_ssize_t m = p_slot.shape[0]
    cdef Py_ssize_t i, q = 0
    cdef int j, jj
    cdef long long k
    cdef double T, t, theta, inten, p0, power
    cdef double gstart[2]
    cdef double glen[2]
    cdef double dead[2]
    cdef int arm[2]
    cdef bint clicked[2]
    cdef double first[2]
    cdef double last[2]
    cdef double s[2]
    cdef bint bad = False

    kinds_arr = np.zeros(n, dtype=np.int8)
    stamps_arr = np.full(n, np.nan)
    cdef cnp.int8_t[::1] kinds = kinds_arr
    cdef double[::1] stamps = stamps_arr

    for j in range(2):
        gstart[j] = gate_offsets[j] + params[j, 0] - 0.5 * params[j, 2] - params[j, 1]
        glen[j] = params[j, 1] + params[j, 2] + params[j, 3]
        dead[j] = dead_until[j]
        arm[j] = armed[j]
    if m and p_slot[0] < first_slot:
        raise ValueError("pulse slot precedes chunk start")
    for q in range(m):
        if p_int[q] < 0.0:
            raise ValueError("pulse intensity must be non-negative")
    q = 0

    with nogil:
        for i in range(n):
            k = first_slot + i
            T = k * period + origin
            clicked[0] = False
            clicked[1] = False
            first[0] = 0.0
            first[1] = 0.0
            last[0] = 0.0
            last[1] = 0.0
            theta = 0.0 if bob_basis[i] == 0 else 22.5

            for j in range(2):
                if arm[j]:
                    arm[j] = 0
                    if u_slot[i, j, 2] < params[j, 8]:
                        t = gstart[j] + u_slot[i, j, 3] * glen[j]
                        if T + t >= dead[j]:
                            _click(clicked, first, last, j, t)
                if u_slot[i, j, 0] < params[j, 6]:
                    t = gstart[j] + u_slot[i, j, 1] * glen[j]
                    if T + t >= dead[j]:
                        _click(clicked, first, last, j, t)

            while q < m and p_slot[q] == k:
                inten = p_int[q]
                t = p_time[q]
                p0 = _p_d0(p_pol[q], theta)
                if inten <= 1.0:
                    if inten > 0.0:
                        j = 0 if u_pulse[q, 0] < p0 else 1
                        if T + t >= dead[j] and u_pulse[q, 1] < inten * _eff(params, j, t - gate_offsets[j]):
                            _click(clicked, first, last, j, t)
                else:
                    for jj in range(2):
                        power = inten * (p0 if jj == 0 else 1.0 - p0)
                        if power >= params[jj, 7]:
                            _click(clicked, first, last, jj, t)
                        elif power > 0.0:
                            arm[jj] = 1
                q += 1

            if clicked[0] or clicked[1]:
                for j in range(2):
                    if clicked[j]:
                        dead[j] = T + last[j] + params[j, 5]
                        s[j] = first[j] + params[j, 10] + params[j, 9] * z[i, j]
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
    for j in range(2):
        dead_until[j] = dead[j]
        armed[j] = arm[j]
    return kinds_arr, stamps_arr
