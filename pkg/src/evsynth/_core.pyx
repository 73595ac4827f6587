# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Per-pixel event kernels, compiled lane.

Mirrors _pykernels.py operation for operation: same random draw order, same
arithmetic expression shapes, same clamping.  Both lanes call the same libm
and the extension is built with -ffp-contract=off, so outputs are
bit-identical.  Any change here must be made in lockstep with _pykernels.py.
"""

import numpy as np

from libc.math cimport INFINITY, cos, expm1, fabs, floor, log, sqrt
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcpy

LANE = "compiled"

NO_EVENT_T = -(1 << 62)

cdef double _TWO_PI = 6.283185307179586
cdef double _INV_2_53 = 1.0 / 9007199254740992.0
cdef unsigned long long _GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z ^= z >> 30
    z = z * 0xBF58476D1CE4E5B9ULL
    z ^= z >> 27
    z = z * 0x94D049BB133111EBULL
    z ^= z >> 31
    return z


cdef inline unsigned long long _substream(
    unsigned long long seed, unsigned long long pixel, unsigned long long interval
) nogil:
    cdef unsigned long long h = _mix64(seed)
    h = _mix64(h ^ pixel)
    h = _mix64(h ^ interval)
    return h


cdef inline double _next_u(unsigned long long* state) nogil:
    state[0] = state[0] + _GAMMA
    cdef unsigned long long x = _mix64(state[0])
    return <double>((x >> 11) + 1) * _INV_2_53


cdef double _first_passage(
    double mu, double sigma2, double a, double b, unsigned long long* state, int* pol
) nogil:
    cdef double u, h, p_on, u1, u2, z, theta, m, lam, y, w, x, u3
    if sigma2 <= 0.0:
        if mu > 0.0:
            pol[0] = 1
            return a / mu
        if mu < 0.0:
            pol[0] = -1
            return b / -mu
        pol[0] = 0
        return INFINITY
    u = _next_u(state)
    h = 2.0 * mu / sigma2
    if fabs(h) * (a + b) < 1e-12:
        p_on = b / (a + b)
    elif h > 0.0:
        p_on = expm1(-h * b) / expm1(-h * (a + b))
    else:
        p_on = 1.0 - expm1(h * a) / expm1(h * (a + b))
    if u <= p_on:
        pol[0] = 1
        theta = a
    else:
        pol[0] = -1
        theta = b
    u1 = _next_u(state)
    u2 = _next_u(state)
    z = sqrt(-2.0 * log(u1)) * cos(_TWO_PI * u2)
    if mu == 0.0:
        if z == 0.0:
            return INFINITY
        return (theta * theta) / (sigma2 * (z * z))
    m = theta / fabs(mu)
    lam = (theta * theta) / sigma2
    y = z * z
    w = m + (m * m * y) / (2.0 * lam)
    x = w - (m / (2.0 * lam)) * sqrt((4.0 * m * lam) * y + (m * y) * (m * y))
    if x <= 0.0:
        x = 1e-300
    u3 = _next_u(state)
    if u3 <= m / (m + x):
        return x
    return (m * m) / x


cdef struct EvBuf:
    long long* t
    int* x
    int* y
    signed char* p
    Py_ssize_t n
    Py_ssize_t cap


cdef int _ev_init(EvBuf* buf) nogil:
    buf.n = 0
    buf.cap = 1024
    buf.t = <long long*>malloc(buf.cap * sizeof(long long))
    buf.x = <int*>malloc(buf.cap * sizeof(int))
    buf.y = <int*>malloc(buf.cap * sizeof(int))
    buf.p = <signed char*>malloc(buf.cap * sizeof(signed char))
    if buf.t == NULL or buf.x == NULL or buf.y == NULL or buf.p == NULL:
        return -1
    return 0


cdef void _ev_free(EvBuf* buf) nogil:
    free(buf.t)
    free(buf.x)
    free(buf.y)
    free(buf.p)


cdef int _ev_push(EvBuf* buf, long long t, int x, int y, signed char p) nogil:
    cdef Py_ssize_t cap
    cdef long long* nt
    cdef int* nx
    cdef int* ny
    cdef signed char* np_
    if buf.n == buf.cap:
        cap = buf.cap * 2
        nt = <long long*>realloc(buf.t, cap * sizeof(long long))
        if nt == NULL:
            return -1
        buf.t = nt
        nx = <int*>realloc(buf.x, cap * sizeof(int))
        if nx == NULL:
            return -1
        buf.x = nx
        ny = <int*>realloc(buf.y, cap * sizeof(int))
        if ny == NULL:
            return -1
        buf.y = ny
        np_ = <signed char*>realloc(buf.p, cap * sizeof(signed char))
        if np_ == NULL:
            return -1
        buf.p = np_
        buf.cap = cap
    buf.t[buf.n] = t
    buf.x[buf.n] = x
    buf.y[buf.n] = y
    buf.p[buf.n] = p
    buf.n += 1
    return 0


cdef _ev_to_arrays(EvBuf* buf):
    cdef Py_ssize_t n = buf.n
    t_arr = np.empty(n, dtype=np.int64)
    x_arr = np.empty(n, dtype=np.int32)
    y_arr = np.empty(n, dtype=np.int32)
    p_arr = np.empty(n, dtype=np.int8)
    cdef long long[::1] tv
    cdef int[::1] xv
    cdef int[::1] yv
    cdef signed char[::1] pv
    if n > 0:
        tv = t_arr
        xv = x_arr
        yv = y_arr
        pv = p_arr
        memcpy(&tv[0], buf.t, n * sizeof(long long))
        memcpy(&xv[0], buf.x, n * sizeof(int))
        memcpy(&yv[0], buf.y, n * sizeof(int))
        memcpy(&pv[0], buf.p, n * sizeof(signed char))
    return t_arr, x_arr, y_arr, p_arr


def rng_uniforms(seed, pixel, interval, n):
    """Debug hook: the first n uniforms of one (seed, pixel, interval) substream."""
    cdef unsigned long long state = _substream(
        <unsigned long long>seed, <unsigned long long>pixel, <unsigned long long>interval
    )
    cdef Py_ssize_t count = n
    out = np.empty(count)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(count):
        ov[i] = _next_u(&state)
    return out


def fp_samples(double mu, double sigma2, double a, double b, seed, pixel, interval, n):
    """Draw n successive first-passage samples from one substream."""
    cdef unsigned long long state = _substream(
        <unsigned long long>seed, <unsigned long long>pixel, <unsigned long long>interval
    )
    cdef Py_ssize_t count = n
    dts = np.empty(count)
    pols = np.empty(count, dtype=np.int8)
    cdef double[::1] dv = dts
    cdef signed char[::1] pv = pols
    cdef Py_ssize_t i
    cdef int pol
    with nogil:
        for i in range(count):
            dv[i] = _first_passage(mu, sigma2, a, b, &state, &pol)
            pv[i] = <signed char>pol
    return dts, pols


def ideal_interval(
    double[::1] log0,
    double[::1] log1,
    long long t0_us,
    long long t1_us,
    double[::1] ref,
    long long[::1] last_t,
    int width,
    double c_on,
    double c_off,
    long long refractory_us,
    Py_ssize_t px_lo,
    Py_ssize_t px_hi,
):
    """Threshold-crossing events for pixels [px_lo, px_hi) on one interval."""
    cdef long long t0 = t0_us
    cdef long long t1 = t1_us
    cdef double t0f = <double>t0
    cdef double dtf = <double>(t1 - t0)
    cdef long long refr = refractory_us
    cdef EvBuf buf
    cdef Py_ssize_t k, i
    cdef double a, b, r, d, level, frac
    cdef long long tu, last
    cdef int fail = 0
    if _ev_init(&buf) != 0:
        _ev_free(&buf)
        raise MemoryError()
    with nogil:
        for k in range(px_hi - px_lo):
            i = px_lo + k
            a = log0[i]
            b = log1[i]
            r = ref[i]
            last = last_t[i]
            if b > a:
                d = b - a
                while True:
                    level = r + c_on
                    if level > b:
                        break
                    frac = (level - a) / d
                    tu = <long long>floor(t0f + frac * dtf)
                    if tu <= t0:
                        tu = t0 + 1
                    elif tu > t1:
                        tu = t1
                    if tu - last > refr:
                        if _ev_push(&buf, tu, <int>(i % width), <int>(i // width), 1) != 0:
                            fail = 1
                            break
                        last = tu
                    r = level
                if fail:
                    break
            elif b < a:
                d = b - a
                while True:
                    level = r - c_off
                    if level < b:
                        break
                    frac = (level - a) / d
                    tu = <long long>floor(t0f + frac * dtf)
                    if tu <= t0:
                        tu = t0 + 1
                    elif tu > t1:
                        tu = t1
                    if tu - last > refr:
                        if _ev_push(&buf, tu, <int>(i % width), <int>(i // width), -1) != 0:
                            fail = 1
                            break
                        last = tu
                    r = level
                if fail:
                    break
            ref[i] = r
            last_t[i] = last
    if fail:
        _ev_free(&buf)
        raise MemoryError()
    result = _ev_to_arrays(&buf)
    _ev_free(&buf)
    return result


def voltmeter_interval(
    double[::1] log0,
    double[::1] log1,
    double[::1] lin0,
    long long t0_us,
    long long t1_us,
    double[::1] v_res,
    long long[::1] last_t,
    int width,
    double k1,
    double k2,
    double k3,
    double k4,
    double k5,
    double k6,
    double theta_on,
    double theta_off,
    seed,
    long long interval_index,
    Py_ssize_t px_lo,
    Py_ssize_t px_hi,
):
    """Drift-diffusion events for pixels [px_lo, px_hi) on one interval."""
    cdef unsigned long long useed = <unsigned long long>seed
    cdef long long t0 = t0_us
    cdef long long t1 = t1_us
    cdef double t0f = <double>t0
    cdef double t1f = <double>t1
    cdef double dt_total = (<double>(t1 - t0)) * 1e-6
    cdef double hi_clamp = theta_on * (1.0 - 1e-9)
    cdef double lo_clamp = -theta_off * (1.0 - 1e-9)
    cdef EvBuf buf
    cdef Py_ssize_t k, i
    cdef double a, b, v, dlog, mu, sigma2, t_cur, rem, dt
    cdef long long tu, last
    cdef unsigned long long state
    cdef int pol
    cdef int fail = 0
    if _ev_init(&buf) != 0:
        _ev_free(&buf)
        raise MemoryError()
    with nogil:
        for k in range(px_hi - px_lo):
            i = px_lo + k
            a = log0[i]
            b = log1[i]
            v = v_res[i]
            last = last_t[i]
            dlog = (b - a) / dt_total
            mu = k1 * dlog + k4
            sigma2 = k3 / (lin0[i] + k2) + k5 * fabs(dlog) + k6
            state = _substream(useed, <unsigned long long>i, <unsigned long long>interval_index)
            t_cur = t0f
            while True:
                rem = (t1f - t_cur) * 1e-6
                if rem <= 0.0:
                    break
                dt = _first_passage(mu, sigma2, theta_on - v, theta_off + v, &state, &pol)
                if dt > rem:
                    v = v + mu * rem
                    if v > hi_clamp:
                        v = hi_clamp
                    elif v < lo_clamp:
                        v = lo_clamp
                    break
                t_cur = t_cur + dt * 1e6
                tu = <long long>floor(t_cur)
                if tu <= t0:
                    tu = t0 + 1
                elif tu > t1:
                    tu = t1
                if tu > last:
                    if _ev_push(&buf, tu, <int>(i % width), <int>(i // width), <signed char>pol) != 0:
                        fail = 1
                        break
                    last = tu
                v = 0.0
            if fail:
                break
            v_res[i] = v
            last_t[i] = last
    if fail:
        _ev_free(&buf)
        raise MemoryError()
    result = _ev_to_arrays(&buf)
    _ev_free(&buf)
    return result
