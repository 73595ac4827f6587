"""Per-pixel event kernels, pure-Python lane.

These loops mirror evsynth._core operation for operation: same random draw
order, same arithmetic expression shapes, same clamping, so the two lanes
produce bit-identical event streams.  Any change here must be made in
lockstep with _core.pyx.
"""

from __future__ import annotations

import math

import numpy as np

from .rng import next_uniform, substream_state

LANE = "python"

# int64 sentinel: "no event emitted yet at this pixel"
NO_EVENT_T = -(1 << 62)

_TWO_PI = 6.283185307179586


def rng_uniforms(seed: int, pixel: int, interval: int, n: int) -> np.ndarray:
    """Debug hook: the first n uniforms of one (seed, pixel, interval) substream."""
    state = substream_state(seed, pixel, interval)
    out = np.empty(n)
    for i in range(n):
        u, state = next_uniform(state)
        out[i] = u
    return out


def _first_passage(mu, sigma2, a, b, state):
    """Sample which boundary (+a or -b) a drifted Brownian path exits first,
    and the exit time in seconds.  Returns (dt, polarity, rng state);
    polarity 0 with infinite dt means the path never exits (mu = sigma = 0).
    """
    if sigma2 <= 0.0:
        if mu > 0.0:
            return a / mu, 1, state
        if mu < 0.0:
            return b / -mu, -1, state
        return math.inf, 0, state
    u, state = next_uniform(state)
    h = 2.0 * mu / sigma2
    if abs(h) * (a + b) < 1e-12:
        p_on = b / (a + b)
    elif h > 0.0:
        p_on = math.expm1(-h * b) / math.expm1(-h * (a + b))
    else:
        p_on = 1.0 - math.expm1(h * a) / math.expm1(h * (a + b))
    if u <= p_on:
        pol = 1
        theta = a
    else:
        pol = -1
        theta = b
    u1, state = next_uniform(state)
    u2, state = next_uniform(state)
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
    if mu == 0.0:
        if z == 0.0:
            return math.inf, pol, state
        return (theta * theta) / (sigma2 * (z * z)), pol, state
    m = theta / abs(mu)
    lam = (theta * theta) / sigma2
    y = z * z
    w = m + (m * m * y) / (2.0 * lam)
    x = w - (m / (2.0 * lam)) * math.sqrt((4.0 * m * lam) * y + (m * y) * (m * y))
    if x <= 0.0:
        x = 1e-300
    u3, state = next_uniform(state)
    if u3 <= m / (m + x):
        dt = x
    else:
        dt = (m * m) / x
    return dt, pol, state


def fp_samples(mu, sigma2, a, b, seed, pixel, interval, n):
    """Draw n successive first-passage samples from one substream."""
    state = substream_state(seed, pixel, interval)
    dts = np.empty(n)
    pols = np.empty(n, dtype=np.int8)
    for i in range(n):
        dt, pol, state = _first_passage(mu, sigma2, a, b, state)
        dts[i] = dt
        pols[i] = pol
    return dts, pols


def ideal_interval(
    log0,
    log1,
    t0_us,
    t1_us,
    ref,
    last_t,
    width,
    c_on,
    c_off,
    refractory_us,
    px_lo,
    px_hi,
):
    """Threshold-crossing events for pixels [px_lo, px_hi) on one interval.

    log0/log1 are full-frame log intensities; ref and last_t are per-pixel
    state arrays updated in place.  Events emitted per pixel in time order.
    """
    t0 = int(t0_us)
    t1 = int(t1_us)
    t0f = float(t0)
    dtf = float(t1 - t0)
    refr = int(refractory_us)
    a_l = log0[px_lo:px_hi].tolist()
    b_l = log1[px_lo:px_hi].tolist()
    ref_l = ref[px_lo:px_hi].tolist()
    last_l = last_t[px_lo:px_hi].tolist()
    ts, xs, ys, ps = [], [], [], []
    floor = math.floor
    for k in range(px_hi - px_lo):
        a = a_l[k]
        b = b_l[k]
        r = ref_l[k]
        last = last_l[k]
        if b > a:
            d = b - a
            while True:
                level = r + c_on
                if level > b:
                    break
                frac = (level - a) / d
                tu = int(floor(t0f + frac * dtf))
                if tu <= t0:
                    tu = t0 + 1
                elif tu > t1:
                    tu = t1
                if tu - last > refr:
                    i = px_lo + k
                    ts.append(tu)
                    xs.append(i % width)
                    ys.append(i // width)
                    ps.append(1)
                    last = tu
                r = level
        elif b < a:
            d = b - a
            while True:
                level = r - c_off
                if level < b:
                    break
                frac = (level - a) / d
                tu = int(floor(t0f + frac * dtf))
                if tu <= t0:
                    tu = t0 + 1
                elif tu > t1:
                    tu = t1
                if tu - last > refr:
                    i = px_lo + k
                    ts.append(tu)
                    xs.append(i % width)
                    ys.append(i // width)
                    ps.append(-1)
                    last = tu
                r = level
        ref_l[k] = r
        last_l[k] = last
    ref[px_lo:px_hi] = ref_l
    last_t[px_lo:px_hi] = last_l
    return (
        np.array(ts, dtype=np.int64),
        np.array(xs, dtype=np.int32),
        np.array(ys, dtype=np.int32),
        np.array(ps, dtype=np.int8),
    )


def voltmeter_interval(
    log0,
    log1,
    lin0,
    t0_us,
    t1_us,
    v_res,
    last_t,
    width,
    k1,
    k2,
    k3,
    k4,
    k5,
    k6,
    theta_on,
    theta_off,
    seed,
    interval_index,
    px_lo,
    px_hi,
):
    """Drift-diffusion events for pixels [px_lo, px_hi) on one interval.

    Drift and diffusion are held constant over the interval; first-passage
    times are drawn from the per-(seed, pixel, interval) substream, so the
    output does not depend on how pixels are partitioned across workers.
    """
    t0 = int(t0_us)
    t1 = int(t1_us)
    t0f = float(t0)
    t1f = float(t1)
    dt_total = float(t1 - t0) * 1e-6
    hi_clamp = theta_on * (1.0 - 1e-9)
    lo_clamp = -theta_off * (1.0 - 1e-9)
    a_l = log0[px_lo:px_hi].tolist()
    b_l = log1[px_lo:px_hi].tolist()
    lin_l = lin0[px_lo:px_hi].tolist()
    v_l = v_res[px_lo:px_hi].tolist()
    last_l = last_t[px_lo:px_hi].tolist()
    ts, xs, ys, ps = [], [], [], []
    floor = math.floor
    for k in range(px_hi - px_lo):
        a = a_l[k]
        b = b_l[k]
        v = v_l[k]
        last = last_l[k]
        dlog = (b - a) / dt_total
        mu = k1 * dlog + k4
        sigma2 = k3 / (lin_l[k] + k2) + k5 * abs(dlog) + k6
        i = px_lo + k
        state = substream_state(seed, i, interval_index)
        t_cur = t0f
        while True:
            rem = (t1f - t_cur) * 1e-6
            if rem <= 0.0:
                break
            dt, pol, state = _first_passage(
                mu, sigma2, theta_on - v, theta_off + v, state
            )
            if dt > rem:
                v = v + mu * rem
                if v > hi_clamp:
                    v = hi_clamp
                elif v < lo_clamp:
                    v = lo_clamp
                break
            t_cur = t_cur + dt * 1e6
            tu = int(floor(t_cur))
            if tu <= t0:
                tu = t0 + 1
            elif tu > t1:
                tu = t1
            if tu > last:
                ts.append(tu)
                xs.append(i % width)
                ys.append(i // width)
                ps.append(pol)
                last = tu
            v = 0.0
        v_l[k] = v
        last_l[k] = last
    v_res[px_lo:px_hi] = v_l
    last_t[px_lo:px_hi] = last_l
    return (
        np.array(ts, dtype=np.int64),
        np.array(xs, dtype=np.int32),
        np.array(ys, dtype=np.int32),
        np.array(ps, dtype=np.int8),
    )
