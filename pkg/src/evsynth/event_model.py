"""Per-pixel event generation: ideal threshold backend and stochastic
drift-diffusion backend with first-passage timestamp sampling.

The scalar operations here are the reference semantics; the array kernels in
_pykernels/_core run the same arithmetic over pixel ranges.  Voltages and
thresholds live in normalized log-intensity units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _pykernels, kernels
from .errors import InvalidIntervalError
from .rng import SubstreamRNG

NO_EVENT_T = _pykernels.NO_EVENT_T


@dataclass(frozen=True)
class EventRecord:
    t_us: int
    x: int
    y: int
    polarity: int

    def __post_init__(self):
        if self.t_us < 0:
            raise ValueError("timestamps must be nonnegative microseconds")
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")


@dataclass(frozen=True)
class IdealParams:
    """Noise-free threshold model: an event per c-sized log-intensity step."""

    c_on: float = 1.0
    c_off: float = 1.0
    log_floor: float = 1e-3
    refractory_us: int = 0

    def __post_init__(self):
        if not (self.c_on > 0 and self.c_off > 0):
            raise ValueError("contrast thresholds must be positive")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be positive")
        if self.refractory_us < 0:
            raise ValueError("refractory_us must be nonnegative")


@dataclass(frozen=True)
class VoltmeterParams:
    """Drift-diffusion sensor constants.

    k1 scales signal drift, k4 is a leak drift; k3/(L+k2) is the
    brightness-dependent diffusion with k5 (signal) and k6 (floor) terms.
    """

    k1: float = 0.5
    k2: float = 1e-3
    k3: float = 0.1
    k4: float = 0.01
    k5: float = 0.1
    k6: float = 1e-5
    theta_on: float = 1.0
    theta_off: float = 1.0
    log_floor: float = 1e-3

    def __post_init__(self):
        if not (self.theta_on > 0 and self.theta_off > 0):
            raise ValueError("thresholds must be positive")
        for name in ("k1", "k2", "k3", "k4", "k5", "k6"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be positive")


@dataclass(frozen=True)
class PixelState:
    """Carry-over state between consecutive frame intervals of one pixel.

    v_residual is the accumulated voltage (for the ideal backend: log
    intensity minus the running reference level).  t_ref_us is the time of
    the last emitted event, None before the first one.
    """

    v_residual: float = 0.0
    last_log_l: float | None = None
    t_ref_us: int | None = None
    rng_substream: int | None = None


def to_log_intensity(l: float, eps: float) -> float:
    if l < 0:
        raise ValueError("intensity must be nonnegative")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return math.log(max(l, eps))


def drift_diffusion(l: float, dlog_dt: float, p: VoltmeterParams) -> tuple[float, float]:
    """Drift (volts/s) and diffusion (volts^2/s) for one inter-frame interval.

    l is the clamped linear intensity at the interval start; dlog_dt the
    log-intensity rate over the interval.  Held constant within the interval.
    """
    if l < 0:
        raise ValueError("intensity must be nonnegative")
    mu = p.k1 * dlog_dt + p.k4
    sigma2 = p.k3 / (l + p.k2) + p.k5 * abs(dlog_dt) + p.k6
    return mu, sigma2


def first_passage_sample(
    mu: float, sigma2: float, theta_on: float, theta_off: float, rng: SubstreamRNG
) -> tuple[float, int]:
    """Boundary exit of a drifted Brownian path between +theta_on/-theta_off.

    Returns (dt_seconds, polarity); polarity 0 with infinite dt when the
    path can never exit (mu = sigma2 = 0).
    """
    if not (theta_on > 0 and theta_off > 0):
        raise ValueError("thresholds must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    dt, pol, rng.state = _pykernels._first_passage(mu, sigma2, theta_on, theta_off, rng.state)
    return dt, pol


def _check_interval(t0_us: int, t1_us: int):
    if t1_us <= t0_us:
        raise InvalidIntervalError(f"need t1_us > t0_us, got [{t0_us}, {t1_us}]")


def ideal_pixel_events(
    log_l0: float,
    log_l1: float,
    t0_us: int,
    t1_us: int,
    state: PixelState,
    p: IdealParams,
) -> tuple[list[EventRecord], PixelState]:
    """Events of one pixel over one interval with linear log-intensity motion.

    Crossing times are solved in closed form, floored to microseconds; a
    crossing exactly at the threshold emits.  Suppressed crossings (same
    microsecond or inside the refractory window) still advance the
    reference level.
    """
    _check_interval(t0_us, t1_us)
    ref = np.array([log_l0 - state.v_residual])
    last = np.array(
        [NO_EVENT_T if state.t_ref_us is None else int(state.t_ref_us)], dtype=np.int64
    )
    t, x, y, pol = kernels.ideal_interval(
        np.array([log_l0]),
        np.array([log_l1]),
        int(t0_us),
        int(t1_us),
        ref,
        last,
        1,
        p.c_on,
        p.c_off,
        int(p.refractory_us),
        0,
        1,
    )
    events = [
        EventRecord(int(t[i]), int(x[i]), int(y[i]), int(pol[i])) for i in range(t.size)
    ]
    new_state = replace(
        state,
        v_residual=log_l1 - float(ref[0]),
        last_log_l=log_l1,
        t_ref_us=None if last[0] == NO_EVENT_T else int(last[0]),
    )
    return events, new_state


def voltmeter_pixel_events(
    log_l0: float,
    log_l1: float,
    t0_us: int,
    t1_us: int,
    state: PixelState,
    p: VoltmeterParams,
    rng: SubstreamRNG,
    lin_l0: float | None = None,
) -> tuple[list[EventRecord], PixelState]:
    """Stochastic events of one pixel over one interval.

    Mirrors the array kernels: repeated first-passage sampling against the
    residual-shifted boundaries, floor rounding to microseconds, same-
    microsecond duplicates dropped, leftover drift accumulated at the end.
    Seeding rng as SubstreamRNG(seed, pixel, interval) reproduces the engine
    output for that pixel exactly.
    """
    _check_interval(t0_us, t1_us)
    t0 = int(t0_us)
    t1 = int(t1_us)
    t0f = float(t0)
    t1f = float(t1)
    dt_total = float(t1 - t0) * 1e-6
    hi_clamp = p.theta_on * (1.0 - 1e-9)
    lo_clamp = -p.theta_off * (1.0 - 1e-9)
    if lin_l0 is None:
        lin_l0 = math.exp(log_l0)
    dlog = (log_l1 - log_l0) / dt_total
    mu, sigma2 = drift_diffusion(lin_l0, dlog, p)
    v = state.v_residual
    last = NO_EVENT_T if state.t_ref_us is None else int(state.t_ref_us)
    events = []
    t_cur = t0f
    while True:
        rem = (t1f - t_cur) * 1e-6
        if rem <= 0.0:
            break
        dt, pol, rng.state = _pykernels._first_passage(
            mu, sigma2, p.theta_on - v, p.theta_off + v, rng.state
        )
        if dt > rem:
            v = v + mu * rem
            if v > hi_clamp:
                v = hi_clamp
            elif v < lo_clamp:
                v = lo_clamp
            break
        t_cur = t_cur + dt * 1e6
        tu = int(math.floor(t_cur))
        if tu <= t0:
            tu = t0 + 1
        elif tu > t1:
            tu = t1
        if tu > last:
            events.append(EventRecord(tu, 0, 0, pol))
            last = tu
        v = 0.0
    new_state = replace(
        state,
        v_residual=v,
        last_log_l=log_l1,
        t_ref_us=None if last == NO_EVENT_T else last,
    )
    return events, new_state
