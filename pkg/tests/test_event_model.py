import math

import numpy as np
import pytest

from evsynth import (
    EventRecord,
    IdealParams,
    InvalidIntervalError,
    PixelState,
    SubstreamRNG,
    VoltmeterParams,
    drift_diffusion,
    first_passage_sample,
    ideal_pixel_events,
    to_log_intensity,
    voltmeter_pixel_events,
)
from evsynth import kernels

from conftest import boundary_hit_probability


def test_event_record_validation():
    r = EventRecord(10, 3, 4, 1)
    assert (r.t_us, r.x, r.y, r.polarity) == (10, 3, 4, 1)
    with pytest.raises(ValueError):
        EventRecord(-1, 0, 0, 1)
    with pytest.raises(ValueError):
        EventRecord(0, 0, 0, 2)


def test_params_defaults_and_validation():
    p = VoltmeterParams()
    assert (p.k1, p.k2, p.k3, p.k4, p.k5, p.k6) == (0.5, 1e-3, 0.1, 0.01, 0.1, 1e-5)
    assert p.theta_on == 1.0 and p.theta_off == 1.0
    with pytest.raises(ValueError):
        VoltmeterParams(theta_on=0.0)
    with pytest.raises(ValueError):
        VoltmeterParams(k3=-0.1)
    with pytest.raises(ValueError):
        IdealParams(c_on=0.0)
    with pytest.raises(ValueError):
        IdealParams(refractory_us=-1)


def test_log_conversion_clamps_at_floor():
    assert to_log_intensity(0.5, 1e-3) == math.log(0.5)
    assert to_log_intensity(0.0, 1e-3) == math.log(1e-3)
    assert to_log_intensity(1e-6, 1e-3) == math.log(1e-3)
    with pytest.raises(ValueError):
        to_log_intensity(-0.1, 1e-3)


def test_drift_diffusion_hand_values():
    p = VoltmeterParams()
    mu, s2 = drift_diffusion(0.5, 2.0, p)
    assert mu == pytest.approx(0.5 * 2.0 + 0.01)
    assert s2 == pytest.approx(0.1 / (0.5 + 1e-3) + 0.1 * 2.0 + 1e-5)
    # diffusion uses the magnitude of the rate; drift keeps the sign
    mu_n, s2_n = drift_diffusion(0.5, -2.0, p)
    assert mu_n == pytest.approx(0.5 * -2.0 + 0.01)
    assert s2_n == pytest.approx(s2)
    # darker pixels are noisier
    assert drift_diffusion(0.01, 0.0, p)[1] > drift_diffusion(0.9, 0.0, p)[1]


# ---------------------------------------------------------------------------
# first-passage sampling


def test_first_passage_degenerate_cases():
    rng = SubstreamRNG(1)
    dt, pol = first_passage_sample(0.0, 0.0, 1.0, 1.0, rng)
    assert math.isinf(dt) and pol == 0
    dt, pol = first_passage_sample(2.0, 0.0, 0.6, 1.0, rng)
    assert dt == pytest.approx(0.3) and pol == 1
    dt, pol = first_passage_sample(-2.0, 0.0, 1.0, 0.5, rng)
    assert dt == pytest.approx(0.25) and pol == -1
    with pytest.raises(ValueError):
        first_passage_sample(1.0, -1.0, 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        first_passage_sample(1.0, 1.0, 0.0, 1.0, rng)


def _reference_passage(mu, sigma2, a, b, rng):
    """Textbook re-derivation: boundary choice from the exit probability of
    drifted Brownian motion, then an inverse-Gaussian (or one-sided stable)
    draw for the exit time via the Michael/Schucany/Haas transform."""
    u_choice = rng.uniform()
    p_on = boundary_hit_probability(mu, sigma2, a, b)
    assert abs(u_choice - p_on) > 1e-9, "redraw fixture; tie with boundary"
    pol = 1 if u_choice <= p_on else -1
    theta = a if pol == 1 else b
    u1, u2 = rng.uniform(), rng.uniform()
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    if mu == 0.0:
        return (math.inf if z == 0.0 else theta * theta / (sigma2 * z * z)), pol
    m = theta / abs(mu)
    lam = theta * theta / sigma2
    y = z * z
    x = m + (m * m * y) / (2.0 * lam) - (m / (2.0 * lam)) * math.sqrt(
        4.0 * m * lam * y + m * m * y * y
    )
    if x <= 0.0:
        x = 1e-300
    u3 = rng.uniform()
    return (x if u3 <= m / (m + x) else m * m / x), pol


@pytest.mark.parametrize(
    "mu,sigma2,a,b",
    [
        (1.7, 0.9, 1.0, 1.0),
        (-0.8, 0.4, 0.7, 1.3),
        (0.0, 1.1, 0.5, 0.8),
        (3.0, 2.0, 0.2, 0.2),
    ],
)
def test_sampler_follows_documented_draw_order(mu, sigma2, a, b):
    n = 300
    rng_a = SubstreamRNG(42, 7, 3)
    rng_b = SubstreamRNG(42, 7, 3)
    for _ in range(n):
        dt, pol = first_passage_sample(mu, sigma2, a, b, rng_a)
        dt_ref, pol_ref = _reference_passage(mu, sigma2, a, b, rng_b)
        assert pol == pol_ref
        if math.isinf(dt_ref):
            assert math.isinf(dt)
        else:
            assert dt == pytest.approx(dt_ref, rel=1e-12)
    # both consumed the same number of draws
    assert rng_a.state == rng_b.state


def test_boundary_choice_matches_exit_probability():
    n = 100_000
    for mu, sigma2, a, b in [(1.0, 1.0, 1.0, 1.0), (-0.5, 0.8, 0.6, 1.1)]:
        _, pols = kernels.fp_samples(mu, sigma2, a, b, 7, 0, 0, n)
        p = boundary_hit_probability(mu, sigma2, a, b)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(np.mean(pols == 1) - p) < 3 * se


def test_driftless_exit_time_median():
    # dt = theta^2/(sigma2 z^2) with z standard normal, so the median is
    # theta^2/(sigma2 * q) with q the normal interquartile point squared
    n = 200_000
    theta, sigma2 = 0.7, 1.3
    dts, _ = kernels.fp_samples(0.0, sigma2, theta, theta, 11, 0, 0, n)
    q75 = 0.6744897501960817  # Phi^-1(0.75)
    expected_median = theta * theta / (sigma2 * q75 * q75)
    assert np.median(dts) == pytest.approx(expected_median, rel=0.02)


def test_single_boundary_mean_matches_inverse_gaussian():
    # against a far opposite boundary the exit time is inverse-Gaussian with
    # mean theta/mu
    n = 200_000
    dts, pols = kernels.fp_samples(2.0, 1.0, 1.0, 1e9, 3, 0, 0, n)
    assert np.all(pols == 1)
    m, lam = 0.5, 1.0
    se = math.sqrt(m**3 / lam / n)
    assert abs(float(np.mean(dts)) - m) < 3 * se


# ---------------------------------------------------------------------------
# ideal pixel backend


def test_ideal_quarter_ramp_crossings():
    p = IdealParams(c_on=0.25, c_off=0.25)
    events, state = ideal_pixel_events(0.0, 1.0, 0, 1000, PixelState(), p)
    assert [(e.t_us, e.polarity) for e in events] == [
        (250, 1),
        (500, 1),
        (750, 1),
        (1000, 1),
    ]
    assert state.v_residual == pytest.approx(0.0, abs=1e-12)
    assert state.t_ref_us == 1000


def test_ideal_down_ramp_mirrors_up_ramp():
    p = IdealParams(c_on=0.25, c_off=0.25)
    events, _ = ideal_pixel_events(1.0, 0.0, 0, 1000, PixelState(), p)
    assert [(e.t_us, e.polarity) for e in events] == [
        (250, -1),
        (500, -1),
        (750, -1),
        (1000, -1),
    ]


def test_ideal_counts_match_threshold_division():
    for delta, c in [(1.37, 0.3), (0.9, 0.21), (2.6, 0.45), (0.199, 0.2)]:
        p = IdealParams(c_on=c, c_off=c)
        up, _ = ideal_pixel_events(0.2, 0.2 + delta, 0, 10_000, PixelState(), p)
        down, _ = ideal_pixel_events(0.2 + delta, 0.2, 0, 10_000, PixelState(), p)
        assert len(up) == math.floor(delta / c)
        assert len(down) == len(up)
        assert all(e.polarity == 1 for e in up)
        assert all(e.polarity == -1 for e in down)


def test_ideal_crossing_exactly_at_threshold_emits():
    p = IdealParams(c_on=0.25, c_off=0.25)
    events, _ = ideal_pixel_events(0.0, 0.25, 0, 400, PixelState(), p)
    assert [(e.t_us, e.polarity) for e in events] == [(400, 1)]


def test_ideal_same_microsecond_crossings_merge():
    p = IdealParams(c_on=0.25, c_off=0.25)
    events, state = ideal_pixel_events(0.0, 1.0, 0, 2, PixelState(), p)
    assert [(e.t_us, e.polarity) for e in events] == [(1, 1), (2, 1)]
    # suppressed crossings still advanced the reference level
    assert state.v_residual == pytest.approx(0.0, abs=1e-12)


def test_ideal_refractory_suppresses_but_advances_reference():
    p = IdealParams(c_on=0.25, c_off=0.25, refractory_us=300)
    events, state = ideal_pixel_events(0.0, 1.0, 0, 1000, PixelState(), p)
    assert [e.t_us for e in events] == [250, 750]
    assert state.v_residual == pytest.approx(0.0, abs=1e-12)


def test_ideal_state_carries_across_split_intervals():
    p = IdealParams(c_on=0.25, c_off=0.25)
    whole, ws = ideal_pixel_events(0.0, 1.0, 0, 1000, PixelState(), p)
    first, s1 = ideal_pixel_events(0.0, 0.5, 0, 500, PixelState(), p)
    second, s2 = ideal_pixel_events(0.5, 1.0, 500, 1000, s1, p)
    assert [(e.t_us, e.polarity) for e in first + second] == [
        (e.t_us, e.polarity) for e in whole
    ]
    assert s2.v_residual == pytest.approx(ws.v_residual, abs=1e-12)
    assert s2.t_ref_us == ws.t_ref_us


def test_ideal_flat_signal_keeps_state():
    p = IdealParams()
    start = PixelState(v_residual=0.4, t_ref_us=123)
    events, state = ideal_pixel_events(0.7, 0.7, 0, 1000, start, p)
    assert events == []
    assert state.v_residual == pytest.approx(0.4)
    assert state.t_ref_us == 123


def test_ideal_rejects_empty_interval():
    with pytest.raises(InvalidIntervalError):
        ideal_pixel_events(0.0, 1.0, 500, 500, PixelState(), IdealParams())


# ---------------------------------------------------------------------------
# voltmeter pixel backend


def _noiseless(theta):
    return VoltmeterParams(
        k1=1.0, k3=0.0, k4=0.0, k5=0.0, k6=0.0, theta_on=theta, theta_off=theta
    )


def test_voltmeter_noiseless_ramp_matches_ideal():
    # counts and polarities agree exactly; timestamps may differ by one
    # microsecond when a crossing lands on an integer boundary, because the
    # ideal path floors a closed-form time and the noiseless voltmeter
    # accumulates increments
    theta = 0.3
    events, state = voltmeter_pixel_events(
        0.0, 1.0, 0, 1000, PixelState(), _noiseless(theta), SubstreamRNG(0)
    )
    ideal, istate = ideal_pixel_events(
        0.0, 1.0, 0, 1000, PixelState(), IdealParams(c_on=theta, c_off=theta)
    )
    assert [e.polarity for e in events] == [e.polarity for e in ideal]
    assert all(
        abs(a.t_us - b.t_us) <= 1 for a, b in zip(events, ideal)
    )
    assert state.v_residual == pytest.approx(istate.v_residual, abs=1e-9)


def test_voltmeter_flat_dark_signal_is_silent_when_noise_free():
    events, state = voltmeter_pixel_events(
        0.5, 0.5, 0, 5000, PixelState(v_residual=0.2), _noiseless(1.0), SubstreamRNG(0)
    )
    assert events == []
    assert state.v_residual == pytest.approx(0.2)


def test_voltmeter_same_seed_reproduces_events():
    p = VoltmeterParams()
    a, _ = voltmeter_pixel_events(
        0.0, 1.8, 0, 100_000, PixelState(), p, SubstreamRNG(5, 17, 2)
    )
    b, _ = voltmeter_pixel_events(
        0.0, 1.8, 0, 100_000, PixelState(), p, SubstreamRNG(5, 17, 2)
    )
    assert [(e.t_us, e.polarity) for e in a] == [(e.t_us, e.polarity) for e in b]
    assert len(a) > 0


def test_voltmeter_timestamps_stay_inside_interval():
    p = VoltmeterParams(k3=0.5, theta_on=0.2, theta_off=0.2)
    events, _ = voltmeter_pixel_events(
        0.0, 0.4, 1000, 3000, PixelState(), p, SubstreamRNG(9)
    )
    assert len(events) > 0
    ts = [e.t_us for e in events]
    assert all(1000 < t <= 3000 for t in ts)
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_voltmeter_residual_stays_strictly_inside_thresholds():
    # the carried voltage must never reach a boundary, or the next interval
    # would start with a nonpositive threshold distance
    p = VoltmeterParams(theta_on=0.3, theta_off=0.3)
    rng = np.random.default_rng(4)
    state = PixelState()
    logs = np.cumsum(rng.uniform(-0.4, 0.4, 40))
    t = 0
    for a, b in zip(logs, logs[1:]):
        state_rng = SubstreamRNG(8, 0, t)
        _, state = voltmeter_pixel_events(
            float(a), float(b), t * 500, (t + 1) * 500, state, p, state_rng
        )
        assert -p.theta_off < state.v_residual < p.theta_on
        t += 1


def test_voltmeter_rejects_empty_interval():
    with pytest.raises(InvalidIntervalError):
        voltmeter_pixel_events(
            0.0, 1.0, 7, 7, PixelState(), VoltmeterParams(), SubstreamRNG(0)
        )
