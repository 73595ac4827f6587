"""Bit-equality between the compiled kernel lane and the pure-Python lane.

Every test here is skipped when the extension is unavailable; the pure lane
is then the only implementation and is covered by the rest of the suite.
"""

import numpy as np
import pytest

from evsynth import kernels
from evsynth.kernels import available_lanes

lanes = available_lanes()
needs_both = pytest.mark.skipif(
    "compiled" not in lanes, reason="compiled extension not built"
)


def _both():
    return lanes["python"], lanes["compiled"]


def test_lane_registry_names():
    assert "python" in lanes
    assert kernels.backend_name in lanes


@needs_both
def test_uniform_streams_bitwise_equal():
    py, cy = _both()
    for seed, pixel, interval in [(0, 0, 0), (123, 45, 6), (2**63, 10**6, 3)]:
        a = py.rng_uniforms(seed, pixel, interval, 512)
        b = cy.rng_uniforms(seed, pixel, interval, 512)
        assert np.array_equal(a, b)
        assert np.all((a > 0) & (a <= 1))


@needs_both
@pytest.mark.parametrize(
    "mu,sigma2,a,b",
    [
        (2.0, 1.0, 1.0, 1.0),
        (-1.3, 0.7, 0.4, 1.1),
        (0.0, 1.0, 0.8, 0.8),
        (0.05, 3.0, 0.2, 0.9),
        (4.0, 0.0, 0.5, 0.5),
    ],
)
def test_passage_samples_bitwise_equal(mu, sigma2, a, b):
    py, cy = _both()
    dt_p, pol_p = py.fp_samples(mu, sigma2, a, b, 99, 3, 1, 2000)
    dt_c, pol_c = cy.fp_samples(mu, sigma2, a, b, 99, 3, 1, 2000)
    assert np.array_equal(dt_p, dt_c)
    assert np.array_equal(pol_p, pol_c)


def _random_interval_inputs(seed, n_px, v_bound):
    # residual voltages must sit strictly inside (-theta_off, theta_on)
    rng = np.random.default_rng(seed)
    log0 = rng.uniform(-2.0, 0.0, n_px)
    log1 = log0 + rng.uniform(-1.5, 1.5, n_px)
    lin0 = np.exp(log0)
    v = rng.uniform(-v_bound, v_bound, n_px)
    last = np.full(n_px, kernels.NO_EVENT_T, dtype=np.int64)
    last[rng.random(n_px) < 0.3] = 17
    return log0, log1, lin0, v, last


@needs_both
def test_ideal_interval_bitwise_equal():
    py, cy = _both()
    n_px = 64 * 48
    log0, log1, _, v, last = _random_interval_inputs(7, n_px, 0.9)
    ref_p = log0 - v
    ref_c = ref_p.copy()
    last_p = last.copy()
    last_c = last.copy()
    out_p = py.ideal_interval(log0, log1, 100, 517, ref_p, last_p, 64, 0.21, 0.27, 3, 0, n_px)
    out_c = cy.ideal_interval(log0, log1, 100, 517, ref_c, last_c, 64, 0.21, 0.27, 3, 0, n_px)
    for a, b in zip(out_p, out_c):
        assert np.array_equal(a, b)
    assert out_p[0].size > 0
    assert np.array_equal(ref_p, ref_c)
    assert np.array_equal(last_p, last_c)


@needs_both
def test_voltmeter_interval_bitwise_equal_including_state():
    py, cy = _both()
    n_px = 64 * 48
    log0, log1, lin0, v, last = _random_interval_inputs(21, n_px, 0.39)
    args = (0.5, 1e-3, 0.1, 0.01, 0.1, 1e-5, 0.4, 0.4, 31337, 5)
    v_p, v_c = v.copy(), v.copy()
    last_p, last_c = last.copy(), last.copy()
    out_p = py.voltmeter_interval(
        log0, log1, lin0, 2500, 2917, v_p, last_p, 64, *args, 0, n_px
    )
    out_c = cy.voltmeter_interval(
        log0, log1, lin0, 2500, 2917, v_c, last_c, 64, *args, 0, n_px
    )
    for a, b in zip(out_p, out_c):
        assert np.array_equal(a, b)
    assert out_p[0].size > 0
    assert np.array_equal(v_p, v_c)
    assert np.array_equal(last_p, last_c)


@needs_both
def test_voltmeter_pixel_range_split_is_seamless():
    # kernel output must not depend on the pixel partition
    py, cy = _both()
    n_px = 40 * 30
    log0, log1, lin0, v, last = _random_interval_inputs(3, n_px, 0.49)
    args = (0.5, 1e-3, 0.1, 0.01, 0.1, 1e-5, 0.5, 0.5, 777, 2)

    def run(mod, splits):
        vv, ll = v.copy(), last.copy()
        chunks = []
        for lo, hi in splits:
            chunks.append(mod.voltmeter_interval(
                log0, log1, lin0, 0, 417, vv, ll, 40, *args, lo, hi
            ))
        t = np.concatenate([c[0] for c in chunks])
        return t, vv, ll

    whole_t, whole_v, whole_l = run(cy, [(0, n_px)])
    split_t, split_v, split_l = run(cy, [(0, 300), (300, 301), (301, n_px)])
    pure_t, pure_v, pure_l = run(py, [(0, 512), (512, n_px)])
    assert np.array_equal(whole_t, split_t)
    assert np.array_equal(whole_v, split_v)
    assert np.array_equal(whole_l, split_l)
    assert np.array_equal(whole_t, pure_t)
    assert np.array_equal(whole_v, pure_v)


def test_disable_flag_forces_python_lane(tmp_path):
    import subprocess
    import sys

    code = "from evsynth import kernels; print(kernels.backend_name)"
    env_on = {"EVSYNTH_DISABLE_EXT": "1"}
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={**__import__("os").environ, **env_on},
    )
    assert out.stdout.strip() == "python"
