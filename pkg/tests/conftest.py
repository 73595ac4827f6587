"""Shared fixtures and oracle helpers."""

import math

import numpy as np
import pytest

from evsynth import LuminanceFrame, Pose, Rotation


def random_rotation(rng) -> Rotation:
    q = rng.normal(size=4)
    return Rotation(q)


def random_pose(rng) -> Pose:
    return Pose(random_rotation(rng), rng.normal(size=3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def helix_poses(n: int, intrinsics_id: int | None = None) -> list[Pose]:
    """Gently curved path with slow rotation; smooth enough that chordal
    arc length tracks the true curve closely."""
    poses = []
    for i in range(n):
        th = 0.12 * i
        t = np.array([math.cos(th), math.sin(th), 0.08 * i])
        r = Rotation.from_axis_angle([0.0, 0.0, 1.0], 0.02 * i)
        poses.append(Pose(r, t, intrinsics_id=intrinsics_id))
    return poses


def collinear_poses(n: int) -> list[Pose]:
    """Identity rotations marching along x with mildly varying spacing."""
    return [
        Pose(Rotation.identity(), np.array([0.3 * i + 0.01 * i * i, 0.0, 0.0]))
        for i in range(n)
    ]


def exp_ramp_frames(width, height, n_frames, seed, spacing_us=416, step=0.35):
    """Per-pixel exponential intensity ramps.

    Each pixel's log intensity moves by a random amount up to +-step per
    frame; the rates are generic floats so crossings never land exactly on
    a microsecond or threshold boundary.  Fast pixels saturate against the
    [0, 1] clamp partway through, which leaves flat (noise-only) tails.
    """
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.2, 0.8, width * height)
    rate = rng.uniform(-step, step, width * height)
    frames = []
    for k in range(n_frames):
        pixels = np.clip(base * np.exp(rate * k), 0.0, 1.0)
        frames.append(LuminanceFrame(width, height, pixels, k * spacing_us))
    return frames


def em_mean_exit(mu, sigma2, theta, n_paths, dt, seed, t_cap=40.0):
    """Euler-Maruyama first-passage oracle: mean time for a drifted Brownian
    path started at 0 to reach the single boundary +theta.

    Paths are advanced in blocks; a path's exit time is the first grid time
    at or past the crossing.  Paths still alive at t_cap count as t_cap
    (negligible mass for the drifts used in tests).
    """
    rng = np.random.default_rng(seed)
    step_sd = math.sqrt(sigma2 * dt)
    block = 256
    pos = np.zeros(n_paths)
    exits = np.full(n_paths, t_cap)
    alive = np.arange(n_paths)
    t = 0.0
    while alive.size and t < t_cap:
        z = rng.standard_normal((block, alive.size))
        paths = pos[alive] + np.cumsum(mu * dt + step_sd * z, axis=0)
        crossed = paths >= theta
        hit = crossed.any(axis=0)
        first = crossed.argmax(axis=0)
        exits[alive[hit]] = t + (first[hit] + 1) * dt
        pos[alive] = paths[-1]
        alive = alive[~hit]
        t += block * dt
    return float(exits.mean())


def boundary_hit_probability(mu, sigma2, a, b):
    """P(path from 0 exits at +a before -b); direct scale-function form."""
    if mu == 0.0:
        return b / (a + b)
    h = 2.0 * mu / sigma2
    return (math.exp(h * b) - 1.0) / (math.exp(h * b) - math.exp(-h * a))
