"""Rigid camera poses, quaternion rotations, and the weighted pose metric.

Quaternions are stored (w, x, y, z) and kept canonical: unit norm with
w >= 0 (ties broken by the first nonzero component), so a rotation and its
negated quaternion serialize identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWindowError

_NORM_TOL = 1e-9


def _canonicalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    n = math.sqrt(float(q @ q))
    if n < 1e-12 or not math.isfinite(n):
        raise ValueError("quaternion norm is zero or non-finite")
    q = q / n
    for c in q:
        if c > 0.0:
            break
        if c < 0.0:
            q = -q
            break
    q.flags.writeable = False
    return q


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion rotation, canonical sign."""

    q: np.ndarray

    def __init__(self, q):
        object.__setattr__(self, "q", _canonicalize(q))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        half = 0.5 * angle
        return cls(np.concatenate(([math.cos(half)], math.sin(half) * axis)))

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )

    def apply(self, v) -> np.ndarray:
        """Rotate a 3-vector."""
        w = self.q[0]
        u = self.q[1:]
        v = np.asarray(v, dtype=np.float64)
        return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)

    def inverse(self) -> "Rotation":
        return Rotation(self.q * np.array([1.0, -1.0, -1.0, -1.0]))

    def compose(self, other: "Rotation") -> "Rotation":
        """Hamilton product self * other (apply `other` first)."""
        return Rotation(_quat_mul(self.q, other.q))

    def approx_equal(self, other: "Rotation", tol_rad: float = 1e-9) -> bool:
        return geodesic_distance(self, other) <= tol_rad


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")


@dataclass(frozen=True)
class Pose:
    """Camera-to-world rigid transform with optional timing/intrinsics."""

    rotation: Rotation
    translation: np.ndarray
    time_us: int | None = None
    intrinsics_id: int | None = None

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation components must be finite")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)
        if self.time_us is not None and self.time_us < 0:
            raise ValueError("time_us must be nonnegative")


@dataclass(frozen=True)
class DisplacementWeights:
    """Weights for the combined rotation/translation displacement metric."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("weights must be nonnegative with positive sum")


def geodesic_distance(r1: Rotation, r2: Rotation) -> float:
    """Angle of the relative rotation, in [0, pi].

    Computed from the relative quaternion with atan2, which is
    well-conditioned near 0 and pi (the arccos-of-trace form loses digits
    there but agrees to within its own rounding).
    """
    rel = _quat_mul(r1.q * np.array([1.0, -1.0, -1.0, -1.0]), r2.q)
    sin_half = math.sqrt(float(rel[1:] @ rel[1:]))
    cos_half = abs(float(rel[0]))
    return 2.0 * math.atan2(sin_half, cos_half)


def slerp(r1: Rotation, r2: Rotation, u: float) -> Rotation:
    """Constant-angular-speed interpolation; shortest arc; u in [0, 1]."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter {u} outside [0, 1]")
    q1 = r1.q
    q2 = r2.q
    dot = float(q1 @ q2)
    if dot < 0.0:
        q2 = -q2
        dot = -dot
    if dot > 1.0 - 1e-9:
        # nearly parallel: normalized lerp avoids sin(theta) ~ 0
        return Rotation((1.0 - u) * q1 + u * q2)
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return Rotation((math.sin((1.0 - u) * theta) / s) * q1 + (math.sin(u * theta) / s) * q2)


def window_rotation_average(rotations: list[Rotation]) -> Rotation:
    """Representative rotation of a smoothing window.

    Sign-aligns all quaternions to the first, then renormalizes the
    component-wise mean.  For two rotations this equals the slerp midpoint.
    """
    if not rotations:
        raise ValueError("empty rotation window")
    ref = rotations[0].q
    acc = np.zeros(4)
    for r in rotations:
        q = r.q
        if float(ref @ q) < 0.0:
            q = -q
        acc += q
    acc /= len(rotations)
    if math.sqrt(float(acc @ acc)) < 1e-6:
        raise DegenerateWindowError("rotation window is antipodal-degenerate")
    return Rotation(acc)


def pose_displacement(
    p1: Pose, p2: Pose, w: DisplacementWeights = DisplacementWeights()
) -> float:
    """Weighted displacement alpha*angle + beta*|translation delta|."""
    theta = geodesic_distance(p1.rotation, p2.rotation)
    dt = p2.translation - p1.translation
    return w.alpha * theta + w.beta * math.sqrt(float(dt @ dt))
