"""Pose-sequence smoothing, velocity-controlled densification, and
keyframe mini-trajectory augmentation.

The pipeline is: smooth the raw poses with a sliding window, measure the
cumulative weighted arc length, sample a speed profile on a uniform grid,
rescale speeds into arc-length targets, and evaluate an interpolating pose
spline at those targets.  Short novel-view paths are built the same way
from small keyframe subsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import (
    DegeneratePathError,
    FormatError,
    InsufficientPosesError,
    InvalidProfileError,
)
from .pose import (
    DisplacementWeights,
    Pose,
    Rotation,
    _quat_mul,
    pose_displacement,
    window_rotation_average,
)

DEFAULT_FPS = 2400.0


def _frame_spacing_us(fps: float) -> int:
    if fps <= 0:
        raise ValueError("fps must be positive")
    spacing = int(1_000_000 // fps)
    if spacing < 1:
        raise ValueError("fps too high for microsecond timestamps")
    return spacing


# ---------------------------------------------------------------------------
# velocity profiles


class AnalyticProfile:
    """Speed as a positive function of normalized time t in [0, 1]."""

    def __init__(self, func, name: str = "analytic"):
        self.func = func
        self.name = name

    @classmethod
    def preset(cls, name: str) -> "AnalyticProfile":
        if name == "gs2e":
            return cls(lambda t: 0.25 * math.sin(t) + 1.1, name="gs2e")
        raise InvalidProfileError(f"unknown profile preset {name!r}")

    @classmethod
    def constant(cls, v: float) -> "AnalyticProfile":
        if not (v > 0 and math.isfinite(v)):
            raise InvalidProfileError("constant speed must be positive and finite")
        return cls(lambda t, _v=v: _v, name=f"const:{v:g}")

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.array([float(self.func(tj)) for tj in np.asarray(t, dtype=np.float64)])


def _bspline_step(x: np.ndarray) -> np.ndarray:
    """Integral of the cubic B-spline kernel, 0 at x=-2 rising to 1 at x=+2."""
    x = np.asarray(x, dtype=np.float64)
    a = -np.abs(x)
    lo = np.clip(a, -2.0, -1.0)
    mid = np.clip(a, -1.0, 0.0)
    r = np.where(a <= -2.0, 0.0, (2.0 + lo) ** 4 / 24.0)
    r = np.where(
        a > -1.0,
        0.5 + 2.0 * mid / 3.0 - mid**3 / 3.0 - mid**4 / 8.0,
        r,
    )
    return np.where(x > 0.0, 1.0 - r, r)


@dataclass
class SpeedListProfile:
    """Per-segment speed multipliers blended into a C2 staircase.

    The normalized time axis is split into len(multipliers) equal segments.
    Each boundary transition is the step response of a cubic B-spline kernel
    over a window of width 2*tau, tau = blend_tau_fraction * segment length.
    """

    multipliers: list[float]
    base_fps: float = DEFAULT_FPS
    blend_tau_fraction: float = 0.1

    def __post_init__(self):
        self.multipliers = [float(r) for r in self.multipliers]
        if not self.multipliers:
            raise InvalidProfileError("speed list is empty")
        if any(not (r > 0 and math.isfinite(r)) for r in self.multipliers):
            raise InvalidProfileError("speed multipliers must be positive and finite")
        if not self.base_fps > 0:
            raise InvalidProfileError("base_fps must be positive")
        if not 0.0 < self.blend_tau_fraction <= 0.5:
            raise InvalidProfileError("blend_tau_fraction must lie in (0, 0.5]")

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        r = self.multipliers
        n_seg = len(r)
        out = np.full(t.shape, r[0])
        if n_seg == 1:
            return out
        seg = 1.0 / n_seg
        tau = self.blend_tau_fraction * seg
        for b in range(1, n_seg):
            x = 2.0 * (t - b * seg) / tau
            out += (r[b] - r[b - 1]) * _bspline_step(x)
        return out


VelocityProfile = AnalyticProfile | SpeedListProfile


def sample_profile(profile: VelocityProfile, m: int) -> np.ndarray:
    """Sample M-1 speeds on the uniform grid t_j = j/(M-1), j = 0..M-2."""
    if m < 2:
        raise ValueError("need at least 2 output poses")
    t = np.arange(m - 1, dtype=np.float64) / (m - 1)
    u = np.asarray(profile.values(t), dtype=np.float64)
    if u.shape != (m - 1,):
        raise InvalidProfileError("profile returned wrong sample count")
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        raise InvalidProfileError("profile produced a nonpositive or non-finite speed")
    return u


def reparameterize(total_length: float, speeds: np.ndarray) -> np.ndarray:
    """Arc-length targets whose increments are proportional to the speeds.

    The last target is pinned to total_length exactly so cumulative rounding
    cannot leave the spline domain.
    """
    u = np.asarray(speeds, dtype=np.float64)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("speeds must be a nonempty 1-d array")
    if np.any(u <= 0.0):
        raise InvalidProfileError("speeds must be positive")
    if total_length < 0:
        raise ValueError("total_length must be nonnegative")
    ds = (u / u.sum()) * total_length
    s = np.empty(u.size + 1)
    s[0] = 0.0
    np.cumsum(ds[:-1], out=s[1:-1])
    s[-1] = total_length
    return s


# ---------------------------------------------------------------------------
# smoothing and arc length


def smooth_poses(poses: list[Pose], w: int) -> list[Pose]:
    """Sliding-window mean of translations and average of rotations.

    Windows are truncated at the sequence ends, never padded.  Timing and
    intrinsics of the center pose are carried through untouched.
    """
    if not poses:
        raise InsufficientPosesError("empty pose sequence")
    if w < 0:
        raise ValueError("window half-width must be nonnegative")
    if w == 0:
        return list(poses)
    out = []
    n = len(poses)
    for i in range(n):
        lo = max(0, i - w)
        hi = min(n, i + w + 1)
        window = poses[lo:hi]
        t_mean = np.mean([p.translation for p in window], axis=0)
        r_mean = window_rotation_average([p.rotation for p in window])
        out.append(
            Pose(r_mean, t_mean, time_us=poses[i].time_us, intrinsics_id=poses[i].intrinsics_id)
        )
    return out


def cumulative_arclength(poses: list[Pose], weights: DisplacementWeights) -> np.ndarray:
    if not poses:
        raise InsufficientPosesError("empty pose sequence")
    s = np.zeros(len(poses))
    for i in range(1, len(poses)):
        s[i] = s[i - 1] + pose_displacement(poses[i - 1], poses[i], weights)
    return s


@dataclass(frozen=True)
class Trajectory:
    """Ordered poses with their cumulative weighted arc length."""

    poses: list[Pose]
    weights: DisplacementWeights
    arclens: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.poses:
            raise InsufficientPosesError("trajectory needs at least one pose")
        if self.arclens is None:
            object.__setattr__(self, "arclens", cumulative_arclength(self.poses, self.weights))
        arclens = np.asarray(self.arclens, dtype=np.float64)
        if arclens.shape != (len(self.poses),):
            raise ValueError("arclens length must match pose count")
        if np.any(np.diff(arclens) < 0):
            raise ValueError("arclens must be nondecreasing")
        arclens.flags.writeable = False
        object.__setattr__(self, "arclens", arclens)
        times = [p.time_us for p in self.poses]
        for a, b in zip(times, times[1:]):
            if a is not None and b is not None and b <= a:
                raise ValueError("pose timestamps must be strictly increasing")

    @property
    def total_length(self) -> float:
        return float(self.arclens[-1])

    def __len__(self) -> int:
        return len(self.poses)


# ---------------------------------------------------------------------------
# quaternion spline internals


def _quat_log(q: np.ndarray) -> np.ndarray:
    """Log map of a unit quaternion; returns a half-angle axis vector."""
    v = q[1:]
    n = math.sqrt(float(v @ v))
    if n < 1e-12:
        return v.copy()
    theta = math.atan2(n, float(q[0]))
    return v * (theta / n)

def _quat_exp(v: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(v @ v))
    if n < 1e-8:
        s = 1.0 - n * n / 6.0
    else:
        s = math.sin(n) / n
    return np.concatenate(([math.cos(n)], s * v))

def _quat_conj(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def _slerp_raw(qa: np.ndarray, qb: np.ndarray, u: float) -> np.ndarray:
    """Slerp on raw quaternion arrays without sign flipping."""
    dot = float(qa @ qb)
    if abs(dot) > 1.0 - 1e-9:
        q = (1.0 - u) * qa + u * qb
        return q / math.sqrt(float(q @ q))
    theta = math.acos(max(-1.0, min(1.0, dot)))
    s = math.sin(theta)
    return (math.sin((1.0 - u) * theta) / s) * qa + (math.sin(u * theta) / s) * qb


class _RotationSpline:
    """Piecewise cubic quaternion curve through the given rotations.

    Each segment is a cubic Bezier evaluated by de Casteljau over slerps;
    inner control quaternions come from finite-difference angular velocities
    at the knots, so the curve interpolates and is C1.  A single segment with
    matched end velocities degenerates to exact slerp.
    """

    def __init__(self, knots: np.ndarray, rotations: list[Rotation]):
        if len(rotations) != knots.size:
            raise ValueError("knot/rotation count mismatch")
        self.knots = knots
        qs = [rotations[0].q.copy()]
        for r in rotations[1:]:
            q = r.q
            if float(qs[-1] @ q) < 0.0:
                q = -q
            qs.append(q.copy())
        self.qs = qs
        n = len(qs)
        omegas = []
        for i in range(n):
            lo = max(0, i - 1)
            hi = min(n - 1, i + 1)
            if hi == lo:
                omegas.append(np.zeros(3))
                continue
            rel = _quat_log(_quat_mul(_quat_conj(qs[lo]), qs[hi]))
            omegas.append(rel / (knots[hi] - knots[lo]))
        self.omegas = omegas

    def evaluate(self, s: float) -> Rotation:
        knots = self.knots
        if len(self.qs) == 1:
            return Rotation(self.qs[0])
        i = int(np.searchsorted(knots, s, side="right")) - 1
        i = max(0, min(i, len(self.qs) - 2))
        h = knots[i + 1] - knots[i]
        u = (s - knots[i]) / h
        q0 = self.qs[i]
        q3 = self.qs[i + 1]
        b1 = _quat_mul(q0, _quat_exp((h / 3.0) * self.omegas[i]))
        b2 = _quat_mul(q3, _quat_exp((-h / 3.0) * self.omegas[i + 1]))
        p01 = _slerp_raw(q0, b1, u)
        p12 = _slerp_raw(b1, b2, u)
        p23 = _slerp_raw(b2, q3, u)
        p012 = _slerp_raw(p01, p12, u)
        p123 = _slerp_raw(p12, p23, u)
        return Rotation(_slerp_raw(p012, p123, u))


def _collapse_duplicates(poses: list[Pose], arclens: np.ndarray):
    keep_poses = [poses[0]]
    keep_s = [float(arclens[0])]
    for p, s in zip(poses[1:], arclens[1:]):
        if float(s) > keep_s[-1]:
            keep_poses.append(p)
            keep_s.append(float(s))
    return keep_poses, np.array(keep_s)


class PoseSpline:
    """Interpolating pose curve parameterized by cumulative arc length.

    Translations follow an interpolating B-spline (cubic where the control
    count allows, degrading to quadratic/linear), rotations a piecewise
    cubic quaternion curve.  Control poses are reproduced exactly at their
    knots; queries outside [0, s_total] are rejected.
    """

    def __init__(self, poses: list[Pose], arclens: np.ndarray):
        poses, knots = _collapse_duplicates(poses, np.asarray(arclens, dtype=np.float64))
        if len(poses) < 2:
            raise DegeneratePathError("all control poses coincide (zero path length)")
        self.knots = knots
        self.control_poses = poses
        k = min(3, len(poses) - 1)
        translations = np.stack([p.translation for p in poses])
        self._tspline = make_interp_spline(knots, translations, k=k, axis=0)
        self._rspline = _RotationSpline(knots, [p.rotation for p in poses])

    @property
    def s_total(self) -> float:
        return float(self.knots[-1])

    def evaluate(self, s: float) -> Pose:
        if not self.knots[0] <= s <= self.knots[-1]:
            raise ValueError(f"arc length {s} outside spline domain [0, {self.s_total}]")
        t = np.asarray(self._tspline(s), dtype=np.float64)
        return Pose(self._rspline.evaluate(float(s)), t)

    def evaluate_many(self, s_values: np.ndarray) -> list[Pose]:
        s_values = np.asarray(s_values, dtype=np.float64)
        if s_values.size and (s_values.min() < self.knots[0] or s_values.max() > self.knots[-1]):
            raise ValueError("arc-length query outside spline domain")
        ts = np.asarray(self._tspline(s_values), dtype=np.float64)
        return [
            Pose(self._rspline.evaluate(float(s)), ts[i]) for i, s in enumerate(s_values)
        ]


def fit_pose_spline(traj: Trajectory) -> PoseSpline:
    return PoseSpline(traj.poses, traj.arclens)


# ---------------------------------------------------------------------------
# densification


def _uniform_times_us(m: int, fps: float, duration_us: int | None) -> list[int]:
    if duration_us is None:
        spacing = _frame_spacing_us(fps)
        return [j * spacing for j in range(m)]
    duration_us = int(duration_us)
    if duration_us < m - 1:
        raise ValueError("duration too short for strictly increasing microsecond stamps")
    return [(j * duration_us) // (m - 1) for j in range(m)]


def densify(
    poses: list[Pose],
    gamma: float,
    profile: VelocityProfile,
    weights: DisplacementWeights,
    w: int = 2,
    fps: float | None = None,
    duration_us: int | None = None,
) -> Trajectory:
    """Expand N poses into M = ceil(gamma*N) poses following a speed profile.

    Steps: smooth, accumulate arc length, sample the profile, rescale into
    arc-length targets, evaluate the fitted spline there.  Timestamps are
    uniform, by default at 2400 fps frame spacing.
    """
    if len(poses) < 2:
        raise InsufficientPosesError("densify needs at least 2 poses")
    if not gamma > 1.0:
        raise ValueError("interpolation multiplier gamma must exceed 1")
    if fps is None:
        fps = getattr(profile, "base_fps", DEFAULT_FPS)
    m = math.ceil(gamma * len(poses))
    smoothed = smooth_poses(poses, w)
    arclens = cumulative_arclength(smoothed, weights)
    spline = PoseSpline(smoothed, arclens)
    u = sample_profile(profile, m)
    targets = reparameterize(float(arclens[-1]), u)
    times = _uniform_times_us(m, fps, duration_us)
    out = [
        Pose(p.rotation, p.translation, time_us=t)
        for p, t in zip(spline.evaluate_many(targets), times)
    ]
    return Trajectory(out, weights)


# ---------------------------------------------------------------------------
# keyframe augmentation


def sample_keyframe_groups(dense: Trajectory, g: int, k: int, seed: int) -> list[list[int]]:
    """Draw G sorted groups of K distinct pose indices, uniformly without
    replacement, reproducibly for a given seed."""
    m = len(dense)
    if g < 1:
        raise ValueError("need at least one group")
    if k < 2:
        raise ValueError("groups need at least 2 keyframes")
    if k > m:
        raise InsufficientPosesError(f"cannot draw {k} keyframes from {m} poses")
    rng = np.random.default_rng(seed)
    groups = []
    for _ in range(g):
        idx = np.sort(rng.choice(m, size=k, replace=False))
        groups.append([int(i) for i in idx])
    return groups


@dataclass(frozen=True)
class MiniTrajectory:
    poses: list[Pose]
    source_keyframe_indices: list[int]
    curve_kind: str
    intrinsics_id: int | None


def _bernstein_matrix(tau: np.ndarray, d: int) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    cols = []
    for i in range(d + 1):
        cols.append(math.comb(d, i) * tau**i * (1.0 - tau) ** (d - i))
    return np.stack(cols, axis=1)


def _fit_bezier_translations(points: np.ndarray, tau_k: np.ndarray, d: int) -> np.ndarray:
    """Control points of a degree-d Bezier through the end points that least-
    squares fits the interior ones.

    The solve runs on deviations from the end-to-end chord, which keeps the
    minimum-norm solution of underdetermined fits affine-invariant (collinear
    inputs stay collinear).
    """
    p0, pd = points[0], points[-1]
    chord = p0[None, :] + tau_k[:, None] * (pd - p0)[None, :]
    node_tau = np.arange(d + 1) / d
    ctrl_chord = p0[None, :] + node_tau[:, None] * (pd - p0)[None, :]
    if d < 2 or len(points) < 3:
        return ctrl_chord
    basis = _bernstein_matrix(tau_k[1:-1], d)[:, 1:d]
    rhs = points[1:-1] - chord[1:-1]
    dev, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
    ctrl = ctrl_chord.copy()
    ctrl[1:d] += dev
    return ctrl


def _bezier_point(ctrl: np.ndarray, tau: float) -> np.ndarray:
    pts = ctrl.copy()
    for level in range(len(ctrl) - 1, 0, -1):
        pts[:level] = (1.0 - tau) * pts[:level] + tau * pts[1:level + 1]
    return pts[0]


def augment_mini_trajectory(
    dense: Trajectory,
    group: list[int],
    f: int,
    curve_kind: str = "bspline",
    weights: DisplacementWeights | None = None,
    degree: int = 3,
    profile: VelocityProfile | None = None,
    fps: float = DEFAULT_FPS,
) -> MiniTrajectory:
    """Interpolate F poses through the keyframes selected by `group`.

    Targets are uniform in local arc length unless a speed profile is
    supplied.  Translations follow either an interpolating B-spline or a
    least-squares Bezier with pinned end control points; rotations always
    follow the interpolating quaternion curve.  Intrinsics come from the
    first keyframe.
    """
    m = len(dense)
    if f < 2:
        raise ValueError("need at least 2 output poses")
    if len(group) < 2:
        raise InsufficientPosesError("keyframe group needs at least 2 indices")
    if any(b <= a for a, b in zip(group, group[1:])):
        raise ValueError("keyframe indices must be strictly increasing")
    if group[0] < 0 or group[-1] >= m:
        raise ValueError("keyframe index out of range")
    if weights is None:
        weights = dense.weights

    keyframes = [dense.poses[i] for i in group]
    local_s = cumulative_arclength(keyframes, weights)
    s_total = float(local_s[-1])
    if s_total <= 0.0:
        raise DegeneratePathError("keyframe group spans zero arc length")

    if profile is None:
        targets = np.arange(f, dtype=np.float64) * (s_total / (f - 1))
        targets[-1] = s_total
    else:
        targets = reparameterize(s_total, sample_profile(profile, f))

    if curve_kind == "bspline":
        spline = PoseSpline(keyframes, local_s)
        fitted = spline.evaluate_many(targets)
        kind = "bspline"
    elif curve_kind == "bezier":
        if not 2 <= degree <= 5:
            raise ValueError("bezier degree must lie in 2..5")
        kf, ks = _collapse_duplicates(keyframes, local_s)
        pts = np.stack([p.translation for p in kf])
        tau_k = ks / s_total
        ctrl = _fit_bezier_translations(pts, tau_k, degree)
        rspline = _RotationSpline(ks, [p.rotation for p in kf])
        fitted = [
            Pose(rspline.evaluate(float(s)), _bezier_point(ctrl, float(s) / s_total))
            for s in targets
        ]
        kind = f"bezier{degree}"
    else:
        raise ValueError(f"unknown curve kind {curve_kind!r}")

    first = keyframes[0]
    times = _uniform_times_us(f, fps, None)
    out = [
        Pose(p.rotation, p.translation, time_us=t, intrinsics_id=first.intrinsics_id)
        for p, t in zip(fitted, times)
    ]
    return MiniTrajectory(out, list(group), kind, first.intrinsics_id)


# ---------------------------------------------------------------------------
# text serialization


def write_trajectory_text(poses: list[Pose]) -> str:
    """One pose per line: frame_id qw qx qy qz tx ty tz time_us intrinsics_id.

    Missing time/intrinsics serialize as -1.
    """
    lines = []
    for i, p in enumerate(poses):
        q = p.rotation.q
        t = p.translation
        fields = [str(i)]
        fields += [f"{v:.12g}" for v in (q[0], q[1], q[2], q[3], t[0], t[1], t[2])]
        fields.append(str(-1 if p.time_us is None else int(p.time_us)))
        fields.append(str(-1 if p.intrinsics_id is None else int(p.intrinsics_id)))
        lines.append(" ".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


def read_trajectory_text(text: str) -> list[Pose]:
    poses = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 10:
            raise FormatError(f"line {lineno}: expected 10 fields, got {len(parts)}")
        try:
            q = [float(v) for v in parts[1:5]]
            t = [float(v) for v in parts[5:8]]
            time_us = int(parts[8])
            intr = int(parts[9])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        poses.append(
            Pose(
                Rotation(np.array(q)),
                np.array(t),
                time_us=None if time_us < 0 else time_us,
                intrinsics_id=None if intr < 0 else intr,
            )
        )
    return poses
