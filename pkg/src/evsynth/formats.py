"""Bit-exact persistence: event streams (binary EVS1 + text), COLMAP poses,
PGM/PPM frame ingestion, and derived event representations.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidIntervalError, MalformedSequenceError
from .pose import CameraIntrinsics, Pose, Rotation
from .simulator import EventStream, FrameSequence, LuminanceFrame, rgb_to_luminance

# binary event container: fixed-size little-endian header + 13-byte records
EVS1_MAGIC = b"EVS1"
_HEADER = struct.Struct("<4sHHQ8s")
HEADER_SIZE = _HEADER.size  # 24
_RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
RECORD_SIZE = _RECORD_DTYPE.itemsize  # 13


def write_events_binary(stream: EventStream) -> bytes:
    if not (0 < stream.width <= 0xFFFF and 0 < stream.height <= 0xFFFF):
        raise FormatError("sensor dimensions must fit in 16 bits")
    header = _HEADER.pack(EVS1_MAGIC, stream.width, stream.height, len(stream), b"\x00" * 8)
    records = np.empty(len(stream), dtype=_RECORD_DTYPE)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    return header + records.tobytes()


def read_events_binary(data: bytes) -> EventStream:
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header")
    magic, width, height, count, _reserved = _HEADER.unpack_from(data)
    if magic != EVS1_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    expected = HEADER_SIZE + count * RECORD_SIZE
    if len(data) != expected:
        raise FormatError(f"payload size {len(data)} does not match header ({expected})")
    records = np.frombuffer(data, dtype=_RECORD_DTYPE, count=count, offset=HEADER_SIZE)
    p = records["p"]
    if not np.all(np.isin(p, (1, -1))):
        raise FormatError("polarity byte outside {+1, -1}")
    if records["t"].size and records["t"].max() > np.iinfo(np.int64).max:
        raise FormatError("timestamp overflows signed 64-bit range")
    x = records["x"].astype(np.int32)
    y = records["y"].astype(np.int32)
    if x.size and (x.max() >= width or y.max() >= height):
        raise FormatError("event coordinates out of bounds")
    return EventStream.from_unsorted(width, height, records["t"].astype(np.int64), x, y, p)


def write_events_text(stream: EventStream) -> str:
    lines = [
        f"{int(t)} {int(x)} {int(y)} {int(p)}"
        for t, x, y, p in zip(stream.t, stream.x, stream.y, stream.p)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def read_events_text(text: str, width: int | None = None, height: int | None = None) -> EventStream:
    ts, xs, ys, ps = [], [], [], []
    prev_t = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            t, x, y, p = (int(v) for v in parts)
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer field") from None
        if t < 0 or x < 0 or y < 0:
            raise FormatError(f"line {lineno}: negative value")
        if p not in (1, -1):
            raise FormatError(f"line {lineno}: polarity must be 1 or -1")
        if prev_t is not None and t < prev_t:
            raise FormatError(f"line {lineno}: descending timestamp")
        prev_t = t
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(p)
    if width is None:
        width = max(xs) + 1 if xs else 0
    if height is None:
        height = max(ys) + 1 if ys else 0
    return EventStream.from_unsorted(width, height, ts, xs, ys, ps)


class EventFileWriter:
    """Incremental EVS1 writer; patches the record count on close."""

    def __init__(self, path, width: int, height: int):
        if not (0 < width <= 0xFFFF and 0 < height <= 0xFFFF):
            raise FormatError("sensor dimensions must fit in 16 bits")
        self.width = width
        self.height = height
        self.count = 0
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(EVS1_MAGIC, width, height, 0, b"\x00" * 8))

    def write_block(self, t, x, y, p):
        records = np.empty(len(t), dtype=_RECORD_DTYPE)
        records["t"] = t
        records["x"] = x
        records["y"] = y
        records["p"] = p
        self._fh.write(records.tobytes())
        self.count += len(t)

    def close(self):
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(EVS1_MAGIC, self.width, self.height, self.count, b"\x00" * 8))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


# ---------------------------------------------------------------------------
# COLMAP poses


def _parse_cameras_text(text: str) -> dict[int, CameraIntrinsics]:
    table = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 5:
            raise FormatError(f"cameras line {lineno}: too few fields")
        try:
            cam_id = int(parts[0])
            model = parts[1]
            width = int(parts[2])
            height = int(parts[3])
            params = [float(v) for v in parts[4:]]
        except ValueError:
            raise FormatError(f"cameras line {lineno}: malformed field") from None
        if model == "PINHOLE" and len(params) == 4:
            fx, fy, cx, cy = params
        elif model == "SIMPLE_PINHOLE" and len(params) == 3:
            fx = fy = params[0]
            cx, cy = params[1], params[2]
        else:
            raise FormatError(f"cameras line {lineno}: unsupported model {model}")
        table[cam_id] = CameraIntrinsics(fx, fy, cx, cy, width, height)
    return table


def read_colmap_poses(images_text: str, cameras_text: str | None = None):
    """Parse an images.txt listing into camera-to-world poses.

    Storage is world-to-camera; returned rotation is the conjugate and the
    translation the camera center -R^T t.  Poses come back ordered by image
    name.  The optional cameras.txt fills the returned intrinsics table.
    """
    entries = []
    seen_ids = set()
    pending = None  # (lineno, fields) waiting for its 2D-point line
    for lineno, raw in enumerate(images_text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            continue
        if pending is None:
            if not line:
                continue
            parts = line.split()
            if len(parts) != 10:
                raise FormatError(f"line {lineno}: expected 10 fields, got {len(parts)}")
            pending = (lineno, parts)
        else:
            # the 2D-point line; may be empty, contents ignored
            entries.append(pending)
            pending = None
    if pending is not None:
        raise FormatError(f"line {pending[0]}: image entry missing its 2D-point line")

    poses_by_name = []
    for lineno, parts in entries:
        try:
            image_id = int(parts[0])
            q = np.array([float(v) for v in parts[1:5]])
            t = np.array([float(v) for v in parts[5:8]])
            camera_id = int(parts[8])
            name = parts[9]
        except ValueError:
            raise FormatError(f"line {lineno}: malformed numeric field") from None
        if image_id in seen_ids:
            raise FormatError(f"line {lineno}: duplicate IMAGE_ID {image_id}")
        seen_ids.add(image_id)
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-3:
            raise FormatError(f"line {lineno}: quaternion norm {norm:.6f} not within 1e-3 of 1")
        r_wc = Rotation(q)
        r_cw = r_wc.inverse()
        center = -r_cw.apply(t)
        poses_by_name.append((name, Pose(r_cw, center, intrinsics_id=camera_id)))

    poses_by_name.sort(key=lambda item: item[0])
    intrinsics = _parse_cameras_text(cameras_text) if cameras_text else {}
    return [p for _, p in poses_by_name], intrinsics


# ---------------------------------------------------------------------------
# frame images


def _read_pnm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("unexpected end of image header")
    return data[start:pos], pos


def read_pnm(data: bytes) -> tuple[np.ndarray, int, int]:
    """Decode binary PGM (P5, 8/16-bit) or PPM (P6, 8-bit) into [0,1] luminance.

    Returns (flat row-major luminance, width, height).
    """
    if len(data) < 2 or data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"unsupported image magic {data[:2]!r}")
    magic = data[:2]
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_pnm_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise FormatError(f"bad image header token {token!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError("image dimensions must be positive")
    if maxval <= 0 or maxval > 65535:
        raise FormatError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    if magic == b"P6" and maxval > 255:
        raise FormatError("16-bit PPM not supported")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    expected = count * dtype.itemsize
    raw = data[pos : pos + expected]
    if len(raw) != expected:
        raise FormatError("truncated image payload")
    values = np.frombuffer(raw, dtype=dtype).astype(np.float64) / maxval
    if channels == 3:
        values = values.reshape(-1, 3)
        values = rgb_to_luminance(values[:, 0], values[:, 1], values[:, 2])
    return values, width, height


def write_pgm(values: np.ndarray, width: int, height: int) -> bytes:
    """8-bit binary PGM from a flat or 2-d uint8 array."""
    arr = np.asarray(values, dtype=np.uint8).reshape(height, width)
    return b"P5\n%d %d\n255\n" % (width, height) + arr.tobytes()


def frame_spacing_us(fps: float) -> int:
    if fps <= 0:
        raise ValueError("fps must be positive")
    spacing = int(1_000_000 // fps)
    if spacing < 1:
        raise ValueError("fps too high for microsecond spacing")
    return spacing


def _frame_index(path: Path, fallback: int) -> int:
    digits = re.findall(r"\d+", path.stem)
    return int(digits[-1]) if digits else fallback


def read_frames(
    directory, fps: float | None = None, timestamps_name: str = "timestamps.txt"
) -> FrameSequence:
    """Load all PGM/PPM frames in a directory, ordered by filename.

    Timestamps come from the sidecar file (lines `frame_id t_us`, frame_id
    matching the number embedded in the filename) or, if absent, are
    synthesized at the given fps.
    """
    directory = Path(directory)
    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in (".pgm", ".ppm")
    )
    if not paths:
        raise FormatError(f"no PGM/PPM frames in {directory}")
    sidecar = directory / timestamps_name
    times_by_id = None
    if sidecar.is_file():
        times_by_id = {}
        for lineno, raw in enumerate(sidecar.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{sidecar.name} line {lineno}: expected `frame_id t_us`")
            try:
                times_by_id[int(parts[0])] = int(parts[1])
            except ValueError:
                raise FormatError(f"{sidecar.name} line {lineno}: non-integer field") from None
    elif fps is None:
        raise FormatError("no timestamp sidecar and no fps given")

    frames = []
    spacing = frame_spacing_us(fps) if times_by_id is None else None
    for i, path in enumerate(paths):
        values, width, height = read_pnm(path.read_bytes())
        if times_by_id is not None:
            frame_id = _frame_index(path, i)
            if frame_id not in times_by_id:
                raise FormatError(f"no timestamp for frame {path.name} (id {frame_id})")
            t_us = times_by_id[frame_id]
        else:
            t_us = i * spacing
        frames.append(LuminanceFrame(width, height, values, t_us))
    if len({(f.width, f.height) for f in frames}) > 1:
        raise MalformedSequenceError("frames have mixed dimensions")
    return FrameSequence(frames)


# ---------------------------------------------------------------------------
# derived representations


@dataclass(frozen=True)
class EventFrame:
    """Signed per-pixel polarity sums over a window [t0, t1)."""

    width: int
    height: int
    counts: np.ndarray
    t0_us: int
    t1_us: int


@dataclass(frozen=True)
class VoxelGrid:
    """B x height x width polarity mass with linear temporal splatting."""

    bins: int
    width: int
    height: int
    values: np.ndarray
    t0_us: int
    t1_us: int


@dataclass(frozen=True)
class StreamStats:
    total: int
    duration_us: int
    events_per_s: float
    on_fraction: float
    per_pixel_max: int


def _window_mask(stream: EventStream, t0_us: int, t1_us: int) -> np.ndarray:
    if t1_us <= t0_us:
        raise InvalidIntervalError(f"need t1 > t0, got [{t0_us}, {t1_us})")
    return (stream.t >= t0_us) & (stream.t < t1_us)


def accumulate(stream: EventStream, t0_us: int, t1_us: int) -> EventFrame:
    mask = _window_mask(stream, t0_us, t1_us)
    counts = np.zeros((stream.height, stream.width), dtype=np.int64)
    np.add.at(counts, (stream.y[mask], stream.x[mask]), stream.p[mask])
    return EventFrame(stream.width, stream.height, counts, t0_us, t1_us)


def voxelize(stream: EventStream, bins: int, t0_us: int, t1_us: int) -> VoxelGrid:
    if bins < 1:
        raise ValueError("need at least one bin")
    mask = _window_mask(stream, t0_us, t1_us)
    values = np.zeros((bins, stream.height, stream.width))
    t = stream.t[mask].astype(np.float64)
    x = stream.x[mask]
    y = stream.y[mask]
    p = stream.p[mask].astype(np.float64)
    if t.size:
        tau = (t - t0_us) / (t1_us - t0_us) * (bins - 1)
        b0 = np.floor(tau).astype(np.int64)
        frac = tau - b0
        np.add.at(values, (b0, y, x), p * (1.0 - frac))
        hi = b0 + 1
        keep = hi < bins
        np.add.at(values, (hi[keep], y[keep], x[keep]), p[keep] * frac[keep])
    return VoxelGrid(bins, stream.width, stream.height, values, t0_us, t1_us)


def compute_stats(stream: EventStream) -> StreamStats:
    n = len(stream)
    if n == 0:
        return StreamStats(0, 0, 0.0, 0.0, 0)
    duration = int(stream.t[-1] - stream.t[0])
    rate = n / (duration * 1e-6) if duration > 0 else 0.0
    on_fraction = int(np.count_nonzero(stream.p == 1)) / n
    flat = stream.y.astype(np.int64) * stream.width + stream.x
    per_pixel_max = int(np.bincount(flat).max())
    return StreamStats(n, duration, rate, on_fraction, per_pixel_max)


def write_event_frame_image(frame: EventFrame, scale: float = 32.0) -> bytes:
    """Map signed counts to 8-bit gray: 128 + clamp(count*scale, -128, 127)."""
    shifted = 128.0 + np.clip(frame.counts * scale, -128.0, 127.0)
    return write_pgm(shifted.astype(np.uint8), frame.width, frame.height)
