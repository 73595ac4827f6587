"""Full-sensor simulation: turns a luminance frame sequence into one
canonical, time-ordered event stream.

Both entry points drive the same per-interval engine: frames are consumed
pairwise, pixels are partitioned across workers, per-interval events are
merged with a stable sort.  Randomness is keyed by (seed, pixel, interval),
so output is byte-identical for any worker count, and interval blocks are
time-disjoint, so streaming flushes equal the batch result.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidIntervalError, MalformedSequenceError
from .event_model import EventRecord, IdealParams, VoltmeterParams

_MASK64 = 0xFFFFFFFFFFFFFFFF


def rgb_to_luminance(r, g, b):
    """Standard luma weights; accepts scalars or arrays."""
    return 0.299 * r + 0.587 * g + 0.114 * b


class LuminanceFrame:
    """One linear-intensity frame; values clamped into [0, 1] on ingestion."""

    __slots__ = ("width", "height", "pixels", "t_us")

    def __init__(self, width: int, height: int, pixels, t_us: int):
        if width <= 0 or height <= 0:
            raise ValueError("frame dimensions must be positive")
        pixels = np.asarray(pixels, dtype=np.float64).reshape(-1)
        if pixels.size != width * height:
            raise ValueError(
                f"expected {width * height} pixels for {width}x{height}, got {pixels.size}"
            )
        if not np.all(np.isfinite(pixels)):
            raise ValueError("frame contains non-finite intensities")
        if t_us < 0:
            raise ValueError("frame timestamp must be nonnegative")
        self.width = int(width)
        self.height = int(height)
        self.pixels = np.clip(pixels, 0.0, 1.0)
        self.t_us = int(t_us)


class FrameSequence:
    """Frames with identical dimensions and strictly increasing timestamps."""

    def __init__(self, frames: list[LuminanceFrame]):
        if not frames:
            raise MalformedSequenceError("empty frame sequence")
        w, h = frames[0].width, frames[0].height
        for i, f in enumerate(frames):
            if (f.width, f.height) != (w, h):
                raise MalformedSequenceError(f"frame {i}: dimension mismatch")
            if i > 0 and f.t_us <= frames[i - 1].t_us:
                raise MalformedSequenceError(f"frame {i}: timestamps not increasing")
        self.frames = list(frames)
        self.width = w
        self.height = h

    def __len__(self) -> int:
        return len(self.frames)


def _check_canonical_order(t, x, y, p):
    if t.size < 2:
        return True
    dt = np.diff(t)
    dy = np.diff(y)
    dx = np.diff(x)
    dp = np.diff(p.astype(np.int16))
    ok = (dt > 0) | (
        (dt == 0) & ((dy > 0) | ((dy == 0) & ((dx > 0) | ((dx == 0) & (dp >= 0)))))
    )
    return bool(np.all(ok))


class EventStream:
    """Columnar event storage ordered by (t_us, y, x, polarity)."""

    __slots__ = ("width", "height", "t", "x", "y", "p")

    def __init__(self, width, height, t, x, y, p, validate: bool = True):
        self.width = int(width)
        self.height = int(height)
        self.t = np.asarray(t, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.int32)
        self.y = np.asarray(y, dtype=np.int32)
        self.p = np.asarray(p, dtype=np.int8)
        n = self.t.size
        if not (self.x.size == self.y.size == self.p.size == n):
            raise ValueError("event columns must have equal length")
        if validate and n:
            if self.t.min() < 0:
                raise ValueError("negative timestamp")
            if not np.all(np.isin(self.p, (1, -1))):
                raise ValueError("polarity outside {+1, -1}")
            if (
                self.x.min() < 0
                or self.y.min() < 0
                or self.x.max() >= self.width
                or self.y.max() >= self.height
            ):
                raise ValueError("event coordinates out of bounds")
            if not _check_canonical_order(self.t, self.x, self.y, self.p):
                raise ValueError("events not in canonical (t, y, x, polarity) order")

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls(width, height, [], [], [], [])

    @classmethod
    def from_unsorted(cls, width, height, t, x, y, p) -> "EventStream":
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int32)
        y = np.asarray(y, dtype=np.int32)
        p = np.asarray(p, dtype=np.int8)
        order = np.lexsort((p, x, y, t))
        return cls(width, height, t[order], x[order], y[order], p[order])

    def __len__(self) -> int:
        return int(self.t.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def records(self):
        for i in range(self.t.size):
            yield EventRecord(
                int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i])
            )


@dataclass(frozen=True)
class StreamSummary:
    """What simulate_streaming reports after the last flush."""

    width: int
    height: int
    frames: int
    intervals: int
    total_events: int
    on_events: int
    off_events: int
    first_t_us: int | None
    last_t_us: int | None


def _chunk_bounds(n_px: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, n_px))
    step = (n_px + workers - 1) // workers
    return [(lo, min(lo + step, n_px)) for lo in range(0, n_px, step)]


class _Engine:
    def __init__(self, params, master_seed: int, threads: int):
        if isinstance(params, IdealParams):
            self.backend = "ideal"
        elif isinstance(params, VoltmeterParams):
            self.backend = "voltmeter"
        else:
            raise TypeError("params must be IdealParams or VoltmeterParams")
        self.params = params
        self.seed = int(master_seed) & _MASK64
        self.threads = os.cpu_count() or 1 if threads == 0 else max(1, threads)

    def _init_state(self, n_px: int):
        self.last_t = np.full(n_px, kernels.NO_EVENT_T, dtype=np.int64)
        if self.backend == "voltmeter":
            self.v_res = np.zeros(n_px)

    def _run_chunk(self, log0, log1, lin0, t0, t1, width, interval, lo, hi):
        p = self.params
        if self.backend == "ideal":
            return kernels.ideal_interval(
                log0, log1, t0, t1, self.ref, self.last_t, width,
                p.c_on, p.c_off, int(p.refractory_us), lo, hi,
            )
        return kernels.voltmeter_interval(
            log0, log1, lin0, t0, t1, self.v_res, self.last_t, width,
            p.k1, p.k2, p.k3, p.k4, p.k5, p.k6, p.theta_on, p.theta_off,
            self.seed, interval, lo, hi,
        )

    def run(self, frames, sink):
        """Consume frames pairwise; pass each interval's sorted events to sink.

        Returns a StreamSummary.  Holds at most two frames at a time.
        """
        eps = self.params.log_floor
        prev = None
        log_prev = None
        width = height = None
        interval = 0
        total = on = 0
        first_t = last_t = None
        executor = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        try:
            for frame in frames:
                if prev is None:
                    width, height = frame.width, frame.height
                    self._init_state(width * height)
                else:
                    if (frame.width, frame.height) != (width, height):
                        raise MalformedSequenceError("frame dimension mismatch")
                    if frame.t_us <= prev.t_us:
                        raise MalformedSequenceError("frame timestamps not increasing")
                log_cur = np.log(np.maximum(frame.pixels, eps))
                if prev is None:
                    if self.backend == "ideal":
                        self.ref = log_cur.copy()
                else:
                    chunks = _chunk_bounds(width * height, self.threads)
                    run = lambda b: self._run_chunk(
                        log_prev, log_cur, prev.pixels, prev.t_us, frame.t_us,
                        width, interval, b[0], b[1],
                    )
                    if executor is None or len(chunks) == 1:
                        results = [run(b) for b in chunks]
                    else:
                        results = list(executor.map(run, chunks))
                    t = np.concatenate([r[0] for r in results])
                    x = np.concatenate([r[1] for r in results])
                    y = np.concatenate([r[2] for r in results])
                    p = np.concatenate([r[3] for r in results])
                    order = np.lexsort((p, x, y, t))
                    t, x, y, p = t[order], x[order], y[order], p[order]
                    if t.size:
                        total += t.size
                        on += int(np.count_nonzero(p == 1))
                        if first_t is None:
                            first_t = int(t[0])
                        last_t = int(t[-1])
                    sink(t, x, y, p)
                    interval += 1
                prev = frame
                log_prev = log_cur
        finally:
            if executor is not None:
                executor.shutdown()
        if interval == 0:
            raise MalformedSequenceError("simulation needs at least 2 frames")
        return StreamSummary(
            width, height, interval + 1, interval, total, on, total - on, first_t, last_t
        )


def simulate(seq: FrameSequence, params, master_seed: int, threads: int = 0) -> EventStream:
    """Simulate the whole sequence and return the merged event stream."""
    if len(seq) < 2:
        raise MalformedSequenceError("simulation needs at least 2 frames")
    blocks = []

    def sink(t, x, y, p):
        blocks.append((t, x, y, p))

    engine = _Engine(params, master_seed, threads)
    engine.run(iter(seq.frames), sink)
    if not blocks:
        return EventStream.empty(seq.width, seq.height)
    t = np.concatenate([b[0] for b in blocks])
    x = np.concatenate([b[1] for b in blocks])
    y = np.concatenate([b[2] for b in blocks])
    p = np.concatenate([b[3] for b in blocks])
    # interval blocks cover disjoint ascending time ranges, so their
    # concatenation is already in canonical order
    return EventStream(seq.width, seq.height, t, x, y, p)


def simulate_streaming(frames, params, master_seed: int, sink, threads: int = 0) -> StreamSummary:
    """Simulate from a frame iterator, flushing each interval's events to sink.

    sink is called once per interval, in a single context, with sorted
    (t, x, y, p) arrays.  Output is bit-identical to simulate().
    """
    engine = _Engine(params, master_seed, threads)
    return engine.run(iter(frames), sink)
