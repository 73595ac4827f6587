"""Batch command-line front end.

Subcommands: interp (pose densification + augmentation), simulate (frames to
events), accumulate (event-frame images), stats.  Every option can also come
from a flat `key = value` config file; explicit flags beat the config file,
which beats the built-in defaults.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import EvsynthError
from .event_model import IdealParams, VoltmeterParams
from .formats import (
    EventFrame,
    accumulate,
    compute_stats,
    read_colmap_poses,
    read_events_binary,
    read_events_text,
    read_frames,
    write_event_frame_image,
    write_events_binary,
    write_events_text,
)
from .pose import DisplacementWeights
from .simulator import simulate
from .trajectory import (
    AnalyticProfile,
    SpeedListProfile,
    augment_mini_trajectory,
    densify,
    sample_keyframe_groups,
    write_trajectory_text,
)

# defaults shared by all subcommands; config keys use these names
_DEFAULTS = {
    "seed": 0,
    "threads": 0,
    "gamma": 5.0,
    "w": 2,
    "alpha": 1.0,
    "beta": 1.0,
    "profile": "gs2e",
    "base_fps": 2400.0,
    "blend_tau_fraction": 0.1,
    "fps": 2400.0,
    "duration_us": -1,
    "augment": False,
    "num_groups": 3,
    "keyframes": 5,
    "mini_frames": 150,
    "curve": "bspline",
    "bezier_degree": 0,
    "backend": "voltmeter",
    "c_on": 1.0,
    "c_off": 1.0,
    "refractory_us": 0,
    "k1": 0.5,
    "k2": 1e-3,
    "k3": 0.1,
    "k4": 0.01,
    "k5": 0.1,
    "k6": 1e-5,
    "theta_on": 1.0,
    "theta_off": 1.0,
    "log_floor": 1e-3,
    "text": False,
    "window_us": -1,
    "stride_us": -1,
    "scale": 32.0,
}

_SUBCOMMAND_KEYS = {
    "interp": [
        "seed", "threads", "gamma", "w", "alpha", "beta", "profile", "base_fps",
        "blend_tau_fraction", "fps", "duration_us", "augment", "num_groups",
        "keyframes", "mini_frames", "curve", "bezier_degree",
    ],
    "simulate": [
        "seed", "threads", "fps", "backend", "c_on", "c_off", "refractory_us",
        "k1", "k2", "k3", "k4", "k5", "k6", "theta_on", "theta_off",
        "log_floor", "text",
    ],
    "accumulate": ["seed", "threads", "window_us", "stride_us", "scale"],
    "stats": ["seed", "threads"],
}


def _coerce(key: str, raw: str):
    default = _DEFAULTS[key]
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {key}: expected a boolean, got {raw!r}")
    return type(default)(raw)


def _load_config(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise EvsynthError(f"config line {lineno}: expected `key = value`")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _DEFAULTS:
            raise EvsynthError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, value.strip())
        except ValueError as exc:
            raise EvsynthError(f"config line {lineno}: {exc}") from None
    return values


def _add_option(parser: argparse.ArgumentParser, key: str):
    default = _DEFAULTS[key]
    flag = "--" + key.replace("_", "-")
    if isinstance(default, bool):
        parser.add_argument(flag, dest=key, action="store_true", default=None)
    else:
        parser.add_argument(flag, dest=key, type=type(default), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evsynth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    specs = {
        "interp": "densify COLMAP poses into a velocity-controlled trajectory",
        "simulate": "synthesize an event stream from a frame directory",
        "accumulate": "render event-frame PGM images over time windows",
        "stats": "print event stream statistics",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        if name == "simulate":
            p.add_argument("--frames", required=True, help="frame directory")
        else:
            p.add_argument("--input", required=True, help="input path")
        if name != "stats":
            p.add_argument("--output", required=True, help="output path")
        p.add_argument("--config", default=None, help="flat key = value config file")
        p.add_argument("--print-config", action="store_true")
        for key in _SUBCOMMAND_KEYS[name]:
            _add_option(p, key)
    return parser


def _effective_config(args: argparse.Namespace) -> dict:
    file_values = _load_config(args.config) if args.config else {}
    cfg = {}
    for key in _SUBCOMMAND_KEYS[args.command]:
        flag_value = getattr(args, key)
        if flag_value is not None:
            cfg[key] = flag_value
        elif key in file_values:
            cfg[key] = file_values[key]
        else:
            cfg[key] = _DEFAULTS[key]
    return cfg


def _build_profile(cfg: dict):
    spec = cfg["profile"]
    if spec == "gs2e":
        return AnalyticProfile.preset("gs2e")
    if spec.startswith("const:"):
        return AnalyticProfile.constant(float(spec[len("const:"):]))
    if spec.startswith("list:"):
        multipliers = [float(v) for v in spec[len("list:"):].split(",") if v]
        return SpeedListProfile(multipliers, cfg["base_fps"], cfg["blend_tau_fraction"])
    raise EvsynthError(f"unknown profile spec {spec!r} (use gs2e, const:<v>, list:a,b,...)")


def _build_params(cfg: dict):
    if cfg["backend"] == "ideal":
        return IdealParams(cfg["c_on"], cfg["c_off"], cfg["log_floor"], cfg["refractory_us"])
    if cfg["backend"] == "voltmeter":
        return VoltmeterParams(
            cfg["k1"], cfg["k2"], cfg["k3"], cfg["k4"], cfg["k5"], cfg["k6"],
            cfg["theta_on"], cfg["theta_off"], cfg["log_floor"],
        )
    raise EvsynthError(f"unknown backend {cfg['backend']!r}")


def _read_events_file(path: str):
    data = Path(path).read_bytes()
    if data[:4] == b"EVS1":
        return read_events_binary(data)
    return read_events_text(data.decode("utf-8"))


def _print_stats(stream):
    stats = compute_stats(stream)
    print(f"total {stats.total}")
    print(f"duration_us {stats.duration_us}")
    print(f"events_per_s {stats.events_per_s:.6g}")
    print(f"on_fraction {stats.on_fraction:.6g}")
    print(f"per_pixel_max {stats.per_pixel_max}")


def _cmd_interp(args, cfg) -> int:
    if not cfg["gamma"] > 1.0:
        print("error: --gamma must exceed 1", file=sys.stderr)
        return 2
    poses, _ = read_colmap_poses(Path(args.input).read_text())
    weights = DisplacementWeights(cfg["alpha"], cfg["beta"])
    profile = _build_profile(cfg)
    duration = None if cfg["duration_us"] < 0 else cfg["duration_us"]
    traj = densify(
        poses, cfg["gamma"], profile, weights,
        w=cfg["w"], fps=cfg["fps"], duration_us=duration,
    )
    out = Path(args.output)
    out.write_text(write_trajectory_text(traj.poses))
    print(f"M {len(traj)}")
    print(f"S {traj.total_length:.12g}")
    if cfg["augment"]:
        groups = sample_keyframe_groups(traj, cfg["num_groups"], cfg["keyframes"], cfg["seed"])
        degree_rng = np.random.default_rng([cfg["seed"], 1])
        for g, group in enumerate(groups):
            if cfg["curve"] == "bezier":
                degree = cfg["bezier_degree"]
                if degree == 0:
                    degree = int(degree_rng.choice([2, 3, 4, 5]))
            else:
                degree = 3
            mini = augment_mini_trajectory(
                traj, group, cfg["mini_frames"], cfg["curve"],
                weights=weights, degree=degree, fps=cfg["fps"],
            )
            mini_path = out.with_name(f"{out.stem}.mini{g}{out.suffix or '.txt'}")
            mini_path.write_text(write_trajectory_text(mini.poses))
            print(f"group{g} " + " ".join(str(i) for i in group))
    return 0


def _cmd_simulate(args, cfg) -> int:
    seq = read_frames(args.frames, fps=cfg["fps"])
    params = _build_params(cfg)
    stream = simulate(seq, params, cfg["seed"], threads=cfg["threads"])
    out = Path(args.output)
    if cfg["text"]:
        out.write_text(write_events_text(stream))
    else:
        out.write_bytes(write_events_binary(stream))
    _print_stats(stream)
    return 0


def _cmd_accumulate(args, cfg) -> int:
    if cfg["window_us"] <= 0:
        print("error: --window-us must be given and positive", file=sys.stderr)
        return 2
    window = cfg["window_us"]
    stride = window if cfg["stride_us"] <= 0 else cfg["stride_us"]
    stream = _read_events_file(args.input)
    if len(stream):
        t_first = int(stream.t[0])
        duration = int(stream.t[-1]) - t_first
        count = max(1, -(-duration // stride))
    else:
        t_first = 0
        count = 1
    out = Path(args.output)
    for k in range(count):
        t0 = t_first + k * stride
        if len(stream):
            frame = accumulate(stream, t0, t0 + window)
        else:
            width = max(1, stream.width)
            height = max(1, stream.height)
            frame = EventFrame(
                width, height, np.zeros((height, width), dtype=np.int64), t0, t0 + window
            )
        path = out.with_name(f"{out.stem}_{k:04d}.pgm")
        path.write_bytes(write_event_frame_image(frame, cfg["scale"]))
        print(path)
    return 0


def _cmd_stats(args, cfg) -> int:
    _print_stats(_read_events_file(args.input))
    return 0


_COMMANDS = {
    "interp": _cmd_interp,
    "simulate": _cmd_simulate,
    "accumulate": _cmd_accumulate,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.print_config:
            for key in sorted(cfg):
                print(f"{key} {cfg[key]}")
            return 0
        return _COMMANDS[args.command](args, cfg)
    except (EvsynthError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
