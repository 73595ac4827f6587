"""evsynth: event-camera stream synthesis from camera poses and rendered
luminance frames.

Pipeline pieces: rigid-pose geometry, velocity-controlled trajectory
densification, an ideal threshold event backend plus a stochastic
drift-diffusion backend, a deterministic parallel simulator, and bit-exact
file formats.
"""

from .errors import (
    DegeneratePathError,
    DegenerateWindowError,
    EvsynthError,
    FormatError,
    InsufficientPosesError,
    InvalidIntervalError,
    InvalidProfileError,
    InvalidWindowError,
    MalformedSequenceError,
)
from .event_model import (
    EventRecord,
    IdealParams,
    PixelState,
    VoltmeterParams,
    drift_diffusion,
    first_passage_sample,
    ideal_pixel_events,
    to_log_intensity,
    voltmeter_pixel_events,
)
from .formats import (
    EventFileWriter,
    EventFrame,
    StreamStats,
    VoxelGrid,
    accumulate,
    compute_stats,
    frame_spacing_us,
    read_colmap_poses,
    read_events_binary,
    read_events_text,
    read_frames,
    read_pnm,
    voxelize,
    write_event_frame_image,
    write_events_binary,
    write_events_text,
    write_pgm,
)
from .kernels import backend_name
from .pose import (
    CameraIntrinsics,
    DisplacementWeights,
    Pose,
    Rotation,
    geodesic_distance,
    pose_displacement,
    slerp,
    window_rotation_average,
)
from .rng import SubstreamRNG
from .simulator import (
    EventStream,
    FrameSequence,
    LuminanceFrame,
    StreamSummary,
    rgb_to_luminance,
    simulate,
    simulate_streaming,
)
from .trajectory import (
    AnalyticProfile,
    MiniTrajectory,
    PoseSpline,
    SpeedListProfile,
    Trajectory,
    augment_mini_trajectory,
    cumulative_arclength,
    densify,
    fit_pose_spline,
    read_trajectory_text,
    reparameterize,
    sample_keyframe_groups,
    sample_profile,
    smooth_poses,
    write_trajectory_text,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
