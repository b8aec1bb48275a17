"""Object pose tracking from tactile contact kinematics fused with visual pose hypotheses."""

from .geom import Pose, Twist, rotation_exp, geodesic_angle, chordal_sq
from .kinematics import ContactObservation, EmptyObservation, KinematicEstimate, estimate_kinematics
from .optim import NonFiniteObjective, OptimizerConfig, gradient_check, minimize
from .tracker import (
    MODES,
    Hypothesis,
    ListHypothesisSource,
    MissingInitialHypothesisWindow,
    TrackerConfig,
    WindowState,
    integrate_pose,
    track,
    track_fused,
    track_kinematics_only,
    window_energy,
    window_optimize,
)
from .metrics import LengthMismatch, TrackReport, compute_metrics
from .dataset import TrajectoryFile, as_hypothesis_source, read_trajectory, write_trajectory

__version__ = "0.1.0"
