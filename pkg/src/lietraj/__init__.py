"""Probabilistic pose-trajectory toolkit on SE(3) and PCG(3).

Encodes demonstrated end-effector trajectories as a joint Gaussian over
Lie-group tangents, adapts the distribution to via poses, viewing-frame
changes and robot workspace densities, and guides a stochastic joint-space
trajectory optimizer with it.
"""

from .adapt import (
    ViaPoseConstraint,
    ViewChange,
    change_view,
    condition_on_via,
    condition_on_via_set,
    fuse_workspace_density,
    reanchor_start,
    transform_via,
)
from .align import integrand, reparameterize, weight_matrix
from .banded import BlockTridiagonal
from .bench import (
    MetricReport,
    d_demo,
    d_via,
    dtw_distance,
    generate_letter,
    screw_trajectory,
)
from .encode import (
    TrajectoryDistribution,
    encode,
    relative_covariance,
    sample_mean,
    sample_trajectories,
)
from .errors import (
    BranchError,
    ConvergenceError,
    DegenerateTrajectoryError,
    IKError,
    InvalidArgumentError,
    LieTrajError,
    NotPositiveDefiniteError,
    ParseError,
    PlannerInitError,
)
from .liegroup import (
    Pose,
    Space,
    adjoint,
    compose,
    exp_map,
    hat,
    interpolate,
    inverse,
    log_map,
    pose_distance,
    relative,
    vee,
)
from .planner import (
    JointTrajectory,
    PlanMetrics,
    PlanningScene,
    PlanResult,
    Sphere,
    StompParams,
    guidance_cost,
    obstacle_cost,
    plan_report,
    stomp_plan,
)
from .trajectory import DemoSet, Trajectory
from .workspace import (
    Joint,
    KinematicChain,
    WorkspaceDensity,
    compound_gaussians,
    default_chain,
    forward_kinematics,
    inverse_kinematics,
    link_pose_distribution,
    workspace_density,
)

__version__ = "0.1.0"
