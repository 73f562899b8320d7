"""graspcover: compare grasp sampling schemes on dense SE(3) reference sets."""

from .errors import GraspCoverError
from .geometry import Aabb, OrientedBox
from .gripper import ClosingRegion, ContactPair, GripperSpec, Validity, check_validity, close_fingers
from .mesh import RayHit, SurfacePoint, TriMesh, load_mesh, raycast, sample_surface, volume_intersects
from .metrics import CoverageReport, GraspSet, PoseIndex, build_index, cov1, cov2, cov3, precision, robust_coverage, robust_filter
from .oracle import GraspLabel, ReferenceSet, evaluate_grasp, generate_reference, label_robustness
from .samplers import CandidateGrasp, SamplerSpec, sample_antipodal, sample_approach, sample_line_com, sample_uniform
from .se3 import GridSpec, MetricParams, Pose, farthest_point_indices, farthest_point_subset, pose_distance, sample_uniform_pose, se3_grid, so3_grid

__version__ = "0.1.0"

__all__ = [
    "Aabb", "CandidateGrasp", "ClosingRegion", "ContactPair", "CoverageReport",
    "GraspCoverError", "GraspLabel", "GraspSet", "GridSpec", "GripperSpec",
    "MetricParams", "OrientedBox", "Pose", "PoseIndex", "RayHit", "ReferenceSet",
    "SamplerSpec", "SurfacePoint", "TriMesh", "Validity", "build_index",
    "check_validity", "close_fingers", "cov1", "cov2", "cov3", "evaluate_grasp",
    "farthest_point_indices", "farthest_point_subset", "generate_reference",
    "label_robustness",
    "load_mesh", "pose_distance", "precision", "raycast", "robust_coverage",
    "robust_filter", "sample_antipodal", "sample_approach", "sample_line_com",
    "sample_surface", "sample_uniform", "sample_uniform_pose", "se3_grid",
    "so3_grid", "volume_intersects",
]
