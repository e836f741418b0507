"""Multiview point-cloud registration with an eigenvalue-weighted planar objective."""

from .geometry import EigenDecomp, Pose, exp_se3, log_se3, sorted_eigendecomposition, transform_point
from .io import read_ply, read_trajectory, write_ply, write_trajectory
from .metrics import ape, rpe, structural_error
from .objective import FeatureObservation, ResidualBlock, ef_lm_residual, evm_cost, proposed_residual
from .pipeline import PipelineConfig, downsample, register
from .plane import PlaneParam, check_optimal_conditions, estimate_plane
from .simulator import SceneConfig, generate_scene, perturb_poses, scene_problem
from .solver import Problem, SolveReport, SolverConfig, solve
from .stats import LocalStats, aggregate, compute_stats, transform_stats, weyl_gap

__version__ = "0.1.0"
