"""geogress: batch estimation of time-varying subspaces with Grassmannian geodesics."""

from .baselines import batch_svd_subspace, per_timepoint_svd, static_as_geodesic
from .dataset import Dataset
from .errors import (
    DimensionMismatch,
    EmptySegment,
    GeogressError,
    InitFailure,
    InvalidSpec,
    IoFailure,
    MalformedFile,
    NonpositiveTime,
    NotOrthonormal,
    NotTangent,
    RankCollapseWarning,
    RankTooLarge,
)
from .estimator import (
    AngleConstants,
    EndpointsInit,
    EstimatorConfig,
    FitReport,
    ProvidedInit,
    RandomInit,
    angle_constants,
    angle_gradient,
    angle_loss_terms,
    angle_mm_step,
    basis_update,
    curvature_weight,
    fit,
    init_endpoints,
    loss,
    reconstruct,
)
from .experiments import ExperimentSpec, run_experiment
from .geodesic import GeodesicModel, connect, random_geodesic
from .landscape import loss_surface_2d, plane_coordinates, record_iterates, recenter_times
from .metrics import data_error, geodesic_error, psnr, subspace_error
from .piecewise import (
    PiecewiseFitReport,
    PiecewiseModel,
    continuity_gap,
    fit_piecewise,
    fit_piecewise_schedule,
    loss_per_timepoint,
    penalized_objective,
    split_by_knots,
)
from .serialization import load_dataset, load_model, save_dataset, save_model
from .synth import PlantedInstance, permute_times, planted_instance, planted_piecewise_instance

__version__ = "0.1.0"

__all__ = [
    "AngleConstants",
    "Dataset",
    "DimensionMismatch",
    "EmptySegment",
    "EndpointsInit",
    "EstimatorConfig",
    "ExperimentSpec",
    "FitReport",
    "GeodesicModel",
    "GeogressError",
    "InitFailure",
    "InvalidSpec",
    "IoFailure",
    "MalformedFile",
    "NonpositiveTime",
    "NotOrthonormal",
    "NotTangent",
    "PiecewiseFitReport",
    "PiecewiseModel",
    "PlantedInstance",
    "ProvidedInit",
    "RandomInit",
    "RankCollapseWarning",
    "RankTooLarge",
    "angle_constants",
    "angle_gradient",
    "angle_loss_terms",
    "angle_mm_step",
    "basis_update",
    "batch_svd_subspace",
    "connect",
    "continuity_gap",
    "curvature_weight",
    "data_error",
    "fit",
    "fit_piecewise",
    "fit_piecewise_schedule",
    "geodesic_error",
    "init_endpoints",
    "load_dataset",
    "load_model",
    "loss",
    "loss_per_timepoint",
    "loss_surface_2d",
    "per_timepoint_svd",
    "permute_times",
    "planted_instance",
    "planted_piecewise_instance",
    "plane_coordinates",
    "penalized_objective",
    "psnr",
    "random_geodesic",
    "reconstruct",
    "record_iterates",
    "recenter_times",
    "run_experiment",
    "save_dataset",
    "save_model",
    "split_by_knots",
    "static_as_geodesic",
    "subspace_error",
]
