"""Experiment grids over planted instances, with CSV emission.

Each (cell, trial) pair maps to one planted instance whose seed is
base_seed XOR cell_index XOR trial; cells enumerate the cartesian product
of the parameter grids in the fixed order (d, k, ell, T, sigma, theta_max).
Derived seeds (initialization, permutation) are salted so they never
coincide with an instance seed, which would silently start the fit at the
planted truth.

The five planted-trial experiments share one fixed result schema; the
landscape and piecewise demos emit their own table layouts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .baselines import batch_svd_subspace
from .dataset import Dataset
from .errors import InvalidSpec, RankTooLarge
from .estimator import EndpointsInit, EstimatorConfig, RandomInit, fit
from .landscape import loss_surface_2d, record_iterates, recenter_times
from .metrics import geodesic_error
from .piecewise import continuity_gap, fit_piecewise_schedule
from .synth import permute_times, planted_instance, planted_piecewise_instance

EXPERIMENTS = (
    "PhaseTransition",
    "ErrorVsSamples",
    "ErrorVsEll",
    "LossVsRank",
    "Convergence",
    "Landscape2D",
    "PiecewiseDemo",
)

STANDARD_HEADER = [
    "experiment", "d", "k", "ell", "T", "sigma", "theta_max", "trial", "seed",
    "final_loss", "svd_k_loss", "svd_2k_loss", "geodesic_error", "iters", "wall_ms",
]
LANDSCAPE_HEADER = [
    "experiment", "d", "k", "ell", "T", "sigma", "theta_max", "trial", "seed",
    "kind", "step", "omega", "theta", "loss",
]
PIECEWISE_HEADER = [
    "experiment", "d", "k", "ell", "T", "sigma", "theta_max", "trial", "seed",
    "stage", "lambda", "penalized_loss", "max_gap", "sweeps",
]

_INIT_SALT = 0x9E3779B9
_PERM_SALT = 0x5D2E1F45


def _grid(value) -> tuple:
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(value)
    return (value,)


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment run: parameter grids, trial count, seeding, output path.

    `estimator` carries overrides keyed by EstimatorConfig field names plus
    `init` ("random" or "endpoints"), `init_theta_max` and `pool_fraction`.
    """

    experiment: str
    d: tuple = (40,)
    k: tuple = (2,)
    ell: tuple = (1,)
    T: tuple = (20,)
    sigma: tuple = (1e-3,)
    theta_max: tuple = (1.4,)
    trials: int = 1
    base_seed: int = 0
    estimator: dict = field(default_factory=dict)
    out: str | None = None
    true_k: int | None = None
    lambdas: tuple = (0.0, 1.0, 10.0, 100.0, 1000.0)
    omega_steps: int = 101
    theta_steps: int = 101

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidSpec(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for name in ("d", "k", "ell", "T", "sigma", "theta_max", "lambdas"):
            object.__setattr__(self, name, _grid(getattr(self, name)))
            if len(getattr(self, name)) == 0:
                raise InvalidSpec(f"grid {name} must be non-empty")
        if self.trials < 1:
            raise InvalidSpec("trials must be >= 1")
        if self.experiment == "Landscape2D" and (self.d != (2,) or self.k != (1,)):
            raise InvalidSpec("Landscape2D requires d=(2,) and k=(1,)")

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise InvalidSpec(f"unknown experiment config keys: {sorted(unknown)}")
        if "experiment" not in payload:
            raise InvalidSpec("experiment config must name an experiment")
        return cls(**payload)


def _make_config(overrides: dict, k: int, T: int, ell: int, seed: int) -> EstimatorConfig:
    """Estimator config for one trial.

    An endpoints init widens its pools (up to the 0.5 cap) until they can
    hold k columns, and falls back to a random init when no legal pool
    fraction can.
    """
    pool_fraction = overrides.get("pool_fraction", 0.25)
    init_kind = overrides.get("init", "random")
    if init_kind == "endpoints" and math.ceil(pool_fraction * T) * ell < k:
        pool_fraction = 0.5
    if init_kind == "endpoints" and math.ceil(pool_fraction * T) * ell >= k:
        init = EndpointsInit(k, pool_fraction)
    elif init_kind in ("endpoints", "random"):
        init = RandomInit(
            k,
            theta_max=overrides.get("init_theta_max", np.pi / 4),
            seed=seed ^ _INIT_SALT,
        )
    else:
        raise InvalidSpec(f"unknown init override {init_kind!r}")
    return EstimatorConfig(
        init=init,
        outer_iters=overrides.get("outer_iters", 200),
        inner_mm_iters=overrides.get("inner_mm_iters", 5),
        inner_basis_iters=overrides.get("inner_basis_iters", 1),
        rel_loss_tol=overrides.get("rel_loss_tol", 1e-10),
        time_center=overrides.get("time_center"),
    )


def _svd_losses(dataset: Dataset, k: int) -> tuple[float, float]:
    out = []
    for r in (k, 2 * k):
        try:
            out.append(batch_svd_subspace(dataset, r)[1])
        except RankTooLarge:
            out.append(math.nan)
    return out[0], out[1]


def _cells(spec: ExperimentSpec):
    product = itertools.product(spec.d, spec.k, spec.ell, spec.T, spec.sigma, spec.theta_max)
    return enumerate(product)


def _planted_rows(spec: ExperimentSpec) -> list[list]:
    rows = []
    for cell_index, (d, k, ell, T, sigma, theta_max) in _cells(spec):
        for trial in range(spec.trials):
            seed = spec.base_seed ^ cell_index ^ trial
            inst = planted_instance(d, k, ell, T, sigma, theta_max, seed)
            config = _make_config(spec.estimator, k, T, ell, seed)
            report = fit(inst.dataset, config)
            loss_k, loss_2k = _svd_losses(inst.dataset, k)
            rows.append([
                spec.experiment, d, k, ell, T, sigma, theta_max, trial, seed,
                report.loss_per_outer_iter[-1], loss_k, loss_2k,
                geodesic_error(report.model, inst.truth),
                report.outer_iters_run, report.wall_time * 1e3,
            ])
    return rows


def _loss_vs_rank_rows(spec: ExperimentSpec) -> list[list]:
    true_k = spec.true_k if spec.true_k is not None else min(spec.k)
    rows = []
    for cell_index, (d, k, ell, T, sigma, theta_max) in _cells(spec):
        for trial in range(spec.trials):
            seed = spec.base_seed ^ cell_index ^ trial
            inst = planted_instance(d, true_k, ell, T, sigma, theta_max, seed)
            permuted = permute_times(inst.dataset, seed ^ _PERM_SALT)
            config = _make_config(spec.estimator, k, T, ell, seed)
            for name, data in ((spec.experiment, inst.dataset), (spec.experiment + ":permuted", permuted)):
                report = fit(data, config)
                loss_k, loss_2k = _svd_losses(data, k)
                err = geodesic_error(report.model, inst.truth) if k == true_k else math.nan
                rows.append([
                    name, d, k, ell, T, sigma, theta_max, trial, seed,
                    report.loss_per_outer_iter[-1], loss_k, loss_2k, err,
                    report.outer_iters_run, report.wall_time * 1e3,
                ])
    return rows


def _landscape_rows(spec: ExperimentSpec) -> list[list]:
    omega_grid = np.linspace(-np.pi / 2, np.pi / 2, spec.omega_steps)
    theta_grid = np.linspace(-np.pi, np.pi, spec.theta_steps)
    rows = []
    for cell_index, (d, k, ell, T, sigma, theta_max) in _cells(spec):
        for trial in range(spec.trials):
            seed = spec.base_seed ^ cell_index ^ trial
            inst = planted_instance(d, k, ell, T, sigma, theta_max, seed)
            data = inst.dataset
            overrides = dict(spec.estimator)
            t_center = overrides.pop("time_center", None)
            if t_center:
                data = recenter_times(data, t_center)
            surface = loss_surface_2d(data, omega_grid, theta_grid)
            config = _make_config(overrides, k, T, ell, seed)
            pairs, report = record_iterates(data, config)
            meta = [spec.experiment, d, k, ell, T, sigma, theta_max, trial, seed]
            for i, omega in enumerate(omega_grid):
                for j, theta in enumerate(theta_grid):
                    rows.append(meta + ["surface", i * theta_grid.size + j, omega, theta, surface[i, j]])
            for step, (omega, theta) in enumerate(pairs, start=1):
                rows.append(meta + ["iterate", step, omega, theta, report.loss_per_outer_iter[step]])
    return rows


def _piecewise_rows(spec: ExperimentSpec) -> list[list]:
    rows = []
    for cell_index, (d, k, ell, T, sigma, theta_max) in _cells(spec):
        for trial in range(spec.trials):
            seed = spec.base_seed ^ cell_index ^ trial
            data, _, knots, _ = planted_piecewise_instance(d, k, ell, T, sigma, theta_max, seed)
            config = _make_config(spec.estimator, k, T, ell, seed)
            reports = fit_piecewise_schedule(data, knots, spec.lambdas, config)
            for stage, (lam, report) in enumerate(zip(spec.lambdas, reports)):
                gaps = continuity_gap(report.model)
                rows.append([
                    spec.experiment, d, k, ell, T, sigma, theta_max, trial, seed,
                    stage, lam, report.objective_per_sweep[-1],
                    float(np.max(gaps)), report.sweeps_run,
                ])
    return rows


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def format_csv(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_format_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec) -> tuple[list[str], list[list]]:
    """Execute the trial grid and return (header, rows); writes CSV when
    spec.out is set.  Identical specs produce identical tables apart from
    the wall-clock column."""
    if spec.experiment == "LossVsRank":
        header, rows = STANDARD_HEADER, _loss_vs_rank_rows(spec)
    elif spec.experiment == "Landscape2D":
        header, rows = LANDSCAPE_HEADER, _landscape_rows(spec)
    elif spec.experiment == "PiecewiseDemo":
        header, rows = PIECEWISE_HEADER, _piecewise_rows(spec)
    else:
        header, rows = STANDARD_HEADER, _planted_rows(spec)
    if spec.out is not None:
        from .serialization import write_text

        write_text(spec.out, format_csv(header, rows))
    return header, rows
