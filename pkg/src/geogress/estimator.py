"""Geodesic fitting by monotone block-coordinate descent.

The objective is the projection residual

    loss(H, Y, theta) = sum_i || X_i - U(t_i) U(t_i)^T X_i ||_F^2,

i.e. the least-squares misfit after eliminating the optimal per-sample
loading matrices.  Each outer iteration performs two majorize-minimize
steps, neither of which can increase the loss:

1. (H, Y) jointly: minimize a linear surrogate over d x 2k matrices with
   orthonormal columns.  The minimizer is the orthogonal polar factor
   W V^T of the weighted data-projection sum (an orthogonal Procrustes
   solution via one thin SVD).
2. theta, one angle at a time: the loss restricted to a single angle is a
   sum over samples of shifted cosines
       f_i(x) = -r_i cos(2 x t_i - phi_i) + b_i,
   each of which admits a quadratic majorizer with the classic sinc-type
   curvature weight; the summed majorizer has a closed-form minimizer.

Samples at t_i = 0 contribute a term constant in theta (their curvature
weight is undefined), so they are excluded from the angle sums.  Negative
times, which arise when the time axis is recentered, are folded back to
positive ones through the identity f(x; t, phi) = f(x; -t, -phi).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from math import ceil

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, InitFailure, NonpositiveTime, RankCollapseWarning
from .geodesic import GeodesicModel, connect, principal_basis, random_geodesic

_TINY = np.finfo(float).tiny

# Offsets from a cosine axis below this fraction of the half period are
# rounding noise; the curvature weight uses its limit value there.
_AXIS_TOL = 1e-9


# ---------------------------------------------------------------------------
# Initialization strategies


@dataclass(frozen=True)
class RandomInit:
    """Start from a random geodesic of the given rank."""

    k: int
    theta_max: float = np.pi / 4
    seed: int | None = None


@dataclass(frozen=True)
class EndpointsInit:
    """Start from the geodesic connecting coarse endpoint subspace estimates."""

    k: int
    pool_fraction: float = 0.25


@dataclass(frozen=True)
class ProvidedInit:
    """Start from a caller-supplied model."""

    model: GeodesicModel


InitStrategy = RandomInit | EndpointsInit | ProvidedInit


@dataclass(frozen=True)
class EstimatorConfig:
    """Iteration budgets, stopping tolerance, initialization, optional recentering.

    `inner_basis_iters` repeats the (H, Y) Procrustes step within each outer
    iteration; every repetition is itself a descent step, so monotonicity is
    unaffected.  The default of 1 is the plain alternation; larger values
    relax the basis block closer to its conditional optimum, which speeds up
    the strongly coupled regime near the sample-complexity boundary.
    """

    init: InitStrategy
    outer_iters: int = 200
    inner_mm_iters: int = 5
    inner_basis_iters: int = 1
    rel_loss_tol: float = 1e-10
    time_center: float | None = None

    def __post_init__(self) -> None:
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")
        if self.inner_mm_iters < 1:
            raise ValueError("inner_mm_iters must be >= 1")
        if self.inner_basis_iters < 1:
            raise ValueError("inner_basis_iters must be >= 1")
        if self.rel_loss_tol < 0:
            raise ValueError("rel_loss_tol must be >= 0")
        if isinstance(self.init, EndpointsInit) and not 0.0 < self.init.pool_fraction <= 0.5:
            raise ValueError("pool_fraction must lie in (0, 0.5]")
        if self.time_center is not None and not 0.0 <= self.time_center <= 1.0:
            raise ValueError("time_center must lie in [0, 1]")


@dataclass(frozen=True)
class FitReport:
    """Outcome of a fit: final model plus the per-outer-iteration loss trail.

    `loss_per_outer_iter[0]` is the loss of the initial model; subsequent
    entries follow each outer iteration and are non-increasing up to
    floating-point slack.
    """

    model: GeodesicModel
    loss_per_outer_iter: np.ndarray
    outer_iters_run: int
    wall_time: float
    converged: bool


@dataclass(frozen=True)
class AngleConstants:
    """Per-(sample, angle) constants of the separable angle loss, all (T, k).

    alpha, beta, gamma are the matching diagonal entries of H^T X X^T H,
    Y^T X X^T H and Y^T X X^T Y; r, phi are the amplitude/phase of the
    combined cosine and b its offset:  r^2 = ((alpha-gamma)/2)^2 + beta^2,
    phi = arctan2(beta, (alpha-gamma)/2), b = (alpha+gamma)/2.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    b: np.ndarray


# ---------------------------------------------------------------------------
# Loss and reconstruction


def _check_dims(dataset: Dataset, model: GeodesicModel) -> None:
    if dataset.d != model.d:
        raise DimensionMismatch(f"dataset has d={dataset.d} but model has d={model.d}")


def loss(dataset: Dataset, model: GeodesicModel) -> float:
    """Projection residual sum_i ||X_i - U(t_i) U(t_i)^T X_i||_F^2 (non-negative)."""
    _check_dims(dataset, model)
    packed = dataset.packed()
    if packed is not None:
        bases = model.evaluate_path(dataset.times)
        coords = np.einsum("ndk,ndl->nkl", bases, packed)
        resid = packed - np.einsum("ndk,nkl->ndl", bases, coords)
        return float(np.sum(resid * resid))
    total = 0.0
    for t, x in zip(dataset.times, dataset.matrices):
        u = model.evaluate(t)
        resid = x - u @ (u.T @ x)
        total += float(np.sum(resid * resid))
    return total


def reconstruct(dataset: Dataset, model: GeodesicModel) -> list[np.ndarray]:
    """Per-sample projections U(t_i) (U(t_i)^T X_i) onto the model's subspaces."""
    _check_dims(dataset, model)
    out = []
    for t, x in zip(dataset.times, dataset.matrices):
        u = model.evaluate(t)
        out.append(u @ (u.T @ x))
    return out


# ---------------------------------------------------------------------------
# (H, Y) block update


def basis_update(dataset: Dataset, model: GeodesicModel) -> tuple[np.ndarray, np.ndarray]:
    """Joint Procrustes update of (H, Y) with theta held fixed.

    Forms M = sum_i [P_i cos(theta t_i) | P_i sin(theta t_i)] with
    P_i = X_i (X_i^T U(t_i)) and returns the two halves of W V^T from the
    thin SVD of M.  The result is orthonormal with zero cross-block Gram by
    construction, and the loss cannot increase.  A numerically rank-deficient
    M is reported through RankCollapseWarning; the factors remain valid.
    """
    _check_dims(dataset, model)
    d, k = model.d, model.k
    cos_all = np.cos(np.multiply.outer(dataset.times, model.theta))
    sin_all = np.sin(np.multiply.outer(dataset.times, model.theta))
    packed = dataset.packed()
    if packed is not None:
        bases = model.evaluate_path(dataset.times)
        coords = np.einsum("ndk,ndl->nkl", bases, packed)
        proj = np.einsum("ndl,nkl->ndk", packed, coords)
        m_cos = np.einsum("ndk,nk->dk", proj, cos_all)
        m_sin = np.einsum("ndk,nk->dk", proj, sin_all)
    else:
        m_cos = np.zeros((d, k))
        m_sin = np.zeros((d, k))
        for i, (t, x) in enumerate(zip(dataset.times, dataset.matrices)):
            u = model.evaluate(t)
            p = x @ (x.T @ u)
            m_cos += p * cos_all[i]
            m_sin += p * sin_all[i]
    target = np.concatenate([m_cos, m_sin], axis=1)
    w, sv, vt = np.linalg.svd(target, full_matrices=False)
    if sv[0] == 0.0 or sv[-1] <= sv[0] * max(d, 2 * k) * np.finfo(float).eps:
        warnings.warn(
            "Procrustes target is numerically rank deficient; some basis columns are unconstrained by the data",
            RankCollapseWarning,
            stacklevel=2,
        )
    q = w @ vt
    return q[:, :k], q[:, k:]


# ---------------------------------------------------------------------------
# Angle block: constants, curvature, MM step


def angle_constants(dataset: Dataset, H: np.ndarray, Y: np.ndarray) -> AngleConstants:
    """Constants of the separable angle loss for the given basis pair.

    Computed from the k x ell products H^T X_i and Y^T X_i, never from the
    d x d outer products.
    """
    H = np.asarray(H, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if H.shape != Y.shape:
        raise DimensionMismatch("H and Y must share a shape")
    if dataset.d != H.shape[0]:
        raise DimensionMismatch(f"dataset has d={dataset.d} but bases have d={H.shape[0]}")
    T, k = dataset.n_samples, H.shape[1]
    packed = dataset.packed()
    if packed is not None:
        a = np.einsum("dk,ndl->nkl", H, packed)
        c = np.einsum("dk,ndl->nkl", Y, packed)
        alpha = np.sum(a * a, axis=2)
        beta = np.sum(c * a, axis=2)
        gamma = np.sum(c * c, axis=2)
    else:
        alpha = np.zeros((T, k))
        beta = np.zeros((T, k))
        gamma = np.zeros((T, k))
        for i, x in enumerate(dataset.matrices):
            a = H.T @ x
            c = Y.T @ x
            alpha[i] = np.sum(a * a, axis=1)
            beta[i] = np.sum(c * a, axis=1)
            gamma[i] = np.sum(c * c, axis=1)
    half_diff = 0.5 * (alpha - gamma)
    return AngleConstants(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        r=np.hypot(half_diff, beta),
        phi=np.arctan2(beta, half_diff),
        b=0.5 * (alpha + gamma),
    )


def curvature_weight(theta: float, t: float, r: float, phi: float) -> float:
    """Sinc-type curvature of the quadratic majorizer of -r cos(2 theta t - phi).

    Equals f'(theta) divided by the distance from theta to the nearest
    cosine axis (phi + 2 pi m) / (2 t), wrapped to one period; at the axis
    itself the limit 4 t^2 r is returned.  Within a relative rounding
    neighborhood of the axis the ratio is noise over noise, so the limit is
    used there too (it is the correct value to second order).  Non-negative
    and finite for t > 0, r >= 0.
    """
    if t <= 0:
        raise NonpositiveTime(f"curvature weight requires t > 0, got t={t}")
    half = np.pi / (2.0 * t)
    delta = np.mod((theta - phi / (2.0 * t)) + half, 2.0 * half) - half
    if abs(delta) <= _AXIS_TOL * half:
        return float(4.0 * t * t * r)
    deriv = 2.0 * r * t * np.sin(2.0 * theta * t - phi)
    return float(deriv / delta)


def _angle_arrays(constants: AngleConstants, theta: np.ndarray, times: np.ndarray):
    """Per-(sample, angle) derivative and curvature arrays, zeroed at t = 0.

    Negative times are reflected to positive ones with phi negated, which
    leaves each cosine term (and its derivative in theta) unchanged.
    """
    t = np.abs(times)[:, None]
    sign = np.sign(times)[:, None]
    active = t > 0
    t_safe = np.where(active, t, 1.0)
    phi = constants.phi * sign
    deriv = 2.0 * constants.r * t * np.sin(2.0 * theta[None, :] * t - phi)
    half = np.pi / (2.0 * t_safe)
    delta = np.mod((theta[None, :] - phi / (2.0 * t_safe)) + half, 2.0 * half) - half
    near_axis = np.abs(delta) <= _AXIS_TOL * half
    weight = np.divide(deriv, delta, out=np.zeros_like(deriv), where=~near_axis)
    limit = 4.0 * t * t * constants.r
    weight = np.where(near_axis, limit, weight)
    deriv = np.where(active, deriv, 0.0)
    weight = np.where(active, weight, 0.0)
    return deriv, weight


def angle_loss_terms(constants: AngleConstants, theta: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Separable angle loss per angle: sum_i -r cos(2 theta t_i - phi) + b, shape (k,)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    t = np.asarray(times, dtype=float)[:, None]
    f = -constants.r * np.cos(2.0 * theta[None, :] * t - constants.phi) + constants.b
    return np.sum(f, axis=0)


def angle_gradient(constants: AngleConstants, theta: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Gradient of the separable angle loss per angle, shape (k,)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    deriv, _ = _angle_arrays(constants, theta, np.asarray(times, dtype=float))
    return np.sum(deriv, axis=0)


def angle_mm_step(constants: AngleConstants, theta: np.ndarray, times: np.ndarray) -> np.ndarray:
    """One majorize-minimize step on every angle independently.

    theta_j moves by -(sum_i f'_ij) / (sum_i w_ij); angles whose curvature
    sum is zero (flat separable loss) stay put.  The step never increases
    the separable loss of any angle.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    deriv, weight = _angle_arrays(constants, theta, np.asarray(times, dtype=float))
    num = np.sum(deriv, axis=0)
    den = np.sum(weight, axis=0)
    step = np.divide(num, den, out=np.zeros_like(num), where=den != 0.0)
    return theta - step


class _AngleStepper:
    """Repeated MM steps with the theta-independent quantities hoisted.

    Samples at t = 0 fall out naturally: their derivative amplitude and
    curvature limit are both zero.
    """

    def __init__(self, constants: AngleConstants, times: np.ndarray):
        t = np.abs(times)[:, None]
        sign = np.sign(times)[:, None]
        t_safe = np.where(t > 0, t, 1.0)
        self.phi = constants.phi * sign
        self.axis = self.phi / (2.0 * t_safe)
        self.half = np.pi / (2.0 * t_safe)
        self.period = np.pi / t_safe
        self.freq = 2.0 * t
        self.amp = 2.0 * constants.r * t
        self.limit = 4.0 * t * t * constants.r

    def run(self, theta: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            deriv = self.amp * np.sin(self.freq * theta[None, :] - self.phi)
            delta = np.mod(theta[None, :] - self.axis + self.half, self.period) - self.half
            near_axis = np.abs(delta) <= _AXIS_TOL * self.half
            weight = np.divide(deriv, delta, out=np.zeros_like(deriv), where=~near_axis)
            weight = np.where(near_axis, self.limit, weight)
            num = np.sum(deriv, axis=0)
            den = np.sum(weight, axis=0)
            theta = theta - np.divide(num, den, out=np.zeros_like(num), where=den != 0.0)
        return theta


# ---------------------------------------------------------------------------
# Initialization and the outer loop


def init_endpoints(dataset: Dataset, k: int, pool_fraction: float = 0.25) -> GeodesicModel:
    """Connect coarse SVD estimates of the starting and ending subspaces.

    Pools the first and last ceil(pool_fraction * T) samples, takes the
    rank-k SVD basis of each pool, and returns the connecting geodesic.
    """
    if not 0.0 < pool_fraction <= 0.5:
        raise ValueError("pool_fraction must lie in (0, 0.5]")
    n_pool = ceil(pool_fraction * dataset.n_samples)
    first = np.concatenate(dataset.matrices[:n_pool], axis=1)
    last = np.concatenate(dataset.matrices[-n_pool:], axis=1)
    if first.shape[1] < k or last.shape[1] < k:
        raise InitFailure(
            f"endpoint pools have {first.shape[1]} and {last.shape[1]} columns; need at least k={k}"
        )
    return connect(principal_basis(first, k), principal_basis(last, k))


def _initial_model(dataset: Dataset, init: InitStrategy) -> GeodesicModel:
    if isinstance(init, ProvidedInit):
        return init.model
    if isinstance(init, RandomInit):
        return random_geodesic(dataset.d, init.k, init.theta_max, init.seed)
    if isinstance(init, EndpointsInit):
        return init_endpoints(dataset, init.k, init.pool_fraction)
    raise TypeError(f"unknown init strategy: {init!r}")


class _PackedLoop:
    """One outer iteration's worth of linear algebra on (T, d, ell) data.

    Mirrors loss/basis_update/angle_constants on pre-stacked arrays so the
    fit loop touches each intermediate exactly once per iteration.
    """

    def __init__(self, stacked: np.ndarray, times: np.ndarray):
        self.x = stacked
        self.times = times
        self.d = stacked.shape[1]

    def evaluate(self, H, Y, theta, with_loss: bool = True):
        """Bases U(t_i), loadings, and (optionally) the residual loss."""
        angles = self.times[:, None] * theta[None, :]
        cos_all = np.cos(angles)
        sin_all = np.sin(angles)
        bases = H[None, :, :] * cos_all[:, None, :] + Y[None, :, :] * sin_all[:, None, :]
        coords = np.matmul(bases.transpose(0, 2, 1), self.x)
        if not with_loss:
            return cos_all, sin_all, bases, coords, None
        resid = self.x - np.matmul(bases, coords)
        return cos_all, sin_all, bases, coords, float(np.sum(resid * resid))

    def update_bases(self, cos_all, sin_all, bases, coords):
        proj = np.matmul(self.x, coords.transpose(0, 2, 1))
        target = np.concatenate(
            [
                np.sum(proj * cos_all[:, None, :], axis=0),
                np.sum(proj * sin_all[:, None, :], axis=0),
            ],
            axis=1,
        )
        k = cos_all.shape[1]
        w, sv, vt = np.linalg.svd(target, full_matrices=False)
        rank_ok = sv[0] > 0.0 and sv[-1] > sv[0] * max(self.d, 2 * k) * np.finfo(float).eps
        q = w @ vt
        return q[:, :k], q[:, k:], rank_ok

    def constants(self, H, Y):
        a = np.matmul(H.T, self.x)
        c = np.matmul(Y.T, self.x)
        alpha = np.sum(a * a, axis=2)
        beta = np.sum(c * a, axis=2)
        gamma = np.sum(c * c, axis=2)
        half_diff = 0.5 * (alpha - gamma)
        return AngleConstants(
            alpha=alpha,
            beta=beta,
            gamma=gamma,
            r=np.hypot(half_diff, beta),
            phi=np.arctan2(beta, half_diff),
            b=0.5 * (alpha + gamma),
        )


def fit(dataset: Dataset, config: EstimatorConfig, callback=None) -> FitReport:
    """Fit a geodesic to the dataset by alternating the two block updates.

    Runs up to `outer_iters` outer iterations, each consisting of the
    (H, Y) update (repeated `inner_basis_iters` times) followed by
    `inner_mm_iters` angle steps, and stops early once the relative loss
    decrease over an outer iteration falls below `rel_loss_tol`.  Both block updates are majorize-minimize steps, so the
    recorded loss trail never increases; an outer iteration that fails to
    descend numerically (possible only at the floating-point noise floor)
    is reverted and treated as converged.  When `time_center` is set,
    fitting happens on the shifted axis t - t_center and the returned model
    is re-expressed on the original axis, so its evaluate() semantics are
    unchanged.

    `callback(model, loss_value)`, if given, runs after every outer
    iteration with the current model in fitting coordinates.
    """
    start = time.perf_counter()
    model = _initial_model(dataset, config.init)
    _check_dims(dataset, model)
    work = dataset
    t_center = config.time_center
    if t_center is not None and t_center != 0.0:
        work = dataset.with_times(dataset.times - t_center)
        model = model.shifted_origin(t_center)

    packed = work.packed()
    if packed is not None:
        model, losses, iters_run, converged = _fit_packed(packed, work, model, config, callback)
    else:
        model, losses, iters_run, converged = _fit_generic(work, model, config, callback)

    if t_center is not None and t_center != 0.0:
        model = model.shifted_origin(-t_center)
    trail = np.asarray(losses)
    trail.flags.writeable = False
    return FitReport(
        model=model,
        loss_per_outer_iter=trail,
        outer_iters_run=iters_run,
        wall_time=time.perf_counter() - start,
        converged=converged,
    )


def _fit_packed(packed: np.ndarray, work: Dataset, model: GeodesicModel, config: EstimatorConfig, callback):
    """Fused outer loop for uniform-ell data; same iterates as the generic path."""
    loop = _PackedLoop(packed, work.times)
    H, Y, theta = model.H, model.Y, model.theta
    cos_all, sin_all, bases, coords, current = loop.evaluate(H, Y, theta)
    losses = [current]
    converged = False
    iters_run = 0
    rank_collapsed = False
    for n in range(1, config.outer_iters + 1):
        new_H, new_Y, rank_ok = loop.update_bases(cos_all, sin_all, bases, coords)
        rank_collapsed |= not rank_ok
        for _ in range(config.inner_basis_iters - 1):
            cos_all, sin_all, bases, coords, _ = loop.evaluate(new_H, new_Y, theta, with_loss=False)
            new_H, new_Y, rank_ok = loop.update_bases(cos_all, sin_all, bases, coords)
            rank_collapsed |= not rank_ok
        constants = loop.constants(new_H, new_Y)
        new_theta = _AngleStepper(constants, work.times).run(theta, config.inner_mm_iters)
        cos_all, sin_all, bases, coords, candidate = loop.evaluate(new_H, new_Y, new_theta)
        previous = losses[-1]
        iters_run = n
        if candidate > previous:
            # Numerical non-descent: keep the previous iterate.
            converged = True
            break
        H, Y, theta = new_H, new_Y, new_theta
        losses.append(candidate)
        if callback is not None:
            callback(GeodesicModel(H, Y, theta), candidate)
        if (previous - candidate) < config.rel_loss_tol * max(previous, _TINY):
            converged = True
            break
    if rank_collapsed:
        warnings.warn(
            "Procrustes target was numerically rank deficient during the fit",
            RankCollapseWarning,
            stacklevel=3,
        )
    return GeodesicModel(H, Y, theta), losses, iters_run, converged


def _fit_generic(work: Dataset, model: GeodesicModel, config: EstimatorConfig, callback):
    """Reference outer loop built from the public block operations."""
    losses = [loss(work, model)]
    converged = False
    iters_run = 0
    for n in range(1, config.outer_iters + 1):
        H, Y = basis_update(work, model)
        for _ in range(config.inner_basis_iters - 1):
            H, Y = basis_update(work, GeodesicModel(H, Y, model.theta))
        constants = angle_constants(work, H, Y)
        theta = model.theta
        for _ in range(config.inner_mm_iters):
            theta = angle_mm_step(constants, theta, work.times)
        candidate = GeodesicModel(H, Y, theta)
        current = loss(work, candidate)
        previous = losses[-1]
        iters_run = n
        if current > previous:
            # Numerical non-descent: keep the previous iterate.
            converged = True
            break
        model = candidate
        losses.append(current)
        if callback is not None:
            callback(model, current)
        if (previous - current) < config.rel_loss_tol * max(previous, _TINY):
            converged = True
            break
    return model, losses, iters_run, converged
