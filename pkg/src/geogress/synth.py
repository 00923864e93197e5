"""Planted-model instance generation for the synthetic experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch
from .geodesic import GeodesicModel, connect, random_geodesic


@dataclass(frozen=True)
class PlantedInstance:
    """A synthetic dataset together with the ground truth that generated it.

    X_i = U(t_i) G_i + N_i with the model U drawn at random, standard-normal
    loadings G_i and i.i.d. Gaussian noise of standard deviation sigma;
    `clean` holds the noiseless U(t_i) G_i.
    """

    dataset: Dataset
    truth: GeodesicModel
    clean: tuple[np.ndarray, ...]
    sigma: float
    seed: int


def sample_times(T: int) -> np.ndarray:
    """Equispaced time points on [0, 1]; a single sample sits at t = 0."""
    if T == 1:
        return np.zeros(1)
    return np.arange(T) / (T - 1)


def planted_instance(
    d: int, k: int, ell: int, T: int, sigma: float, theta_max: float, seed: int
) -> PlantedInstance:
    """Generate one planted instance, deterministic under the seed.

    The noise stream is drawn (and scaled by sigma) even when sigma = 0,
    so instances with the same seed share loadings across noise levels.
    """
    if 2 * k > d:
        raise DimensionMismatch(f"need 2k <= d, got k={k}, d={d}")
    if T < 1 or ell < 1:
        raise ValueError("need T >= 1 and ell >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    truth = random_geodesic(d, k, theta_max, rng)
    times = sample_times(T)
    clean = []
    noisy = []
    for t in times:
        u = truth.evaluate(t)
        g = rng.standard_normal((k, ell))
        n = rng.standard_normal((d, ell))
        x = u @ g
        clean.append(x)
        noisy.append(x + sigma * n)
    return PlantedInstance(
        dataset=Dataset(times, tuple(noisy)),
        truth=truth,
        clean=tuple(clean),
        sigma=float(sigma),
        seed=int(seed),
    )


def permute_times(dataset: Dataset, seed: int) -> Dataset:
    """Shuffle the sample matrices against the (unchanged) time grid."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n_samples)
    return Dataset(dataset.times, tuple(dataset.matrices[p] for p in perm))


def planted_piecewise_instance(
    d: int,
    k: int,
    ell: int,
    T: int,
    sigma: float,
    theta_max: float,
    seed: int,
    knot: float = 0.5,
):
    """Two-segment continuous piecewise-geodesic instance.

    The first segment is a random geodesic; the second starts from the first
    segment's end span and heads toward an independent random span, so the
    path is continuous at the knot.  Returns (dataset, (segment models),
    knots, clean matrices).
    """
    if not 0.0 < knot < 1.0:
        raise ValueError("knot must lie strictly inside (0, 1)")
    rng = np.random.default_rng(seed)
    first = random_geodesic(d, k, theta_max, rng)
    far = random_geodesic(d, k, theta_max, rng)
    second = connect(first.evaluate(1.0), far.evaluate(1.0))
    times = sample_times(T)
    clean = []
    noisy = []
    for t in times:
        if t <= knot:
            u = first.evaluate(t / knot)
        else:
            u = second.evaluate((t - knot) / (1.0 - knot))
        g = rng.standard_normal((k, ell))
        n = rng.standard_normal((d, ell))
        x = u @ g
        clean.append(x)
        noisy.append(x + sigma * n)
    knots = np.array([0.0, knot, 1.0])
    return Dataset(times, tuple(noisy)), (first, second), knots, tuple(clean)
