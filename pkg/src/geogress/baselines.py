"""Static-subspace SVD baselines used for loss bounds and comparisons."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, RankTooLarge
from .geodesic import GeodesicModel, orthonormal_complement, principal_basis, require_basis


def batch_svd_subspace(dataset: Dataset, r: int) -> tuple[np.ndarray, float]:
    """Best static rank-r subspace of all columns pooled, and its residual loss.

    The stacked matrix is not mean-centered: the generative model has
    zero-mean loadings and no intercept.
    """
    stacked = dataset.column_stack()
    if r > min(stacked.shape):
        raise RankTooLarge(f"rank {r} exceeds min(d, total columns) = {min(stacked.shape)}")
    basis = principal_basis(stacked, r)
    resid = stacked - basis @ (basis.T @ stacked)
    return basis, float(np.sum(resid * resid))


def static_as_geodesic(U: np.ndarray) -> GeodesicModel:
    """View a static rank-k subspace as a zero-angle geodesic.

    The direction basis is an arbitrary orthonormal completion; it never
    enters the evaluated path because all angles are zero.  Useful as a fit
    initialization whose starting loss equals the static-subspace loss.
    """
    U = require_basis(U, "U")
    d, k = U.shape
    if 2 * k > d:
        raise DimensionMismatch(f"need 2k <= d, got k={k}, d={d}")
    return GeodesicModel(U, orthonormal_complement(U, k), np.zeros(k))


def per_timepoint_svd(dataset: Dataset, k: int) -> list[np.ndarray]:
    """Independent rank-k SVD basis at each time point; needs ell_t >= k."""
    for i, x in enumerate(dataset.matrices):
        if x.shape[1] < k:
            raise RankTooLarge(f"sample {i} has {x.shape[1]} columns < k={k}")
    return [principal_basis(x, k) for x in dataset.matrices]
