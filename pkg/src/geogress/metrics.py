"""Error metrics: subspace distance, geodesic-path distance, data error, PSNR."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch
from .geodesic import GeodesicModel

DEFAULT_QUADRATURE = 201


def subspace_error(U: np.ndarray, V: np.ndarray) -> float:
    """Normalized projector distance (1/sqrt(2k)) ||U U^T - V V^T||_F in [0, 1].

    Computed without forming d x d projectors via
    ||U U^T - V V^T||_F^2 = 2k - 2 ||U^T V||_F^2 = 2 ||U - V (V^T U)||_F^2;
    the residual form on the right avoids the cancellation that would other-
    wise floor the value near sqrt(eps) for nearly equal spans.
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != V.shape:
        raise DimensionMismatch(f"bases must share a shape, got {U.shape} vs {V.shape}")
    k = U.shape[1]
    resid = U - V @ (V.T @ U)
    return math.sqrt(float(np.sum(resid * resid)) / k)


def geodesic_error(m1: GeodesicModel, m2: GeodesicModel, n_quad: int = DEFAULT_QUADRATURE) -> float:
    """Root-mean-square subspace error between two geodesics over [0, 1].

    The integral is approximated on a uniform grid of n_quad points
    including both endpoints.
    """
    if (m1.d, m1.k) != (m2.d, m2.k):
        raise DimensionMismatch(f"models differ in (d, k): ({m1.d}, {m1.k}) vs ({m2.d}, {m2.k})")
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    grid = np.linspace(0.0, 1.0, n_quad)
    p1 = m1.evaluate_path(grid)
    p2 = m2.evaluate_path(grid)
    cross = np.einsum("ndk,ndm->nkm", p2, p1)
    resid = p1 - np.einsum("ndk,nkm->ndm", p2, cross)
    err_sq = np.sum(resid * resid, axis=(1, 2)) / m1.k
    return math.sqrt(float(np.mean(err_sq)))


def data_error(reconstructed, clean) -> float:
    """Stacked residual norm between reconstructions and clean data, relative
    to the clean-data norm."""
    if len(reconstructed) != len(clean):
        raise DimensionMismatch("sample counts differ")
    num = 0.0
    den = 0.0
    for xr, xc in zip(reconstructed, clean):
        xr = np.asarray(xr, dtype=float)
        xc = np.asarray(xc, dtype=float)
        if xr.shape != xc.shape:
            raise DimensionMismatch(f"sample shapes differ: {xr.shape} vs {xc.shape}")
        num += float(np.sum((xr - xc) ** 2))
        den += float(np.sum(xc * xc))
    return math.sqrt(num) / math.sqrt(den)


def psnr(reconstructed: np.ndarray, clean: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on the 0-255 pixel scale.

    20 log10(255 / RMSE) with RMSE = ||clean - reconstructed||_F / sqrt(d ell);
    returns +inf for an exact reconstruction.
    """
    xr = np.asarray(reconstructed, dtype=float)
    xc = np.asarray(clean, dtype=float)
    if xr.shape != xc.shape:
        raise DimensionMismatch(f"frame shapes differ: {xr.shape} vs {xc.shape}")
    rmse = math.sqrt(float(np.mean((xc - xr) ** 2)))
    if rmse == 0.0:
        return math.inf
    return 20.0 * math.log10(255.0 / rmse)
