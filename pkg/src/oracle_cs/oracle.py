"""Oracle receiver: least squares on the true support."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import SensingSetup

__all__ = ["OracleReconstruction", "SingularSupportError", "restrict_columns", "oracle_reconstruct", "RANK_RTOL"]

RANK_RTOL = 1e-10


class SingularSupportError(np.linalg.LinAlgError):
    """U restricted to the support is numerically rank deficient."""


@dataclass(frozen=True, eq=False)
class OracleReconstruction:
    theta_hat: np.ndarray
    x_hat: np.ndarray
    squared_error: Optional[float] = None


def _check_support(support, n: int) -> np.ndarray:
    s = np.asarray(support)
    if s.ndim != 1:
        raise ValueError("support must be a 1-D index sequence")
    if s.size and not np.issubdtype(s.dtype, np.integer):
        raise TypeError(f"support indices must be integers, got dtype {s.dtype}")
    s = s.astype(np.intp)
    if s.size and (s.min() < 0 or s.max() >= n):
        raise IndexError(f"support index out of range [0, {n})")
    if np.unique(s).size != s.size:
        raise ValueError("support contains duplicate indices")
    return s


def restrict_columns(u, support) -> np.ndarray:
    """Columns of ``u`` listed in ``support``, in that order."""
    u = np.asarray(u, dtype=float)
    s = _check_support(support, u.shape[1])
    return u[:, s]


def _lstsq_svd(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    left, sv, vt = np.linalg.svd(a, full_matrices=False)
    if sv.size == 0 or sv[-1] <= RANK_RTOL * sv[0]:
        smin = sv[-1] if sv.size else 0.0
        smax = sv[0] if sv.size else 0.0
        raise SingularSupportError(
            f"restricted sensing matrix is rank deficient: smallest/largest singular value "
            f"{smin:.3e}/{smax:.3e} below relative tolerance {RANK_RTOL:g}"
        )
    return vt.T @ ((left.T @ y) / sv)


def oracle_reconstruct(setup: SensingSetup, support, y, x_true=None) -> OracleReconstruction:
    """Reconstruct with the pseudo-inverse of ``U`` restricted to ``support``.

    The least-squares coefficients come from a thin SVD of the m x k
    restricted matrix; the normal equations are never formed. Off-support
    coefficients are exactly zero.

    Parameters
    ----------
    setup : SensingSetup
        Sensing matrix and basis.
    support : sequence of int
        True support, ``k = len(support) < m``.
    y : ndarray (m,)
        Measurements.
    x_true : ndarray (n,), optional
        When given, ``squared_error = ||x_hat - x_true||^2`` is filled in.

    Raises
    ------
    SingularSupportError
        If the smallest singular value is below ``1e-10`` times the largest.
    """
    s = _check_support(support, setup.n)
    y = np.asarray(y, dtype=float)
    if y.shape != (setup.m,):
        raise ValueError(f"y must have shape ({setup.m},), got {y.shape}")
    if not 0 < s.size < setup.m:
        raise ValueError(f"support size must satisfy 0 < k < m, got k={s.size}, m={setup.m}")

    theta_hat = np.zeros(setup.n)
    theta_hat[s] = _lstsq_svd(setup.u_columns(s), y)
    x_hat = setup.basis.matrix @ theta_hat

    err = None
    if x_true is not None:
        x_true = np.asarray(x_true, dtype=float)
        if x_true.shape != (setup.n,):
            raise ValueError(f"x_true must have shape ({setup.n},), got {x_true.shape}")
        d = x_hat - x_true
        err = float(d @ d)
    theta_hat.setflags(write=False)
    x_hat.setflags(write=False)
    return OracleReconstruction(theta_hat=theta_hat, x_hat=x_hat, squared_error=err)
