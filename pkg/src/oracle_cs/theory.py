"""Closed-form oracle MSE, RIP-based bounds and their numerical checks."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import Rng

__all__ = [
    "DomainError",
    "RipGuardError",
    "BoundSet",
    "WishartCheckReport",
    "RipResult",
    "closed_form_mse",
    "closed_form_mse_white",
    "rip_bounds_white",
    "rip_bound_correlated",
    "bound_set",
    "rip_constant_bruteforce",
    "rip_constant_search",
    "rip_constant_svd",
    "wishart_pinv_mean",
    "wishart_pinv_mean_check",
    "MAX_SUBSETS",
]

MAX_SUBSETS = 10**6
PINV_RTOL = 1e-10


class DomainError(ValueError):
    pass


class RipGuardError(ValueError):
    """The number of k-subsets exceeds the brute-force budget."""

    def __init__(self, n: int, k: int, count: int):
        self.count = count
        super().__init__(
            f"refusing brute-force RIP search: C({n}, {k}) = {count} subsets exceeds the limit of {MAX_SUBSETS}"
        )


def _require_m_gt_k_plus_3(k: int, m: int) -> None:
    if not m > k + 3:
        raise DomainError(f"closed form requires M > K + 3 (got M={m}, K={k})")


def closed_form_mse(k: int, m: int, sigma2_phi: float, trace_sigma_z: float) -> float:
    """Expected oracle error ``K / (M (M-K-1)) * tr(Sigma_z) / sigma2_phi``.

    Depends on the noise covariance only through its trace.
    """
    _require_m_gt_k_plus_3(k, m)
    if not sigma2_phi > 0:
        raise ValueError(f"sigma2_phi must be positive, got {sigma2_phi}")
    return k * trace_sigma_z / (m * (m - k - 1) * sigma2_phi)


def closed_form_mse_white(k: int, m: int, sigma2_phi: float, sigma2_z: float) -> float:
    """Equal-variance form ``K / (M-K-1) * sigma2_z / sigma2_phi``."""
    # routed through the trace form so both agree bit for bit
    return closed_form_mse(k, m, sigma2_phi, m * sigma2_z)


def _check_delta(delta_k: float) -> None:
    if not 0.0 <= delta_k < 1.0:
        raise ValueError(f"RIP constant must lie in [0, 1) for the bound to exist, got {delta_k}")


def rip_bounds_white(k: int, delta_k: float, sigma2_z: float) -> tuple[float, float]:
    _check_delta(delta_k)
    return k * sigma2_z / (1.0 + delta_k), k * sigma2_z / (1.0 - delta_k)


def rip_bound_correlated(k: int, delta_k: float, lambda_max: float) -> float:
    _check_delta(delta_k)
    if lambda_max < 0:
        raise ValueError(f"lambda_max must be nonnegative, got {lambda_max}")
    return k * lambda_max / (1.0 - delta_k)


@dataclass(frozen=True)
class BoundSet:
    closed_form: float
    rip_lower_white: float
    rip_upper_white: float
    rip_upper_corr: float
    delta_k: float


def bound_set(k: int, m: int, sigma2_phi: float, trace_sigma_z: float, lambda_max: float, delta_k: float) -> BoundSet:
    """All predictions for one configuration at one RIP constant.

    The white-noise bounds use the mean per-entry variance ``trace / m``.
    """
    lo, hi = rip_bounds_white(k, delta_k, trace_sigma_z / m)
    return BoundSet(
        closed_form=closed_form_mse(k, m, sigma2_phi, trace_sigma_z),
        rip_lower_white=lo,
        rip_upper_white=hi,
        rip_upper_corr=rip_bound_correlated(k, delta_k, lambda_max),
        delta_k=delta_k,
    )


# ---------------------------------------------------------------------------
# brute-force RIP constant


@dataclass(frozen=True)
class RipResult:
    delta: float
    subset: tuple[int, ...]
    subsets_checked: int


def _gram_deviation(blocks: np.ndarray) -> np.ndarray:
    gram = np.swapaxes(blocks, 1, 2) @ blocks
    ev = np.linalg.eigvalsh(gram)
    return np.maximum(ev[:, -1] - 1.0, 1.0 - ev[:, 0])


def _scan(a: np.ndarray, k: int, start: int, stop: int, score: Callable, batch: int = 4096):
    """Best (score, rank) over lexicographic subset ranks in [start, stop)."""
    best, best_rank = -np.inf, -1
    combos = itertools.islice(itertools.combinations(range(a.shape[1]), k), start, stop)
    rank = start
    while True:
        chunk = np.array(list(itertools.islice(combos, batch)), dtype=np.intp)
        if chunk.size == 0:
            break
        dev = score(a[:, chunk].transpose(1, 0, 2))
        i = int(np.argmax(dev))
        if dev[i] > best:
            best, best_rank = float(dev[i]), rank + i
        rank += len(chunk)
    return best, best_rank


def _rip_search(a, k: int, score: Callable, partitions: int, workers: int) -> RipResult:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("matrix must be 2-D")
    n = a.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"RIP order must satisfy 1 <= k <= n, got k={k}, n={n}")
    total = math.comb(n, k)
    if total > MAX_SUBSETS:
        raise RipGuardError(n, k, total)

    partitions = max(1, min(partitions, total))
    edges = [total * p // partitions for p in range(partitions + 1)]
    jobs = [(edges[p], edges[p + 1]) for p in range(partitions)]
    run = lambda se: _scan(a, k, se[0], se[1], score)  # noqa: E731
    if workers > 1 and partitions > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]

    # merge in partition order; strict '>' keeps the lexicographically first argmax
    best, best_rank = -np.inf, -1
    for val, rank in parts:
        if val > best:
            best, best_rank = val, rank
    subset = next(itertools.islice(itertools.combinations(range(n), k), best_rank, None))
    return RipResult(delta=best, subset=tuple(subset), subsets_checked=total)


def rip_constant_search(a, k: int, partitions: int = 1, workers: int = 1) -> RipResult:
    """Exhaustive RIP constant of order ``k`` with the maximising subset.

    For every k-subset the k x k Gram matrix is eigen-decomposed and its
    spectral deviation from the identity recorded. The subset ranks are split
    into ``partitions`` contiguous ranges that may run on ``workers`` threads;
    the merge is in range order, so the result never depends on ``workers``.
    """
    return _rip_search(a, k, _gram_deviation, partitions, workers)


def rip_constant_bruteforce(a, k: int, partitions: int = 1, workers: int = 1) -> float:
    return rip_constant_search(a, k, partitions, workers).delta


def rip_constant_svd(a, k: int) -> float:
    """Same quantity via squared singular values of each column block.

    A deliberately plain loop, kept apart from the batched search so it can
    serve as an independent cross-check of :func:`rip_constant_bruteforce`.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"RIP order must satisfy 1 <= k <= n, got k={k}, n={n}")
    if math.comb(n, k) > MAX_SUBSETS:
        raise RipGuardError(n, k, math.comb(n, k))
    delta = 0.0
    for cols in itertools.combinations(range(n), k):
        sv = np.linalg.svd(a[:, list(cols)], compute_uv=False)
        delta = max(delta, float(np.max(np.abs(sv**2 - 1.0))))
    return delta


# ---------------------------------------------------------------------------
# Wishart pseudo-inverse mean


@dataclass(frozen=True)
class WishartCheckReport:
    m: int
    k: int
    sigma2_phi: float
    trials: int
    predicted_scale: float
    empirical_diag_mean: float
    empirical_offdiag_max: float

    @property
    def diag_rel_error(self) -> float:
        return abs(self.empirical_diag_mean - self.predicted_scale) / self.predicted_scale

    @property
    def offdiag_ratio(self) -> float:
        return self.empirical_offdiag_max / self.empirical_diag_mean


def _pinv_outer(u: np.ndarray) -> np.ndarray:
    # (U U^T)^+ = A diag(s^-2) A^T from the thin SVD U = A diag(s) V^T
    left, sv, _ = np.linalg.svd(u, full_matrices=False)
    keep = sv > PINV_RTOL * sv[0]
    left = left[:, keep]
    return (left / sv[keep] ** 2) @ left.T


def _wishart_partial_sum(m: int, k: int, sigma2_phi: float, rng: Rng, start: int, stop: int) -> np.ndarray:
    acc = np.zeros((m, m))
    scale = math.sqrt(sigma2_phi)
    for t in range(start, stop):
        u = scale * rng.child(t).generator().standard_normal((m, k))
        acc += _pinv_outer(u)
    return acc


def wishart_pinv_mean(
    m: int, k: int, sigma2_phi: float, trials: int, rng: Rng, partitions: int = 8, workers: int = 1
) -> np.ndarray:
    """Monte-Carlo mean of ``(U U^T)^+`` over ``trials`` m x k Gaussian draws.

    Trial ``t`` draws from ``rng.child(t)``. Trials are summed per contiguous
    partition and partitions are added in order, so the result is identical
    for any ``workers`` at a fixed ``partitions``.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not sigma2_phi > 0:
        raise ValueError(f"sigma2_phi must be positive, got {sigma2_phi}")
    partitions = max(1, min(partitions, trials))
    edges = [trials * p // partitions for p in range(partitions + 1)]
    run = lambda p: _wishart_partial_sum(m, k, sigma2_phi, rng, edges[p], edges[p + 1])  # noqa: E731
    if workers > 1 and partitions > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(partitions)))
    else:
        parts = [run(p) for p in range(partitions)]
    total = np.zeros((m, m))
    for part in parts:
        total += part
    return total / trials


def wishart_pinv_mean_check(
    m: int, k: int, sigma2_phi: float, trials: int, rng: Rng, partitions: int = 8, workers: int = 1
) -> WishartCheckReport:
    """Compare the empirical pseudo-inverse mean with ``k / (m (m-k-1) sigma2_phi) * I``."""
    _require_m_gt_k_plus_3(k, m)
    mean = wishart_pinv_mean(m, k, sigma2_phi, trials, rng, partitions, workers)
    off = mean - np.diag(np.diag(mean))
    return WishartCheckReport(
        m=m,
        k=k,
        sigma2_phi=sigma2_phi,
        trials=trials,
        predicted_scale=k / (m * (m - k - 1) * sigma2_phi),
        empirical_diag_mean=float(np.mean(np.diag(mean))),
        empirical_offdiag_max=float(np.max(np.abs(off))),
    )
