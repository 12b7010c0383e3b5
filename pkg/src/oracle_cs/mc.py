"""Deterministic Monte-Carlo harness for the oracle receiver.

A trial is identified by one integer stream id under the master seed. In a
sweep, grid point ``p`` and trial ``t`` use stream ``p * trials + t``, so
grid points never share randomness and any subset of trials can be computed
on any worker without changing the result.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import Rng, dct_basis, gen_sparse_signal, make_setup, measure
from .noise import Ar1, NoiseModel, Quantizer, White, covariance_summary, quantize_uniform, sample_noise
from .oracle import oracle_reconstruct
from .theory import BoundSet, bound_set, closed_form_mse

__all__ = ["ExperimentConfig", "SweepResult", "run_trial", "run_trials", "run_sweep", "aggregate", "SWEEP_PARAMETERS"]

SWEEP_PARAMETERS = ("sigma2_z", "delta", "rho")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    k: int
    m: int
    noise: NoiseModel
    trials: int = 1000
    seed: int = 0
    sigma2_theta: float = 1.0
    sigma2_phi: Optional[float] = None  # None means 1/m

    def __post_init__(self):
        if not 0 < self.k < self.m < self.n:
            raise ValueError(f"need 0 < k < m < n, got k={self.k}, m={self.m}, n={self.n}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.sigma2_theta > 0:
            raise ValueError(f"sigma2_theta must be positive, got {self.sigma2_theta}")
        if self.sigma2_phi is None:
            object.__setattr__(self, "sigma2_phi", 1.0 / self.m)
        elif not self.sigma2_phi > 0:
            raise ValueError(f"sigma2_phi must be positive, got {self.sigma2_phi}")
        if isinstance(self.noise, (White, Ar1)) and self.noise.m != self.m:
            raise ValueError(f"noise length {self.noise.m} does not match m={self.m}")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def predicted_mse(self) -> float:
        s = covariance_summary(self.noise, self.m)
        return closed_form_mse(self.k, self.m, self.sigma2_phi, s.trace)

    def bounds(self, delta_k: float) -> BoundSet:
        s = covariance_summary(self.noise, self.m)
        return bound_set(self.k, self.m, self.sigma2_phi, s.trace, s.lambda_max, delta_k)


def run_trial(config: ExperimentConfig, trial_index: int) -> float:
    """Squared error ``||x_hat - x||^2`` of one oracle reconstruction.

    Draw order on stream ``(seed, trial_index)``: support, nonzero values,
    sensing matrix, then noise (skipped for the quantiser, which instead
    rounds ``phi x``).
    """
    gen = Rng(config.seed, trial_index).generator()
    basis = dct_basis(config.n)
    sig = gen_sparse_signal(config.n, config.k, config.sigma2_theta, basis, gen)
    setup = make_setup(config.m, config.n, config.sigma2_phi, basis, gen)
    noise = config.noise
    if isinstance(noise, Quantizer):
        y = quantize_uniform(measure(setup, sig.x, np.zeros(config.m)), noise.delta)
    else:
        y = measure(setup, sig.x, sample_noise(noise, gen))
    return oracle_reconstruct(setup, sig.support, y, x_true=sig.x).squared_error


def run_trials(config: ExperimentConfig, streams: Sequence[int], workers: int = 1) -> np.ndarray:
    """Squared errors for the given stream ids, in the order given."""
    streams = list(streams)
    out = np.empty(len(streams))
    if workers <= 1 or len(streams) < 2:
        for i, s in enumerate(streams):
            out[i] = run_trial(config, s)
        return out
    nchunks = min(len(streams), workers * 4)
    edges = [len(streams) * c // nchunks for c in range(nchunks + 1)]

    def work(c):
        for i in range(edges[c], edges[c + 1]):
            out[i] = run_trial(config, streams[i])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, range(nchunks)))
    return out


def aggregate(errors) -> tuple[float, float]:
    """Mean and standard error of the mean, via exactly rounded sums."""
    e = [float(v) for v in errors]
    t = len(e)
    mean = math.fsum(e) / t
    if t < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in e) / (t - 1)
    return mean, math.sqrt(var / t)


@dataclass(frozen=True, eq=False)
class SweepResult:
    parameter: str
    grid: np.ndarray
    empirical_mse: np.ndarray
    std_error: np.ndarray
    predicted_mse: np.ndarray
    delta_k: tuple[float, ...] = ()
    bounds: tuple[tuple[BoundSet, ...], ...] = ()  # bounds[point][j] is at delta_k[j]
    squared_errors: Optional[np.ndarray] = field(default=None, repr=False)
    config: Optional[ExperimentConfig] = None

    def __len__(self):
        return len(self.grid)


def _config_at(config: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    noise = config.noise
    if parameter == "sigma2_z" and isinstance(noise, (White, Ar1)):
        return config.replace(noise=dataclasses.replace(noise, sigma2_z=float(value)))
    if parameter == "delta" and isinstance(noise, Quantizer):
        return config.replace(noise=Quantizer(float(value)))
    if parameter == "rho" and isinstance(noise, Ar1):
        return config.replace(noise=dataclasses.replace(noise, rho=float(value)))
    raise ValueError(f"cannot sweep {parameter!r} with noise model {type(noise).__name__}")


def run_sweep(
    config: ExperimentConfig,
    parameter: str,
    grid: Sequence[float],
    delta_k_list: Sequence[float] = (),
    workers: int = 1,
) -> SweepResult:
    """Run ``config.trials`` trials at every grid value of ``parameter``.

    ``parameter`` is ``"sigma2_z"`` (white or AR(1) noise), ``"delta"``
    (quantiser) or ``"rho"`` (AR(1)). Each point carries the closed-form
    prediction and one :class:`BoundSet` per entry of ``delta_k_list``.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise ValueError("sweep grid is empty")
    points = [_config_at(config, parameter, v) for v in grid]
    delta_k = tuple(float(d) for d in delta_k_list)
    bounds = tuple(tuple(c.bounds(d) for d in delta_k) for c in points)

    T = config.trials
    errors = np.empty((grid.size, T))
    for p, cfg in enumerate(points):
        errors[p] = run_trials(cfg, range(p * T, (p + 1) * T), workers=workers)
    stats = [aggregate(row) for row in errors]
    errors.setflags(write=False)
    return SweepResult(
        parameter=parameter,
        grid=grid,
        empirical_mse=np.array([s[0] for s in stats]),
        std_error=np.array([s[1] for s in stats]),
        predicted_mse=np.array([c.predicted_mse() for c in points]),
        delta_k=delta_k,
        bounds=bounds,
        squared_errors=errors,
        config=config,
    )
