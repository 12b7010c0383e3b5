"""Measurement noise channels: white, AR(1)-correlated and uniform quantisation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .model import RngLike, _as_generator

__all__ = [
    "White",
    "Ar1",
    "Quantizer",
    "NoiseModel",
    "CovarianceSummary",
    "DeterministicChannelError",
    "covariance",
    "sample_noise",
    "quantize_uniform",
    "covariance_summary",
]


class DeterministicChannelError(TypeError):
    """Raised when a covariance or sample is requested from the quantiser."""


@dataclass(frozen=True)
class White:
    m: int
    sigma2_z: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.sigma2_z >= 0:
            raise ValueError(f"sigma2_z must be nonnegative, got {self.sigma2_z}")


@dataclass(frozen=True)
class Ar1:
    """Stationary AR(1) covariance ``sigma2_z * rho**|i-j|``."""

    m: int
    sigma2_z: float
    rho: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.sigma2_z >= 0:
            raise ValueError(f"sigma2_z must be nonnegative, got {self.sigma2_z}")
        # rho = 1 makes the covariance singular
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    @cached_property
    def correlation(self) -> np.ndarray:
        lag = np.abs(np.subtract.outer(np.arange(self.m), np.arange(self.m)))
        r = np.power(float(self.rho), lag)
        r.setflags(write=False)
        return r

    @cached_property
    def correlation_cholesky(self) -> np.ndarray:
        try:
            L = np.linalg.cholesky(self.correlation)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - unreachable for rho < 1
            raise RuntimeError(f"Cholesky of AR(1) correlation failed (m={self.m}, rho={self.rho})") from exc
        L.setflags(write=False)
        return L


@dataclass(frozen=True)
class Quantizer:
    """Unbounded mid-tread uniform scalar quantiser with step ``delta``."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def surrogate_variance(self) -> float:
        return self.delta**2 / 12.0


NoiseModel = Union[White, Ar1, Quantizer]


@dataclass(frozen=True)
class CovarianceSummary:
    trace: float
    lambda_max: float


def covariance(model: NoiseModel) -> np.ndarray:
    if isinstance(model, White):
        return model.sigma2_z * np.eye(model.m)
    if isinstance(model, Ar1):
        return model.sigma2_z * model.correlation
    if isinstance(model, Quantizer):
        raise DeterministicChannelError("quantizer is a deterministic channel and has no covariance matrix")
    raise TypeError(f"unknown noise model {model!r}")


def sample_noise(model: NoiseModel, rng: RngLike) -> np.ndarray:
    """Draw one noise vector.

    White noise is ``sqrt(sigma2_z) * w``; AR(1) noise is
    ``sqrt(sigma2_z) * L w`` with ``L`` the lower Cholesky factor of the
    correlation matrix, so ``sigma2_z = 0`` needs no special case.
    """
    if isinstance(model, Quantizer):
        raise DeterministicChannelError("quantization error is a function of the measurements; use quantize_uniform")
    gen = _as_generator(rng)
    w = gen.standard_normal(model.m)
    scale = np.sqrt(model.sigma2_z)
    if isinstance(model, White):
        return scale * w
    if isinstance(model, Ar1):
        return scale * (model.correlation_cholesky @ w)
    raise TypeError(f"unknown noise model {model!r}")


def quantize_uniform(y, delta: float) -> np.ndarray:
    """Mid-tread quantisation ``delta * round(y / delta)``, ties away from zero."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    y = np.asarray(y, dtype=float)
    # np.round is half-to-even; build half-away-from-zero explicitly
    return delta * (np.sign(y) * np.floor(np.abs(y) / delta + 0.5))


def covariance_summary(model: NoiseModel, m: Optional[int] = None) -> CovarianceSummary:
    """Trace and largest eigenvalue of the noise covariance.

    For a :class:`Quantizer` the high-rate surrogate ``delta**2 / 12 * I_m``
    is used, which needs the measurement count ``m``.
    """
    if isinstance(model, Quantizer):
        if m is None:
            raise ValueError("covariance_summary of a Quantizer needs the measurement count m")
        v = model.surrogate_variance
        return CovarianceSummary(trace=m * v, lambda_max=v)
    if isinstance(model, White):
        return CovarianceSummary(trace=model.m * model.sigma2_z, lambda_max=float(model.sigma2_z))
    if isinstance(model, Ar1):
        lam = float(np.linalg.eigvalsh(model.correlation)[-1])
        return CovarianceSummary(trace=model.m * model.sigma2_z, lambda_max=model.sigma2_z * lam)
    raise TypeError(f"unknown noise model {model!r}")
