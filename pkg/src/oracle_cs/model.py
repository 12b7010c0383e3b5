"""Signals, bases and Gaussian sensing matrices.

Everything here is dense numpy. Arrays handed out by these objects are marked
read-only so the dataclasses can be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Union

import numpy as np

__all__ = [
    "Rng",
    "Basis",
    "SparseSignal",
    "SensingSetup",
    "dct_basis",
    "gen_sparse_signal",
    "gen_sensing_matrix",
    "make_setup",
    "measure",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Rng:
    """Reproducible random stream identified by ``(seed, stream)``.

    Each stream is an independent Philox generator keyed through
    ``numpy.random.SeedSequence(seed, spawn_key=(stream, *sub))``. Normal
    variates come from numpy's ziggurat sampler, so sequences are stable for a
    given numpy release on every platform.
    """

    seed: int
    stream: int = 0
    sub: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream, *self.sub):
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"seed/stream components must be 64-bit unsigned, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *map(int, self.sub)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "Rng":
        return Rng(self.seed, self.stream, (*self.sub, int(index)))


RngLike = Union[Rng, np.random.Generator]


def _as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, Rng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected Rng or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True, eq=False)
class Basis:
    """Orthonormal n x n sparsity basis; columns are the atoms."""

    matrix: np.ndarray

    def __post_init__(self):
        a = _frozen(self.matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"basis must be square, got shape {a.shape}")
        object.__setattr__(self, "matrix", a)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@lru_cache(maxsize=16)
def _dct_matrix(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    c = np.full((n, 1), np.sqrt(2.0 / n))
    c[0, 0] = np.sqrt(1.0 / n)
    return _frozen(c * np.cos(np.pi * (2 * j + 1) * k / (2 * n)))


def dct_basis(n: int) -> Basis:
    """Orthonormal DCT-II matrix, ``Psi[k, j] = c_k cos(pi (2j+1) k / 2n)``.

    Built by direct evaluation of the formula (O(n^2)); results are cached
    per ``n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Basis(_dct_matrix(int(n)))


@dataclass(frozen=True, eq=False)
class SparseSignal:
    """K-sparse coefficient vector ``theta`` and its synthesis ``x = Psi theta``."""

    theta: np.ndarray
    support: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta))
        object.__setattr__(self, "x", _frozen(self.x))
        s = np.array(self.support, dtype=np.intp)
        s.setflags(write=False)
        object.__setattr__(self, "support", s)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def k(self) -> int:
        return self.support.shape[0]


def _partial_fisher_yates(gen: np.random.Generator, n: int, k: int) -> np.ndarray:
    idx = np.arange(n)
    for i in range(k):
        j = int(gen.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return np.sort(idx[:k])


def gen_sparse_signal(n: int, k: int, sigma2_theta: float, basis: Basis, rng: RngLike) -> SparseSignal:
    """Draw a uniformly placed K-sparse signal with i.i.d. N(0, sigma2_theta) nonzeros.

    The support is the first ``k`` slots of a partial Fisher-Yates shuffle of
    ``range(n)``, returned sorted. Nonzero values are redrawn in the
    (probability zero) event one comes out exactly 0 so the signal always has
    exactly ``k`` nonzeros.
    """
    if not 0 < k < n:
        raise ValueError(f"sparsity must satisfy 0 < k < n, got k={k}, n={n}")
    if not sigma2_theta > 0:
        raise ValueError(f"sigma2_theta must be positive, got {sigma2_theta}")
    if basis.n != n:
        raise ValueError(f"basis dimension {basis.n} does not match n={n}")
    gen = _as_generator(rng)
    support = _partial_fisher_yates(gen, n, k)
    values = np.sqrt(sigma2_theta) * gen.standard_normal(k)
    while np.any(values == 0.0):
        zero = values == 0.0
        values[zero] = np.sqrt(sigma2_theta) * gen.standard_normal(int(zero.sum()))
    theta = np.zeros(n)
    theta[support] = values
    return SparseSignal(theta=theta, support=support, x=basis.matrix @ theta)


def gen_sensing_matrix(m: int, n: int, sigma2_phi: float, rng: RngLike) -> np.ndarray:
    """m x n matrix with i.i.d. N(0, sigma2_phi) entries."""
    if not 0 < m < n:
        raise ValueError(f"sensing matrix needs 0 < m < n, got m={m}, n={n}")
    if not sigma2_phi > 0:
        raise ValueError(f"sigma2_phi must be positive, got {sigma2_phi}")
    gen = _as_generator(rng)
    return _frozen(np.sqrt(sigma2_phi) * gen.standard_normal((m, n)))


@dataclass(frozen=True, eq=False)
class SensingSetup:
    """Sensing matrix ``phi`` together with the basis it acts on.

    ``u = phi @ basis.matrix`` is computed lazily. :meth:`u_columns` always
    multiplies against the selected basis columns only, so its result does not
    depend on whether ``u`` has been materialised.
    """

    phi: np.ndarray
    basis: Basis
    sigma2_phi: float

    def __post_init__(self):
        phi = _frozen(self.phi)
        if phi.ndim != 2:
            raise ValueError("phi must be a 2-D array")
        if phi.shape[1] != self.basis.n:
            raise ValueError(f"phi has {phi.shape[1]} columns but basis dimension is {self.basis.n}")
        object.__setattr__(self, "phi", phi)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @cached_property
    def u(self) -> np.ndarray:
        return _frozen(self.phi @ self.basis.matrix)

    def u_columns(self, support) -> np.ndarray:
        return self.phi @ self.basis.matrix[:, support]


def make_setup(m: int, n: int, sigma2_phi: float, basis: Basis, rng: RngLike) -> SensingSetup:
    return SensingSetup(gen_sensing_matrix(m, n, sigma2_phi, rng), basis, sigma2_phi)


def measure(setup: SensingSetup, x, z) -> np.ndarray:
    """Noisy measurements ``y = phi x + z``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (setup.n,):
        raise ValueError(f"x must have shape ({setup.n},), got {x.shape}")
    if z.shape != (setup.m,):
        raise ValueError(f"z must have shape ({setup.m},), got {z.shape}")
    return setup.phi @ x + z
