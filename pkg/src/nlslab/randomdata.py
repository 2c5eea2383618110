"""Gaussian random initial data and truncated-mass statistics.

Randomness is counter based: a Philox generator keyed by (seed, sample)
emits the per-mode Gaussians in order of increasing |k|_inf shell, with a
fixed lexicographic order inside each shell.  The first modes of a larger box
are therefore exactly the modes of a smaller box, so the value attached to a
lattice point never depends on the truncation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .lattice import LatticeField, ball_mask, bracket_grid, is_dyadic

log = logging.getLogger(__name__)

PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "gauss": lambda xi2: np.exp(-xi2),
}


@dataclass(frozen=True)
class GaussianDataSpec:
    """Everything needed to reproduce one random initial datum.

    kind is ``"powerlaw"`` (f_k = g_k <k>^-alpha on <k> <= N) or
    ``"homogeneous"`` (f_k = N^-alpha phi(k/N) g_k on the whole box).
    ``K`` is the storage box; it defaults to N for power-law data and 4N for
    homogeneous data, whose profile is not compactly supported.
    """
    seed: int
    d: int
    alpha: float
    N: int
    kind: str = "powerlaw"
    profile: str = "gauss"
    K: int | None = None
    sample: int = 0

    def __post_init__(self):
        if not is_dyadic(self.N):
            raise ValueError(f"N must be dyadic, got {self.N}")
        if self.kind not in ("powerlaw", "homogeneous"):
            raise ValueError(f"unknown data kind {self.kind!r}")
        if self.kind == "homogeneous" and self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def box(self) -> int:
        if self.K is not None:
            return self.K
        return self.N if self.kind == "powerlaw" else 4 * self.N

    def with_(self, **kw) -> "GaussianDataSpec":
        d = dict(self.__dict__)
        d.update(kw)
        return GaussianDataSpec(**d)


@lru_cache(maxsize=64)
def _shell_order(d: int, K: int) -> np.ndarray:
    """Flat box indices sorted by (|k|_inf, k lexicographic)."""
    ks = np.indices((2 * K + 1,) * d).reshape(d, -1) - K
    linf = np.abs(ks).max(axis=0)
    # np.lexsort sorts by the last key first
    order = np.lexsort(tuple(ks[::-1]) + (linf,))
    order.setflags(write=False)
    return order


def gaussian_coefficients(seed: int, sample: int, d: int, K: int) -> np.ndarray:
    """Standard complex Gaussians g_k on the box |k|_inf <= K.

    Real and imaginary parts are independent N(0, 1/2), so E|g_k|^2 = 1.
    """
    n = (2 * K + 1) ** d
    rng = np.random.Generator(np.random.Philox(key=[int(seed), int(sample)]))
    z = rng.standard_normal(2 * n)
    g_sorted = (z[0::2] + 1j * z[1::2]) * np.sqrt(0.5)
    g = np.empty(n, dtype=complex)
    g[_shell_order(d, K)] = g_sorted
    return g.reshape((2 * K + 1,) * d)


def _profile_values(spec: GaussianDataSpec, K: int) -> np.ndarray:
    xi2 = (bracket_grid(spec.d, K) ** 2 - 1.0) / float(spec.N) ** 2
    return PROFILES[spec.profile](xi2)


def data_weights(spec: GaussianDataSpec) -> np.ndarray:
    """Deterministic amplitude a_k with f_k = a_k g_k."""
    K = spec.box
    if spec.kind == "powerlaw":
        w = bracket_grid(spec.d, K) ** (-float(spec.alpha))
        return np.where(ball_mask(spec.d, K, spec.N), w, 0.0)
    return float(spec.N) ** (-float(spec.alpha)) * _profile_values(spec, K)


def sample_data(spec: GaussianDataSpec) -> LatticeField:
    g = gaussian_coefficients(spec.seed, spec.sample, spec.d, spec.box)
    return LatticeField(spec.d, spec.box, data_weights(spec) * g)


def decompose_modulus(values) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Polar form g = rho * eta per coefficient.

    Exact zeros get eta = 1 and are reported in the returned boolean mask.
    """
    g = values.coeffs if isinstance(values, LatticeField) else np.asarray(values, dtype=complex)
    rho = np.abs(g)
    zero = rho == 0
    eta = np.where(zero, 1.0 + 0j, g / np.where(zero, 1.0, rho))
    if zero.any():
        log.debug("decompose_modulus: %d exact zero coefficients", int(zero.sum()))
    return rho, eta, zero


def sigma_n(d: int, alpha: float, N: int) -> float:
    """Expected truncated mass: sum over <k> <= N of <k>^(-2 alpha)."""
    if not is_dyadic(N):
        raise ValueError(f"N must be dyadic, got {N}")
    K = int(N)
    w = bracket_grid(d, K) ** (-2.0 * alpha)
    return float(np.sum(w[ball_mask(d, K, N)]))


@dataclass(frozen=True)
class MassStats:
    sigma: float
    mass: float
    centred: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "centred", self.mass - self.sigma)


def mass_stats(f: LatticeField, spec: GaussianDataSpec) -> MassStats:
    """Sample mass m_N over <k> <= N against its expectation sigma_N."""
    if spec.kind == "powerlaw":
        mask = ball_mask(f.d, f.K, spec.N)
        m = float(np.sum(np.abs(f.coeffs[mask]) ** 2))
        return MassStats(sigma_n(spec.d, spec.alpha, spec.N), m)
    w = data_weights(spec.with_(K=f.K))
    return MassStats(float(np.sum(w ** 2)), float(np.sum(np.abs(f.coeffs) ** 2)))


def ensemble(spec: GaussianDataSpec, n: int, start: int = 0) -> np.ndarray:
    """Coefficient arrays of samples start..start+n-1, stacked on axis 0."""
    return np.stack([sample_data(spec.with_(sample=start + i)).coeffs for i in range(n)])
