"""Wick-ordered monomials and the mean-field gauge phase.

W^{2r}(u)   = sum_j (-1)^{r-j} C(r,j)   r!/j! sigma^{r-j} |u|^{2j}
W^{2r+1}(u) = sum_j (-1)^{r-j} C(r+1,j+1) r!/j! sigma^{r-j} |u|^{2j} u

With sigma = 0 these reduce to |u|^{2r} and |u|^{2r} u.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .lattice import (LatticeField, alias_free_size, ball_mask, coeffs_to_grid,
                      grid_to_coeffs, is_dyadic)


@dataclass(frozen=True)
class WickContext:
    p: int
    sigma: float
    N: int

    def __post_init__(self):
        if self.p < 3 or self.p % 2 == 0:
            raise ValueError("p must be odd and at least 3")
        if not is_dyadic(self.N):
            raise ValueError("N must be dyadic")


def wick_coefficients(q: int, sigma: float) -> list[float]:
    """c_j such that W^q(u) = sum_j c_j |u|^{2j} (times u when q is odd)."""
    if q < 1:
        raise ValueError("degree must be at least 1")
    r = q // 2
    top = r + 1 if q % 2 else r
    return [(-1) ** (r - j) * comb(top, j + (q % 2)) * factorial(r) / factorial(j)
            * sigma ** (r - j) for j in range(r + 1)]


def wick_eigenvalue(q: int, amp2: float, sigma: float) -> float:
    """lambda with W^q(c e^{ikx}) = lambda c e^{ikx} for odd q and |c|^2 = amp2."""
    if q % 2 == 0:
        raise ValueError("eigenvalue form only exists for odd degree")
    return float(sum(c * amp2 ** j for j, c in enumerate(wick_coefficients(q, sigma))))


def wick_apply(u, q: int, sigma: float):
    """Pointwise W^q(u) on grid values (Horner in |u|^2)."""
    u = np.asarray(u)
    a = (u * np.conj(u)).real
    cs = wick_coefficients(q, sigma)
    acc = np.full(a.shape, cs[-1], dtype=a.dtype)
    for c in reversed(cs[:-1]):
        acc = acc * a + c
    return acc * u if q % 2 else acc


def wick_nonlinearity(f: LatticeField, p: int, sigma: float, N: int | None = None,
                      grid_size: int | None = None) -> LatticeField:
    """Fourier coefficients of W^p(f), optionally followed by Pi_N.

    The default grid is alias free for the retained band |k|_inf <= K.
    """
    G = alias_free_size(f.K, p) if grid_size is None else int(grid_size)
    if G < (p + 1) * f.K + 1:
        raise ValueError(f"grid size {G} aliases a degree-{p} product at band {f.K}")
    u = coeffs_to_grid(f.coeffs, f.K, G)
    out = grid_to_coeffs(wick_apply(u, p, sigma), f.K, f.d)
    if N is not None:
        out = np.where(ball_mask(f.d, f.K, N), out, 0)
    return LatticeField(f.d, f.K, out)


def wick_mean(f: LatticeField, q: int, sigma: float) -> complex:
    """Spatial average of W^q(f); the grid only has to resolve the zero mode."""
    G = alias_free_size(f.K, q - 1)
    u = coeffs_to_grid(f.coeffs, f.K, G)
    return complex(np.mean(wick_apply(u, q, sigma)))


@dataclass(frozen=True)
class GaugePhase:
    """theta(t) sampled at snapshot times, linear in between."""
    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


def gauge_phase(traj, p: int, sigma: float) -> GaugePhase:
    """theta(t) = (p+1)/2 * int_0^t mean W^{p-1}(u) dt' by the trapezoid rule.

    ``traj`` needs ``times`` and ``fields`` (or ``means`` of W^{p-1} already
    evaluated per snapshot).
    """
    times = np.asarray(traj.times, dtype=float)
    if times.size < 2:
        raise ValueError("gauge phase needs at least two snapshots")
    means = getattr(traj, "means", None)
    if means is None:
        means = np.array([wick_mean(f, p - 1, sigma).real for f in traj.fields])
    theta = 0.5 * (p + 1) * cumulative_trapezoid(np.asarray(means, float), times, initial=0.0)
    return GaugePhase(times, theta)
