"""Truncated Fourier lattice on the torus [0, 2pi)^d.

A field is stored densely on the box |k|_inf <= K with the zero mode in the
centre of every axis, so ``coeffs[k + K]`` is the amplitude of exp(i k.x).
Projections are masks on that box; conversion to and from collocation grids
goes through scipy.fft.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.fft as sfft

_RTOL_ROUNDTRIP = 1e-12


def is_dyadic(N) -> bool:
    """True for N = 1, 2, 4, ...  (integer powers of two)."""
    try:
        n = int(N)
    except (TypeError, ValueError):
        return False
    return n == N and n >= 1 and (n & (n - 1)) == 0


def bracket(k) -> float | np.ndarray:
    """Japanese bracket (1 + |k|^2)^(1/2).

    ``k`` may be a scalar (d=1), a single vector, or an array whose last axis
    holds the components.
    """
    k = np.asarray(k, dtype=float)
    if k.ndim == 0:
        return float(np.sqrt(1.0 + k * k))
    out = np.sqrt(1.0 + np.sum(k * k, axis=-1))
    return float(out) if out.ndim == 0 else out


def wavenumbers(d: int, K: int) -> list[np.ndarray]:
    """Open mesh of integer wavenumbers for the box |k|_inf <= K."""
    ax = np.arange(-K, K + 1)
    return list(np.meshgrid(*([ax] * d), indexing="ij", sparse=True))


def ksquared(d: int, K: int) -> np.ndarray:
    """|k|^2 on the dense box, as integers."""
    ks = wavenumbers(d, K)
    out = np.zeros((2 * K + 1,) * d, dtype=np.int64)
    for kk in ks:
        out = out + kk * kk
    return out


def bracket_grid(d: int, K: int) -> np.ndarray:
    return np.sqrt(1.0 + ksquared(d, K))


def ball_mask(d: int, K: int, N: float) -> np.ndarray:
    """Boolean mask of <k> <= N on the box (exact integer comparison)."""
    # <k> <= N  <=>  1 + |k|^2 <= N^2
    return 1 + ksquared(d, K) <= N * N


def shell_mask(d: int, K: int, N: int) -> np.ndarray:
    """Mask of N/2 < <k> <= N, with the convention that Delta_1 = Pi_1."""
    inner = ball_mask(d, K, N)
    if N <= 1:
        return inner
    return inner & ~ball_mask(d, K, N / 2)


@dataclass(frozen=True)
class LatticeField:
    """Fourier coefficients of a band-limited field on T^d.

    The coefficient array is made read-only on construction.
    """
    d: int
    K: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.K < 0:
            raise ValueError("band limit must be nonnegative")
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * self.K + 1,) * self.d:
            raise ValueError(f"coefficient array has shape {c.shape}, "
                             f"expected {(2 * self.K + 1,) * self.d}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, d: int, K: int) -> "LatticeField":
        return cls(d, K, np.zeros((2 * K + 1,) * d, dtype=complex))

    @classmethod
    def from_modes(cls, d: int, K: int, modes: dict) -> "LatticeField":
        """Build a field from ``{k: amplitude}`` with k an int or tuple."""
        c = np.zeros((2 * K + 1,) * d, dtype=complex)
        for k, a in modes.items():
            kk = (k,) if np.isscalar(k) else tuple(k)
            if len(kk) != d or max(abs(x) for x in kk) > K:
                raise ValueError(f"mode {k} outside the box |k|_inf <= {K}")
            c[tuple(x + K for x in kk)] = a
        return cls(d, K, c)

    def __getitem__(self, k):
        kk = (k,) if np.isscalar(k) else tuple(k)
        if max(abs(x) for x in kk) > self.K:
            return 0j
        return complex(self.coeffs[tuple(x + self.K for x in kk)])

    def __add__(self, other: "LatticeField") -> "LatticeField":
        a, b = _common(self, other)
        return LatticeField(self.d, a.K, a.coeffs + b.coeffs)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        a, b = _common(self, other)
        return LatticeField(self.d, a.K, a.coeffs - b.coeffs)

    def scale(self, c: complex) -> "LatticeField":
        return LatticeField(self.d, self.K, c * self.coeffs)

    def conj(self) -> "LatticeField":
        """Coefficients of the complex conjugate field: (conj u)_k = conj(u_{-k})."""
        c = np.conj(self.coeffs)[(slice(None, None, -1),) * self.d]
        return LatticeField(self.d, self.K, c)

    def resize(self, K: int) -> "LatticeField":
        """Embed into (or crop to) the box |k|_inf <= K."""
        if K == self.K:
            return self
        out = np.zeros((2 * K + 1,) * self.d, dtype=complex)
        m = min(K, self.K)
        src = tuple(slice(self.K - m, self.K + m + 1) for _ in range(self.d))
        dst = tuple(slice(K - m, K + m + 1) for _ in range(self.d))
        out[dst] = self.coeffs[src]
        return LatticeField(self.d, K, out)

    def mean(self) -> complex:
        """Spatial average over the torus, i.e. the zeroth coefficient."""
        return complex(self.coeffs[(self.K,) * self.d])

    def to_csv(self) -> str:
        """Flat dump with one row per stored mode: k_1..k_d, re, im."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"k{i + 1}" for i in range(self.d)] + ["re", "im"])
        for idx in np.ndindex(*self.coeffs.shape):
            v = self.coeffs[idx]
            w.writerow([i - self.K for i in idx] + [repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LatticeField":
        rows = list(csv.reader(io.StringIO(text)))
        d = len(rows[0]) - 2
        body = rows[1:]
        K = max((max(abs(int(x)) for x in r[:d]) for r in body), default=0)
        modes = {tuple(int(x) for x in r[:d]): complex(float(r[d]), float(r[d + 1])) for r in body}
        return cls.from_modes(d, K, modes)


def _common(a: LatticeField, b: LatticeField):
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    K = max(a.K, b.K)
    return a.resize(K), b.resize(K)


def project(f: LatticeField, N, kind: str = "Pi") -> LatticeField:
    """Sharp Littlewood-Paley projection.

    ``Pi`` keeps <k> <= N, ``Delta`` keeps N/2 < <k> <= N (Delta_1 = Pi_1).
    """
    if not is_dyadic(N):
        raise ValueError(f"N must be a dyadic integer >= 1, got {N!r}")
    if kind == "Pi":
        mask = ball_mask(f.d, f.K, N)
    elif kind == "Delta":
        mask = shell_mask(f.d, f.K, int(N))
    else:
        raise ValueError(f"unknown projection kind {kind!r}")
    return LatticeField(f.d, f.K, np.where(mask, f.coeffs, 0))


def sobolev_norm(f: LatticeField, s: float) -> float:
    w = bracket_grid(f.d, f.K) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def sobolev_weights(d: int, K: int, s: float) -> np.ndarray:
    return bracket_grid(d, K) ** s


def alias_free_size(K: int, degree: int) -> int:
    """Smallest FFT-friendly grid with at least (degree+1)K + 1 points."""
    return sfft.next_fast_len((degree + 1) * K + 1)


def _check_grid(K: int, G: int):
    if G < 2 * K + 1:
        raise ValueError(f"grid size {G} too small for band limit {K} (need >= {2 * K + 1})")


def coeffs_to_grid(c: np.ndarray, K: int, G: int, workers=None) -> np.ndarray:
    """Raw-array synthesis: u(x_j) = sum_k c_k exp(i k.x_j) on a G^d grid.

    Leading axes beyond the last d are treated as a batch; d is inferred
    from the trailing axes whose length is 2K+1.
    """
    _check_grid(K, G)
    d = _trailing_dim(c, K)
    batch = c.shape[: c.ndim - d]
    spec = np.zeros(batch + (G,) * d, dtype=c.dtype)
    spec[(Ellipsis,) + _wrap_slices(K, G, d)] = _split_box(c, K, d)
    axes = tuple(range(-d, 0))
    return sfft.ifftn(spec, axes=axes, norm="forward", workers=workers)


def grid_to_coeffs(u: np.ndarray, K: int, d: int, workers=None) -> np.ndarray:
    """Raw-array analysis; inverse of :func:`coeffs_to_grid` on the box."""
    G = u.shape[-1]
    _check_grid(K, G)
    axes = tuple(range(-d, 0))
    spec = sfft.fftn(u, axes=axes, norm="forward", workers=workers)
    return _merge_box(spec[(Ellipsis,) + _wrap_slices(K, G, d)], K, d)


def _trailing_dim(c, K):
    d = 0
    for n in reversed(c.shape):
        if n != 2 * K + 1:
            break
        d += 1
    if d == 0:
        raise ValueError("array has no trailing axes of length 2K+1")
    return d


def _wrap_slices(K, G, d):
    # index set {0..K} U {G-K..G-1} along every axis, as an np.ix_-free fancy index
    idx = np.concatenate([np.arange(0, K + 1), np.arange(G - K, G)])
    return tuple(idx.reshape((-1,) + (1,) * (d - 1 - i)) for i in range(d))


def _split_box(c, K, d):
    # reorder each trailing axis from [-K..K] to [0..K, -K..-1]
    order = np.concatenate([np.arange(K, 2 * K + 1), np.arange(0, K)])
    for i in range(d):
        c = np.take(c, order, axis=c.ndim - d + i)
    return c


def _merge_box(c, K, d):
    order = np.concatenate([np.arange(K + 1, 2 * K + 1), np.arange(0, K + 1)])
    for i in range(d):
        c = np.take(c, order, axis=c.ndim - d + i)
    return c


def to_grid(f: LatticeField, grid_size: int) -> np.ndarray:
    """Values of f on the uniform grid x_j = 2 pi j / G in each dimension."""
    return coeffs_to_grid(f.coeffs, f.K, grid_size)


def from_grid(u: np.ndarray, K: int) -> LatticeField:
    u = np.asarray(u, dtype=complex)
    return LatticeField(u.ndim, K, grid_to_coeffs(u, K, u.ndim))


def grid_points(G: int, d: int) -> list[np.ndarray]:
    x = 2 * np.pi * np.arange(G) / G
    return list(np.meshgrid(*([x] * d), indexing="ij", sparse=True))


def convolve_direct(fields: Iterable[tuple[LatticeField, int]]) -> LatticeField:
    """Brute-force Fourier coefficients of a product of fields.

    ``fields`` is a sequence of (field, sign); sign -1 means the conjugate.
    Cost is the product of box sizes, so keep this to small oracles.
    """
    fields = list(fields)
    d = fields[0][0].d
    acc = LatticeField.from_modes(d, 0, {(0,) * d: 1.0})
    for f, sgn in fields:
        g = f if sgn > 0 else f.conj()
        acc = _conv2(acc, g)
    return acc


def _conv2(a: LatticeField, b: LatticeField) -> LatticeField:
    from scipy.signal import convolve
    K = a.K + b.K
    return LatticeField(a.d, K, convolve(a.coeffs, b.coeffs, method="direct"))
