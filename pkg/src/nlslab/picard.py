"""No-pairing nonlinearity, first Picard iterate and the N-scaling study.

Conventions: a tuple (k_1, ..., k_p) carries signs +,-,+,...,+ and is summed
under k_1 - k_2 + ... + k_p = k.  It has a pairing when k_j = k_j' for some
odd j and even j', or k_j = k for some odd j.

The first iterate at time t is

    u1_k(t) = -i e^{-it|k|^2} sum_tuples prod(data) (e^{it Omega} - 1)/(i Omega),
    Omega   = |k|^2 - |k_1|^2 + |k_2|^2 - ... - |k_p|^2,

with the time factor equal to t when Omega = 0.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import signal, stats
from scipy.special import roots_legendre

from .lattice import (LatticeField, coeffs_to_grid, grid_to_coeffs, is_dyadic,
                      ksquared, sobolev_weights)
from .randomdata import gaussian_coefficients

log = logging.getLogger(__name__)

_MAX_TUPLES = 5 * 10 ** 7


def _signs(p: int) -> np.ndarray:
    return np.array([1 if j % 2 == 0 else -1 for j in range(p)])


def _support(f: LatticeField):
    idx = np.argwhere(f.coeffs != 0)
    return idx - f.K, f.coeffs[tuple(idx.T)]


def _tuple_chunks(n: int, p: int, chunk: int = 1 << 20):
    """All index tuples in [0, n)^p as (m, p) int arrays, chunked on the leading index."""
    if n ** p > _MAX_TUPLES:
        raise ValueError(f"{n}^{p} tuples exceed the brute-force cap")
    rest = n ** (p - 1)
    per = max(1, chunk // max(rest, 1))
    tail = np.indices((n,) * (p - 1)).reshape(p - 1, -1).T if p > 1 else np.zeros((1, 0), int)
    for start in range(0, n, per):
        heads = np.arange(start, min(n, start + per))
        yield np.concatenate([np.repeat(heads, rest)[:, None], np.tile(tail, (heads.size, 1))], axis=1)


def _pairing_free(idx: np.ndarray, kmodes: np.ndarray, kout: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Mask of tuples without pairing; idx indexes into kmodes, kout is (m, d)."""
    ok = np.ones(idx.shape[0], dtype=bool)
    odd = np.flatnonzero(zeta > 0)
    even = np.flatnonzero(zeta < 0)
    for j in odd:
        for jj in even:
            ok &= idx[:, j] != idx[:, jj]
        ok &= np.any(kmodes[idx[:, j]] != kout, axis=1)
    return ok


def no_pairing_brute(f: LatticeField, p: int) -> LatticeField:
    """Direct tuple sum; output box is |k|_inf <= pK."""
    kmodes, vals = _support(f)
    d, Kout = f.d, p * f.K
    out = np.zeros((2 * Kout + 1,) * d, dtype=complex)
    if kmodes.shape[0] == 0:
        return LatticeField(d, Kout, out)
    zeta = _signs(p)
    sv = [vals if z > 0 else np.conj(vals) for z in zeta]
    for idx in _tuple_chunks(kmodes.shape[0], p):
        kout = np.einsum("j,mjd->md", zeta, kmodes[idx])
        ok = _pairing_free(idx, kmodes, kout, zeta)
        prod = np.ones(idx.shape[0], dtype=complex)
        for j in range(p):
            prod *= sv[j][idx[:, j]]
        np.add.at(out, tuple((kout[ok] + Kout).T), prod[ok])
    return LatticeField(d, Kout, out)


def _pairing_events(p: int):
    zeta = _signs(p)
    odd = [j for j in range(p) if zeta[j] > 0]
    even = [j for j in range(p) if zeta[j] < 0]
    # node p stands for the output index k
    return [(j, jj) for j in odd for jj in even] + [(j, p) for j in odd]


def _components(p: int, events) -> list[list[int]]:
    parent = list(range(p + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a
    for a, b in events:
        parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for v in range(p + 1):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def _dilate(c: np.ndarray, n: int, d: int) -> np.ndarray:
    """H(x) = c(x/n) on the box |x|_inf <= |n| K (zero off the sublattice)."""
    K = (c.shape[0] - 1) // 2
    if n < 0:
        c = c[(slice(None, None, -1),) * d]
        n = -n
    out = np.zeros((2 * n * K + 1,) * d, dtype=complex)
    out[(slice(None, None, n),) * d] = c
    return out


def no_pairing_fast(f: LatticeField, p: int) -> LatticeField:
    """Inclusion-exclusion over pairing events on top of FFT convolutions.

    Each subset of events glues tuple slots into components that share one
    frequency; a component with net sign n contributes its pointwise product
    placed at n * v, the output component is evaluated at (1 - n_out) k.
    """
    zeta = _signs(p)
    d, K = f.d, f.K
    Kout = p * K
    a = f.coeffs
    ca = np.conj(a)
    kk = np.indices((2 * Kout + 1,) * d).reshape(d, -1).T - Kout
    total = np.zeros((2 * Kout + 1,) * d, dtype=complex)
    events = _pairing_events(p)
    for r in range(len(events) + 1):
        for sub in itertools.combinations(events, r):
            comps = _components(p, sub)
            conv = np.ones((1,) * d, dtype=complex)
            scalar = 1.0 + 0j
            out_pow, n_out = None, 0
            for comp in comps:
                slots = [v for v in comp if v < p]
                npos = sum(1 for v in slots if zeta[v] > 0)
                nneg = len(slots) - npos
                g = a ** npos * ca ** nneg
                n = npos - nneg
                if p in comp:
                    if slots:
                        out_pow, n_out = g, n
                elif n == 0:
                    scalar *= g.sum()
                else:
                    conv = signal.fftconvolve(conv, _dilate(g, n, d)) if conv.size > 1 \
                        else _dilate(g, n, d) * conv.ravel()[0]
            Kc = (conv.shape[0] - 1) // 2
            target = (1 - n_out) * kk
            inside = np.all(np.abs(target) <= Kc, axis=1)
            cval = np.zeros(kk.shape[0], dtype=complex)
            cval[inside] = conv[tuple((target[inside] + Kc).T)]
            term = scalar * cval.reshape(total.shape)
            if out_pow is not None:
                term = term * LatticeField(d, K, out_pow).resize(Kout).coeffs
            total += (-1) ** r * term
    return LatticeField(d, Kout, total)


def no_pairing_nonlinearity(f: LatticeField, p: int, method: str = "fast") -> LatticeField:
    if p < 1 or p % 2 == 0:
        raise ValueError("p must be odd")
    if method == "fast":
        return no_pairing_fast(f, p)
    if method == "brute":
        return no_pairing_brute(f, p)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------- first iterate

@dataclass(frozen=True)
class IterateSpec:
    d: int
    p: int
    N: int
    kind: str = "random"          # or "deterministic"
    t: float = 1.0
    s: float = 0.0
    seed: int = 0
    sample: int = 0

    def __post_init__(self):
        if self.p < 3 or self.p % 2 == 0:
            raise ValueError("p must be odd and at least 3")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if not is_dyadic(self.N):
            raise ValueError("N must be dyadic")
        if self.kind not in ("random", "deterministic"):
            raise ValueError(f"unknown data kind {self.kind!r}")

    @property
    def alpha(self) -> float:
        return self.s + self.d / 2


def shell(d: int, K: int, N: int) -> np.ndarray:
    """N/2 < |k| <= N (Euclidean length) on the box |k|_inf <= K."""
    k2 = ksquared(d, K)
    return (4 * k2 > N * N) & (k2 <= N * N)


def iterate_data(spec: IterateSpec) -> LatticeField:
    """Shell data N^-alpha sum_{|k|~N} c_k e^{ikx}, c_k = 1 or g_k."""
    K = spec.N
    m = shell(spec.d, K, spec.N)
    if spec.kind == "deterministic":
        c = m.astype(complex)
    else:
        c = gaussian_coefficients(spec.seed, spec.sample, spec.d, K) * m
    return LatticeField(spec.d, K, float(spec.N) ** (-spec.alpha) * c)


def omega(k, ks, zeta=None) -> int:
    """Resonance factor |k|^2 - sum zeta_j |k_j|^2."""
    ks = np.atleast_2d(np.asarray(ks))
    if ks.shape[0] == 1 and np.ndim(k) == 0:
        ks = ks.T
    zeta = _signs(ks.shape[0]) if zeta is None else np.asarray(zeta)
    k = np.atleast_1d(k)
    return int(np.sum(k * k) - np.sum(zeta * np.sum(ks * ks, axis=1)))


def _time_factor(om: np.ndarray, t: float) -> np.ndarray:
    out = np.full(om.shape, t, dtype=complex)
    nz = om != 0
    out[nz] = (np.exp(1j * t * om[nz]) - 1) / (1j * om[nz])
    return out


def first_iterate_brute(a: LatticeField, p: int, t: float, out_K: int | None = None) -> LatticeField:
    """Closed-form tuple sum of the first iterate for data coefficients a."""
    kmodes, vals = _support(a)
    d = a.d
    Kout = p * a.K if out_K is None else out_K
    out = np.zeros((2 * Kout + 1,) * d, dtype=complex)
    if kmodes.shape[0] == 0:
        return LatticeField(d, Kout, out)
    zeta = _signs(p)
    sv = [vals if z > 0 else np.conj(vals) for z in zeta]
    k2m = np.sum(kmodes ** 2, axis=1)
    for idx in _tuple_chunks(kmodes.shape[0], p):
        kout = np.einsum("j,mjd->md", zeta, kmodes[idx])
        ok = _pairing_free(idx, kmodes, kout, zeta) & np.all(np.abs(kout) <= Kout, axis=1)
        idx, kout = idx[ok], kout[ok]
        om = np.sum(kout ** 2, axis=1) - k2m[idx] @ zeta
        prod = np.ones(idx.shape[0], dtype=complex)
        for j in range(p):
            prod *= sv[j][idx[:, j]]
        np.add.at(out, tuple((kout + Kout).T), prod * _time_factor(om, t))
    k2 = ksquared(d, Kout)
    return LatticeField(d, Kout, -1j * np.exp(-1j * t * k2) * out)


def default_nodes(N: int, p: int, t: float, factor: float = 0.3) -> int:
    """Gauss-Legendre node count resolving e^{i t Omega} for |Omega| <= p N^2."""
    wmax = t * (0.5 * (p + 1)) * N * N
    return int(np.ceil(factor * wmax)) + 16


def first_iterate_quadrature(a, p: int, t: float, K: int, out_K: int,
                             nodes: int | None = None, dtype=np.complex128,
                             workers=None) -> np.ndarray:
    """Time-quadrature path: integrate e^{it'|k|^2} N_np(e^{it'Laplace} a)_k over [0, t].

    ``a`` is a coefficient array with optional leading batch axis, stored on
    |k|_inf <= K.  Returns coefficients on |k|_inf <= out_K (times ``mask``).
    p = 3 uses the closed pairing correction; other p fall back to the
    inclusion-exclusion route per node.  For p = 3 the events k_1 = k and
    k_3 = k coincide with k_3 = k_2 and k_1 = k_2 under the sum constraint,
    so removing the two pairings is enough.
    """
    a = np.asarray(a)
    d = _ndim(a, K)
    n = default_nodes(max(K, out_K), p, t) if nodes is None else int(nodes)
    x, w = roots_legendre(n)
    tn, wn = 0.5 * t * (x + 1), 0.5 * t * w
    k2 = ksquared(d, K).astype(float)
    k2o = ksquared(d, out_K).astype(float)
    acc = np.zeros(a.shape[: a.ndim - d] + (2 * out_K + 1,) * d, dtype=np.complex128)
    if p == 3:
        # a cubic product has band 3K; out_K modes stay alias free when G > 3K + out_K
        G = sfft.next_fast_len(3 * K + out_K + 1)
        ac = a.astype(dtype)
        for tj, wj in zip(tn, wn):
            ul = ac * np.exp(-1j * tj * k2).astype(dtype)
            g = coeffs_to_grid(ul, K, G, workers=workers)
            cub = grid_to_coeffs((g * np.conj(g)) * g, out_K, d, workers=workers)
            acc += (wj * np.exp(1j * tj * k2o)) * cub
        # pairing corrections are time independent in the rotating frame
        axes = tuple(range(-d, 0))
        P = np.sum(np.abs(a) ** 2, axis=axes, keepdims=True)
        corr = (-2 * P * a + np.abs(a) ** 2 * a)
        acc += t * _crop(corr, K, out_K, d)
    else:
        for tj, wj in zip(tn, wn):
            ul = a * np.exp(-1j * tj * k2)
            batch = ul.reshape((-1,) + (2 * K + 1,) * d)
            vals = np.stack([no_pairing_fast(LatticeField(d, K, b), p).resize(out_K).coeffs for b in batch])
            acc += (wj * np.exp(1j * tj * k2o)) * vals.reshape(acc.shape)
    return -1j * np.exp(-1j * t * k2o) * acc


def _ndim(a, K):
    d = 0
    for n in reversed(a.shape):
        if n != 2 * K + 1:
            break
        d += 1
    return min(d, 3)


def _crop(c, K, out_K, d):
    if out_K <= K:
        sl = tuple(slice(K - out_K, K + out_K + 1) for _ in range(d))
        return c[(Ellipsis,) + sl]
    pad = [(0, 0)] * (c.ndim - d) + [(out_K - K, out_K - K)] * d
    return np.pad(c, pad)


def first_iterate(spec: IterateSpec, method: str = "quadrature", out_K: int | None = None,
                  nodes: int | None = None) -> LatticeField:
    a = iterate_data(spec)
    oK = spec.N if out_K is None else out_K
    if method == "brute":
        return first_iterate_brute(a, spec.p, spec.t, oK)
    if method == "quadrature":
        c = first_iterate_quadrature(a.coeffs, spec.p, spec.t, a.K, oK, nodes=nodes)
        return LatticeField(spec.d, oK, c)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------- scaling study

def predicted_slope(d: int, p: int, s: float, kind: str) -> float:
    if kind == "deterministic":
        return (p - 1) * (d / 2 - s) - 2
    return -(p - 1) * s - 1


@dataclass
class ScalingResult:
    d: int
    p: int
    s: float
    kind: str
    Ns: list
    medians: list
    means: list
    slope: float
    stderr: float
    intercept: float
    prediction: float
    norms: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"d": self.d, "p": self.p, "s": self.s, "kind": self.kind, "Ns": list(self.Ns),
                "medians": list(self.medians), "means": list(self.means), "slope": self.slope,
                "stderr": self.stderr, "prediction": self.prediction}


def fit_loglog(xs, ys) -> tuple[float, float, float]:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if ok.sum() < 3:
        raise ValueError("need at least three positive points for a slope fit")
    r = stats.linregress(np.log(xs[ok]), np.log(ys[ok]))
    return float(r.slope), float(r.stderr), float(r.intercept)


def iterate_norms(d: int, p: int, s: float, N: int, kind: str, samples, seed: int = 0,
                  t: float = 1.0, dtype=np.complex64, batch: int = 16, workers=None) -> np.ndarray:
    """H^s norms of u1(t) restricted to |k| <= N for the given sample indices."""
    specs = [IterateSpec(d, p, N, kind, t, s, seed, int(i)) for i in samples]
    a = np.stack([iterate_data(sp).coeffs for sp in specs])
    inner = ksquared(d, N) <= N * N
    w = sobolev_weights(d, N, s) * inner
    out = []
    for start in range(0, a.shape[0], batch):
        c = first_iterate_quadrature(a[start:start + batch], p, t, N, N, dtype=dtype, workers=workers)
        axes = tuple(range(-d, 0))
        out.append(np.sqrt(np.sum(w ** 2 * np.abs(c) ** 2, axis=axes)))
    return np.concatenate(out)


def scaling_study(d: int, p: int, s: float, Ns, ensemble: int, kind: str, seed: int = 0,
                  t: float = 1.0, dtype=np.complex64, workers=None) -> ScalingResult:
    """Median H^s norm of u1(t) per N and its fitted log-log slope."""
    Ns = [int(N) for N in Ns]
    if len(Ns) < 3 or not all(is_dyadic(N) for N in Ns):
        raise ValueError("need at least three dyadic N values")
    n = 1 if kind == "deterministic" else int(ensemble)
    norms, med, mean = {}, [], []
    for N in Ns:
        v = iterate_norms(d, p, s, N, kind, range(n), seed, t, dtype, workers=workers)
        norms[N] = v.tolist()
        med.append(float(np.median(v)))
        mean.append(float(np.mean(v)))
        log.info("scaling %s N=%d median=%.4g", kind, N, med[-1])
    slope, err, icpt = fit_loglog(Ns, med)
    return ScalingResult(d, p, s, kind, Ns, med, mean, slope, err, icpt,
                         predicted_slope(d, p, s, kind), norms)
