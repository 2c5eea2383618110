"""Exact lattice counts for the cubic and chained resonance sets, plus the Schur test.

The cubic set fixes (k_1, k_2) in their windows; k_3 follows from the
linear constraint.  For speed the last coordinate of k_2 is not enumerated
but solved from the quadratic constraint, which leaves an integer equation
a x^2 + b x + e = 0.
"""
from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from math import isqrt
from typing import Sequence

import numpy as np
from scipy import stats

from .tensorlab.tensor import LabeledTensor, _check_sets, _flatten

log = logging.getLogger(__name__)

VOLUME_CAP = 10 ** 8


def ball_points(center, radius: float, d: int) -> np.ndarray:
    """Integer points k with |k - center| <= radius (Euclidean), as (n, d)."""
    c = np.zeros(d, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64).reshape(d)
    r = int(np.floor(radius))
    pts = np.indices((2 * r + 1,) * d).reshape(d, -1).T - r
    pts = pts[np.sum(pts * pts, axis=1) <= radius * radius]
    return pts + c


@dataclass(frozen=True)
class CountingInstance:
    """Signs, targets and windows of a resonance set.

    ``radii[j]`` and ``centers[j]`` bound k_j directly for the cubic set and
    the prefix sum ending at j for the chained set; ``blocks`` lists the
    chains (0-based indices) and is ignored by the cubic count.
    """
    d: int
    signs: tuple
    m: tuple
    Gamma: int
    radii: tuple
    centers: tuple | None = None
    blocks: tuple = ()
    quadratic: bool = True

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")
        if any(r < 1 for r in self.radii):
            raise ValueError("radii must be at least 1")
        if len(self.m) != self.d:
            raise ValueError("target m has the wrong dimension")
        flat = [j for b in self.blocks for j in b]
        if len(flat) != len(set(flat)):
            raise ValueError("blocks must be disjoint")

    def center(self, j: int) -> np.ndarray:
        if self.centers is None:
            return np.zeros(self.d, dtype=np.int64)
        return np.asarray(self.centers[j], dtype=np.int64)


def _pair_ok(ks: Sequence[np.ndarray], signs) -> np.ndarray:
    ok = np.ones(ks[0].shape[0], dtype=bool)
    for i, j in itertools.combinations(range(len(ks)), 2):
        if signs[i] != signs[j]:
            ok &= np.any(ks[i] != ks[j], axis=1)
    return ok


def enumerate_cubic(inst: CountingInstance) -> int:
    """#{(k1,k2,k3): sum z_j k_j = m, sum z_j |k_j|^2 = Gamma, |k_j - m_j| <= M_j (j=1,2), no pairing}."""
    z1, z2, z3 = inst.signs
    d = inst.d
    P1 = ball_points(inst.center(0), inst.radii[0], d)
    P2 = ball_points(inst.center(1), inst.radii[1], d)
    m = np.asarray(inst.m, dtype=np.int64)
    if not inst.quadratic:
        if P1.shape[0] * P2.shape[0] > VOLUME_CAP:
            raise ValueError("window volume above the enumeration cap")
        total = 0
        for k1 in P1:
            k2 = P2
            k3 = z3 * (m - z1 * k1 - z2 * k2)
            total += int(np.sum(_pair_ok([np.broadcast_to(k1, k2.shape), k2, k3], inst.signs)))
        return total
    # enumerate k1 and all but the last coordinate of k2; solve for the last one
    r2 = int(np.floor(inst.radii[1]))
    c2 = inst.center(1)
    if d == 1:
        pre = np.zeros((1, 0), dtype=np.int64)
    else:
        pre = (np.arange(-r2, r2 + 1) + c2[0]).reshape(-1, 1)
    if P1.shape[0] * pre.shape[0] > VOLUME_CAP:
        raise ValueError("enumeration volume above the cap")
    total = 0
    for k1 in P1:
        c = m - z1 * k1                         # z2 k2 + z3 k3 = c
        # z1|k1|^2 + z2|k2|^2 + z3|c - z2 k2|^2 = Gamma, expanded in k2
        a = z2 + z3
        base = z1 * int(k1 @ k1) + z3 * int(c @ c) - inst.Gamma
        # contribution of the fixed prefix coordinates
        y = pre
        cy = c[: d - 1]
        e = base + a * np.sum(y * y, axis=1) - 2 * z3 * z2 * (y @ cy)
        b = np.full(y.shape[0], -2 * z3 * z2 * int(c[-1]), dtype=np.int64)
        total += _count_last(a, b, e, y, k1, c, inst)
    return total


def _count_last(a, b, e, y, k1, c, inst) -> int:
    """Integer roots x of a x^2 + b x + e = 0 for each prefix row, then window and pairing checks."""
    z1, z2, z3 = inst.signs
    rows, xs = [], []
    if a == 0:
        lin = b != 0
        num = -e[lin]
        den = b[lin]
        good = num % den == 0
        idx = np.flatnonzero(lin)[good]
        rows.append(idx)
        xs.append(num[good] // den[good])
        degen = np.flatnonzero((b == 0) & (e == 0))
        if degen.size:
            r2 = int(np.floor(inst.radii[1]))
            cx = int(inst.center(1)[-1])
            span = np.arange(cx - r2, cx + r2 + 1)
            rows.append(np.repeat(degen, span.size))
            xs.append(np.tile(span, degen.size))
    else:
        disc = b * b - 4 * a * e
        ok = np.flatnonzero(disc >= 0)
        for i in ok:
            s = isqrt(int(disc[i]))
            if s * s != disc[i]:
                continue
            for root_num in {-int(b[i]) + s, -int(b[i]) - s}:
                if root_num % (2 * a) == 0:
                    rows.append(np.array([i]))
                    xs.append(np.array([root_num // (2 * a)]))
    if not rows:
        return 0
    rows = np.concatenate(rows)
    xs = np.concatenate(xs)
    if rows.size == 0:
        return 0
    k2 = np.concatenate([y[rows], xs[:, None]], axis=1)
    diff = k2 - inst.center(1)
    inwin = np.sum(diff * diff, axis=1) <= inst.radii[1] ** 2
    k2 = k2[inwin]
    if k2.shape[0] == 0:
        return 0
    k3 = z3 * (c - z2 * k2)
    k1b = np.broadcast_to(k1, k2.shape)
    return int(np.sum(_pair_ok([k1b, k2, k3], inst.signs)))


def cubic_brute(inst: CountingInstance) -> int:
    """Reference count by direct enumeration of (k1, k2); small windows only."""
    z1, z2, z3 = inst.signs
    P1 = ball_points(inst.center(0), inst.radii[0], inst.d)
    P2 = ball_points(inst.center(1), inst.radii[1], inst.d)
    m = np.asarray(inst.m)
    n = 0
    for k1 in P1:
        for k2 in P2:
            k3 = z3 * (m - z1 * k1 - z2 * k2)
            if inst.quadratic and z1 * k1 @ k1 + z2 * k2 @ k2 + z3 * k3 @ k3 != inst.Gamma:
                continue
            ks = [k1, k2, k3]
            if any(inst.signs[i] != inst.signs[j] and np.array_equal(ks[i], ks[j])
                   for i, j in itertools.combinations(range(3), 2)):
                continue
            n += 1
    return n


# ---------------------------------------------------------------- chained set

def _chain_points(inst: CountingInstance):
    """Per block: list of ball point arrays for the prefix sums w_1..w_b."""
    return [[ball_points(inst.center(j), inst.radii[j], inst.d) for j in block] for block in inst.blocks]


def _block_tuples(inst: CountingInstance, block, balls) -> np.ndarray:
    """All prefix-sum tuples of one block as k values, shape (n, len(block), d)."""
    sizes = [b.shape[0] for b in balls]
    n = int(np.prod(sizes, dtype=np.int64))
    if n > VOLUME_CAP:
        raise ValueError("block enumeration above the cap")
    idx = np.indices(sizes).reshape(len(sizes), -1)
    w = np.stack([balls[i][idx[i]] for i in range(len(sizes))], axis=1)   # (n, b, d)
    prev = np.concatenate([np.zeros_like(w[:, :1]), w[:, :-1]], axis=1)
    z = np.array([inst.signs[j] for j in block]).reshape(1, -1, 1)
    return z * (w - prev)


def enumerate_basic(inst: CountingInstance) -> int:
    """#{k_A: sum z_j |k_j|^2 = Gamma, every block prefix sum in its window, no pairing}."""
    A = [j for b in inst.blocks for j in b]
    if not A:
        return int(inst.Gamma == 0)
    if len(A) > 7:
        raise ValueError("too many indices for exact enumeration")
    balls = _chain_points(inst)
    parts = [_block_tuples(inst, b, bl) for b, bl in zip(inst.blocks, balls)]
    sizes = [p.shape[0] for p in parts]
    if int(np.prod(sizes, dtype=np.int64)) > VOLUME_CAP:
        raise ValueError("instance too large for exact enumeration")
    signs = [inst.signs[j] for j in A]
    z = np.array(signs)
    total = 0
    # loop over all blocks but the last, vectorise the last one
    head = list(itertools.product(*[range(s) for s in sizes[:-1]]))
    last = parts[-1]
    for combo in head:
        ks = [parts[u][i] for u, i in enumerate(combo)]
        fixed = np.concatenate(ks, axis=0) if ks else np.zeros((0, inst.d), dtype=np.int64)
        full = np.concatenate([np.broadcast_to(fixed, (last.shape[0],) + fixed.shape), last], axis=1)
        q = np.einsum("j,njd,njd->n", z, full, full)
        sel = full[q == inst.Gamma]
        if sel.shape[0]:
            total += int(np.sum(_pair_ok([sel[:, j] for j in range(len(A))], signs)))
    return total


def basic_meet_in_middle(inst: CountingInstance) -> int:
    """Two-pass oracle for a single chain: bucket the first half by (w_split, partial quadratic sum)."""
    if len(inst.blocks) != 1:
        raise ValueError("oracle handles one block")
    block = list(inst.blocks[0])
    if len(block) < 2:
        return enumerate_basic(inst)
    h = len(block) // 2
    d = inst.d
    balls = [ball_points(inst.center(j), inst.radii[j], d) for j in block]
    z = [inst.signs[j] for j in block]
    buckets: dict = defaultdict(list)
    for ws in itertools.product(*[map(tuple, b) for b in balls[:h]]):
        ks, prev = [], (0,) * d
        for w, s in zip(ws, z[:h]):
            ks.append(tuple(s * (a - b) for a, b in zip(w, prev)))
            prev = w
        q = sum(s * sum(x * x for x in k) for s, k in zip(z[:h], ks))
        buckets[(ws[-1], q)].append(ks)
    count = 0
    for start in set(key[0] for key in buckets):
        for ws in itertools.product(*[map(tuple, b) for b in balls[h:]]):
            ks, prev = [], start
            for w, s in zip(ws, z[h:]):
                ks.append(tuple(s * (a - b) for a, b in zip(w, prev)))
                prev = w
            q = sum(s * sum(x * x for x in k) for s, k in zip(z[h:], ks))
            for first in buckets.get((start, inst.Gamma - q), ()):
                allk = first + ks
                if not any(z[i] != z[j] and allk[i] == allk[j]
                           for i, j in itertools.combinations(range(len(allk)), 2)):
                    count += 1
    return count


# ---------------------------------------------------------------- fits and Schur

@dataclass(frozen=True)
class ExponentFit:
    slope: float
    stderr: float
    dropped: tuple = field(default_factory=tuple)


def fit_exponent(Ms, counts) -> ExponentFit:
    """Least-squares slope of log count against log M; zero counts are dropped."""
    Ms, counts = np.asarray(Ms, float), np.asarray(counts, float)
    keep = counts > 0
    if not keep.any():
        raise ValueError("all counts are zero")
    dropped = tuple(float(M) for M in Ms[~keep])
    if dropped:
        log.info("fit_exponent: dropping zero counts at M=%s", dropped)
    if keep.sum() < 3:
        raise ValueError("need at least three nonzero counts")
    r = stats.linregress(np.log(Ms[keep]), np.log(counts[keep]))
    return ExponentFit(float(r.slope), float(r.stderr), dropped)


def schur_bound(h: LabeledTensor, rows, cols) -> float:
    """sqrt(max column sum) * sqrt(max row sum) of |h| as a map k_rows -> k_cols, sup over the rest."""
    B, C = _check_sets(h, rows, cols)
    M = np.abs(_flatten(h, B, C))
    if M.size == 0:
        return 0.0
    col = M.sum(axis=1).max(axis=1)      # for each frozen slice, max over columns of sum over rows
    row = M.sum(axis=2).max(axis=1)
    return float(np.max(np.sqrt(col * row)))


def cubic_tensor(M: int, signs=(1, -1, 1), Gamma: int = 0) -> LabeledTensor:
    """Indicator h_{k k1 k2 k3} of k = sum z_j k_j, Omega = Gamma, no pairing, on d = 1 windows |k_j| <= M."""
    from .tensorlab.tensor import Axis
    n = 2 * M + 1
    r = np.arange(-M, M + 1)
    k1, k2, k3 = np.meshgrid(r, r, r, indexing="ij")
    z1, z2, z3 = signs
    k = z1 * k1 + z2 * k2 + z3 * k3
    om = k * k - (z1 * k1 * k1 + z2 * k2 * k2 + z3 * k3 * k3)
    ok = (np.abs(k) <= M) & (om == Gamma)
    for (a, za), (b, zb) in itertools.combinations(((k1, z1), (k2, z2), (k3, z3)), 2):
        if za != zb:
            ok &= a != b
    data = np.zeros((n,) * 4)
    i1, i2, i3 = np.nonzero(ok)
    data[k[ok] + M, i1, i2, i3] = 1.0
    axes = (Axis("k", 1, -M, M), Axis("k1", z1, -M, M), Axis("k2", z2, -M, M), Axis("k3", z3, -M, M))
    return LabeledTensor(axes, data)


# ---------------------------------------------------------------- worst-case sweeps

STRUCTURED = ((0, 0), (0, 2), (0, -2))


def worst_cubic(d: int, M: int, signs=(1, -1, 1), samples: int = 64, seed: int = 0) -> tuple[int, tuple]:
    """Largest cubic count over structured and random (m, Gamma) with M_1 = M_2 = M, centres 0."""
    rng = np.random.default_rng([seed, d, M])
    cands = [((m,) * d, G) for m, G in STRUCTURED]
    for _ in range(samples):
        m = tuple(int(x) for x in rng.integers(-M, M + 1, size=d))
        cands.append((m, int(rng.integers(-M * M, M * M + 1))))
    best, arg = -1, None
    for m, G in cands:
        n = enumerate_cubic(CountingInstance(d, tuple(signs), m, G, (M, M)))
        if n > best:
            best, arg = n, (m, G)
    return best, arg
