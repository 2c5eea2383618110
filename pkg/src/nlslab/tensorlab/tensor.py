"""Labeled dense tensors, partition norms and semi-products.

An axis is indexed by the lattice points of a box [lo, hi]^d, enumerated in
C order, and carries a sign +1 / -1 telling whether the index enters as u or
as its conjugate.  Norms are taken with respect to an ordered pair (B, C) of
disjoint label sets; the remaining labels E are frozen and the supremum is
taken over them.
"""
from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

EXACT_SVD_MAX = 512
POWER_ITERS = 50
POWER_RESTARTS = 2


@dataclass(frozen=True)
class Axis:
    label: str
    sign: int = 1
    lo: int = 0
    hi: int = 0
    d: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"axis sign must be +1 or -1, got {self.sign}")
        if self.hi < self.lo:
            raise ValueError(f"empty range [{self.lo}, {self.hi}] on axis {self.label!r}")
        if self.d < 1:
            raise ValueError("axis dimension must be positive")

    @property
    def size(self) -> int:
        return (self.hi - self.lo + 1) ** self.d

    def points(self) -> np.ndarray:
        """(size, d) integer array of lattice points, C order."""
        n = self.hi - self.lo + 1
        return np.indices((n,) * self.d).reshape(self.d, -1).T + self.lo

    def same_range(self, other: "Axis") -> bool:
        return (self.lo, self.hi, self.d) == (other.lo, other.hi, other.d)


def axes_box(labels: str | Sequence[str], lo: int, hi: int, signs=None, d: int = 1) -> tuple[Axis, ...]:
    """Axes over a common range; ``signs`` defaults to all +."""
    labels = list(labels)
    signs = [1] * len(labels) if signs is None else list(signs)
    return tuple(Axis(l, s, lo, hi, d) for l, s in zip(labels, signs))


@dataclass(frozen=True)
class LabeledTensor:
    """h_{k_A} stored densely; ``dependence`` records the random streams used to build it."""
    axes: tuple
    data: np.ndarray
    dependence: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        axes = tuple(self.axes)
        labels = [a.label for a in axes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"repeated axis labels {labels}")
        arr = np.array(self.data, dtype=complex)
        shape = tuple(a.size for a in axes)
        if arr.shape != shape:
            raise ValueError(f"data shape {arr.shape} does not match axis ranges {shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "dependence", frozenset(self.dependence))

    @classmethod
    def random(cls, axes, rng: np.random.Generator, kind: str = "complex") -> "LabeledTensor":
        shape = tuple(a.size for a in axes)
        if kind == "complex":
            data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        elif kind == "sign":
            data = rng.choice([-1.0, 1.0], size=shape)
        else:
            raise ValueError(f"unknown random kind {kind!r}")
        return cls(tuple(axes), data)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.axes)

    def axis(self, label: str) -> Axis:
        for a in self.axes:
            if a.label == label:
                return a
        raise KeyError(f"no axis labelled {label!r}")

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def transpose(self, labels: Sequence[str]) -> "LabeledTensor":
        labels = list(labels)
        if sorted(labels) != sorted(self.labels):
            raise ValueError("transpose needs a permutation of the labels")
        perm = [self.index(l) for l in labels]
        return LabeledTensor(tuple(self.axes[i] for i in perm), self.data.transpose(perm), self.dependence)

    def relabel(self, mapping: dict) -> "LabeledTensor":
        axes = tuple(replace(a, label=mapping.get(a.label, a.label)) for a in self.axes)
        return LabeledTensor(axes, self.data, self.dependence)

    def conj(self) -> "LabeledTensor":
        """Complex conjugate with every axis sign flipped."""
        axes = tuple(replace(a, sign=-a.sign) for a in self.axes)
        return LabeledTensor(axes, np.conj(self.data), self.dependence)

    def multiply(self, factor: np.ndarray) -> "LabeledTensor":
        return LabeledTensor(self.axes, self.data * factor, self.dependence)

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))


# ---------------------------------------------------------------- masks

def equality_mask(h: LabeledTensor, i: str, j: str) -> np.ndarray:
    """Boolean array, broadcast to h's shape, of k_i == k_j."""
    ai, aj = h.axis(i), h.axis(j)
    if ai.d != aj.d:
        raise ValueError("axes of different dimension cannot coincide")
    eq = np.all(ai.points()[:, None, :] == aj.points()[None, :, :], axis=-1)
    shape = [1] * len(h.axes)
    ii, jj = h.index(i), h.index(j)
    if ii < jj:
        shape[ii], shape[jj] = ai.size, aj.size
        return np.broadcast_to(eq.reshape(shape), h.data.shape)
    shape[jj], shape[ii] = aj.size, ai.size
    return np.broadcast_to(eq.T.reshape(shape), h.data.shape)


def pairing_mask(h: LabeledTensor, labels: Iterable[str] | None = None) -> np.ndarray:
    """True where no two of the given axes form a pairing (equal point, opposite sign)."""
    labels = list(h.labels if labels is None else labels)
    ok = np.ones(h.data.shape, dtype=bool)
    for i, j in itertools.combinations(labels, 2):
        if h.axis(i).sign != h.axis(j).sign:
            ok &= ~equality_mask(h, i, j)
    return ok


def without_pairings(h: LabeledTensor, labels: Iterable[str] | None = None) -> LabeledTensor:
    return h.multiply(pairing_mask(h, labels))


def has_no_pairing(h: LabeledTensor, labels: Iterable[str] | None = None) -> bool:
    """Re-check that h vanishes on every pairing of the given axes."""
    return not np.any(h.data[~pairing_mask(h, labels)])


# ---------------------------------------------------------------- norms

def _check_sets(h: LabeledTensor, B, C):
    B, C = list(B), list(C)
    known = set(h.labels)
    bad = [l for l in B + C if l not in known]
    if bad:
        raise ValueError(f"unknown labels {bad}")
    if set(B) & set(C):
        raise ValueError(f"B and C overlap in {sorted(set(B) & set(C))}")
    if len(set(B)) != len(B) or len(set(C)) != len(C):
        raise ValueError("repeated label in B or C")
    return B, C


def _flatten(h: LabeledTensor, B, C) -> np.ndarray:
    E = [l for l in h.labels if l not in B and l not in C]
    order = [h.index(l) for l in E + B + C]
    size = lambda ls: int(np.prod([h.axis(l).size for l in ls], dtype=np.int64))
    return h.data.transpose(order).reshape(size(E), size(B), size(C))


def _power_norm(M: np.ndarray, seed: int = 0) -> float:
    """Largest singular value by power iteration on M^H M (lower estimate)."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(POWER_RESTARTS):
        v = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(POWER_ITERS):
            w = M @ v
            est = np.linalg.norm(w)
            if est == 0:
                break
            v = M.conj().T @ w
            v /= np.linalg.norm(v)
        best = max(best, float(est))
    return best


def empty_pair_norm(h: LabeledTensor) -> float:
    """Norm for B = C = empty: every index is frozen, so the sup of |h|."""
    return float(np.max(np.abs(h.data))) if h.data.size else 0.0


def op_norm(h: LabeledTensor, B: Iterable[str], C: Iterable[str]) -> float:
    """||h||_{k_B -> k_C}, with the sup over the other indices."""
    B, C = _check_sets(h, B, C)
    if not B and not C:
        return empty_pair_norm(h)
    M = _flatten(h, B, C)
    if M.size == 0:
        return 0.0
    if not B or not C:
        return float(np.sqrt(np.max(np.sum(np.abs(M) ** 2, axis=(1, 2)))))
    if min(M.shape[1], M.shape[2]) <= EXACT_SVD_MAX:
        return float(np.max(np.linalg.svd(M, compute_uv=False)[:, 0]))
    return max(_power_norm(m) for m in M)


# ---------------------------------------------------------------- products

def _letters(labels: Iterable[str]) -> dict:
    pool = string.ascii_letters
    labels = list(dict.fromkeys(labels))
    if len(labels) > len(pool):
        raise ValueError("too many distinct labels for one contraction")
    return {l: pool[i] for i, l in enumerate(labels)}


def contract_many(tensors: Sequence[LabeledTensor]) -> LabeledTensor:
    """Semi-product: sum over every label that occurs in exactly two factors.

    Free axes keep their order of first appearance.  A label in three or
    more factors is an over-pairing and is rejected.
    """
    tensors = list(tensors)
    if not tensors:
        raise ValueError("nothing to contract")
    seen: dict[str, list] = {}
    for t in tensors:
        for a in t.axes:
            seen.setdefault(a.label, []).append(a)
    for l, axs in seen.items():
        if len(axs) > 2:
            raise ValueError(f"label {l!r} occurs in {len(axs)} tensors")
        if len(axs) == 2 and not axs[0].same_range(axs[1]):
            raise ValueError(f"range mismatch on shared label {l!r}")
    free = [l for l, axs in seen.items() if len(axs) == 1]
    letter = _letters(seen)
    spec = ",".join("".join(letter[l] for l in t.labels) for t in tensors)
    spec += "->" + "".join(letter[l] for l in free)
    data = np.einsum(spec, *[t.data for t in tensors], optimize=len(tensors) > 2)
    axes = tuple(seen[l][0] for l in free)
    dep = frozenset().union(*[t.dependence for t in tensors])
    return LabeledTensor(axes, data, dep)


def semi_product(h: LabeledTensor, h2: LabeledTensor, shared: Iterable[str] | None = None) -> LabeledTensor:
    """Contract h and h2 over ``shared`` (default: all common labels)."""
    common = set(h.labels) & set(h2.labels)
    shared = common if shared is None else set(shared)
    if shared != common:
        raise ValueError(f"shared labels {sorted(shared)} differ from common labels {sorted(common)}")
    return contract_many([h, h2])
