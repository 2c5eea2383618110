"""Numerical audits of the semi-product bounds and of Gaussian contraction.

The random factors attached to a lattice point k come from the same
counter-based stream as the initial data (``gaussian_coefficients``), so a
seed fixes one value per k independently of the box it is drawn on.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ..randomdata import gaussian_coefficients
from .tensor import LabeledTensor, contract_many, op_norm, without_pairings

REL_TOL = 1e-9
_ABS_FLOOR = 1e-13


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    satisfied: bool
    per_ordering: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """rhs / lhs; at least 1 whenever the bound holds."""
        return float("inf") if self.lhs == 0 else self.rhs / self.lhs


def _holds(lhs: float, rhs: float, scale: float) -> bool:
    return lhs <= rhs * (1 + REL_TOL) + _ABS_FLOOR * scale


def _partition(free: Sequence[str], X, Y):
    X, Y = set(X), set(Y)
    if X & Y or X | Y != set(free):
        raise ValueError(f"(X, Y) = ({sorted(X)}, {sorted(Y)}) is not a partition of {sorted(free)}")
    return X, Y


def check_bilinear(h: LabeledTensor, h2: LabeledTensor, X: Iterable[str], Y: Iterable[str]) -> BoundCheck:
    """||H||_{X->Y} <= ||h||_{(X u B) n A -> Y n A} ||h2||_{X n B -> (Y u A) n B}."""
    A, B = set(h.labels), set(h2.labels)
    X, Y = _partition(sorted(A ^ B), X, Y)
    H = contract_many([h, h2])
    lhs = op_norm(H, _ordered(H, X), _ordered(H, Y))
    n1 = op_norm(h, _ordered(h, (X | B) & A), _ordered(h, Y & A))
    n2 = op_norm(h2, _ordered(h2, X & B), _ordered(h2, (Y | A) & B))
    rhs = n1 * n2
    return BoundCheck(lhs, rhs, _holds(lhs, rhs, h.frobenius() * h2.frobenius()))


def _ordered(h: LabeledTensor, labels) -> list[str]:
    return [l for l in h.labels if l in labels]


def ordered_bound(tensors: Sequence[LabeledTensor], X, Y) -> float:
    """Product over j of ||h_j||_{X_j u B_j -> Y_j u C_j} for the given order."""
    sets = [set(t.labels) for t in tensors]
    out = 1.0
    for j, (t, A) in enumerate(zip(tensors, sets)):
        Bj = set().union(*[A & sets[l] for l in range(j + 1, len(sets))])
        Cj = set().union(*[A & sets[l] for l in range(j)])
        out *= op_norm(t, _ordered(t, (X & A) | Bj), _ordered(t, (Y & A) | Cj))
    return out


def check_multilinear(tensors: Sequence[LabeledTensor], X: Iterable[str], Y: Iterable[str],
                      orderings: str = "all") -> BoundCheck:
    """Ordered-product bound; ``rhs`` is for the given order, every ordering must hold."""
    tensors = list(tensors)
    count: dict[str, int] = {}
    for t in tensors:
        for l in t.labels:
            count[l] = count.get(l, 0) + 1
    if any(c > 2 for c in count.values()):
        raise ValueError("a label occurs in more than two tensors")
    X, Y = _partition(sorted(l for l, c in count.items() if c == 1), X, Y)
    H = contract_many(tensors)
    lhs = op_norm(H, _ordered(H, X), _ordered(H, Y))
    scale = float(np.prod([t.frobenius() for t in tensors]))
    perms = itertools.permutations(range(len(tensors))) if orderings == "all" else [tuple(range(len(tensors)))]
    per = {perm: ordered_bound([tensors[i] for i in perm], X, Y) for perm in perms}
    rhs = per[tuple(range(len(tensors)))]
    return BoundCheck(lhs, rhs, all(_holds(lhs, b, scale) for b in per.values()), per)


# ---------------------------------------------------------------- random contraction

def _stream_values(seed: int, h: LabeledTensor, labels) -> dict:
    """Gaussian g_k on a box covering the given axes, keyed by label."""
    axes = [h.axis(l) for l in labels]
    if not axes:
        return {}
    if len({a.d for a in axes}) != 1:
        raise ValueError("contracted axes must share the lattice dimension")
    K = max(max(abs(a.lo), abs(a.hi)) for a in axes)
    g = gaussian_coefficients(seed, 0, axes[0].d, K)
    return {a.label: g[tuple((a.points() + K).T)] for a in axes}


def contract_axes(h: LabeledTensor, vectors: dict, order: Sequence[str]) -> LabeledTensor:
    """Contract axes one at a time, in ``order``, against the given vectors."""
    data, axes = h.data, list(h.axes)
    for l in order:
        i = [a.label for a in axes].index(l)
        data = np.tensordot(data, vectors[l], axes=([i], [0]))
        del axes[i]
    return LabeledTensor(tuple(axes), data, h.dependence)


def gaussian_contract(h: LabeledTensor, keep: Iterable[str], seed: int) -> LabeledTensor:
    """h'_{k_A'} = sum over the other indices of h times eta_k^{+-}, |eta_k| = 1.

    Pairings among the contracted axes are removed first.  The seed must not
    already appear among the streams h depends on.
    """
    keep = set(keep)
    unknown = keep - set(h.labels)
    if unknown:
        raise ValueError(f"unknown labels {sorted(unknown)}")
    if any(tag[0] == seed for tag in h.dependence):
        raise ValueError(f"tensor already depends on random stream {seed}")
    gone = [l for l in h.labels if l not in keep]
    h = without_pairings(h, gone)
    raw = _stream_values(seed, h, gone)
    vec = {}
    for l, g in raw.items():
        eta = g / np.abs(g)
        vec[l] = eta if h.axis(l).sign > 0 else np.conj(eta)
    out = contract_axes(h, vec, gone)
    return LabeledTensor(out.axes, out.data, out.dependence | {(seed, None)})


def refining_norm(h: LabeledTensor, Xp: Iterable[str], Yp: Iterable[str]) -> float:
    """max ||h||_{X->Y} over partitions (X, Y) of all labels with X' in X, Y' in Y."""
    Xp, Yp = set(Xp), set(Yp)
    rest = [l for l in h.labels if l not in Xp | Yp]
    best = 0.0
    for bits in itertools.product((0, 1), repeat=len(rest)):
        X = Xp | {l for l, b in zip(rest, bits) if b == 0}
        Y = Yp | {l for l, b in zip(rest, bits) if b == 1}
        best = max(best, op_norm(h, _ordered(h, X), _ordered(h, Y)))
    return best


@dataclass(frozen=True)
class SampleReport:
    values: np.ndarray
    reference: float = 1.0

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.values, q))

    def summary(self, qs=(0.5, 0.9, 0.95, 0.99)) -> dict:
        out = {f"q{int(round(100 * q))}": self.quantile(q) for q in qs}
        out.update(mean=float(np.mean(self.values)), max=float(np.max(self.values)),
                   trials=int(self.values.size))
        return out


def contract_stat(h: LabeledTensor, keep: Sequence[str], X: Sequence[str], Y: Sequence[str],
                  trials: int, seed: int = 0) -> SampleReport:
    """Ratios ||h'||_{X'->Y'} / max_refining ||h||_{X->Y} over independent phase draws."""
    keep = list(keep)
    if set(X) | set(Y) != set(keep) or set(X) & set(Y):
        raise ValueError("(X', Y') must partition the retained labels")
    gone = [l for l in h.labels if l not in keep]
    h = without_pairings(h, gone)
    den = refining_norm(h, X, Y)
    vals = np.empty(trials)
    for t in range(trials):
        hp = gaussian_contract(h, keep, seed + t)
        vals[t] = op_norm(hp, _ordered(hp, X), _ordered(hp, Y)) / den if den > 0 else 0.0
    return SampleReport(vals, den)


def large_dev_stat(a: LabeledTensor, trials: int, seed: int = 0, signs=None) -> SampleReport:
    """|X|^2 / sum |a|^2 with X = sum a prod eta^{+-}, pairings removed first."""
    if signs is not None:
        a = LabeledTensor(tuple(replace(ax, sign=s) for ax, s in zip(a.axes, signs)), a.data, a.dependence)
    a = without_pairings(a)
    mass = float(np.sum(np.abs(a.data) ** 2))
    vals = np.empty(trials)
    for t in range(trials):
        x = complex(gaussian_contract(a, (), seed + t).data)
        vals[t] = abs(x) ** 2 / mass if mass > 0 else 0.0
    return SampleReport(vals, mass)
