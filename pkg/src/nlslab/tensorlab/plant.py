"""Combinatorial skeleton of plants, with simple merging and trimming.

A skeleton plant keeps leaves (sign, dyadic frequency), pairings among them,
the plant frequency and the frequencies of its pasts.  Blossoms are not
modelled.  The tensor attached to a plant has the root axis followed by one
axis per unpaired leaf.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..lattice import bracket, is_dyadic
from .checks import _stream_values, contract_axes
from .tensor import Axis, LabeledTensor, contract_many

NO_SECOND_MAX = 0.5   # value of the second maximum when fewer than two frequencies exist


@dataclass(frozen=True)
class Leaf:
    label: str
    sign: int
    freq: int


@dataclass(frozen=True)
class SkeletonPlant:
    leaves: tuple
    N: int
    pairings: frozenset = field(default_factory=frozenset)
    pasts: tuple = ()
    root: str = "k"

    def __post_init__(self):
        leaves = tuple(self.leaves)
        labels = [l.label for l in leaves]
        if len(set(labels)) != len(labels):
            raise ValueError("leaf labels must be distinct")
        if self.root in labels:
            raise ValueError("root label clashes with a leaf")
        if not is_dyadic(self.N):
            raise ValueError(f"plant frequency {self.N} is not dyadic")
        by = {l.label: l for l in leaves}
        for l in leaves:
            if l.sign not in (1, -1) or not is_dyadic(l.freq):
                raise ValueError(f"bad leaf {l}")
            if l.freq > self.N:
                raise ValueError(f"leaf {l.label} has frequency above the plant frequency")
        pairs = frozenset(frozenset(p) for p in self.pairings)
        used: set = set()
        for p in pairs:
            if len(p) != 2 or not p <= set(by):
                raise ValueError(f"pairing {sorted(p)} is not two known leaves")
            if p & used:
                raise ValueError("pairings must be disjoint")
            used |= p
            a, b = (by[x] for x in p)
            if a.sign == b.sign or a.freq != b.freq:
                raise ValueError(f"pairing {sorted(p)} needs opposite signs and equal frequencies")
        for Np in self.pasts:
            if Np > self.N:
                raise ValueError("past frequency above the plant frequency")
        object.__setattr__(self, "leaves", leaves)
        object.__setattr__(self, "pairings", pairs)
        object.__setattr__(self, "pasts", tuple(self.pasts))

    @classmethod
    def leaf(cls, label: str, sign: int, freq: int, root: str = "k") -> "SkeletonPlant":
        """Single-leaf plant with N = N_l."""
        return cls((Leaf(label, sign, freq),), freq, root=root)

    @property
    def size(self) -> int:
        return len(self.leaves) + len(self.pasts)

    @property
    def paired(self) -> set:
        return set().union(*self.pairings) if self.pairings else set()

    @property
    def unpaired(self) -> tuple:
        return tuple(l for l in self.leaves if l.label not in self.paired)

    def get(self, label: str) -> Leaf:
        for l in self.leaves:
            if l.label == label:
                return l
        raise KeyError(label)

    def check_tensor(self, h: LabeledTensor):
        want = [self.root] + [l.label for l in self.unpaired]
        if sorted(h.labels) != sorted(want):
            raise ValueError(f"tensor labels {h.labels} do not match plant axes {want}")


def second_max(freqs: Sequence[float]) -> float:
    """Second largest entry of a multiset, or the sentinel when there is none."""
    f = sorted(freqs, reverse=True)
    return f[1] if len(f) >= 2 else NO_SECOND_MAX


def leaf_weight(axis: Axis, alpha: float) -> np.ndarray:
    return bracket(axis.points().astype(float)) ** (-alpha)


def merge_simple(inputs: Sequence[tuple], base: LabeledTensor, pairings: Sequence[tuple] = (),
                 alpha: float = 0.0, signs: Sequence[int] | None = None, N: int | None = None):
    """Merge (plant_j, h_j) through ``base`` = h_{k k_1 ... k_r}.

    The first axis of ``base`` is the new root; axis j+1 is summed against
    the root of input j.  Input j enters conjugated when signs[j] = -1.  Each
    new pairing (a, b) identifies the two leaf axes, which must have opposite
    signs and equal frequencies, and weights both by <k>^{-alpha}.
    """
    inputs = list(inputs)
    r = len(inputs)
    if len(base.axes) != r + 1:
        raise ValueError(f"base tensor needs {r + 1} axes, has {len(base.axes)}")
    signs = [1] * r if signs is None else list(signs)
    out_label = base.axes[0].label

    leaves, owner, old_pairs, pasts = [], {}, set(), []
    tensors = []
    base_map = {}
    for j, ((plant, h), z) in enumerate(zip(inputs, signs)):
        plant.check_tensor(h)
        if z == -1:
            h = h.conj()
        root_tag = f"\x00root{j}"
        base_map[base.axes[j + 1].label] = root_tag
        h = h.relabel({plant.root: root_tag})
        if not h.axis(root_tag).same_range(base.axes[j + 1]):
            raise ValueError(f"root range of input {j} does not match the base tensor")
        for l in plant.leaves:
            if l.label in owner or l.label == out_label:
                raise ValueError(f"leaf label {l.label!r} used twice")
            owner[l.label] = j
            leaves.append(Leaf(l.label, z * l.sign, l.freq))
        old_pairs |= set(plant.pairings)
        pasts.extend(plant.pasts)
        tensors.append(h)

    by = {l.label: l for l in leaves}
    new_pairs, rename = [], {}
    taken = set().union(*old_pairs) if old_pairs else set()
    for a, b in pairings:
        if a not in by or b not in by:
            raise ValueError(f"pairing ({a}, {b}) names an unknown leaf")
        if a in taken or b in taken:
            raise ValueError(f"pairing ({a}, {b}) uses a leaf that is already paired")
        taken |= {a, b}
        if owner[a] == owner[b]:
            raise ValueError(f"pairing ({a}, {b}) lies inside one input")
        if by[a].sign == by[b].sign or by[a].freq != by[b].freq:
            raise ValueError(f"pairing ({a}, {b}) needs opposite signs and equal frequencies")
        new_pairs.append(frozenset((a, b)))
        rename[b] = a
    for j, h in enumerate(tensors):
        for l in list(h.labels):
            if l in rename or l in rename.values():
                ax = h.axis(l)
                w = leaf_weight(ax, alpha)
                shape = [1] * len(h.axes)
                shape[h.index(l)] = ax.size
                h = h.multiply(w.reshape(shape))
        tensors[j] = h.relabel(rename)

    H = contract_many([base.relabel(base_map)] + tensors)
    freqs = [plant.N for plant, _ in inputs]
    if r >= 2:
        pasts.append(second_max(freqs))
    Nnew = max(freqs + [l.freq for l in leaves]) if N is None else N
    plant = SkeletonPlant(tuple(leaves), Nnew, frozenset(old_pairs) | frozenset(new_pairs),
                          tuple(pasts), root=out_label)
    return plant, H


def trim_order(plant: SkeletonPlant, R: float) -> list[str]:
    """Unpaired leaves below R in canonical contraction order (frequency, label)."""
    low = [l for l in plant.unpaired if l.freq < R]
    return [l.label for l in sorted(low, key=lambda l: (l.freq, l.label))]


def trim_simple(plant: SkeletonPlant, h: LabeledTensor, R: float, seed: int, alpha: float):
    """Contract every unpaired leaf with N_l < R against <k>^{-alpha} g_k^{+-} restricted to its shell.

    Paired leaves and pasts below R are dropped.  Every contracted frequency
    band is recorded as (seed, N_l); contracting a band that h already
    depends on, or using a seed reserved for phase contraction, is rejected.
    """
    plant.check_tensor(h)
    order = trim_order(plant, R)
    tags = {(seed, plant.get(l).freq) for l in order}
    clash = {t for t in h.dependence if t[0] == seed and (t[1] is None or t in tags)}
    if clash:
        raise ValueError(f"random stream reused: {sorted(clash, key=str)}")
    raw = _stream_values(seed, h, order)
    vec = {}
    for l in order:
        leaf, ax = plant.get(l), h.axis(l)
        k2 = np.sum(ax.points() ** 2, axis=1) + 1
        shell = (k2 <= leaf.freq ** 2) & ((leaf.freq == 1) | (4 * k2 > leaf.freq ** 2))
        g = raw[l] if leaf.sign > 0 else np.conj(raw[l])
        vec[l] = np.where(shell, leaf_weight(ax, alpha) * g, 0)
    out = contract_axes(h, vec, order)
    keep = tuple(l for l in plant.leaves if l.freq >= R)
    kept = {l.label for l in keep}
    new = SkeletonPlant(keep, plant.N, frozenset(p for p in plant.pairings if p <= kept),
                        tuple(Np for Np in plant.pasts if Np >= R), root=plant.root)
    return new, LabeledTensor(out.axes, out.data, out.dependence | tags)
