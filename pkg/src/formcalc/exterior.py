"""Sparse alternating Hilbert-Schmidt tensors.

Basis tensors e_gamma are keyed by strictly increasing 1-based index tuples.
A tensor is a finite map from such tuples to real coefficients, so every
sum that runs over the infinite basis reduces to a finite sum here.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

MultiIndex = tuple[int, ...]


def as_index(entries: Iterable[int]) -> MultiIndex:
    """Validate and return a multi-index (strictly increasing, entries >= 1)."""
    idx = tuple(int(i) for i in entries)
    for a, b in zip(idx, idx[1:]):
        if a >= b:
            raise ValueError(f"multi-index {idx} is not strictly increasing")
    if idx and idx[0] < 1:
        raise ValueError(f"multi-index {idx} has entries below 1")
    return idx


def merge_with_sign(g1: MultiIndex, g2: MultiIndex) -> tuple[MultiIndex, int] | None:
    """Sorted union of two disjoint multi-indices and the parity of the merge.

    Returns ``None`` when the indices overlap. The sign is (-1)**k where k is
    the number of inversions in the concatenation ``g1 + g2``.
    """
    inversions = 0
    j = 0
    n2 = len(g2)
    merged = []
    for a in g1:
        while j < n2 and g2[j] < a:
            merged.append(g2[j])
            j += 1
        if j < n2 and g2[j] == a:
            return None
        # every element of g2 already emitted sits after `a` in the concatenation
        inversions += j
        merged.append(a)
    merged.extend(g2[j:])
    return tuple(merged), (-1 if inversions % 2 else 1)


def union(g1: MultiIndex, g2: MultiIndex) -> MultiIndex:
    """Unsigned sorted union."""
    return tuple(sorted(set(g1) | set(g2)))


def difference(g1: MultiIndex, g2: MultiIndex) -> MultiIndex:
    """Unsigned set difference g1 minus g2, kept in increasing order."""
    drop = set(g2)
    return tuple(i for i in g1 if i not in drop)


def is_subset(g1: MultiIndex, g2: MultiIndex) -> bool:
    return set(g1) <= set(g2)


def position(p: int, gamma: MultiIndex) -> int:
    """k_p: the 1-based slot that p occupies (or would occupy) in gamma."""
    return 1 + sum(1 for q in gamma if q < p)


class AltTensor:
    """Finitely supported element of L_n(H).

    Coefficients are stored in a dict keyed by multi-index; exact zeros are
    dropped on construction. Instances are treated as immutable.
    """

    __slots__ = ("degree", "_coeffs")
    __array_ufunc__ = None  # numpy scalars defer to __rmul__

    def __init__(self, degree: int, coeffs: Mapping[Iterable[int], float] | None = None):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        self.degree = int(degree)
        store: dict[MultiIndex, float] = {}
        for key, value in (coeffs or {}).items():
            idx = as_index(key)
            if len(idx) != self.degree:
                raise ValueError(f"index {idx} has length {len(idx)}, expected {self.degree}")
            c = float(value)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient at {idx}")
            c += store.get(idx, 0.0)
            if c == 0.0:
                store.pop(idx, None)
            else:
                store[idx] = c
        self._coeffs = store

    @classmethod
    def basis(cls, *entries: int) -> AltTensor:
        """e_gamma for gamma = entries (no entries gives the scalar 1)."""
        return cls(len(entries), {tuple(entries): 1.0})

    @classmethod
    def scalar(cls, value: float) -> AltTensor:
        return cls(0, {(): value})

    @classmethod
    def zero(cls, degree: int) -> AltTensor:
        return cls(degree)

    @classmethod
    def _trusted(cls, degree: int, coeffs: dict[MultiIndex, float]) -> AltTensor:
        out = cls.__new__(cls)
        out.degree = degree
        out._coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
        return out

    @property
    def coeffs(self) -> dict[MultiIndex, float]:
        return dict(self._coeffs)

    def __getitem__(self, idx: Iterable[int]) -> float:
        return self._coeffs.get(tuple(idx), 0.0)

    def __iter__(self):
        return iter(self._coeffs.items())

    def __len__(self) -> int:
        return len(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def _combine(self, other: AltTensor, sign: float) -> AltTensor:
        if not isinstance(other, AltTensor):
            return NotImplemented
        if other.degree != self.degree:
            raise ValueError(f"degree mismatch: {self.degree} vs {other.degree}")
        out = dict(self._coeffs)
        for k, v in other._coeffs.items():
            out[k] = out.get(k, 0.0) + sign * v
        return AltTensor._trusted(self.degree, out)

    def __add__(self, other: AltTensor) -> AltTensor:
        return self._combine(other, 1.0)

    def __sub__(self, other: AltTensor) -> AltTensor:
        return self._combine(other, -1.0)

    def __neg__(self) -> AltTensor:
        return self * -1.0

    def __mul__(self, c: float) -> AltTensor:
        c = float(c)
        return AltTensor._trusted(self.degree, {k: c * v for k, v in self._coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other: AltTensor) -> AltTensor:
        return wedge(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AltTensor):
            return NotImplemented
        return self.degree == other.degree and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.degree, frozenset(self._coeffs.items())))

    def __repr__(self) -> str:
        if not self._coeffs:
            return f"AltTensor(degree={self.degree}, 0)"
        terms = " + ".join(f"{v:g}*e{list(k)}" for k, v in sorted(self._coeffs.items()))
        return f"AltTensor(degree={self.degree}, {terms})"

    def allclose(self, other: AltTensor, atol: float = 1e-12) -> bool:
        if self.degree != other.degree:
            return False
        keys = set(self._coeffs) | set(other._coeffs)
        return all(abs(self[k] - other[k]) <= atol for k in keys)

    def max_index(self) -> int:
        return max((k[-1] for k in self._coeffs if k), default=0)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coeffs": [{"idx": list(k), "c": v} for k, v in sorted(self._coeffs.items())],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> AltTensor:
        degree = int(data["degree"])
        coeffs: dict[MultiIndex, float] = {}
        for entry in data.get("coeffs", []):
            idx = as_index(entry["idx"])
            if idx in coeffs:
                raise ValueError(f"duplicate index {list(idx)}")
            coeffs[idx] = float(entry["c"])
        return cls(degree, coeffs)


def wedge(f: AltTensor, g: AltTensor) -> AltTensor:
    """Exterior product f ^ g of degree m + n."""
    out: dict[MultiIndex, float] = {}
    for k1, a in f:
        for k2, b in g:
            merged = merge_with_sign(k1, k2)
            if merged is None:
                continue
            idx, s = merged
            out[idx] = out.get(idx, 0.0) + s * a * b
    return AltTensor._trusted(f.degree + g.degree, out)


def contract(g: AltTensor, f: AltTensor) -> AltTensor:
    """Interior product g -| f, the adjoint of h -> g ^ h.

    (g -| f)[gamma] = sum over gamma1 disjoint from gamma of
    sign(gamma1, gamma) * g[gamma1] * f[gamma1 u gamma].
    """
    n, m = g.degree, f.degree
    if n > m:
        raise ValueError(f"cannot contract degree {n} into degree {m}")
    out: dict[MultiIndex, float] = {}
    for k1, a in g:
        for kf, b in f:
            if not is_subset(k1, kf):
                continue
            rest = difference(kf, k1)
            _, s = merge_with_sign(k1, rest)
            out[rest] = out.get(rest, 0.0) + s * a * b
    return AltTensor._trusted(m - n, out)


def inner(f: AltTensor, g: AltTensor) -> float:
    """Hilbert-Schmidt inner product (f, g)_n."""
    if f.degree != g.degree:
        raise ValueError(f"degree mismatch: {f.degree} vs {g.degree}")
    small, large = (f, g) if len(f) <= len(g) else (g, f)
    return math.fsum(v * large[k] for k, v in small)


def hs_norm(f: AltTensor) -> float:
    return math.sqrt(math.fsum(v * v for _, v in f))
