"""Differential forms with exactly differentiable coefficients.

A FormField of degree n on the truncated space R^D is a finite map from
multi-indices (entries <= D) to coefficient expressions. Every operator here
is symbolic, so d and delta are exact; finite differences only appear in
tests.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from . import expr as ex
from .exterior import AltTensor, MultiIndex, as_index, difference, is_subset, merge_with_sign


class FormField:
    """Degree-n differential form x -> L_n(H), truncated to directions 1..D."""

    __slots__ = ("degree", "dim", "_coeffs")
    __array_ufunc__ = None

    def __init__(self, degree: int, dim: int, coeffs: Mapping[Iterable[int], ex.Expr | float] | None = None):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        if dim < 1:
            raise ValueError("dimension must be at least 1")
        self.degree = int(degree)
        self.dim = int(dim)
        store: dict[MultiIndex, ex.Expr] = {}
        for key, value in (coeffs or {}).items():
            idx = as_index(key)
            if len(idx) != self.degree:
                raise ValueError(f"index {list(idx)} has length {len(idx)}, expected {self.degree}")
            if idx and idx[-1] > self.dim:
                raise ValueError(f"index {list(idx)} exceeds dimension {self.dim}")
            e = ex._lift(value)
            if e.max_coord() > self.dim:
                raise ValueError(f"coefficient at {list(idx)} uses x_{e.max_coord()} beyond dimension {self.dim}")
            e = ex.add(store[idx], e) if idx in store else e
            if e.is_zero():
                store.pop(idx, None)
            else:
                store[idx] = e
        self._coeffs = store

    @classmethod
    def _from_terms(cls, degree: int, dim: int, terms: dict[MultiIndex, list[ex.Expr]]) -> FormField:
        out = cls.__new__(cls)
        out.degree, out.dim = degree, dim
        out._coeffs = {}
        for idx, parts in terms.items():
            e = ex.add(*parts)
            if not e.is_zero():
                out._coeffs[idx] = e
        return out

    @classmethod
    def constant(cls, tensor: AltTensor, dim: int) -> FormField:
        return cls(tensor.degree, dim, {k: ex.const(v) for k, v in tensor})

    @classmethod
    def scalar(cls, e: ex.Expr | float, dim: int) -> FormField:
        return cls(0, dim, {(): e})

    @classmethod
    def zero(cls, degree: int, dim: int) -> FormField:
        return cls(degree, dim)

    @property
    def coeffs(self) -> dict[MultiIndex, ex.Expr]:
        return dict(self._coeffs)

    def __getitem__(self, idx: Iterable[int]) -> ex.Expr:
        return self._coeffs.get(tuple(idx), ex.ZERO)

    def __iter__(self):
        return iter(self._coeffs.items())

    def __len__(self):
        return len(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def _check_compatible(self, other: FormField) -> None:
        if other.degree != self.degree or other.dim != self.dim:
            raise ValueError(
                f"form mismatch: degree {self.degree}/dim {self.dim} vs degree {other.degree}/dim {other.dim}"
            )

    def __add__(self, other: FormField) -> FormField:
        self._check_compatible(other)
        terms: dict[MultiIndex, list[ex.Expr]] = {k: [v] for k, v in self}
        for k, v in other:
            terms.setdefault(k, []).append(v)
        return FormField._from_terms(self.degree, self.dim, terms)

    def __neg__(self) -> FormField:
        return self.scaled(-1.0)

    def __sub__(self, other: FormField) -> FormField:
        return self + (-other)

    def scaled(self, c: float) -> FormField:
        return FormField._from_terms(self.degree, self.dim, {k: [ex.scale(c, v)] for k, v in self})

    def times(self, e: ex.Expr) -> FormField:
        """Multiply every coefficient by a scalar expression."""
        return FormField._from_terms(self.degree, self.dim, {k: [ex.mul(e, v)] for k, v in self})

    def __mul__(self, c):
        if isinstance(c, ex.Expr):
            return self.times(c)
        return self.scaled(float(c))

    __rmul__ = __mul__

    def evaluate(self, x) -> AltTensor:
        """The tensor f(x) at a single point."""
        pt = np.asarray(x, dtype=float)
        if pt.shape != (self.dim,):
            raise ValueError(f"point has shape {pt.shape}, expected ({self.dim},)")
        return AltTensor._trusted(self.degree, {k: float(v.evaluate(pt)) for k, v in self})

    def evaluate_many(self, points) -> dict[MultiIndex, np.ndarray]:
        """Coefficient arrays at each row of an (n, D) point array."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points have shape {pts.shape}, expected (n, {self.dim})")
        return {k: v._eval(pts) for k, v in self}

    def norm_many(self, points) -> np.ndarray:
        """Pointwise Hilbert-Schmidt norm ||f(x)||_n."""
        pts = np.asarray(points, dtype=float)
        total = np.zeros(pts.shape[0])
        for values in self.evaluate_many(pts).values():
            total += values * values
        return np.sqrt(total)

    def poly_degree(self) -> float:
        return max((v.poly_degree() for _, v in self), default=0)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "dim": self.dim,
            "coeffs": [{"idx": list(k), "expr": v.to_json()} for k, v in sorted(self._coeffs.items())],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> FormField:
        degree = int(data["degree"])
        dim = int(data["dim"])
        coeffs: dict[MultiIndex, ex.Expr] = {}
        for entry in data.get("coeffs", []):
            idx = as_index(entry["idx"])
            if idx in coeffs:
                raise ValueError(f"duplicate index {list(idx)}")
            coeffs[idx] = ex.from_json(entry["expr"])
        return cls(degree, dim, coeffs)

    def __repr__(self):
        body = ", ".join(f"e{list(k)}: {v!r}" for k, v in sorted(self._coeffs.items()))
        return f"FormField(degree={self.degree}, dim={self.dim}, {{{body}}})"


def evaluate(f: FormField, x) -> AltTensor:
    return f.evaluate(x)


def differential(f: FormField) -> FormField:
    """df = sum over gamma, p not in gamma of d_p f_gamma e_p ^ e_gamma."""
    terms: dict[MultiIndex, list[ex.Expr]] = {}
    for gamma, fg in f:
        for p in range(1, f.dim + 1):
            merged = merge_with_sign((p,), gamma)
            if merged is None:
                continue
            dfg = fg.deriv(p)
            if dfg.is_zero():
                continue
            idx, s = merged
            terms.setdefault(idx, []).append(ex.scale(s, dfg))
    return FormField._from_terms(f.degree + 1, f.dim, terms)


def codifferential(f: FormField) -> FormField:
    """delta f = sum over p in gamma of d_p f_gamma e_p -| e_gamma."""
    if f.degree == 0:
        raise ValueError("codifferential is undefined for 0-forms")
    terms: dict[MultiIndex, list[ex.Expr]] = {}
    for gamma, fg in f:
        for p in gamma:
            dfg = fg.deriv(p)
            if dfg.is_zero():
                continue
            rest = difference(gamma, (p,))
            _, s = merge_with_sign((p,), rest)
            terms.setdefault(rest, []).append(ex.scale(s, dfg))
    return FormField._from_terms(f.degree - 1, f.dim, terms)


def wedge_forms(g: FormField, f: FormField) -> FormField:
    """Pointwise exterior product of two form fields."""
    if g.dim != f.dim:
        raise ValueError(f"dimension mismatch: {g.dim} vs {f.dim}")
    terms: dict[MultiIndex, list[ex.Expr]] = {}
    for k1, a in g:
        for k2, b in f:
            merged = merge_with_sign(k1, k2)
            if merged is None:
                continue
            idx, s = merged
            terms.setdefault(idx, []).append(ex.scale(s, ex.mul(a, b)))
    return FormField._from_terms(g.degree + f.degree, f.dim, terms)


def contract_forms(g: FormField, f: FormField) -> FormField:
    """Pointwise interior product g(x) -| f(x) as a new FormField."""
    if g.dim != f.dim:
        raise ValueError(f"dimension mismatch: {g.dim} vs {f.dim}")
    if g.degree > f.degree:
        raise ValueError(f"cannot contract degree {g.degree} into degree {f.degree}")
    terms: dict[MultiIndex, list[ex.Expr]] = {}
    for k1, a in g:
        for kf, b in f:
            if not is_subset(k1, kf):
                continue
            rest = difference(kf, k1)
            _, s = merge_with_sign(k1, rest)
            terms.setdefault(rest, []).append(ex.scale(s, ex.mul(a, b)))
    return FormField._from_terms(f.degree - g.degree, f.dim, terms)


def contract_field(beta: FormField, f: FormField) -> FormField:
    """beta -| f for a vector field beta given as a degree-1 FormField."""
    if beta.degree != 1:
        raise ValueError("contract_field expects a degree-1 vector field")
    if f.degree == 0:
        raise ValueError("cannot contract a vector field into a 0-form")
    return contract_forms(beta, f)


def vector_field(components: Iterable[ex.Expr | float], dim: int | None = None) -> FormField:
    """Degree-1 FormField sum_p components[p-1] e_p."""
    comps = list(components)
    dim = dim or len(comps)
    return FormField(1, dim, {(p,): c for p, c in enumerate(comps, start=1)})

