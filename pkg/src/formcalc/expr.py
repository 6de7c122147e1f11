"""Coefficient functions as expression trees closed under differentiation.

Node kinds: const, coord, add, mul, scale, expquad. Coordinates are 1-based
to match basis numbering. Evaluation is vectorized: a point array of shape
``(n, D)`` gives values of shape ``(n,)``; a single point of shape ``(D,)``
gives a float.

Constructors fold constants and drop zeros so derivatives of polynomials
stay small and ``is_zero`` is a reliable structural test.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np


class Expr:
    kind = "expr"

    def evaluate(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            return float(self._eval(pts[None, :])[0])
        return self._eval(pts)

    __call__ = evaluate

    def _eval(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def deriv(self, p: int) -> Expr:
        """Exact partial derivative in direction e_p."""
        raise NotImplementedError

    def is_zero(self) -> bool:
        return False

    def max_coord(self) -> int:
        return 0

    def poly_degree(self) -> float:
        """Polynomial degree, or inf when a Gaussian envelope is present."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(-1.0, _lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), scale(-1.0, self))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(float(other), self)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(-1.0, self)


def _lift(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


class Const(Expr):
    kind = "const"

    def __init__(self, value: float):
        self.value = float(value)

    def _eval(self, pts):
        return np.full(pts.shape[0], self.value)

    def deriv(self, p):
        return ZERO

    def is_zero(self):
        return self.value == 0.0

    def poly_degree(self):
        return 0

    def to_json(self):
        return {"kind": "const", "value": self.value}

    def __repr__(self):
        return f"{self.value:g}"


ZERO = Const(0.0)
ONE = Const(1.0)


class Coord(Expr):
    kind = "coord"

    def __init__(self, index: int):
        if index < 1:
            raise ValueError("coordinate indices are 1-based")
        self.index = int(index)

    def _eval(self, pts):
        if self.index > pts.shape[1]:
            raise ValueError(f"coordinate x_{self.index} outside dimension {pts.shape[1]}")
        return pts[:, self.index - 1].copy()

    def deriv(self, p):
        return ONE if p == self.index else ZERO

    def max_coord(self):
        return self.index

    def poly_degree(self):
        return 1

    def to_json(self):
        return {"kind": "coord", "index": self.index}

    def __repr__(self):
        return f"x{self.index}"


class Add(Expr):
    kind = "add"

    def __init__(self, args: Sequence[Expr]):
        self.args = tuple(args)

    def _eval(self, pts):
        out = self.args[0]._eval(pts)
        for a in self.args[1:]:
            out = out + a._eval(pts)
        return out

    def deriv(self, p):
        return add(*(a.deriv(p) for a in self.args))

    def max_coord(self):
        return max(a.max_coord() for a in self.args)

    def poly_degree(self):
        return max(a.poly_degree() for a in self.args)

    def to_json(self):
        return {"kind": "add", "args": [a.to_json() for a in self.args]}

    def __repr__(self):
        return "(" + " + ".join(map(repr, self.args)) + ")"


class Mul(Expr):
    kind = "mul"

    def __init__(self, args: Sequence[Expr]):
        self.args = tuple(args)

    def _eval(self, pts):
        out = self.args[0]._eval(pts)
        for a in self.args[1:]:
            out = out * a._eval(pts)
        return out

    def deriv(self, p):
        terms = []
        for i, a in enumerate(self.args):
            da = a.deriv(p)
            if da.is_zero():
                continue
            terms.append(mul(*self.args[:i], da, *self.args[i + 1:]))
        return add(*terms)

    def max_coord(self):
        return max(a.max_coord() for a in self.args)

    def poly_degree(self):
        return sum(a.poly_degree() for a in self.args)

    def to_json(self):
        return {"kind": "mul", "args": [a.to_json() for a in self.args]}

    def __repr__(self):
        return "*".join(map(repr, self.args))


class Scale(Expr):
    kind = "scale"

    def __init__(self, factor: float, arg: Expr):
        self.factor = float(factor)
        self.arg = arg

    def _eval(self, pts):
        return self.factor * self.arg._eval(pts)

    def deriv(self, p):
        return scale(self.factor, self.arg.deriv(p))

    def max_coord(self):
        return self.arg.max_coord()

    def poly_degree(self):
        return self.arg.poly_degree()

    def to_json(self):
        return {"kind": "scale", "factor": self.factor, "arg": self.arg.to_json()}

    def __repr__(self):
        return f"{self.factor:g}*{self.arg!r}"


class ExpQuad(Expr):
    """exp(c + sum_p b_p x_p + sum_p a_p x_p**2), diagonal quadratic form."""

    kind = "expquad"

    def __init__(self, quad: Mapping[int, float], lin: Mapping[int, float] | None = None, const: float = 0.0):
        self.quad = {int(k): float(v) for k, v in quad.items() if v != 0.0}
        self.lin = {int(k): float(v) for k, v in (lin or {}).items() if v != 0.0}
        self.const = float(const)
        for k in list(self.quad) + list(self.lin):
            if k < 1:
                raise ValueError("coordinate indices are 1-based")

    def _eval(self, pts):
        arg = np.full(pts.shape[0], self.const)
        for p, a in self.quad.items():
            arg = arg + a * pts[:, p - 1] ** 2
        for p, b in self.lin.items():
            arg = arg + b * pts[:, p - 1]
        return np.exp(arg)

    def deriv(self, p):
        factor = add(Const(self.lin.get(p, 0.0)), scale(2.0 * self.quad.get(p, 0.0), Coord(p)))
        return mul(factor, self)

    def max_coord(self):
        return max(list(self.quad) + list(self.lin), default=0)

    def poly_degree(self):
        return math.inf

    def to_json(self):
        return {
            "kind": "expquad",
            "quad": {str(k): v for k, v in sorted(self.quad.items())},
            "lin": {str(k): v for k, v in sorted(self.lin.items())},
            "const": self.const,
        }

    def __repr__(self):
        return f"exp[{self.const:g}; lin={self.lin}; quad={self.quad}]"


def const(value: float) -> Expr:
    return ZERO if value == 0.0 else Const(value)


def coord(index: int) -> Expr:
    return Coord(index)


def add(*args: Expr) -> Expr:
    flat: list[Expr] = []
    c = 0.0
    for a in args:
        a = _lift(a)
        if isinstance(a, Add):
            for b in a.args:
                if isinstance(b, Const):
                    c += b.value
                else:
                    flat.append(b)
        elif isinstance(a, Const):
            c += a.value
        else:
            flat.append(a)
    if c != 0.0:
        flat.append(Const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*args: Expr) -> Expr:
    flat: list[Expr] = []
    c = 1.0
    for a in args:
        a = _lift(a)
        if isinstance(a, Scale):
            c *= a.factor
            a = a.arg
        if isinstance(a, Mul):
            flat.extend(a.args)
        elif isinstance(a, Const):
            c *= a.value
        else:
            flat.append(a)
    if c == 0.0:
        return ZERO
    if not flat:
        return Const(c)
    body = flat[0] if len(flat) == 1 else Mul(flat)
    return scale(c, body)


def scale(factor: float, arg: Expr) -> Expr:
    factor = float(factor)
    if factor == 0.0 or arg.is_zero():
        return ZERO
    if isinstance(arg, Const):
        return Const(factor * arg.value)
    if isinstance(arg, Scale):
        return scale(factor * arg.factor, arg.arg)
    if factor == 1.0:
        return arg
    return Scale(factor, arg)


def expquad(quad, lin=None, const_term: float = 0.0) -> Expr:
    return ExpQuad(quad, lin, const_term)


def monomial(coefficient: float, powers: Mapping[int, int]) -> Expr:
    """coefficient * prod_p x_p**powers[p]."""
    factors = []
    for p, k in sorted(powers.items()):
        factors.extend([Coord(p)] * int(k))
    return scale(coefficient, mul(*factors)) if factors else const(coefficient)


def from_json(node) -> Expr:
    """Parse an expression tree; raises ValueError with the offending node kind."""
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return const(float(node))
    if not isinstance(node, Mapping) or "kind" not in node:
        raise ValueError(f"expression node must be an object with a 'kind': {node!r}")
    kind = node["kind"]
    if kind == "const":
        return const(float(node["value"]))
    if kind == "coord":
        return Coord(int(node["index"]))
    if kind == "add":
        return add(*(from_json(a) for a in node["args"]))
    if kind == "mul":
        return mul(*(from_json(a) for a in node["args"]))
    if kind == "scale":
        return scale(float(node["factor"]), from_json(node["arg"]))
    if kind == "expquad":
        quad = {int(k): float(v) for k, v in _pairs(node.get("quad", {}))}
        lin = {int(k): float(v) for k, v in _pairs(node.get("lin", {}))}
        return ExpQuad(quad, lin, float(node.get("const", 0.0)))
    raise ValueError(f"unknown expression kind {kind!r}")


def _pairs(spec):
    # accepts {"1": a, ...} or a dense list [a_1, a_2, ...]
    if isinstance(spec, Mapping):
        return spec.items()
    return ((i + 1, v) for i, v in enumerate(spec))
