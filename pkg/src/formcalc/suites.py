"""Seeded randomized suites: random tensors/forms and the invariant sweeps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .exterior import AltTensor, contract, hs_norm, inner, wedge
from .forms import FormField, codifferential, contract_field, differential
from .integrate import IntegrationSpec
from .measures import CoForm, GaussianProductMeasure, adjoint_check, coform_differential, leibniz_sides, total_mass


def random_index(rng: np.random.Generator, degree: int, max_index: int) -> tuple[int, ...]:
    return tuple(sorted(int(i) for i in rng.choice(np.arange(1, max_index + 1), size=degree, replace=False)))


def random_tensor(rng: np.random.Generator, degree: int, max_index: int, max_terms: int = 6) -> AltTensor:
    available = math.comb(max_index, degree)
    count = int(rng.integers(1, min(max_terms, available) + 1))
    coeffs: dict[tuple[int, ...], float] = {}
    while len(coeffs) < count:
        coeffs[random_index(rng, degree, max_index)] = float(rng.normal())
    return AltTensor(degree, coeffs)


def random_polynomial(rng: np.random.Generator, dim: int, degree: int, max_terms: int = 4) -> ex.Expr:
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        total = int(rng.integers(0, degree + 1))
        powers: dict[int, int] = {}
        for _ in range(total):
            p = int(rng.integers(1, dim + 1))
            powers[p] = powers.get(p, 0) + 1
        terms.append(ex.monomial(float(rng.normal()), powers))
    return ex.add(*terms)


def random_form(rng: np.random.Generator, degree: int, dim: int, poly_degree: int, max_keys: int = 4) -> FormField:
    available = math.comb(dim, degree)
    count = int(rng.integers(1, min(max_keys, available) + 1))
    coeffs = {}
    while len(coeffs) < count:
        coeffs[random_index(rng, degree, dim)] = random_polynomial(rng, dim, poly_degree)
    return FormField(degree, dim, coeffs)


def random_gaussian(rng: np.random.Generator, dim: int) -> GaussianProductMeasure:
    return GaussianProductMeasure(rng.uniform(0.5, 2.0, size=dim))


@dataclass
class AlgebraSummary:
    trials: int = 0
    max_adjunction_error: float = 0.0
    wedge_bound_violations: int = 0
    contraction_bound_violations: int = 0
    anticommutativity_failures: int = 0
    associativity_error: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def algebra_suite(trials: int, seed: int, max_index: int = 8, max_degree: int = 4) -> AlgebraSummary:
    """Random (g, f, h) triples checking the wedge/contraction adjunction.

    Adjunction error is measured relative to ||f|| ||g|| ||h||, the natural
    scale of (f, g ^ h) (cancellation can make the value itself tiny).
    """
    rng = np.random.default_rng(seed)
    out = AlgebraSummary(trials=trials)
    for _ in range(trials):
        m = int(rng.integers(0, max_degree + 1))
        n = int(rng.integers(0, m + 1))
        f = random_tensor(rng, m, max_index)
        g = random_tensor(rng, n, max_index)
        h = random_tensor(rng, m - n, max_index)
        lhs = inner(contract(g, f), h)
        rhs = inner(f, wedge(g, h))
        scale = hs_norm(f) * hs_norm(g) * hs_norm(h)
        out.max_adjunction_error = max(out.max_adjunction_error, abs(lhs - rhs) / scale)

        gh = wedge(g, h)
        if hs_norm(gh) ** 2 > math.comb(m, n) * hs_norm(g) ** 2 * hs_norm(h) ** 2 * (1 + 1e-12):
            out.wedge_bound_violations += 1
        gf = contract(g, f)
        if hs_norm(gf) ** 2 > math.comb(m, n) * hs_norm(g) ** 2 * hs_norm(f) ** 2 * (1 + 1e-12):
            out.contraction_bound_violations += 1

        sign = -1.0 if (n * (m - n)) % 2 else 1.0
        if not wedge(g, h).allclose(sign * wedge(h, g), atol=1e-12 * max(scale, 1.0)):
            out.anticommutativity_failures += 1
        k = random_tensor(rng, int(rng.integers(0, 3)), max_index)
        left = wedge(wedge(g, h), k)
        right = wedge(g, wedge(h, k))
        err = max((abs(left[i] - right[i]) for i in set(left.coeffs) | set(right.coeffs)), default=0.0)
        out.associativity_error = max(out.associativity_error, err)
    return out


def adjoint_cases(seed: int, count: int):
    """(omega, f, mu) triples: D in {2,3,4}, omega degree in {0,1,2}, coefficients of degree <= 2."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        dim = int(rng.integers(2, 5))
        n = int(rng.integers(0, min(2, dim - 1) + 1))
        omega = random_form(rng, n, dim, 2)
        f = random_form(rng, n + 1, dim, 2)
        cases.append((omega, f, random_gaussian(rng, dim)))
    return cases


def adjoint_suite(seed: int, count: int, spec: IntegrationSpec):
    return [adjoint_check(omega, f, mu, spec) for omega, f, mu in adjoint_cases(seed, count)]


@dataclass
class BoundSummary:
    points: int = 0
    violations: int = 0
    max_ratio: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def contraction_bound_suite(seed: int, forms: int, points_per_form: int) -> BoundSummary:
    """||beta(x) -| f(x)|| <= sqrt(n+1) ||beta(x)|| ||f(x)|| for f of degree n+1."""
    rng = np.random.default_rng(seed)
    out = BoundSummary()
    for _ in range(forms):
        dim = int(rng.integers(2, 5))
        degree = int(rng.integers(1, dim + 1))
        mu = random_gaussian(rng, dim)
        f = random_form(rng, degree, dim, 2)
        pts = mu.sample(rng, points_per_form)
        lhs = contract_field(mu.log_derivative_form(), f).norm_many(pts)
        rhs = math.sqrt(degree) * np.linalg.norm(mu.log_derivative_many(pts), axis=1) * f.norm_many(pts)
        # 1e-12 relative guard for rounding in near-equality cases
        out.violations += int(np.sum(lhs > rhs * (1 + 1e-12)))
        positive = rhs > 0
        if np.any(positive):
            out.max_ratio = max(out.max_ratio, float(np.max(lhs[positive] / rhs[positive])))
        out.points += points_per_form
    return out


@dataclass
class LeibnizSummary:
    pairs: int = 0
    points: int = 0
    max_gap: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def leibniz_suite(seed: int, pairs: int, points_per_pair: int) -> LeibnizSummary:
    rng = np.random.default_rng(seed)
    out = LeibnizSummary()
    for _ in range(pairs):
        dim = int(rng.integers(2, 5))
        codegree = int(rng.integers(1, dim + 1))
        m = int(rng.integers(0, codegree))
        g = random_form(rng, m, dim, 2)
        mu = random_gaussian(rng, dim)
        omega = CoForm(mu, random_form(rng, codegree, dim, 2))
        lhs, rhs = leibniz_sides(g, omega)
        pts = mu.sample(rng, points_per_pair)
        va = lhs.density_form.evaluate_many(pts)
        vb = rhs.density_form.evaluate_many(pts)
        for k in set(va) | set(vb):
            gap = float(np.max(np.abs(va.get(k, 0.0) - vb.get(k, 0.0))))
            out.max_gap = max(out.max_gap, gap)
        out.pairs += 1
        out.points += points_per_pair
    return out


@dataclass
class SoundnessSummary:
    forms: int = 0
    max_dd: float = 0.0
    max_deltadelta: float = 0.0
    max_total_derivative: float = 0.0
    coforms: int = 0
    details: list = field(default_factory=list)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d.pop("details")
        return d


def soundness_suite(seed: int, forms: int, points: int, coforms: int) -> SoundnessSummary:
    """d(df) = 0 and delta(delta f) = 0 pointwise; total mass of d omega is 0."""
    rng = np.random.default_rng(seed)
    out = SoundnessSummary()
    for _ in range(forms):
        dim = int(rng.integers(1, 7))
        degree = int(rng.integers(0, min(3, dim) + 1))
        f = random_form(rng, degree, dim, 3)
        pts = rng.normal(size=(points, dim))
        dd = differential(differential(f))
        for v in dd.evaluate_many(pts).values():
            out.max_dd = max(out.max_dd, float(np.max(np.abs(v))))
        if degree >= 2:
            ddelta = codifferential(codifferential(f))
            for v in ddelta.evaluate_many(pts).values():
                out.max_deltadelta = max(out.max_deltadelta, float(np.max(np.abs(v))))
        out.forms += 1
    spec = IntegrationSpec.quadrature()
    for _ in range(coforms):
        dim = int(rng.integers(1, 5))
        omega = CoForm(random_gaussian(rng, dim), random_form(rng, 1, dim, 3))
        mass = total_mass(coform_differential(omega), spec)
        out.max_total_derivative = max(out.max_total_derivative, abs(float(mass.value)))
        out.coforms += 1
    return out


def all_index_pairs(max_index: int):
    """Every (g1, g2) pair of multi-indices with entries <= max_index."""
    universe = range(1, max_index + 1)
    indices = [c for r in range(max_index + 1) for c in itertools.combinations(universe, r)]
    return itertools.product(indices, indices)
