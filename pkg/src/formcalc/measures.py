"""Differentiable measures, codegree forms and the adjoint of d.

A codegree-n form is kept in density representation omega = F * mu with F a
degree-n FormField and mu a differentiable base measure. The measure
derivative d_p(F_gamma mu) then has density d_p F_gamma + F_gamma beta_p,
where beta is the logarithmic derivative of mu.

Only the Gaussian-product measure ships. For it every coefficient built from
polynomials times Gaussian envelopes satisfies the domination hypotheses
needed for integration by parts, so they are not re-checked at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .exterior import AltTensor, MultiIndex, difference, merge_with_sign
from .forms import FormField, codifferential, contract_field, contract_forms, differential
from .integrate import Estimate, IntegrationSpec, QuadratureRule, gauss_hermite_rule, integrate


class DifferentiableMeasure:
    """Probability measure on R^D with density and logarithmic derivative.

    Subclasses supply ``density``, ``log_derivative_many`` and ``sample``;
    ``log_derivative_form`` and ``quadrature_rule`` are optional and raise
    when the measure has no symbolic log-derivative or Gaussian structure.
    """

    dim: int

    def density(self, points) -> np.ndarray:
        raise NotImplementedError

    def log_derivative_many(self, points) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def log_derivative_form(self) -> FormField:
        raise NotImplementedError(f"{type(self).__name__} has no symbolic logarithmic derivative")

    def quadrature_rule(self, order: int) -> QuadratureRule:
        raise ValueError(f"quadrature is only available for Gaussian-product measures, not {type(self).__name__}")

    def log_derivative(self, x) -> AltTensor:
        """beta(x) = sum_p beta_p(x) e_p; rejects points of zero density."""
        pt = np.asarray(x, dtype=float).reshape(1, -1)
        if pt.shape[1] != self.dim:
            raise ValueError(f"point has dimension {pt.shape[1]}, expected {self.dim}")
        if not self.density(pt)[0] > 0.0:
            raise ValueError("logarithmic derivative is undefined where the density vanishes")
        beta = self.log_derivative_many(pt)[0]
        return AltTensor(1, {(p + 1,): float(b) for p, b in enumerate(beta)})


class GaussianProductMeasure(DifferentiableMeasure):
    """Centered product Gaussian with per-axis variances."""

    def __init__(self, variances: Sequence[float]):
        v = np.asarray(variances, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("variances must be a non-empty sequence")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("variances must be positive and finite")
        self.variances = v
        self.dim = v.size

    @classmethod
    def standard(cls, dim: int) -> GaussianProductMeasure:
        return cls([1.0] * dim)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(self.variances)

    def density(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        q = np.sum(pts * pts / self.variances, axis=1)
        norm = np.prod(np.sqrt(2.0 * np.pi * self.variances))
        return np.exp(-0.5 * q) / norm

    def axis_density(self, axis: int, t) -> np.ndarray:
        """Marginal density along 0-based ``axis``."""
        var = self.variances[axis]
        t = np.asarray(t, dtype=float)
        return np.exp(-0.5 * t * t / var) / np.sqrt(2.0 * np.pi * var)

    def log_derivative_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return -pts / self.variances

    def log_derivative_form(self) -> FormField:
        comps = {(p,): ex.scale(-1.0 / var, ex.coord(p)) for p, var in enumerate(self.variances, start=1)}
        return FormField(1, self.dim, comps)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.dim)) * self.sigmas

    def quadrature_rule(self, order: int) -> QuadratureRule:
        return gauss_hermite_rule(self.variances, order)

    def to_json(self) -> dict:
        return {"kind": "gaussian_product", "dim": self.dim, "variances": self.variances.tolist()}

    def __repr__(self):
        return f"GaussianProductMeasure(variances={self.variances.tolist()})"


def measure_from_json(data: Mapping) -> DifferentiableMeasure:
    kind = data.get("kind")
    if kind != "gaussian_product":
        raise ValueError(f"unsupported measure kind {kind!r}")
    variances = data.get("variances")
    dim = data.get("dim")
    if variances is None:
        if dim is None:
            raise ValueError("measure needs 'variances' or 'dim'")
        variances = [1.0] * int(dim)
    if dim is not None and int(dim) != len(variances):
        raise ValueError(f"measure dim {dim} does not match {len(variances)} variances")
    return GaussianProductMeasure(variances)


def log_derivative(mu: DifferentiableMeasure, x) -> AltTensor:
    return mu.log_derivative(x)


@dataclass(frozen=True)
class CoForm:
    """Codegree-n form omega = F * mu in density representation."""

    base: DifferentiableMeasure
    density_form: FormField

    def __post_init__(self):
        if self.density_form.dim != self.base.dim:
            raise ValueError(f"density form dim {self.density_form.dim} != measure dim {self.base.dim}")

    @property
    def codegree(self) -> int:
        return self.density_form.degree

    @property
    def dim(self) -> int:
        return self.base.dim


def _check_pair(a: FormField, b: FormField) -> None:
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def pointwise_inner(a: FormField, b: FormField, points: np.ndarray) -> np.ndarray:
    """(a(x), b(x))_n at each row of ``points``."""
    va = a.evaluate_many(points)
    vb = b.evaluate_many(points)
    total = np.zeros(points.shape[0])
    for k, values in va.items():
        if k in vb:
            total += values * vb[k]
    return total


def pairing(omega: FormField, f: FormField, mu: DifferentiableMeasure, spec: IntegrationSpec) -> Estimate:
    """<omega, f>_n = int (omega(x), f(x))_n mu(dx)."""
    _check_pair(omega, f)
    if omega.dim != mu.dim:
        raise ValueError(f"form dim {omega.dim} != measure dim {mu.dim}")
    return integrate(lambda pts: pointwise_inner(omega, f, pts), mu, spec)


def lp_norm(f: FormField, mu: DifferentiableMeasure, p: float, spec: IntegrationSpec) -> float:
    """||f||_{n,p} = (int ||f(x)||_n^p mu(dx))^(1/p)."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    est = integrate(lambda pts: f.norm_many(pts) ** p, mu, spec)
    return float(est.value) ** (1.0 / p)


def sobolev_terms(f: FormField, mu: DifferentiableMeasure, p: float, spec: IntegrationSpec) -> dict:
    """The three summands of the A_p^n norm plus a finiteness flag."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    form_term = lp_norm(f, mu, p, spec)
    co_term = lp_norm(codifferential(f), mu, p, spec) if f.degree > 0 else 0.0

    def weighted(pts):
        beta = mu.log_derivative_many(pts)
        return (np.linalg.norm(beta, axis=1) * f.norm_many(pts)) ** p

    weighted_integral = float(integrate(weighted, mu, spec).value)
    weighted_term = weighted_integral ** (1.0 / p)
    return {
        "form": form_term,
        "codifferential": co_term,
        "weighted": weighted_term,
        "weighted_finite": bool(math.isfinite(weighted_integral)),
    }


def sobolev_norm(f: FormField, mu: DifferentiableMeasure, p: float, spec: IntegrationSpec) -> float:
    t = sobolev_terms(f, mu, p, spec)
    return t["form"] + t["codifferential"] + t["weighted"]


def dstar(f: FormField, mu: DifferentiableMeasure) -> FormField:
    """Adjoint of d under the mu-pairing: -(beta -| f + delta f)."""
    if f.degree < 1:
        raise ValueError("d* needs a form of degree >= 1")
    beta = mu.log_derivative_form()
    return -(contract_field(beta, f) + codifferential(f))


def measure_derivative(F: FormField, mu: DifferentiableMeasure, p: int) -> FormField:
    """Density of d_p(F mu) w.r.t. mu: d_p F + F * beta_p."""
    beta_p = mu.log_derivative_form()[(p,)]
    terms = {}
    for gamma, fg in F:
        terms[gamma] = ex.add(fg.deriv(p), ex.mul(fg, beta_p))
    return FormField(F.degree, F.dim, terms)


def coform_differential(omega: CoForm) -> CoForm:
    """d omega = (-1)^(n-1) sum over p in gamma of d_p omega_gamma e_p -| e_gamma."""
    n = omega.codegree
    if n == 0:
        raise ValueError("differential is undefined for codegree 0")
    F = omega.density_form
    beta = omega.base.log_derivative_form()
    sign = -1.0 if (n - 1) % 2 else 1.0
    terms: dict[MultiIndex, list[ex.Expr]] = {}
    for gamma, fg in F:
        for p in gamma:
            dens = ex.add(fg.deriv(p), ex.mul(fg, beta[(p,)]))
            if dens.is_zero():
                continue
            rest = difference(gamma, (p,))
            _, s = merge_with_sign((p,), rest)
            terms.setdefault(rest, []).append(ex.scale(sign * s, dens))
    return CoForm(omega.base, FormField._from_terms(n - 1, F.dim, terms))


def wedge_measure(g: FormField, omega: CoForm) -> CoForm:
    """(g ^ omega)(A) = int_A g(x) -| omega(dx), codegree n - m."""
    if g.degree > omega.codegree:
        raise ValueError(f"form degree {g.degree} exceeds codegree {omega.codegree}")
    return CoForm(omega.base, contract_forms(g, omega.density_form))


def total_mass(omega: CoForm, spec: IntegrationSpec) -> Estimate:
    """omega(X) for a codegree-0 form."""
    if omega.codegree != 0:
        raise ValueError("total_mass needs a codegree-0 form")
    F = omega.density_form
    scalar = F[()]
    return integrate(lambda pts: scalar._eval(pts), omega.base, spec)


def coform_on_set(omega: CoForm, indicator, spec: IntegrationSpec) -> tuple[list[MultiIndex], Estimate]:
    """Coefficients of omega(A) for A given by a vectorized indicator."""
    F = omega.density_form
    keys = sorted(k for k, _ in F)
    if not keys:
        return [], Estimate(np.zeros(0), np.zeros(0))

    def fn(pts):
        mask = indicator(pts).astype(float)
        vals = F.evaluate_many(pts)
        return np.stack([vals[k] * mask for k in keys], axis=1)

    return keys, integrate(fn, omega.base, spec)


@dataclass
class AdjointReport:
    lhs: float
    rhs: float
    gap: float
    stderr: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "stderr": self.stderr,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def adjoint_check(omega: FormField, f: FormField, mu: DifferentiableMeasure, spec: IntegrationSpec) -> AdjointReport:
    """Compare <d omega, f>_{n+1} with <omega, d* f>_n on a shared sample/rule.

    Under MC the gap's standard error comes from the per-sample difference,
    which accounts for the correlation between the two sides.
    """
    if f.degree != omega.degree + 1:
        raise ValueError(f"f must have degree {omega.degree + 1}, got {f.degree}")
    if f.dim != omega.dim or f.dim != mu.dim:
        raise ValueError("omega, f and mu must share a dimension")
    d_omega = differential(omega)
    d_star_f = dstar(f, mu)

    def fn(pts):
        left = pointwise_inner(d_omega, f, pts)
        right = pointwise_inner(omega, d_star_f, pts)
        return np.stack([left, right], axis=1)

    est = integrate(fn, mu, spec)
    lhs, rhs = (float(v) for v in est.value)
    gap_value, gap_err = est.combine([1.0, -1.0])
    gap = abs(gap_value)
    if spec.is_mc:
        tol = spec.z * gap_err
    else:
        tol = spec.tol
    return AdjointReport(lhs, rhs, gap, gap_err, tol, gap <= tol)


@dataclass
class LeibnizReport:
    pointwise_gap: float
    box_gaps: list[float] = field(default_factory=list)
    box_tolerance: float = 0.0
    passed: bool = False

    def to_json(self) -> dict:
        return {
            "pointwise_gap": self.pointwise_gap,
            "box_gaps": self.box_gaps,
            "box_tolerance": self.box_tolerance,
            "pass": self.passed,
        }


def leibniz_sides(g: FormField, omega: CoForm) -> tuple[CoForm, CoForm]:
    """Both sides of d(g ^ omega) = g ^ d omega + (-1)^n dg ^ omega."""
    if omega.codegree <= g.degree:
        raise ValueError(f"codegree {omega.codegree} must exceed form degree {g.degree}")
    n = omega.codegree - 1
    lhs = coform_differential(wedge_measure(g, omega))
    first = wedge_measure(g, coform_differential(omega)).density_form
    second = wedge_measure(differential(g), omega).density_form
    if n % 2:
        second = -second
    return lhs, CoForm(omega.base, first + second)


def _form_gap(a: FormField, b: FormField, points: np.ndarray) -> float:
    va = a.evaluate_many(points)
    vb = b.evaluate_many(points)
    gap = 0.0
    for k in set(va) | set(vb):
        diff = va.get(k, 0.0) - vb.get(k, 0.0)
        gap = max(gap, float(np.max(np.abs(diff))))
    return gap


def leibniz_check(
    g: FormField,
    omega: CoForm,
    points: np.ndarray,
    boxes: Sequence[tuple[Sequence[float], Sequence[float]]] = (),
    spec: IntegrationSpec | None = None,
    pointwise_tol: float = 1e-10,
) -> LeibnizReport:
    """Check the Leibniz rule pointwise on densities and on box measures."""
    lhs, rhs = leibniz_sides(g, omega)
    pw = _form_gap(lhs.density_form, rhs.density_form, np.asarray(points, dtype=float))
    box_gaps = []
    box_tol = 0.0
    ok = pw <= pointwise_tol
    if boxes:
        spec = spec or IntegrationSpec.monte_carlo(n=100_000)
        diff = CoForm(omega.base, lhs.density_form - rhs.density_form)
        for lo, hi in boxes:
            lo_a, hi_a = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

            def indicator(pts, lo_a=lo_a, hi_a=hi_a):
                return np.all((pts >= lo_a) & (pts < hi_a), axis=1)

            keys, est = coform_on_set(diff, indicator, spec)
            gap = float(np.max(np.abs(est.value))) if keys else 0.0
            err = float(np.max(est.stderr)) if keys else 0.0
            tol = max(spec.tol, spec.z * err) if spec.is_mc else spec.tol
            box_gaps.append(gap)
            box_tol = max(box_tol, tol)
            ok = ok and gap <= tol
    return LeibnizReport(pw, box_gaps, box_tol, ok)
