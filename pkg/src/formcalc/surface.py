"""Domains with codimension-1 boundaries, epsilon-layers and surface integrals.

Sign convention: the signed normal coordinate tau is negative inside V and
normals point outward. Every layer quantity is an integral over the base
measure of a function of x, tau(x) and the projection P(x) onto the
boundary, so one sample set (or one quadrature rule) serves a whole
epsilon-schedule. Limits eps -> 0 are taken by two-point Richardson
extrapolation in eps**2 on the last two schedule entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .exterior import AltTensor
from .forms import FormField
from .integrate import (
    Estimate,
    IntegrationSpec,
    QuadratureRule,
    gauss_hermite_axis,
    gauss_legendre_pieces,
    monte_carlo,
    richardson_weights,
    tensor_rule,
)
from .measures import CoForm, DifferentiableMeasure, GaussianProductMeasure, coform_differential

DEFAULT_REACH_CAP = 1e6
DEFAULT_SCHEDULE = tuple(0.2 * 2.0**-k for k in range(6))
# MC variance of a layer average grows like 1/eps, so MC runs use a coarse pair.
MC_SCHEDULE = (0.4, 0.2)
TAIL_SIGMAS = 12.0
LAYER_ORDER = 20
ANGULAR_NODES = 128

BoundaryPredicate = Callable[[np.ndarray], np.ndarray]


def default_schedule(spec: IntegrationSpec) -> tuple[float, ...]:
    return MC_SCHEDULE if spec.is_mc else DEFAULT_SCHEDULE


class Domain:
    """Region V with a globally parametrized boundary layer.

    ``signed_coordinate`` extends tau to all of R^D with tau < 0 inside V,
    which is all the mollifier needs; ``tau`` is the partial map that is
    defined only within the reach.
    """

    dim: int
    reach: float

    def contains(self, points) -> np.ndarray:
        return self.signed_coordinate(points) < 0.0

    def signed_coordinate(self, points) -> np.ndarray:
        raise NotImplementedError

    def project(self, points) -> np.ndarray:
        raise NotImplementedError

    def normal_many(self, points) -> np.ndarray:
        """Outward unit normal at the projection of each point."""
        raise NotImplementedError

    def quadrature_rule(self, measure: DifferentiableMeasure, order: int, taus: Sequence[float]) -> QuadratureRule:
        raise ValueError(f"{type(self).__name__} has no quadrature path; use Monte Carlo")

    def tau(self, x) -> float | None:
        t = float(self.signed_coordinate(_row(x, self.dim))[0])
        return t if abs(t) < self.reach else None

    def normal(self, y) -> AltTensor:
        n = self.normal_many(_row(y, self.dim))[0]
        return AltTensor(1, {(p + 1,): float(v) for p, v in enumerate(n)})

    def project_point(self, x) -> np.ndarray:
        return self.project(_row(x, self.dim))[0]


def _row(x, dim: int) -> np.ndarray:
    pt = np.asarray(x, dtype=float)
    if pt.shape != (dim,):
        raise ValueError(f"point has shape {pt.shape}, expected ({dim},)")
    return pt[None, :]


def _tail_breaks(center: float, sigma: float, extra: Sequence[float]) -> list[float]:
    lo, hi = center - TAIL_SIGMAS * sigma, center + TAIL_SIGMAS * sigma
    grid = list(np.arange(math.floor(lo / sigma), math.ceil(hi / sigma) + 1) * sigma)
    pts = sorted({round(float(b), 15) for b in grid + list(extra) if lo <= b <= hi} | {lo, hi})
    return pts


class HalfSpace(Domain):
    """V = {x : (a, x) < c} with constant outward normal a."""

    def __init__(self, dim: int, axis: Sequence[float], offset: float, reach_cap: float = DEFAULT_REACH_CAP):
        a = np.asarray(axis, dtype=float)
        if a.shape != (dim,):
            raise ValueError(f"axis has shape {a.shape}, expected ({dim},)")
        norm = np.linalg.norm(a)
        if not norm > 0:
            raise ValueError("axis must be non-zero")
        self.dim = int(dim)
        self.axis = a / norm
        self.offset = float(offset)
        self.reach = float(reach_cap)

    def signed_coordinate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.axis - self.offset

    def project(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts - np.outer(self.signed_coordinate(pts), self.axis)

    def normal_many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.broadcast_to(self.axis, pts.shape).copy()

    def quadrature_rule(self, measure, order, taus):
        if not isinstance(measure, GaussianProductMeasure):
            raise ValueError("half-space quadrature needs a Gaussian-product measure")
        nz = np.flatnonzero(self.axis)
        if nz.size != 1:
            raise ValueError("half-space quadrature needs a coordinate-axis normal; use Monte Carlo")
        k = int(nz[0])
        s = float(np.sign(self.axis[k]))
        sigma = float(measure.sigmas[k])
        # tau = s*x_k - c, so breakpoints in x_k sit at s*(c + tau_b)
        breaks = _tail_breaks(0.0, sigma, [s * (self.offset + t) for t in taus])
        nodes, weights = gauss_legendre_pieces(breaks, LAYER_ORDER)
        weights = weights * measure.axis_density(k, nodes)
        axes = [
            (nodes, weights) if p == k else gauss_hermite_axis(measure.variances[p], order)
            for p in range(self.dim)
        ]
        return tensor_rule(axes)

    def to_json(self) -> dict:
        return {"kind": "halfspace", "axis": self.axis.tolist(), "offset": self.offset}

    def __repr__(self):
        return f"HalfSpace(axis={self.axis.tolist()}, offset={self.offset})"


class Ball(Domain):
    """Cylindrical ball V = {x : x_1**2 + ... + x_k**2 < r**2}."""

    def __init__(self, dim: int, k: int, r: float):
        if not 1 <= k <= dim:
            raise ValueError(f"need 1 <= k <= {dim}, got k={k}")
        if not r > 0:
            raise ValueError("radius must be positive")
        self.dim, self.k, self.r = int(dim), int(k), float(r)
        self.reach = self.r

    def _radius(self, pts):
        return np.linalg.norm(pts[:, : self.k], axis=1)

    def signed_coordinate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._radius(pts) - self.r

    def project(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = self._radius(pts)
        out = pts.copy()
        safe = rho > 0
        out[safe, : self.k] *= (self.r / rho[safe])[:, None]
        return out

    def normal_many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = self._radius(pts)
        out = np.zeros_like(pts)
        safe = rho > 0
        out[safe, : self.k] = pts[safe, : self.k] / rho[safe, None]
        return out

    def quadrature_rule(self, measure, order, taus):
        if not isinstance(measure, GaussianProductMeasure):
            raise ValueError("ball quadrature needs a Gaussian-product measure")
        if self.k > 2:
            raise ValueError("ball quadrature is implemented for k <= 2; use Monte Carlo")
        rest = [gauss_hermite_axis(measure.variances[p], order) for p in range(self.k, self.dim)]
        if self.k == 1:
            sigma = float(measure.sigmas[0])
            extra = [sgn * (self.r + t) for t in taus for sgn in (1.0, -1.0) if self.r + t > 0]
            nodes, weights = gauss_legendre_pieces(_tail_breaks(0.0, sigma, extra), LAYER_ORDER)
            return tensor_rule([(nodes, weights * measure.axis_density(0, nodes))] + rest)
        # polar coordinates in the first two axes
        smax = float(max(measure.sigmas[0], measure.sigmas[1]))
        top = self.r + TAIL_SIGMAS * smax
        breaks = sorted({0.0, top} | {self.r + t for t in taus if 0 < self.r + t < top}
                        | {float(b) for b in np.arange(smax, top, smax)})
        rn, rw = gauss_legendre_pieces(breaks, LAYER_ORDER)
        theta = 2.0 * np.pi * np.arange(ANGULAR_NODES) / ANGULAR_NODES
        rr, tt = np.meshgrid(rn, theta, indexing="ij")
        x1, x2 = (rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()
        w = (np.outer(rw * rn, np.full(ANGULAR_NODES, 2.0 * np.pi / ANGULAR_NODES))).ravel()
        w = w * measure.axis_density(0, x1) * measure.axis_density(1, x2)
        if not rest:
            return QuadratureRule(np.stack([x1, x2], axis=1), w)
        other = tensor_rule(rest)
        pts = np.concatenate(
            [np.repeat(np.stack([x1, x2], axis=1), len(other.weights), axis=0),
             np.tile(other.points, (x1.size, 1))],
            axis=1,
        )
        return QuadratureRule(pts, np.repeat(w, len(other.weights)) * np.tile(other.weights, x1.size))

    def to_json(self) -> dict:
        return {"kind": "ball", "k": self.k, "r": self.r}

    def __repr__(self):
        return f"Ball(dim={self.dim}, k={self.k}, r={self.r})"


def make_halfspace(dim: int, axis: Sequence[float], offset: float, reach_cap: float = DEFAULT_REACH_CAP) -> HalfSpace:
    return HalfSpace(dim, axis, offset, reach_cap)


def make_ball(dim: int, k: int, r: float) -> Ball:
    return Ball(dim, k, r)


def domain_from_json(data: Mapping, dim: int) -> Domain:
    kind = data.get("kind")
    if kind == "halfspace":
        return HalfSpace(dim, data["axis"], float(data.get("offset", 0.0)), float(data.get("reach", DEFAULT_REACH_CAP)))
    if kind == "ball":
        return Ball(dim, int(data["k"]), float(data["r"]))
    raise ValueError(f"unsupported domain kind {kind!r}")


def _smoothstep5(u):
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep5_slope(u):
    return 30.0 * u * u * (1.0 - u) ** 2


class MollifierProfile:
    """h(tau): 1 deep inside, 0 deep outside, affine -tau/(2 eps) + 1/2 in the core.

    On the roll-off bands eps - eps**2 < |tau| < eps the affine part is
    blended to its constant limit with a quintic smoothstep, which makes h
    C^2 and monotone. Since h must drop by eps/2 over a band of width eps**2,
    the slope there exceeds 1/(2 eps); its peak is (16/9)/(2 eps).
    """

    PEAK_FACTOR = 16.0 / 9.0

    def __init__(self, epsilon: float, reach: float = math.inf):
        if not 0 < epsilon < min(reach, 1.0):
            raise ValueError(f"epsilon must lie in (0, min(reach, 1)), got {epsilon}")
        self.epsilon = float(epsilon)
        self.core = self.epsilon - self.epsilon**2

    def _positive(self, a):
        # a = |tau|; returns (value for tau = +a, slope at +a)
        eps = self.epsilon
        lin = (eps - a) / (2.0 * eps)
        u = np.clip((a - self.core) / eps**2, 0.0, 1.0)
        blend = 1.0 - _smoothstep5(u)
        value = np.where(a < self.core, lin, np.where(a < eps, blend * lin, 0.0))
        band_slope = -_smoothstep5_slope(u) / eps**2 * lin - blend / (2.0 * eps)
        slope = np.where(a < self.core, -1.0 / (2.0 * eps), np.where(a < eps, band_slope, 0.0))
        return value, slope

    def value(self, tau):
        t = np.asarray(tau, dtype=float)
        v, _ = self._positive(np.abs(t))
        out = np.where(t >= 0, v, 1.0 - v)
        return float(out) if out.ndim == 0 else out

    def slope(self, tau):
        t = np.asarray(tau, dtype=float)
        _, s = self._positive(np.abs(t))
        return float(s) if s.ndim == 0 else s

    def breakpoints(self) -> list[float]:
        e, c = self.epsilon, self.core
        return [-e, -c, c, e]


class Mollifier:
    """f_eps = h(tau(x)) and its differential slope(tau(x)) * n(P x)."""

    def __init__(self, domain: Domain, epsilon: float):
        self.domain = domain
        self.profile = MollifierProfile(epsilon, domain.reach)

    @property
    def epsilon(self) -> float:
        return self.profile.epsilon

    def value_many(self, points) -> np.ndarray:
        return self.profile.value(self.domain.signed_coordinate(points))

    def gradient_many(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        slope = self.profile.slope(self.domain.signed_coordinate(pts))
        inside = slope != 0.0
        out = np.zeros_like(pts)
        if np.any(inside):
            out[inside] = slope[inside, None] * self.domain.normal_many(pts[inside])
        return out

    def f_eps(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            return float(self.value_many(_row(pts, self.domain.dim))[0])
        return self.value_many(pts)

    def df_eps(self, x):
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            g = self.gradient_many(_row(pts, self.domain.dim))[0]
            return AltTensor(1, {(p + 1,): float(v) for p, v in enumerate(g)})
        return self.gradient_many(pts)

    def __iter__(self):
        return iter((self.f_eps, self.df_eps))


def mollifier(domain: Domain, epsilon: float) -> Mollifier:
    return Mollifier(domain, epsilon)


def validate_schedule(schedule: Sequence[float], domain: Domain) -> tuple[float, ...]:
    eps = tuple(float(e) for e in schedule)
    if not eps:
        raise ValueError("epsilon schedule is empty")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"epsilon schedule must be strictly decreasing: {list(eps)}")
    for e in eps:
        MollifierProfile(e, domain.reach)
    return eps


@dataclass
class TraceRow:
    epsilon: float
    estimate: float
    stderr: float
    extrapolated: float | None = None
    extrapolated_stderr: float | None = None

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "extrapolated": self.extrapolated,
        }


@dataclass
class Convergence:
    """Per-epsilon estimates plus the extrapolated eps -> 0 limit."""

    value: float
    stderr: float
    trace: list[TraceRow] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "trace": [r.to_json() for r in self.trace]}


def _taus(schedule: Sequence[float]) -> list[float]:
    taus = {0.0}
    for e in schedule:
        taus.update(MollifierProfile(e).breakpoints())
    return sorted(taus)


def _estimate(fn, domain: Domain, measure: DifferentiableMeasure, spec: IntegrationSpec, schedule) -> Estimate:
    if spec.is_mc:
        return monte_carlo(fn, measure.sample, spec.n, spec.seed, spec.workers)
    return domain.quadrature_rule(measure, spec.order, _taus(schedule)).apply(fn)


def _columns_weights(total: int, cols: Sequence[int], weights: Sequence[float]) -> np.ndarray:
    w = np.zeros(total)
    for c, v in zip(cols, weights):
        w[c] += v
    return w


def _convergence(est: Estimate, schedule: Sequence[float], cols: Sequence[int]) -> Convergence:
    values = np.atleast_1d(np.asarray(est.value, dtype=float))
    errs = np.atleast_1d(np.asarray(est.stderr, dtype=float))
    total = values.size
    rows = []
    for i, (eps, c) in enumerate(zip(schedule, cols)):
        row = TraceRow(eps, float(values[c]), float(errs[c]))
        if i > 0:
            wa, wb = richardson_weights(schedule[i - 1], eps)
            row.extrapolated, row.extrapolated_stderr = est.combine(
                _columns_weights(total, [cols[i - 1], c], [wa, wb])
            )
        rows.append(row)
    if len(rows) == 1:
        return Convergence(rows[0].estimate, rows[0].stderr, rows)
    return Convergence(rows[-1].extrapolated, rows[-1].extrapolated_stderr, rows)


def _extrapolation_weights(schedule, cols, total) -> np.ndarray:
    if len(schedule) == 1:
        return _columns_weights(total, [cols[0]], [1.0])
    wa, wb = richardson_weights(schedule[-2], schedule[-1])
    return _columns_weights(total, [cols[-2], cols[-1]], [wa, wb])


def _layer_mask(domain: Domain, pts: np.ndarray, B: BoundaryPredicate | None, tau: np.ndarray, eps: float):
    mask = np.abs(tau) < eps
    if B is not None and np.any(mask):
        sel = np.flatnonzero(mask)
        keep = np.asarray(B(domain.project(pts[sel])), dtype=bool)
        mask[sel[~keep]] = False
    return mask


def layer_measure(
    domain: Domain,
    B: BoundaryPredicate | None,
    epsilon: float,
    nu: DifferentiableMeasure,
    spec: IntegrationSpec,
) -> Estimate:
    """nu^eps(B) = nu(B^eps) / (2 eps); ``B=None`` means the whole boundary."""
    validate_schedule([epsilon], domain)

    def fn(pts):
        tau = domain.signed_coordinate(pts)
        return _layer_mask(domain, pts, B, tau, epsilon) / (2.0 * epsilon)

    return _estimate(fn, domain, nu, spec, [epsilon])


def surface_measure(
    domain: Domain,
    B: BoundaryPredicate | None,
    nu: DifferentiableMeasure,
    schedule: Sequence[float] | None = None,
    spec: IntegrationSpec | None = None,
) -> Convergence:
    """nu^dV(B) as the extrapolated limit of layer measures."""
    spec = spec or IntegrationSpec.quadrature()
    schedule = validate_schedule(schedule or default_schedule(spec), domain)

    def fn(pts):
        tau = domain.signed_coordinate(pts)
        return np.stack([_layer_mask(domain, pts, B, tau, e) / (2.0 * e) for e in schedule], axis=1)

    est = _estimate(fn, domain, nu, spec, schedule)
    return _convergence(est, schedule, list(range(len(schedule))))


def _normal_flux(domain: Domain, form: FormField, pts: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """(n(Px), form(Px)) on masked rows, zero elsewhere."""
    out = np.zeros(pts.shape[0])
    if not np.any(mask):
        return out
    sub = pts[mask]
    proj = domain.project(sub)
    normals = domain.normal_many(sub)
    vals = form.evaluate_many(proj)
    acc = np.zeros(sub.shape[0])
    for (p,), v in vals.items():
        acc += normals[:, p - 1] * v
    out[mask] = acc
    return out


def _field_dot(form: FormField, vectors: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """(v(x), form(x)) for a degree-1 form and row vectors v."""
    vals = form.evaluate_many(pts)
    acc = np.zeros(pts.shape[0])
    for (p,), v in vals.items():
        acc += vectors[:, p - 1] * v
    return acc


@dataclass
class PairingReport:
    lhs: Convergence
    rhs: Convergence
    gap: float
    gap_stderr: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
            "gap": self.gap,
            "gap_stderr": self.gap_stderr,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def boundary_pairing(
    domain: Domain,
    nu: DifferentiableMeasure,
    g: FormField,
    schedule: Sequence[float] | None = None,
    spec: IntegrationSpec | None = None,
) -> PairingReport:
    """Compare lim int (df_eps, g) d nu with -int_dV (n, g) d nu^dV."""
    if g.degree != 1 or g.dim != domain.dim or nu.dim != domain.dim:
        raise ValueError("g must be a degree-1 form on the domain's space")
    spec = spec or IntegrationSpec.quadrature()
    schedule = validate_schedule(schedule or default_schedule(spec), domain)
    mollifiers = [Mollifier(domain, e) for e in schedule]
    K = len(schedule)

    def fn(pts):
        tau = domain.signed_coordinate(pts)
        cols = [_field_dot(g, m.gradient_many(pts), pts) for m in mollifiers]
        for e in schedule:
            cols.append(-_normal_flux(domain, g, pts, np.abs(tau) < e) / (2.0 * e))
        return np.stack(cols, axis=1)

    est = _estimate(fn, domain, nu, spec, schedule)
    lhs = _convergence(est, schedule, list(range(K)))
    rhs = _convergence(est, schedule, list(range(K, 2 * K)))
    w = _extrapolation_weights(schedule, list(range(K)), 2 * K) - _extrapolation_weights(
        schedule, list(range(K, 2 * K)), 2 * K
    )
    gap, gap_err = est.combine(w)
    tol = spec.z * gap_err if spec.is_mc else spec.tol
    return PairingReport(lhs, rhs, abs(gap), gap_err, tol, abs(gap) <= tol)


def surface_integral(
    omega: CoForm,
    domain: Domain,
    schedule: Sequence[float] | None = None,
    spec: IntegrationSpec | None = None,
) -> Convergence:
    """int_dV omega = int_dV (n, F) d mu^dV for omega = F * mu of codegree 1."""
    if omega.codegree != 1 or omega.dim != domain.dim:
        raise ValueError("surface_integral needs a codegree-1 form on the domain's space")
    spec = spec or IntegrationSpec.quadrature()
    schedule = validate_schedule(schedule or default_schedule(spec), domain)
    F = omega.density_form

    def fn(pts):
        tau = domain.signed_coordinate(pts)
        return np.stack([_normal_flux(domain, F, pts, np.abs(tau) < e) / (2.0 * e) for e in schedule], axis=1)

    est = _estimate(fn, domain, omega.base, spec, schedule)
    return _convergence(est, schedule, list(range(len(schedule))))


@dataclass
class StokesReport:
    boundary_side: Convergence
    volume_side: Convergence
    volume_sharp: float
    volume_sharp_stderr: float
    identity: list[tuple[float, float, float]]  # (epsilon, value, stderr)
    gap: float
    gap_stderr: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "boundary_side": self.boundary_side.to_json(),
            "volume_side": self.volume_side.to_json(),
            "volume_sharp": self.volume_sharp,
            "volume_sharp_stderr": self.volume_sharp_stderr,
            "identity": [{"epsilon": e, "value": v, "stderr": s} for e, v, s in self.identity],
            "gap": self.gap,
            "gap_stderr": self.gap_stderr,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def stokes_check(
    omega: CoForm,
    domain: Domain,
    schedule: Sequence[float] | None = None,
    spec: IntegrationSpec | None = None,
) -> StokesReport:
    """Verify int_dV omega = int_V d omega, plus the per-epsilon identity

    (df_eps ^ omega)(X) + (f_eps ^ d omega)(X) = 0.
    """
    if omega.codegree != 1 or omega.dim != domain.dim:
        raise ValueError("stokes_check needs a codegree-1 form on the domain's space")
    spec = spec or IntegrationSpec.quadrature()
    schedule = validate_schedule(schedule or default_schedule(spec), domain)
    F = omega.density_form
    div = coform_differential(omega).density_form[()]
    mollifiers = [Mollifier(domain, e) for e in schedule]
    K = len(schedule)

    def fn(pts):
        tau = domain.signed_coordinate(pts)
        d = div._eval(pts)
        boundary = [_normal_flux(domain, F, pts, np.abs(tau) < e) / (2.0 * e) for e in schedule]
        volume = [m.profile.value(tau) * d for m in mollifiers]
        identity = [_field_dot(F, m.gradient_many(pts), pts) + v for m, v in zip(mollifiers, volume)]
        sharp = [np.where(tau < 0.0, d, 0.0)]
        return np.stack(boundary + volume + identity + sharp, axis=1)

    est = _estimate(fn, domain, omega.base, spec, schedule)
    total = 3 * K + 1
    boundary = _convergence(est, schedule, list(range(K)))
    volume = _convergence(est, schedule, list(range(K, 2 * K)))
    values = np.atleast_1d(est.value)
    errs = np.atleast_1d(est.stderr)
    identity = [(e, float(values[2 * K + i]), float(errs[2 * K + i])) for i, e in enumerate(schedule)]
    w = _extrapolation_weights(schedule, list(range(K)), total) - _extrapolation_weights(
        schedule, list(range(K, 2 * K)), total
    )
    gap, gap_err = est.combine(w)
    if spec.is_mc:
        tol = spec.z * gap_err
        ok = abs(gap) <= tol and all(abs(v) <= spec.z * s for _, v, s in identity)
    else:
        tol = spec.tol
        ok = abs(gap) <= tol and all(abs(v) <= tol for _, v, _s in identity)
    return StokesReport(
        boundary, volume, float(values[-1]), float(errs[-1]), identity, abs(gap), gap_err, tol, ok
    )
