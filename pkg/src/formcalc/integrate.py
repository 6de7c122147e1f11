"""Integration backends shared by the measure and surface layers.

Two routes: tensorized Gauss-Hermite quadrature for Gaussian-product
measures and seeded block Monte Carlo. The MC stream is counter based: block
``b`` draws from ``Philox(key=(seed, b))``, so the sample sequence never
depends on how blocks are spread across workers.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate as sp_integrate

BLOCK_SIZE = 1 << 16

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IntegrationSpec:
    """How to integrate: ``method`` is "quadrature" or "mc".

    ``tol`` is the absolute pass tolerance for quadrature, ``z`` the
    standard-error multiplier for Monte Carlo.
    """

    method: str = "quadrature"
    order: int = 12
    n: int = 1_000_000
    seed: int = 42
    workers: int = 1
    tol: float = 1e-10
    z: float = 3.0

    def __post_init__(self):
        if self.method not in ("quadrature", "mc"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.order < 1:
            raise ValueError("quadrature order must be >= 1")
        if self.n < 1:
            raise ValueError("sample count must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def is_mc(self) -> bool:
        return self.method == "mc"

    @classmethod
    def quadrature(cls, order: int = 12, tol: float = 1e-10) -> IntegrationSpec:
        return cls(method="quadrature", order=order, tol=tol)

    @classmethod
    def monte_carlo(cls, n: int = 1_000_000, seed: int = 42, workers: int = 1, z: float = 3.0) -> IntegrationSpec:
        return cls(method="mc", n=n, seed=seed, workers=workers, z=z)

    @classmethod
    def from_json(cls, data: Mapping) -> IntegrationSpec:
        method = data.get("method", "quadrature")
        if method in ("monte_carlo", "montecarlo"):
            method = "mc"
        kwargs = {"method": method}
        for key, cast in (("order", int), ("n", int), ("seed", int), ("workers", int), ("tol", float), ("z", float)):
            if key in data:
                kwargs[key] = cast(data[key])
        return cls(**kwargs)

    def to_json(self) -> dict:
        if self.is_mc:
            return {"method": "mc", "n": self.n, "seed": self.seed, "z": self.z}
        return {"method": "quadrature", "order": self.order, "tol": self.tol}


@dataclass(frozen=True)
class Estimate:
    """Integral estimate; ``value``/``stderr`` are scalars or 1-D arrays.

    ``cov`` is the per-sample covariance of a vector integrand (MC only), so
    the standard error of any linear combination ``w @ value`` is
    ``sqrt(w @ cov @ w / n)``.
    """

    value: float | np.ndarray
    stderr: float | np.ndarray
    n: int = 0
    cov: np.ndarray | None = None

    def combine(self, weights: Sequence[float]) -> tuple[float, float]:
        w = np.asarray(weights, dtype=float)
        value = float(w @ np.asarray(self.value))
        if self.cov is None or self.n == 0:
            return value, 0.0
        return value, float(np.sqrt(max(w @ self.cov @ w, 0.0) / self.n))


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (m, D)
    weights: np.ndarray  # (m,)

    def apply(self, fn: Integrand) -> Estimate:
        values = np.asarray(fn(self.points), dtype=float)
        total = np.tensordot(self.weights, values, axes=(0, 0))
        if np.ndim(total) == 0:
            return Estimate(float(total), 0.0)
        return Estimate(total, np.zeros_like(total))


def tensor_rule(axes: Sequence[tuple[np.ndarray, np.ndarray]]) -> QuadratureRule:
    """Tensor product of per-axis (nodes, weights) rules."""
    nodes = [np.asarray(a[0], dtype=float) for a in axes]
    weights = [np.asarray(a[1], dtype=float) for a in axes]
    grid = np.meshgrid(*nodes, indexing="ij")
    wgrid = np.meshgrid(*weights, indexing="ij")
    points = np.stack([g.ravel() for g in grid], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return QuadratureRule(points, w)


def gauss_hermite_axis(variance: float, order: int, mean: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights for N(mean, variance) on one axis."""
    t, w = np.polynomial.hermite.hermgauss(order)
    return mean + np.sqrt(2.0 * variance) * t, w / np.sqrt(np.pi)


def gauss_hermite_rule(variances: Sequence[float], order: int) -> QuadratureRule:
    """Tensorized rule, exact for per-axis polynomial degree <= 2*order - 1."""
    return tensor_rule([gauss_hermite_axis(v, order) for v in variances])


def gauss_legendre_pieces(breaks: Sequence[float], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights over consecutive break intervals."""
    t, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in itertools.pairwise(breaks):
        if b <= a:
            continue
        half = 0.5 * (b - a)
        nodes.append(a + half * (t + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))


def _block_stats(fn, sampler, seed, block, count):
    pts = sampler(_block_rng(seed, block), count)
    y = np.asarray(fn(pts), dtype=float).reshape(count, -1)
    mean = y.mean(axis=0)
    centered = y - mean
    return count, mean, centered.T @ centered


def monte_carlo(
    fn: Integrand,
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> Estimate:
    """Sample mean of ``fn`` over ``n`` draws with standard error.

    Blocks are fixed by sample index and merged in block order (Chan's
    pairwise update), so the result is bit-identical for any ``workers``.
    """
    blocks = [(b, min(block_size, n - b * block_size)) for b in range(-(-n // block_size))]

    def run(item):
        b, count = item
        return _block_stats(fn, sampler, seed, b, count)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(run, blocks))
    else:
        stats = [run(item) for item in blocks]

    total, mean, m2 = stats[0]
    for count, mb, m2b in stats[1:]:
        new_total = total + count
        delta = mb - mean
        mean = mean + delta * (count / new_total)
        m2 = m2 + m2b + np.outer(delta, delta) * (total * count / new_total)
        total = new_total

    cov = m2 / max(total - 1, 1)
    stderr = np.sqrt(np.diag(cov) / total)
    if mean.shape == (1,):
        return Estimate(float(mean[0]), float(stderr[0]), total, cov)
    return Estimate(mean, stderr, total, cov)


def integrate(fn: Integrand, measure, spec: IntegrationSpec) -> Estimate:
    """Integrate ``fn`` (vectorized over (n, D) points) against ``measure``."""
    if spec.is_mc:
        return monte_carlo(fn, measure.sample, spec.n, spec.seed, spec.workers)
    return measure.quadrature_rule(spec.order).apply(fn)


def oracle_integrate_1d(
    fn: Callable[[np.ndarray], np.ndarray],
    density: Callable[[np.ndarray], np.ndarray] | None,
    interval: tuple[float, float],
    resolution: int,
) -> float:
    """Composite Simpson rule for int fn(t) density(t) dt on a uniform grid.

    Test-only oracle; deliberately independent of the quadrature and MC paths.
    """
    if resolution % 2:
        resolution += 1
    t = np.linspace(interval[0], interval[1], resolution + 1)
    y = np.asarray(fn(t), dtype=float)
    if density is not None:
        y = y * np.asarray(density(t), dtype=float)
    return float(sp_integrate.simpson(y, x=t))


def richardson(eps_a: float, value_a, eps_b: float, value_b):
    """Two-point extrapolation to eps -> 0 assuming value = L + c*eps**2."""
    wa, wb = richardson_weights(eps_a, eps_b)
    return wa * value_a + wb * value_b


def richardson_weights(eps_a: float, eps_b: float) -> tuple[float, float]:
    a2, b2 = eps_a * eps_a, eps_b * eps_b
    return -b2 / (a2 - b2), a2 / (a2 - b2)
