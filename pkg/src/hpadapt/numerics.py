"""Quadrature on the reference triangle and unit interval, local L2 projection."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .shapes import polynomial_basis

MAX_DEGREE = 80


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points and weights; ``degree`` is the polynomial exactness."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    kind: str

    @property
    def key(self):
        return (self.kind, self.degree)

    def __len__(self):
        return len(self.weights)


def _check_degree(degree):
    if not isinstance(degree, (int, np.integer)) or degree < 0:
        raise ValueError(f"quadrature degree must be a non-negative integer, got {degree!r}")
    if degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (max {MAX_DEGREE})")


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed-coordinate Gauss rule exact to ``degree`` on the reference triangle.

    The square ``[0, 1]^2`` is mapped by ``xi = u``, ``eta = v (1 - u)``; the
    Jacobian ``(1 - u)`` is absorbed into a Gauss-Jacobi rule in ``u``.
    """
    _check_degree(degree)
    degree = int(degree)
    n = degree // 2 + 1
    # Gauss-Jacobi on [-1, 1] with weight (1 - t), t = 2u - 1
    tu, wu = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (tu + 1.0)
    wu = wu / 4.0
    tv, wv = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (tv + 1.0)
    wv = wv / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    points = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    weights = np.outer(wu, wv).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, degree, "triangle")


@lru_cache(maxsize=None)
def edge_rule(degree):
    """Gauss-Legendre rule on ``[0, 1]`` exact to ``degree``."""
    _check_degree(degree)
    degree = int(degree)
    n = degree // 2 + 1
    t, w = np.polynomial.legendre.leggauss(n)
    points = 0.5 * (t + 1.0)
    weights = 0.5 * w
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, degree, "edge")


def rule_from_key(key):
    kind, degree = key
    return triangle_rule(degree) if kind == "triangle" else edge_rule(degree)


def affine_map(coords):
    """Origin and Jacobian of the affine map from the reference triangle.

    ``coords`` has shape ``(..., 3, 2)``; returns ``(x0, J)`` with
    ``x = x0 + J @ xi``.
    """
    coords = np.asarray(coords, dtype=float)
    x0 = coords[..., 0, :]
    J = np.stack([coords[..., 1, :] - x0, coords[..., 2, :] - x0], axis=-1)
    return x0, J


@lru_cache(maxsize=None)
def _projection_data(q, rule_key):
    rule = rule_from_key(rule_key)
    psi = polynomial_basis(q, rule.points)
    mass = (psi * rule.weights) @ psi.T
    return psi, np.linalg.inv(mass)


@dataclass
class LocalProjection:
    """L2(K)-best polynomial approximation of total degree ``<= q``.

    ``coefficients`` refer to :func:`hpadapt.shapes.polynomial_basis` in the
    element's reference coordinates.
    """

    degree: int
    coefficients: np.ndarray

    def __call__(self, points):
        return self.coefficients @ polynomial_basis(self.degree, points)


def project_local(f, coords, q):
    """Project ``f(x, y)`` onto polynomials of degree ``<= q`` on a triangle.

    ``coords`` are the three vertex coordinates.  The load is sampled with a
    rule of degree ``2 q + 4``.
    """
    if q < 0:
        raise ValueError("projection degree must be >= 0")
    rule = triangle_rule(2 * q + 4)
    x0, J = affine_map(coords)
    if abs(np.linalg.det(J)) <= 0.0:
        raise np.linalg.LinAlgError("degenerate element in local projection")
    xy = x0 + rule.points @ J.T
    fv = np.asarray(f(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(len(rule))
    psi, inv_mass = _projection_data(q, rule.key)
    coeffs = inv_mass @ (psi @ (rule.weights * fv))
    return LocalProjection(q, coeffs)


def project_batch(fvals, q, rule):
    """Projected values at the rule points for many elements at once.

    ``fvals`` has shape ``(n_elem, n_points)`` sampled at ``rule``; the
    Jacobian determinant cancels in the normal equations.
    """
    psi, inv_mass = _projection_data(q, rule.key)
    coeffs = (fvals * rule.weights) @ psi.T @ inv_mass.T
    return coeffs @ psi
