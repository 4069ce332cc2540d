"""Positive-weight quadrature on the reference simplex.

Collapsed (Duffy) Gauss-Jacobi product rules: n points per direction give
exactness for polynomials of total degree 2n - 1.  All weights are positive,
so the rule is itself a measure and discrete Hölder/Jensen inequalities hold
exactly for quadrature-evaluated integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    barycentric: np.ndarray  # (n_points, N+1)
    weights: np.ndarray  # (n_points,), sum = 1/N!
    degree: int

    @property
    def dim(self) -> int:
        return self.barycentric.shape[1] - 1

    @property
    def points(self) -> np.ndarray:
        """Cartesian points on the reference simplex conv{0, e_1, ..., e_N}."""
        return self.barycentric[:, 1:]


def simplex_rule(N: int, degree: int = 4) -> QuadratureRule:
    n = (degree + 2) // 2
    nodes, weights = [], []
    for k in range(N):
        a = N - 1 - k  # weight (1 - ξ)^a on [0, 1]
        x, w = roots_jacobi(n, a, 0)
        nodes.append((1.0 + x) / 2.0)
        weights.append(w / 2.0 ** (a + 1))
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrid = np.meshgrid(*weights, indexing="ij")
    xi = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)

    pts = np.empty_like(xi)
    rest = np.ones(xi.shape[0])
    for k in range(N):
        pts[:, k] = rest * xi[:, k]
        rest = rest * (1.0 - xi[:, k])
    bary = np.concatenate([1.0 - pts.sum(axis=1, keepdims=True), pts], axis=1)
    return QuadratureRule(bary, w, 2 * n - 1)


def monomial_integral(exponents) -> float:
    """∫ over the reference simplex of Π x_i^{a_i} = Π a_i! / (N + Σ a_i)!."""
    exponents = [int(a) for a in exponents]
    num = math.prod(math.factorial(a) for a in exponents)
    return num / math.factorial(len(exponents) + sum(exponents))
