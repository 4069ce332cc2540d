"""Dirichlet eigenvalues of the p-Laplacian on the discrete zero-trace space.

The eigenvalue problem is A_p u = λ B_p u with

    ⟨A_p u, v⟩ = ∫|∇u|^{p-2}∇u·∇v,   ⟨B_p u, v⟩ = ∫|u|^{p-2}u v,

and its eigenvalues are critical values of the Rayleigh quotient
I_p(u)/J_p(u).  For p = 2 the sequence is the generalized (stiffness, mass)
spectrum.  For general p the first eigenvalue is found by inverse iteration;
higher ones are *estimates* obtained by continuation in p from p = 2 with a
deflation penalty.  They carry ``method="continuation"`` and make no claim
about the index-theoretic min-max values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .fem import DEFAULT_EPS, FemFunction, P1Space, SolverError, dual_norm, plaplace_solve

log = logging.getLogger(__name__)

LINEAR, FIRST, CONTINUATION = "linear-p2", "inverse-iteration-first", "continuation"
GAP_TOL = 1e-6


class EigenError(SolverError):
    pass


@dataclass(frozen=True)
class EigenPair:
    value: float
    function: FemFunction
    residual: float


@dataclass(frozen=True)
class EigenSequence:
    pairs: tuple
    p: float
    method: str
    mesh_id: str
    notes: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.pairs])

    def __len__(self):
        return len(self.pairs)

    def lambda_m(self, m: int) -> float:
        return self.pairs[m - 1].value


def _as_space(mesh_or_space) -> P1Space:
    return mesh_or_space if isinstance(mesh_or_space, P1Space) else P1Space(mesh_or_space)


def rayleigh(u: FemFunction, p: float) -> float:
    """I_p(u)/J_p(u) = ∫|∇u|^p / ∫|u|^p."""
    V, c = u.space, u.coefficients
    mass = V.mass_power(c, p)
    if mass == 0.0:
        raise ValueError("Rayleigh quotient undefined at u = 0")
    return V.grad_power(c, p) / mass


def eigen_residual(u: FemFunction, value: float, p: float, eps: float = DEFAULT_EPS) -> float:
    """‖A_p u - λ B_p u‖ in the dual of W^{1,p}_0."""
    V, c = u.space, u.coefficients
    return dual_norm(V, V.grad_form(c, p, eps) - value * V.mass_form(c, p), p, eps)


def _normalize(V: P1Space, c: np.ndarray, p: float) -> np.ndarray:
    """Scale to p·I_p = ‖∇u‖_p^p = 1 and fix the sign (largest entry positive)."""
    c = c / V.norm(c, p)
    k = int(np.argmax(np.abs(c)))
    return -c if c[k] < 0 else c


def eigs_linear_p2(mesh, m: int) -> EigenSequence:
    """The m smallest eigenpairs of -Δ with zero Dirichlet data (P1, consistent mass)."""
    V = _as_space(mesh)
    n = V.ndofs
    if not 1 <= m <= n:
        raise EigenError(f"m must be between 1 and the space dimension {n}, got {m}")
    K, M = V.stiffness, V.mass
    if n <= 400 or m >= n - 1:
        vals, vecs = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, m - 1])
    else:
        k = min(n - 2, m + 2)
        vals, vecs = spla.eigsh(K, k=k, M=M, sigma=0.0, which="LM", v0=np.ones(n), tol=0.0)
        order = np.argsort(vals)[:m]
        vals, vecs = vals[order], vecs[:, order]
    pairs = []
    for lam, c in zip(vals, vecs.T):
        c = _normalize(V, c, 2.0)
        # polish the value with the Rayleigh quotient of the normalized vector
        lam = float(c @ (K @ c)) / float(c @ (M @ c))
        u = FemFunction(c, V)
        pairs.append(EigenPair(lam, u, V.h1_dual_norm(K @ c - lam * (M @ c))))
    pairs.sort(key=lambda e: e.value)
    return EigenSequence(tuple(pairs), 2.0, LINEAR, V.mesh.checksum())


def first_eigen_p(
    mesh,
    p: float,
    seed: int = 0,
    tol: float = 1e-8,
    maxiter: int = 10_000,
    eps: float = DEFAULT_EPS,
) -> EigenPair:
    """First eigenpair by inverse iteration: solve A_p w = B_p u, renormalize.

    Starts from a random positive vector, so the iterates stay in the positive
    cone and converge to the sign-definite first eigenfunction.
    """
    if not p > 1:
        raise ValueError(f"need p > 1, got {p}")
    V = _as_space(mesh)
    rng = np.random.default_rng(seed)
    c = _normalize(V, rng.uniform(0.5, 1.0, V.ndofs), p)
    w = None
    lam_old = math.inf
    residual = math.inf
    for it in range(1, maxiter + 1):
        rhs = V.mass_form(c, p)
        w = plaplace_solve(V, rhs, p, eps, x0=w)
        c = _normalize(V, w, p)
        lam = V.grad_power(c, p) / V.mass_power(c, p)
        # the dual residual costs a solve for p != 2; check once λ has settled
        if p == 2.0 or abs(lam - lam_old) <= 1e-3 * tol * lam or it % 25 == 0:
            residual = eigen_residual(FemFunction(c, V), lam, p, eps)
            if residual < tol:
                return EigenPair(float(lam), FemFunction(c, V), float(residual))
        lam_old = lam
    raise EigenError(f"inverse iteration did not converge in {maxiter} steps (residual {residual:.3e})")


# continuation -----------------------------------------------------------------


def _penalized_quotient(V, p, lower, weight):
    """Rayleigh quotient plus weight·Σ cos²-type pairings with lower eigenfunctions."""
    blocks = [(V.mass_form(u, p), V.lp_norm(u, p) ** (p - 1.0)) for u in lower]

    def fun(c):
        Gp = V.grad_power(c, p)
        Mp = V.mass_power(c, p)
        mf = V.mass_form(c, p)
        R = Gp / Mp
        grad = p * (V.grad_form(c, p) * Mp - Gp * mf) / Mp**2
        nrm = Mp ** (1.0 / p)
        dnrm = nrm ** (1.0 - p) * mf
        for b, nb in blocks:
            pi = float(b @ c) / (nb * nrm)
            dpi = b / (nb * nrm) - float(b @ c) / (nb * nrm**2) * dnrm
            R += weight * pi * pi
            grad = grad + 2.0 * weight * pi * dpi
        return R, grad

    def pairings(c):
        nrm = V.lp_norm(c, p)
        return [abs(float(b @ c)) / (nb * nrm) for b, nb in blocks]

    return fun, pairings


def _deflated_relax(V, p, c0, lower, lam_scale, pairing_tol=1e-8, max_weight=1e14):
    c = c0.copy()
    weight = lam_scale
    while True:
        fun, pairings = _penalized_quotient(V, p, lower, weight)
        res = minimize(fun, c, jac=True, method="L-BFGS-B", options={"maxiter": 400, "gtol": 1e-10})
        c = _normalize(V, res.x, p)
        if not lower or max(pairings(c)) < pairing_tol or weight >= max_weight * lam_scale:
            return c
        weight *= 10.0


def _newton_eigen(V, p, c, lam, tol=1e-10, maxiter=60, eps=DEFAULT_EPS):
    """Newton on (A_p u - λB_p u = 0, ‖∇u‖_p^p = 1)."""
    n = V.ndofs

    def residual(c, lam):
        return V.grad_form(c, p, eps) - lam * V.mass_form(c, p), V.grad_power(c, p) - 1.0

    def merit(r1, r2):
        return math.hypot(V.h1_dual_norm(r1), r2)

    r1, r2 = residual(c, lam)
    cur = merit(r1, r2)
    for _ in range(maxiter):
        if cur < tol:
            break
        J11 = V.grad_hessian(c, p, eps) - lam * V.mass_hessian(c, p, eps)
        b = V.mass_form(c, p)
        a = p * V.grad_form(c, p, eps)
        J = sp.bmat([[J11, -b[:, None]], [a[None, :], None]], format="csc")
        try:
            step = spla.spsolve(J, -np.concatenate([r1, [r2]]))
        except RuntimeError:
            break
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        while t > 1e-6:
            c_new, lam_new = c + t * step[:n], lam + t * step[n]
            n1, n2 = residual(c_new, lam_new)
            new = merit(n1, n2)
            if new < cur:
                break
            t *= 0.5
        if t <= 1e-6:
            break
        c, lam, r1, r2, cur = c_new, lam_new, n1, n2, new
    c = _normalize(V, c, p)
    return c, float(V.grad_power(c, p) / V.mass_power(c, p))


def eigs_continuation(
    mesh,
    p_target: float,
    m: int,
    steps: int = 4,
    seed: int = 0,
    residual_tol: float = 1e-6,
    eps: float = DEFAULT_EPS,
) -> EigenSequence:
    """Eigenvalue estimates at p_target by marching p from 2 in ``steps`` increments.

    At each step every pair is relaxed by minimizing the Rayleigh quotient with
    a deflation penalty on its B_p-pairings with the lower pairs, then
    polished by Newton's method on the unpenalized eigen-equation.
    """
    if not p_target > 1:
        raise ValueError(f"need p_target > 1, got {p_target}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    V = _as_space(mesh)
    base = eigs_linear_p2(V, m)
    if p_target == 2.0:
        return EigenSequence(base.pairs, 2.0, CONTINUATION, base.mesh_id)

    coeffs = [e.function.coefficients for e in base.pairs]
    values = [e.value for e in base.pairs]
    for step, p in enumerate(np.linspace(2.0, p_target, steps + 1)[1:], start=1):
        new_coeffs, new_values = [], []
        for j, (c, lam) in enumerate(zip(coeffs, values)):
            c = _normalize(V, c, p)
            c = _deflated_relax(V, p, c, new_coeffs, lam)
            c, lam_new = _newton_eigen(V, p, c, V.grad_power(c, p) / V.mass_power(c, p), eps=eps)
            new_coeffs.append(c)
            new_values.append(lam_new)
        coeffs, values = new_coeffs, new_values
        log.debug("continuation step %d (p=%.4g): %s", step, p, values)

    pairs = []
    for j, (c, lam) in enumerate(zip(coeffs, values)):
        u = FemFunction(c, V)
        res = eigen_residual(u, lam, p_target, eps)
        if res >= residual_tol:
            raise EigenError(
                f"continuation failed at step {steps} (p={p_target}) for pair {j + 1}: residual {res:.3e}"
            )
        pairs.append(EigenPair(lam, u, res))

    first = first_eigen_p(V, p_target, seed=seed, eps=eps)
    if first.value < pairs[0].value:
        pairs[0] = first
    pairs.sort(key=lambda e: e.value)
    return EigenSequence(tuple(pairs), float(p_target), CONTINUATION, V.mesh.checksum())


def eigen_gap_report(seq: EigenSequence, tol: float = GAP_TOL) -> List[tuple]:
    """(m, λ_{m+1} - λ_m, near_multiple) for consecutive values; flagged gaps
    mark where λ_m = λ_{m+1} and the index must be increased."""
    vals = seq.values if isinstance(seq, EigenSequence) else np.asarray(seq, dtype=float)
    if len(vals) < 2:
        raise ValueError("gap report needs at least two eigenvalues")
    gaps = np.diff(vals)
    return [(m, float(g), bool(g < tol)) for m, g in enumerate(gaps, start=1)]


def clusters(seq, tol: float = GAP_TOL) -> List[List[int]]:
    """Groups of 1-based indices joined by flagged gaps."""
    groups: List[List[int]] = []
    current = [1]
    for m, _, flagged in eigen_gap_report(seq, tol):
        if flagged:
            current.append(m + 1)
        else:
            groups.append(current)
            current = [m + 1]
    groups.append(current)
    return [g for g in groups if len(g) > 1]
