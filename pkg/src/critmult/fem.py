"""P1 finite elements with zero trace and the functionals of the critical problem.

Potentials (u ∈ W^{1,p}_0):

    I_p = (1/p)∫|∇u|^p,  J_p = (1/p)∫|u|^p,  F = (1/q)∫|∇u|^q,
    G = (1/r)∫|u|^r,     H = (1/p*)∫|u|^{p*},
    E = I_p + F - λG - H.

Gradient integrals are exact (∇u is cellwise constant).  Mass-type integrals
use a positive-weight degree-4 simplex rule.  Operators act on the interior
coefficient vector; ``form`` vectors hold v ↦ ⟨A(u), v⟩ against hat functions.

In operator pairings and Hessians a weight |∇u|^{s-2} with s < 2 is replaced
by (|∇u|² + ε²)^{(s-2)/2}; pass ``eps=0`` to disable.  Potentials are never
regularized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import SimplicialMesh
from .params import ProblemParams
from .quadrature import simplex_rule

DEFAULT_EPS = 1e-8
# Hessian-only floor for s > 2 where |∇u| = 0 makes the weight vanish
HESSIAN_FLOOR = 1e-12


class SolverError(RuntimeError):
    pass


class P1Space:
    """Continuous piecewise-linear functions vanishing on the boundary."""

    def __init__(self, mesh: SimplicialMesh, quad_degree: int = 4):
        self.mesh = mesh
        N = mesh.dim
        self.dim = N
        cells = mesh.cells
        P = mesh.vertices[cells]
        E = P[:, 1:, :] - P[:, :1, :]
        inv_t = np.linalg.inv(E).transpose(0, 2, 1)  # rows: ∇λ_1..∇λ_N
        self.grads = np.concatenate([-inv_t.sum(axis=1, keepdims=True), inv_t], axis=1)
        self.vol = mesh.cell_volumes()
        self.quad = simplex_rule(N, quad_degree)
        # weights normalized so Σ w = 1: ∫_K f ≈ vol_K Σ w_q f(x_q)
        self.qw = self.quad.weights * math.factorial(N)
        self.qphi = self.quad.barycentric  # (Q, N+1)

        n_v = mesh.n_vertices
        interior = np.ones(n_v, dtype=bool)
        interior[mesh.boundary_vertices] = False
        self.interior = np.flatnonzero(interior)
        self.dof_of_vertex = np.full(n_v, -1, dtype=np.int64)
        self.dof_of_vertex[self.interior] = np.arange(self.interior.size)
        self.ndofs = int(self.interior.size)

        loc = self.dof_of_vertex[cells]  # (C, N+1)
        rows = np.repeat(loc[:, :, None], N + 1, axis=2)
        cols = np.repeat(loc[:, None, :], N + 1, axis=1)
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep
        self._rows = rows[keep]
        self._cols = cols[keep]

    # coefficient <-> cell data ------------------------------------------

    def full(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mesh.n_vertices)
        out[self.interior] = c
        return out

    def cell_values(self, c):
        return self.full(c)[self.mesh.cells]

    def cell_gradients(self, c):
        return np.einsum("ck,ckd->cd", self.cell_values(c), self.grads)

    def quad_values(self, c):
        return self.cell_values(c) @ self.qphi.T

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Sum cellwise (C, N+1) contributions into the interior dof vector."""
        tot = np.bincount(self.mesh.cells.ravel(), weights=local.ravel(), minlength=self.mesh.n_vertices)
        return tot[self.interior]

    def assemble_matrix(self, local: np.ndarray) -> sp.csr_matrix:
        n = self.ndofs
        return sp.csr_matrix((local[self._keep], (self._rows, self._cols)), shape=(n, n))

    # linear algebra -------------------------------------------------------

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        local = self.vol[:, None, None] * np.einsum("cid,cjd->cij", self.grads, self.grads)
        return self.assemble_matrix(local)

    @cached_property
    def mass(self) -> sp.csr_matrix:
        n = self.dim + 1
        ref = (np.ones((n, n)) + np.eye(n)) / ((n) * (n + 1))
        return self.assemble_matrix(self.vol[:, None, None] * ref[None])

    @cached_property
    def _stiffness_lu(self):
        return spla.splu(self.stiffness.tocsc())

    def solve_stiffness(self, rhs: np.ndarray) -> np.ndarray:
        return self._stiffness_lu.solve(np.asarray(rhs, dtype=float))

    def h1_dual_norm(self, g: np.ndarray) -> float:
        """sqrt(gᵀ K⁻¹ g): dual norm against ‖∇·‖_2."""
        return math.sqrt(max(float(g @ self.solve_stiffness(g)), 0.0))

    # integrals ------------------------------------------------------------

    def grad_power(self, c, s: float) -> float:
        """∫|∇u|^s, exact for P1."""
        G = self.cell_gradients(c)
        return float(self.vol @ np.sum(G * G, axis=1) ** (s / 2.0))

    def mass_power(self, c, s: float) -> float:
        """∫|u|^s by quadrature."""
        U = self.quad_values(c)
        return float(self.vol @ (np.abs(U) ** s @ self.qw))

    def norm(self, c, p: float) -> float:
        """W^{1,p}_0 norm ‖∇u‖_p."""
        return self.grad_power(c, p) ** (1.0 / p)

    def lp_norm(self, c, p: float) -> float:
        return self.mass_power(c, p) ** (1.0 / p)

    # operator forms -------------------------------------------------------

    def grad_form(self, c, s: float, eps: float = DEFAULT_EPS) -> np.ndarray:
        """Vector of ∫|∇u|^{s-2}∇u·∇φ_i over interior hat functions φ_i."""
        G = self.cell_gradients(c)
        weight = _grad_weight(np.sum(G * G, axis=1), s, eps)
        local = (self.vol * weight)[:, None] * np.einsum("ckd,cd->ck", self.grads, G)
        return self.scatter(local)

    def mass_form(self, c, s: float) -> np.ndarray:
        """Vector of ∫|u|^{s-2}u φ_i."""
        U = self.quad_values(c)
        V = np.sign(U) * np.abs(U) ** (s - 1.0)
        local = self.vol[:, None] * ((V * self.qw) @ self.qphi)
        return self.scatter(local)

    def grad_hessian(self, c, s: float, eps: float = DEFAULT_EPS) -> sp.csr_matrix:
        """Jacobian of ``grad_form``: cell matrices w(I + (s-2)ĝĝᵀ) in gradient space."""
        G = self.cell_gradients(c)
        g2 = np.sum(G * G, axis=1)
        reg = eps**2 if s < 2 else HESSIAN_FLOOR
        base = (g2 + reg) ** ((s - 2.0) / 2.0)
        coef = (s - 2.0) * (g2 + reg) ** ((s - 4.0) / 2.0)
        BG = np.einsum("ckd,cd->ck", self.grads, G)
        BB = np.einsum("cid,cjd->cij", self.grads, self.grads)
        local = self.vol[:, None, None] * (
            base[:, None, None] * BB + coef[:, None, None] * BG[:, :, None] * BG[:, None, :]
        )
        return self.assemble_matrix(local)

    def mass_hessian(self, c, s: float, eps: float = DEFAULT_EPS) -> sp.csr_matrix:
        """Jacobian of ``mass_form``: ∫(s-1)|u|^{s-2}φ_iφ_j."""
        U = self.quad_values(c)
        if s >= 2:
            w = (s - 1.0) * np.abs(U) ** (s - 2.0)
        else:
            w = (s - 1.0) * (U * U + eps**2) ** ((s - 2.0) / 2.0)
        local = self.vol[:, None, None] * np.einsum("cq,qi,qj->cij", w * self.qw, self.qphi, self.qphi)
        return self.assemble_matrix(local)


def _grad_weight(g2, s, eps):
    if s < 2 and eps > 0:
        return (g2 + eps * eps) ** ((s - 2.0) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = g2 ** ((s - 2.0) / 2.0)
    return np.where(g2 > 0, w, 0.0 if s > 2 else (1.0 if s == 2 else 0.0))


@dataclass(frozen=True, eq=False)
class FemFunction:
    coefficients: np.ndarray
    space: P1Space

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.shape != (self.space.ndofs,):
            raise ValueError(f"expected {self.space.ndofs} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zero(cls, space: P1Space) -> "FemFunction":
        return cls(np.zeros(space.ndofs), space)

    @classmethod
    def interpolate(cls, space: P1Space, f) -> "FemFunction":
        x = space.mesh.vertices[space.interior]
        return cls(np.asarray(f(x), dtype=float), space)

    def nodal_values(self) -> np.ndarray:
        """Values at every mesh vertex (zero on the boundary)."""
        return self.space.full(self.coefficients)

    def __neg__(self):
        return FemFunction(-self.coefficients, self.space)

    def __add__(self, other):
        return FemFunction(self.coefficients + other.coefficients, self.space)

    def __sub__(self, other):
        return FemFunction(self.coefficients - other.coefficients, self.space)

    def __mul__(self, t):
        return FemFunction(t * self.coefficients, self.space)

    __rmul__ = __mul__


# potentials and energy ------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    I_p: float
    J_p: float
    F: float
    G: float
    H: float
    model: str
    lam: Optional[float] = None
    E: Optional[float] = None
    grad_dual_norm: Optional[float] = None


@dataclass(frozen=True)
class OperatorPairings:
    A: float
    B: float
    f: float
    g: float
    h: float


def _coeffs(u):
    return u.coefficients if isinstance(u, FemFunction) else np.asarray(u, dtype=float)


def assemble_potentials(u: FemFunction, params: ProblemParams) -> EnergyReport:
    V, c = u.space, u.coefficients
    p, r, ps = params.p, params.r, params.pstar
    F = V.grad_power(c, params.q) / params.q if params.q is not None else 0.0
    return EnergyReport(
        I_p=V.grad_power(c, p) / p,
        J_p=V.mass_power(c, p) / p,
        F=F,
        G=V.mass_power(c, r) / r,
        H=V.mass_power(c, ps) / ps,
        model=params.model,
        lam=params.lam,
    )


def energy_value(space: P1Space, c, params: ProblemParams) -> float:
    """E(u) alone, for inner loops."""
    lam = params.lam or 0.0
    p, r, ps = params.p, params.r, params.pstar
    G = space.cell_gradients(c)
    g2 = np.sum(G * G, axis=1)
    val = float(space.vol @ g2 ** (p / 2.0)) / p
    if params.q is not None:
        val += float(space.vol @ g2 ** (params.q / 2.0)) / params.q
    A = np.abs(space.quad_values(c))
    mass_r = float(space.vol @ (A**r @ space.qw))
    mass_s = float(space.vol @ (A**ps @ space.qw))
    return val - lam * mass_r / r - mass_s / ps


def energy_gradient(space: P1Space, c, params: ProblemParams, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Coefficient vector of v ↦ ⟨A_p u + f(u) - λg(u) - h(u), v⟩."""
    lam = params.lam or 0.0
    out = space.grad_form(c, params.p, eps)
    if params.q is not None:
        out = out + space.grad_form(c, params.q, eps)
    if lam != 0.0:
        out = out - lam * space.mass_form(c, params.r)
    return out - space.mass_form(c, params.pstar)


def energy_hessian(space: P1Space, c, params: ProblemParams, eps: float = DEFAULT_EPS) -> sp.csr_matrix:
    lam = params.lam or 0.0
    H = space.grad_hessian(c, params.p, eps)
    if params.q is not None:
        H = H + space.grad_hessian(c, params.q, eps)
    if lam != 0.0:
        H = H - lam * space.mass_hessian(c, params.r, eps)
    return H - space.mass_hessian(c, params.pstar, eps)


def energy(u: FemFunction, params: ProblemParams, eps: float = DEFAULT_EPS) -> EnergyReport:
    if params.lam is None:
        raise ValueError("energy needs lambda in the parameters")
    rep = assemble_potentials(u, params)
    E = rep.I_p + rep.F - params.lam * rep.G - rep.H
    g = energy_gradient(u.space, u.coefficients, params, eps)
    return EnergyReport(
        rep.I_p, rep.J_p, rep.F, rep.G, rep.H, rep.model, params.lam, E,
        dual_norm(u.space, g, params.p, eps),
    )


def pair_operators(u: FemFunction, v: FemFunction, params: ProblemParams, eps: float = DEFAULT_EPS) -> OperatorPairings:
    """⟨A_p u, v⟩, ⟨B_p u, v⟩, ⟨f(u), v⟩, ⟨g(u), v⟩, ⟨h(u), v⟩."""
    if u.space is not v.space:
        raise ValueError("u and v must live on the same space")
    V, c, w = u.space, u.coefficients, v.coefficients
    f = float(V.grad_form(c, params.q, eps) @ w) if params.q is not None else 0.0
    return OperatorPairings(
        A=float(V.grad_form(c, params.p, eps) @ w),
        B=float(V.mass_form(c, params.p) @ w),
        f=f,
        g=float(V.mass_form(c, params.r) @ w),
        h=float(V.mass_form(c, params.pstar) @ w),
    )


# dual norms ---------------------------------------------------------------


def plaplace_solve(
    space: P1Space,
    rhs: np.ndarray,
    p: float,
    eps: float = DEFAULT_EPS,
    x0: Optional[np.ndarray] = None,
    rtol: float = 1e-12,
    maxiter: int = 200,
) -> np.ndarray:
    """Solve A_p(v) = rhs, i.e. minimize (1/p)∫|∇v|^p - ⟨rhs, v⟩, by damped Newton."""
    rhs = np.asarray(rhs, dtype=float)
    if p == 2.0:
        return space.solve_stiffness(rhs)
    scale = space.h1_dual_norm(rhs)
    if scale == 0.0:
        return np.zeros_like(rhs)
    b = rhs / scale
    if x0 is None:
        v = space.solve_stiffness(b)
        num = float(b @ v)
        v *= (num / space.grad_power(v, p)) ** (1.0 / (p - 1.0))
    else:
        v = np.asarray(x0, dtype=float) / scale ** (1.0 / (p - 1.0))

    def phi(x):
        G = space.cell_gradients(x)
        g2 = np.sum(G * G, axis=1)
        dens = (g2 + eps * eps) ** (p / 2.0) if (p < 2 and eps > 0) else g2 ** (p / 2.0)
        return float(space.vol @ dens) / p - float(b @ x)

    for _ in range(maxiter):
        res = space.grad_form(v, p, eps) - b
        rn = space.h1_dual_norm(res)
        if rn <= rtol:
            break
        H = space.grad_hessian(v, p, eps)
        step = spla.spsolve(H.tocsc(), -res)
        f0 = phi(v)
        slope = float(res @ step)
        t = 1.0
        while t > 1e-12:
            trial = v + t * step
            if phi(trial) <= f0 + 1e-4 * t * slope:
                break
            t *= 0.5
        if t <= 1e-12:
            # no measurable decrease left in Φ: accept the step if it cuts the residual
            trial = v + step
            if space.h1_dual_norm(space.grad_form(trial, p, eps) - b) >= rn:
                break
        v = trial
    return v * scale ** (1.0 / (p - 1.0))


def dual_norm(space: P1Space, g: np.ndarray, p: float, eps: float = DEFAULT_EPS) -> float:
    """Norm of the functional g against ‖∇·‖_p: sup_v ⟨g, v⟩/‖∇v‖_p.

    Exact via K⁻¹ for p = 2; otherwise evaluated at the maximizer v solving
    A_p(v) = g (regularized for p < 2).
    """
    g = np.asarray(g, dtype=float)
    if not np.any(g):
        return 0.0
    if p == 2.0:
        return space.h1_dual_norm(g)
    v = plaplace_solve(space, g, p, eps)
    nv = space.norm(v, p)
    return float(g @ v) / nv if nv > 0 else 0.0


# Hölder audit ----------------------------------------------------------------


@dataclass(frozen=True)
class HolderSlack:
    """RHS - LHS of the three Hölder bounds (None for the F bound without q)."""

    F_bound: Optional[float]
    G_bound: float
    H_bound: float

    def ok(self, tol: float = 1e-10) -> bool:
        vals = [self.G_bound, self.H_bound] + ([self.F_bound] if self.F_bound is not None else [])
        return all(v >= -tol for v in vals)


def holder_audit(u: FemFunction, params: ProblemParams, volume: Optional[float] = None) -> HolderSlack:
    """Slacks of

        F ≤ |Ω|^{1-q/p}/q (∫|∇u|^p)^{q/p},
        G ≥ (∫|u|^p)^{r/p} / (r|Ω|^{r/p-1}),
        H ≥ (∫|u|^p)^{p*/p} / (p*|Ω|^{p/(N-p)}),

    each as the bound's greater side minus its smaller side.  |Ω| defaults to
    the mesh volume, which makes all three exact consequences of Hölder's
    inequality for the discrete (positive-weight) measures.
    """
    V, c = u.space, u.coefficients
    p, r, ps, N = params.p, params.r, params.pstar, params.N
    vol = float(np.sum(V.vol)) if volume is None else volume
    Lp = V.mass_power(c, p)
    G = V.mass_power(c, r) / r
    H = V.mass_power(c, ps) / ps
    slack_G = G - Lp ** (r / p) / (r * vol ** (r / p - 1.0))
    slack_H = H - Lp ** (ps / p) / (ps * vol ** (p / (N - p)))
    slack_F = None
    if params.q is not None:
        q = params.q
        F = V.grad_power(c, q) / q
        slack_F = vol ** (1.0 - q / p) / q * V.grad_power(c, p) ** (q / p) - F
    return HolderSlack(slack_F, slack_G, slack_H)
