"""Numerical search for solution pairs and audits of the min-max geometry.

The functional E = I_p + F - λG - H is even, has a strict local minimum at
the origin, and becomes negative far out along every eigen-direction.  A
mountain-pass path from 0 to such a far point is deformed at its highest node
until that node sits near a saddle; a Newton iteration (deflated against
known solution pairs and the origin) then converges to the critical point.
Accepted points must lie in the energy window 0 < E < c* = S^{N/p}/N.

All results are statements about the discrete functional on one mesh.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .eigen import EigenSequence, rayleigh
from .fem import (
    DEFAULT_EPS,
    FemFunction,
    P1Space,
    dual_norm,
    energy,
    energy_gradient,
    energy_hessian,
    energy_value,
)
from .params import HypothesisConstants, ProblemParams, constants_for
from .sobolev import ps_ceiling
from .thresholds import envelope_upper, threshold_p, threshold_pq

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    nodes: int = 64
    max_iter: int = 150  # path deformations before handing over to Newton
    step: float = 0.5  # initial step along the Sobolev gradient
    newton_switch: float = 1e-2  # relative gradient size that starts Newton
    newton_maxiter: int = 60
    grad_tol: float = 1e-8
    deflation_delta: float = 1e-3  # relative J_p sign-orbit distance
    energy_sep: float = 1e-9
    deflation_power: float = 2.0
    deflation_shift: float = 1.0
    deflation_max_scale: float = 10.0
    seed: int = 0
    threads: int = 1
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.nodes < 3:
            raise ValueError("a path needs at least 3 nodes")
        if not (self.grad_tol > 0 and self.deflation_delta > 0 and self.step > 0):
            raise ValueError("tolerances and step must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class IterationTrace:
    energies: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    norms: List[float] = field(default_factory=list)

    def record(self, e, g, n):
        self.energies.append(float(e))
        self.grad_norms.append(float(g))
        self.norms.append(float(n))


@dataclass(frozen=True)
class CriticalPoint:
    function: FemFunction
    energy: float
    grad_dual_norm: float
    found_at_lambda: float
    pair_tag: int = -1
    sign: int = 1
    trace: Optional[IterationTrace] = None


class MountainPassFailure(RuntimeError):
    def __init__(self, message: str, trace: IterationTrace):
        super().__init__(message)
        self.trace = trace


# helpers -----------------------------------------------------------------------


def _lp(V: P1Space, c, p) -> float:
    return V.mass_power(c, p) ** (1.0 / p)


def orbit_distance(V: P1Space, a, b, p: float) -> float:
    """J_p-metric distance between the sign-orbits {±a} and {±b}."""
    return min(_lp(V, a - b, p), _lp(V, a + b, p))


def distinct(V: P1Space, a: CriticalPoint, b: CriticalPoint, p: float, config: SolverConfig) -> bool:
    ca, cb = a.function.coefficients, b.function.coefficients
    scale = max(_lp(V, ca, p), _lp(V, cb, p))
    far = orbit_distance(V, ca, cb, p) > config.deflation_delta * scale
    sep = abs(a.energy - b.energy) > config.energy_sep * (1.0 + abs(a.energy))
    return far and sep


def canonical_sign(c: np.ndarray) -> int:
    k = int(np.argmax(np.abs(c)))
    return 1 if c[k] >= 0 else -1


class Deflation:
    """M(u) = Π_{roots} (‖u - w‖_p^{-k} + σ) over ±roots and the origin."""

    def __init__(self, V: P1Space, p: float, roots: Sequence[np.ndarray], power=2.0, shift=1.0):
        self.V, self.p, self.power, self.shift = V, p, power, shift
        self.roots = [np.asarray(r) for r in roots]

    def _term(self, w):
        d = _lp(self.V, w, self.p)
        m = d ** (-self.power) + self.shift
        dd = d ** (1.0 - self.p) * self.V.mass_form(w, self.p)
        return math.log(m), (-self.power * d ** (-self.power - 1.0) / m) * dd

    def log_and_grad(self, c):
        logm, grad = self._term(c)
        for r in self.roots:
            a_log, a_grad = self._term(c - r)
            b_log, b_grad = self._term(c + r)
            # pairwise sums keep the result exactly even under c -> -c
            logm += a_log + b_log
            grad = grad + (a_grad + b_grad)
        return logm, grad


def _riesz(V: P1Space, g):
    return V.solve_stiffness(g)


def _grad_norm(V: P1Space, c, params, eps):
    g = energy_gradient(V, c, params, eps)
    return g, dual_norm(V, g, params.p, eps)


def energy_values(V: P1Space, C: np.ndarray, params: ProblemParams) -> np.ndarray:
    return np.array([energy_value(V, c, params) for c in C])


def _reparametrize(V: P1Space, path: np.ndarray, p: float) -> np.ndarray:
    """Redistribute nodes at equal J_p arc length along the polygonal path."""
    seg = np.array([_lp(V, path[i + 1] - path[i], p) for i in range(len(path) - 1)])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return path
    targets = np.linspace(0.0, s[-1], len(path))
    out = np.empty_like(path)
    out[0], out[-1] = path[0], path[-1]
    for k in range(1, len(path) - 1):
        j = min(int(np.searchsorted(s, targets[k], side="right")) - 1, len(path) - 2)
        t = (targets[k] - s[j]) / seg[j] if seg[j] > 0 else 0.0
        out[k] = path[j] + t * (path[j + 1] - path[j])
    return out


def _newton_critical(V, params, c, config, deflation: Optional[Deflation], trace: IterationTrace):
    """Deflated Newton on E'(u) = 0 (step scaling of Farrell et al.)."""
    eps, p = config.eps, params.p
    g = energy_gradient(V, c, params, eps)
    gn = V.h1_dual_norm(g)
    target = min(config.grad_tol * 1e-3, 1e-11)
    for _ in range(config.newton_maxiter):
        trace.record(energy_value(V, c, params), gn, V.norm(c, p))
        if gn < target:
            break
        H = energy_hessian(V, c, params, eps)
        try:
            delta = spla.spsolve(H.tocsc(), -g)
        except RuntimeError:
            break
        if not np.all(np.isfinite(delta)):
            break
        if deflation is not None:
            _, dlog = deflation.log_and_grad(c)
            denom = 1.0 - float(dlog @ delta)
            # the deflated step is δ/(1 - ∇log M·δ); a nonpositive or tiny
            # denominator sends the step to infinity, so it is clamped
            tau = 1.0 / denom if denom > 0 else 1.0
            delta = min(tau, config.deflation_max_scale) * delta
        t = 1.0
        accepted = False
        while t >= 1e-4:
            trial = c + t * delta
            g_t = energy_gradient(V, trial, params, eps)
            gn_t = V.h1_dual_norm(g_t)
            if gn_t < (1.0 - 1e-4 * t) * gn:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        c, g, gn = trial, g_t, gn_t
    return c


def mountain_pass(
    space: P1Space,
    params: ProblemParams,
    config: SolverConfig,
    endpoint: FemFunction,
    deflate: Sequence[FemFunction] = (),
) -> CriticalPoint:
    """Critical point at the mountain-pass level between 0 and ``endpoint``.

    The polygonal path 0 → endpoint is deformed at its highest node by a
    Sobolev-gradient descent step, and the nodes are redistributed at equal
    J_p arc length after every step.  Once the highest node's gradient is
    small relative to its norm, Newton's method (deflated against
    ``deflate`` and the origin) finishes the job.
    """
    V = space
    if params.lam is None:
        raise ValueError("mountain_pass needs lambda in the parameters")
    e = np.asarray(endpoint.coefficients, dtype=float)
    if not np.any(e):
        raise ValueError("endpoint must be nonzero")
    if energy_value(V, e, params) > 0:
        raise ValueError("endpoint must satisfy E(endpoint) <= 0")
    p, eps = params.p, config.eps
    trace = IterationTrace()

    path = np.linspace(0.0, 1.0, config.nodes)[:, None] * e[None, :]
    energies = energy_values(V, path, params)
    step = config.step
    i = int(np.argmax(energies[1:-1])) + 1
    for _ in range(config.max_iter):
        i = int(np.argmax(energies[1:-1])) + 1
        c = path[i]
        g = energy_gradient(V, c, params, eps)
        d = _riesz(V, g)
        gn = math.sqrt(max(float(g @ d), 0.0))
        trace.record(energies[i], gn, V.norm(c, p))
        if gn <= config.newton_switch * math.sqrt(max(float(c @ (V.stiffness @ c)), 1e-300)):
            break
        while step > 1e-12:
            trial = c - step * d
            e_trial = energy_value(V, trial, params)
            if e_trial < energies[i]:
                step = min(step * 1.25, 1.0)
                break
            step *= 0.5
        else:
            break
        path[i] = trial
        path = _reparametrize(V, path, p)
        energies = energy_values(V, path, params)

    c0 = path[i]
    defl = Deflation(V, p, [d.coefficients for d in deflate], config.deflation_power, config.deflation_shift)
    c = _newton_critical(V, params, c0, config, defl, trace)
    c_fun = FemFunction(c, V)
    report = energy(c_fun, params, eps)
    trace.record(report.E, report.grad_dual_norm, V.norm(c, p))
    if not report.grad_dual_norm < config.grad_tol:
        raise MountainPassFailure(
            f"no critical point reached: gradient norm {report.grad_dual_norm:.3e} at energy {report.E:.6g}",
            trace,
        )
    if V.norm(c, p) < 1e-8 * max(V.norm(e, p), 1.0):
        raise MountainPassFailure("iteration collapsed onto the trivial solution", trace)
    return CriticalPoint(c_fun, float(report.E), float(report.grad_dual_norm), float(params.lam),
                         sign=canonical_sign(c), trace=trace)


def endpoint_radius(space: P1Space, params: ProblemParams, direction: np.ndarray, margin: float = 1.5) -> float:
    """A radius R with E(R·direction) < 0, found by doubling from 1."""
    R = 1.0
    for _ in range(200):
        if energy_value(space, R * direction, params) < 0:
            return margin * R
        R *= 2.0
    raise ValueError("energy stays positive along this direction")


def ray_maximizer(space: P1Space, params: ProblemParams, direction: np.ndarray) -> float:
    """argmax over t > 0 of E(t·direction), bracketed by doubling then golden search."""
    f = lambda t: energy_value(space, t * direction, params)
    R = endpoint_radius(space, params, direction, margin=1.0)
    ts = np.linspace(0.0, R, 65)[1:]
    vals = [f(t) for t in ts]
    k = int(np.argmax(vals))
    lo, hi = ts[max(k - 1, 0)] if k > 0 else 0.0, ts[min(k + 1, len(ts) - 1)]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = hi - g * (hi - lo), lo + g * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(60):
        if fa > fb:
            hi, b, fb = b, a, fa
            a = hi - g * (hi - lo)
            fa = f(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + g * (hi - lo)
            fb = f(b)
    return 0.5 * (lo + hi)


def ray_newton(space: P1Space, params: ProblemParams, config: SolverConfig, direction: np.ndarray,
               deflate: Sequence[FemFunction] = ()) -> CriticalPoint:
    """Deflated Newton started at the energy maximizer on the ray through ``direction``."""
    V, p = space, params.p
    t = ray_maximizer(V, params, direction)
    trace = IterationTrace()
    defl = Deflation(V, p, [d.coefficients for d in deflate], config.deflation_power, config.deflation_shift)
    c = _newton_critical(V, params, t * direction, config, defl, trace)
    u = FemFunction(c, V)
    rep = energy(u, params, config.eps)
    trace.record(rep.E, rep.grad_dual_norm, V.norm(c, p))
    if not rep.grad_dual_norm < config.grad_tol:
        raise MountainPassFailure(f"ray Newton stalled at gradient norm {rep.grad_dual_norm:.3e}", trace)
    if V.norm(c, p) < 1e-8 * max(t, 1.0):
        raise MountainPassFailure("iteration collapsed onto the trivial solution", trace)
    return CriticalPoint(u, float(rep.E), float(rep.grad_dual_norm), float(params.lam),
                         sign=canonical_sign(c), trace=trace)


def window_ok(point: CriticalPoint, ceiling: float) -> bool:
    return 0.0 < point.energy < ceiling


# multiple solutions ---------------------------------------------------------------


@dataclass
class Miss:
    seed_index: int
    reason: str
    trace: Optional[IterationTrace] = None


@dataclass
class MultisolveResult:
    points: List[CriticalPoint]
    misses: List[Miss]


def _seed_directions(space: P1Space, eigs: EigenSequence, k: int, p: float, rng) -> List[np.ndarray]:
    dirs = [e.function.coefficients for e in eigs.pairs[:k]]
    while len(dirs) < k:
        w = rng.standard_normal(len(eigs.pairs))
        c = sum(wi * e.function.coefficients for wi, e in zip(w, eigs.pairs))
        dirs.append(c)
    return [d / space.norm(d, p) for d in dirs]


def _try_accept(space, params, config, cp: CriticalPoint, accepted: List[CriticalPoint], ceiling: float):
    if not window_ok(cp, ceiling):
        return f"energy {cp.energy:.6g} outside the window (0, {ceiling:.6g})"
    for other in accepted:
        if not distinct(space, cp, other, params.p, config):
            return f"duplicates accepted pair {other.pair_tag}"
    return None


def deflated_multisolve(
    space: P1Space,
    params: ProblemParams,
    config: SolverConfig,
    k: int,
    eigs: EigenSequence,
    carried: Sequence[CriticalPoint] = (),
) -> MultisolveResult:
    """Up to k distinct solution pairs from k eigen-direction seeds.

    Seeds run in rounds of ``config.threads``; all runs of a round deflate the
    same frozen set of accepted points, and acceptance happens in seed order,
    so the outcome does not depend on thread scheduling.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ceiling = ps_ceiling(params.N, params.p)
    rng = np.random.default_rng(config.seed)
    accepted: List[CriticalPoint] = list(carried)
    misses: List[Miss] = []
    dirs = _seed_directions(space, eigs, k, params.p, rng)

    def run(j, frozen):
        d = dirs[j]
        roots = [a.function for a in frozen]
        # plain Newton from the ray maximizer first; deflation only when that
        # lands on an already accepted orbit (the clamped deflated step is
        # less robust far from the known roots)
        for deflate in ((), roots) if roots else ((),):
            try:
                cp = ray_newton(space, params, config, d, deflate=deflate)
            except MountainPassFailure:
                continue
            if _try_accept(space, params, config, cp, frozen, ceiling) is None:
                return cp
        try:
            R = endpoint_radius(space, params, d)
            end = FemFunction(R * d, space)
            return mountain_pass(space, params, config, end, deflate=roots)
        except MountainPassFailure as exc:
            return Miss(j, str(exc), exc.trace)
        except ValueError as exc:
            return Miss(j, str(exc))

    for start in range(0, k, config.threads):
        batch = list(range(start, min(k, start + config.threads)))
        frozen = list(accepted)
        if config.threads == 1:
            outcomes = [run(j, frozen) for j in batch]
        else:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                outcomes = list(pool.map(lambda j: run(j, frozen), batch))
        for j, out in zip(batch, outcomes):
            if isinstance(out, Miss):
                misses.append(out)
                continue
            reason = _try_accept(space, params, config, out, accepted, ceiling)
            if reason is None:
                accepted.append(_tagged(out, len(accepted)))
            else:
                misses.append(Miss(j, reason, out.trace))
    return MultisolveResult(accepted, misses)


def _tagged(cp: CriticalPoint, tag: int) -> CriticalPoint:
    return CriticalPoint(cp.function, cp.energy, cp.grad_dual_norm, cp.found_at_lambda, tag, cp.sign, cp.trace)


def repolish(space: P1Space, params: ProblemParams, config: SolverConfig, cp: CriticalPoint,
             others: Sequence[CriticalPoint] = ()) -> Optional[CriticalPoint]:
    """Newton from a known solution at a new λ; None if it does not re-converge."""
    trace = IterationTrace()
    defl = Deflation(space, params.p, [o.function.coefficients for o in others],
                     config.deflation_power, config.deflation_shift)
    c = _newton_critical(space, params, cp.function.coefficients, config, defl, trace)
    u = FemFunction(c, space)
    rep = energy(u, params, config.eps)
    if not rep.grad_dual_norm < config.grad_tol or space.norm(c, params.p) < 1e-8:
        return None
    return CriticalPoint(u, float(rep.E), float(rep.grad_dual_norm), float(params.lam),
                         cp.pair_tag, canonical_sign(c), trace)


# λ scans ----------------------------------------------------------------------------


@dataclass
class LambdaScanReport:
    lambdas: List[float]
    counts: List[int]
    thresholds: List[dict]
    eigen_method: str
    energies: List[List[float]] = field(default_factory=list)
    misses: List[List[str]] = field(default_factory=list)

    def csv_rows(self):
        """(lambda, m, predicted_threshold, count) rows."""
        for lam, count in zip(self.lambdas, self.counts):
            for t in self.thresholds:
                yield lam, t["m"], t["threshold"], count


def predicted_thresholds(params: ProblemParams, eigs: EigenSequence, m_max: int) -> List[dict]:
    out = []
    for m in range(1, min(m_max, len(eigs)) + 1):
        lm = eigs.lambda_m(m)
        if params.q is None:
            res = threshold_p(m, lm, params, eigen_method=eigs.method)
        else:
            res = threshold_pq(m, lm, params, eigen_method=eigs.method)
        out.append(res.as_record())
    return out


def scan_lambda(
    space: P1Space,
    params: ProblemParams,
    lambdas: Sequence[float],
    config: SolverConfig,
    m_max: int,
    eigs: EigenSequence,
) -> LambdaScanReport:
    """Accepted-pair counts along an increasing λ grid, warm-started.

    Solutions found at one λ are carried to the next and re-polished there;
    those that re-converge keep their slots before new seeds are tried.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise ValueError("empty lambda grid")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    ceiling = ps_ceiling(params.N, params.p)
    report = LambdaScanReport(lambdas, [], predicted_thresholds(params, eigs, m_max), eigs.method)
    carried: List[CriticalPoint] = []
    for lam in lambdas:
        P = params.with_lambda(lam)
        kept: List[CriticalPoint] = []
        notes: List[str] = []
        for cp in carried:
            new = repolish(space, P, config, cp, kept)
            if new is None:
                notes.append(f"carried pair {cp.pair_tag} did not re-converge")
                continue
            reason = _try_accept(space, P, config, new, kept, ceiling)
            if reason is None:
                kept.append(_tagged(new, len(kept)))
            else:
                notes.append(f"carried pair {cp.pair_tag}: {reason}")
        res = deflated_multisolve(space, P, config, m_max, eigs, carried=kept)
        notes.extend(f"seed {m.seed_index}: {m.reason}" for m in res.misses)
        report.counts.append(len(res.points))
        report.energies.append([cp.energy for cp in res.points])
        report.misses.append(notes)
        carried = res.points
    return report


# audits -------------------------------------------------------------------------------


@dataclass
class OriginAudit:
    radii: List[float]
    min_energy: List[float]

    @property
    def positive(self) -> List[bool]:
        return [e > 0 for e in self.min_energy]


def origin_audit(
    space: P1Space, params: ProblemParams, radii: Sequence[float], starts: int = 6, seed: int = 0
) -> OriginAudit:
    """Estimate inf{E(u) : ‖∇u‖_p = ρ} for each radius ρ by multistart L-BFGS."""
    V, p = space, params.p
    rng = np.random.default_rng(seed)
    inits = [rng.standard_normal(V.ndofs) for _ in range(starts)]
    out = []
    for rho in radii:
        best = math.inf

        def fun(v):
            n = V.norm(v, p)
            c = rho * v / n
            g = energy_gradient(V, c, params)
            dn = n ** (1.0 - p) * V.grad_form(v, p)
            grad = (rho / n) * (g - float(g @ v) / n * dn)
            return energy_value(V, c, params), grad

        for v0 in inits:
            res = minimize(fun, v0, jac=True, method="L-BFGS-B", options={"maxiter": 300})
            best = min(best, float(res.fun))
        out.append(best)
    return OriginAudit(list(map(float, radii)), out)


def ray_positivity(space: P1Space, params: ProblemParams, n_dirs: int = 100, seed: int = 0,
                   t_grid: Sequence[float] = tuple(10.0 ** -np.arange(1, 9))) -> List[bool]:
    """For random unit directions u, whether E(tu) > 0 at the smallest grid t."""
    V = space
    rng = np.random.default_rng(seed)
    t_min = min(t_grid)
    out = []
    for _ in range(n_dirs):
        u = rng.standard_normal(V.ndofs)
        u /= V.norm(u, params.p)
        out.append(energy_value(V, t_min * u, params) > 0)
    return out


def resonant_origin_radius(h: HypothesisConstants, lam: float, lambda_1: float) -> float:
    """Radius below which 1 - qλ²‖u‖^{p-q}/(4pα₀λ₁^{2-q/p}) > 0 (r = p case)."""
    if h.q is None or h.alpha0 <= 0:
        raise ValueError("needs q and alpha0 > 0")
    p, q = h.p, h.q
    if lam == 0:
        return math.inf
    return (4.0 * p * h.alpha0 * lambda_1 ** (2.0 - q / p) / (q * lam**2)) ** (1.0 / (p - q))


@dataclass
class GeometryAudit:
    m: int
    lambda_m: float
    R_grid: List[float]
    sup_A: List[float]
    sup_X: List[float]
    cstar: float
    R_chosen: Optional[float]
    both_hold: bool
    max_rayleigh: float
    envelope_min_slack: float


def geometry_audit(
    space: P1Space,
    params: ProblemParams,
    m: int,
    eigs: EigenSequence,
    R_grid: Optional[Sequence[float]] = None,
    samples: int = 12,
    t_points: int = 33,
    seed: int = 0,
) -> GeometryAudit:
    """Test the two inequalities sup_A E ≤ 0 and sup_X E < c* on the family

        A = {R u : u in the normalized span of the first m eigenfunctions},
        X = {t v : v ∈ A, 0 ≤ t ≤ 1},

    and compare E(tRu) with the envelope bound at τ = tR/λ_m^{1/p}.
    """
    V, p = space, params.p
    if params.lam is None:
        raise ValueError("geometry audit needs lambda")
    h = constants_for(params)
    lm = eigs.lambda_m(m)
    rng = np.random.default_rng(seed)
    basis = [e.function.coefficients for e in eigs.pairs[:m]]
    family = list(basis)
    for _ in range(samples):
        w = rng.standard_normal(m)
        family.append(sum(wi * b for wi, b in zip(w, basis)))
    family = [c / V.norm(c, p) for c in family]
    max_ray = max(rayleigh(FemFunction(c, V), p) for c in family)
    if R_grid is None:
        R_grid = np.geomspace(0.1, 100.0, 31)
    ts = np.linspace(0.0, 1.0, t_points)[1:]
    sup_A, sup_X, slack = [], [], math.inf
    for R in R_grid:
        eA = max(energy_value(V, R * c, params) for c in family)
        best = 0.0
        for c in family:
            vals = np.array([energy_value(V, t * R * c, params) for t in ts])
            best = max(best, float(vals.max()))
            env = envelope_upper(h, lm, params.lam, ts * R / lm ** (1.0 / p))
            slack = min(slack, float(np.min(env - vals)))
        sup_A.append(eA)
        sup_X.append(best)
    chosen = None
    for R, a, x in zip(R_grid, sup_A, sup_X):
        if a <= 0 and x < h.cstar:
            chosen = float(R)
            break
    return GeometryAudit(m, lm, list(map(float, R_grid)), sup_A, sup_X, h.cstar, chosen,
                         chosen is not None, max_ray, slack)


# Palais-Smale diagnostic --------------------------------------------------------------


@dataclass(frozen=True)
class PSReport:
    ps_sequence: bool
    level: float
    near_ceiling: bool
    diverging: bool
    concentration_suspected: bool
    message: str


def ps_diagnostic(trace: IterationTrace, ceiling: float, stab_rtol: float = 1e-3,
                  grad_drop: float = 1e-3, near_frac: float = 0.05) -> PSReport:
    """Classify an iteration trace as a numerical Palais-Smale sequence.

    Energies must settle (relative spread over the last fifth of the trace
    below ``stab_rtol``) while gradient norms drop by ``grad_drop`` from
    their peak.  A level within ``near_frac`` of c* raises the concentration
    flag; norm blow-up over the tail is reported alongside.
    """
    E = np.asarray(trace.energies, dtype=float)
    G = np.asarray(trace.grad_norms, dtype=float)
    U = np.asarray(trace.norms, dtype=float)
    if E.size < 2:
        return PSReport(False, float(E[-1]) if E.size else math.nan, False, False, False, "trace too short")
    tail = max(2, E.size // 5)
    Et = E[-tail:]
    level = float(E[-1])
    stabilized = float(np.ptp(Et)) <= stab_rtol * max(1.0, abs(level))
    vanishing = G[-1] <= grad_drop * G.max() and G[-1] <= float(np.min(G[-tail:])) * (1.0 + 1e-12)
    ps = bool(stabilized and vanishing)
    near = abs(level - ceiling) <= near_frac * ceiling
    diverging = bool(U[-1] >= 2.0 * U[-tail]) if U.size else False
    conc = bool(ps and near)
    if not ps:
        msg = "no PS sequence detected"
    elif conc:
        msg = f"PS sequence at c = {level:.6g} within {near_frac:.0%} of c* = {ceiling:.6g}: concentration suspected"
    else:
        msg = f"PS sequence confirmed at c = {level:.6g}"
    return PSReport(ps, level, bool(near), diverging, conc, msg)
