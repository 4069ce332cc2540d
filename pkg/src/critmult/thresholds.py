"""Multiplicity thresholds: power-law brackets in τ and their suprema.

Every threshold has the shape ``scale * sup_{τ>0} Σ c_i τ^{e_i}`` (plus an
offset in the resonant case).  The brackets tend to -∞ at both ends of
(0, ∞), so the supremum is attained; ``sup_tau`` locates it by a coarse
log-grid scan followed by golden-section refinement in log τ.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .params import HypothesisConstants, ParameterError, ProblemParams, critical_exponent
from .sobolev import sobolev_constant

COARSE_POINTS = 256
TAU_RANGE = (1e-6, 1e6)
TAU_TOL = 1e-12
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class BracketError(ValueError):
    """Bracket whose supremum is not attained in the interior of (0, ∞)."""


@dataclass(frozen=True)
class BracketFunction:
    """Σ coefficient·τ^exponent on τ > 0, with equal exponents merged."""

    terms: tuple

    @classmethod
    def from_terms(cls, terms: Iterable[tuple]) -> "BracketFunction":
        merged: dict = {}
        for c, e in terms:
            merged[float(e)] = merged.get(float(e), 0.0) + float(c)
        kept = tuple((c, e) for e, c in sorted(merged.items()) if c != 0.0)
        if not kept:
            raise BracketError("bracket has no nonzero terms")
        return cls(kept)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        for c, e in self.terms:
            out = out + c * tau**e
        return out if out.ndim else float(out)

    def end_limits(self):
        """Limits of the bracket as τ → 0⁺ and τ → ∞ (each ±inf or finite)."""

        def limit(c, e):
            if e == 0:
                return c
            return 0.0 if c == 0 else math.copysign(math.inf, c)

        (c_lo, e_lo), (c_hi, e_hi) = self.terms[0], self.terms[-1]
        at_zero = limit(c_lo, e_lo) if e_lo <= 0 else 0.0
        at_inf = limit(c_hi, e_hi) if e_hi >= 0 else 0.0
        return at_zero, at_inf

    def check_end_behavior(self) -> None:
        """Raise if the bracket is unbounded above at either end of (0, ∞)."""
        for where, lim in zip(("0", "inf"), self.end_limits()):
            if lim == math.inf:
                raise BracketError(f"bracket tends to +inf as tau -> {where}")


@dataclass(frozen=True)
class ThresholdResult:
    m: int
    lambda_m: float
    tau_star: float
    sup_value: float
    threshold: float
    eigen_method: Optional[str] = None

    @property
    def all_lambda_admissible(self) -> bool:
        # a nonpositive bound means every λ > 0 satisfies the strict inequality
        return self.threshold <= 0.0

    def as_record(self) -> dict:
        rec = asdict(self)
        rec["all_lambda_admissible"] = self.all_lambda_admissible
        return rec


def _golden_max(g, a: float, b: float, tol: float):
    """Golden-section maximization of g on [a, b] (log-τ coordinates)."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + INV_PHI * (b - a)
            gd = g(d)
    return (c, gc) if gc >= gd else (d, gd)


def sup_tau(f: BracketFunction, tol: float = TAU_TOL):
    """Return (τ*, f(τ*)) maximizing the bracket over τ > 0.

    The coarse scan covers 256 log-uniform points on [1e-6, 1e6]; if the best
    point sits at an end of that window the window is widened until the
    maximizer is interior.
    """
    f.check_end_behavior()
    lo, hi = math.log(TAU_RANGE[0]), math.log(TAU_RANGE[1])

    def g(t):
        return f(math.exp(t))

    while True:
        ts = np.linspace(lo, hi, COARSE_POINTS)
        vals = f(np.exp(ts))
        i = int(np.argmax(vals))
        if 0 < i < COARSE_POINTS - 1:
            break
        if i == 0:
            lo -= (hi - lo) / 2.0
        else:
            hi += (hi - lo) / 2.0
        if hi - lo > 300.0:
            raise BracketError("maximizer escaped every search window")
    a, b = ts[i - 1], ts[i + 1]
    tau_guess = math.exp(ts[i])
    # abs. tolerance in τ translated to log τ; floored at float resolution
    log_tol = max(tol / tau_guess, 8.0 * np.finfo(float).eps)
    t_star, v_star = _golden_max(g, a, b, log_tol)
    if v_star < vals[i]:
        t_star, v_star = ts[i], float(vals[i])
    if any(v_star <= lim for lim in f.end_limits()):
        raise BracketError("supremum is approached at the boundary, not attained")
    return math.exp(t_star), float(v_star)


# bracket builders ---------------------------------------------------------


def bracket_p(lambda_m: float, params: ProblemParams, cstar: float) -> BracketFunction:
    """λ_m/(p τ^{r-p}) - c*/τ^r - τ^{p*-r}/(p* |Ω|^{p/(N-p)})."""
    p, r, N, vol = params.p, params.r, params.N, params.volume
    ps = params.pstar
    return BracketFunction.from_terms(
        [
            (lambda_m / p, -(r - p)),
            (-cstar, -r),
            (-1.0 / (ps * vol ** (p / (N - p))), ps - r),
        ]
    )


def bracket_pq(lambda_m: float, params: ProblemParams, cstar: float, alpha: float) -> BracketFunction:
    """The p-only bracket plus α λ_m^{q/p}/(q τ^{r-q})."""
    p, q, r = params.p, params.q, params.r
    base = bracket_p(lambda_m, params, cstar)
    return BracketFunction.from_terms(list(base.terms) + [(alpha * lambda_m ** (q / p) / q, -(r - q))])


def bracket_general(h: HypothesisConstants, lambda_m: float) -> BracketFunction:
    p, r, ps = h.p, h.r, h.pstar
    terms = [
        (lambda_m / p, -(r - p)),
        (-h.cstar, -r),
        (-h.gamma / ps, ps - r),
    ]
    if h.alpha > 0:
        terms.append((h.alpha * lambda_m ** (h.q / p) / h.q, -(r - h.q)))
    return BracketFunction.from_terms(terms)


def bracket_resonant(h: HypothesisConstants, lambda_m: float) -> BracketFunction:
    p, ps = h.p, h.pstar
    terms = [(-h.cstar, -p), (-h.gamma / ps, ps - p)]
    if h.alpha > 0:
        terms.append((h.alpha * lambda_m ** (h.q / p) / h.q, -(p - h.q)))
    return BracketFunction.from_terms(terms)


# thresholds ---------------------------------------------------------------


def _check_index(m: int, lambda_m: float) -> None:
    if int(m) != m or m < 1:
        raise ParameterError(f"index m must be a positive integer, got {m}")
    if not lambda_m > 0:
        raise ParameterError(f"lambda_m must be positive, got {lambda_m}")


def threshold_p(
    m: int,
    lambda_m: float,
    params: ProblemParams,
    *,
    S: Optional[float] = None,
    eigen_method: Optional[str] = None,
) -> ThresholdResult:
    """Lower bound on λ for m solution pairs of the p-Laplacian problem.

    r |Ω|^{r/p-1} sup_τ [λ_m/(pτ^{r-p}) - S^{N/p}/(Nτ^r) - τ^{p*-r}/(p*|Ω|^{p/(N-p)})]
    """
    _check_index(m, lambda_m)
    if params.q is not None:
        raise ParameterError("threshold_p is for the pure p-Laplacian model; use threshold_pq")
    if not params.p < params.r:
        raise ParameterError(f"threshold_p needs p < r < p*, got r={params.r}, p={params.p}")
    if S is None:
        S = sobolev_constant(params.N, params.p)
    cstar = S ** (params.N / params.p) / params.N
    f = bracket_p(lambda_m, params, cstar)
    tau, val = sup_tau(f)
    scale = params.r * params.volume ** (params.r / params.p - 1.0)
    return ThresholdResult(int(m), float(lambda_m), tau, val, scale * val, eigen_method)


def threshold_pq(
    m: int,
    lambda_m: float,
    params: ProblemParams,
    *,
    alpha: Optional[float] = None,
    S: Optional[float] = None,
    eigen_method: Optional[str] = None,
) -> ThresholdResult:
    """Lower bound on λ for m solution pairs of the (p,q)-Laplacian problem.

    For p < r < p* this is the p-only bound with the extra bracket term
    α λ_m^{q/p}/(q τ^{r-q}), α = |Ω|^{1-q/p}.  For r = p ≤ q* it is the
    resonant bound ``nu_resonant``.  ``alpha`` overrides α.
    """
    _check_index(m, lambda_m)
    if params.q is None:
        raise ParameterError("threshold_pq needs the exponent q")
    p, q, r, N, vol = params.p, params.q, params.r, params.N, params.volume
    if alpha is None:
        alpha = vol ** (1.0 - q / p)
    if S is None:
        S = sobolev_constant(N, p)
    cstar = S ** (N / p) / N
    if r > p:
        f = bracket_pq(lambda_m, params, cstar, alpha)
        tau, val = sup_tau(f)
        scale = r * vol ** (r / p - 1.0)
        return ThresholdResult(int(m), float(lambda_m), tau, val, scale * val, eigen_method)
    qstar = critical_exponent(N, q)
    if p > qstar:
        raise ParameterError(f"r = p needs p <= q* = {qstar:.6g}, got p={p}")
    h = HypothesisConstants(
        p=p, r=p, pstar=params.pstar, beta=1.0, gamma=vol ** (-p / (N - p)),
        cstar=cstar, alpha=alpha, q=q,
    )
    res = nu_resonant(h, lambda_m, m=m)
    return ThresholdResult(res.m, res.lambda_m, res.tau_star, res.sup_value, res.threshold, eigen_method)


def nu_general(h: HypothesisConstants, lambda_m: float, m: int = 1) -> ThresholdResult:
    """(r/β) sup_τ [λ_m/(pτ^{r-p}) + αλ_m^{q/p}/(qτ^{r-q}) - c*/τ^r - γτ^{p*-r}/p*]."""
    _check_index(m, lambda_m)
    if not h.r > h.p:
        raise ParameterError("nu_general needs r > p; use nu_resonant for r = p")
    tau, val = sup_tau(bracket_general(h, lambda_m))
    return ThresholdResult(int(m), float(lambda_m), tau, val, h.r / h.beta * val)


def nu_resonant(h: HypothesisConstants, lambda_m: float, m: int = 1) -> ThresholdResult:
    """λ_m + p sup_τ [αλ_m^{q/p}/(qτ^{p-q}) - c*/τ^p - γτ^{p*-p}/p*]."""
    _check_index(m, lambda_m)
    if h.r != h.p:
        raise ParameterError("nu_resonant is the r = p bound")
    tau, val = sup_tau(bracket_resonant(h, lambda_m))
    return ThresholdResult(int(m), float(lambda_m), tau, val, lambda_m + h.p * val)


# envelopes ----------------------------------------------------------------


def envelope_upper(
    h: HypothesisConstants, lambda_m: float, lam: float, tau_grid: Sequence[float]
) -> np.ndarray:
    """Upper bound for E(tu) along the test family, as a function of τ = tR/λ_m^{1/p}:

        τ^p λ_m/p + ατ^q λ_m^{q/p}/q - λβτ^r/r - γτ^{p*}/p*.

    With r = p and β = 1 this is the resonant form τ^p(λ_m - λ)/p + ... .
    """
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau <= 0):
        raise ParameterError("tau grid must be positive")
    p, r, ps = h.p, h.r, h.pstar
    out = tau**p * lambda_m / p - lam * h.beta * tau**r / r - h.gamma * tau**ps / ps
    if h.alpha > 0:
        out = out + h.alpha * tau**h.q * lambda_m ** (h.q / p) / h.q
    return out


def envelope_at_radius(h: HypothesisConstants, lambda_m: float, lam: float, R) -> np.ndarray:
    """Upper bound for E(Ru) over the eigen-sublevel set at radius R:

        R^p/p + αR^q/q - λβR^r/(rλ_m^{r/p}) - γR^{p*}/(p*λ_m^{p*/p}).
    """
    R = np.asarray(R, dtype=float)
    p, r, ps = h.p, h.r, h.pstar
    out = R**p / p - lam * h.beta * R**r / (r * lambda_m ** (r / p)) - h.gamma * R**ps / (
        ps * lambda_m ** (ps / p)
    )
    if h.alpha > 0:
        out = out + h.alpha * R**h.q / h.q
    return out
