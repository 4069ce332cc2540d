"""Best Sobolev constant S(N, p) and the Palais-Smale energy ceiling.

The closed form is Talenti's extremal value.  It is never returned unchecked:
the first call for a given (N, p) recomputes the Rayleigh quotient of the
Aubin-Talenti bubble by radial quadrature and refuses to answer if the two
disagree.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .params import ParameterError, critical_exponent

SELF_TEST_RTOL = 1e-4


class SobolevSelfTestError(RuntimeError):
    pass


def _check(N: int, p: float) -> None:
    if int(N) != N or N < 2 or not 1.0 < p < N:
        raise ParameterError(f"Sobolev constant needs integer N >= 2 and 1 < p < N, got N={N}, p={p}")


def sobolev_constant_closed_form(N: int, p: float) -> float:
    """S = π^{p/2} N ((N-p)/(p-1))^{p-1} [Γ(N/p) Γ(1+N-N/p) / (Γ(1+N/2) Γ(N))]^{p/N}."""
    _check(N, p)
    log_ratio = (
        gammaln(N / p) + gammaln(1.0 + N - N / p) - gammaln(1.0 + N / 2.0) - gammaln(N)
    )
    log_s = (
        0.5 * p * math.log(math.pi)
        + math.log(N)
        + (p - 1.0) * math.log((N - p) / (p - 1.0))
        + (p / N) * log_ratio
    )
    return math.exp(log_s)


def _bubble_integrands(N: int, p: float):
    """Radial integrands |U'|^p ρ^{N-1} and U^{p*} ρ^{N-1} of the bubble
    U(ρ) = (1 + ρ^{p/(p-1)})^{-(N-p)/p}, evaluated in log-safe form."""
    pstar = critical_exponent(N, p)
    pp = p / (p - 1.0)
    k = (N - p) / (p - 1.0)

    def grad_term(rho):
        log1 = np.log1p(rho**pp)
        # |U'| = k ρ^{1/(p-1)} (1 + ρ^{p'})^{-N/p}
        return np.exp(
            p * (math.log(k) + np.log(rho) / (p - 1.0) - (N / p) * log1)
            + (N - 1.0) * np.log(rho)
        )

    def mass_term(rho):
        log1 = np.log1p(rho**pp)
        return np.exp(-pstar * (N - p) / p * log1 + (N - 1.0) * np.log(rho))

    return grad_term, mass_term


def _radial_integral(f, rho_min=1e-10, panels_per_decade=8, order=20, tail_tol=1e-12):
    """∫_0^∞ f(ρ) dρ by composite Gauss-Legendre in log ρ plus a power-law tail.

    The cut radius is the first ρ where the log-variable integrand f(ρ)ρ falls
    below ``tail_tol``; beyond it f is replaced by its local power law.
    """
    r_cut = 10.0
    while f(np.array([r_cut]))[0] * r_cut > tail_tol and r_cut < 1e15:
        r_cut *= 10.0
    t0, t1 = math.log(rho_min), math.log(r_cut)
    n_panels = max(1, int(math.ceil((t1 - t0) / math.log(10.0) * panels_per_decade)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(t0, t1, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ww = (half[:, None] * w[None, :]).ravel()
    rho = np.exp(t)
    body = float(np.sum(ww * f(rho) * rho))

    # local exponent f ~ c ρ^k at the cut, tail = -f(R) R/(k+1) for k < -1
    r_a, r_b = r_cut, r_cut * 1.01
    fa, fb = f(np.array([r_a, r_b]))
    k = math.log(fb / fa) / math.log(r_b / r_a)
    tail = -fa * r_a / (k + 1.0) if k < -1.0 else 0.0
    return body + tail


def bubble_quotient(N: int, p: float) -> float:
    """Sobolev quotient ‖∇U‖_p^p / ‖U‖_{p*}^p of the Aubin-Talenti bubble by radial quadrature."""
    _check(N, p)
    pstar = critical_exponent(N, p)
    sphere_area = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
    grad_term, mass_term = _bubble_integrands(N, p)
    grad = sphere_area * _radial_integral(grad_term)
    mass = sphere_area * _radial_integral(mass_term)
    return grad / mass ** (p / pstar)


@lru_cache(maxsize=None)
def _validated(N: int, p: float) -> float:
    closed = sobolev_constant_closed_form(N, p)
    oracle = bubble_quotient(N, p)
    if abs(closed - oracle) > SELF_TEST_RTOL * abs(oracle):
        raise SobolevSelfTestError(
            f"closed-form S({N}, {p}) = {closed!r} disagrees with quadrature {oracle!r}"
        )
    return closed


def sobolev_constant(N: int, p: float) -> float:
    """Best constant S in ‖∇u‖_p^p ≥ S ‖u‖_{p*}^p on R^N."""
    _check(N, p)
    return _validated(int(N), float(p))


def ps_ceiling(N: int, p: float, S: Optional[float] = None) -> float:
    """Energy level c* = S^{N/p}/N below which Palais-Smale sequences are compact.

    ``S`` overrides the Sobolev constant (useful to inject a known value).
    """
    _check(N, p)
    if S is None:
        S = sobolev_constant(N, p)
    return S ** (N / p) / N
