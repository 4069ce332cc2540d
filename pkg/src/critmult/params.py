"""Problem parameters and the abstract hypothesis constants.

``ProblemParams`` describes the concrete critical problem

    -Δ_p u [- Δ_q u] = λ |u|^{r-2} u + |u|^{p*-2} u   in Ω,   u = 0 on ∂Ω,

and ``HypothesisConstants`` the constants (α₀, α, β, γ, c*) of the abstract
multiplicity results.  ``constants_for`` performs the Hölder-inequality
substitutions that turn the former into the latter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional


class ParameterError(ValueError):
    """Exponents or constants outside the admissible range."""


def critical_exponent(N: int, p: float) -> float:
    """Critical Sobolev exponent p* = Np/(N - p)."""
    if not 1.0 < p < N:
        raise ParameterError(f"critical exponent needs 1 < p < N, got N={N}, p={p}")
    return N * p / (N - p)


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    r: float
    volume: float
    q: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N}")
        if not 1.0 < self.p < self.N:
            raise ParameterError(f"need 1 < p < N, got p={self.p}, N={self.N}")
        if self.q is not None and not 1.0 < self.q < self.p:
            raise ParameterError(f"need 1 < q < p, got q={self.q}, p={self.p}")
        if not self.p <= self.r < self.pstar:
            raise ParameterError(
                f"need p <= r < p* = {self.pstar:.6g}, got r={self.r}"
            )
        if not self.volume > 0:
            raise ParameterError(f"volume must be positive, got {self.volume}")
        if self.lam is not None and self.lam < 0:
            raise ParameterError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def pstar(self) -> float:
        return critical_exponent(self.N, self.p)

    @property
    def model(self) -> str:
        return "p-only" if self.q is None else "pq"

    def with_lambda(self, lam: float) -> "ProblemParams":
        return replace(self, lam=lam)

    def with_volume(self, volume: float) -> "ProblemParams":
        return replace(self, volume=volume)


@dataclass(frozen=True)
class HypothesisConstants:
    """Constants of the growth hypotheses on F, G and H.

    ``alpha = 0`` is the specialization without the F term (then ``q`` may be
    omitted).  ``alpha0`` only matters for the origin diagnostic of the
    resonant (r = p) case.
    """

    p: float
    r: float
    pstar: float
    beta: float
    gamma: float
    cstar: float
    alpha: float = 0.0
    q: Optional[float] = None
    alpha0: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not self.cstar > 0:
            raise ParameterError(f"c* must be positive, got {self.cstar}")
        if self.alpha < 0 or self.alpha0 < 0:
            raise ParameterError("alpha and alpha0 must be nonnegative")
        if self.alpha > 0 and self.q is None:
            raise ParameterError("alpha > 0 requires the exponent q")
        if self.q is not None and not 1.0 < self.q < self.p:
            raise ParameterError(f"need 1 < q < p, got q={self.q}, p={self.p}")
        if not self.p > 1.0:
            raise ParameterError(f"need p > 1, got {self.p}")
        if not self.p <= self.r < self.pstar:
            raise ParameterError(
                f"need p <= r < p*, got p={self.p}, r={self.r}, p*={self.pstar}"
            )


def constants_for(params: ProblemParams, cstar: Optional[float] = None) -> HypothesisConstants:
    """Hölder constants for the concrete problem.

    α = |Ω|^{1-q/p} (0 without the q-term), β = |Ω|^{1-r/p},
    γ = |Ω|^{-p/(N-p)}, and c* = S^{N/p}/N unless given.
    """
    from .sobolev import ps_ceiling

    vol, p, N = params.volume, params.p, params.N
    if cstar is None:
        cstar = ps_ceiling(N, p)
    alpha = vol ** (1.0 - params.q / p) if params.q is not None else 0.0
    return HypothesisConstants(
        p=p,
        r=params.r,
        pstar=params.pstar,
        beta=vol ** (1.0 - params.r / p),
        gamma=vol ** (-p / (N - p)),
        cstar=cstar,
        alpha=alpha,
        q=params.q,
    )
