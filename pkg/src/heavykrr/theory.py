"""Closed-form bound and schedule calculators for ridge regression under heavy-tailed noise.

Conventions
-----------
- ``delta`` is the failure probability; bounds hold with confidence ``1 - delta``.
- ``q`` is the integer order of the finite noise moment E|eps|^q < Q and
  ``sigma`` the square root of the variance bound.
- ``c1 >= 1`` and ``c2 > 0`` are the (unspecified) Fuk-Nagaev constants;
  schedule and bound multipliers the theory leaves existential default to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .kernel import KernelSpec
from .krr import EigenSpectrum


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SourceCondition:
    nu: float = 0.5
    R: float = 1.0
    sup_norm_fstar: float = 0.0

    def __post_init__(self):
        if not self.nu >= 0.5:
            raise ParameterError(f"nu must be >= 1/2 (well-specified case), got {self.nu}")
        if not self.R > 0:
            raise ParameterError(f"R must be positive, got {self.R}")
        if not self.sup_norm_fstar >= 0:
            raise ParameterError(f"sup_norm_fstar must be >= 0, got {self.sup_norm_fstar}")


@dataclass(frozen=True)
class EigenDecay:
    p: float
    D: float = 1.0
    D_tilde: float = 1.0

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ParameterError(f"p must lie in (0, 1), got {self.p}")
        if not (self.D > 0 and self.D_tilde > 0):
            raise ParameterError("D and D_tilde must be positive")


@dataclass(frozen=True)
class FnConstants:
    c1: float = 1.0
    c2: float = 1.0
    c2_tilde: float = 1.0

    def __post_init__(self):
        if not self.c1 >= 1:
            raise ParameterError(f"c1 must be >= 1, got {self.c1}")
        if not (self.c2 > 0 and self.c2_tilde > 0):
            raise ParameterError("c2 and c2_tilde must be positive")


@dataclass(frozen=True)
class NoiseMoments:
    sigma: float
    Q: float
    q: int


@dataclass(frozen=True)
class BoundReport:
    total: float
    bias_term: float
    log_term: float
    mixed_term: float
    eta_term: float
    C_kappa: float
    C_diamond: float
    precondition_ok: bool


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")


def _check_n(n):
    if not n >= 1:
        raise ParameterError(f"n must be >= 1, got {n}")


def _check_q(q, minimum=3):
    if int(q) != q or q < minimum:
        raise ParameterError(f"q must be an integer >= {minimum}, got {q}")


def _check_moments(sigma, Q, q):
    if not (sigma > 0 and Q > 0):
        raise ParameterError("sigma and Q must be positive")
    _check_q(q)


def _smooth(nu: float) -> float:
    return min(nu, 1.0)


# --- capacity-free bound -----------------------------------------------------


def eta_capacity_free(delta: float, n: float, sigma: float, Q: float, q: int, c1: float = 1.0) -> float:
    """max{(Q/(delta n^{q-1}))^{1/q}, sigma sqrt(log(6 c1/delta)/n)}."""
    return max(*eta_capacity_free_branches(delta, n, sigma, Q, q, c1))


def eta_capacity_free_branches(delta, n, sigma, Q, q, c1=1.0) -> tuple[float, float]:
    """(polynomial, subgaussian) branches of the capacity-free eta."""
    _check_delta(delta)
    _check_n(n)
    _check_moments(sigma, Q, q)
    if not c1 >= 1:
        raise ParameterError(f"c1 must be >= 1, got {c1}")
    poly = (Q / (delta * n ** (q - 1))) ** (1.0 / q)
    sub = sigma * math.sqrt(math.log(6 * c1 / delta) / n)
    return poly, sub


def kernel_constant(kappa: float) -> float:
    """C_kappa = 2 (1 + sqrt(kappa)) max{1, kappa^2}."""
    return 2.0 * (1.0 + math.sqrt(kappa)) * max(1.0, kappa**2)


def diamond_constant(kappa: float, src: SourceCondition, q: int, fn: FnConstants) -> float:
    """C_diamond = 2 sqrt(2) max{C~, kappa max{(6 c1)^{1/q}, 1/sqrt(c2)}}, C~ = 2 kappa max{||f*||_inf + R kappa^{2 nu}, R}."""
    c_tilde = 2.0 * kappa * max(src.sup_norm_fstar + src.R * kappa ** (2 * src.nu), src.R)
    return 2.0 * math.sqrt(2.0) * max(c_tilde, kappa * max((6 * fn.c1) ** (1.0 / q), 1.0 / math.sqrt(fn.c2)))


def capacity_free_bound(
    alpha: float,
    delta: float,
    n: float,
    kernel: KernelSpec,
    src: SourceCondition,
    noise: NoiseMoments,
    fn: FnConstants = FnConstants(),
) -> BoundReport:
    """Excess-risk bound without eigenvalue-decay assumptions.

    R a^s + C_diamond / sqrt(a) * (L/n + sqrt(a^{2s} L / n) + eta), with s = min(nu, 1)
    and L = log(6/delta); valid when C_kappa L <= a sqrt(n) (reported, not enforced).
    """
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    kappa = kernel.kappa
    s = _smooth(src.nu)
    L = math.log(6.0 / delta)
    eta = eta_capacity_free(delta, n, noise.sigma, noise.Q, noise.q, fn.c1)
    C_k = kernel_constant(kappa)
    C_d = diamond_constant(kappa, src, noise.q, fn)
    pre = C_d / math.sqrt(alpha)
    bias = src.R * alpha**s
    log_term = pre * L / n
    mixed = pre * math.sqrt(alpha ** (2 * s) * L / n)
    eta_term = pre * eta
    return BoundReport(
        total=bias + log_term + mixed + eta_term,
        bias_term=bias,
        log_term=log_term,
        mixed_term=mixed,
        eta_term=eta_term,
        C_kappa=C_k,
        C_diamond=C_d,
        precondition_ok=C_k * L <= alpha * math.sqrt(n),
    )


# --- confidence regimes -------------------------------------------------------


def n0(delta: float, sigma: float, Q: float, q: int, c1: float = 1.0) -> float:
    """Effective sample size beyond which the subgaussian branch of eta dominates."""
    _check_delta(delta)
    if q == 2:
        raise ParameterError("q = 2 makes the n0 exponent singular; q >= 3 is required")
    _check_moments(sigma, Q, q)
    L = math.log(6 * c1 / delta)
    return (Q**2 / sigma ** (2 * q)) ** (1.0 / (q - 2)) * delta ** (-2.0 / (q - 2)) * L ** (-q / (q - 2))


def in_D1(n: float, delta: float, sigma: float, Q: float, q: int, c1: float = 1.0) -> bool:
    """Subgaussian confidence regime membership: n >= n0(delta)."""
    return n >= n0(delta, sigma, Q, q, c1)


def in_D2(n: float, delta: float, sigma: float, Q: float, q: int, c1: float = 1.0) -> bool:
    return not in_D1(n, delta, sigma, Q, q, c1)


# --- schedules ------------------------------------------------------------------


def schedule_alpha1(n: float, delta: float, nu: float, fn: FnConstants = FnConstants()) -> float:
    """c2_tilde (log(6 c1/delta)/n)^{1/(2 min(nu,1) + 1)}."""
    _check_delta(delta)
    _check_n(n)
    return fn.c2_tilde * (math.log(6 * fn.c1 / delta) / n) ** (1.0 / (2 * _smooth(nu) + 1))


class Alpha2(NamedTuple):
    value: float
    pre_clamp: float
    clamped: bool


def schedule_alpha2(n: float, delta: float, nu: float, q: int, kappa: float = 1.0) -> Alpha2:
    """Polynomial-regime schedule: max of the two rate branches, clamped from above at kappa^2."""
    _check_delta(delta)
    _check_n(n)
    _check_q(q)
    s = _smooth(nu)
    poly = (1.0 / (delta * n ** (q - 1))) ** (2.0 / (q * (2 * s + 1)))
    logb = math.log(6.0 / delta) / math.sqrt(n)
    pre = max(poly, logb)
    cap = kappa**2
    return Alpha2(min(pre, cap), pre, pre > cap)


def schedule_alpha_capacity(n: float, delta: float, nu: float, p: float, c1: float = 1.0) -> float:
    """(log(8 c1/delta)/n)^{1/(2 min(nu,1) + p)}."""
    _check_delta(delta)
    _check_n(n)
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    return (math.log(8 * c1 / delta) / n) ** (1.0 / (2 * _smooth(nu) + p))


# --- effective dimension --------------------------------------------------------


def effective_dimension(spectrum: EigenSpectrum | np.ndarray, alpha: float) -> float:
    """sum_i lambda_i / (lambda_i + alpha).

    For a plug-in estimate pass the eigenvalues of K/n.
    """
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    lam = np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)
    return float(np.sum(lam / (lam + alpha)))


def effective_dimension_bound(decay: EigenDecay, alpha: float) -> float:
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    return decay.D_tilde * alpha ** (-decay.p)


def calibrate_D_tilde(spectrum: EigenSpectrum | np.ndarray, p: float, alphas) -> float:
    """Smallest D_tilde with N(alpha) <= D_tilde alpha^{-p} on the given grid."""
    return max(effective_dimension(spectrum, a) * a**p for a in alphas)


# --- capacity-dependent bound ---------------------------------------------------


def eta_capacity_branches(delta: float, n: float, alpha: float, effdim: float, q: int, c1: float = 1.0):
    """(polynomial, subgaussian) branches of eta(delta, n, alpha)."""
    _check_delta(delta)
    _check_n(n)
    _check_q(q)
    if not (alpha > 0 and effdim > 0):
        raise ParameterError("alpha and the effective dimension must be positive")
    poly = (1.0 / (delta * n ** (q - 1))) ** (1.0 / q) * (1.0 / (alpha * effdim)) ** ((q - 2) / (2.0 * q))
    sub = math.sqrt(math.log(8 * c1 / delta) / n)
    return poly, sub


def eta_capacity(delta, n, alpha, effdim, q, c1=1.0) -> float:
    return max(*eta_capacity_branches(delta, n, alpha, effdim, q, c1))


def capacity_precondition(alpha: float, delta: float, n: float, kappa: float, decay: EigenDecay) -> float:
    """Left-hand side of the admissibility inequality; admissible when <= 1."""
    return math.log(2.0 / delta) * (
        2 * kappa**2 / (n * alpha) + 2 * math.sqrt(decay.D_tilde) * kappa / (math.sqrt(n) * alpha ** ((1 + decay.p) / 2))
    )


EffDim = EigenSpectrum | np.ndarray | Callable[[float], float] | None


def _resolve_effdim(spectrum: EffDim, decay: EigenDecay, alpha: float) -> float:
    if spectrum is None:
        return effective_dimension_bound(decay, alpha)
    if callable(spectrum):
        return float(spectrum(alpha))
    return effective_dimension(spectrum, alpha)


def capacity_bound(
    alpha: float,
    delta: float,
    n: float,
    kernel: KernelSpec,
    src: SourceCondition,
    decay: EigenDecay,
    noise: NoiseMoments,
    fn: FnConstants = FnConstants(),
    spectrum: EffDim = None,
    multiplier: float = 1.0,
) -> BoundReport:
    """Capacity-dependent bound c (a^s + L/(sqrt(a) n) + sqrt(N L/n) + sqrt(N) eta(delta, n, a)), L = log(8/delta).

    ``spectrum`` supplies N(alpha): an eigenvalue spectrum (plug-in), a callable
    alpha -> N(alpha), or None for the decay bound D_tilde alpha^{-p}.
    ``multiplier`` is the unspecified constant c.
    """
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    kappa = kernel.kappa
    s = _smooth(src.nu)
    L = math.log(8.0 / delta)
    N = _resolve_effdim(spectrum, decay, alpha)
    eta = eta_capacity(delta, n, alpha, N, noise.q, fn.c1)
    bias = multiplier * alpha**s
    log_term = multiplier * L / (math.sqrt(alpha) * n)
    mixed = multiplier * math.sqrt(N * L / n)
    eta_term = multiplier * math.sqrt(N) * eta
    return BoundReport(
        total=bias + log_term + mixed + eta_term,
        bias_term=bias,
        log_term=log_term,
        mixed_term=mixed,
        eta_term=eta_term,
        C_kappa=kernel_constant(kappa),
        C_diamond=diamond_constant(kappa, src, noise.q, fn),
        precondition_ok=capacity_precondition(alpha, delta, n, kappa, decay) <= 1.0,
    )


# --- Fuk-Nagaev confidence bound ------------------------------------------------


def fn_confidence_branches(delta, n, sigma, Q, q, fn: FnConstants = FnConstants()) -> tuple[float, float]:
    """(polynomial, subgaussian) branches of the Fuk-Nagaev confidence bound."""
    _check_delta(delta)
    _check_n(n)
    _check_moments(sigma, Q, q)
    poly = (2 * fn.c1 * Q / (delta * n ** (q - 1))) ** (1.0 / q)
    sub = sigma * math.sqrt(math.log(2 * fn.c1 / delta) / (fn.c2 * n))
    return poly, sub


def fn_confidence_bound(delta, n, sigma, Q, q, fn: FnConstants = FnConstants()) -> float:
    """Radius t with P(||S_n/n|| <= t) >= 1 - delta."""
    return max(*fn_confidence_branches(delta, n, sigma, Q, q, fn))


class RegimeChange(NamedTuple):
    delta: float
    residual: float  # |LHS - RHS| / RHS
    found: bool


def regime_change_delta(
    n: float, sigma: float, Q: float, q: int, fn: FnConstants = FnConstants(), tol: float = 1e-10
) -> RegimeChange:
    """delta_bar(n) where the two Fuk-Nagaev branches coincide, by bisection on log delta.

    Searches (1e-30, 1 - 1e-12). If the branch difference has no sign change
    there, the endpoint with the smaller residual is returned with ``found=False``.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")

    def g(log_d):
        poly, sub = fn_confidence_branches(math.exp(log_d), n, sigma, Q, q, fn)
        return math.log(poly) - math.log(sub)

    def residual(log_d):
        poly, sub = fn_confidence_branches(math.exp(log_d), n, sigma, Q, q, fn)
        return abs(poly - sub) / sub

    lo, hi = math.log(1e-30), math.log1p(-1e-12)
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0:
        return RegimeChange(math.exp(lo), 0.0, True)
    if g_hi == 0:
        return RegimeChange(math.exp(hi), 0.0, True)
    if (g_lo > 0) == (g_hi > 0):
        r_lo, r_hi = residual(lo), residual(hi)
        best = lo if r_lo <= r_hi else hi
        return RegimeChange(math.exp(best), min(r_lo, r_hi), False)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if r <= tol or hi - lo < 1e-15:
            return RegimeChange(math.exp(mid), r, True)
        g_mid = g(mid)
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return RegimeChange(math.exp(mid), residual(mid), True)
