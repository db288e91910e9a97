"""Excess risk ||f_hat - f_star||_{L2(pi)} and empirical quantiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .kernel import FunctionExpansion, KernelSpec, MarginalSpec, eval_expansion, l2_inner_matrix


@dataclass(frozen=True)
class RiskEstimate:
    """The L2(pi) norm of the difference (not its square)."""

    value: float
    method: Literal["closed_form", "monte_carlo"]
    std_error: float = 0.0


def excess_risk_closed(
    spec: KernelSpec, marginal: MarginalSpec, f_hat: FunctionExpansion, f_star: FunctionExpansion
) -> RiskEstimate:
    try:
        d = (f_hat - f_star).merged()
        if len(d) == 0:
            return RiskEstimate(0.0, "closed_form")
        M = l2_inner_matrix(spec, marginal, d.centers, d.centers)
    except NotImplementedError as exc:
        raise NotImplementedError(f"{exc}; use excess_risk_mc instead") from None
    quad = float(d.coefficients @ M @ d.coefficients)
    if quad < -1e-12:
        raise ArithmeticError(f"negative quadratic form {quad:g} in L2 norm")
    return RiskEstimate(math.sqrt(max(quad, 0.0)), "closed_form")


class ClosedFormRisk:
    """Closed-form risk against a fixed target, caching the target's self inner products.

    Equivalent to :func:`excess_risk_closed` but avoids rebuilding the
    target-target block for every trial.
    """

    def __init__(self, spec: KernelSpec, marginal: MarginalSpec, f_star: FunctionExpansion):
        self.spec, self.marginal, self.f_star = spec, marginal, f_star
        if len(f_star):
            M = l2_inner_matrix(spec, marginal, f_star.centers, f_star.centers)
            self._star_sq = float(f_star.coefficients @ M @ f_star.coefficients)
        else:
            self._star_sq = 0.0

    def __call__(self, f_hat: FunctionExpansion) -> float:
        c, u = f_hat.coefficients, f_hat.centers
        a, z = self.f_star.coefficients, self.f_star.centers
        quad = self._star_sq
        if len(f_hat):
            quad += c @ l2_inner_matrix(self.spec, self.marginal, u, u) @ c
            if len(self.f_star):
                quad -= 2.0 * (c @ l2_inner_matrix(self.spec, self.marginal, u, z) @ a)
        quad = float(quad)
        # cancellation between the three blocks is relative to their size
        tol = 1e-12 * max(1.0, abs(self._star_sq))
        if quad < -tol:
            raise ArithmeticError(f"negative quadratic form {quad:g} in L2 norm")
        return math.sqrt(max(quad, 0.0))


def excess_risk_mc(
    spec: KernelSpec,
    marginal: MarginalSpec,
    f_hat: FunctionExpansion,
    f_star: FunctionExpansion,
    m: int,
    rng: np.random.Generator,
    chunk: int = 65536,
) -> RiskEstimate:
    """Monte-Carlo root-mean-square difference with a delta-method standard error."""
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    d = (f_hat - f_star).merged()
    xs = marginal.sample(rng, m)
    sq = np.empty(m)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        sq[start:stop] = np.asarray(eval_expansion(d, spec, xs[start:stop])) ** 2
    msq = float(sq.mean())
    if msq == 0.0:
        return RiskEstimate(0.0, "monte_carlo", 0.0)
    se_msq = float(sq.std(ddof=1)) / math.sqrt(m)
    root = math.sqrt(msq)
    # d sqrt(u)/du = 1 / (2 sqrt(u))
    return RiskEstimate(root, "monte_carlo", se_msq / (2.0 * root))


def quantile_index(level: float, count: int) -> int:
    """1-based index k of the smallest order statistic with k/count >= level."""
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level}")
    k = max(1, math.ceil(level * count))
    # ceil(level*count) can be off by one when level*count rounds across an integer
    while k > 1 and (k - 1) / count >= level:
        k -= 1
    while k < count and k / count < level:
        k += 1
    return k


def empirical_quantile(values: Sequence[float], level: float) -> float:
    """inf{t : #(values <= t)/M >= level}, with level 0 giving the minimum."""
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise ValueError("empirical_quantile of an empty sequence")
    return float(v[quantile_index(level, v.size) - 1])


def empirical_quantiles(values: Sequence[float], levels: Sequence[float]) -> list[float]:
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise ValueError("empirical_quantile of an empty sequence")
    return [float(v[quantile_index(lv, v.size) - 1]) for lv in levels]
