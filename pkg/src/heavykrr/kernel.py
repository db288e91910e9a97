"""Gaussian kernel, Gram matrices, finite kernel expansions and their L2(pi) inner products.

Inputs are scalar reals. The covariate law pi is the standard normal, for which
E[k(a, X) k(b, X)] has a closed form; everything downstream that needs an
L2(pi) norm of a kernel expansion goes through :func:`l2_inner_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel k(u, v) = exp(-(u - v)^2 / (2 bandwidth^2)) with sup bound kappa."""

    family: Literal["rbf"] = "rbf"
    bandwidth: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.family != "rbf":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.kappa != 1.0:
            raise ValueError("rbf kernel has kappa = 1 exactly")


@dataclass(frozen=True)
class MarginalSpec:
    law: Literal["standard_normal"] = "standard_normal"

    def __post_init__(self):
        if self.law != "standard_normal":
            raise ValueError(f"unsupported marginal {self.law!r}")

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return rng.standard_normal(size)


@dataclass(frozen=True)
class FunctionExpansion:
    """x -> sum_i coefficients[i] * k(centers[i], x)."""

    centers: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    coefficients: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        c = np.array(self.centers, dtype=float).reshape(-1)
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        if c.shape != a.shape:
            raise ValueError(f"centers ({c.size}) and coefficients ({a.size}) differ in length")
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "coefficients", a)

    def __len__(self) -> int:
        return self.centers.size

    def __sub__(self, other: FunctionExpansion) -> FunctionExpansion:
        return FunctionExpansion(
            np.concatenate([self.centers, other.centers]),
            np.concatenate([self.coefficients, -other.coefficients]),
        )

    def merged(self) -> FunctionExpansion:
        """Same function with repeated centers combined and zero terms dropped.

        Keeps exact cancellation (f - f is the empty expansion) out of the
        floating-point quadratic forms downstream.
        """
        if len(self) == 0:
            return self
        uniq, inv = np.unique(self.centers, return_inverse=True)
        coef = np.zeros(uniq.size)
        np.add.at(coef, inv, self.coefficients)
        keep = coef != 0.0
        return FunctionExpansion(uniq[keep], coef[keep])


def eval_kernel(spec: KernelSpec, u: float, v: float) -> float:
    return float(np.exp(-((u - v) ** 2) / (2.0 * spec.bandwidth**2)))


def cross_gram(spec: KernelSpec, a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    diff = a[:, None] - b[None, :]
    return np.exp(-(diff**2) / (2.0 * spec.bandwidth**2))


def gram(spec: KernelSpec, points: ArrayLike) -> NDArray[np.float64]:
    points = np.asarray(points, dtype=float).reshape(-1)
    if points.size == 0:
        raise ValueError("empty point set")
    G = cross_gram(spec, points, points)
    # exact symmetry, not just up to rounding of (a-b)^2 vs (b-a)^2
    return 0.5 * (G + G.T)


def eval_expansion(expansion: FunctionExpansion, spec: KernelSpec, x: ArrayLike):
    """Evaluate the expansion at a scalar or an array of points."""
    xs = np.asarray(x, dtype=float)
    if len(expansion) == 0:
        out = np.zeros(xs.shape)
    else:
        out = expansion.coefficients @ cross_gram(spec, expansion.centers, xs.reshape(-1))
        out = out.reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def _check_closed_form(spec: KernelSpec, marginal: MarginalSpec) -> None:
    if spec.family != "rbf" or marginal.law != "standard_normal":
        raise NotImplementedError("no closed form for this kernel/marginal pair; use quadrature")


def l2_inner_matrix(
    spec: KernelSpec, marginal: MarginalSpec, a: ArrayLike, b: ArrayLike
) -> NDArray[np.float64]:
    """Matrix of E_{X~N(0,1)}[k(a_i, X) k(b_j, X)].

    With beta = 1/bandwidth^2 and m = (a+b)/2, the product of the two kernels is
    exp(-beta (a-b)^2 / 4) * exp(-beta (X-m)^2), and
    E exp(-beta (X-m)^2) = exp(-beta m^2 / (1 + 2 beta)) / sqrt(1 + 2 beta).
    """
    _check_closed_form(spec, marginal)
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    beta = 1.0 / spec.bandwidth**2
    s = 1.0 + 2.0 * beta
    d = a[:, None] - b[None, :]
    m = 0.5 * (a[:, None] + b[None, :])
    return np.exp(-beta * d**2 / 4.0 - beta * m**2 / s) / np.sqrt(s)


def l2_inner(spec: KernelSpec, marginal: MarginalSpec, a: float, b: float) -> float:
    return float(l2_inner_matrix(spec, marginal, [a], [b])[0, 0])


def l2_norm(spec: KernelSpec, marginal: MarginalSpec, f: FunctionExpansion) -> float:
    """||f||_{L2(pi)} of a kernel expansion, via the closed-form inner products."""
    if len(f) == 0:
        return 0.0
    M = l2_inner_matrix(spec, marginal, f.centers, f.centers)
    q = float(f.coefficients @ M @ f.coefficients)
    return float(np.sqrt(max(q, 0.0)))


def sup_norm_bound(f: FunctionExpansion, spec: KernelSpec) -> float:
    """sum |c_i| * kappa^2, an upper bound on sup_x |f(x)|."""
    return float(np.abs(f.coefficients).sum() * spec.kappa**2)
