"""Dense PSD solves, symmetric eigendecomposition and the kernel ridge estimator.

The estimator minimises (1/n) sum (y_i - f(x_i))^2 + alpha ||f||_H^2. By the
representer theorem f = sum c_i k(x_i, .) with (K + n alpha I) c = y; note the
shift is n*alpha because of the 1/n on the data term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .kernel import FunctionExpansion, KernelSpec, MarginalSpec, eval_expansion, gram


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class JitterPolicy:
    """Diagonal jitter ladder: start * trace(A)/n, multiplied by ``factor`` up to ``max_steps`` times."""

    start: float = 1e-12
    factor: float = 10.0
    max_steps: int = 6


def psd_solve(A: ArrayLike, b: ArrayLike, jitter: JitterPolicy = JitterPolicy()) -> NDArray[np.float64]:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {A.shape[0]}")
    scale = np.abs(A).max() if A.size else 0.0
    if np.abs(A - A.T).max(initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")

    try:
        return sla.cho_solve(sla.cho_factor(A, lower=True, check_finite=False), b, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    n = A.shape[0]
    eps = jitter.start * np.trace(A) / n
    for _ in range(jitter.max_steps):
        if eps > 0:
            try:
                cf = sla.cho_factor(A + eps * np.eye(n), lower=True, check_finite=False)
                return sla.cho_solve(cf, b, check_finite=False)
            except np.linalg.LinAlgError:
                pass
        eps *= jitter.factor
    raise NotPositiveDefiniteError("not positive definite (jitter exhausted)")


@dataclass(frozen=True)
class EigenSpectrum:
    eigenvalues: NDArray[np.float64]
    basis: NDArray[np.float64] | None = field(default=None, repr=False)


def sym_eig(A: ArrayLike, with_basis: bool = False) -> EigenSpectrum:
    """Eigenvalues in nonincreasing order; tiny negatives (>= -1e-10 * max) are clamped to 0."""
    A = np.asarray(A, dtype=float)
    if with_basis:
        w, V = np.linalg.eigh(A)
        w, V = w[::-1], V[:, ::-1]
    else:
        w, V = np.linalg.eigvalsh(A)[::-1], None
    w = w.copy()
    top = np.abs(w).max(initial=0.0)
    w[(w < 0) & (w >= -1e-10 * top)] = 0.0
    return EigenSpectrum(w, None if V is None else V.copy())


@dataclass(frozen=True)
class Dataset:
    xs: NDArray[np.float64]
    ys: NDArray[np.float64]

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).reshape(-1)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.size < 1 or xs.size != ys.size:
            raise ValueError(f"need n >= 1 paired values, got {xs.size} xs and {ys.size} ys")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return self.xs.size


@dataclass(frozen=True)
class KrrModel:
    spec: KernelSpec
    alpha: float
    expansion: FunctionExpansion


def fit(spec: KernelSpec, data: Dataset, alpha: float, jitter: JitterPolicy = JitterPolicy()) -> KrrModel:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    n = len(data)
    K = gram(spec, data.xs)
    A = K + (n * alpha) * np.eye(n)
    c = psd_solve(A, data.ys, jitter)
    return KrrModel(spec, float(alpha), FunctionExpansion(data.xs, c))


def predict(model: KrrModel, x):
    return eval_expansion(model.expansion, model.spec, x)


def population_solution_approx(
    spec: KernelSpec,
    marginal: MarginalSpec,
    f_star: FunctionExpansion,
    alpha: float,
    m: int,
    rng: np.random.Generator,
) -> FunctionExpansion:
    """Ridge fit on m noiseless pairs (X_j, f_star(X_j)), X_j ~ pi; tends to f_alpha as m grows."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    xs = marginal.sample(rng, m)
    ys = np.asarray(eval_expansion(f_star, spec, xs))
    return fit(spec, Dataset(xs, ys), alpha).expansion
