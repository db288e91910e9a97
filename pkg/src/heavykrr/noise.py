"""Centered noise laws with moment metadata.

Three families are supported: Gaussian, Student t and a Pareto law shifted by
its mean. Each model knows its variance, the largest integer order q with a
finite absolute moment and the value of E|eps|^q, which are the constants
(sigma^2, q, Q) entering the moment condition of the risk bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import integrate
from scipy.special import gammaln


class InfiniteVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """A centered noise law.

    ``gaussian`` uses ``variance``; ``student_t`` uses ``df``;
    ``pareto_centered`` uses ``shape`` and ``scale``. A Gaussian with variance 0
    is allowed as a noiseless stub.
    """

    kind: Literal["gaussian", "student_t", "pareto_centered"]
    variance: float | None = None
    df: float | None = None
    shape: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.variance is None or not (self.variance >= 0 and math.isfinite(self.variance)):
                raise ValueError(f"gaussian noise needs a finite variance >= 0, got {self.variance}")
        elif self.kind == "student_t":
            if self.df is None or not self.df > 0:
                raise ValueError(f"student_t noise needs df > 0, got {self.df}")
        elif self.kind == "pareto_centered":
            if self.shape is None or not self.shape > 1:
                raise ValueError(f"pareto_centered needs shape > 1 (finite mean), got {self.shape}")
            if not self.scale > 0:
                raise ValueError(f"pareto_centered needs scale > 0, got {self.scale}")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def gaussian(cls, variance: float) -> NoiseModel:
        return cls("gaussian", variance=float(variance))

    @classmethod
    def student_t(cls, df: float) -> NoiseModel:
        return cls("student_t", df=float(df))

    @classmethod
    def pareto_centered(cls, shape: float, scale: float = 1.0) -> NoiseModel:
        return cls("pareto_centered", shape=float(shape), scale=float(scale))

    @classmethod
    def from_dict(cls, d: dict) -> NoiseModel:
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {
            "gaussian": {"variance"},
            "student_t": {"df"},
            "pareto_centered": {"shape", "scale"},
        }
        if kind not in allowed:
            raise ValueError(f"unknown noise kind {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise ValueError(f"unexpected keys for {kind} noise: {sorted(extra)}")
        return cls(kind, **{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "variance": self.variance}
        if self.kind == "student_t":
            return {"kind": "student_t", "df": self.df}
        return {"kind": "pareto_centered", "shape": self.shape, "scale": self.scale}

    @property
    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian(variance={self.variance:g})"
        if self.kind == "student_t":
            return f"student_t(df={self.df:g})"
        return f"pareto_centered(shape={self.shape:g},scale={self.scale:g})"

    @property
    def mean_shift(self) -> float:
        """Analytic mean subtracted from the raw Pareto draw."""
        if self.kind != "pareto_centered":
            return 0.0
        return self.shape * self.scale / (self.shape - 1.0)


def sample_array(model: NoiseModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` centered noise values.

    Student t is drawn as Z / sqrt(V / df) with all normals drawn before all
    chi-squares, so the two blocks never interleave.
    """
    if model.kind == "gaussian":
        if model.variance == 0:
            return np.zeros(size)
        return math.sqrt(model.variance) * rng.standard_normal(size)
    if model.kind == "student_t":
        z = rng.standard_normal(size)
        v = rng.chisquare(model.df, size)
        return z / np.sqrt(v / model.df)
    # numpy's pareto is the Lomax law; classical Pareto = scale * (1 + Lomax)
    raw = model.scale * (1.0 + rng.pareto(model.shape, size))
    return raw - model.mean_shift


def sample(model: NoiseModel, rng: np.random.Generator) -> float:
    return float(sample_array(model, rng, 1)[0])


@dataclass(frozen=True)
class Moments:
    sigma2: float
    q_max: float  # int, or math.inf
    q_bound: Callable[[int], float]


def _student_t_abs_moment(df: float, q: int) -> float:
    # E|T|^q = df^{q/2} Gamma((q+1)/2) Gamma((df-q)/2) / (sqrt(pi) Gamma(df/2))
    log_m = (
        0.5 * q * math.log(df)
        + gammaln((q + 1) / 2)
        + gammaln((df - q) / 2)
        - 0.5 * math.log(math.pi)
        - gammaln(df / 2)
    )
    return math.exp(log_m)


def _gaussian_abs_moment(variance: float, q: int) -> float:
    sigma = math.sqrt(variance)
    if q % 2 == 0:
        # (q-1)!!
        dfact = math.prod(range(q - 1, 0, -2)) if q > 0 else 1
        return sigma**q * dfact
    return sigma**q * 2 ** (q / 2) * math.exp(gammaln((q + 1) / 2)) / math.sqrt(math.pi)


def _pareto_centered_abs_moment(shape: float, scale: float, q: int) -> float:
    mu = shape * scale / (shape - 1.0)

    def density(x):
        return shape * scale**shape / x ** (shape + 1)

    lower, _ = integrate.quad(lambda x: (mu - x) ** q * density(x), scale, mu, epsabs=0, epsrel=1e-12)
    upper, _ = integrate.quad(lambda x: (x - mu) ** q * density(x), mu, np.inf, epsabs=0, epsrel=1e-12)
    return lower + upper


def _largest_int_below(x: float) -> int:
    k = math.ceil(x) - 1
    return int(k)


def moments(model: NoiseModel) -> Moments:
    """Variance, highest finite integer absolute moment order and E|eps|^q."""
    if model.kind == "gaussian":
        v = model.variance
        return Moments(v, math.inf, lambda q: _gaussian_abs_moment(v, _check_q(q, math.inf)))
    if model.kind == "student_t":
        df = model.df
        if df <= 2:
            raise InfiniteVarianceError(f"infinite variance: student_t with df={df:g} <= 2")
        q_max = _largest_int_below(df)
        return Moments(df / (df - 2.0), q_max, lambda q: _student_t_abs_moment(df, _check_q(q, q_max)))
    a, s = model.shape, model.scale
    if a <= 2:
        raise InfiniteVarianceError(f"infinite variance: pareto with shape={a:g} <= 2")
    q_max = _largest_int_below(a)
    sigma2 = s**2 * a / ((a - 1.0) ** 2 * (a - 2.0))
    return Moments(sigma2, q_max, lambda q: _pareto_centered_abs_moment(a, s, _check_q(q, q_max)))


def _check_q(q: int, q_max: float) -> int:
    if int(q) != q or q < 1:
        raise ValueError(f"moment order must be a positive integer, got {q}")
    if q > q_max:
        raise ValueError(f"absolute moment of order {q} is infinite (q_max = {q_max})")
    return int(q)
