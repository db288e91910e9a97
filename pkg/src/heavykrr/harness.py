"""Seeded Monte-Carlo experiments for excess-risk quantiles.

Every random draw comes from a Philox stream keyed by
(master_seed, label, alpha_index, trial_index, role), so a trial's result does
not depend on which other trials ran, in what order, or on how many threads.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, NamedTuple, Sequence

import numpy as np

from .kernel import FunctionExpansion, KernelSpec, MarginalSpec, eval_expansion, gram
from .krr import Dataset, NotPositiveDefiniteError, fit
from .noise import NoiseModel, sample_array
from .risk import ClosedFormRisk, empirical_quantiles, excess_risk_mc
from . import theory

ROLES = {"covariate": 1, "noise": 2, "risk_mc": 3}

DEFAULT_LEVELS = tuple(round(0.05 * i, 2) for i in range(1, 20)) + (0.96, 0.97, 0.98, 0.99, 0.995, 0.999)


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


def stream(master_seed: int, label: str, alpha_index: int, trial_index: int, role: str) -> np.random.Generator:
    """Counter-based generator for one (experiment cell, trial, role)."""
    key = [master_seed & (2**64 - 1), _label_key(label), alpha_index, trial_index, ROLES[role]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _float_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


@dataclass(frozen=True)
class RiskMethod:
    kind: Literal["closed_form", "monte_carlo"] = "monte_carlo"
    m: int = 100_000

    def __post_init__(self):
        if self.kind not in ("closed_form", "monte_carlo"):
            raise ValueError(f"unknown risk method {self.kind!r}")
        if self.kind == "monte_carlo" and self.m < 2:
            raise ValueError(f"monte_carlo risk needs m >= 2, got {self.m}")


@dataclass(frozen=True)
class ExperimentConfig:
    f_star: FunctionExpansion
    noise_models: tuple[NoiseModel, ...]
    alphas: tuple[float, ...]
    kernel: KernelSpec = KernelSpec()
    marginal: MarginalSpec = MarginalSpec()
    n: int = 20
    trials: int = 10_000
    levels: tuple[float, ...] = DEFAULT_LEVELS
    risk_method: RiskMethod = field(default_factory=RiskMethod)
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "noise_models", tuple(self.noise_models))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.noise_models:
            raise ValueError("noise_models: must be nonempty")
        if not self.alphas:
            raise ValueError("alphas: must be nonempty")
        if not all(a > 0 and math.isfinite(a) for a in self.alphas):
            raise ValueError("alphas: every alpha must be positive and finite")
        if not self.levels:
            raise ValueError("levels: must be nonempty")
        if any(not 0 <= v <= 1 for v in self.levels) or list(self.levels) != sorted(self.levels):
            raise ValueError("levels: must be sorted ascending within [0, 1]")
        if self.n < 1:
            raise ValueError("n: must be >= 1")
        if self.trials < 1:
            raise ValueError("trials: must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed: must be an unsigned 64-bit integer")
        labels = [nm.label for nm in self.noise_models]
        if len(set(labels)) != len(labels):
            raise ValueError("noise_models: duplicate noise models")


class QuantileRow(NamedTuple):
    noise: str
    alpha: float
    level: float
    quantile: float


class RawRow(NamedTuple):
    noise: str
    alpha: float
    trial: int
    risk: float


@dataclass
class QuantileTable:
    rows: list[QuantileRow] = field(default_factory=list)

    def curve(self, noise: str, alpha: float) -> dict[float, float]:
        return {r.level: r.quantile for r in self.rows if r.noise == noise and r.alpha == alpha}

    def get(self, noise: str, alpha: float, level: float) -> float:
        return self.curve(noise, alpha)[level]


@dataclass
class RawRiskLog:
    rows: list[RawRow] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(math.isnan(r.risk) for r in self.rows)


class _TrialRunner:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.closed = (
            ClosedFormRisk(config.kernel, config.marginal, config.f_star)
            if config.risk_method.kind == "closed_form"
            else None
        )

    def run(self, noise: NoiseModel, label: str, alpha: float, alpha_index: int, trial_index: int, n: int) -> float:
        cfg = self.config
        seed = cfg.master_seed
        xs = cfg.marginal.sample(stream(seed, label, alpha_index, trial_index, "covariate"), n)
        eps = sample_array(noise, stream(seed, label, alpha_index, trial_index, "noise"), n)
        ys = np.asarray(eval_expansion(cfg.f_star, cfg.kernel, xs)) + eps
        try:
            model = fit(cfg.kernel, Dataset(xs, ys), alpha)
        except (NotPositiveDefiniteError, ValueError):
            return math.nan
        if self.closed is not None:
            return self.closed(model.expansion)
        rng = stream(seed, label, alpha_index, trial_index, "risk_mc")
        return excess_risk_mc(cfg.kernel, cfg.marginal, model.expansion, cfg.f_star, cfg.risk_method.m, rng).value


def _alpha_index(config: ExperimentConfig, alpha: float) -> int:
    try:
        return config.alphas.index(float(alpha))
    except ValueError:
        # alphas outside the grid are keyed by their bit pattern, offset past any grid index
        return 2**32 + _float_key(alpha)


def run_trial(
    config: ExperimentConfig,
    noise: NoiseModel,
    alpha: float,
    trial_index: int,
    *,
    label: str | None = None,
    n: int | None = None,
) -> float:
    """Excess risk of one ridge fit; NaN if the solver fails."""
    return _TrialRunner(config).run(
        noise, label or noise.label, float(alpha), _alpha_index(config, alpha), trial_index, n or config.n
    )


def _run_block(runner, noise, alpha_index, order, out):
    alpha = runner.config.alphas[alpha_index]
    for t in order:
        out[t] = runner.run(noise, noise.label, alpha, alpha_index, int(t), runner.config.n)


def collect_risks(config: ExperimentConfig, workers: int = 1, order: Sequence[int] | None = None) -> np.ndarray:
    """Risk array of shape (noise, alpha, trial), filled into pre-sized slots."""
    runner = _TrialRunner(config)
    M = config.trials
    order = np.arange(M) if order is None else np.asarray(order)
    if sorted(order.tolist()) != list(range(M)):
        raise ValueError("order must be a permutation of the trial indices")
    out = np.full((len(config.noise_models), len(config.alphas), M), np.nan)
    jobs = [
        (noise, ai, order, out[ni, ai])
        for ni, noise in enumerate(config.noise_models)
        for ai in range(len(config.alphas))
    ]
    if workers <= 1:
        for job in jobs:
            _run_block(runner, *job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda job: _run_block(runner, *job), jobs))
    return out


def tabulate(config: ExperimentConfig, risks: np.ndarray) -> tuple[QuantileTable, RawRiskLog]:
    table, log = QuantileTable(), RawRiskLog()
    for ni, noise in enumerate(config.noise_models):
        for ai, alpha in enumerate(config.alphas):
            r = risks[ni, ai]
            log.rows.extend(RawRow(noise.label, alpha, t, float(v)) for t, v in enumerate(r))
            ok = r[~np.isnan(r)]
            if ok.size == 0:
                qs = [math.nan] * len(config.levels)
            else:
                qs = empirical_quantiles(ok, config.levels)
            table.rows.extend(QuantileRow(noise.label, alpha, lv, q) for lv, q in zip(config.levels, qs))
    return table, log


def run_experiment(
    config: ExperimentConfig, workers: int = 1, order: Sequence[int] | None = None
) -> tuple[QuantileTable, RawRiskLog]:
    """M trials per (noise, alpha); failed trials stay NaN and are left out of the quantiles."""
    return tabulate(config, collect_risks(config, workers, order))


# --- Hilbert-space noise sum --------------------------------------------------


def fn_sum_trial(
    kernel: KernelSpec,
    marginal: MarginalSpec,
    noise: NoiseModel,
    n: int,
    trial_index: int,
    master_seed: int = 0,
) -> float:
    """RKHS norm of (1/n) sum_i phi(X_i) eps_i, i.e. sqrt(eps^T K eps) / n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    label = f"fn_sum|{noise.label}|n={n}"
    xs = marginal.sample(stream(master_seed, label, 0, trial_index, "covariate"), n)
    eps = sample_array(noise, stream(master_seed, label, 0, trial_index, "noise"), n)
    quad = float(eps @ gram(kernel, xs) @ eps)
    return math.sqrt(max(quad, 0.0)) / n


def fn_sum_samples(
    kernel: KernelSpec, marginal: MarginalSpec, noise: NoiseModel, n: int, trials: int, master_seed: int = 0
) -> np.ndarray:
    return np.array([fn_sum_trial(kernel, marginal, noise, n, t, master_seed) for t in range(trials)])


# --- rate sweeps ------------------------------------------------------------------


class SweepRow(NamedTuple):
    n: int
    alpha_used: float
    median_risk: float
    slope_estimate: float


def loglog_slope(xs: Iterable[float], ys: Iterable[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(list(xs), float)), np.log(np.asarray(list(ys), float))
    return float(np.polyfit(lx, ly, 1)[0])


def rate_sweep(
    config: ExperimentConfig,
    schedule: str | Callable[[int, float], float],
    n_list: Sequence[int],
    delta: float,
    *,
    nu: float = 0.5,
    p: float = 0.5,
    q: int = 3,
    fn: theory.FnConstants = theory.FnConstants(),
    noise: NoiseModel | None = None,
) -> list[SweepRow]:
    """Median excess risk along a regularization schedule alpha(n, delta).

    ``schedule`` is ``"alpha1"``, ``"alpha2"``, ``"capacity"`` or a callable
    (n, delta) -> alpha. Uses ``config.trials`` trials per n and the first noise
    model unless ``noise`` is given.
    """
    n_list = [int(v) for v in n_list]
    if len(n_list) < 3 or n_list != sorted(n_list):
        raise ValueError("n_list must be ascending with at least 3 entries")
    noise = noise or config.noise_models[0]
    if callable(schedule):
        sched = schedule
    elif schedule == "alpha1":
        sched = lambda n, d: theory.schedule_alpha1(n, d, nu, fn)  # noqa: E731
    elif schedule == "alpha2":
        sched = lambda n, d: theory.schedule_alpha2(n, d, nu, q, config.kernel.kappa).value  # noqa: E731
    elif schedule == "capacity":
        sched = lambda n, d: theory.schedule_alpha_capacity(n, d, nu, p, fn.c1)  # noqa: E731
    else:
        raise ValueError(f"unknown schedule {schedule!r}")

    runner = _TrialRunner(config)
    alphas, medians = [], []
    for n in n_list:
        alpha = float(sched(n, delta))
        label = f"sweep|{noise.label}|n={n}"
        risks = np.array([runner.run(noise, label, alpha, 0, t, n) for t in range(config.trials)])
        alphas.append(alpha)
        medians.append(float(np.nanmedian(risks)))
    slope = loglog_slope(n_list, medians)
    return [SweepRow(n, a, m, slope) for n, a, m in zip(n_list, alphas, medians)]


# --- CSV persistence --------------------------------------------------------------

QUANTILE_HEADER = ["noise", "alpha", "level", "quantile"]
RAW_HEADER = ["noise", "alpha", "trial", "risk"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def export_csv(obj: QuantileTable | RawRiskLog, path: str | os.PathLike) -> None:
    """Write a quantile table or raw log as UTF-8, LF-terminated CSV with round-trip floats."""
    header = QUANTILE_HEADER if isinstance(obj, QuantileTable) else RAW_HEADER
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in obj.rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)}: {exc.strerror or exc}") from exc


def read_csv(path: str | os.PathLike) -> QuantileTable | RawRiskLog:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {os.fspath(path)}: {exc.strerror or exc}") from exc
    if not rows:
        raise ValueError(f"{os.fspath(path)}: missing header")
    header, body = rows[0], rows[1:]
    if header == QUANTILE_HEADER:
        return QuantileTable([QuantileRow(r[0], float(r[1]), float(r[2]), float(r[3])) for r in body])
    if header == RAW_HEADER:
        return RawRiskLog([RawRow(r[0], float(r[1]), int(r[2]), float(r[3])) for r in body])
    raise ValueError(f"{os.fspath(path)}: unrecognised header {header}")
