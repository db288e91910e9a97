"""JSON experiment configs.

Schema::

    {
      "kernel": {"family": "rbf", "bandwidth": 1.0},           # optional
      "f_star": {"centers": [...], "coefficients": [...]},    # required
      "noise_models": [{"kind": "gaussian", "variance": 3}, {"kind": "student_t", "df": 3}],
      "n": 20, "alphas": [...], "trials": 10000, "levels": [...],
      "risk_method": {"kind": "monte_carlo", "m": 100000},
      "master_seed": 0
    }
"""

from __future__ import annotations

import json
import os
from typing import Any, Iterable

from .harness import DEFAULT_LEVELS, ExperimentConfig, RiskMethod
from .kernel import FunctionExpansion, KernelSpec, MarginalSpec
from .noise import NoiseModel


class ConfigError(ValueError):
    pass


REQUIRED = {"f_star", "noise_models", "alphas"}
OPTIONAL = {"kernel", "marginal", "n", "trials", "levels", "risk_method", "master_seed"}


def _sub(d: dict, key: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    v = d[key]
    if not isinstance(v, dict):
        raise ConfigError(f"{key}: expected an object")
    extra = set(v) - allowed
    if extra:
        raise ConfigError(f"{key}: unexpected keys {sorted(extra)}")
    missing = required - set(v)
    if missing:
        raise ConfigError(f"{key}: missing keys {sorted(missing)}")
    return v


def _int(d: dict, key: str, default: int) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return v


def _float_list(d: dict, key: str, default=None) -> list[float]:
    v = d.get(key, default)
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{key}: expected a nonempty list")
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected numbers") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object")
    missing = REQUIRED - set(d)
    if missing:
        raise ConfigError(f"{sorted(missing)[0]}: required key missing")
    extra = set(d) - REQUIRED - OPTIONAL
    if extra:
        raise ConfigError(f"{sorted(extra)[0]}: unknown key")

    try:
        kernel = KernelSpec()
        if "kernel" in d:
            k = _sub(d, "kernel", {"family", "bandwidth"})
            kernel = KernelSpec(k.get("family", "rbf"), float(k.get("bandwidth", 1.0)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"kernel: {exc}") from None

    try:
        marginal = MarginalSpec(*([d["marginal"]] if "marginal" in d else []))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"marginal: {exc}") from None

    fs = _sub(d, "f_star", {"centers", "coefficients"}, {"centers", "coefficients"})
    try:
        f_star = FunctionExpansion(fs["centers"], fs["coefficients"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"f_star: {exc}") from None

    nms = d["noise_models"]
    if not isinstance(nms, list) or not nms:
        raise ConfigError("noise_models: expected a nonempty list")
    try:
        noise_models = [NoiseModel.from_dict(x) for x in nms]
    except (ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"noise_models: {exc}") from None

    alphas = _float_list(d, "alphas")
    if not all(a > 0 for a in alphas):
        raise ConfigError("alphas: every alpha must be positive")
    levels = _float_list(d, "levels", list(DEFAULT_LEVELS))

    risk = RiskMethod()
    if "risk_method" in d:
        r = _sub(d, "risk_method", {"kind", "m"}, {"kind"})
        try:
            risk = RiskMethod(r["kind"], _int(r, "m", 100_000))
        except ValueError as exc:
            raise ConfigError(f"risk_method: {exc}") from None

    try:
        return ExperimentConfig(
            f_star=f_star,
            noise_models=tuple(noise_models),
            alphas=tuple(alphas),
            kernel=kernel,
            marginal=marginal,
            n=_int(d, "n", 20),
            trials=_int(d, "trials", 10_000),
            levels=tuple(levels),
            risk_method=risk,
            master_seed=_int(d, "master_seed", 0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        # ExperimentConfig messages start with the offending key
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return {
        "kernel": {"family": cfg.kernel.family, "bandwidth": cfg.kernel.bandwidth},
        "marginal": cfg.marginal.law,
        "f_star": {"centers": cfg.f_star.centers.tolist(), "coefficients": cfg.f_star.coefficients.tolist()},
        "noise_models": [nm.to_dict() for nm in cfg.noise_models],
        "n": cfg.n,
        "alphas": list(cfg.alphas),
        "trials": cfg.trials,
        "levels": list(cfg.levels),
        "risk_method": {"kind": cfg.risk_method.kind, "m": cfg.risk_method.m},
        "master_seed": cfg.master_seed,
    }


def parse_override(item: str) -> tuple[list[str], Any]:
    """``a.b=value``; the value is parsed as JSON when possible, else kept as a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r}: expected key=value")
    key, raw = item.split("=", 1)
    if not key:
        raise ConfigError(f"override {item!r}: empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(d: dict, overrides: Iterable[str]) -> dict:
    d = json.loads(json.dumps(d))
    for item in overrides:
        path, value = parse_override(item)
        node = d
        for part in path[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r}: {part} is not an object")
            node = nxt
        node[path[-1]] = value
    return d


def load_config(path: str | os.PathLike, overrides: Iterable[str] = ()) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {os.fspath(path)}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {os.fspath(path)}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    return config_from_dict(apply_overrides(raw, overrides))


def packaged_config_path(name: str = "heavy_tail_replication.json") -> str:
    return os.path.join(os.path.dirname(__file__), "configs", name)
