"""Command-line front end.

Subcommands: run, quantiles, schedule, regime, effdim, bound, fn-sim. Numbers
are printed with ``repr`` so they round-trip to the library's return values.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__, theory
from .config import ConfigError, config_to_dict, load_config
from .harness import (
    QuantileRow,
    QuantileTable,
    RawRiskLog,
    export_csv,
    fn_sum_samples,
    read_csv,
    run_experiment,
    stream,
)
from .kernel import KernelSpec, MarginalSpec, gram
from .krr import sym_eig
from .plotting import n0_svg, quantile_svg
from .risk import empirical_quantiles


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _print_table(rows: Sequence[Sequence], header: Sequence[str]) -> None:
    print("\t".join(header))
    for r in rows:
        print("\t".join(_fmt(v) for v in r))


def _common(p: argparse.ArgumentParser, config: bool = False) -> None:
    if config:
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
        p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--plot", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heavykrr", description="Kernel ridge regression under heavy-tailed noise.")
    parser.add_argument("--version", action="version", version=f"heavykrr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the quantile experiment and write CSVs")
    _common(p, config=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--log-y", action="store_true")

    p = sub.add_parser("quantiles", help="recompute the quantile table from raw.csv")
    _common(p, config=True)
    p.add_argument("--raw", metavar="PATH", help="raw CSV (default: OUT/raw.csv)")
    p.add_argument("--log-y", action="store_true")

    p = sub.add_parser("schedule", help="regularization schedules")
    _common(p)
    p.add_argument("--kind", choices=["alpha1", "alpha2", "capacity"], required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2-tilde", type=float, default=1.0)

    p = sub.add_parser("regime", help="effective sample size n0, D1/D2 membership, regime change delta")
    _common(p)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--Q", type=float, required=True)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)

    p = sub.add_parser("effdim", help="plug-in effective dimension from sampled covariates")
    _common(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--alpha", type=float, action="append", required=True)
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, help="calibrate D_tilde for this decay exponent")

    p = sub.add_parser("bound", help="excess-risk bound evaluators")
    _common(p)
    p.add_argument("--kind", choices=["capacity_free", "capacity"], required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--sup-norm", type=float, default=0.0)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--Q", type=float, required=True)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--D-tilde", type=float, default=1.0)
    p.add_argument("--multiplier", type=float, default=1.0)

    p = sub.add_parser("fn-sim", help="simulate ||(1/n) sum phi(X_i) eps_i|| and report its quantiles")
    _common(p, config=True)
    p.add_argument("--n", type=int, help="sample size (default: config n)")
    return parser


def _ensure_out(path: str | None) -> str | None:
    if path is None:
        return None
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path}: {exc.strerror or exc}") from None
    return path


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _export(obj, path):
    try:
        export_csv(obj, path)
    except OSError as exc:
        raise OutputError(str(exc)) from None


def _config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    return load_config(args.config, overrides)


def cmd_run(args) -> None:
    cfg = _config(args)
    out = _ensure_out(args.out or ".")
    start = time.perf_counter()
    table, log = run_experiment(cfg, workers=args.workers)
    wall = time.perf_counter() - start
    _export(table, os.path.join(out, "quantiles.csv"))
    _export(log, os.path.join(out, "raw.csv"))
    failures = {}
    for nm in cfg.noise_models:
        for a in cfg.alphas:
            failures[f"{nm.label}|alpha={a!r}"] = sum(
                math.isnan(r.risk) for r in log.rows if r.noise == nm.label and r.alpha == a
            )
    summary = {
        "config": config_to_dict(cfg),
        "failures": failures,
        "total_failures": log.failures,
        "wall_time_seconds": wall,
        "version": __version__,
    }
    _write_text(os.path.join(out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    if args.plot:
        _write_text(os.path.join(out, "quantiles.svg"), quantile_svg(table, log_y=args.log_y))
    print(f"wrote {len(table.rows)} quantile rows and {len(log.rows)} raw rows to {out} "
          f"({log.failures} failed trials, {wall:.1f}s)")


def cmd_quantiles(args) -> None:
    cfg = _config(args)
    raw_path = args.raw or os.path.join(args.out or ".", "raw.csv")
    try:
        log = read_csv(raw_path)
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"raw log: {exc}") from None
    if not isinstance(log, RawRiskLog):
        raise ConfigError(f"raw log: {raw_path} is not a raw risk CSV")
    table = QuantileTable()
    groups: dict[tuple[str, float], list[float]] = {}
    for r in log.rows:
        groups.setdefault((r.noise, r.alpha), []).append(r.risk)
    for (noise, alpha), risks in groups.items():
        ok = [v for v in risks if not math.isnan(v)]
        qs = empirical_quantiles(ok, cfg.levels) if ok else [math.nan] * len(cfg.levels)
        table.rows.extend(QuantileRow(noise, alpha, lv, q) for lv, q in zip(cfg.levels, qs))
    _print_table(table.rows, ["noise", "alpha", "level", "quantile"])
    if args.out:
        out = _ensure_out(args.out)
        _export(table, os.path.join(out, "quantiles.csv"))
        if args.plot and table.rows:
            _write_text(os.path.join(out, "quantiles.svg"), quantile_svg(table, log_y=args.log_y))


def cmd_schedule(args) -> None:
    fn = theory.FnConstants(c1=args.c1, c2_tilde=args.c2_tilde)
    if args.kind == "alpha1":
        rows = [("alpha", theory.schedule_alpha1(args.n, args.delta, args.nu, fn))]
    elif args.kind == "alpha2":
        r = theory.schedule_alpha2(args.n, args.delta, args.nu, args.q, args.kappa)
        rows = [("alpha", r.value), ("pre_clamp", r.pre_clamp), ("clamped", r.clamped)]
    else:
        rows = [("alpha", theory.schedule_alpha_capacity(args.n, args.delta, args.nu, args.p, args.c1))]
    _print_table(rows, ["quantity", "value"])


def cmd_regime(args) -> None:
    fn = theory.FnConstants(c1=args.c1, c2=args.c2)
    n0 = theory.n0(args.delta, args.sigma, args.Q, args.q, args.c1)
    poly, sub = theory.eta_capacity_free_branches(args.delta, args.n, args.sigma, args.Q, args.q, args.c1)
    rc = theory.regime_change_delta(args.n, args.sigma, args.Q, args.q, fn)
    rows = [
        ("n0", n0),
        ("in_D1", theory.in_D1(args.n, args.delta, args.sigma, args.Q, args.q, args.c1)),
        ("in_D2", theory.in_D2(args.n, args.delta, args.sigma, args.Q, args.q, args.c1)),
        ("eta_polynomial", poly),
        ("eta_subgaussian", sub),
        ("delta_bar", rc.delta),
        ("delta_bar_found", rc.found),
    ]
    _print_table(rows, ["quantity", "value"])
    if args.plot:
        out = _ensure_out(args.out or ".")
        deltas = np.geomspace(1e-3, 0.5, 60)
        curves = {}
        for q in sorted({3, 4, 6, args.q}):
            ys = [theory.n0(d, args.sigma, args.Q, q, args.c1) for d in deltas]
            curves[f"q={q}"] = ((1 - deltas).tolist(), ys)
        _write_text(os.path.join(out, "n0.svg"), n0_svg(curves))


def cmd_effdim(args) -> None:
    spec = KernelSpec(bandwidth=args.bandwidth)
    xs = MarginalSpec().sample(stream(args.seed, "effdim", 0, 0, "covariate"), args.n)
    spectrum = sym_eig(gram(spec, xs) / args.n)
    rows = [(a, theory.effective_dimension(spectrum, a)) for a in args.alpha]
    header = ["alpha", "effective_dimension"]
    if args.p is not None:
        d_tilde = theory.calibrate_D_tilde(spectrum, args.p, args.alpha)
        decay = theory.EigenDecay(p=args.p, D_tilde=d_tilde)
        rows = [(a, N, theory.effective_dimension_bound(decay, a)) for a, N in rows]
        header.append("bound")
    _print_table(rows, header)
    if args.p is not None:
        print(f"D_tilde\t{d_tilde!r}")


def cmd_bound(args) -> None:
    kernel = KernelSpec()
    src = theory.SourceCondition(nu=args.nu, R=args.R, sup_norm_fstar=args.sup_norm)
    noise = theory.NoiseMoments(args.sigma, args.Q, args.q)
    fn = theory.FnConstants(c1=args.c1, c2=args.c2)
    if args.kind == "capacity_free":
        rep = theory.capacity_free_bound(args.alpha, args.delta, args.n, kernel, src, noise, fn)
    else:
        decay = theory.EigenDecay(p=args.p, D_tilde=args.D_tilde)
        rep = theory.capacity_bound(
            args.alpha, args.delta, args.n, kernel, src, decay, noise, fn, None, args.multiplier
        )
    _print_table(list(vars(rep).items()), ["quantity", "value"])


def cmd_fn_sim(args) -> None:
    cfg = _config(args)
    n = args.n or cfg.n
    rows = []
    for nm in cfg.noise_models:
        s = fn_sum_samples(cfg.kernel, cfg.marginal, nm, n, cfg.trials, cfg.master_seed)
        rows.extend((nm.label, n, lv, q) for lv, q in zip(cfg.levels, empirical_quantiles(s, cfg.levels)))
    _print_table(rows, ["noise", "n", "level", "quantile"])
    if args.out:
        out = _ensure_out(args.out)
        text = "noise,n,level,quantile\n" + "".join(f"{a},{b},{c!r},{d!r}\n" for a, b, c, d in rows)
        _write_text(os.path.join(out, "fn_quantiles.csv"), text)


COMMANDS = {
    "run": cmd_run,
    "quantiles": cmd_quantiles,
    "schedule": cmd_schedule,
    "regime": cmd_regime,
    "effdim": cmd_effdim,
    "bound": cmd_bound,
    "fn-sim": cmd_fn_sim,
}


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand; 0 on success, 1 on usage or config errors, 2 on runtime failure."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 2
    except theory.ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())
