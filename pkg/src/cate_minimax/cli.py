"""Command-line entry point ``cate-minimax``.

Exit codes: 0 success, 1 configuration error, 2 numerical guard failure
(including a failed ``check``).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .construction import LowerBoundConfig, couple_parameters
from .errors import ConfigError, NumericalGuardError
from .estimator import EstimatorConfig, estimate_cate, tuning_rule
from .harness import ExperimentConfig, ScenarioSpec, build_truth, run_rate_sweep
from .hellinger import delta_bounds, minimax_exponent, mixture_hellinger_bound
from .io import emit, load_config, load_experiment_dict, read_dataset_csv, write_dataset_csv
from .nuisance import NuisanceConfig
from .selfcheck import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
FORMATS = ("csv", "json", "svg")


def _formats(values: list[str] | None) -> list[str]:
    if not values:
        return list(FORMATS)
    out = []
    for v in values:
        out.extend(p for p in v.split(",") if p)
    bad = set(out) - set(FORMATS)
    if bad:
        raise ConfigError(f"unknown format(s) {sorted(bad)}")
    return out


def _write_json(payload: dict, out: str | None, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out is None:
        print(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)
    print(path / name)


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    scenario = cfg.get("scenario")
    truth = None
    rng = np.random.default_rng(args.seed)
    if scenario is not None:
        truth = build_truth(ScenarioSpec(**scenario), rng)
    if "data" in cfg:
        data = read_dataset_csv(Path(args.config).parent / cfg["data"])
    elif truth is not None:
        data = truth.sample(int(_require(cfg, "n")), rng)
    else:
        raise ConfigError("estimate needs 'data' (a CSV path) or a 'scenario' with 'n'")
    nz = NuisanceConfig(**cfg.get("nuisance", {}))
    est = dict(_require(cfg, "estimator"))
    est.setdefault("parametrization", nz.parametrization)
    if "h" not in est:
        tune = tuning_rule(
            data.n, nz.pi_smoothness, nz.outcome_smoothness, float(_require(est, "gamma")), data.d,
            est["parametrization"], est.pop("c_h", 1.0), est.pop("c_k", 1.0), est.get("b_degree", 0),
        )
        est["h"], est["k"] = tune.h, est.get("k", tune.k)
    config = EstimatorConfig(**est)
    fit = estimate_cate(data, nz, config, seed=args.seed, truth=truth)
    _write_json(fit.to_dict(), args.out, "fit.json")
    return EXIT_OK


def cmd_sweep(args) -> int:
    data = load_experiment_dict(args.config)
    config = ExperimentConfig.from_dict(data)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    report = run_rate_sweep(config, args.workers)
    out = args.out or "."
    for path in emit(report, out, _formats(args.format)):
        print(path)
    for s in report.slopes:
        slope = "n/a" if s["slope"] is None else f"{s['slope']:.3f}"
        print(f"{s['scenario']} {s['variant']}: slope {slope} target {s['target']:.3f} [{s['status']}]")
    return EXIT_OK


def cmd_lowerbound(args) -> int:
    cfg = dict(load_config(args.config))
    n = cfg.pop("n", None)
    c_star = cfg.pop("c_star", None)
    constant = cfg.pop("constant", 1.0)
    payload: dict = {}
    if "h" not in cfg or "k" not in cfg:
        if n is None:
            raise ConfigError("lowerbound needs either h and k, or n for the coupled choice")
        cp = couple_parameters(
            n, cfg["alpha"], cfg["beta"], cfg["gamma"], cfg["d"], c_star=c_star,
            regime=cfg["regime"], eps=cfg.get("eps", 0.05), x0=cfg.get("x0"),
        )
        cfg["h"], cfg["k"] = cp.h, cp.k
        payload["coupled"] = {"h": cp.h, "k": cp.k, "zeta": cp.zeta, "c_star": cp.c_star}
    lb = LowerBoundConfig(**cfg)
    deltas = delta_bounds(lb)
    payload["deltas"] = deltas.to_dict()
    if n is not None:
        payload["hellinger"] = mixture_hellinger_bound(n, lb, constant=constant, deltas=deltas).to_dict()
    payload["exponent"] = minimax_exponent(lb.alpha, lb.beta, lb.gamma, lb.d, lb.regime.parametrization).to_dict()
    payload["config"] = {"regime": lb.regime.value, "alpha": lb.alpha, "beta": lb.beta, "gamma": lb.gamma,
                         "d": lb.d, "h": lb.h, "k": lb.k, "x0": list(lb.x0), "eps": lb.eps}
    _write_json(payload, args.out, "lowerbound.json")
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_checks()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    truth = build_truth(ScenarioSpec(**_require(cfg, "scenario")), rng)
    data = truth.sample(int(_require(cfg, "n")), rng)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    print(write_dataset_csv(data, out / "data.csv"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cate-minimax", description="Pointwise CATE estimation and rate experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON or INI config file")
        p.add_argument("--seed", type=int, default=None, help="seed (overrides the config's master seed)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None, help="worker processes")
        p.add_argument("--format", action="append", help="csv, json or svg; repeat or comma-separate")
        return p

    common(sub.add_parser("estimate", help="one dataset to a FitResult JSON")).set_defaults(func=cmd_estimate)
    common(sub.add_parser("sweep", help="run a rate sweep and emit reports")).set_defaults(func=cmd_sweep)
    common(sub.add_parser("lowerbound", help="mixture distances for a lower-bound construction")).set_defaults(
        func=cmd_lowerbound
    )
    common(sub.add_parser("check", help="run the internal consistency checks"), False).set_defaults(func=cmd_check)
    common(sub.add_parser("sample", help="draw a dataset from a scenario to CSV")).set_defaults(func=cmd_sample)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, sort_keys=True, default=float), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
