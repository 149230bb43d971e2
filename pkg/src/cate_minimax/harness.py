"""Seeded Monte Carlo rate sweeps.

Every (scenario, n, replication) cell draws its randomness from
``SeedSequence(master_seed, spawn_key=(scenario, n, rep))``, so cells are
independent of execution order and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Sequence

import numpy as np

from .construction import LowerBoundConfig, rademacher
from .dgp import ConstructionScenario, SmoothScenario
from .errors import ConfigError, NumericalGuardError
from .estimator import EstimatorConfig, fit_with_nuisance, prepare_nuisance, tuning_rule
from .hellinger import minimax_exponent
from .nuisance import NuisanceConfig

__all__ = [
    "ScenarioSpec",
    "ExperimentConfig",
    "SlopeFit",
    "RateReport",
    "build_truth",
    "cell_seed",
    "run_replication",
    "run_rate_sweep",
    "fit_slope",
    "aggregate",
]

VARIANTS = ("second_order", "first_order")


@dataclass(frozen=True)
class ScenarioSpec:
    """A named truth plus the smoothness it declares.

    ``kind="smooth"`` passes ``params`` to :class:`SmoothScenario`;
    ``kind="construction"`` passes them to :class:`LowerBoundConfig`
    (with an extra ``hypothesis`` key, default ``"P"``).
    """

    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def smoothness(self) -> tuple[float, float, float, int]:
        p = self.params
        return float(p.get("alpha", 1.0)), float(p.get("beta", 1.0)), float(p.get("gamma", 1.0)), int(p.get("d", 1))

    def parametrization(self) -> str:
        if self.kind == "construction":
            return LowerBoundConfig(**_lb_kwargs(self.params)).regime.parametrization
        return str(self.params.get("parametrization", "mu0"))


def _lb_kwargs(params: dict) -> dict:
    return {k: v for k, v in params.items() if k != "hypothesis"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition.

    ``estimator`` holds :class:`EstimatorConfig` fields except ``x0``. If it
    has no ``h`` the tuning rule picks ``h`` and ``k`` per sample size,
    scaled by ``c_h`` and ``c_k``. ``nuisance`` holds :class:`NuisanceConfig`
    fields; declared smoothness defaults to the scenario's.
    """

    scenarios: tuple[ScenarioSpec, ...]
    n_grid: tuple[int, ...]
    replications: int = 10
    master_seed: int = 0
    estimator: dict = field(default_factory=dict)
    nuisance: dict = field(default_factory=dict)
    variants: tuple[str, ...] = VARIANTS
    slope_band: float = 0.15
    workers: int = 1

    def __post_init__(self) -> None:
        scen = tuple(s if isinstance(s, ScenarioSpec) else ScenarioSpec(**s) for s in self.scenarios)
        object.__setattr__(self, "scenarios", scen)
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "variants", tuple(self.variants))
        if not scen:
            raise ConfigError("at least one scenario is required")
        if len({s.name for s in scen}) != len(scen):
            raise ConfigError("scenario names must be unique")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])) or not self.n_grid:
            raise ConfigError("n grid must be non-empty and strictly increasing")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not set(self.variants) <= set(VARIANTS) or not self.variants:
            raise ConfigError(f"variants must be drawn from {VARIANTS}")
        for s in scen:
            if s.kind not in ("smooth", "construction"):
                raise ConfigError(f"unknown scenario kind {s.kind!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scenarios"] = [asdict(s) for s in self.scenarios]
        out["n_grid"] = list(self.n_grid)
        out["variants"] = list(self.variants)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown experiment keys: {sorted(extra)}")
        return cls(**data)


def cell_seed(master_seed: int, scenario: int, n: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(scenario, n, rep))


def build_truth(spec: ScenarioSpec, rng: np.random.Generator):
    """Truth object for one replication; construction signs are drawn from ``rng``."""
    if spec.kind == "smooth":
        return SmoothScenario(**spec.params)
    cfg = LowerBoundConfig(**_lb_kwargs(spec.params))
    lam = tuple(rademacher(cfg.k, rng))
    return ConstructionScenario(cfg, spec.params.get("hypothesis", "P"), lam)


def _estimator_config(config: ExperimentConfig, spec: ScenarioSpec, truth, n: int, variant: str) -> EstimatorConfig:
    alpha, beta, gamma, d = spec.smoothness()
    est = dict(config.estimator)
    c_h, c_k = est.pop("c_h", 1.0), est.pop("c_k", 1.0)
    est.setdefault("gamma", gamma)
    est.setdefault("parametrization", spec.parametrization())
    if "h" not in est:
        tune = tuning_rule(n, alpha, beta, gamma, d, est["parametrization"], c_h, c_k, est.get("b_degree", 0))
        est["h"] = tune.h
        est.setdefault("k", tune.k)
    # keep the window inside the unit cube
    est["h"] = min(est["h"], 2 * min(min(c, 1 - c) for c in truth.x0))
    est["second_order"] = variant == "second_order"
    return EstimatorConfig(x0=truth.x0, **est)


def _nuisance_config(config: ExperimentConfig, spec: ScenarioSpec, parametrization: str) -> NuisanceConfig:
    alpha, beta, _, _ = spec.smoothness()
    nz = dict(config.nuisance)
    nz.setdefault("pi_smoothness", alpha)
    nz.setdefault("outcome_smoothness", beta)
    nz.setdefault("parametrization", parametrization)
    return NuisanceConfig(**nz)


def run_replication(config: ExperimentConfig, scenario_index: int, n: int, rep: int) -> list[dict]:
    """One dataset, every requested estimator variant on it; one row per variant."""
    spec = config.scenarios[scenario_index]
    ss = cell_seed(config.master_seed, scenario_index, n, rep)
    data_seq, split_seq = ss.spawn(2)
    rng = np.random.default_rng(data_seq)
    truth = build_truth(spec, rng)
    data = truth.sample(n, rng)
    split_seed = int(split_seq.generate_state(1)[0])
    tau_true = truth.tau_at_x0()
    rows = []
    nuisance = None
    for variant in config.variants:
        est_cfg = _estimator_config(config, spec, truth, n, variant)
        row = {
            "scenario": spec.name,
            "variant": variant,
            "n": n,
            "rep": rep,
            "h": est_cfg.h,
            "k": est_cfg.k,
            "tau_true": tau_true,
            "tau_hat": None,
            "abs_error": None,
            "n_window": None,
            "status": "ok",
            "message": "",
        }
        try:
            if nuisance is None:
                nz_cfg = _nuisance_config(config, spec, est_cfg.parametrization)
                nuisance = prepare_nuisance(data, nz_cfg, est_cfg.frame, split_seed, truth)
            fit = fit_with_nuisance(nuisance[1], nuisance[0], est_cfg)
            row.update(
                tau_hat=fit.tau_hat,
                abs_error=abs(fit.tau_hat - tau_true),
                n_window=fit.n_window,
            )
        except NumericalGuardError as exc:
            row.update(status="degenerate", message=str(exc))
        rows.append(row)
    return rows


def _run_cell(args) -> list[dict]:
    return run_replication(*args)


def _cells(config: ExperimentConfig) -> list[tuple]:
    return [
        (config, s, n, r)
        for s in range(len(config.scenarios))
        for n in config.n_grid
        for r in range(config.replications)
    ]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_se: float
    points: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_slope(n: Sequence[float] | "RateReport", mae: Sequence[float] | None = None) -> SlopeFit:
    """OLS of ``log MAE`` on ``log n``; error behaves like ``n^slope``."""
    if isinstance(n, RateReport):
        raise ConfigError("pass aggregate columns; use RateReport.slopes for whole reports")
    x = np.log(np.asarray(n, float))
    y = np.log(np.asarray(mae, float))
    m = x.size
    if m < 3:
        raise ConfigError("slope fit needs at least three points")
    design = np.column_stack([np.ones(m), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / (m - 2)
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return SlopeFit(float(coef[1]), float(coef[0]), float(math.sqrt(max(cov[1, 1], 0.0))), m)


def aggregate(rows: Iterable[dict]) -> list[dict]:
    """MAE and its standard error per (scenario, variant, n), in first-seen order."""
    groups: dict[tuple, list] = {}
    counts: dict[tuple, list[int]] = {}
    for r in rows:
        key = (r["scenario"], r["variant"], r["n"])
        groups.setdefault(key, [])
        counts.setdefault(key, [0, 0])
        counts[key][0] += 1
        if r["status"] == "ok":
            groups[key].append(r["abs_error"])
        else:
            counts[key][1] += 1
    out = []
    for key, errs in groups.items():
        e = np.asarray(errs, float)
        mae = float(e.mean()) if e.size else None
        se = float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else None
        out.append(
            {
                "scenario": key[0],
                "variant": key[1],
                "n": key[2],
                "mae": mae,
                "se": se,
                "replications": counts[key][0],
                "degenerate": counts[key][1],
            }
        )
    return out


def _band_status(slope: float, target: float, band: float) -> str:
    gap = abs(slope - target)
    if gap <= band:
        return "pass"
    return "warn" if gap <= 2 * band else "fail"


@dataclass(frozen=True)
class RateReport:
    config: ExperimentConfig
    rows: list[dict]
    aggregates: list[dict]
    slopes: list[dict]
    exponents: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rows": self.rows,
            "aggregates": self.aggregates,
            "slopes": self.slopes,
            "exponents": self.exponents,
            "labels": {"artifact_choices": ["n_grid", "replications", "slope_band"]},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RateReport":
        return cls(
            ExperimentConfig.from_dict(data["config"]),
            list(data["rows"]),
            list(data["aggregates"]),
            list(data["slopes"]),
            dict(data["exponents"]),
        )

    def slope(self, scenario: str, variant: str = "second_order") -> dict | None:
        for s in self.slopes:
            if s["scenario"] == scenario and s["variant"] == variant:
                return s
        return None


def _summarize(config: ExperimentConfig, rows: list[dict]) -> RateReport:
    aggs = aggregate(rows)
    exponents = {}
    for spec in config.scenarios:
        alpha, beta, gamma, d = spec.smoothness()
        exponents[spec.name] = minimax_exponent(alpha, beta, gamma, d, spec.parametrization()).to_dict()
    slopes = []
    for spec in config.scenarios:
        target = -exponents[spec.name]["exponent"]
        for variant in config.variants:
            pts = [a for a in aggs if a["scenario"] == spec.name and a["variant"] == variant and a["mae"]]
            entry: dict[str, Any] = {"scenario": spec.name, "variant": variant, "target": target}
            if len(pts) >= 3:
                fit = fit_slope([p["n"] for p in pts], [p["mae"] for p in pts])
                entry.update(fit.to_dict(), status=_band_status(fit.slope, target, config.slope_band))
            else:
                entry.update(slope=None, intercept=None, slope_se=None, points=len(pts), status="insufficient")
            slopes.append(entry)
    return RateReport(config, rows, aggs, slopes, exponents)


def run_rate_sweep(config: ExperimentConfig, workers: int | None = None) -> RateReport:
    """Run every cell (serially or in a process pool) and summarize in cell order."""
    workers = config.workers if workers is None else workers
    cells = _cells(config)
    if workers <= 1:
        results = [_run_cell(c) for c in cells]
    else:
        chunk = max(1, len(cells) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells, chunksize=chunk))
    rows = [row for cell_rows in results for row in cell_rows]
    return _summarize(config, rows)
