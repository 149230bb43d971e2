"""Reading configs and datasets, writing reports.

Config files are JSON, or INI where every value is parsed as JSON when
possible and kept as a string otherwise. A report JSON (anything with a
top-level ``"config"`` key) is accepted wherever an experiment config is,
so a sweep can be replayed from its own output.
"""

from __future__ import annotations

import configparser
import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .harness import RateReport

__all__ = [
    "ROW_FIELDS",
    "AGGREGATE_FIELDS",
    "load_config",
    "load_experiment_dict",
    "read_dataset_csv",
    "write_dataset_csv",
    "write_csv",
    "write_report_json",
    "read_report_json",
    "write_rate_plot",
    "emit",
]

ROW_FIELDS = (
    "scenario", "variant", "n", "rep", "h", "k", "tau_true", "tau_hat", "abs_error", "n_window", "status", "message",
)
AGGREGATE_FIELDS = ("scenario", "variant", "n", "mae", "se", "replications", "degenerate")


def _ini_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path: str | Path) -> dict:
    """Parse a JSON or INI file into a dict; INI sections become nested dicts.

    Keys of an INI ``[DEFAULT]`` or ``[main]`` section land at the top level.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return data
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out: dict = {k: _ini_value(v) for k, v in parser.defaults().items()}
    for section in parser.sections():
        values = {k: _ini_value(v) for k, v in parser.items(section) if k not in parser.defaults()}
        if section == "main":
            out.update(values)
        else:
            out[section] = values
    return out


def load_experiment_dict(path: str | Path) -> dict:
    """Experiment config from a config file or from an emitted report."""
    data = load_config(path)
    if "config" in data and "rows" in data:
        return data["config"]
    return data


def read_dataset_csv(path: str | Path) -> Dataset:
    """Columns ``x_1 .. x_d``, ``a`` and ``y``, with a header row."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        xcols = sorted((c for c in header if c.startswith("x_")), key=lambda c: int(c[2:]))
        if not xcols or "a" not in header or "y" not in header:
            raise ConfigError(f"{path}: need columns x_1..x_d, a, y")
        rows = list(reader)
    try:
        x = np.array([[float(r[c]) for c in xcols] for r in rows]).reshape(len(rows), len(xcols))
        a = np.array([float(r["a"]) for r in rows])
        y = np.array([float(r["y"]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    return Dataset(x, a, y)


def write_dataset_csv(data: Dataset, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j + 1}" for j in range(data.d)] + ["a", "y"])
        for xi, ai, yi in zip(data.x, data.a, data.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(ai)), repr(float(yi))])
    return path


def write_csv(records: Iterable[dict], fields: Sequence[str], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: ("" if rec.get(k) is None else rec.get(k)) for k in fields})
    return path


def write_report_json(report: RateReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return path


def read_report_json(path: str | Path) -> RateReport:
    return RateReport.from_dict(json.loads(Path(path).read_text()))


def write_rate_plot(report: RateReport, path: str | Path) -> Path:
    """Log-log MAE against n, one dashed reference line per scenario.

    The reference has the theoretical slope and passes through the first
    second-order aggregate (or the first aggregate of any variant). Each
    reference line carries the SVG id ``reference-<scenario>``.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "cate-minimax", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        n_grid = list(report.config.n_grid)
        for spec in report.config.scenarios:
            name = spec.name
            aggs = [a for a in report.aggregates if a["scenario"] == name and a["mae"]]
            for variant in report.config.variants:
                pts = [a for a in aggs if a["variant"] == variant]
                if pts:
                    ax.loglog([p["n"] for p in pts], [p["mae"] for p in pts], "o-", label=f"{name} {variant}")
            anchor = next((a for a in aggs if a["variant"] == "second_order"), aggs[0] if aggs else None)
            n0, m0 = (anchor["n"], anchor["mae"]) if anchor else (n_grid[0], 1.0)
            slope = -report.exponents[name]["exponent"]
            ns = np.array([n_grid[0], n_grid[-1]], float)
            (line,) = ax.plot(ns, m0 * (ns / n0) ** slope, "--", color="gray", label=f"{name} n^{slope:.3f}")
            line.set_gid(f"reference-{name}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("mean absolute error")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def emit(report: RateReport, out_dir: str | Path, formats: Iterable[str] = ("csv", "json", "svg")) -> list[Path]:
    """Write the requested formats into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    formats = list(formats)
    unknown = set(formats) - {"csv", "json", "svg"}
    if unknown:
        raise ConfigError(f"unknown output formats {sorted(unknown)}")
    if "csv" in formats:
        written.append(write_csv(report.rows, ROW_FIELDS, out / "rows.csv"))
        written.append(write_csv(report.aggregates, AGGREGATE_FIELDS, out / "aggregates.csv"))
    if "json" in formats:
        written.append(write_report_json(report, out / "report.json"))
    if "svg" in formats:
        written.append(write_rate_plot(report, out / "rates.svg"))
    return written
