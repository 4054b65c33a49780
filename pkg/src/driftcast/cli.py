"""Command-line front end: simulate datasets, run campaigns, render reports.

Subcommands:

* ``simulate`` writes the configured datasets (CSV plus JSON sidecar),
* ``run`` executes the full prequential campaign and emits traces,
  accuracy/significance/sensitivity reports, and a manifest,
* ``report`` re-renders the reports from stored traces without
  recomputing any forecasts.

Configs are JSON documents validated against a strict schema (unknown
keys are rejected). ``--preset desk`` is a small fixed-seed setup for
quick full-pipeline runs; ``--preset paper`` is the full-scale setup.
A ``--config`` file deep-merges over the chosen preset. The
``DRIFTCAST_SEED`` environment variable overrides every base seed.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 finished
but some method failed on more than 1% of series.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

import driftcast
from driftcast.core import (
    ConfigError,
    Dataset,
    DriftcastError,
    format_float,
    load_dataset,
    save_dataset,
    sidecar_path,
)
from driftcast.evaluate import (
    EvalConfig,
    EvalReport,
    MethodSpec,
    RunResult,
    build_report,
    drift_sensitivity,
    load_traces,
    method_group,
    prequential_run,
    write_traces,
    METHOD_ORDER,
)
from driftcast.simulate import SIM_DRIFT_KINDS, SimConfig, make_dataset
from driftcast.stats import TestResult, format_p, run_rank_tests

SEED_ENV_VAR = "DRIFTCAST_SEED"

FAILURE_EXIT_THRESHOLD = 0.01

PRESETS = ("desk", "paper")

_SIM_KEYS = {
    "n_series": int,
    "series_length": int,
    "train_len": int,
    "ar_coeffs": list,
    "ar_coeffs_2": list,
    "mean": (int, float),
    "mean_2": (int, float),
    "mean_2_high": (int, float),
    "noise_sd": (int, float),
    "burn_in": int,
    "base_seed": int,
}
_METHOD_KEYS = {"name": str, "eta": (int, float), "true_gradient": bool, "clamp": bool}
_EVAL_KEYS = {
    "horizon": int,
    "block_size": int,
    "global_lags": int,
    "ridge_lambda": (int, float),
    "alpha0": (int, float),
    "beta": (int, float),
    "literal_value_scaling": bool,
}
_STATS_KEYS = {"alpha": (int, float)}
_OUTPUT_KEYS = {"directory": str, "formats": list, "weight_traces": bool}
_TOP_KEYS = ("simulate", "methods", "evaluate", "stats", "output")


def preset_config(name: str) -> dict:
    """The full config document for a named preset.

    Both presets run the training-instance weighting in its literal
    value-scaling form and the gradient combiner with the analytic
    gradient; see README for why the reproduction campaign uses these
    variants (both are flag-switchable).
    """
    if name == "desk":
        sim = {
            "n_series": 100,
            "series_length": 600,
            "train_len": 450,
            "ar_coeffs": [0.5, -0.3, 0.2],
            "ar_coeffs_2": [-0.3, 0.15, 0.05],
            "noise_sd": 1.0,
            "burn_in": 200,
            "base_seed": 20250404,
        }
        horizon = 150
    elif name == "paper":
        sim = {
            "n_series": 2000,
            "series_length": 2000,
            "train_len": 1650,
            "ar_coeffs": [0.5, -0.3, 0.2],
            "ar_coeffs_2": [-0.3, 0.15, 0.05],
            "noise_sd": 1.0,
            "burn_in": 200,
            "base_seed": 20250404,
        }
        horizon = 350
    else:
        raise ConfigError(f"unknown preset {name!r}")
    methods = []
    for n in METHOD_ORDER:
        if n == "GDW":
            methods.append({"name": n, "eta": 0.01, "true_gradient": True, "clamp": False})
        else:
            methods.append({"name": n})
    return {
        "simulate": {kind: dict(sim) for kind in SIM_DRIFT_KINDS},
        "methods": methods,
        "evaluate": {
            "horizon": horizon,
            "block_size": 50,
            "global_lags": 10,
            "ridge_lambda": 1e-3,
            "alpha0": 0.9,
            "beta": 0.9,
            "literal_value_scaling": True,
        },
        "stats": {"alpha": 0.05},
        "output": {"directory": "driftcast_out", "formats": ["csv", "md"], "weight_traces": False},
    }


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins, lists replace wholesale."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _check_keys(section: dict, allowed: dict, where: str) -> None:
    for key, value in section.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")
        expected = allowed[key]
        if expected is bool:
            ok = isinstance(value, bool)
        elif expected is int or expected == (int, float):
            # bool is an int subclass; reject it where a number is expected
            ok = isinstance(value, expected) and not isinstance(value, bool)
        else:
            ok = isinstance(value, expected)
        if not ok:
            raise ConfigError(f"{where}.{key} has wrong type {type(value).__name__}")


@dataclass(frozen=True)
class RunConfig:
    """Validated campaign configuration."""

    sim_configs: dict
    eval_config: EvalConfig
    alpha: float
    out_dir: str
    formats: tuple
    weight_traces: bool
    document: dict


def validate_config(document: dict) -> RunConfig:
    """Schema-check a config document and build the typed pieces."""
    if not isinstance(document, dict):
        raise ConfigError("config must be a JSON object")
    for key in document:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level config key {key!r}")

    sim_section = document.get("simulate", {})
    if not isinstance(sim_section, dict):
        raise ConfigError("simulate section must map drift kinds to configs")
    sim_configs = {}
    for kind, section in sim_section.items():
        if kind not in SIM_DRIFT_KINDS:
            raise ConfigError(f"unknown drift kind {kind!r} in simulate section")
        if not isinstance(section, dict):
            raise ConfigError(f"simulate.{kind} must be an object")
        _check_keys(section, _SIM_KEYS, f"simulate.{kind}")
        params = dict(section)
        if "ar_coeffs" in params:
            params["ar_coeffs"] = tuple(params["ar_coeffs"])
        sim_configs[kind] = SimConfig(drift_kind=kind, **params)

    methods_section = document.get("methods")
    if not isinstance(methods_section, list) or not methods_section:
        raise ConfigError("methods must be a non-empty list")
    methods = []
    for i, entry in enumerate(methods_section):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"methods[{i}] must be an object with a 'name'")
        _check_keys(entry, _METHOD_KEYS, f"methods[{i}]")
        methods.append(MethodSpec(**entry))

    eval_section = document.get("evaluate", {})
    if not isinstance(eval_section, dict):
        raise ConfigError("evaluate section must be an object")
    _check_keys(eval_section, _EVAL_KEYS, "evaluate")
    eval_config = EvalConfig(methods=tuple(methods), **eval_section)

    stats_section = document.get("stats", {})
    if not isinstance(stats_section, dict):
        raise ConfigError("stats section must be an object")
    _check_keys(stats_section, _STATS_KEYS, "stats")
    alpha = float(stats_section.get("alpha", 0.05))
    if not 0.0 < alpha < 1.0:
        raise ConfigError("stats.alpha must be in (0, 1)")

    output_section = document.get("output", {})
    if not isinstance(output_section, dict):
        raise ConfigError("output section must be an object")
    _check_keys(output_section, _OUTPUT_KEYS, "output")
    formats = tuple(output_section.get("formats", ["csv", "md"]))
    for fmt in formats:
        if fmt not in ("csv", "md"):
            raise ConfigError(f"unknown output format {fmt!r}")

    return RunConfig(
        sim_configs=sim_configs,
        eval_config=eval_config,
        alpha=alpha,
        out_dir=output_section.get("directory", "driftcast_out"),
        formats=formats,
        weight_traces=bool(output_section.get("weight_traces", False)),
        document=document,
    )


def apply_seed_override(document: dict, env: dict | None = None) -> dict:
    """Apply the DRIFTCAST_SEED environment override to all sim seeds."""
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV_VAR)
    if raw is None:
        return document
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    document = copy.deepcopy(document)
    for section in document.get("simulate", {}).values():
        section["base_seed"] = seed
    return document


def config_hash(document: dict) -> str:
    """Digest of the canonical JSON form; formatting-insensitive."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config_document(preset: str | None, config_path: str | None) -> dict:
    if preset is None and config_path is None:
        raise ConfigError("provide --preset, --config, or both")
    document = preset_config(preset) if preset else {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                override = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        document = deep_merge(document, override) if document else override
    return apply_seed_override(document)


# ---------------------------------------------------------------------------
# pipeline stages


def dataset_paths(out_dir: Path, kind: str) -> tuple[Path, Path]:
    csv_path = out_dir / "datasets" / f"{kind}.csv"
    return csv_path, sidecar_path(csv_path)


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> dict:
    """Generate and write every configured dataset. Idempotent:
    identical configs produce byte-identical files."""
    if not cfg.sim_configs:
        raise ConfigError("config has no simulate section")
    (out_dir / "datasets").mkdir(parents=True, exist_ok=True)
    datasets = {}
    for kind, sim in cfg.sim_configs.items():
        dataset = make_dataset(sim)
        csv_path, _ = dataset_paths(out_dir, kind)
        save_dataset(dataset, csv_path)
        datasets[kind] = dataset
    return datasets


def _load_or_simulate(cfg: RunConfig, out_dir: Path) -> dict:
    """Reuse datasets on disk when they match the config; otherwise
    (re)simulate."""
    datasets = {}
    stale = {}
    for kind, sim in cfg.sim_configs.items():
        csv_path, meta_path = dataset_paths(out_dir, kind)
        if csv_path.exists() and meta_path.exists():
            dataset = load_dataset(csv_path)
            expected = json.loads(json.dumps(_sim_snapshot(sim)))
            if dataset.generator_config == expected:
                datasets[kind] = dataset
                continue
        stale[kind] = sim
    if stale:
        partial = cmd_simulate(
            RunConfig(
                sim_configs=stale,
                eval_config=cfg.eval_config,
                alpha=cfg.alpha,
                out_dir=cfg.out_dir,
                formats=cfg.formats,
                weight_traces=cfg.weight_traces,
                document=cfg.document,
            ),
            out_dir,
        )
        datasets.update(partial)
    if not datasets:
        raise ConfigError("no datasets available: add a simulate section or dataset files")
    return {kind: datasets[kind] for kind in cfg.sim_configs if kind in datasets}


def _sim_snapshot(sim: SimConfig) -> dict:
    snapshot = asdict(sim)
    snapshot["ar_coeffs"] = list(snapshot["ar_coeffs"])
    return snapshot


@dataclass
class KindResults:
    dataset: Dataset
    run: RunResult
    report: EvalReport
    test: TestResult | None
    stats_note: str | None


def cmd_run(cfg: RunConfig, out_dir: Path, threads: int = 1) -> dict:
    """Full campaign: simulate or load datasets, evaluate every method,
    write traces, reports, and the manifest. Returns per-kind results
    keyed by drift kind."""
    t0 = time.perf_counter()
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets = _load_or_simulate(cfg, out_dir)
    t_sim = time.perf_counter()

    results: dict[str, KindResults] = {}
    for kind, dataset in datasets.items():
        run = prequential_run(dataset, cfg.eval_config, n_workers=threads, capture_weights=cfg.weight_traces)
        report = build_report(run)
        test, note = _rank_tests_or_note(report, cfg.alpha)
        results[kind] = KindResults(dataset=dataset, run=run, report=report, test=test, stats_note=note)
    t_eval = time.perf_counter()

    files = _write_outputs(cfg, out_dir, results)
    t_report = time.perf_counter()

    manifest = {
        "config_hash": config_hash(cfg.document),
        "versions": {
            "driftcast": driftcast.__version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "timings_seconds": {
            "datasets": round(t_sim - t0, 3),
            "evaluate": round(t_eval - t_sim, 3),
            "reports": round(t_report - t_eval, 3),
        },
        "failure_fractions": {
            kind: {
                name: res.report.failure_counts[name] / len(res.report.series_ids)
                for name in res.report.methods
            }
            for kind, res in results.items()
        },
        "files": files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return results


def max_failure_fraction(results: dict) -> float:
    worst = 0.0
    for res in results.values():
        for name in res.report.methods:
            worst = max(worst, res.report.failure_counts[name] / len(res.report.series_ids))
    return worst


def _rank_tests_or_note(report: EvalReport, alpha: float) -> tuple[TestResult | None, str | None]:
    methods = [m for m in report.methods if np.any(np.isfinite(report.rmse_per_series[m]))]
    if len(methods) < 2:
        return None, f"statistical testing skipped: need at least 2 methods, have {len(methods)}"
    mask = np.ones(len(report.series_ids), dtype=bool)
    for m in methods:
        mask &= np.isfinite(report.rmse_per_series[m])
    if mask.sum() < 2:
        return None, "statistical testing skipped: fewer than 2 series scored by all methods"
    errors = np.column_stack([report.rmse_per_series[m][mask] for m in methods])
    return run_rank_tests(errors, methods, alpha), None


# ---------------------------------------------------------------------------
# report rendering


def _ordered_methods(methods) -> list:
    known = [m for m in METHOD_ORDER if m in methods]
    extras = [m for m in methods if m not in METHOD_ORDER]
    return known + extras


def accuracy_rows(report: EvalReport) -> list[dict]:
    """Table-style accuracy rows with per-group and overall best flags
    (on mean RMSE)."""
    ordered = _ordered_methods(report.methods)
    rows = []
    best_by_group: dict[str, str] = {}
    best_overall = None
    for name in ordered:
        mean_rmse = report.summary[name]["mean_rmse"]
        if np.isnan(mean_rmse):
            continue
        group = method_group(name)
        if group not in best_by_group or mean_rmse < report.summary[best_by_group[group]]["mean_rmse"]:
            best_by_group[group] = name
        if best_overall is None or mean_rmse < report.summary[best_overall]["mean_rmse"]:
            best_overall = name
    for name in ordered:
        s = report.summary[name]
        rows.append(
            {
                "method": name,
                "group": method_group(name),
                "mean_rmse": s["mean_rmse"],
                "median_rmse": s["median_rmse"],
                "mean_mae": s["mean_mae"],
                "median_mae": s["median_mae"],
                "failures": report.failure_counts[name],
                "group_best": name == best_by_group.get(method_group(name)),
                "overall_best": name == best_overall,
            }
        )
    return rows


def stats_rows(test: TestResult) -> list[dict]:
    """Control first, then methods by adjusted p ascending."""
    rows = [
        {
            "method": test.control,
            "mean_rank": test.mean_ranks[test.control],
            "z": None,
            "p_raw": None,
            "p_hochberg": None,
            "significantly_worse": False,
        }
    ]
    order = sorted(
        test.adjusted_p,
        key=lambda name: (test.adjusted_p[name], METHOD_ORDER.index(name) if name in METHOD_ORDER else len(METHOD_ORDER)),
    )
    for name in order:
        rows.append(
            {
                "method": name,
                "mean_rank": test.mean_ranks[name],
                "z": test.z_values[name],
                "p_raw": test.raw_p[name],
                "p_hochberg": test.adjusted_p[name],
                "significantly_worse": name in test.rejected,
            }
        )
    return rows


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def _md_num(value, digits: int = 4) -> str:
    if value is None:
        return "--"
    if isinstance(value, float):
        if np.isnan(value):
            return "--"
        return f"{value:.{digits}f}"
    return str(value)


def _write_outputs(cfg: RunConfig, out_dir: Path, results: dict) -> list[dict]:
    (out_dir / "traces").mkdir(parents=True, exist_ok=True)
    (out_dir / "reports").mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for kind, res in results.items():
        trace_path = out_dir / "traces" / f"{kind}.csv"
        write_traces(trace_path, res.run)
        written.append(trace_path)
        if cfg.weight_traces and res.run.weight_traces:
            written.extend(_write_weight_traces(out_dir, kind, res.run))

    written.extend(render_reports(cfg, out_dir, results))

    for kind in results:
        csv_path, meta_path = dataset_paths(out_dir, kind)
        if csv_path.exists():
            written.extend([csv_path, meta_path])

    inventory = []
    for path in written:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        inventory.append(
            {
                "path": str(path.relative_to(out_dir)),
                "sha256": digest,
                "bytes": path.stat().st_size,
            }
        )
    return inventory


def _write_weight_traces(out_dir: Path, kind: str, run: RunResult) -> list[Path]:
    paths = []
    for method, per_series in run.weight_traces.items():
        by_pairing: dict[tuple, list] = {}
        for sid in run.series_ids:
            for t, actual, row in per_series[sid]:
                for pairing, (yp, ya, w_p, w_a, combined) in row.items():
                    by_pairing.setdefault(pairing, []).append([sid, t, actual, yp, ya, w_p, w_a, combined])
        for pairing, rows in by_pairing.items():
            tag = f"{pairing[0][:3]}{pairing[1][:3]}"
            path = out_dir / "traces" / f"weights_{method}_{tag}_{kind}.csv"
            _write_csv(
                path,
                ["series_id", "t", "y", "yhat_partial", "yhat_all", "w_p", "w_a", "yhat_combined"],
                rows,
            )
            paths.append(path)
    return paths


def render_reports(cfg: RunConfig, out_dir: Path, results: dict) -> list[Path]:
    """Write accuracy, significance, and sensitivity files in the
    configured formats."""
    reports_dir = out_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    accuracy_md: list[str] = ["# Accuracy\n"]
    stats_md: list[str] = ["# Statistical testing\n"]

    for kind, res in results.items():
        rows = accuracy_rows(res.report)
        if "csv" in cfg.formats:
            path = reports_dir / f"accuracy_{kind}.csv"
            _write_csv(
                path,
                ["method", "group", "mean_rmse", "median_rmse", "mean_mae", "median_mae", "failures", "group_best", "overall_best"],
                [[r[c] for c in ("method", "group", "mean_rmse", "median_rmse", "mean_mae", "median_mae", "failures", "group_best", "overall_best")] for r in rows],
            )
            written.append(path)
        accuracy_md.append(f"\n## {kind.capitalize()}\n")
        accuracy_md.append("| Method | Group | Mean RMSE | Median RMSE | Mean MAE | Median MAE | Group best | Overall best |")
        accuracy_md.append("|---|---|---|---|---|---|---|---|")
        for r in rows:
            accuracy_md.append(
                f"| {r['method']} | {r['group']} | {_md_num(r['mean_rmse'])} | {_md_num(r['median_rmse'])} "
                f"| {_md_num(r['mean_mae'])} | {_md_num(r['median_mae'])} "
                f"| {'yes' if r['group_best'] else ''} | {'yes' if r['overall_best'] else ''} |"
            )

        stats_md.append(f"\n## {kind.capitalize()}\n")
        if res.test is None:
            stats_md.append(res.stats_note or "statistical testing skipped")
            if "csv" in cfg.formats:
                path = reports_dir / f"stats_{kind}.csv"
                _write_csv(path, ["note"], [[res.stats_note or "skipped"]])
                written.append(path)
            continue
        srows = stats_rows(res.test)
        if "csv" in cfg.formats:
            path = reports_dir / f"stats_{kind}.csv"
            _write_csv(
                path,
                ["method", "mean_rank", "z", "p_raw", "p_hochberg", "p_hochberg_display", "significantly_worse"],
                [
                    [
                        r["method"],
                        r["mean_rank"],
                        r["z"],
                        r["p_raw"],
                        r["p_hochberg"],
                        "" if r["p_hochberg"] is None else format_p(r["p_hochberg"]),
                        r["significantly_worse"],
                    ]
                    for r in srows
                ],
            )
            written.append(path)
        stats_md.append(
            f"Friedman statistic {res.test.friedman_statistic:.4f}, "
            f"p {format_p(res.test.friedman_p)}; control: {res.test.control}\n"
        )
        stats_md.append("| Method | Mean rank | p (adjusted) | Significantly worse |")
        stats_md.append("|---|---|---|---|")
        for r in srows:
            p_cell = "--" if r["p_hochberg"] is None else format_p(r["p_hochberg"])
            stats_md.append(
                f"| {r['method']} | {_md_num(r['mean_rank'])} | {p_cell} | {'yes' if r['significantly_worse'] else ''} |"
            )

        if kind in ("sudden", "incremental"):
            for metric in ("rmse", "mae"):
                table = drift_sensitivity(res.dataset, res.report, metric=metric)
                if "csv" in cfg.formats:
                    path = reports_dir / f"sensitivity_{kind}_{metric}.csv"
                    methods = _ordered_methods(table.methods)
                    header = ["bucket_low", "bucket_high", "n_series"] + list(methods)
                    rows_out = []
                    for bucket in range(len(table.counts)):
                        rows_out.append(
                            [table.edges[bucket], table.edges[bucket + 1], int(table.counts[bucket])]
                            + [table.means[m][bucket] for m in methods]
                        )
                    _write_csv(path, header, rows_out)
                    written.append(path)

    if "md" in cfg.formats:
        acc_path = reports_dir / "accuracy.md"
        acc_path.write_text("\n".join(accuracy_md) + "\n", encoding="utf-8")
        stats_path = reports_dir / "stats.md"
        stats_path.write_text("\n".join(stats_md) + "\n", encoding="utf-8")
        written.extend([acc_path, stats_path])
    return written


def cmd_report(cfg: RunConfig, out_dir: Path) -> list[Path]:
    """Re-render reports from stored traces and dataset sidecars."""
    traces_dir = out_dir / "traces"
    if not traces_dir.exists():
        raise ConfigError(f"no traces directory under {out_dir}")
    results = {}
    for kind in cfg.sim_configs or dict.fromkeys(SIM_DRIFT_KINDS):
        trace_path = traces_dir / f"{kind}.csv"
        if not trace_path.exists():
            continue
        run = load_traces(trace_path)
        csv_path, _ = dataset_paths(out_dir, kind)
        dataset = load_dataset(csv_path)
        run.dataset_name = kind
        report = build_report(run)
        test, note = _rank_tests_or_note(report, cfg.alpha)
        results[kind] = KindResults(dataset=dataset, run=run, report=report, test=test, stats_note=note)
    if not results:
        raise ConfigError(f"no trace files found in {traces_dir}")
    return render_reports(cfg, out_dir, results)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftcast", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (merged over --preset)")
        p.add_argument("--preset", choices=PRESETS, help="built-in configuration")
        p.add_argument("--out", help="output directory (defaults to the config's)")

    p_sim = sub.add_parser("simulate", help="generate the configured datasets")
    add_common(p_sim)

    p_run = sub.add_parser("run", help="simulate if needed, evaluate, report")
    add_common(p_run)
    p_run.add_argument("--threads", type=int, default=1, help="worker processes over series")

    p_rep = sub.add_parser("report", help="re-render reports from stored traces")
    add_common(p_rep)
    p_rep.add_argument("--format", choices=["csv", "md"], help="restrict output format")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        document = load_config_document(args.preset, args.config)
        cfg = validate_config(document)
        out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
        if args.command == "simulate":
            datasets = cmd_simulate(cfg, out_dir)
            for kind, dataset in datasets.items():
                print(f"wrote {kind}: {len(dataset)} series x {dataset.series_length}")
            return 0
        if args.command == "run":
            results = cmd_run(cfg, out_dir, threads=max(1, args.threads))
            for kind, res in results.items():
                best = min(
                    (m for m in res.report.methods if not np.isnan(res.report.summary[m]["mean_rmse"])),
                    key=lambda m: res.report.summary[m]["mean_rmse"],
                )
                print(f"{kind}: best mean RMSE {res.report.summary[best]['mean_rmse']:.4f} ({best})")
            worst = max_failure_fraction(results)
            if worst > FAILURE_EXIT_THRESHOLD:
                print(f"warning: a method failed on {worst:.1%} of series", file=sys.stderr)
                return 3
            return 0
        if args.command == "report":
            if args.format:
                cfg = RunConfig(
                    sim_configs=cfg.sim_configs,
                    eval_config=cfg.eval_config,
                    alpha=cfg.alpha,
                    out_dir=cfg.out_dir,
                    formats=(args.format,),
                    weight_traces=cfg.weight_traces,
                    document=cfg.document,
                )
            written = cmd_report(cfg, out_dir)
            print(f"re-rendered {len(written)} report files under {out_dir}")
            return 0
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DriftcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
