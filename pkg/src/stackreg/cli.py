"""Command-line batch harness: ``run``, ``compare`` and ``report``.

Exit codes: 0 success, 1 every dataset (or the comparison) failed,
2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .evaluation import DatasetRow, MetricError, build_report, nmse
from .experiment import ConfigError, DatasetOutcome, ExperimentConfig, run_dataset

log = logging.getLogger("stackreg")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
RESULTS_FILE = "results.json"
BASELINES_FILE = "baselines.json"


class BaselineError(ValueError):
    """External predictions do not line up with the emitted test splits."""


# ---------------------------------------------------------------------------
# Configuration

_SCALAR_KEYS = {
    f.name: f.type for f in fields(ExperimentConfig) if f.name not in ("target_overrides", "baselines")
}
_ALIASES = {"data": "data_dir", "out": "output_dir", "holdout": "holdout_fraction"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    kind = _SCALAR_KEYS[key]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            return _parse_bool(text)
        if key == "rbf_center_grid":
            if not text or text.lower() == "auto":
                return None
            return tuple(int(c) for c in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment.

    ``target_column.<dataset>`` overrides the target per dataset and
    ``baseline.<name>`` registers a baseline prediction file.
    """
    out: dict = {}
    overrides, baselines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key.startswith("target_column."):
            overrides[key.split(".", 1)[1]] = value
        elif key.startswith("baseline."):
            baselines[key.split(".", 1)[1]] = value
        elif key in _SCALAR_KEYS:
            out[key] = _convert(key, value)
        else:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
    if overrides:
        out["target_overrides"] = overrides
    if baselines:
        out["baselines"] = baselines
    return out


def _pairs(items, what: str) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"{what} must be NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    values: dict = {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text, str(path)))
    for key in _SCALAR_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _convert(key, str(flag))
    overrides = dict(values.pop("target_overrides", {}))
    overrides.update(_pairs(getattr(args, "target_override", None), "--target-override"))
    baselines = dict(values.pop("baselines", {}))
    baselines.update(_pairs(getattr(args, "baseline", None), "--baseline"))
    try:
        return ExperimentConfig(
            **values,
            target_overrides=tuple(sorted(overrides.items())),
            baselines=tuple(sorted(baselines.items())),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_to_json(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["target_overrides"] = dict(cfg.target_overrides)
    d["baselines"] = dict(cfg.baselines)
    d["rbf_center_grid"] = list(cfg.rbf_center_grid) if cfg.rbf_center_grid else None
    return d


# ---------------------------------------------------------------------------
# Running datasets


def _worker(job):
    path, cfg = job
    name = Path(path).stem
    try:
        return name, run_dataset(path, cfg, name), None
    except Exception as exc:  # isolate per-dataset failures
        return name, None, f"{type(exc).__name__}: {exc}"


def _resolve_jobs(requested: int, n: int) -> int:
    avail = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    return max(1, min(requested or avail, n))


def run_all(cfg: ExperimentConfig, paths) -> tuple[list[DatasetOutcome], dict]:
    """Run every dataset; outcomes come back sorted by dataset name."""
    jobs = [(str(p), cfg) for p in paths]
    workers = _resolve_jobs(cfg.jobs, len(jobs))
    if workers == 1:
        results = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs))
    outcomes, failures = [], {}
    for name, outcome, err in sorted(results, key=lambda r: r[0]):
        if err is None:
            outcomes.append(outcome)
        else:
            log.warning("dataset %s failed: %s", name, err)
            failures[name] = err
    return outcomes, failures


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_dataset_artifacts(out: Path, o: DatasetOutcome) -> None:
    methods = list(o.predictions)
    rows = [
        [int(r), repr(float(y))] + [repr(float(o.predictions[m][i])) for m in methods]
        for i, (r, y) in enumerate(zip(o.test_rows, o.y_test))
    ]
    _write_csv(out / "predictions" / f"{o.row.name}.csv", ["row_index", "y"] + methods, rows)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "traces" / f"{o.row.name}.txt").write_text(o.trace, encoding="utf-8")


def _row_from_json(d: dict, baselines: dict) -> DatasetRow:
    t = d["test_nmse"]
    return DatasetRow(
        name=d["name"],
        n_records=d["n_records"],
        n_vars=d["n_vars"],
        base=t["base"],
        level1=t["level1"],
        level2=t["level2"],
        chosen_m=d["chosen_m"],
        rule=d["rule"],
        baselines={b: s[d["name"]] for b, s in baselines.items() if d["name"] in s},
    )


def render(out: Path) -> None:
    """Write tables, selection list, difference series and comparisons from saved JSON."""
    results = json.loads((out / RESULTS_FILE).read_text(encoding="utf-8"))
    baselines = {}
    if (out / BASELINES_FILE).is_file():
        baselines = json.loads((out / BASELINES_FILE).read_text(encoding="utf-8"))
    rows = [_row_from_json(d, baselines) for d in results["datasets"]]
    if not rows:
        raise MetricError("no successful datasets to report")
    rep = build_report(rows)

    t1 = ["DB", "CR", "LR", "QR", "RBF", "fE1", "fE2", "fE3", "Rec", "Var"]
    _write_csv(
        out / "table1.csv", t1,
        [[r["DB"]] + [_fmt(r[c]) for c in t1[1:8]] + [r["Rec"], r["Var"]] for r in rep.table1],
    )
    n_m = len(rows[0].level2)
    t2 = ["DB"] + [f"fE123_{m}" for m in range(n_m)] + ["Rule", "Selected", "Rec", "Var"]
    _write_csv(
        out / "table2.csv", t2,
        [
            [r["DB"]] + [_fmt(r[f"fE123_{m}"]) for m in range(n_m)]
            + [r["Rule"], r["Selected"], r["Rec"], r["Var"]]
            for r in rep.table2
        ],
    )
    _write_csv(
        out / "table3.csv", ["DB", "fE_star", "fE123_star", "Rec", "Var"],
        [[r["DB"], _fmt(r["fE_star"]), _fmt(r["fE123_star"]), r["Rec"], r["Var"]] for r in rep.table3],
    )
    _write_csv(
        out / "selection.csv", ["dataset", "chosen_m", "rule"],
        [[r.name, r.chosen_m, r.rule] for r in rows],
    )
    for pair, series in rep.differences.items():
        _write_csv(
            out / "differences" / f"{pair}.csv", ["dataset", "difference"],
            [[n, repr(v)] for n, v in series],
        )
    if baselines:
        names = sorted(baselines)
        _write_csv(
            out / "baselines.csv", ["dataset"] + names,
            [[r.name] + [_fmt(baselines[b][r.name]) if r.name in baselines[b] else "" for b in names]
             for r in rows],
        )
    _write_json(
        out / "comparisons.json",
        {
            "best_level1": rep.best_level1,
            "tests": rep.comparisons,
            "differences": {k: [[n, v] for n, v in s] for k, s in rep.differences.items()},
            "failures": results.get("failures", {}),
        },
    )


def list_datasets(data_dir: str) -> list[Path]:
    d = Path(data_dir)
    if not data_dir or not d.is_dir():
        raise ConfigError(f"data directory {data_dir!r} does not exist")
    paths = sorted(d.glob("*.csv"))
    if not paths:
        raise ConfigError(f"no CSV files in {d}")
    return paths


def run_experiment(cfg: ExperimentConfig) -> int:
    paths = list_datasets(cfg.data_dir)
    if not cfg.output_dir:
        raise ConfigError("output_dir is required")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcomes, failures = run_all(cfg, paths)
    for o in outcomes:
        write_dataset_artifacts(out, o)
    _write_json(
        out / RESULTS_FILE,
        {
            "config": config_to_json(cfg),
            "datasets": [o.to_json() for o in outcomes],
            "failures": failures,
        },
    )
    if not outcomes:
        log.error("all %d datasets failed", len(paths))
        return EXIT_FAILED
    if cfg.baselines:
        compare_baselines(out, dict(cfg.baselines))
    else:
        render(out)
    log.info("%d datasets done, %d failed; artifacts in %s", len(outcomes), len(failures), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Baselines


def read_baseline(path) -> dict:
    """Map dataset -> {row_index: prediction} from a dataset,row_index,prediction CSV."""
    path = Path(path)
    out: dict = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"dataset", "row_index", "prediction"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise BaselineError(f"{path}: header must contain {sorted(need)}")
        for line, rec in enumerate(reader, start=2):
            try:
                idx, pred = int(rec["row_index"]), float(rec["prediction"])
            except (TypeError, ValueError):
                raise BaselineError(f"{path}: line {line}: unparseable row {rec}") from None
            rows = out.setdefault(rec["dataset"], {})
            if idx in rows:
                raise BaselineError(f"{path}: line {line}: duplicate row {idx} for {rec['dataset']}")
            rows[idx] = pred
    return out


def _saved_test_split(out: Path, name: str) -> tuple[np.ndarray, np.ndarray]:
    with (out / "predictions" / f"{name}.csv").open(newline="", encoding="utf-8") as fh:
        recs = list(csv.DictReader(fh))
    return (
        np.array([int(r["row_index"]) for r in recs], dtype=np.int64),
        np.array([float(r["y"]) for r in recs]),
    )


def compare_baselines(out: Path, baselines: dict) -> dict:
    """Score external test predictions against the saved splits, then re-render."""
    results = json.loads((out / RESULTS_FILE).read_text(encoding="utf-8"))
    scores: dict = {}
    for bname, path in sorted(baselines.items()):
        preds = read_baseline(path)
        scores[bname] = {}
        for d in results["datasets"]:
            name = d["name"]
            rows, y = _saved_test_split(out, name)
            got = preds.get(name, {})
            if len(got) != rows.size or set(got) != set(rows.tolist()):
                raise BaselineError(
                    f"baseline {bname!r}, dataset {name!r}: {len(got)} prediction rows "
                    f"do not match the {rows.size} test rows"
                )
            yhat = np.array([got[int(r)] for r in rows])
            scores[bname][name] = nmse(y, yhat).value
    _write_json(out / BASELINES_FILE, scores)
    render(out)
    return scores


# ---------------------------------------------------------------------------
# Entry point


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--data", "--data-dir", dest="data_dir")
    p.add_argument("--out", "--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--k-folds", dest="k_folds", type=int)
    p.add_argument("--holdout", "--holdout-fraction", dest="holdout_fraction", type=float)
    p.add_argument("--jobs", type=int)
    for key in sorted(_SCALAR_KEYS):
        if key in ("data_dir", "output_dir", "seed", "k_folds", "holdout_fraction", "jobs"):
            continue
        p.add_argument("--" + key.replace("_", "-"), dest=key)
    p.add_argument("--target-override", action="append", metavar="DATASET=COLUMN")
    p.add_argument("--baseline", action="append", metavar="NAME=PATH")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackreg", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(
        sub.add_parser("run", parents=[common], help="full pipeline over a directory of CSVs")
    )
    _add_config_flags(
        sub.add_parser("compare", parents=[common], help="score baseline predictions against a run")
    )
    rep = sub.add_parser("report", parents=[common], help="re-render tables from saved JSON")
    rep.add_argument("--out", "--output-dir", dest="output_dir", required=True)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            out = Path(args.output_dir)
            if not (out / RESULTS_FILE).is_file():
                raise ConfigError(f"no {RESULTS_FILE} in {out}")
            render(out)
            return EXIT_OK
        cfg = build_config(args)
        if args.command == "run":
            return run_experiment(cfg)
        out = Path(cfg.output_dir)
        if not (out / RESULTS_FILE).is_file():
            raise ConfigError(f"no {RESULTS_FILE} in {out!s}; run the pipeline first")
        if not cfg.baselines:
            raise ConfigError("compare needs at least one --baseline NAME=PATH")
        compare_baselines(out, dict(cfg.baselines))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BaselineError, MetricError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
