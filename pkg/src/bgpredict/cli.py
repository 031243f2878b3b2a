"""Command-line entry point: ``bgpredict {synth,run,compare}``.

Exit codes: 0 success, 1 runtime error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import pipeline, synth
from .config import ConfigError, ExperimentConfig, load_config
from .data import CsvFormatError, parse_cgm_csv
from .predega import RANGE_NAMES, VERDICT_ORDER, PredEgaReport, ZoneTableError, ZoneTables

logger = logging.getLogger("bgpredict")

REPORT_NAME = "report.json"
TRIALS_NAME = "trials.csv"
COMPARE_NAME = "compare.csv"
SYNTH_NAME = "cgm.csv"
TRIALS_HEADER = ("trial", "seed", "method", "range", "verdict", "count", "percent")


class CliError(RuntimeError):
    """Runtime failure reported with exit code 1."""


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--data", help="CGM CSV (patient_id,minutes,glucose_mgdl)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="base seed; trial i uses seed + i")
    p.add_argument("--trials", type=int, help="number of random patient splits")
    p.add_argument("--train-percent", type=float, help="percentage of patients used for training")
    p.add_argument("--smooth", action="store_true", default=None,
                   help="train on Butterworth-smoothed series")
    p.add_argument("--zones", help="PRED-EGA zone table JSON (default: packaged tables)")
    p.add_argument("--workers", type=int, help="threads used to run trials")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgpredict", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic CGM cohort as CSV")
    _common(p)
    p.add_argument("--patients", type=int, default=25)
    p.add_argument("--points", type=int, default=160)
    p.add_argument("--profile", choices=sorted(synth.PROFILES), default="noisy")

    p = sub.add_parser("run", help="run the deep pipeline over seeded patient splits")
    _common(p)
    p.add_argument("--dump-predictions", action="store_true",
                   help="include per-trial final predictions in report.json")

    p = sub.add_parser("compare", help="deep pipeline vs kernel ridge on identical splits")
    _common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(
        seed=args.seed,
        trials=args.trials,
        train_percent=args.train_percent,
        smoothing_enabled=args.smooth,
        workers=args.workers,
    )


def _load_tables(path: str | None) -> ZoneTables:
    if path is None:
        return ZoneTables.default()
    try:
        return ZoneTables.load(path)
    except OSError as exc:
        raise CliError(f"cannot read zones file {path}: {exc.strerror}") from None
    except ZoneTableError as exc:
        raise ConfigError(f"zones file {path}: {exc}") from None


def _load_series(path: str | None):
    if path is None:
        raise CliError("--data is required")
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read data file {path}: {exc.strerror}") from None
    try:
        series = parse_cgm_csv(raw)
    except CsvFormatError as exc:
        raise CliError(f"{path}: {exc}") from None
    if not series:
        raise CliError(f"{path}: no readings")
    return series


def trial_rows(result: pipeline.ExperimentResult) -> list[tuple]:
    rows = []
    for i, tr in enumerate(result.trials):
        pct = tr.report.percentages
        for r, rng in enumerate(RANGE_NAMES):
            for v, verdict in enumerate(VERDICT_ORDER):
                rows.append((i, tr.seed, result.method, rng, verdict.label,
                             int(tr.report.counts[r, v]), repr(float(pct[r, v]))))
    return rows


def reaggregate(trials_csv: str) -> dict[str, PredEgaReport]:
    """Pooled report per method rebuilt from ``trials.csv`` text."""
    counts: dict[str, list] = {}
    for row in csv.DictReader(io.StringIO(trials_csv)):
        c = counts.setdefault(row["method"], [[0] * 3 for _ in range(3)])
        r = RANGE_NAMES.index(row["range"])
        v = [x.label for x in VERDICT_ORDER].index(row["verdict"])
        c[r][v] += int(row["count"])
    return {m: PredEgaReport(c) for m, c in counts.items()}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _zones_doc(tables: ZoneTables, path: str | None) -> dict:
    return {"version": tables.version, "sha256": tables.source_hash,
            "source": "packaged" if path is None else Path(path).name}


def _config_echo(cfg: ExperimentConfig) -> dict:
    # worker count does not affect results, so it stays out of the report
    return {k: v for k, v in cfg.to_dict().items() if k != "workers"}


def _experiment_doc(result: pipeline.ExperimentResult, dump: bool) -> dict:
    return {
        "report": result.report.to_dict(),
        "table_row": result.report.flat(),
        "seeds": result.seeds,
        "trials": [t.to_dict(include_predictions=dump) for t in result.trials],
    }


def table_text(results: Sequence[pipeline.ExperimentResult]) -> str:
    """Two-decimal text table: method label then 9 columns (range x verdict)."""
    head = ["method"] + [f"{r}_{v.label}" for r in RANGE_NAMES for v in VERDICT_ORDER]
    lines = ["  ".join(f"{h:>15}" for h in head)]
    for res in results:
        lines.append("  ".join([f"{res.method:>15}"] + [f"{x:15.2f}" for x in res.report.flat()]))
    return "\n".join(lines) + "\n"


def _write_outputs(out: Path, files: dict[str, str]) -> None:
    """Write all files or none: on failure, remove whatever was written."""
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            tmp = out / (name + ".part")
            written.append(tmp)
            tmp.write_text(text, encoding="utf-8")
        for tmp in written:
            tmp.replace(tmp.with_name(tmp.name[: -len(".part")]))
    except OSError:
        for tmp in written:
            tmp.unlink(missing_ok=True)
            tmp.with_name(tmp.name[: -len(".part")]).unlink(missing_ok=True)
        if created and not any(out.iterdir()):
            out.rmdir()
        raise


def cmd_synth(args, cfg: ExperimentConfig) -> dict[str, str]:
    if args.points < cfg.d + cfg.m + 1:
        raise ConfigError(f"--points must be at least d + m + 1 = {cfg.d + cfg.m + 1}")
    if args.patients < 1:
        raise ConfigError("--patients must be positive")
    data = synth.synth_generate(args.patients, args.points, cfg.seed, args.profile)
    return {SYNTH_NAME: data.decode("ascii")}


def _experiment(args, cfg: ExperimentConfig, methods: Sequence[str]):
    tables = _load_tables(args.zones)
    series = _load_series(args.data)
    try:
        data = pipeline.prepare(series, cfg)
        results = [pipeline.run_experiment(data, trials=cfg.trials, base_seed=cfg.seed, tables=tables,
                                           method=m, workers=cfg.workers) for m in methods]
    except (pipeline.TrialError, ValueError, RuntimeError) as exc:
        raise CliError(str(exc)) from exc
    return tables, results


def cmd_run(args, cfg: ExperimentConfig) -> dict[str, str]:
    tables, (result,) = _experiment(args, cfg, ["deep"])
    doc = {
        "command": "run",
        "config": _config_echo(cfg),
        "zones": _zones_doc(tables, args.zones),
        "data": Path(args.data).name,
        **_experiment_doc(result, args.dump_predictions),
    }
    return {REPORT_NAME: _json_text(doc), TRIALS_NAME: _csv_text(TRIALS_HEADER, trial_rows(result))}


def cmd_compare(args, cfg: ExperimentConfig) -> dict[str, str]:
    tables, results = _experiment(args, cfg, ["deep", "tikhonov"])
    doc = {
        "command": "compare",
        "config": _config_echo(cfg),
        "zones": _zones_doc(tables, args.zones),
        "data": Path(args.data).name,
        "methods": {r.method: _experiment_doc(r, False) for r in results},
        "columns": [f"{r}_{v.label}" for r in RANGE_NAMES for v in VERDICT_ORDER],
    }
    rows = [[r.method] + [repr(x) for x in r.report.flat()] for r in results]
    trials = [row for r in results for row in trial_rows(r)]
    sys.stdout.write(table_text(results))
    return {
        REPORT_NAME: _json_text(doc),
        TRIALS_NAME: _csv_text(TRIALS_HEADER, trials),
        COMPARE_NAME: _csv_text(["method"] + doc["columns"], rows),
    }


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "compare": cmd_compare}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        files = COMMANDS[args.command](args, cfg)
        _write_outputs(Path(args.out), files)
    except ConfigError as exc:
        print(f"bgpredict: config error: {exc}", file=sys.stderr)
        return 2
    except (CliError, OSError) as exc:
        print(f"bgpredict: error: {exc}", file=sys.stderr)
        return 1
    for name in files:
        logger.info("wrote %s", Path(args.out) / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
