"""Command line interface.

Every command that computes something prints a JSON report embedding the
command name and the full effective configuration, so `cerealia report
--rerun` can reproduce the run from the report alone. Timing and the
creation stamp live under their own keys and are the only fields allowed
to differ between a run and its reproduction.

Configuration precedence: command line flags, then the [command] section
of the INI file passed with --config, then built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import SCHEMA_PRESETS, default_synth_config
from .detect import (
    NeuralDetectorConfig,
    StatDetectorConfig,
    load_detector,
    save_detector,
    train_neural,
    train_stat,
)
from .errors import CerealiaError
from .faults import (
    BiasFaultSpec,
    DatasetConfig,
    DriftFaultSpec,
    FaultRecord,
    MalfunctionFaultSpec,
    RandomFaultSpec,
    build_labeled_dataset,
    inject_bias,
    inject_drift,
    inject_malfunction,
    inject_random,
    load_dataset,
    save_dataset,
    save_manifest,
)
from .fst import FstExperimentConfig, FstRegressorConfig, run_fst_experiment
from .impute import ImputerConfig, fit_imputer, impute_flagged, load_imputer, save_imputer
from .ingest import CsvFormat, parse_csv, synth_generate, write_csv
from .metrics import accuracy, confusion, macro_f1, prf1
from .model import CLASS_ORDER, AttributeSchema, format_timestamp, make_rng, validate_series
from .reporting import load_report, plot_report, render_report
from .runtime import CheckerConfig, ConsistencyChecker, FileAlertSink, bench_inference
from .storage import HistoryStore, default_data_dir

FAULT_NAMES = ("random", "malfunction", "drift", "bias")


class UsageError(Exception):
    """Bad flag combination; surfaces as an argparse usage error (exit 2)."""


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # int | float | str | bool
    default: object
    help: str
    required: bool = False
    flag: str | None = None
    choices: tuple[str, ...] | None = None


_REPORT_PARAM = Param("report", "str", None, "also write the JSON report to this path")

COMMAND_PARAMS: dict[str, tuple[Param, ...]] = {
    "generate": (
        Param("seed", "int", 0, "generator seed"),
        Param("days", "float", 30.0, "length of the series in days (288 samples per day)"),
        Param("out", "str", None, "output CSV path", required=True),
        _REPORT_PARAM,
    ),
    "ingest": (
        Param("csv", "str", None, "station CSV to parse", required=True),
        Param("schema", "str", "synthetic",
              "schema preset (%s) or path to a schema JSON file" % "/".join(sorted(SCHEMA_PRESETS))),
        Param("out", "str", None, "rewrite the accepted rows to this CSV"),
        Param("max_reject_ratio", "float", 0.05, "abort when more than this share of rows is rejected"),
        _REPORT_PARAM,
    ),
    "inject": (
        Param("in_path", "str", None, "input CSV", required=True, flag="--in"),
        Param("out", "str", None, "output path (CSV, or .npz with --pct)", required=True),
        Param("seed", "int", 0, "injection seed"),
        Param("fault_class", "str", None, "inject one fault of this class", flag="--class",
              choices=FAULT_NAMES),
        Param("pct", "float", None, "build a labeled window dataset with this percent faulty"),
        Param("manifest", "str", None, "write the fault manifest JSON here"),
        Param("attribute", "str", None, "attribute to corrupt (default: drawn from the seed)"),
        Param("window", "str", None, "sample range start:end (default: drawn from the seed)"),
        Param("density", "float", 0.1, "spike probability for the random class"),
        Param("schema", "str", "synthetic", "schema preset or schema JSON path"),
        _REPORT_PARAM,
    ),
    "train": (
        Param("data", "str", None, "labeled dataset (.npz) from inject --pct", required=True),
        Param("model_out", "str", None, "where to write the model JSON", required=True),
        Param("detector", "str", "neural", "detector family", choices=("neural", "stat")),
        Param("seed", "int", 0, "training seed"),
        Param("hidden", "str", "64,32", "hidden layer widths, comma separated (neural)"),
        Param("dropout", "float", 0.2, "hidden dropout rate (neural)"),
        Param("epochs", "int", 100, "epoch cap (neural)"),
        Param("patience", "int", 5, "early stopping patience (neural)"),
        Param("batch_size", "int", 64, "minibatch size (neural)"),
        Param("learning_rate", "float", 0.001, "Adam learning rate (neural)"),
        _REPORT_PARAM,
    ),
    "evaluate": (
        Param("data", "str", None, "labeled dataset (.npz)", required=True),
        Param("model", "str", None, "trained detector file", required=True),
        _REPORT_PARAM,
    ),
    "impute": (
        Param("fit", "bool", False, "fit an imputer instead of applying one"),
        Param("in_path", "str", None, "input CSV", required=True, flag="--in"),
        Param("schema", "str", "synthetic", "schema preset or schema JSON path"),
        Param("model", "str", None, "imputer file to apply"),
        Param("model_out", "str", None, "where to write the fitted imputer (with --fit)"),
        Param("flags", "str", None, "JSON file with the flagged sample indices"),
        Param("out", "str", None, "output CSV with flagged samples replaced"),
        Param("lags", "int", 12, "autoregressive order (with --fit)"),
        Param("ridge", "float", 1e-3, "ridge penalty (with --fit)"),
        _REPORT_PARAM,
    ),
    "fst": (
        Param("detector", "str", None, "trained detector file", required=True),
        Param("imputer", "str", None, "fitted imputer file", required=True),
        Param("corpus_seed", "int", 0, "seed of the synthetic corpus"),
        Param("pct", "float", 20.0, "percent of test windows corrupted"),
        Param("train_samples", "int", 12000, "regressor training prefix length"),
        Param("test_windows", "int", 200, "number of non-overlapping test windows"),
        _REPORT_PARAM,
    ),
    "serve": (
        Param("model", "str", None, "trained detector file", required=True),
        Param("imputer", "str", None, "fitted imputer file (enables repair on flag)"),
        Param("host", "str", "127.0.0.1", "bind address"),
        Param("port", "int", 8000, "bind port"),
        Param("store", "str", None, "history NDJSON path (default: CEREALIA_DATA_DIR)"),
        Param("stride", "int", 1, "classify every N accepted samples"),
        Param("station", "str", "station-0", "station name used in alerts"),
        Param("alerts_out", "str", None, "append alerts to this NDJSON file"),
    ),
    "bench": (
        Param("model", "str", None, "trained detector file", required=True),
        Param("instances", "str", "1,5,15,30", "instance counts to measure, comma separated"),
        Param("samples", "int", 100, "classifications per instance"),
        Param("seed", "int", 0, "seed for the benchmark window stream"),
        _REPORT_PARAM,
    ),
    "report": (
        Param("in_path", "str", None, "report JSON to read", required=True, flag="--in"),
        Param("plot", "str", None, "render the report's plot to this SVG path"),
        Param("rerun", "bool", False, "re-execute the embedded configuration"),
        Param("out", "str", None, "where to write the rerun report (default: stdout)"),
    ),
}

COMMAND_HELP = {
    "generate": "write a synthetic weather CSV",
    "ingest": "parse and validate a station CSV",
    "inject": "corrupt a series, or build a labeled window dataset",
    "train": "train an inconsistency detector",
    "evaluate": "score a detector against a labeled dataset",
    "impute": "fit an imputer, or repair flagged samples",
    "fst": "run the fruit surface temperature comparison",
    "serve": "run the HTTP ingestion service",
    "bench": "measure detector latency and memory under load",
    "report": "render, plot, or reproduce a saved report",
}

# serve blocks and report is meta; everything else can be reproduced
RERUNNABLE = frozenset(COMMAND_PARAMS) - {"serve", "report"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cerealia",
        description="digital twin tooling for agricultural weather streams",
    )
    parser.add_argument("--version", action="version", version="cerealia %s" % __version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, params in COMMAND_PARAMS.items():
        p = sub.add_parser(name, help=COMMAND_HELP[name])
        p.add_argument("--config", default=None, help="INI file with a [%s] section" % name)
        for param in params:
            flag = param.flag or "--" + param.name.replace("_", "-")
            if param.kind == "bool":
                p.add_argument(flag, dest=param.name, action="store_true", default=None,
                               help=param.help)
            else:
                typ = {"int": int, "float": float, "str": str}[param.kind]
                p.add_argument(flag, dest=param.name, type=typ, default=None,
                               choices=param.choices, help=param.help)
    return parser


def _coerce(cp: configparser.ConfigParser, section: str, param: Param):
    getter = {
        "int": cp.getint,
        "float": cp.getfloat,
        "bool": cp.getboolean,
        "str": cp.get,
    }[param.kind]
    return getter(section, param.name)


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the INI section, and the parsed flags."""
    spec = COMMAND_PARAMS[command]
    merged = {p.name: p.default for p in spec}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        cp = configparser.ConfigParser()
        if not cp.read(cfg_path):
            raise UsageError("config file not found: %s" % cfg_path)
        if cp.has_section(command):
            for p in spec:
                if cp.has_option(command, p.name):
                    try:
                        merged[p.name] = _coerce(cp, command, p)
                    except ValueError as exc:
                        raise UsageError(
                            "config [%s] %s: %s" % (command, p.name, exc)
                        ) from exc
    for p in spec:
        value = getattr(args, p.name, None)
        if value is not None:
            merged[p.name] = value
    for p in spec:
        if p.required and merged[p.name] is None:
            flag = p.flag or "--" + p.name.replace("_", "-")
            raise UsageError("%s: %s is required" % (command, flag))
    return merged


def _resolve_schema(spec: str) -> AttributeSchema:
    if spec in SCHEMA_PRESETS:
        return SCHEMA_PRESETS[spec]()
    with open(spec, "r", encoding="utf-8") as fh:
        return AttributeSchema.from_dict(json.load(fh))


def _read_series(path: str, schema: AttributeSchema):
    return parse_csv(path, schema, CsvFormat()).series


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _parse_window(text: str) -> tuple[int, int]:
    try:
        start_s, end_s = text.split(":")
        return int(start_s), int(end_s)
    except ValueError:
        raise UsageError("window must look like start:end, got %r" % text) from None


def cmd_generate(p: dict) -> dict:
    config = default_synth_config()
    n_samples = int(round(p["days"] * 86400 / config.sampling_interval))
    series = synth_generate(config, n_samples, seed=p["seed"])
    write_csv(series, p["out"])
    return {
        "kind": "generate",
        "out": p["out"],
        "n_samples": len(series),
        "fingerprint": series.fingerprint(),
        "schema": series.schema.to_dict(),
    }


def cmd_ingest(p: dict) -> dict:
    schema = _resolve_schema(p["schema"])
    result = parse_csv(p["csv"], schema, CsvFormat(), max_reject_ratio=p["max_reject_ratio"])
    validation = validate_series(result.series)
    if p["out"]:
        write_csv(result.series, p["out"])
    return {
        "kind": "ingest",
        "n_samples": len(result.series),
        "n_rejected": len(result.rejects),
        "rejects": [
            {"line": r.line_number, "reason": r.reason} for r in result.rejects[:20]
        ],
        "n_violations": len(validation.violations),
        "fingerprint": result.series.fingerprint(),
        "out": p["out"],
    }


def _inject_dataset(p: dict, series) -> dict:
    cfg = DatasetConfig(
        pct_inconsistent=p["pct"],
        seed=p["seed"],
        fault_attribute=p["attribute"],
        random_density=p["density"],
    )
    dataset = build_labeled_dataset(series, cfg)
    save_dataset(p["out"], dataset)
    if p["manifest"]:
        save_manifest(p["manifest"], dataset.manifest,
                      header={"dataset": cfg.to_dict(), "provenance": dataset.provenance})
    return {
        "kind": "inject-dataset",
        "out": p["out"],
        "manifest": p["manifest"],
        "n_windows": len(dataset),
        "class_counts": dataset.class_counts(),
        "provenance": dataset.provenance,
    }


def _inject_series(p: dict, series, schema: AttributeSchema) -> dict:
    rng = make_rng(p["seed"])
    names = schema.names
    # draws happen in a fixed order so the same seed replays identically
    attribute = p["attribute"] or names[int(rng.integers(0, len(names)))]
    if attribute not in names:
        raise UsageError("attribute %r not in schema %r" % (attribute, names))
    if p["window"] is not None:
        segment = _parse_window(p["window"])
    elif p["fault_class"] == "random":
        segment = None  # spikes across the whole series
    else:
        lo = min(24, len(series))
        length = int(rng.integers(lo, min(96, len(series)) + 1))
        start = int(rng.integers(0, len(series) - length + 1))
        segment = (start, start + length)

    label = p["fault_class"]
    if label == "random":
        spec = RandomFaultSpec(density=p["density"], seed=p["seed"], window=segment)
        faulted, mask = inject_random(series, spec, attribute)
    elif label == "malfunction":
        spec = MalfunctionFaultSpec(window=segment, seed=p["seed"])
        faulted, mask = inject_malfunction(series, spec, attribute)
    elif label == "drift":
        spec = DriftFaultSpec(window=segment, seed=p["seed"])
        faulted, mask = inject_drift(series, spec, attribute)
    else:
        spec = BiasFaultSpec(window=segment)
        faulted, mask = inject_bias(series, spec, attribute)

    write_csv(faulted, p["out"])
    span = segment if segment is not None else (0, len(series))
    if p["manifest"]:
        record = FaultRecord(
            window_index=-1,  # not tied to a dataset window
            label=label,
            attribute=attribute,
            segment=span,
            seed=p["seed"],
            params=spec.params(),
        )
        save_manifest(p["manifest"], [record], header={"source": p["in_path"]})
    return {
        "kind": "inject-series",
        "out": p["out"],
        "manifest": p["manifest"],
        "fault_class": label,
        "attribute": attribute,
        "window": list(span),
        "n_modified": int(mask.sum()),
        "schema": schema.to_dict(),
    }


def cmd_inject(p: dict) -> dict:
    if (p["fault_class"] is None) == (p["pct"] is None):
        raise UsageError("inject: pass exactly one of --class or --pct")
    schema = _resolve_schema(p["schema"])
    series = _read_series(p["in_path"], schema)
    if p["pct"] is not None:
        return _inject_dataset(p, series)
    return _inject_series(p, series, schema)


def cmd_train(p: dict) -> dict:
    dataset = load_dataset(p["data"])
    if p["detector"] == "neural":
        hidden = tuple(int(tok) for tok in p["hidden"].split(",") if tok.strip())
        config = NeuralDetectorConfig(
            hidden_layers=hidden,
            dropout=p["dropout"],
            learning_rate=p["learning_rate"],
            batch_size=p["batch_size"],
            max_epochs=p["epochs"],
            patience=p["patience"],
            seed=p["seed"],
        )
        detector, report = train_neural(dataset, config)
    else:
        detector, report = train_stat(dataset, StatDetectorConfig(seed=p["seed"]))
    save_detector(detector, p["model_out"])
    return {
        "kind": "train",
        "detector": p["detector"],
        "model_out": p["model_out"],
        "provenance": dataset.provenance,
        **report.to_dict(),
    }


def cmd_evaluate(p: dict) -> dict:
    dataset = load_dataset(p["data"])
    detector = load_detector(p["model"])
    predicted, _ = detector.classify_batch(dataset.windows)
    truth = [CLASS_ORDER[int(i)] for i in dataset.labels]
    matrix = confusion(truth, predicted)
    per_class = {}
    for label in CLASS_ORDER:
        s = prf1(matrix, label)
        per_class[label.value] = {
            "precision": s.precision,
            "recall": s.recall,
            "f1": s.f1,
            "support": s.support,
        }
    return {
        "kind": "evaluation",
        "model": p["model"],
        "detector": detector.kind,
        "n_windows": len(dataset),
        "macro_f1": macro_f1(matrix),
        "accuracy": accuracy(matrix),
        "per_class": per_class,
        "confusion": matrix.counts.tolist(),
        "provenance": dataset.provenance,
    }


def cmd_impute(p: dict) -> dict:
    schema = _resolve_schema(p["schema"])
    series = _read_series(p["in_path"], schema)
    if p["fit"]:
        if not p["model_out"]:
            raise UsageError("impute --fit: --model-out is required")
        config = ImputerConfig(lags=p["lags"], ridge=p["ridge"])
        imputer = fit_imputer(series, config)
        save_imputer(imputer, p["model_out"])
        return {
            "kind": "impute-fit",
            "model_out": p["model_out"],
            "n_samples": len(series),
            "lags": config.lags,
            "ridge": config.ridge,
            "residual_std": imputer.residual_std.tolist(),
        }
    if not (p["model"] and p["flags"] and p["out"]):
        raise UsageError("impute: --model, --flags and --out are required (or pass --fit)")
    with open(p["flags"], "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    indices = doc["flags"] if isinstance(doc, dict) else doc
    flags = np.zeros(len(series), dtype=bool)
    flags[np.asarray(indices, dtype=int)] = True
    imputer = load_imputer(p["model"])
    repaired = impute_flagged(series, flags, imputer)
    write_csv(repaired, p["out"])
    return {
        "kind": "impute-apply",
        "out": p["out"],
        "n_flagged": int(flags.sum()),
        "flag_indices": sorted(int(i) for i in np.nonzero(flags)[0]),
        "schema": schema.to_dict(),
    }


def cmd_fst(p: dict) -> dict:
    detector = load_detector(p["detector"])
    imputer = load_imputer(p["imputer"])
    config = FstExperimentConfig(
        corpus_seed=p["corpus_seed"],
        pct_faulty=p["pct"],
        train_samples=p["train_samples"],
        test_windows=p["test_windows"],
        regressor=FstRegressorConfig(seed=p["corpus_seed"]),
    )
    report = run_fst_experiment(detector, imputer, config).to_dict()
    report["experiment_config"] = report.pop("config")
    return report


def cmd_bench(p: dict) -> dict:
    detector = load_detector(p["model"])
    runs = []
    for token in p["instances"].split(","):
        token = token.strip()
        if not token:
            continue
        n = int(token)
        result = bench_inference(
            detector, n_samples=p["samples"], n_instances=n, seed=p["seed"]
        )
        runs.append(result.to_dict())
    return {"kind": "bench", "model": p["model"], "runs": runs}


def cmd_serve(p: dict) -> int:
    from .service import create_app

    detector = load_detector(p["model"])
    imputer = load_imputer(p["imputer"]) if p["imputer"] else None
    store_path = Path(p["store"]) if p["store"] else default_data_dir() / "history.ndjson"
    store_path.parent.mkdir(parents=True, exist_ok=True)
    store = HistoryStore(store_path)
    sink = FileAlertSink(p["alerts_out"]) if p["alerts_out"] else None
    checker = ConsistencyChecker(
        detector,
        imputer=imputer,
        store=store,
        config=CheckerConfig(station=p["station"], stride=p["stride"]),
        sink=sink,
    )
    app = create_app(checker)
    print("serving %s on http://%s:%d (history: %s)"
          % (p["station"], p["host"], p["port"], store_path))
    import uvicorn

    uvicorn.run(app, host=p["host"], port=p["port"], log_level="warning")
    return 0


COMMAND_FN = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "inject": cmd_inject,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "impute": cmd_impute,
    "fst": cmd_fst,
    "bench": cmd_bench,
}


def run_command(command: str, params: dict) -> dict:
    """Execute one reproducible command and wrap its payload in the report
    envelope. The caller decides where the report goes."""
    if command not in COMMAND_FN:
        raise UsageError("command %r cannot be run from a report" % command)
    started = time.perf_counter()
    payload = COMMAND_FN[command](dict(params))
    wall = time.perf_counter() - started
    report = {
        "kind": payload.pop("kind"),
        "command": command,
        "config": _jsonable(params),
    }
    report.update(_jsonable(payload))
    report["created_at"] = format_timestamp(int(time.time()))
    report["timing"] = {"wall_s": wall}
    return report


def _dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def cmd_report(p: dict) -> int:
    report = load_report(p["in_path"])
    if p["rerun"]:
        command = report.get("command")
        config = report.get("config")
        if command not in RERUNNABLE or not isinstance(config, dict):
            raise UsageError(
                "report %s does not embed a reproducible command" % p["in_path"]
            )
        new_report = run_command(command, config)
        text = _dump_report(new_report)
        if p["out"]:
            Path(p["out"]).write_text(text + "\n", encoding="utf-8")
            print("rerun of %r written to %s" % (command, p["out"]))
        else:
            print(text)
        return 0
    print(render_report(report))
    if p["plot"]:
        plot_report(report, p["plot"])
        print("plot written to %s" % p["plot"])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        params = resolve_config(args.command, args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    try:
        if args.command == "serve":
            return cmd_serve(params)
        if args.command == "report":
            return cmd_report(params)
        report = run_command(args.command, params)
        text = _dump_report(report)
        print(text)
        if params.get("report"):
            Path(params["report"]).write_text(text + "\n", encoding="utf-8")
    except UsageError as exc:
        parser.error(str(exc))
    except CerealiaError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
