"""Report rendering: JSON reports to terminal tables and optional SVG plots.

Reports are plain dicts produced by the CLI commands. Rendering never
mutates them; plotting reads back the series files referenced by the
report's config, so a report stays a small self-contained document.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CerealiaError, RangeError
from .ingest import CsvFormat, parse_csv
from .model import AttributeSchema


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.6g" % value
    return str(value)


def _kv_lines(d: dict, indent: str = "  ") -> list[str]:
    out = []
    for key, value in d.items():
        if isinstance(value, dict):
            out.append("%s%s:" % (indent, key))
            out.extend(_kv_lines(value, indent + "  "))
        elif isinstance(value, list) and len(value) > 8:
            out.append("%s%s: [%d items]" % (indent, key, len(value)))
        else:
            out.append("%s%s: %s" % (indent, key, _fmt(value)))
    return out


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    sep = "  ".join("-" * w for w in widths)
    body = ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join([line, sep, *body])


def render_report(report: dict) -> str:
    kind = report.get("kind", "unknown")
    lines = ["report kind: %s" % kind]
    if kind == "evaluation":
        per_class = report.get("per_class", {})
        rows = [
            [name, "%.4f" % s["precision"], "%.4f" % s["recall"], "%.4f" % s["f1"], str(s["support"])]
            for name, s in per_class.items()
        ]
        lines.append(_table(["class", "precision", "recall", "f1", "support"], rows))
        lines.append("macro F1: %.4f   accuracy: %.4f   windows: %d"
                     % (report["macro_f1"], report["accuracy"], report["n_windows"]))
    elif kind == "fst-experiment":
        rows = []
        for name, m in report["conditions"].items():
            r2 = "%.4f" % m["r2"] if m["r2"] is not None else "undefined"
            rows.append([name, "%.4f" % m["mae"], "%.4f" % m["rmse"], r2])
        lines.append(_table(["condition", "MAE", "RMSE", "R2"], rows))
        lines.append(
            "test samples: %d   faulty windows: %d   flagged windows: %d"
            % (report["n_test_samples"], report["n_faulty_windows"], report["n_flagged_windows"])
        )
    elif kind == "bench":
        rows = [
            [
                str(r["n_instances"]),
                "%.3f" % (r["mean_latency_s"] * 1e3),
                "%.3f" % (r["p95_latency_s"] * 1e3),
                "%.2f" % (r["memory_delta_bytes_per_instance"] / 1e6),
                "yes" if r["identical_labels"] else "NO",
            ]
            for r in report["runs"]
        ]
        lines.append(_table(
            ["instances", "mean ms", "p95 ms", "mem MB/inst", "identical labels"], rows
        ))
    elif kind == "train":
        lines.extend(_kv_lines({k: report[k] for k in
                                ("epochs_run", "val_macro_f1", "per_class_f1", "model_out")
                                if k in report}))
    else:
        payload = {k: v for k, v in report.items() if k not in ("config", "timing")}
        lines.extend(_kv_lines(payload))
    return "\n".join(lines)


def _load_series(path: str, schema_dict: dict):
    schema = AttributeSchema.from_dict(schema_dict)
    return parse_csv(path, schema, CsvFormat()).series


def plot_report(report: dict, out_path: str) -> None:
    """Render the plot for a report kind that references series files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind = report.get("kind")
    if kind == "inject-series":
        original = _load_series(report["config"]["in_path"], report["schema"])
        faulted = _load_series(report["out"], report["schema"])
        attr = report["attribute"]
        start, end = report["window"]
        pad = max(48, (end - start) // 2)
        lo, hi = max(0, start - pad), min(len(original), end + pad)
        fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
        x = np.arange(lo, hi)
        axes[0].plot(x, original.column(attr)[lo:hi], lw=1.0, label="original")
        axes[0].set_ylabel(attr)
        axes[0].legend(loc="upper right")
        axes[1].plot(x, faulted.column(attr)[lo:hi], lw=1.0, color="firebrick",
                     label="with %s fault" % report["fault_class"])
        axes[1].axvspan(start, end, color="firebrick", alpha=0.12)
        axes[1].set_xlabel("sample index")
        axes[1].set_ylabel(attr)
        axes[1].legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(out_path, format="svg")
        plt.close(fig)
    elif kind == "impute-apply":
        corrupted = _load_series(report["config"]["in_path"], report["schema"])
        imputed = _load_series(report["out"], report["schema"])
        flags = np.zeros(len(corrupted), dtype=bool)
        flags[np.asarray(report["flag_indices"], dtype=int)] = True
        name = corrupted.schema.names[0]
        fig, ax = plt.subplots(figsize=(9, 4))
        x = np.arange(len(corrupted))
        ax.plot(x, corrupted.column(name), lw=0.8, alpha=0.6, label="observed")
        ax.plot(x, imputed.column(name), lw=1.2, label="after imputation")
        for block_start, block_end in _flag_blocks(flags):
            ax.axvspan(block_start, block_end, color="gray", alpha=0.15)
        ax.set_xlabel("sample index")
        ax.set_ylabel(name)
        ax.legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(out_path, format="svg")
        plt.close(fig)
    else:
        raise RangeError("no plot defined for report kind %r" % kind)


def _flag_blocks(flags: np.ndarray) -> list[tuple[int, int]]:
    blocks = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            blocks.append((start, i))
            start = None
    if start is not None:
        blocks.append((start, len(flags)))
    return blocks


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "kind" not in doc:
        raise CerealiaError("%s does not look like a report (no kind field)" % path)
    return doc


def strip_volatile(report: dict) -> dict:
    """Drop the fields that legitimately differ between identical runs."""
    return {k: v for k, v in report.items() if k not in ("timing", "created_at")}
