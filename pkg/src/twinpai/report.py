"""Bench report output: versioned JSON, a flat CSV and a PNG chart."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import SCHEMA, BenchReport  # noqa: E402

CSV_FIELDS = (
    "protocol",
    "iterations",
    "n_len",
    "l",
    "median_ms",
    "mean_ms",
    "ciphertexts",
    "expected_ciphertexts",
    "payload_bytes",
    "payload_kib",
    "bandwidth_mbps",
    "modeled_transfer_ms",
)


def report_document(reports: list[BenchReport]) -> dict:
    return {"schema": SCHEMA, "results": [r.as_dict() for r in reports]}


def write_json(reports: list[BenchReport], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report_document(reports), indent=2) + "\n")
    return path


def write_csv(reports: list[BenchReport], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for r in reports:
            writer.writerow(r.as_dict())
    return path


def plot(reports: list[BenchReport], path: str | Path) -> Path:
    """Median time and payload per protocol, side by side."""
    path = Path(path)
    names = [f"{r.protocol}\n(l={r.l})" for r in reports]
    fig, (ax_t, ax_b) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax_t.bar(names, [r.median_ms for r in reports], color="tab:blue", label="computation")
    modeled = [r.modeled_transfer_ms for r in reports]
    if all(m is not None for m in modeled):
        ax_t.bar(
            names, modeled, bottom=[r.median_ms for r in reports], color="tab:orange",
            label=f"transfer @ {reports[0].bandwidth_mbps:g} Mbps",
        )
        ax_t.legend(fontsize=8)
    ax_t.set_ylabel("median ms per run")
    ax_b.bar(names, [r.payload_kib for r in reports], color="tab:green")
    ax_b.set_ylabel("ciphertext payload (KiB)")
    for i, r in enumerate(reports):
        ax_b.annotate(f"{r.payload_kib:.3f}", (i, r.payload_kib), ha="center", va="bottom", fontsize=8)
    n_lens = sorted({r.n_len for r in reports})
    fig.suptitle(f"n_len={'/'.join(map(str, n_lens))}, in-memory channel")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_all(reports: list[BenchReport], json_path: str | Path) -> dict[str, Path]:
    """JSON at ``json_path``; CSV and PNG next to it with the same stem."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    return {
        "json": write_json(reports, json_path),
        "csv": write_csv(reports, json_path.with_suffix(".csv")),
        "png": plot(reports, json_path.with_suffix(".png")),
    }


def format_table(reports: list[BenchReport]) -> str:
    header = f"{'protocol':<8} {'l':>3} {'iters':>6} {'median ms':>10} {'mean ms':>10} {'cts':>5} {'KiB':>8}"
    lines = [header]
    for r in reports:
        line = (
            f"{r.protocol:<8} {r.l:>3} {r.iterations:>6} {r.median_ms:>10.3f} "
            f"{r.mean_ms:>10.3f} {r.ciphertexts:>5} {r.payload_kib:>8.3f}"
        )
        if r.modeled_transfer_ms is not None:
            line += f"  +{r.modeled_transfer_ms:.3f} ms @ {r.bandwidth_mbps:g} Mbps"
        lines.append(line)
    return "\n".join(lines)
