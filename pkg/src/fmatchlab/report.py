"""Figure rendering for the report path: PNGs next to the delimited output.

Consumes the CSVs written by `fmatchlab simulate` / `fmatchlab analyze` and
renders outage curves (log-scale vs SNR in dB), DMT polylines, and saddle
bound tables.  Purely a presentation layer; nothing here feeds back into the
library.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_STYLE = {
    "monte_carlo": dict(marker="o", linestyle="-"),
    "mc_censored": dict(marker="v", linestyle="none"),
    "formula_high": dict(marker="", linestyle="--"),
    "formula_low": dict(marker="", linestyle="-."),
    "bound": dict(marker="", linestyle="--"),
    "asymptote": dict(marker="", linestyle=":"),
}


def _read_rows(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


def render_results(results_csv: Path, out_dir: Path) -> list[Path]:
    """Outage probability vs SNR, one figure per user, all schemes overlaid."""
    rows = _read_rows(results_csv)
    users = sorted({r["user"] for r in rows})
    written = []
    for user in users:
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        series = defaultdict(list)
        for r in rows:
            if r["user"] != user or not r["p_out"]:
                continue
            series[(r["scheme"], r["source"])].append((float(r["gamma_db"]), float(r["p_out"])))
        for (scheme, source), pts in sorted(series.items()):
            pts.sort()
            xs = [p[0] for p in pts]
            ys = [max(p[1], 1e-12) for p in pts]
            style = _STYLE.get(source, {})
            ax.semilogy(xs, ys, label=f"{scheme} ({source})", markersize=4, **style)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("outage probability")
        ax.set_title(f"user {user}")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=7)
        path = out_dir / f"outage_user{user}.png"
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def render_dmt(dmt_csv: Path, out_dir: Path) -> list[Path]:
    """Diversity vs multiplexing polylines per scheme (user 0 shown)."""
    rows = _read_rows(dmt_csv)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    series = defaultdict(list)
    for r in rows:
        if r["user"] == "0":
            series[r["scheme"]].append((float(r["r"]), float(r["d"])))
    for scheme, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=scheme)
    ax.set_xlabel("multiplexing gain r")
    ax.set_ylabel("diversity gain d(r)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    path = out_dir / "dmt.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_saddle(saddle_csv: Path, out_dir: Path) -> list[Path]:
    """Saddle-point bound vs SNR."""
    rows = _read_rows(saddle_csv)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    xs = [float(r["gamma_db"]) for r in rows]
    ys = [max(float(r["bound"]), 1e-12) for r in rows]
    ax.semilogy(xs, ys, "--", label="saddle upper bound")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("conditional outage bound")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    path = out_dir / "saddle_bound.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_analysis(analysis_dir: Path, out_dir: Path) -> list[Path]:
    written = []
    dmt = analysis_dir / "dmt.csv"
    if dmt.exists():
        written += render_dmt(dmt, out_dir)
    saddle = analysis_dir / "saddle.csv"
    if saddle.exists():
        written += render_saddle(saddle, out_dir)
    return written


def render_directory(src: Path, out_dir: Path) -> list[Path]:
    """Render everything recognizable in a results directory (or single CSV)."""
    written = []
    if src.is_file():
        if src.name == "dmt.csv":
            return render_dmt(src, out_dir)
        if src.name == "saddle.csv":
            return render_saddle(src, out_dir)
        return render_results(src, out_dir)
    results = src / "results.csv"
    if results.exists():
        written += render_results(results, out_dir)
    formulas = src / "formulas.csv"
    if formulas.exists():
        written += render_results(formulas, out_dir) if not results.exists() else []
    written += render_analysis(src, out_dir)
    return written
