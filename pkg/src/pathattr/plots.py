"""Static SVG renderings of the run artifacts."""

from __future__ import annotations

import sys
from pathlib import Path as FsPath

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .fileio import read_csv, read_profile, read_schedule
from .harness import read_profile_matrix

_KIND_STYLE = {"uniform": ("tab:blue", "o"), "riemannopt": ("tab:orange", "s")}


def emit_plots(out_dir, verbose: bool = False) -> list[FsPath]:
    """Render every plot the artifacts in out_dir support; list what was written."""
    out_dir = FsPath(out_dir)
    results_path = out_dir / "results.csv"
    if not results_path.exists():
        print(f"plot: no results at {results_path}, nothing to do", file=sys.stderr)
        return []
    header, raw_rows = read_csv(results_path)
    if not raw_rows:
        print("plot: results table is empty, nothing to do", file=sys.stderr)
        return []
    col = {name: i for i, name in enumerate(header)}
    rows = [
        {
            "method": r[col["method"]],
            "kind": r[col["schedule_kind"]],
            "k": int(r[col["k"]]),
            "err": float(r[col["mean_completeness_error"]]),
            "ins": float(r[col["mean_insertion_score"]]),
        }
        for r in raw_rows
    ]
    methods = sorted({r["method"] for r in rows})
    ks = sorted({r["k"] for r in rows})
    written: list[FsPath] = []

    for method in methods:
        written += _profile_with_ticks(out_dir, method, min(ks))
        written += _per_image_overlay(out_dir, method)
    written.append(_metric_vs_k(out_dir, rows, methods, ks, "err",
                                "mean completeness error", "error_vs_k.svg", log=True))
    written.append(_metric_vs_k(out_dir, rows, methods, ks, "ins",
                                "mean insertion score", "insertion_vs_k.svg", log=False))
    if verbose:
        for path in written:
            print(f"plot: wrote {path}", file=sys.stderr)
    return written


def _profile_with_ticks(out_dir: FsPath, method: str, k: int) -> list[FsPath]:
    profile_path = out_dir / f"profile_{method}.txt"
    schedule_file = out_dir / f"schedule_{method}_k{k}.txt"
    if not profile_path.exists() or not schedule_file.exists():
        return []
    profile = read_profile(profile_path)
    optimized = read_schedule(schedule_file)
    uniform = [j / k for j in range(k)]

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(profile.knots, profile.magnitudes, color="black", lw=1.5,
            label="derivative magnitude profile")
    top = max(float(profile.magnitudes.max()), 1e-12)
    ax.plot(uniform, [-0.06 * top] * k, "|", color=_KIND_STYLE["uniform"][0],
            markersize=10, label=f"uniform ({k})")
    ax.plot(optimized.points, [-0.12 * top] * k, "|",
            color=_KIND_STYLE["riemannopt"][0], markersize=10,
            label=f"optimized ({k})")
    ax.set_xlabel("path parameter t")
    ax.set_ylabel("|dg/dt| estimate")
    ax.set_title(f"{method}: profile and sample placement")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    target = out_dir / f"profile_{method}.svg"
    fig.savefig(target)
    plt.close(fig)
    return [target]


def _per_image_overlay(out_dir: FsPath, method: str) -> list[FsPath]:
    matrix_path = out_dir / f"profiles_per_image_{method}.txt"
    profile_path = out_dir / f"profile_{method}.txt"
    if not matrix_path.exists() or not profile_path.exists():
        return []
    knots, per_image = read_profile_matrix(matrix_path)
    profile = read_profile(profile_path)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for row in per_image:
        ax.plot(knots, row, color="gray", alpha=0.25, lw=0.7)
    ax.plot(profile.knots, profile.magnitudes, color="crimson", lw=2.0,
            label="calibration average")
    ax.set_xlabel("path parameter t")
    ax.set_ylabel("|dg/dt| estimate")
    ax.set_title(f"{method}: per-image profiles over the dataset profile")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    target = out_dir / f"profile_overlay_{method}.svg"
    fig.savefig(target)
    plt.close(fig)
    return [target]


def _metric_vs_k(out_dir: FsPath, rows, methods, ks, key: str,
                 label: str, filename: str, log: bool) -> FsPath:
    fig, axes = plt.subplots(1, len(methods), figsize=(4 * len(methods), 3.2),
                             sharey=True, squeeze=False)
    for ax, method in zip(axes[0], methods):
        for kind, (color, marker) in _KIND_STYLE.items():
            series = {r["k"]: r[key] for r in rows
                      if r["method"] == method and r["kind"] == kind}
            xs = [k for k in ks if k in series]
            ax.plot(xs, [series[k] for k in xs], color=color, marker=marker,
                    label=kind)
        ax.set_title(method)
        ax.set_xlabel("samples k")
        ax.set_xscale("log", base=2)
        if log:
            ax.set_yscale("log")
        ax.legend(fontsize=8)
    axes[0][0].set_ylabel(label)
    fig.tight_layout()
    target = out_dir / filename
    fig.savefig(target)
    plt.close(fig)
    return target
