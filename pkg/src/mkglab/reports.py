"""Report emission: delimited artifacts with embedded configuration headers,
plus rendered figures next to each delimited file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def config_header_lines(config: dict) -> list[str]:
    """The resolved configuration as sorted key=value lines."""
    return [f"{k} = {config[k]}" for k in sorted(config)]


def write_json_report(path, payload: dict, config: dict) -> None:
    data = {"config": {k: config[k] for k in sorted(config)}, **payload}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, default=float)
        fh.write("\n")


def render_trajectory(traj, path) -> None:
    """Time-series panels for the evolution diagnostics."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    t = traj.times
    panels = [
        (traj.hamiltonians, "energy"),
        (traj.div_a_rel, "relative div A"),
        (traj.bracket, f"bracket norm (s={traj.bracket_s:g})"),
        (traj.mass, "L2 mass of phi"),
    ]
    for ax, (series, label) in zip(axes.ravel(), panels):
        ax.plot(t, series, lw=1.0)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_drift(report, path) -> None:
    """Log-log drift against threshold with the fitted slope."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    N = report.N
    drift = report.sup_drift
    ax.loglog(N, drift, "o-", label="sup drift")
    if np.isfinite(report.slope_fit) and len(N) >= 2 and min(drift) > 0:
        ref = drift[0] * (np.asarray(N) / N[0]) ** report.slope_fit
        ax.loglog(N, ref, "--", label=f"slope {report.slope_fit:.2f}")
    if report.noise_floor > 0:
        ax.axhline(report.noise_floor, color="gray", ls=":", label="integrator noise")
    ax.set_xlabel("threshold N")
    ax.set_ylabel("sup |H[I fields](t) - H[I fields](0)|")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_estimates(reports: dict, path) -> None:
    """Bar chart of the measured constants, one bar per estimate."""
    names, values = [], []
    for key, rep in reports.items():
        names.append(key)
        values.append(rep.max_ratio if hasattr(rep, "max_ratio") else float(rep))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(names)), 4.5))
    ax.bar(range(len(names)), values)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("max ratio")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_nosmoothing(results, eps, path) -> None:
    """Integral versus N with the eps^3 reference level."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    Ns = [r.N for r in results]
    vals = [r.value for r in results]
    errs = [r.stderr for r in results]
    ax.errorbar(Ns, vals, yerr=errs, fmt="o-", label="integral")
    ax.axhline(eps**3, color="red", ls="--", label="eps^3")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("integral value")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)



def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
