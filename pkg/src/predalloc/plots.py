"""Figure rendering for the experiment reports.

Each experiment's CSV gets a companion PNG next to it. Rendering is
file-only (Agg backend); nothing opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METHOD_STYLE = {
    "UB": dict(color="tab:green", marker="o"),
    "A_d=0": dict(color="tab:blue", marker="s"),
    "A_d=5": dict(color="tab:cyan", marker="^"),
    "A_d=10": dict(color="tab:purple", marker="v"),
    "SE": dict(color="tab:red", marker="x"),
    "EE": dict(color="tab:orange", marker="d"),
}


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pdf_validation(rows: list[dict], ks_true: float, ks_est: float, path: str) -> None:
    centers = np.array([0.5 * (r["bin_left"] + r["bin_right"]) for r in rows])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    width = rows[0]["bin_right"] - rows[0]["bin_left"]
    ax.bar(
        centers,
        [r["empirical_density"] for r in rows],
        width=width,
        alpha=0.35,
        color="gray",
        label="simulated",
    )
    ax.plot(centers, [r["pdf_true"] for r in rows], "b-", label=f"mixture (KS={ks_true:.3f})")
    ax.plot(
        centers,
        [r["pdf_estimated"] for r in rows],
        "r--",
        label=f"mixture, est. trajectory (KS={ks_est:.3f})",
    )
    ax.set_xlabel("equivalent channel gain")
    ax.set_ylabel("density")
    ax.legend()
    _save(fig, path)


def plot_param_stats(rows: list[dict], path: str) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    ts_values = sorted({r["slots_per_frame"] for r in rows})
    for ts in ts_values:
        sub = [r for r in rows if r["slots_per_frame"] == ts]
        kappa = [r["kappa"] for r in sub]
        axes[0].plot(kappa, [r["sim_gth_mean"] for r in sub], "o", ms=3, label=f"sim Ts={ts}")
        axes[1].plot(kappa, [r["sim_nu_mean"] for r in sub], "o", ms=3, label=f"sim Ts={ts}")
    sub = [r for r in rows if r["slots_per_frame"] == ts_values[0]]
    kappa = [r["kappa"] for r in sub]
    axes[0].plot(kappa, [r["mu_gth"] for r in sub], "k-", label="analytic mean")
    axes[1].plot(kappa, [r["mu_nu"] for r in sub], "k-", label="analytic mean")
    axes[0].set_xlabel("active ratio")
    axes[0].set_ylabel("threshold")
    axes[1].set_xlabel("active ratio")
    axes[1].set_ylabel("water-filling level")
    axes[1].set_yscale("log")
    for ax in axes:
        ax.legend(fontsize=8)
    _save(fig, path)


def plot_kappa_sweep(rows: list[dict], path: str) -> None:
    kappa = [r["kappa"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    axes[0].plot(kappa, [r["mu_omega"] for r in rows], "k-", label="analytic")
    axes[0].plot(kappa, [r["simulated_omega_mean"] for r in rows], "ro", ms=3, label="simulated")
    axes[0].set_ylabel("total power per slot [W]")
    axes[1].plot(kappa, [r["mu_psi_p"] for r in rows], "k-", label="analytic")
    axes[1].plot(kappa, [r["simulated_psi_mean"] for r in rows], "ro", ms=3, label="simulated")
    axes[1].set_ylabel("transmit power per slot [W]")
    axes[1].set_yscale("log")
    for ax in axes:
        ax.set_xlabel("active ratio")
        ax.legend(fontsize=8)
    finite = [r["mu_omega"] for r in rows if np.isfinite(r["mu_omega"])]
    if finite:
        axes[0].set_ylim(0.0, 1.1 * np.percentile(finite, 90))
    _save(fig, path)


def plot_table1(rows: list[dict], path: str) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    for ts in sorted({r["slots_per_frame"] for r in rows}):
        sub = [r for r in rows if r["slots_per_frame"] == ts]
        axes[0].hist(
            [100.0 * r["rel_dev_nu"] for r in sub], bins=30, alpha=0.5, label=f"Ts={ts}"
        )
        axes[1].hist(
            [100.0 * r["rel_dev_gth"] for r in sub], bins=30, alpha=0.5, label=f"Ts={ts}"
        )
    axes[0].set_xlabel("water-level deviation [%]")
    axes[1].set_xlabel("threshold deviation [%]")
    for ax in axes:
        ax.set_ylabel("trials")
        ax.legend()
    _save(fig, path)


def plot_energy_compare(agg_rows: list[dict], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    methods = sorted({r["method"] for r in agg_rows}, key=lambda m: list(_METHOD_STYLE).index(m))
    for method in methods:
        sub = sorted(
            (r for r in agg_rows if r["method"] == method), key=lambda r: r["deadline_frames"]
        )
        ax.plot(
            [r["deadline_frames"] for r in sub],
            [r["mean_energy_j"] for r in sub],
            label=method,
            **_METHOD_STYLE[method],
        )
    ax.set_xlabel("deadline [frames]")
    ax.set_ylabel("mean energy [J]")
    ax.set_yscale("log")
    ax.legend()
    _save(fig, path)
