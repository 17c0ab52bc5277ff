"""Figure rendering for the reporting commands.

Every function writes a PNG next to the delimited output and returns the
path.  The Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_RC = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.frameon": False,
}


def save_spectrum_figure(eigenvalues, profiles: dict, path) -> str:
    """Energy-by-frequency panels for one or more signal families.

    profiles maps a legend label to a length-k mean energy vector.
    Left panel: per-frequency energy (log scale); right: cumulative.
    """
    lam = np.asarray(eigenvalues)
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
        idx = np.arange(lam.size)
        for label, energy in profiles.items():
            e = np.asarray(energy)
            ax1.plot(idx, np.maximum(e, 1e-12), label=label, lw=1.2)
            ax2.plot(idx, np.cumsum(e), label=label, lw=1.2)
        ax1.set_yscale("log")
        ax1.set_xlabel("frequency index")
        ax1.set_ylabel("mean energy")
        ax2.set_xlabel("frequency index")
        ax2.set_ylabel("cumulative energy")
        ax2.set_ylim(0, 1.02)
        ax1.legend()
        fig.suptitle("spectral energy profile")
        fig.savefig(path)
        plt.close(fig)
    return str(path)


def save_mse_bound_figure(rows, path) -> str:
    """Empirical MSE vs analytic bound across the (rho, phi) grid."""
    phis = sorted({r.phi for r in rows})
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(phis), figsize=(3.2 * len(phis), 3.2), sharey=True)
        if len(phis) == 1:
            axes = [axes]
        for ax, phi in zip(axes, phis):
            sub = sorted((r for r in rows if r.phi == phi), key=lambda r: r.rho)
            rho = [r.rho for r in sub]
            ax.plot(rho, [max(r.empirical, 1e-12) for r in sub], "o-", label="empirical", lw=1.2)
            ax.plot(rho, [max(r.bound, 1e-12) for r in sub], "s--", label="bound", lw=1.2)
            ax.set_yscale("log")
            ax.set_title(f"phi = {phi:g}")
            ax.set_xlabel("flip rate")
        axes[0].set_ylabel("expected MSE")
        axes[0].legend()
        fig.suptitle(f"noise robustness check ({rows[0].family})" if rows else "noise robustness check")
        fig.savefig(path)
        plt.close(fig)
    return str(path)


def save_interpolation_figure(report, path) -> str:
    """Interpolation error vs the analytic decay across the k ladder."""
    ks = [r.k for r in report.rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        ax.plot(ks, [max(r.error, 1e-16) for r in report.rows], "o-", label="error", lw=1.2)
        ax.plot(ks, [max(r.bound, 1e-16) for r in report.rows], "s--", label="bound", lw=1.2)
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("penalty power k")
        ax.set_ylabel("l2 error")
        ax.set_title(f"contraction = {report.contraction:.3f}")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return str(path)
