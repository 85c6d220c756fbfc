"""Figures rendered to PNG files next to the numerical outputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

PARAMS = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "axes.linewidth": 0.6,
    "figure.figsize": (6.0, 3.7),
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(PARAMS)
    return plt


def _save(plt, fig, path):
    path = Path(path).with_suffix(".png")
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def kernels(out_dir, tk, spectra=None):
    """First-order kernels, propagator and the composite kernels."""
    plt = _pyplot()
    out = []
    t = tk.grid.t
    fig, ax = plt.subplots(1, 2)
    ax[0].plot(t, tk.eta_minus.values, label="eta-")
    ax[0].plot(t, tk.eta_plus.values, label="eta+")
    ax[0].plot(t, tk.nu_minus.values, label="nu-")
    ax[0].plot(t, tk.nu_plus.values, label="nu+")
    ax[0].set_xlim(0, min(t[-1], 5.0))
    ax[0].set_xlabel("lag")
    ax[0].legend()
    ax[1].plot(t, tk.propagator.G.values)
    ax[1].set_xlabel("t")
    ax[1].set_ylabel("G(t)")
    out.append(_save(plt, fig, Path(out_dir) / "first_order"))
    if tk.mode == "finite":
        fig, ax = plt.subplots(1, 2)
        ext = [0, t[-1], t[-1], 0]
        for a, k, name in ((ax[0], tk.eta2, "eta2(t1, t2)"), (ax[1], tk.nu2, "nu2(t1, t2)")):
            im = a.imshow(k.values, extent=ext, cmap="RdBu_r", vmin=-np.abs(k.values).max(),
                          vmax=np.abs(k.values).max())
            a.set_title(name)
            a.set_xlabel("t2")
            a.set_ylabel("t1")
            fig.colorbar(im, ax=a, shrink=0.7)
        out.append(_save(plt, fig, Path(out_dir) / "composite_kernels"))
    if spectra is not None:
        w = spectra.G.omega
        band = np.abs(w) <= 5.0
        fig, ax = plt.subplots(1, 2)
        ax[0].plot(w[band], spectra.nu_gg.real[band])
        ax[0].set_xlabel("omega")
        ax[0].set_ylabel("nu_GG(omega)")
        ax[1].plot(w[band], spectra.eta2.imag[band], label="Im eta2")
        ax[1].plot(w[band], spectra.nu2.real[band], label="nu2")
        ax[1].set_xlabel("omega")
        ax[1].legend()
        out.append(_save(plt, fig, Path(out_dir) / "spectra"))
    return out


def fdr(out_dir, reports):
    plt = _pyplot()
    fig, ax = plt.subplots()
    names = [r.identity for _, r in reports]
    vals = [max(r.max_residual, 1e-18) for _, r in reports]
    ax.barh(range(len(vals)), vals)
    ax.set_xscale("log")
    ax.set_yticks(range(len(vals)), names)
    ax.set_xlabel("max relative residual")
    return [_save(plt, fig, Path(out_dir) / "fdr_residuals")]


def trajectory(out_dir, traj, mdf):
    plt = _pyplot()
    fig, ax = plt.subplots(2, 1, sharex=True)
    ax[0].plot(traj.grid.t, traj.X)
    ax[0].set_ylabel("X")
    ax[1].plot(traj.grid.t, traj.energy(mdf))
    ax[1].set_ylabel("energy")
    ax[1].set_xlabel("t")
    return [_save(plt, fig, Path(out_dir) / "mean_trajectory")]


def ensemble(out_dir, res, mean=None):
    plt = _pyplot()
    t = res.grid.t
    fig, ax = plt.subplots(2, 1, sharex=True)
    ax[0].fill_between(t, res.mean_X - 2 * res.se_mean_X, res.mean_X + 2 * res.se_mean_X, alpha=0.3, lw=0)
    ax[0].plot(t, res.mean_X, label="ensemble mean")
    if mean is not None:
        ax[0].plot(t, mean.X, "--", label="deterministic")
    ax[0].legend()
    ax[0].set_ylabel("X")
    ax[1].plot(t, res.var_X)
    ax[1].set_ylabel("Var X")
    ax[1].set_xlabel("t")
    return [_save(plt, fig, Path(out_dir) / "ensemble")]
