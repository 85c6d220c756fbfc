"""Assembly of kernels, spectra and identity checks from a run configuration."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import composite, idf as idf_mod, langevin
from .baths import bath_spectra, check_bath_fdr, eta_kernel, hat_kernel, nu_kernel
from .errors import InstabilityError, MemoryBudgetError, StepSizeError
from .idf import MAX_CUTOFF_DT
from .numerics import FdrReport, Kernel1D, Spectrum, TimeGrid, residual_report

MAX_LONG_STEPS = 400_000
# |G|^2 must fall below this before the stationary autocorrelation is cut
STATIONARY_DECAY = 1e-8


class Timer:
    """Accumulates wall-clock time per named stage."""

    def __init__(self):
        self.stages = {}

    def __call__(self, name):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = timer.stages.get(name, 0.0) + time.perf_counter() - self.t0

        return _Stage()


def _check_plus_grid(cfg, grid):
    bp = cfg.bath_plus
    if not bp.is_zero and math.isfinite(bp.cutoff) and bp.cutoff * grid.dt > MAX_CUTOFF_DT:
        raise StepSizeError(f"dt={grid.dt:g} does not resolve the (+) bath cutoff {bp.cutoff:g}",
                            recommended_dt=0.5 / bp.cutoff)


@dataclass(frozen=True, eq=False)
class TimeKernels:
    """First-order kernels, propagator and second-order kernels on the run grid."""

    grid: TimeGrid
    eta_minus: Kernel1D
    eta_plus: Kernel1D
    nu_minus: Kernel1D
    nu_plus: Kernel1D
    propagator: idf_mod.DressedPropagator
    nu_gg: object
    qh_corr: object
    eta2: object
    nu2: object
    mode: str
    memory: object = None
    meta: dict = field(default_factory=dict)


def first_order(cfg, grid=None):
    grid = grid or cfg.grid
    _check_plus_grid(cfg, grid)
    prop = idf_mod.green_time(cfg.idf, cfg.bath_minus, grid, cfg.freq_grid)
    return (prop, eta_kernel(cfg.bath_minus, grid), eta_kernel(cfg.bath_plus, grid),
            nu_kernel(cfg.bath_minus, grid, cfg.T_F), nu_kernel(cfg.bath_plus, grid, cfg.T_F))


def stationary_nu_gg(cfg, prop):
    """Late-time ``nu_GG(tau)`` on the run grid from a long propagator solve."""
    grid = cfg.grid
    if cfg.bath_minus.is_zero or prop.decay_rate <= 0:
        raise InstabilityError("the internal oscillator does not relax; no stationary limit exists")
    t_decay = 0.5 * math.log(1 / STATIONARY_DECAY) / prop.decay_rate
    half = max(grid.n_steps, int(math.ceil(t_decay / grid.dt)))
    if 2 * half > MAX_LONG_STEPS:
        raise MemoryBudgetError(2 * half, MAX_LONG_STEPS)
    long = TimeGrid(2 * half * grid.dt, 2 * half)
    prop_long = idf_mod.green_time(cfg.idf, cfg.bath_minus, long, cfg.freq_grid)
    ngg = idf_mod.nu_gg_stationary(prop_long.G, nu_kernel(cfg.bath_minus, long, cfg.T_F))
    return Kernel1D(grid, ngg.values[: grid.n_points], "even"), long


def _hats(cfg):
    return (hat_kernel(cfg.bath_plus, cfg.grid, "eta"),
            hat_kernel(cfg.bath_plus, cfg.grid, "nu", cfg.T_F))


def time_kernels(cfg, mode=None, timer=None) -> TimeKernels:
    """Kernels on the run grid in ``finite`` (two-time) or ``late`` (lag) mode.

    ``memory`` holds the product-integration weights that the equation of
    motion uses in place of the sampled ``eta2``.

    Raises
    ------
    MemoryBudgetError
        If finite-time kernels would exceed the dense budget.
    """
    timer = timer or Timer()
    mode = mode or cfg.kernel_mode
    grid = cfg.grid
    if mode == "finite" and grid.n_steps > cfg.max_dense_steps:
        raise MemoryBudgetError(grid.n_steps, cfg.max_dense_steps)
    with timer("first_order"):
        prop, em, ep, nm, npl = first_order(cfg)
    meta = {"mode": mode}
    if mode == "finite":
        with timer("nu_gg"):
            ngg = idf_mod.nu_gg_finite(prop, nm, max_steps=cfg.max_dense_steps)
            qq = idf_mod.initial_correlator(cfg.idf, cfg.T_I, prop.u, prop.v)
        with timer("composite"):
            e2 = composite.eta2_time(ep, npl, ngg, qq, prop.g)
            n2 = composite.nu2_time(ep, npl, ngg, qq, prop.g)
            mem = composite.eta2_weights(*_hats(cfg), ngg, qq, prop.g)
    else:
        with timer("nu_gg"):
            ngg, long = stationary_nu_gg(cfg, prop)
            qq = None
            meta["stationary_grid"] = {"t_max": long.t_max, "n_steps": long.n_steps}
        with timer("composite"):
            e2 = composite.eta2_late(ep, npl, ngg, prop.G)
            n2 = composite.nu2_late(ep, npl, ngg, prop.G)
            mem = composite.eta2_late_weights(*_hats(cfg), ngg, prop.G)
    meta["memory_quadrature"] = "product trapezoid (hat-averaged (+) kernels)"
    return TimeKernels(grid, em, ep, nm, npl, prop, ngg, qq, e2, n2, mode, mem, meta)


@dataclass(frozen=True, eq=False)
class FreqKernels:
    """Spectra of the first-order kernels, the propagator and the late-time composite kernels."""

    eta_minus: Spectrum
    nu_minus: Spectrum
    eta_plus: Spectrum
    nu_plus: Spectrum
    G: Spectrum
    nu_gg: Spectrum
    eta2: Spectrum
    nu2: Spectrum


def freq_kernels(cfg, timer=None) -> FreqKernels:
    timer = timer or Timer()
    fg = cfg.freq_grid
    with timer("spectra"):
        idf_mod.stiffness_guard(cfg.idf, cfg.bath_minus)
        em, nm = bath_spectra(cfg.bath_minus, fg, cfg.T_F)
        ep, npl = bath_spectra(cfg.bath_plus, fg, cfg.T_F)
        G = idf_mod.green_spectrum(cfg.idf, cfg.bath_minus, fg)
        ngg, _ = idf_mod.nu_gg_freq(G, nm, cfg.T_F)
        e2, n2 = composite.kernels_late_freq(G, ep, npl, ngg)
    return FreqKernels(em, nm, ep, npl, G, ngg, e2, n2)


def mdf_stiffness(cfg, spectra: FreqKernels) -> float:
    """``M W^2 + 2 Re eta2(0)``; the center of mass is unstable when it is not positive."""
    k = cfg.mdf.mass * cfg.mdf.frequency**2 + 2 * spectra.eta2.values[cfg.freq_grid.zero_index].real
    if k <= 0:
        raise InstabilityError(
            f"center-of-mass static stiffness M W^2 + 2 Re eta2(0) = {k:.4g} <= 0; "
            "reduce the (+) coupling or raise the MDF frequency"
        )
    return float(k)


def _rows(cfg):
    fg = cfg.freq_grid
    half = min(cfg.bath_plus.cutoff if math.isfinite(cfg.bath_plus.cutoff) else 10.0, fg.omega_max / 4) / 2
    rows = np.linspace(-half, half, 21)
    return np.round(rows / fg.d_omega) * fg.d_omega


def fdr_reports(cfg, spectra: FreqKernels = None, timer=None):
    """Residuals of every fluctuation-dissipation identity for the run.

    Returns
    -------
    list of (key, FdrReport) pairs; the key selects the threshold.
    """
    timer = timer or Timer()
    spectra = spectra or freq_kernels(cfg, timer)
    fg, T = cfg.freq_grid, cfg.T_F
    out = []
    with timer("fdr"):
        for bath in (cfg.bath_minus, cfg.bath_plus):
            cut = bath.cutoff if math.isfinite(bath.cutoff) else fg.omega_max
            rep = check_bath_fdr(bath, fg, T, omega_max=cut)
            out.append(("bath_fdr", rep))
        out.append(("idf_fdr", idf_mod.check_idf_fdr(spectra.G, spectra.nu_minus, T)))
        rows = _rows(cfg)
        d2, n2 = composite.two_freq_kernels(spectra.G, spectra.eta_plus, spectra.nu_plus, spectra.nu_gg, rows)
        if cfg.fault_scale != 1.0:
            n2 = composite.TwoFreqKernel(n2.grid, n2.omega, n2.values * cfg.fault_scale, n2.kind,
                                         n2.in_range, dict(n2.meta, fault_scale=cfg.fault_scale))
        gen = composite.check_generalized_fdr(d2, n2, T)
        n53, ok = composite.n2_from_fdr(spectra.G, spectra.eta_plus, rows, T)
        top = np.max(np.abs(n2.values[ok])) if np.any(ok) else 1.0
        for pref in (1.0, 0.5):
            diff = np.abs(pref * n53[ok] - n2.values[ok]).max() / top if np.any(ok) else 0.0
            gen.details[f"closed_form_prefactor_{pref:g}_residual"] = float(diff)
        out.append(("generalized_fdr", gen))
        forms = composite.integral_forms(d2, n2, T)
        idx = fg.index_of(rows)
        for key, ref in (("im_eta2", spectra.eta2.imag[idx]), ("nu2", spectra.nu2.real[idx])):
            rep = residual_report(f"integral form of {key}", ref, forms[key], None, "max",
                                            {"temperature": T})
            out.append(("integral_forms", rep))
        band = np.abs(fg.omega) <= min(fg.omega_max / 2, 10 * cfg.idf.frequency)
        cmp = composite.im_eta2_compact(spectra.G, spectra.eta_plus, T)
        ref = spectra.eta2.imag[band]
        l2 = float(np.linalg.norm(cmp.real[band] - ref) / max(np.linalg.norm(ref), 1e-300))
        out.append(("compact_form", FdrReport("compact dissipation form (relative L2)", l2, l2,
                                                        int(band.sum()), {"temperature": T})))
    return out


def _memory(kernels):
    return kernels.memory if kernels.memory is not None else kernels.eta2


def mean_path(cfg, kernels: TimeKernels):
    return langevin.solve_mean(cfg.mdf, _memory(kernels), cfg.grid, cfg.X0, cfg.V0)


def ensemble(cfg, kernels: TimeKernels, keep_paths=False):
    return langevin.solve_ensemble(cfg.mdf, _memory(kernels), kernels.nu2, cfg.grid, cfg.seed, cfg.n_traj,
                                   cfg.X0, cfg.V0, keep_paths=keep_paths)
