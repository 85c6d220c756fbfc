"""Internal oscillator dressed by the linearly coupled bath.

The internal degree of freedom (mass ``m``, frequency ``w0``) obeys

    m (Q'' + w0^2 Q) + 2 int_0^t eta(t - s) Q(s) ds = noise

whose retarded propagator in frequency space is

    G(w) = 1 / (m w0^2 - m w^2 + 2 eta(w)).

This module provides ``G`` in both representations, the homogeneous
solutions with thermal Wigner initial statistics, and the dressed noise
correlation ``nu_GG = G * nu * G`` at finite times and in the stationary
limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import volterra
from .baths import BathSpec, eta_bath_freq, eta_kernel
from .errors import InstabilityError, MemoryBudgetError, PoleError, StepSizeError
from .numerics import (
    FreqGrid,
    Kernel1D,
    Kernel2D,
    Spectrum,
    TimeGrid,
    check_same_grid,
    coth_thermal,
    residual_report,
)

MAX_DENSE_STEPS = 4096
MAX_CUTOFF_DT = 2.0


@dataclass(frozen=True)
class OscillatorSpec:
    """Harmonic oscillator of given mass and bare frequency."""

    mass: float
    frequency: float

    def __post_init__(self):
        if not (self.mass > 0 and self.frequency > 0):
            raise ValueError("oscillator mass and frequency must be > 0")


def green_freq(idf: OscillatorSpec, bath_minus: BathSpec, omega):
    """Retarded propagator ``G(w) = 1 / (m w0^2 - m w^2 + 2 eta(w))``.

    Raises
    ------
    PoleError
        If the denominator vanishes (undamped resonance).
    """
    w = np.asarray(omega, dtype=float)
    m, w0 = idf.mass, idf.frequency
    den = m * (w0 * w0 - w * w) + 2 * eta_bath_freq(bath_minus, w)
    if np.any(np.abs(den) <= 1e-14 * m * w0 * w0):
        raise PoleError("propagator pole on the real axis; use coupling > 0 or evaluate off resonance")
    out = 1.0 / den
    return out if np.ndim(omega) else complex(out)


def renormalized_frequency(idf: OscillatorSpec, bath_minus: BathSpec, omega):
    """``w_R(w) = sqrt(w0^2 + 2 Re eta(w) / m)`` (frequency dependent)."""
    w = np.asarray(omega, dtype=float)
    w2 = idf.frequency**2 + 2 * eta_bath_freq(bath_minus, w).real / idf.mass
    if np.any(w2 <= 0):
        raise InstabilityError("renormalized frequency squared is not positive (overcritical coupling)")
    out = np.sqrt(w2)
    return out if np.ndim(omega) else float(out)


def static_stiffness(idf: OscillatorSpec, bath_minus: BathSpec) -> float:
    """``m w0^2 + 2 Re eta(0)``; the dressed oscillator is unstable if negative."""
    return float(idf.mass * idf.frequency**2 + 2 * eta_bath_freq(bath_minus, 0.0).real)


def pole_estimate(idf: OscillatorSpec, bath_minus: BathSpec, iterations=50):
    """Resonance ``w_R`` by fixed-point iteration and its damping rate.

    Returns ``(w_R, kappa)`` with ``kappa = -Im eta(w_R) / (m w_R)``, the
    amplitude decay rate of the weakly damped oscillation.
    """
    w = idf.frequency
    for _ in range(iterations):
        w_new = renormalized_frequency(idf, bath_minus, w)
        if abs(w_new - w) < 1e-14 * w:
            w = w_new
            break
        w = w_new
    kappa = -eta_bath_freq(bath_minus, w).imag / (idf.mass * w)
    return float(w), float(kappa)


@dataclass(frozen=True, eq=False)
class DressedPropagator:
    """Retarded propagator in time and frequency.

    ``G`` holds ``G(t)`` for ``t >= 0`` (causal); ``g`` is its odd extension
    ``g(t) = sign(t) G(|t|)``. ``G_bar`` may be ``None`` for an uncoupled
    oscillator, whose spectrum has real poles.
    """

    G: Kernel1D
    g: Kernel1D
    G_bar: Spectrum | None
    omega_R: float
    decay_rate: float
    static_stiffness: float
    u: Kernel1D
    v: Kernel1D
    meta: dict = field(default_factory=dict)

    @property
    def relaxation_time(self) -> float:
        return math.inf if self.decay_rate <= 0 else 1.0 / self.decay_rate


def _check_grid(bath_minus, grid, idf):
    volterra.check_step(idf.frequency, grid.dt, "internal oscillator")
    if not bath_minus.is_zero and np.isfinite(bath_minus.cutoff) and bath_minus.cutoff * grid.dt > MAX_CUTOFF_DT:
        raise StepSizeError(f"dt={grid.dt:g} does not resolve the bath cutoff {bath_minus.cutoff:g}",
                            recommended_dt=0.5 / bath_minus.cutoff)


def homogeneous_basis(idf: OscillatorSpec, bath_minus: BathSpec, grid: TimeGrid):
    """Homogeneous solutions ``u`` (u(0)=1, u'(0)=0) and ``v`` (v(0)=0, v'(0)=1)."""
    _check_grid(bath_minus, grid, idf)
    stiffness_guard(idf, bath_minus)
    eta = eta_kernel(bath_minus, grid).values
    x, _ = volterra.solve(idf.frequency, grid.dt, grid.n_steps, [1.0, 0.0], [0.0, 1.0],
                          memory=eta, coef=2.0 / idf.mass)
    return Kernel1D(grid, x[0], "causal"), Kernel1D(grid, x[1], "causal")


def stiffness_guard(idf, bath_minus):
    if bath_minus.is_zero:
        return idf.mass * idf.frequency**2
    k = static_stiffness(idf, bath_minus)
    if k <= 0:
        raise InstabilityError(
            f"static stiffness m w0^2 + 2 Re eta(0) = {k:.4g} <= 0: the dressed oscillator "
            "has a growing mode; increase omega_ir or reduce the coupling"
        )
    return k


def default_freq_grid(idf: OscillatorSpec, bath_minus: BathSpec, grid: TimeGrid) -> FreqGrid:
    top = math.pi / grid.dt
    if np.isfinite(bath_minus.cutoff):
        top = min(top, 20 * bath_minus.cutoff)
    top = max(top, 4 * idf.frequency)
    return FreqGrid(top, 2 * grid.n_steps)


def green_time(idf: OscillatorSpec, bath_minus: BathSpec, grid: TimeGrid, freq_grid=None) -> DressedPropagator:
    """Solve for ``G(t)`` with ``G(0) = 0``, ``G'(0) = 1/m`` and evaluate ``G(w)``.

    Raises
    ------
    InstabilityError
        If the static stiffness is not positive.
    StepSizeError
        If ``dt`` under-resolves the oscillator or the bath cutoff.
    """
    k = stiffness_guard(idf, bath_minus)
    u, v = homogeneous_basis(idf, bath_minus, grid)
    gvals = v.values / idf.mass
    G = Kernel1D(grid, gvals, "causal")
    g = Kernel1D(grid, gvals, "odd")
    if bath_minus.is_zero:
        G_bar, w_r, kappa = None, idf.frequency, 0.0
    else:
        fg = freq_grid or default_freq_grid(idf, bath_minus, grid)
        G_bar = Spectrum(fg, green_freq(idf, bath_minus, fg.omega), {"source": "closed form"})
        w_r, kappa = pole_estimate(idf, bath_minus)
    meta = {"scheme": "central difference, trapezoidal memory", "dt": grid.dt}
    return DressedPropagator(G, g, G_bar, w_r, kappa, k, u, v, meta)


def green_spectrum(idf: OscillatorSpec, bath_minus: BathSpec, freq_grid: FreqGrid) -> Spectrum:
    """``G(w)`` on a frequency grid."""
    return Spectrum(freq_grid, green_freq(idf, bath_minus, freq_grid.omega))


def initial_variances(idf: OscillatorSpec, temperature):
    """Thermal Wigner variances ``(s_QQ, s_PP)`` of the free oscillator."""
    m, w0 = idf.mass, idf.frequency
    c = 1.0 if temperature == 0 else 1.0 / math.tanh(w0 / (2 * temperature))
    return c / (2 * m * w0), 0.5 * m * w0 * c


def initial_correlator(idf: OscillatorSpec, temperature, u: Kernel1D, v: Kernel1D) -> Kernel2D:
    """``<<Q_h(t1) Q_h(t2)>> = s_QQ u u + (s_PP / m^2) v v``."""
    grid = check_same_grid(u, v)
    s_qq, s_pp = initial_variances(idf, temperature)
    uu, vv = u.values, v.values
    vals = s_qq * np.outer(uu, uu) + (s_pp / idf.mass**2) * np.outer(vv, vv)
    return Kernel2D(grid, vals, "symmetric")


def _memory_guard(grid, max_steps):
    if grid.n_steps > max_steps:
        raise MemoryBudgetError(grid.n_steps, max_steps)


def nu_gg_finite(G, nu_minus: Kernel1D, grid: TimeGrid = None, max_steps=MAX_DENSE_STEPS) -> Kernel2D:
    """``nu_GG(t1, t2) = int_0^t1 int_0^t2 G(t1 - s1) nu(s1 - s2) G(t2 - s2)``.

    Both integrals use the trapezoidal rule on the grid nodes; the double sum
    is evaluated as ``A N A^T`` with dense matrix products.
    """
    Gk = G.G if isinstance(G, DressedPropagator) else G
    grid = grid or Gk.grid
    check_same_grid(Gk, nu_minus)
    if grid != Gk.grid:
        raise ValueError("grid does not match the kernels")
    _memory_guard(grid, max_steps)
    n = grid.n_points
    dt = grid.dt
    i = np.arange(n)
    lag = i[:, None] - i[None, :]
    a = np.where(lag >= 0, Gk.values[np.clip(lag, 0, None)], 0.0)
    w = np.full(n, dt)
    w[0] = 0.5 * dt
    # the k = i endpoint carries G(0) = 0, so its half weight is immaterial
    a *= w[None, :]
    a[0, :] = 0.0
    nmat = nu_minus.lag_matrix()
    out = (a @ nmat) @ a.T
    out = 0.5 * (out + out.T)
    return Kernel2D(grid, out, "symmetric")


def nu_gg_stationary(G: Kernel1D, nu_minus: Kernel1D) -> Kernel1D:
    """Late-time limit ``nu_GG(tau) = int du C_G(u) nu(tau - u)``.

    ``C_G(u) = int_0^inf G(s) G(s + u) ds`` is the autocorrelation of the
    propagator. ``G`` must have decayed within the first half of its grid;
    the result is returned for lags up to ``t_max / 2``.
    """
    grid = check_same_grid(G, nu_minus)
    if grid.n_steps % 2:
        raise ValueError("stationary noise needs an even number of steps")
    dt = grid.dt
    gv = G.values
    corr = signal.fftconvolve(gv, gv[::-1]) * dt  # lags -(n-1)..(n-1)
    n = grid.n_points
    half = grid.n_steps // 2
    lags = np.arange(-grid.n_steps, grid.n_steps + 1)
    nu_full = nu_minus.at_lags(lags)
    conv = signal.fftconvolve(corr, nu_full) * dt
    # output lag k sits at index k + (n - 1) + n_steps
    start = (n - 1) + grid.n_steps
    vals = conv[start : start + half + 1]
    return Kernel1D(TimeGrid(grid.t_max / 2, half), vals, "even")


def nu_gg_freq(G_bar: Spectrum, nu_minus_bar: Spectrum, temperature):
    """``nu_GG(w)`` as ``|G|^2 nu(w)`` (primary) and as ``coth(w/2T) Im G(w)``.

    At ``w = 0`` with ``T > 0`` the second form is replaced by its limit,
    which equals the first.
    """
    grid = check_same_grid(G_bar, nu_minus_bar)
    w = grid.omega
    primary = np.abs(G_bar.values) ** 2 * nu_minus_bar.values.real
    fdr = coth_thermal(w, temperature) * G_bar.imag
    fdr = np.where(w == 0, primary if temperature > 0 else 0.0, fdr)
    return (Spectrum(grid, primary, {"form": "|G|^2 nu"}),
            Spectrum(grid, fdr, {"form": "coth Im G", "temperature": temperature}))


def check_idf_fdr(G_bar: Spectrum, nu_minus_bar: Spectrum, temperature):
    """Pointwise residual between the two forms of ``nu_GG(w)`` (``w != 0``)."""
    primary, fdr = nu_gg_freq(G_bar, nu_minus_bar, temperature)
    mask = G_bar.grid.omega != 0
    rep = residual_report("dressed-propagator FDR", primary.real, fdr.real, mask, "pointwise",
                          {"temperature": temperature})
    rep_max = residual_report("dressed-propagator FDR", primary.real, fdr.real, mask, "max")
    rep.details["max_residual_vs_peak"] = rep_max.max_residual
    return rep
