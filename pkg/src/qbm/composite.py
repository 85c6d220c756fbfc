"""Second-order kernels of the composite environment.

The center of mass couples to the field only through the internal
oscillator, so its dissipation and noise kernels are products of the
(+)-bath kernels with the internal-oscillator correlations:

    eta2(t1, t2) = [ 1/2 eta+ (nu_GG + <<Q Q>>) + 1/4 nu+ g ] Theta(t1 - t2)
    nu2(t1, t2)  =   1/2 nu+  (nu_GG + <<Q Q>>) - 1/4 eta+_odd g_odd

with all one-time kernels evaluated at ``t1 - t2``. In the stationary limit
their transforms are convolutions

    eta2(w) = 1/2 [nu_GG * eta+] + 1/4 [G * nu+]
    nu2(w)  = 1/2 [nu_GG * nu+]  +     [Im G * Im eta+]

whose integrands define the two-frequency kernels ``D2(w, w')`` and
``N2(w, w')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, QbmError, TruncationError
from .numerics import (
    FreqGrid,
    Kernel1D,
    Kernel2D,
    Spectrum,
    check_same_grid,
    coth_thermal,
    freq_convolution,
    heaviside,
    residual_report,
)

SYMMETRY_TOL = 1e-8


def _lag_index(grid):
    i = np.arange(grid.n_points)
    return i[:, None] - i[None, :]


def _odd_lags(kernel: Kernel1D, lag):
    """Theta-free odd extension ``sign(k) K(|k| dt)`` of a kernel."""
    return np.sign(lag) * kernel.values[np.abs(lag)]


def _check_inputs(eta_plus, nu_plus, nu_gg, qh_corr, g_odd):
    items = [eta_plus, nu_plus, nu_gg, g_odd] + ([qh_corr] if qh_corr is not None else [])
    return check_same_grid(*items)


def _braces(nu_gg, qh_corr):
    b = np.array(nu_gg.values)
    if qh_corr is not None:
        b = b + qh_corr.values
    return b


def eta2_time(eta_plus: Kernel1D, nu_plus: Kernel1D, nu_gg: Kernel2D, qh_corr, g_odd: Kernel1D) -> Kernel2D:
    """Finite-time dissipation kernel, causal with ``Theta(0) = 1/2``."""
    grid = _check_inputs(eta_plus, nu_plus, nu_gg, qh_corr, g_odd)
    lag = _lag_index(grid)
    b = _braces(nu_gg, qh_corr)
    k = np.abs(lag)
    vals = 0.5 * eta_plus.values[k] * b + 0.25 * nu_plus.values[k] * g_odd.values[k]
    # Theta(0) = 1/2 multiplies the whole bracket on the diagonal
    return Kernel2D(grid, vals * heaviside(lag), "causal")


def nu2_time(eta_plus: Kernel1D, nu_plus: Kernel1D, nu_gg: Kernel2D, qh_corr, g_odd: Kernel1D) -> Kernel2D:
    """Finite-time noise kernel (symmetric).

    Raises
    ------
    QbmError
        If the assembled kernel is asymmetric beyond round-off.
    """
    grid = _check_inputs(eta_plus, nu_plus, nu_gg, qh_corr, g_odd)
    lag = _lag_index(grid)
    b = _braces(nu_gg, qh_corr)
    vals = 0.5 * nu_plus.at_lags(lag) * b - 0.25 * _odd_lags(eta_plus, lag) * _odd_lags(g_odd, lag)
    out = Kernel2D(grid, vals, "symmetric")
    if out.asymmetry() > SYMMETRY_TOL:
        raise QbmError(f"noise kernel asymmetry {out.asymmetry():.3g} exceeds {SYMMETRY_TOL:g}")
    return out


def eta2_weights(eta_hat, nu_hat, nu_gg: Kernel2D, qh_corr, g_odd: Kernel1D) -> Kernel2D:
    """Product-integration weights for the memory term of the equation of motion.

    The (+)-bath kernels vary on the cutoff scale, which a practical ``dt``
    does not resolve, while ``nu_GG + <<Q Q>>`` and ``g`` vary on the
    oscillator scale. Replacing the sharp factors by their hat averages
    ``eta_hat`` and ``nu_hat`` (see :func:`qbm.baths.hat_kernel`) integrates
    them exactly against the linear interpolant of the smooth factors. Row
    ``i`` is meant for trapezoidal weights, so the diagonal holds the
    half-hat average. Used in place of the sampled kernel, this keeps the
    solver second order with a much smaller constant.
    """
    grid = check_same_grid(nu_gg, g_odd, *([qh_corr] if qh_corr is not None else []))
    eta_hat = np.asarray(eta_hat, dtype=float)
    nu_hat = np.asarray(nu_hat, dtype=float)
    if eta_hat.shape != (grid.n_points,) or nu_hat.shape != (grid.n_points,):
        raise GridMismatchError("hat-averaged kernels do not match the grid")
    lag = _lag_index(grid)
    k = np.abs(lag)
    b = _braces(nu_gg, qh_corr)
    vals = 0.5 * eta_hat[k] * b + 0.25 * nu_hat[k] * g_odd.values[k]
    return Kernel2D(grid, np.where(lag >= 0, vals, 0.0), "causal")


@dataclass(frozen=True, eq=False)
class CompositeKernels:
    """Second-order kernels with a snapshot of the parameters used."""

    eta2: Kernel2D
    nu2: Kernel2D
    provenance: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.eta2.grid


# ---------------------------------------------------------------------------
# stationary limit in the time domain

def eta2_late(eta_plus: Kernel1D, nu_plus: Kernel1D, nu_gg: Kernel1D, g: Kernel1D) -> Kernel1D:
    """Stationary dissipation kernel ``1/2 eta+ nu_GG + 1/4 nu+ g`` at lags ``>= 0``."""
    grid = check_same_grid(eta_plus, nu_plus, nu_gg, g)
    vals = 0.5 * eta_plus.values * nu_gg.values + 0.25 * nu_plus.values * g.values
    vals[0] = 0.0
    return Kernel1D(grid, vals, "causal")


def nu2_late(eta_plus: Kernel1D, nu_plus: Kernel1D, nu_gg: Kernel1D, g: Kernel1D) -> Kernel1D:
    """Stationary noise kernel ``1/2 nu+ nu_GG - 1/4 eta+ g`` (even in the lag)."""
    grid = check_same_grid(eta_plus, nu_plus, nu_gg, g)
    vals = 0.5 * nu_plus.values * nu_gg.values - 0.25 * eta_plus.values * g.values
    return Kernel1D(grid, vals, "even")


def eta2_late_weights(eta_hat, nu_hat, nu_gg: Kernel1D, g: Kernel1D) -> Kernel1D:
    """Stationary counterpart of :func:`eta2_weights` (lag samples)."""
    grid = check_same_grid(nu_gg, g)
    vals = 0.5 * np.asarray(eta_hat) * nu_gg.values + 0.25 * np.asarray(nu_hat) * g.values
    return Kernel1D(grid, vals, "causal")


def lift_stationary(eta2: Kernel1D, nu2: Kernel1D) -> CompositeKernels:
    """Two-time matrices of stationary kernels."""
    grid = check_same_grid(eta2, nu2)
    lag = _lag_index(grid)
    e = np.where(lag > 0, eta2.values[np.abs(lag)], 0.0)
    return CompositeKernels(Kernel2D(grid, e, "causal"), Kernel2D(grid, nu2.lag_matrix(), "symmetric"),
                            {"kernel_mode": "late"})


# ---------------------------------------------------------------------------
# frequency domain

def _edge_ratio(values, frac=0.02):
    a = np.abs(values)
    top = a.max()
    if top == 0:
        return 0.0, None
    k = max(2, int(frac * a.size))
    edge = max(a[:k].max(), a[-k:].max())
    return edge / top, (a, k)


def _required_omega_max(grid, values, tol):
    a = np.abs(values)
    top = a.max()
    k = max(4, grid.n_points // 50)
    right = a[-k:]
    slope = (math.log(right[-1] + 1e-300) - math.log(right[0] + 1e-300)) / ((k - 1) * grid.d_omega)
    if slope >= 0:
        return 2 * grid.omega_max
    return grid.omega_max + math.log(right[-1] / (tol * top)) / (-slope)


def tail_check(grid: FreqGrid, named_spectra, tol):
    """Refuse spectra that are not negligible at the grid edges."""
    for name, values in named_spectra:
        ratio, _ = _edge_ratio(values)
        if ratio > tol:
            raise TruncationError(
                f"{name} at the grid edge is {ratio:.2g} of its peak (tolerance {tol:g})",
                _required_omega_max(grid, values, tol),
            )


def kernels_late_freq(G_bar: Spectrum, eta_plus_bar: Spectrum, nu_plus_bar: Spectrum,
                      nu_gg_bar: Spectrum, tol=1e-6):
    """Stationary second-order spectra ``(eta2(w), nu2(w))``.

    Raises
    ------
    TruncationError
        If ``nu+`` or ``Im eta+`` are not negligible at the grid edges.
    """
    grid = check_same_grid(G_bar, eta_plus_bar, nu_plus_bar, nu_gg_bar)
    tail_check(grid, [("nu+ spectrum", nu_plus_bar.values), ("Im eta+ spectrum", eta_plus_bar.imag)], tol)
    im_g = Spectrum(grid, G_bar.imag)
    im_eta = Spectrum(grid, eta_plus_bar.imag)
    eta2 = 0.5 * freq_convolution(nu_gg_bar, eta_plus_bar).values + 0.25 * freq_convolution(G_bar, nu_plus_bar).values
    nu2 = 0.5 * freq_convolution(nu_gg_bar, nu_plus_bar).values + freq_convolution(im_g, im_eta).values
    imag_part = float(np.max(np.abs(nu2.imag))) if nu2.size else 0.0
    return (Spectrum(grid, eta2, {"kernel": "eta2"}),
            Spectrum(grid, nu2.real, {"kernel": "nu2", "discarded_imaginary_part": imag_part}))


def _pv_fill(values, grid):
    """Replace the sample at ``w = 0`` by the mean of its neighbours."""
    v = np.array(values, dtype=float)
    c = grid.zero_index
    v[c] = 0.5 * (v[c - 1] + v[c + 1])
    return v


def coth_weighted(values, grid: FreqGrid, temperature):
    """``coth(w / 2T) * values`` with the pole at zero sampled symmetrically."""
    w = grid.omega
    c = coth_thermal(w, temperature)
    out = np.where(w == 0, 0.0, c * values)
    if temperature > 0:
        out = _pv_fill(out, grid)
    return out


def im_eta2_compact(G_bar: Spectrum, eta_plus_bar: Spectrum, temperature) -> Spectrum:
    """``Im eta2(w) = int dw'/2pi 1/2 [coth((w-w')/2T) - coth(w'/2T)] Im G(w-w') Im eta+(w')``."""
    grid = check_same_grid(G_bar, eta_plus_bar)
    im_g, im_e = G_bar.imag, eta_plus_bar.imag
    pg = Spectrum(grid, coth_weighted(im_g, grid, temperature))
    pe = Spectrum(grid, coth_weighted(im_e, grid, temperature))
    a = freq_convolution(pg, Spectrum(grid, im_e)).values.real
    b = freq_convolution(Spectrum(grid, im_g), pe).values.real
    return Spectrum(grid, 0.5 * (a - b), {"form": "compact", "temperature": temperature})


@dataclass(frozen=True, eq=False)
class TwoFreqKernel:
    """Kernel ``K(w, w')`` on rows ``omega`` and the full grid ``omega_prime``."""

    grid: FreqGrid
    omega: np.ndarray
    values: np.ndarray
    kind: str
    in_range: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def omega_prime(self):
        return self.grid.omega

    def marginal(self):
        """``int dw'/2pi K(w, w')`` as a Riemann sum on the grid."""
        return self.values.sum(axis=1) * self.grid.d_omega / (2 * math.pi)


def _shifted(values, grid, rows_idx, rows_val, exact):
    """``f(w_i - w'_j)`` for each row, zero outside the grid."""
    n = grid.n_points
    j = np.arange(n)
    if exact:
        idx = rows_idx[:, None] - j[None, :] + grid.zero_index
        ok = (idx >= 0) & (idx < n)
        out = np.where(ok, np.asarray(values)[np.clip(idx, 0, n - 1)], 0)
        return out, ok
    arg = rows_val[:, None] - grid.omega[None, :]
    ok = np.abs(arg) <= grid.omega_max
    vals = np.asarray(values)
    re = np.interp(arg, grid.omega, vals.real, left=0.0, right=0.0)
    im = np.interp(arg, grid.omega, vals.imag, left=0.0, right=0.0) if np.iscomplexobj(vals) else 0.0
    return re + 1j * im, ok


def _interp_bound(values):
    """Bound on linear-interpolation error from second differences."""
    v = np.asarray(values)
    if v.size < 3:
        return 0.0
    return float(np.max(np.abs(v[2:] - 2 * v[1:-1] + v[:-2])) / 8)


def default_rows(grid: FreqGrid, max_rows=201):
    step = max(1, int(math.ceil(grid.n_points / max_rows)))
    c = grid.zero_index
    idx = np.concatenate([np.arange(c, -1, -step)[::-1], np.arange(c + step, grid.n_points, step)])
    return grid.omega[idx]


def two_freq_kernels(G_bar: Spectrum, eta_plus_bar: Spectrum, nu_plus_bar: Spectrum,
                     nu_gg_bar: Spectrum, rows=None):
    """Two-frequency kernels ``D2(w, w')`` and ``N2(w, w')``.

    ``D2 = 1/2 nu_GG(w - w') eta+(w') + 1/4 G(w - w') nu+(w')`` and
    ``N2 = 1/2 nu_GG(w - w') nu+(w') + Im G(w - w') Im eta+(w')``. Rows off
    the grid use linear interpolation; the error bound is recorded in
    ``meta['interpolation_error_bound']``.
    """
    grid = check_same_grid(G_bar, eta_plus_bar, nu_plus_bar, nu_gg_bar)
    rows = default_rows(grid) if rows is None else np.atleast_1d(np.asarray(rows, dtype=float))
    try:
        rows_idx = grid.index_of(rows)
        exact = True
    except GridMismatchError:
        rows_idx, exact = None, False
    s_nugg, ok = _shifted(nu_gg_bar.values.real, grid, rows_idx, rows, exact)
    s_g, _ = _shifted(G_bar.values, grid, rows_idx, rows, exact)
    d2 = 0.5 * s_nugg * eta_plus_bar.values[None, :] + 0.25 * s_g * nu_plus_bar.values.real[None, :]
    n2 = 0.5 * s_nugg * nu_plus_bar.values.real[None, :] + s_g.imag * eta_plus_bar.imag[None, :]
    meta = {"exact_shift": exact}
    if not exact:
        meta["interpolation_error_bound"] = max(_interp_bound(nu_gg_bar.values.real), _interp_bound(G_bar.values))
    return (TwoFreqKernel(grid, rows, d2.astype(complex), "D2", ok, dict(meta)),
            TwoFreqKernel(grid, rows, np.real(n2).astype(float), "N2", ok, dict(meta)))


def n2_from_fdr(G_bar: Spectrum, eta_plus_bar: Spectrum, rows, temperature, prefactor=1.0):
    """``prefactor * [1 - coth(a/2T) coth(b/2T)] Im G(a) Im eta+(b)``, ``a = w - w'``, ``b = w'``."""
    grid = check_same_grid(G_bar, eta_plus_bar)
    rows = np.atleast_1d(rows)
    idx = grid.index_of(rows)
    s_g, ok = _shifted(G_bar.imag, grid, idx, rows, True)
    a = rows[:, None] - grid.omega[None, :]
    f = 1 - coth_thermal(a, temperature) * coth_thermal(grid.omega, temperature)[None, :]
    # the product is indeterminate where either argument vanishes
    ok = ok & np.isfinite(f)
    return np.where(ok, prefactor * f * s_g * eta_plus_bar.imag[None, :], 0.0), ok


def _admissible(d2: TwoFreqKernel, temperature):
    grid = d2.grid
    arg = d2.omega[:, None] - 2 * grid.omega[None, :]
    mask = d2.in_range & (np.abs(arg) >= grid.d_omega * (1 - 1e-9))
    return mask, arg


def check_generalized_fdr(d2: TwoFreqKernel, n2: TwoFreqKernel, temperature):
    """Residual of ``N2(w, w') = 2 coth((w - 2w')/2T) Im D2(w, w')``.

    The residual is normalized by ``max |N2|`` over admissible points, which
    exclude ``|w - 2w'| < dw`` and shifts falling off the grid.
    """
    if d2.grid != n2.grid or not np.array_equal(d2.omega, n2.omega):
        raise GridMismatchError("D2 and N2 are sampled on different grids")
    mask, arg = _admissible(d2, temperature)
    rhs = 2 * coth_thermal(arg, temperature) * d2.values.imag
    rep = residual_report("generalized FDR", n2.values, np.where(mask, rhs, 0.0), mask, "max",
                          {"temperature": temperature})
    return rep


def integral_forms(d2: TwoFreqKernel, n2: TwoFreqKernel, temperature):
    """Change-of-variables forms of the stationary spectra.

    With ``w' = w - 2 nu`` (so ``dw' = 2 dnu``) the marginals become

        Im eta2(w) = int dw'/2pi 1/4 tanh(w'/2T) N2(w, (w - w')/2)
        nu2(w)     = int dw'/2pi      coth(w'/2T) Im D2(w, (w - w')/2)

    evaluated here as sums over the grid points ``nu_j``. The pole of
    ``coth`` at ``w' = 0`` is sampled symmetrically.

    Returns
    -------
    dict with arrays ``im_eta2`` and ``nu2`` (one value per row).
    """
    grid = d2.grid
    dw = grid.d_omega
    wprime = d2.omega[:, None] - 2 * grid.omega[None, :]
    if temperature == 0:
        tanh = np.sign(wprime)
        coth = np.sign(wprime)
    else:
        tanh = np.tanh(wprime / (2 * temperature))
        with np.errstate(divide="ignore", invalid="ignore"):
            coth = 1.0 / tanh
    # jacobian dw' = 2 dnu
    im_eta2 = (2 * 0.25 * tanh * n2.values).sum(axis=1) * dw / (2 * math.pi)
    with np.errstate(invalid="ignore"):
        integrand = coth * d2.values.imag
    pole = np.abs(wprime) < 0.5 * dw
    if temperature > 0 and np.any(pole):
        r, j = np.nonzero(pole)
        left = integrand[r, np.clip(j - 1, 0, grid.n_points - 1)]
        right = integrand[r, np.clip(j + 1, 0, grid.n_points - 1)]
        integrand[r, j] = 0.5 * (left + right)
    integrand = np.where(np.isfinite(integrand), integrand, 0.0)
    nu2 = (2 * integrand).sum(axis=1) * dw / (2 * math.pi)
    return {"im_eta2": im_eta2, "nu2": nu2}


def influence_action(x, xp, eta2: Kernel2D, nu2: Kernel2D):
    """Second-order influence action of two paths.

    ``S = -int int_{t2<t1} X_D(t1) eta2 X_S(t2) + i int int_{t2<t1} X_D(t1) nu2 X_D(t2)``
    with ``X_D = X - X'`` and ``X_S = (X + X')/2``, using trapezoidal weights
    on the triangle ``t2 <= t1`` (half weight on the diagonal).
    """
    grid = check_same_grid(eta2, nu2)
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    xd = x - xp
    xs = 0.5 * (x + xp)
    n = grid.n_points
    w = np.full(n, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    tri = np.tril(np.ones((n, n)), -1) + 0.5 * np.eye(n)
    wd = xd * w
    re = -(wd @ (eta2.values * tri) @ (xs * w))
    im = wd @ (nu2.values * tri) @ wd
    return complex(re, im)
