"""Grids, kernel containers, Fourier transforms, quadrature and factorization.

Conventions used throughout the package:

* natural units (hbar = c = k_B = 1), temperatures in frequency units;
* forward transform ``F(w) = int exp(i w t) F(t) dt`` and inverse
  ``F(t) = int dw / 2pi exp(-i w t) F(w)``;
* convolution ``[A * B](w) = int dw' / 2pi A(w - w') B(w')``;
* ``Theta(0) = 1/2`` and ``sign(0) = 0`` on the diagonal of two-time kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, signal

from .errors import FactorizationError, GridMismatchError, IntegrationError, NyquistError

FOURIER_CONVENTION = "Fourier: int exp(i w t) F(t) dt"

_TWO_PI_LD = np.longdouble("6.28318530717958647692528676655900577")
_DIRECT_DFT_LIMIT = 1 << 22


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k dt`` for ``k = 0..n_steps``."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "t_max", float(self.t_max))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt


@dataclass(frozen=True)
class FreqGrid:
    """Symmetric uniform grid on ``[-omega_max, omega_max]`` containing zero.

    ``n_freq`` is the number of intervals and must be even, so that the grid
    has ``n_freq + 1`` points with ``w = 0`` at index ``n_freq // 2``.
    """

    omega_max: float
    n_freq: int

    def __post_init__(self):
        if not (np.isfinite(self.omega_max) and self.omega_max > 0):
            raise ValueError(f"omega_max must be positive and finite, got {self.omega_max}")
        if int(self.n_freq) != self.n_freq or self.n_freq < 2 or self.n_freq % 2:
            raise ValueError(f"n_freq must be an even integer >= 2, got {self.n_freq}")
        object.__setattr__(self, "omega_max", float(self.omega_max))
        object.__setattr__(self, "n_freq", int(self.n_freq))

    @property
    def d_omega(self) -> float:
        return 2.0 * self.omega_max / self.n_freq

    @property
    def n_points(self) -> int:
        return self.n_freq + 1

    @property
    def zero_index(self) -> int:
        return self.n_freq // 2

    @property
    def omega(self) -> np.ndarray:
        k = np.arange(self.n_points) - self.zero_index
        return k * self.d_omega

    def index_of(self, omega, atol=1e-9):
        """Grid index of ``omega``; raises if it is not a grid point."""
        x = np.asarray(omega, dtype=float) / self.d_omega + self.zero_index
        idx = np.rint(x).astype(int)
        if np.any(np.abs(x - idx) > atol) or np.any((idx < 0) | (idx >= self.n_points)):
            raise GridMismatchError("frequency is not a point of the grid")
        return idx


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex frequency-domain samples on a :class:`FreqGrid`."""

    grid: FreqGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    convention: str = FOURIER_CONVENTION

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    def hermitian_residual(self) -> float:
        """``max |F(-w) - conj F(w)|``; zero for transforms of real kernels."""
        return float(np.max(np.abs(self.values[::-1] - np.conj(self.values))))


_SUPPORTS = ("causal", "even", "odd")


@dataclass(frozen=True, eq=False)
class Kernel1D:
    """Stationary kernel sampled at lags ``tau_k = k dt >= 0``.

    Negative lags follow from the support tag: zero for ``causal``,
    ``K(-tau) = K(tau)`` for ``even`` and ``K(-tau) = -K(tau)`` for ``odd``.
    """

    grid: TimeGrid
    values: np.ndarray
    support: str

    def __post_init__(self):
        if self.support not in _SUPPORTS:
            raise ValueError(f"support must be one of {_SUPPORTS}, got {self.support!r}")
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel samples must be finite")
        if self.support == "odd" and v[0] != 0.0:
            raise ValueError("odd kernel must vanish at zero lag")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def at_lags(self, k) -> np.ndarray:
        """Kernel at integer lags ``k`` (any sign), ``Theta(0) = 1/2`` for causal."""
        k = np.asarray(k)
        ak = np.abs(k)
        v = self.values[ak]
        if self.support == "even":
            return v
        s = np.sign(k)
        if self.support == "odd":
            return s * v
        return v * np.where(k > 0, 1.0, np.where(k == 0, 0.5, 0.0))

    def lag_matrix(self) -> np.ndarray:
        """Two-time matrix ``K(t_i - t_j)``."""
        i = np.arange(self.grid.n_points)
        return self.at_lags(i[:, None] - i[None, :])

    def symmetric_samples(self):
        """Lags ``-t_max..t_max`` and the kernel values there."""
        k = np.arange(-self.grid.n_steps, self.grid.n_steps + 1)
        return k * self.grid.dt, self.at_lags(k)


@dataclass(frozen=True, eq=False)
class Kernel2D:
    """Two-time kernel ``K(t_i, t_j)`` on a square :class:`TimeGrid` mesh."""

    grid: TimeGrid
    values: np.ndarray
    symmetry: str = "none"

    def __post_init__(self):
        if self.symmetry not in ("symmetric", "causal", "none"):
            raise ValueError(f"unknown symmetry tag {self.symmetry!r}")
        v = np.array(self.values, dtype=float)
        n = self.grid.n_points
        if v.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def asymmetry(self) -> float:
        """``max |K - K^T| / max |K|`` (zero for the zero kernel)."""
        scale = np.max(np.abs(self.values))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.values - self.values.T)) / scale)


def check_same_grid(*items):
    """Raise :class:`GridMismatchError` unless all items share one grid."""
    grids = [it.grid for it in items if it is not None]
    for g in grids[1:]:
        if g != grids[0]:
            raise GridMismatchError(f"grid mismatch: {grids[0]} vs {g}")
    return grids[0] if grids else None


def heaviside(x):
    """Step function with ``Theta(0) = 1/2``."""
    return np.heaviside(x, 0.5)


def coth_thermal(omega, temperature):
    """``coth(w / 2T)``; exactly ``sign(w)`` at ``T = 0`` and NaN at the pole ``w = 0``."""
    w = np.asarray(omega, dtype=float)
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        return np.sign(w)
    x = w / (2.0 * temperature)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 / np.tanh(x)
    return np.where(w == 0, np.nan, out)


# ---------------------------------------------------------------------------
# discrete Fourier sums

def _phase(a, k):
    """``exp(i a k)`` with the angle reduced in extended precision."""
    ang = np.longdouble(a) * np.asarray(k, dtype=np.longdouble)
    ang = np.mod(ang, _TWO_PI_LD)
    return np.exp(1j * ang.astype(float))


def dft_sum(x, theta0, dtheta, m):
    """``S_j = sum_n x_n exp(i (theta0 + j dtheta) n)`` for ``j = 0..m-1``.

    Small problems are summed directly; large ones use Bluestein's chirp-z
    algorithm with chirps evaluated in extended precision.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if n * m <= _DIRECT_DFT_LIMIT:
        nn = np.arange(n)
        th = theta0 + dtheta * np.arange(m)
        # reduce each angle product separately to keep the phase exact
        ph = _phase(1.0, np.multiply.outer(th.astype(np.longdouble), nn.astype(np.longdouble)))
        return ph @ x
    nn = np.arange(n, dtype=np.int64)
    c_n = _phase(dtheta / 2.0, nn * nn)
    y = x * _phase(theta0, nn) * c_n
    k = np.arange(-(n - 1), m, dtype=np.int64)
    b = np.conj(_phase(dtheta / 2.0, k * k))
    conv = signal.fftconvolve(y, b)
    jj = np.arange(m, dtype=np.int64)
    return _phase(dtheta / 2.0, jj * jj) * conv[n - 1 : n - 1 + m]


def _end_derivatives(f, h):
    """First three derivatives at the left end from one-sided differences."""
    if len(f) < 5:
        d1 = (f[1] - f[0]) / h
        return d1, 0.0 * d1, 0.0 * d1
    f0, f1, f2, f3, f4 = f[:5]
    d1 = (-25 * f0 + 48 * f1 - 36 * f2 + 16 * f3 - 3 * f4) / (12 * h)
    d2 = (35 * f0 - 104 * f1 + 114 * f2 - 56 * f3 + 11 * f4) / (12 * h * h)
    d3 = (-5 * f0 + 18 * f1 - 24 * f2 + 14 * f3 - 3 * f4) / (2 * h**3)
    return d1, d2, d3


def oscillatory_integral(f, x0, h, k0, dk, m):
    """``int_{x0}^{x0 + N h} f(x) exp(i k x) dx`` at ``k_j = k0 + j dk``.

    Trapezoidal sum evaluated as a discrete Fourier sum, with Euler-Maclaurin
    end corrections through fourth order in ``h``. Endpoint derivatives of
    ``f`` come from one-sided five-point differences.
    """
    f = np.asarray(f)
    n = len(f) - 1
    k = k0 + dk * np.arange(m)
    s = dft_sum(f, k0 * h, dk * h, m)
    e_left = np.exp(1j * k * x0)
    e_right = _phase(1.0, k.astype(np.longdouble) * np.longdouble(x0 + n * h))
    trap = h * e_left * (s - 0.5 * f[0]) - 0.5 * h * f[-1] * e_right
    a1, a2, a3 = _end_derivatives(f, h)
    b1, b2, b3 = _end_derivatives(f[::-1], h)
    b1, b3 = -b1, -b3
    ik = 1j * k
    # derivatives of g = f exp(ikx) at both ends
    g1a = (a1 + ik * f[0]) * e_left
    g1b = (b1 + ik * f[-1]) * e_right
    g3a = (a3 + 3 * ik * a2 + 3 * ik**2 * a1 + ik**3 * f[0]) * e_left
    g3b = (b3 + 3 * ik * b2 + 3 * ik**2 * b1 + ik**3 * f[-1]) * e_right
    return trap - h**2 / 12.0 * (g1b - g1a) + h**4 / 720.0 * (g3b - g3a)


def fourier_of_kernel(kernel: Kernel1D, freq_grid: FreqGrid) -> Spectrum:
    """Forward transform ``int exp(i w t) K(t) dt`` of a sampled kernel.

    Causal kernels are integrated over ``[0, t_max]``; even and odd kernels
    over ``[-t_max, t_max]`` using their parity. No window is applied; the
    kernel is assumed to have decayed by ``t_max``.
    """
    g = kernel.grid
    if freq_grid.omega_max * g.dt > math.pi * (1 + 1e-12):
        raise NyquistError(
            f"omega_max={freq_grid.omega_max:g} exceeds the Nyquist frequency "
            f"pi/dt={math.pi / g.dt:g} of the time grid"
        )
    w0 = -freq_grid.omega_max
    half = oscillatory_integral(kernel.values, 0.0, g.dt, w0, freq_grid.d_omega, freq_grid.n_points)
    if kernel.support == "causal":
        vals = half
    else:
        # integral over negative lags is I(-w), read off the symmetric grid
        mirror = half[::-1]
        vals = half + mirror if kernel.support == "even" else half - mirror
    meta = {
        "support": kernel.support,
        "window": "none",
        "padding": "none",
        "quadrature": "trapezoid + Euler-Maclaurin end corrections O(h^4)",
        "dt": g.dt,
        "t_max": g.t_max,
    }
    return Spectrum(freq_grid, vals, meta)


def inverse_fourier(spectrum: Spectrum, grid: TimeGrid) -> np.ndarray:
    """``F(t_k) = int dw / 2pi exp(-i w t_k) F(w)`` on a time grid (complex)."""
    fg = spectrum.grid
    if grid.t_max * fg.d_omega > math.pi * (1 + 1e-12):
        raise NyquistError(
            f"t_max={grid.t_max:g} exceeds the period pi/d_omega={math.pi / fg.d_omega:g} "
            "resolved by the frequency grid"
        )
    out = oscillatory_integral(spectrum.values, -fg.omega_max, fg.d_omega, 0.0, -grid.dt, grid.n_points)
    return out / (2 * math.pi)


def _hilbert_weights(k):
    """Principal-value weights for piecewise-linear data, see kramers_kronig."""
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    big = np.abs(k) >= 30
    kb = k[big]
    ik2 = 1.0 / (kb * kb)
    out[big] = -(1.0 + ik2 * (1 / 6 + ik2 * (1 / 15 + ik2 * (1 / 28 + ik2 / 45)))) / kb
    ks = k[~big]

    def xlogx(x):
        ax = np.abs(x)
        return np.where(ax > 0, x * np.log(np.where(ax > 0, ax, 1.0)), 0.0)

    out[~big] = xlogx(1 - ks) + 2 * xlogx(ks) - xlogx(1 + ks)
    return out


def kramers_kronig(imag_part, freq_grid: FreqGrid) -> np.ndarray:
    """Real part of a causal response from its imaginary part on the grid.

    Evaluates ``Re F(w) = (1/pi) P int Im F(w') / (w' - w) dw'`` exactly for
    the piecewise-linear interpolant of the samples, treating the function
    as zero outside the grid.
    """
    f = np.asarray(imag_part, dtype=float)
    m = freq_grid.n_points
    if f.shape != (m,):
        raise GridMismatchError("imaginary part does not match the grid")
    c = _hilbert_weights(np.arange(-(m - 1), m))
    conv = signal.fftconvolve(f, c)
    return conv[m - 1 : 2 * m - 1] / math.pi


def freq_convolution(a: Spectrum, b: Spectrum) -> Spectrum:
    """``[A * B](w) = int dw' / 2pi A(w - w') B(w')`` on a common grid.

    Values outside the grid are treated as zero.
    """
    grid = check_same_grid(a, b)
    av, bv = a.values, b.values
    if not np.any(av.imag) and not np.any(bv.imag):
        full = signal.fftconvolve(av.real, bv.real)
    else:
        full = signal.fftconvolve(av, bv)
    c = grid.zero_index
    vals = full[c : c + grid.n_points] * grid.d_omega / (2 * math.pi)
    return Spectrum(grid, vals, {"operation": "convolution"})


# ---------------------------------------------------------------------------
# adaptive quadrature

def adaptive_spectral_integral(integrand, omega_min=0.0, cutoff=1.0, tol=1e-10,
                               weight=None, wvar=None, n_panels=8, reach=60.0, limit=400):
    """``int_{omega_min}^inf integrand(w) dw`` with error estimate below ``tol``.

    The range ``[omega_min, omega_min + reach * cutoff]`` is split into equal
    panels integrated with QUADPACK; the remainder is integrated on the
    semi-infinite interval. ``weight`` may be ``'sin'`` or ``'cos'`` with
    angular frequency ``wvar`` for Fourier-type integrals.

    Raises
    ------
    IntegrationError
        If the accumulated error estimate exceeds ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if weight is not None and wvar == 0:
        if weight == "sin":
            return 0.0
        weight = None
    edges = omega_min + np.linspace(0.0, reach * cutoff, n_panels + 1)
    total, err = 0.0, 0.0
    kw = {"limit": limit, "epsabs": tol / (2 * (n_panels + 1)), "epsrel": 0.0, "full_output": 1}
    if weight is not None:
        # weighted rules sample the endpoints, where integrand may be singular;
        # integrate a short leading piece as an ordinary product instead
        lead = min(edges[1] - edges[0], math.pi / (4 * abs(wvar)))
        trig = np.sin if weight == "sin" else np.cos
        r = integrate.quad(lambda w: integrand(w) * trig(wvar * w), omega_min, omega_min + lead, **kw)
        total += r[0]
        err += r[1]
        edges = np.concatenate([[omega_min + lead], edges[1:]])
    for a, b in zip(edges[:-1], edges[1:]):
        if weight is None:
            r = integrate.quad(integrand, a, b, **kw)
        else:
            r = integrate.quad(integrand, a, b, weight=weight, wvar=wvar, **kw)
        total += r[0]
        err += r[1]
    tail_kw = {"limit": limit, "epsabs": tol / 2, "full_output": 1}
    if weight is None:
        r = integrate.quad(integrand, edges[-1], np.inf, epsrel=0.0, **tail_kw)
    else:
        r = integrate.quad(integrand, edges[-1], np.inf, weight=weight, wvar=wvar,
                           limlst=200, **tail_kw)
    total += r[0]
    err += r[1]
    if not np.isfinite(total) or err > tol:
        raise IntegrationError("adaptive quadrature did not converge", total, err)
    return float(total)


# ---------------------------------------------------------------------------
# positive-semidefinite factorization

@dataclass(frozen=True, eq=False)
class PsdFactor:
    """Lower-triangular ``factor`` with ``factor @ factor.T = K + jitter * I``."""

    factor: np.ndarray
    jitter: float
    min_eigenvalue: float


def min_eigenvalue(matrix) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    a = np.asarray(matrix, dtype=float)
    return float(linalg.eigh(a, eigvals_only=True, subset_by_index=[0, 0])[0])


def psd_factorize(kernel, jitter_max=0.0, sym_tol=1e-8) -> PsdFactor:
    """Cholesky factor of a symmetric kernel with the smallest adequate jitter.

    Tries ``eps = 0`` and then ``eps = 10^p * max|K|`` for increasing ``p``
    up to ``jitter_max`` (absolute), which is always tried last.

    Raises
    ------
    FactorizationError
        If no jitter within budget yields a factorization.
    """
    k = np.asarray(getattr(kernel, "values", kernel), dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("kernel must be a square matrix")
    scale = float(np.max(np.abs(k))) if k.size else 0.0
    if scale and np.max(np.abs(k - k.T)) > sym_tol * scale:
        raise ValueError("kernel is not symmetric within tolerance")
    k = 0.5 * (k + k.T)
    ladder = [0.0]
    if scale > 0 and jitter_max > 0:
        p = -16
        while 10.0**p * scale < jitter_max:
            ladder.append(10.0**p * scale)
            p += 1
        ladder.append(float(jitter_max))
    eye = np.eye(k.shape[0])
    for eps in ladder:
        try:
            fac = linalg.cholesky(k + eps * eye, lower=True, check_finite=True)
        except linalg.LinAlgError:
            continue
        lam = min_eigenvalue(k) if k.shape[0] <= 2048 else float("nan")
        return PsdFactor(fac, eps, lam)
    raise FactorizationError(
        f"matrix not positive definite with jitter up to {jitter_max:g}", min_eigenvalue(k)
    )


# ---------------------------------------------------------------------------
# identity-check reports

@dataclass(frozen=True)
class FdrReport:
    """Residual summary of a fluctuation-dissipation type identity."""

    identity: str
    max_residual: float
    rms_residual: float
    n_points: int
    details: dict = field(default_factory=dict)

    def passed(self, threshold: float) -> bool:
        return bool(self.n_points > 0 and self.max_residual < threshold)

    def as_dict(self) -> dict:
        return {
            "identity": self.identity,
            "max_residual": self.max_residual,
            "rms_residual": self.rms_residual,
            "n_points": self.n_points,
            **self.details,
        }


def residual_report(identity, lhs, rhs, mask=None, scale="pointwise", details=None) -> FdrReport:
    """Compare two evaluations of an identity.

    ``scale='pointwise'`` divides by ``|lhs|`` at each point (points where
    both sides vanish count as exact); ``scale='max'`` divides by
    ``max |lhs|`` over the mask.
    """
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    if mask is None:
        mask = np.ones(lhs.shape, dtype=bool)
    a, b = lhs[mask], rhs[mask]
    diff = np.abs(a - b)
    if scale == "pointwise":
        den = np.abs(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(den > 0, diff / np.where(den > 0, den, 1.0), np.where(diff > 0, np.inf, 0.0))
    else:
        top = np.max(np.abs(a)) if a.size else 0.0
        rel = diff / top if top > 0 else np.where(diff > 0, np.inf, 0.0)
    n = int(rel.size)
    mx = float(np.max(rel)) if n else float("nan")
    rms = float(np.sqrt(np.mean(rel**2))) if n else float("nan")
    return FdrReport(identity, mx, rms, n, dict(details or {}))
