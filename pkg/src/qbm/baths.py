"""Spectral densities and first-order bath kernels.

Two continuum families are supported together with a discrete family:

``ohmic_plus``
    ``J(w) = (lam^2 w / 2) exp(-w / Lam)``
``sub_ohmic_minus``
    ``J(w) = (lam^2 / 2w) w^2 / (w^2 + w_IR^2) exp(-w / Lam)``
``discrete``
    ``J(w) = sum_n c_n [phi(w - w_n) - phi(w + w_n)]`` with ``phi`` a unit
    Gaussian of width ``delta_width`` standing in for a delta spike.

Time-domain kernels are

    eta(tau) = -Theta(tau) int_0^inf J(w) sin(w tau) dw
    nu(tau)  = int_0^inf J(w) coth(w / 2T) cos(w tau) dw

and their transforms are ``Im eta(w) = -(pi/2) J(|w|) sign(w)`` and
``nu(w) = pi coth(w / 2T) J(|w|) sign(w)``. The real part of ``eta(w)`` is
the Hilbert partner of its imaginary part and is evaluated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DivergenceError
from .numerics import (
    FreqGrid,
    Kernel1D,
    Spectrum,
    TimeGrid,
    adaptive_spectral_integral,
    coth_thermal,
    residual_report,
)

FAMILIES = ("sub_ohmic_minus", "ohmic_plus", "discrete")


@dataclass(frozen=True)
class BathSpec:
    """Parametrized bath spectral density.

    Parameters
    ----------
    family : {'sub_ohmic_minus', 'ohmic_plus', 'discrete'}
    coupling : float
        Coupling strength lambda.
    cutoff : float
        Exponential UV cutoff Lambda (``inf`` disables it).
    omega_ir : float
        Lorentzian IR regulator of the sub-ohmic family.
    modes : tuple of (frequency, weight)
        Discrete modes; used only by the discrete family.
    delta_width : float
        Gaussian width standing in for each discrete delta spike.
    """

    family: str
    coupling: float
    cutoff: float = 10.0
    omega_ir: float = 0.0
    modes: tuple = ()
    delta_width: float = 0.0

    def __post_init__(self):
        problems = []
        if self.family not in FAMILIES:
            problems.append(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not self.coupling >= 0:
            problems.append("coupling must be >= 0")
        if not self.cutoff > 0:
            problems.append("cutoff must be > 0")
        if not self.omega_ir >= 0:
            problems.append("omega_ir must be >= 0")
        modes = tuple((float(w), float(c)) for w, c in self.modes)
        if any(w <= 0 for w, _ in modes):
            problems.append("discrete mode frequencies must be > 0")
        if self.family == "discrete":
            if not modes:
                problems.append("discrete family needs at least one mode")
            if not self.delta_width > 0:
                problems.append("discrete family needs delta_width > 0")
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "modes", modes)

    @property
    def is_zero(self) -> bool:
        if self.family == "discrete":
            return all(c == 0 for _, c in self.modes)
        return self.coupling == 0

    def with_coupling(self, coupling) -> "BathSpec":
        return BathSpec(self.family, coupling, self.cutoff, self.omega_ir, self.modes, self.delta_width)

    @classmethod
    def from_sum(cls, coupling, frequencies, delta_width, cutoff=np.inf):
        """Discrete bath with weights ``lam^2 / (2 w_n)`` (sub-ohmic sum)."""
        modes = tuple((w, coupling**2 / (2 * w)) for w in frequencies)
        return cls("discrete", coupling, cutoff, 0.0, modes, delta_width)


def _cutoff_factor(bath, w):
    if np.isinf(bath.cutoff):
        return np.ones_like(w)
    return np.exp(-w / bath.cutoff)


def _gauss(x, sigma):
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def odd_density(bath: BathSpec, omega) -> np.ndarray:
    """``S(w) = sign(w) J(|w|)`` for any real ``w`` (zero at ``w = 0``)."""
    w = np.asarray(omega, dtype=float)
    lam2 = bath.coupling**2
    if bath.family == "discrete":
        out = np.zeros_like(w)
        for wn, cn in bath.modes:
            out = out + cn * (_gauss(w - wn, bath.delta_width) - _gauss(w + wn, bath.delta_width))
        return out
    a = np.abs(w)
    cut = _cutoff_factor(bath, a)
    if bath.family == "ohmic_plus":
        return 0.5 * lam2 * w * cut
    # sub-ohmic: (lam^2/2) w / (w^2 + w_IR^2), odd in w
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * lam2 * w / (w * w + bath.omega_ir**2) * cut
    return np.where(w == 0, 0.0, out)


def density_slope_at_zero(bath: BathSpec) -> float:
    """``lim_{w->0} S(w) / w``; infinite for an unregulated sub-ohmic bath."""
    lam2 = bath.coupling**2
    if bath.family == "ohmic_plus":
        return 0.5 * lam2
    if bath.family == "sub_ohmic_minus":
        if bath.omega_ir == 0:
            return math.inf if lam2 > 0 else 0.0
        return 0.5 * lam2 / bath.omega_ir**2
    s = bath.delta_width
    return float(sum(2 * c * wn / s**2 * _gauss(wn, s) for wn, c in bath.modes))


def spectral_density(bath: BathSpec, omega) -> np.ndarray:
    """Spectral density ``J(w)`` for ``w > 0``.

    Raises
    ------
    ValueError
        If any ``w <= 0``.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0)):
        raise ValueError("spectral density is defined for w > 0 only")
    return odd_density(bath, w)


# ---------------------------------------------------------------------------
# time domain

def _thermal_density(bath, temperature):
    """``f(w) = J(w) coth(w / 2T)`` on ``w >= 0`` with its limit at zero."""
    slope = density_slope_at_zero(bath)

    def f(w):
        w = np.asarray(w, dtype=float)
        s = odd_density(bath, w)
        if temperature == 0:
            return s
        with np.errstate(divide="ignore", invalid="ignore"):
            out = s / np.tanh(w / (2 * temperature))
        return np.where(w == 0, 2 * temperature * slope, out)

    return f


def _check_nu_finite(bath, temperature):
    if bath.family == "sub_ohmic_minus" and bath.omega_ir == 0 and bath.coupling > 0:
        kind = "thermal" if temperature > 0 else "zero-temperature"
        raise DivergenceError(
            f"{kind} noise kernel of the sub-ohmic bath diverges in the infrared; set omega_ir > 0"
        )
    if np.isinf(bath.cutoff) and bath.family != "discrete" and bath.coupling > 0:
        raise DivergenceError("noise kernel needs a finite UV cutoff")


def _eta_closed(bath, tau):
    lam2 = bath.coupling**2
    lam = bath.cutoff
    if bath.family == "ohmic_plus":
        if np.isinf(lam):
            raise DivergenceError("ohmic dissipation kernel needs a finite UV cutoff")
        return -lam2 * lam**3 * tau / (1 + (lam * tau) ** 2) ** 2
    if bath.family == "sub_ohmic_minus" and bath.omega_ir == 0:
        if np.isinf(lam):
            return -0.25 * math.pi * lam2 * np.sign(tau)
        return -0.5 * lam2 * np.arctan(lam * tau)
    if bath.family == "sub_ohmic_minus" and np.isinf(lam):
        return -0.25 * math.pi * lam2 * np.exp(-bath.omega_ir * np.abs(tau)) * np.sign(tau)
    if bath.family == "discrete":
        out = np.zeros_like(tau)
        env = np.exp(-0.5 * (bath.delta_width * tau) ** 2)
        for wn, cn in bath.modes:
            out = out - cn * np.sin(wn * tau) * env
        return out
    return None


def _nu_closed(bath, tau, temperature):
    lam2 = bath.coupling**2
    if bath.family == "ohmic_plus" and temperature == 0:
        x = (bath.cutoff * tau) ** 2
        return 0.5 * lam2 * bath.cutoff**2 * (1 - x) / (1 + x) ** 2
    if bath.family == "discrete":
        out = np.zeros_like(tau)
        env = np.exp(-0.5 * (bath.delta_width * tau) ** 2)
        for wn, cn in bath.modes:
            c = 1.0 if temperature == 0 else 1.0 / math.tanh(wn / (2 * temperature))
            out = out + cn * c * np.cos(wn * tau) * env
        return out
    return None


def _quad_transform(f, tau, kind, bath, tol):
    cut = bath.cutoff if np.isfinite(bath.cutoff) else 1.0
    out = np.empty_like(tau)
    for i, t in enumerate(tau):
        out[i] = adaptive_spectral_integral(f, 0.0, cut, tol=tol, weight=kind, wvar=abs(t))
        if kind == "sin" and t < 0:
            out[i] = -out[i]
    return out


def eta_bath(bath: BathSpec, tau, odd=False, tol=1e-11):
    """Dissipation kernel ``eta(tau)``.

    Parameters
    ----------
    odd : bool
        Return the Theta-free odd extension ``-int J sin(w tau) dw`` instead of
        the causal kernel.
    """
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    if bath.is_zero:
        out = np.zeros_like(t)
    else:
        out = _eta_closed(bath, t)
        if out is None:
            out = -_quad_transform(lambda w: odd_density(bath, w), t, "sin", bath, tol)
    if not odd:
        out = np.where(t > 0, out, 0.0)
    return out if np.ndim(tau) else float(out[0])


def nu_bath(bath: BathSpec, tau, temperature, tol=1e-11):
    """Noise kernel ``nu(tau) = int J coth(w/2T) cos(w tau) dw`` (even in ``tau``)."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    t = np.abs(np.atleast_1d(np.asarray(tau, dtype=float)))
    if bath.is_zero:
        out = np.zeros_like(t)
    else:
        _check_nu_finite(bath, temperature)
        out = _nu_closed(bath, t, temperature)
        if out is None:
            out = _quad_transform(_thermal_density(bath, temperature), t, "cos", bath, tol)
    return out if np.ndim(tau) else float(out[0])


def _decay_rate(bath, temperature):
    """Distance of the nearest singularity of the spectral integrand from the real axis."""
    rates = []
    if bath.family == "sub_ohmic_minus" and bath.omega_ir > 0:
        rates.append(bath.omega_ir)
    if temperature > 0:
        rates.append(2 * math.pi * temperature)
    return min(rates) if rates else math.inf


def _one_sided_weights(n_points, order):
    """Finite-difference weights for the ``order``-th derivative at the left end."""
    k = np.arange(n_points, dtype=float)
    vander = np.vander(k, n_points, increasing=True).T
    rhs = np.zeros(n_points)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


def _fd_derivatives(f, eps):
    """``f(0), f'(0), f''(0), f'''(0)`` from one-sided differences with step ``eps``."""
    y = f(eps * np.arange(7))
    d = [float(_one_sided_weights(7, p) @ y) / eps**p for p in (1, 2, 3)]
    return float(y[0]), d[0], d[1], d[2]


def spectral_transform(f, grid: TimeGrid, kind, scale, rate=math.inf, tau_extent=None):
    """``int_0^inf f(w) cos(w tau_k) dw`` or with ``sin``, at ``tau_k = k dt``.

    The integrand is sampled on a fine uniform frequency grid whose spacing
    is tied to ``dt`` so that all lags follow from one FFT after folding the
    samples modulo the FFT length. Euler-Maclaurin terms at ``w = 0``
    remove the algebraic aliasing from the half-line endpoint.

    Parameters
    ----------
    scale : float
        Frequency scale beyond which ``f`` decays like ``exp(-w / scale)``.
    rate : float
        Exponential decay rate of the transform (nearest singularity of ``f``).
    """
    dt = grid.dt
    n = grid.n_points
    tau_max = grid.t_max if tau_extent is None else tau_extent
    period = 8 * tau_max
    if np.isfinite(rate):
        period = max(period, tau_max + 40.0 / rate)
    h = 2 * math.pi / period
    if np.isfinite(rate):
        h = min(h, rate / 4)
    h = min(h, scale / 50)
    w_top = 48.0 * scale
    n_fft = 1 << max(int(math.ceil(math.log2(2 * math.pi / (h * dt)))), int(math.ceil(math.log2(2 * n))))
    h = 2 * math.pi / (n_fft * dt)
    n_samp = int(math.ceil(w_top / h)) + 1
    if n_samp > 60_000_000:
        raise MemoryError("spectral transform needs too many frequency samples")
    w = h * np.arange(n_samp)
    y = f(w)
    y[0] *= 0.5
    folded = np.bincount(np.arange(n_samp) % n_fft, weights=y, minlength=n_fft)
    spec = np.fft.fft(folded)[:n]
    tau = grid.t
    f0, d1, d2, d3 = _fd_derivatives(f, min(h, scale / 200, rate / 200 if np.isfinite(rate) else h))
    if kind == "cos":
        g1, g3, g5 = d1, d3 - 3 * tau**2 * d1, -10 * tau**2 * d3 + 5 * tau**4 * d1
        out = h * spec.real
    else:
        g1, g3, g5 = tau * f0, 3 * tau * d2 - tau**3 * f0, -10 * tau**3 * d2 + tau**5 * f0
        out = -h * spec.imag
    # Euler-Maclaurin terms of g = f(w) trig(w tau) at w = 0 (fifth derivatives of f dropped)
    out = out + h**2 / 12 * g1 - h**4 / 720 * g3 + h**6 / 30240 * g5
    return out


def eta_kernel(bath: BathSpec, grid: TimeGrid, odd=False) -> Kernel1D:
    """Dissipation kernel on a lag grid (causal, or its odd extension)."""
    t = grid.t
    if bath.is_zero:
        vals = np.zeros_like(t)
    else:
        vals = _eta_closed(bath, t)
        if vals is None:
            s = spectral_transform(lambda w: odd_density(bath, w), grid, "sin", bath.cutoff,
                                   _decay_rate(bath, 0.0))
            vals = -s
    vals = np.array(vals, dtype=float)
    vals[0] = 0.0
    return Kernel1D(grid, vals, "odd" if odd else "causal")


def nu_kernel(bath: BathSpec, grid: TimeGrid, temperature) -> Kernel1D:
    """Noise kernel on a lag grid (even)."""
    t = grid.t
    if bath.is_zero:
        return Kernel1D(grid, np.zeros_like(t), "even")
    _check_nu_finite(bath, temperature)
    vals = _nu_closed(bath, t, temperature)
    if vals is None:
        vals = spectral_transform(_thermal_density(bath, temperature), grid, "cos", bath.cutoff,
                                  _decay_rate(bath, temperature))
    return Kernel1D(grid, vals, "even")


def _hat_factor(w, dt):
    """Transform of the unit-area hat of half-width ``dt``: ``sinc^2(w dt / 2)``."""
    return np.sinc(0.5 * np.asarray(w) * dt / math.pi) ** 2


def _half_hat_factor(w, dt, kind):
    """``(2/dt) int_0^dt (1 - tau/dt) trig(w tau) dtau`` with the small-``w dt`` series."""
    x = np.asarray(w, dtype=float) * dt
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    if kind == "sin":
        return np.where(small, x / 3 - x**3 / 60, 2 * (xs - np.sin(xs)) / xs**2)
    return np.where(small, 1 - x**2 / 12, 2 * (1 - np.cos(xs)) / xs**2)


def hat_kernel(bath: BathSpec, grid: TimeGrid, kind, temperature=0.0) -> np.ndarray:
    """Hat-function averages of ``eta`` (``kind='eta'``) or ``nu`` (``kind='nu'``).

    Entry ``k >= 1`` is ``(1/dt) int K(tau) hat(tau - k dt) dtau``; entry 0 is
    the half-hat average ``(2/dt) int_0^dt (1 - tau/dt) K(tau) dtau``. Used as
    product-integration weights, they integrate a sharp kernel exactly against
    the piecewise-linear interpolant of a smooth factor. Kernels without a
    finite cutoff fall back to point samples.
    """
    if kind not in ("eta", "nu"):
        raise ValueError("kind must be 'eta' or 'nu'")
    dt = grid.dt
    if bath.is_zero:
        return np.zeros(grid.n_points)
    trig = "sin" if kind == "eta" else "cos"
    if kind == "nu":
        _check_nu_finite(bath, temperature)
    if bath.family == "discrete":
        t = grid.t
        out = np.zeros(grid.n_points)
        env = np.exp(-0.5 * (bath.delta_width * t) ** 2)
        for wn, cn in bath.modes:
            c = cn
            if kind == "nu" and temperature > 0:
                c = cn / math.tanh(wn / (2 * temperature))
            f = np.sin(wn * t) if kind == "eta" else np.cos(wn * t)
            vals = c * _hat_factor(wn, dt) * f * env
            vals[0] = c * _half_hat_factor(wn, dt, trig)
            out += -vals if kind == "eta" else vals
        return out
    if not np.isfinite(bath.cutoff):
        k = eta_kernel(bath, grid) if kind == "eta" else nu_kernel(bath, grid, temperature)
        return np.array(k.values)
    if kind == "eta":
        density = lambda w: odd_density(bath, w)  # noqa: E731
        rate = _decay_rate(bath, 0.0)
    else:
        density = _thermal_density(bath, temperature)
        rate = _decay_rate(bath, temperature)
    vals = spectral_transform(lambda w: density(w) * _hat_factor(w, dt), grid, trig, bath.cutoff, rate)
    vals = np.array(vals, dtype=float)
    vals[0] = adaptive_spectral_integral(lambda w: density(w) * _half_hat_factor(w, dt, trig), 0.0,
                                         bath.cutoff, tol=1e-12 * max(1.0, bath.coupling**2 * bath.cutoff**2))
    return -vals if kind == "eta" else vals


# ---------------------------------------------------------------------------
# frequency domain

_ASYMPTOTIC_X = 400.0


def _pv_kernel_sum(x):
    """``exp(-x) Ei(x) + exp(x) E1(x)`` for ``x >= 0`` (zero at ``x = 0``)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    big = x > _ASYMPTOTIC_X
    mid = (x > 0) & ~big
    xm = x[mid]
    out[mid] = np.exp(-xm) * special.expi(xm) + np.exp(xm) * special.exp1(xm)
    xb = x[big]
    inv = 1.0 / xb
    # asymptotic series: odd powers cancel
    out[big] = 2 * inv * (1 + inv**2 * (2 + inv**2 * (24 + inv**2 * 720)))
    return out


def _pv_inverse_quadratic(omega, s):
    """``P int_0^inf exp(-s x) / (x^2 - w^2) dx`` for ``w > 0``."""
    return -_pv_kernel_sum(s * omega) / (2 * omega)


def _lorentz_laplace(a, s):
    """``int_0^inf exp(-s x) / (x^2 + a^2) dx`` for ``a > 0``."""
    z = s * a
    if z == 0:
        return math.pi / (2 * a)
    si, ci = special.sici(z)
    return (ci * math.sin(z) - (si - math.pi / 2) * math.cos(z)) / a


def _re_eta(bath, omega):
    w = np.abs(np.asarray(omega, dtype=float))
    lam2 = bath.coupling**2
    if bath.family == "discrete":
        s = bath.delta_width
        out = np.zeros_like(w)
        c = math.sqrt(2) / (s * math.pi)
        for wn, cn in bath.modes:
            hm = -c * special.dawsn((w - wn) / (s * math.sqrt(2)))
            hp = -c * special.dawsn((w + wn) / (s * math.sqrt(2)))
            out = out + cn * (hm - hp)
        return -0.5 * math.pi * out
    if np.isinf(bath.cutoff):
        raise DivergenceError("real part of the dissipation spectrum needs a finite UV cutoff")
    s = 1.0 / bath.cutoff
    pos = w > 0
    pv = np.zeros_like(w)
    pv[pos] = _pv_inverse_quadratic(w[pos], s)
    if bath.family == "ohmic_plus":
        # -(lam^2/2) [1/s + w^2 P int exp(-sx)/(x^2 - w^2)]
        return -0.5 * lam2 * (bath.cutoff + w * w * pv)
    a = bath.omega_ir
    if a == 0:
        if np.any(~pos) and lam2 > 0:
            raise DivergenceError("static response of the unregulated sub-ohmic bath diverges")
        return -0.5 * lam2 * pv
    lor = _lorentz_laplace(a, s)
    return -0.5 * lam2 * (a * a * lor + w * w * pv) / (w * w + a * a)


def eta_bath_freq(bath: BathSpec, omega) -> np.ndarray:
    """Dissipation spectrum ``eta(w)``; real part in closed form."""
    w = np.asarray(omega, dtype=float)
    im = -0.5 * math.pi * odd_density(bath, w)
    if bath.is_zero:
        return np.zeros(w.shape, dtype=complex)
    return _re_eta(bath, w) + 1j * im


def nu_bath_freq(bath: BathSpec, omega, temperature) -> np.ndarray:
    """Noise spectrum ``nu(w) = pi coth(w/2T) S(w)``, even and non-negative."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    w = np.asarray(omega, dtype=float)
    if bath.is_zero:
        return np.zeros(w.shape)
    if temperature > 0 and bath.family == "sub_ohmic_minus" and bath.omega_ir == 0:
        raise DivergenceError("thermal noise spectrum of the sub-ohmic bath needs omega_ir > 0")
    s = odd_density(bath, w)
    if temperature == 0:
        return math.pi * np.abs(s)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = math.pi * s / np.tanh(w / (2 * temperature))
    return np.where(w == 0, 2 * math.pi * temperature * density_slope_at_zero(bath), out)


def _regulator_mask(bath, omega):
    if bath.family == "sub_ohmic_minus":
        return np.abs(omega) < bath.omega_ir
    return np.zeros(np.shape(omega), dtype=bool)


def bath_spectra(bath: BathSpec, freq_grid: FreqGrid, temperature):
    """``(eta(w), nu(w))`` as :class:`Spectrum` objects on a grid."""
    w = freq_grid.omega
    flag = _regulator_mask(bath, w)
    meta = {"family": bath.family, "regulator_dominated_points": int(np.count_nonzero(flag))}
    eta = Spectrum(freq_grid, eta_bath_freq(bath, w), dict(meta))
    nu = Spectrum(freq_grid, nu_bath_freq(bath, w, temperature), dict(meta, temperature=temperature))
    return eta, nu


def fdr_residual(nu_values, im_eta_values, omega, temperature, mask=None, identity="bath FDR"):
    """Residual of ``nu(w) = -2 coth(w/2T) Im eta(w)`` (pointwise relative)."""
    w = np.asarray(omega, dtype=float)
    rhs = -2 * coth_thermal(w, temperature) * np.asarray(im_eta_values)
    base = w != 0
    mask = base if mask is None else (mask & base)
    return residual_report(identity, np.asarray(nu_values), rhs, mask, "pointwise",
                           {"temperature": temperature})


def check_bath_fdr(bath: BathSpec, grid: FreqGrid, temperature, omega_max=None):
    """Bath fluctuation-dissipation residual over ``|w| > omega_ir``.

    ``omega_max`` optionally restricts the check to ``|w| <= omega_max``.
    """
    w = grid.omega
    mask = np.abs(w) > bath.omega_ir
    if omega_max is not None:
        mask &= np.abs(w) <= omega_max
    im = -0.5 * math.pi * odd_density(bath, w)
    nu = nu_bath_freq(bath, w, temperature)
    return fdr_residual(nu, im, w, temperature, mask, f"bath FDR ({bath.family})")
