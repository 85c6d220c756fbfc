import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qbm.baths import BathSpec, eta_bath_freq, eta_kernel
from qbm.errors import FactorizationError, GridMismatchError, IntegrationError, NyquistError
from qbm.numerics import (
    FreqGrid,
    Kernel1D,
    Kernel2D,
    Spectrum,
    TimeGrid,
    adaptive_spectral_integral,
    coth_thermal,
    fourier_of_kernel,
    freq_convolution,
    heaviside,
    inverse_fourier,
    kramers_kronig,
    psd_factorize,
)


def test_grids():
    g = TimeGrid(1.0, 4)
    assert g.dt == 0.25 and g.n_points == 5
    np.testing.assert_allclose(g.t, [0, 0.25, 0.5, 0.75, 1.0])
    f = FreqGrid(2.0, 4)
    assert f.omega[f.zero_index] == 0.0
    assert f.index_of(1.0) == 3
    with pytest.raises(GridMismatchError):
        f.index_of(0.3)
    with pytest.raises(ValueError):
        FreqGrid(1.0, 3)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 10)


def test_step_and_coth_conventions():
    assert heaviside(0.0) == 0.5
    np.testing.assert_array_equal(coth_thermal([-2.0, 0.0, 3.0], 0.0), [-1.0, 0.0, 1.0])
    c = coth_thermal([0.0, 1.0], 1.0)
    assert math.isnan(c[0]) and c[1] == pytest.approx(1 / math.tanh(0.5))


def test_kernel_parity():
    g = TimeGrid(1.0, 2)
    k = Kernel1D(g, [1.0, 2.0, 3.0], "causal")
    np.testing.assert_array_equal(k.at_lags([-1, 0, 2]), [0.0, 0.5, 3.0])
    o = Kernel1D(g, [0.0, 2.0, 3.0], "odd")
    np.testing.assert_array_equal(o.at_lags([-2, 1]), [-3.0, 2.0])
    with pytest.raises(ValueError):
        Kernel1D(g, [1.0, 2.0, 3.0], "odd")


def test_fourier_exponential():
    g = TimeGrid(40.0, 4000)
    k = Kernel1D(g, np.exp(-g.t), "causal")
    fg = FreqGrid(5.0, 500)
    s = fourier_of_kernel(k, fg)
    assert np.max(np.abs(s.values - 1 / (1 - 1j * fg.omega))) < 1e-4


def test_fourier_zero():
    g = TimeGrid(10.0, 100)
    s = fourier_of_kernel(Kernel1D(g, np.zeros(101), "even"), FreqGrid(5.0, 50))
    assert np.all(s.values == 0)


def test_fourier_sign_of_sub_ohmic_dissipation():
    # a small regulator makes the kernel decay inside the window
    bath = BathSpec("sub_ohmic_minus", 1.0, 1.0, 0.05)
    g = TimeGrid(600.0, 60000)
    s = fourier_of_kernel(eta_kernel(bath, g), FreqGrid(5.0, 200))
    pos = s.omega > 0
    assert np.all(s.imag[pos] < 0)
    exact = eta_bath_freq(bath, s.omega[pos]).imag
    assert np.max(np.abs(s.imag[pos] - exact)) < 1e-4 * np.max(np.abs(exact))


def test_fourier_refuses_aliasing():
    g = TimeGrid(10.0, 10)
    with pytest.raises(NyquistError):
        fourier_of_kernel(Kernel1D(g, np.zeros(11), "causal"), FreqGrid(10.0, 20))


def test_parseval_round_trip():
    g = TimeGrid(20.0, 2000)
    x = np.exp(-0.5 * g.t**2) * np.cos(2 * g.t)
    s = fourier_of_kernel(Kernel1D(g, x, "even"), FreqGrid(30.0, 1200))
    back = inverse_fourier(s, g)
    assert np.max(np.abs(back.real - x)) / np.max(np.abs(x)) < 1e-6
    assert np.max(np.abs(back.imag)) < 1e-6


def test_convolution_identity():
    fg = FreqGrid(10.0, 200)
    a = Spectrum(fg, np.exp(-fg.omega**2) * (1 + 0.5j * fg.omega))
    delta = np.zeros(fg.n_points)
    delta[fg.zero_index] = 2 * math.pi / fg.d_omega
    out = freq_convolution(a, Spectrum(fg, delta))
    np.testing.assert_allclose(out.values, a.values, atol=1e-12)


def test_convolution_gaussian():
    fg = FreqGrid(20.0, 4000)
    a = Spectrum(fg, np.exp(-0.5 * fg.omega**2))
    out = freq_convolution(a, a)
    expected = np.exp(-0.25 * fg.omega**2) / (2 * math.sqrt(math.pi))
    assert np.max(np.abs(out.values - expected)) < 1e-6


def test_convolution_grid_mismatch():
    with pytest.raises(GridMismatchError):
        freq_convolution(Spectrum(FreqGrid(1.0, 4), np.zeros(5)), Spectrum(FreqGrid(2.0, 4), np.zeros(5)))


@given(arrays(float, 33, elements=st.floats(-1, 1)), arrays(float, 33, elements=st.floats(-1, 1)))
def test_convolution_commutes(a, b):
    fg = FreqGrid(4.0, 32)
    ab = freq_convolution(Spectrum(fg, a), Spectrum(fg, b)).values
    ba = freq_convolution(Spectrum(fg, b), Spectrum(fg, a)).values
    assert np.max(np.abs(ab - ba)) < 1e-12


@given(arrays(float, 41, elements=st.floats(-1, 1)), arrays(float, 41, elements=st.floats(-1, 1)),
       st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(["causal", "even"]))
def test_fourier_linear_and_hermitian(x, y, a, b, support):
    g = TimeGrid(4.0, 40)
    fg = FreqGrid(6.0, 30)
    fx = fourier_of_kernel(Kernel1D(g, x, support), fg)
    fy = fourier_of_kernel(Kernel1D(g, y, support), fg)
    fz = fourier_of_kernel(Kernel1D(g, a * x + b * y, support), fg)
    scale = 1 + np.max(np.abs(fx.values)) + np.max(np.abs(fy.values))
    assert np.max(np.abs(fz.values - a * fx.values - b * fy.values)) < 1e-10 * scale * (1 + abs(a) + abs(b))
    assert fz.hermitian_residual() < 1e-10 * scale * (1 + abs(a) + abs(b))


def test_kramers_kronig_lorentzian():
    fg = FreqGrid(2000.0, 400000)
    w = fg.omega
    resp = 1 / (1 - w**2 - 0.5j * w)
    re = kramers_kronig(resp.imag, fg)
    band = np.abs(w) <= 5
    assert np.max(np.abs(re[band] - resp.real[band])) < 1e-3 * np.max(np.abs(resp.real))


def test_adaptive_integrals():
    assert adaptive_spectral_integral(lambda w: np.exp(-w), 0.0, 1.0) == pytest.approx(1.0, abs=1e-10)
    v = adaptive_spectral_integral(lambda w: w * np.exp(-w), 0.0, 1.0, weight="sin", wvar=1.0)
    assert v == pytest.approx(0.5, abs=1e-10)
    v = adaptive_spectral_integral(lambda w: np.exp(-w) / w, 0.0, 1.0, weight="sin", wvar=1.0)
    assert v == pytest.approx(math.pi / 4, abs=1e-10)


def test_adaptive_integral_reports_failure():
    with pytest.raises(IntegrationError) as info:
        adaptive_spectral_integral(lambda w: 1.0 / np.sqrt(w) + np.sin(50 * w) / (1 + w) ** 0.1, 0.0, 1.0,
                                   tol=1e-14, limit=5)
    assert info.value.estimate is not None and info.value.error > 0


def test_psd_identity_and_two_by_two():
    f = psd_factorize(np.eye(4))
    np.testing.assert_array_equal(f.factor, np.eye(4))
    assert f.jitter == 0.0
    k = np.array([[2.0, 1.0], [1.0, 2.0]])
    f = psd_factorize(k)
    assert np.max(np.abs(f.factor @ f.factor.T - k)) < 1e-12 and f.jitter == 0.0


def test_psd_jitter_on_roundoff(rng):
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    lam = np.array([-1e-9, 0.1, 0.5, 1.0, 1.0, 2.0])
    k = (q * lam) @ q.T
    f = psd_factorize(k, jitter_max=1e-8)
    assert 0 < f.jitter <= 1e-8
    assert f.min_eigenvalue == pytest.approx(-1e-9, abs=1e-12)
    with pytest.raises(FactorizationError) as info:
        psd_factorize((q * np.array([-1e-3, 1, 1, 1, 1, 1])) @ q.T, jitter_max=1e-8)
    assert info.value.min_eigenvalue == pytest.approx(-1e-3, rel=1e-6)


def test_kernel2d_asymmetry():
    g = TimeGrid(1.0, 2)
    k = Kernel2D(g, np.arange(9.0).reshape(3, 3))
    assert k.asymmetry() > 0
    assert Kernel2D(g, np.zeros((3, 3))).asymmetry() == 0.0
