import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qbm.baths import (
    BathSpec,
    bath_spectra,
    check_bath_fdr,
    eta_bath,
    eta_bath_freq,
    eta_kernel,
    fdr_residual,
    nu_bath,
    nu_bath_freq,
    nu_kernel,
    spectral_density,
)
from qbm.errors import DivergenceError
from qbm.numerics import FreqGrid, TimeGrid, adaptive_spectral_integral

OHMIC = BathSpec("ohmic_plus", 1.0, 1.0)
SUB = BathSpec("sub_ohmic_minus", 1.0, 1.0)


def test_spectral_density_values():
    assert spectral_density(BathSpec("ohmic_plus", 1.0, math.inf), 1.0) == pytest.approx(0.5)
    assert spectral_density(BathSpec("sub_ohmic_minus", 1.0, math.inf), 2.0) == pytest.approx(0.25)
    assert spectral_density(OHMIC, 1.0) == pytest.approx(0.5 * math.exp(-1), abs=1e-12)
    assert spectral_density(OHMIC, 1.0) == pytest.approx(0.18394, abs=1e-5)
    with pytest.raises(ValueError):
        spectral_density(OHMIC, 0.0)


def test_eta_values():
    assert eta_bath(OHMIC, 1.0) == pytest.approx(-0.25, abs=1e-12)
    assert eta_bath(SUB, 1.0) == pytest.approx(-0.5 * math.atan(1.0), abs=1e-12)
    assert eta_bath(SUB, 1.0) == pytest.approx(-0.39270, abs=1e-5)
    for bath in (OHMIC, SUB, BathSpec("sub_ohmic_minus", 1.0, 1.0, 0.3)):
        assert eta_bath(bath, -0.5) == 0.0


@pytest.mark.parametrize("bath", [OHMIC, SUB], ids=["ohmic", "sub_ohmic"])
def test_eta_closed_form_matches_quadrature(bath):
    tau = np.linspace(0.05, 10.0, 100)
    closed = eta_bath(bath, tau)
    quad = np.array([-adaptive_spectral_integral(lambda w: spectral_density(bath, np.maximum(w, 1e-300)), 0.0, 1.0,
                                                 tol=1e-11, weight="sin", wvar=t) for t in tau])
    assert np.max(np.abs(closed - quad)) < 1e-8


def test_nu_values():
    assert nu_bath(OHMIC, 0.0, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert abs(nu_bath(OHMIC, 1.0, 0.0)) < 1e-10
    bath = BathSpec("sub_ohmic_minus", 0.3, 5.0, 0.2)
    tau = np.array([0.3, 1.7, 4.0])
    assert np.array_equal(nu_bath(bath, tau, 0.7), nu_bath(bath, -tau, 0.7))


def test_unregulated_sub_ohmic_noise_diverges():
    with pytest.raises(DivergenceError):
        nu_bath(SUB, 1.0, 1.0)
    with pytest.raises(DivergenceError):
        nu_kernel(SUB, TimeGrid(1.0, 10), 0.0)
    with pytest.raises(DivergenceError):
        nu_bath_freq(SUB, [1.0], 0.5)


@pytest.mark.parametrize("T", [0.0, 0.5, 2.0])
def test_kernels_on_grid_match_quadrature(T):
    bath = BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.05)
    grid = TimeGrid(51.2, 512)
    idx = np.array([1, 7, 40, 200, 512])
    ek = eta_kernel(bath, grid).values[idx]
    nk = nu_kernel(bath, grid, T).values[idx]
    assert np.max(np.abs(ek - eta_bath(bath, grid.t[idx]))) < 1e-9
    assert np.max(np.abs(nk - nu_bath(bath, grid.t[idx], T))) < 1e-8 * max(1.0, np.max(np.abs(nk)))


def test_eta_freq_values():
    assert eta_bath_freq(OHMIC, 1.0).imag == pytest.approx(-0.5 * math.pi * 0.5 * math.exp(-1), abs=1e-12)
    assert eta_bath_freq(OHMIC, 1.0).imag == pytest.approx(-0.28893, abs=1e-5)
    assert eta_bath_freq(OHMIC, 0.0).imag == 0.0
    w = FreqGrid(20.0, 400).omega
    for bath in (OHMIC, BathSpec("sub_ohmic_minus", 1.0, 1.0, 0.1)):
        im = eta_bath_freq(bath, w).imag
        assert np.max(np.abs(im[::-1] + im)) < 1e-12


def test_eta_freq_real_part_is_hilbert_partner():
    # Re eta(w) against direct transform of the closed-form kernel
    bath = BathSpec("ohmic_plus", 1.0, 2.0)
    for w in (0.0, 0.7, 3.0):
        direct = adaptive_spectral_integral(lambda t: eta_bath(bath, t), 0.0, 2.0, tol=1e-10, weight="cos", wvar=w)
        assert eta_bath_freq(bath, w).real == pytest.approx(direct, abs=1e-8)


def test_nu_freq_values():
    assert nu_bath_freq(OHMIC, 1.0, 0.0) == pytest.approx(math.pi * 0.5 * math.exp(-1), abs=1e-12)
    assert nu_bath_freq(OHMIC, 1.0, 0.0) == pytest.approx(0.57786, abs=1e-5)
    w = FreqGrid(20.0, 400).omega
    nu = nu_bath_freq(OHMIC, w, 1.3)
    assert np.max(np.abs(nu - nu[::-1])) < 1e-12
    assert nu_bath_freq(OHMIC, [1e-9], 0.0)[0] == pytest.approx(0.5 * math.pi * 1e-9, rel=1e-8)


@pytest.mark.parametrize("T", [0.0, 0.1, 1.0, 10.0])
@pytest.mark.parametrize("bath", [BathSpec("ohmic_plus", 0.1, 10.0), BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.05)],
                         ids=["ohmic", "sub_ohmic"])
def test_bath_fdr(bath, T):
    rep = check_bath_fdr(bath, FreqGrid(20.0, 4000), T, omega_max=bath.cutoff)
    assert rep.n_points > 0
    assert rep.max_residual < 1e-8


def test_bath_fdr_detects_fault():
    fg = FreqGrid(10.0, 1000)
    w = fg.omega
    nu = 1.01 * nu_bath_freq(OHMIC, w, 1.0)
    rep = fdr_residual(nu, eta_bath_freq(OHMIC, w).imag, w, 1.0)
    assert rep.max_residual == pytest.approx(0.01 / 1.01, rel=1e-6)
    assert not rep.passed(1e-6)


@given(st.floats(0.01, 20.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_noise_grows_with_temperature(w, t1, t2):
    lo, hi = sorted((t1, t2))
    bath = BathSpec("sub_ohmic_minus", 0.5, 3.0, 0.2)
    a = nu_bath_freq(bath, [w], lo)[0]
    b = nu_bath_freq(bath, [w], hi)[0]
    assert a >= 0 and b >= a * (1 - 1e-14)


@given(st.floats(0.001, 50.0), st.sampled_from(["ohmic_plus", "sub_ohmic_minus"]), st.floats(0.1, 20.0))
def test_dissipation_spectrum_odd(w, family, cutoff):
    bath = BathSpec(family, 0.4, cutoff, 0.1)
    v = eta_bath_freq(bath, np.array([w, -w]))
    assert v[0].imag <= 0
    assert v[0].imag == -v[1].imag
    assert v[0].real == pytest.approx(v[1].real, rel=1e-12, abs=1e-15)


def test_discrete_bath_is_mode_sum():
    freqs = [0.5, 1.3, 2.2]
    bath = BathSpec.from_sum(0.3, freqs, delta_width=1e-3)
    grid = TimeGrid(10.0, 1000)
    t = grid.t
    env = np.exp(-0.5 * (1e-3 * t) ** 2)
    c = [0.09 / (2 * w) for w in freqs]
    eta_direct = -sum(cn * np.sin(wn * t) for wn, cn in zip(freqs, c)) * env
    T = 0.4
    nu_direct = sum(cn / math.tanh(wn / (2 * T)) * np.cos(wn * t) for wn, cn in zip(freqs, c)) * env
    np.testing.assert_allclose(eta_kernel(bath, grid).values[1:], eta_direct[1:], atol=1e-14)
    np.testing.assert_allclose(nu_kernel(bath, grid, T).values, nu_direct, atol=1e-14)


def test_regulator_points_flagged():
    bath = BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.05)
    eta, nu = bath_spectra(bath, FreqGrid(1.0, 200), 1.0)
    assert eta.meta["regulator_dominated_points"] == 9
    assert np.all(nu.values.real >= 0)


def test_zero_coupling_gives_zero_kernels():
    bath = BathSpec("ohmic_plus", 0.0, 10.0)
    grid = TimeGrid(5.0, 50)
    assert not np.any(eta_kernel(bath, grid).values)
    assert not np.any(nu_kernel(bath, grid, 1.0).values)


def test_invalid_bath():
    with pytest.raises(ValueError):
        BathSpec("cubic", 0.1)
    with pytest.raises(ValueError):
        BathSpec("ohmic_plus", -0.1)
    with pytest.raises(ValueError):
        BathSpec("discrete", 0.1, modes=((1.0, 1.0),))


@pytest.mark.parametrize("kind, temperature", [("eta", 0.0), ("nu", 0.0), ("nu", 1.0)])
def test_hat_kernel_matches_quadrature(bath_plus, kind, temperature):
    from scipy.integrate import quad

    from qbm.baths import hat_kernel
    from qbm.numerics import TimeGrid

    grid = TimeGrid(3.2, 32)
    dt = grid.dt
    hat = hat_kernel(bath_plus, grid, kind, temperature)
    if kind == "eta":
        f = lambda t: float(eta_bath(bath_plus, abs(t)))
    else:
        f = lambda t: float(nu_bath(bath_plus, abs(t), temperature))
    ref0 = 2 / dt * quad(lambda s: (1 - s / dt) * f(s), 0, dt, epsabs=1e-13, limit=200)[0]
    assert hat[0] == pytest.approx(ref0, rel=1e-8, abs=1e-12)
    for k in (1, 2, 7, 31):
        ref = quad(lambda s: (1 - abs(s) / dt) * f(k * dt + s), -dt, dt, points=[0.0], epsabs=1e-13, limit=200)[0] / dt
        assert hat[k] == pytest.approx(ref, rel=1e-7, abs=1e-12)


def test_hat_kernel_zero_coupling():
    from qbm.baths import hat_kernel
    from qbm.numerics import TimeGrid

    bath = BathSpec("ohmic_plus", 0.0, 10.0)
    assert not np.any(hat_kernel(bath, TimeGrid(1.0, 10), "nu", 1.0))
