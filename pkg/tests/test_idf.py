import math

import numpy as np
import pytest

from qbm.baths import BathSpec, bath_spectra, nu_kernel
from qbm.errors import InstabilityError, MemoryBudgetError, PoleError, StepSizeError
from qbm.idf import (
    OscillatorSpec,
    check_idf_fdr,
    green_freq,
    green_spectrum,
    green_time,
    homogeneous_basis,
    initial_correlator,
    nu_gg_finite,
    nu_gg_freq,
    nu_gg_stationary,
    renormalized_frequency,
)
from qbm.numerics import FreqGrid, Kernel1D, TimeGrid, fourier_of_kernel, kramers_kronig, min_eigenvalue

IDF = OscillatorSpec(1.0, 1.0)
FREE = BathSpec("sub_ohmic_minus", 0.0, 10.0)
WEAK = BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.05)
STRONG = BathSpec("sub_ohmic_minus", 0.5, 10.0, 0.6)


def test_green_freq_free_values():
    assert green_freq(IDF, FREE, 0.0) == pytest.approx(1.0 + 0j)
    assert green_freq(IDF, FREE, 2.0) == pytest.approx(-1 / 3)
    with pytest.raises(PoleError):
        green_freq(IDF, FREE, 1.0)


def test_green_freq_damped_on_resonance():
    g = green_freq(IDF, BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.01), 1.0)
    assert np.isfinite(g) and g.imag > 0


def test_renormalized_frequency():
    assert renormalized_frequency(IDF, FREE, 1.0) == 1.0
    assert renormalized_frequency(IDF, WEAK, 1.0) == pytest.approx(1.0, rel=1e-2)
    with pytest.raises(InstabilityError):
        renormalized_frequency(IDF, BathSpec("sub_ohmic_minus", 0.5, 10.0, 0.05), 0.0)


def test_unstable_regulator_refused():
    # a tiny regulator makes the static stiffness negative at this coupling
    with pytest.raises(InstabilityError):
        green_time(IDF, BathSpec("sub_ohmic_minus", 0.1, 10.0, 0.01), TimeGrid(10.0, 100))


def test_green_time_initial_conditions():
    for dt in (0.01, 0.005):
        grid = TimeGrid(5.0, int(round(5.0 / dt)))
        G = green_time(OscillatorSpec(2.0, 1.0), WEAK, grid).G.values
        assert G[0] == 0.0
        assert abs((G[1] - G[0]) / dt - 0.5) < 2 * dt


def test_free_propagator_and_basis():
    grid = TimeGrid(20.0, 20000)
    prop = green_time(OscillatorSpec(2.0, 1.5), FREE, grid)
    t = grid.t
    assert np.max(np.abs(prop.G.values - np.sin(1.5 * t) / 3.0)) < 1e-5
    assert np.max(np.abs(prop.u.values - np.cos(1.5 * t))) < 1e-5
    assert prop.G_bar is None and prop.decay_rate == 0.0


def test_basis_decays():
    grid = TimeGrid(1000.0, 10000)
    u, v = homogeneous_basis(IDF, WEAK, grid)
    early = np.max(np.abs(v.values[:200]))
    late = np.max(np.abs(v.values[-500:]))
    assert late < 1e-2 * early
    assert np.max(np.abs(u.values[-500:])) < 1e-2


def test_step_size_guard():
    with pytest.raises(StepSizeError) as info:
        green_time(IDF, BathSpec("sub_ohmic_minus", 0.1, 100.0, 0.05), TimeGrid(10.0, 200))
    assert info.value.recommended_dt == pytest.approx(0.005)


def test_dual_representation():
    grid = TimeGrid(200.0, 40000)
    prop = green_time(IDF, STRONG, grid)
    fg = FreqGrid(5.0, 500)
    from_time = fourier_of_kernel(prop.G, fg).values
    closed = green_spectrum(IDF, STRONG, fg).values
    assert np.max(np.abs(from_time - closed)) < 1e-3 * np.max(np.abs(closed))


def test_kramers_kronig_consistency():
    fg = FreqGrid(20.0, 400000)
    G = green_spectrum(IDF, WEAK, fg)
    re = kramers_kronig(G.imag, fg)
    band = np.abs(fg.omega) <= 3
    assert np.max(np.abs(re[band] - G.real[band])) < 1e-3 * np.max(np.abs(G.values))


@pytest.mark.parametrize("T", [0.0, 0.1, 1.0, 10.0])
def test_idf_fdr(T):
    fg = FreqGrid(200.0, 20000)
    G = green_spectrum(IDF, WEAK, fg)
    _, nm = bath_spectra(WEAK, fg, T)
    rep = check_idf_fdr(G, nm, T)
    assert rep.max_residual < 1e-8
    primary, _ = nu_gg_freq(G, nm, T)
    assert np.all(primary.real >= 0)


def test_initial_correlator():
    grid = TimeGrid(10.0, 1000)
    prop = green_time(IDF, FREE, grid)
    qq = initial_correlator(IDF, 0.0, prop.u, prop.v)
    assert qq.values[0, 0] == pytest.approx(0.5)
    t = grid.t
    assert np.max(np.abs(qq.values - 0.5 * np.cos(t[:, None] - t[None, :]))) < 1e-4
    qq_hot = initial_correlator(IDF, 2.0, prop.u, prop.v)
    assert qq_hot.values[0, 0] == pytest.approx(0.5 / math.tanh(0.25))


def test_initial_correlator_decays():
    grid = TimeGrid(60.0, 1200)
    prop = green_time(IDF, STRONG, grid)
    diag = np.diag(initial_correlator(IDF, 1.0, prop.u, prop.v).values)
    assert diag[-1] < 1e-3 * diag[0]


def test_nu_gg_zero_and_brute_force():
    grid = TimeGrid(0.2, 2)
    prop = green_time(IDF, FREE, grid)
    zero = nu_gg_finite(prop, Kernel1D(grid, np.zeros(3), "even"))
    assert not np.any(zero.values)
    ones = nu_gg_finite(prop, Kernel1D(grid, np.ones(3), "even")).values
    G, dt = prop.G.values, grid.dt
    brute = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            wi = np.full(i + 1, dt)
            wi[[0, -1]] *= 0.5
            wj = np.full(j + 1, dt)
            wj[[0, -1]] *= 0.5
            a = sum(wi[k] * G[i - k] for k in range(i + 1)) if i else 0.0
            b = sum(wj[k] * G[j - k] for k in range(j + 1)) if j else 0.0
            brute[i, j] = a * b
    np.testing.assert_allclose(ones, brute, atol=1e-15)


def test_nu_gg_constant_noise_converges():
    grid = TimeGrid(3.0, 600)
    prop = green_time(IDF, FREE, grid)
    ngg = nu_gg_finite(prop, Kernel1D(grid, np.ones(grid.n_points), "even")).values
    t = grid.t
    exact = np.outer(1 - np.cos(t), 1 - np.cos(t))
    assert np.max(np.abs(ngg - exact)) < 1e-4


def test_nu_gg_finite_is_psd():
    grid = TimeGrid(51.2, 512)
    prop = green_time(IDF, WEAK, grid)
    ngg = nu_gg_finite(prop, nu_kernel(WEAK, grid, 1.0)).values
    assert min_eigenvalue(ngg) > -1e-10 * np.max(np.abs(ngg))
    assert np.max(np.abs(ngg - ngg.T)) == 0.0


def test_nu_gg_becomes_stationary():
    T = 1.0
    grid = TimeGrid(80.0, 1600)
    prop = green_time(IDF, STRONG, grid)
    finite = nu_gg_finite(prop, nu_kernel(STRONG, grid, T)).values
    long = TimeGrid(160.0, 3200)
    stat = nu_gg_stationary(green_time(IDF, STRONG, long).G, nu_kernel(STRONG, long, T)).values
    i0 = 1400
    lags = np.arange(0, 200)
    late = finite[i0, i0 - lags]
    assert np.max(np.abs(late - stat[lags])) < 1e-2 * stat[0]


def test_memory_budget():
    grid = TimeGrid(10.0, 100)
    prop = green_time(IDF, WEAK, grid)
    with pytest.raises(MemoryBudgetError) as info:
        nu_gg_finite(prop, nu_kernel(WEAK, grid, 1.0), max_steps=64)
    assert "64" in str(info.value)
