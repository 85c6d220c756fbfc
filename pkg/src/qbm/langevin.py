"""Colored-noise sampling and the non-Markovian equation of motion.

The center of mass obeys

    M X'' + M W^2 X + 2 int_0^t eta2(t, s) X(s) ds = xi(t)

with a Gaussian force of zero mean and covariance ``<xi xi> = 4 nu2``.
Averaging over the force leaves the same equation with ``xi = 0``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import volterra
from .errors import FactorizationError, GridMismatchError
from .idf import OscillatorSpec
from .numerics import Kernel1D, Kernel2D, PsdFactor, TimeGrid, psd_factorize

COVARIANCE_FACTOR = 4.0
JITTER_REL = 1e-8
MAX_DENSE_POINTS = 4097


def kernel_hash(kernel) -> str:
    """SHA-256 of the grid and the little-endian float64 samples."""
    h = hashlib.sha256()
    h.update(f"{kernel.grid.t_max!r}:{kernel.grid.n_steps}".encode())
    h.update(np.ascontiguousarray(kernel.values, dtype="<f8").tobytes())
    return h.hexdigest()


def substream(seed, index) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


@dataclass(frozen=True, eq=False)
class NoiseSample:
    """One realization ``xi(t_k)`` of the stochastic force."""

    grid: TimeGrid
    values: np.ndarray
    seed: int
    index: int
    kernel_hash: str


@dataclass(frozen=True, eq=False)
class NoiseGenerator:
    """Factorized covariance ``factor @ factor.T = c nu2 + jitter``."""

    grid: TimeGrid
    psd: PsdFactor
    kernel_hash: str
    covariance_factor: float

    def sample(self, seed, index) -> NoiseSample:
        z = substream(seed, index).standard_normal(self.grid.n_points)
        xi = self.psd.factor @ z
        return NoiseSample(self.grid, xi, int(seed), int(index), self.kernel_hash)

    def samples(self, seed, n_traj, start=0):
        return [self.sample(seed, start + k) for k in range(n_traj)]


def noise_generator(nu2: Kernel2D, covariance_factor=COVARIANCE_FACTOR, jitter_rel=JITTER_REL) -> NoiseGenerator:
    """Factorize ``covariance_factor * nu2`` with a relative jitter budget.

    Raises
    ------
    FactorizationError
        If the kernel is not positive semidefinite within the budget.
    """
    cov = covariance_factor * np.asarray(nu2.values)
    scale = float(np.max(np.abs(cov))) if cov.size else 0.0
    psd = psd_factorize(cov, jitter_max=jitter_rel * scale)
    return NoiseGenerator(nu2.grid, psd, kernel_hash(nu2), covariance_factor)


def sample_noise(nu2: Kernel2D, seed, n_traj, covariance_factor=COVARIANCE_FACTOR, start=0):
    """Gaussian force samples with covariance ``covariance_factor * nu2``.

    Trajectory ``k`` draws from the substream ``(seed, start + k)``, so a
    sample depends only on the seed, its index and the kernel.
    """
    return noise_generator(nu2, covariance_factor).samples(seed, n_traj, start)


@dataclass(frozen=True, eq=False)
class StationaryNoiseGenerator:
    """Circulant-embedding sampler for a stationary covariance ``c k(t1 - t2)``.

    The lag kernel is embedded in a circulant matrix of size ``2 n_steps``
    whose eigenvalues come from one FFT; the real part of the transformed
    complex white noise then has exactly the Toeplitz covariance.
    """

    grid: TimeGrid
    sqrt_eigs: np.ndarray
    clipped: float
    kernel_hash: str
    covariance_factor: float

    def sample(self, seed, index) -> NoiseSample:
        m = self.sqrt_eigs.size
        rng = substream(seed, index)
        z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        xi = np.fft.fft(self.sqrt_eigs * z).real[: self.grid.n_points]
        return NoiseSample(self.grid, xi, int(seed), int(index), self.kernel_hash)

    def samples(self, seed, n_traj, start=0):
        return [self.sample(seed, start + k) for k in range(n_traj)]


def stationary_noise_generator(nu2: Kernel1D, covariance_factor=COVARIANCE_FACTOR,
                               tol=1e-6) -> StationaryNoiseGenerator:
    """Build a circulant-embedding sampler for an even lag kernel.

    Raises
    ------
    FactorizationError
        If the embedding has negative eigenvalues below ``-tol * max``.
    """
    if nu2.support != "even":
        raise ValueError("stationary noise needs an even lag kernel")
    k = covariance_factor * np.asarray(nu2.values)
    c = np.concatenate([k, k[-2:0:-1]])
    eig = np.fft.fft(c).real
    top = float(np.max(np.abs(eig))) if eig.size else 0.0
    low = float(eig.min()) if eig.size else 0.0
    if low < -tol * top:
        raise FactorizationError(
            f"circulant embedding has eigenvalue {low:.3g} (max {top:.3g}); lengthen the grid", low
        )
    m = c.size
    return StationaryNoiseGenerator(nu2.grid, np.sqrt(np.clip(eig, 0.0, None) / m),
                                    max(0.0, -low), kernel_hash(nu2), covariance_factor)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Center-of-mass path and velocity on a time grid."""

    grid: TimeGrid
    X: np.ndarray
    V: np.ndarray
    X0: float
    V0: float

    def energy(self, mdf: OscillatorSpec):
        return 0.5 * mdf.mass * (self.V**2 + mdf.frequency**2 * self.X**2)


def _prepare(mdf, eta2, grid):
    """Memory samples for the solver: a matrix, or lag samples for a stationary kernel."""
    if eta2 is not None and eta2.grid != grid:
        raise GridMismatchError(f"kernel grid {eta2.grid} differs from {grid}")
    volterra.check_step(mdf.frequency, grid.dt, "center-of-mass")
    if eta2 is None:
        return None
    if isinstance(eta2, Kernel1D) and eta2.support != "causal":
        raise ValueError("a stationary dissipation kernel must be causal")
    return np.asarray(eta2.values)


def _run(mdf, eta2, grid, X0, V0, forcing):
    mem = _prepare(mdf, eta2, grid)
    f = None if forcing is None else np.asarray(forcing, dtype=float) / mdf.mass
    return volterra.solve(mdf.frequency, grid.dt, grid.n_steps, X0, V0,
                          memory=mem, coef=2.0 / mdf.mass, forcing=f)


def solve_mean(mdf: OscillatorSpec, eta2, grid: TimeGrid, X0=1.0, V0=0.0) -> Trajectory:
    """Deterministic (force-averaged) path.

    ``eta2`` is a two-time :class:`Kernel2D` or a causal stationary
    :class:`Kernel1D`.

    Raises
    ------
    StepSizeError
        If ``dt`` under-resolves the bare frequency.
    """
    x, v = _run(mdf, eta2, grid, X0, V0, None)
    return Trajectory(grid, x[0], v[0], float(X0), float(V0))


def solve_stochastic(mdf: OscillatorSpec, eta2, noise: NoiseSample, grid: TimeGrid,
                     X0=1.0, V0=0.0) -> Trajectory:
    """Path driven by one force realization."""
    if noise.grid != grid:
        raise GridMismatchError("noise sample and solver grid differ")
    x, v = _run(mdf, eta2, grid, X0, V0, noise.values[None, :])
    return Trajectory(grid, x[0], v[0], float(X0), float(V0))


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Moments of an ensemble of paths.

    ``cov_XX`` and ``se_cov_XX`` are ``None`` when the grid exceeds the dense
    two-time budget; ``var_X`` is always available.
    """

    grid: TimeGrid
    n_traj: int
    mean_X: np.ndarray
    mean_V: np.ndarray
    var_X: np.ndarray
    se_mean_X: np.ndarray
    cov_XX: Kernel2D | None
    se_cov_XX: np.ndarray | None
    meta: dict = field(default_factory=dict)


def _moments(grid, xs, vs, meta=None, max_dense=MAX_DENSE_POINTS) -> EnsembleResult:
    n = xs.shape[0]
    if n < 2:
        raise ValueError("ensemble statistics need at least two trajectories")
    mean_x = xs.mean(axis=0)
    dx = xs - mean_x
    var = (dx**2).sum(axis=0) / (n - 1)
    se_mean = np.sqrt(var / n)
    cov = se_cov = None
    if grid.n_points <= max_dense:
        c = dx.T @ dx / (n - 1)
        c = 0.5 * (c + c.T)
        # standard error of each covariance entry from the fourth moments
        m4 = (dx**2).T @ (dx**2) / n
        se_cov = np.sqrt(np.maximum(m4 - c**2, 0.0) / n)
        cov = Kernel2D(grid, c, "symmetric")
    return EnsembleResult(grid, n, mean_x, vs.mean(axis=0), var, se_mean, cov, se_cov, dict(meta or {}))


def ensemble_statistics(trajectories) -> EnsembleResult:
    """Mean path, two-time covariance and standard errors.

    Raises
    ------
    GridMismatchError
        If trajectories differ in grid or initial conditions.
    """
    trajectories = list(trajectories)
    if len(trajectories) < 2:
        raise ValueError("ensemble statistics need at least two trajectories")
    first = trajectories[0]
    for tr in trajectories[1:]:
        if tr.grid != first.grid or (tr.X0, tr.V0) != (first.X0, first.V0):
            raise GridMismatchError("trajectories do not share a grid and initial conditions")
    xs = np.stack([tr.X for tr in trajectories])
    vs = np.stack([tr.V for tr in trajectories])
    return _moments(first.grid, xs, vs)


def make_generator(nu2, covariance_factor=COVARIANCE_FACTOR):
    """Dense sampler for a two-time kernel, circulant sampler for a lag kernel."""
    if isinstance(nu2, Kernel1D):
        return stationary_noise_generator(nu2, covariance_factor)
    return noise_generator(nu2, covariance_factor)


def solve_ensemble(mdf: OscillatorSpec, eta2, nu2, grid: TimeGrid, seed, n_traj,
                   X0=1.0, V0=0.0, batch=256, keep_paths=False, covariance_factor=COVARIANCE_FACTOR):
    """Integrate ``n_traj`` stochastic paths in batches.

    Kernels are either both two-time matrices or both stationary lag
    kernels (causal ``eta2``, even ``nu2``).

    Returns
    -------
    EnsembleResult, and the array of paths ``(n_traj, n_points)`` when
    ``keep_paths`` is true.
    """
    if n_traj < 2:
        raise ValueError("an ensemble needs at least two trajectories")
    if nu2.grid != grid:
        raise GridMismatchError("noise kernel and solver grid differ")
    gen = make_generator(nu2, covariance_factor)
    xs = np.empty((n_traj, grid.n_points))
    vs = np.empty((n_traj, grid.n_points))
    for start in range(0, n_traj, batch):
        stop = min(start + batch, n_traj)
        xi = np.stack([gen.sample(seed, k).values for k in range(start, stop)])
        x, v = _run(mdf, eta2, grid, np.full(stop - start, X0, dtype=float), V0, xi)
        xs[start:stop] = x
        vs[start:stop] = v
    meta = {"seed": int(seed), "kernel_hash": gen.kernel_hash}
    if isinstance(gen, NoiseGenerator):
        meta["jitter"] = gen.psd.jitter
    else:
        meta["clipped_eigenvalue"] = gen.clipped
    res = _moments(grid, xs, vs, meta)
    return (res, xs) if keep_paths else res


def covariance_zscores(samples, target):
    """Entrywise ``|C_emp - C| / se`` for Gaussian samples with covariance ``target``.

    Uses ``se_ij^2 = (C_ii C_jj + C_ij^2) / n``.
    """
    xs = np.asarray(samples, dtype=float)
    n = xs.shape[0]
    emp = xs.T @ xs / n
    c = np.asarray(target, dtype=float)
    d = np.diag(c)
    se = np.sqrt((np.outer(d, d) + c**2) / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(emp - c) / np.where(se > 0, se, 1.0), 0.0)
    return z


def relaxation_estimate(trajectory: Trajectory):
    """Envelope decay rate from a log-linear fit of the running peak amplitude."""
    x = np.abs(trajectory.X)
    t = trajectory.grid.t
    n = x.size
    if n < 8:
        return math.nan
    q = max(1, n // 8)
    env = np.array([x[k * q:(k + 1) * q].max() for k in range(n // q)])
    tc = np.array([t[k * q:(k + 1) * q].mean() for k in range(n // q)])
    good = env > 0
    if good.sum() < 2:
        return math.nan
    slope = np.polyfit(tc[good], np.log(env[good]), 1)[0]
    return float(-slope)
