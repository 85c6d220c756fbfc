"""Time stepping for linear second-order Volterra integro-differential equations.

Solves, for a batch of trajectories,

    x''(t) + w^2 x(t) + c int_0^t K(t, s) x(s) ds = f(t)

with the explicit central-difference (Stormer-Verlet) scheme

    x_{n+1} = 2 x_n - x_{n-1} + dt^2 a_n

where ``a_n`` uses trapezoidal quadrature of the memory integral over the
nodes ``0..n``. The first step is a Taylor step through third order and
velocities are central differences, so the scheme is second order overall
and linear in ``(x0, v0, f)``.
"""

from __future__ import annotations

import numpy as np

from .errors import StepSizeError

MAX_OMEGA_DT = 0.5


def check_step(omega, dt, what="oscillator"):
    """Refuse time steps that under-resolve the free oscillation."""
    if omega * dt > MAX_OMEGA_DT:
        raise StepSizeError(f"dt={dt:g} too coarse for the {what} frequency {omega:g}",
                            recommended_dt=0.1 / omega)


def solve(omega, dt, n_steps, x0, v0, memory=None, coef=0.0, forcing=None):
    """Integrate a batch of trajectories.

    Parameters
    ----------
    omega : float
        Bare oscillator frequency.
    dt : float
        Time step.
    n_steps : int
        Number of steps; outputs have ``n_steps + 1`` samples.
    x0, v0 : float or array of shape (batch,)
        Initial position and velocity.
    memory : ndarray, optional
        Either lag samples ``K(k dt)`` of length ``n_steps + 1`` (stationary
        kernel) or a matrix ``K[i, j]`` of shape ``(n_steps + 1, n_steps + 1)``.
        The lag-zero (diagonal) value enters with trapezoidal weight 1/2.
    coef : float
        Prefactor ``c`` of the memory term.
    forcing : ndarray, optional
        ``f(t_k)`` of shape ``(batch, n_steps + 1)`` or ``(n_steps + 1,)``.

    Returns
    -------
    x, v : ndarray of shape (batch, n_steps + 1)
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    x0, v0 = np.broadcast_arrays(x0, v0)
    batch = x0.shape[0]
    npts = n_steps + 1
    w2 = omega * omega
    if forcing is not None:
        forcing = np.asarray(forcing, dtype=float)
        if forcing.ndim == 1:
            forcing = np.broadcast_to(forcing, (batch, npts))
        if forcing.shape != (batch, npts):
            raise ValueError(f"forcing must have shape {(batch, npts)}, got {forcing.shape}")
    use_mem = memory is not None and coef != 0 and np.any(memory)
    stationary = False
    if use_mem:
        memory = np.asarray(memory, dtype=float)
        stationary = memory.ndim == 1
        expected = (npts,) if stationary else (npts, npts)
        if memory.shape != expected:
            raise ValueError(f"memory kernel must have shape {expected}, got {memory.shape}")
        rev = memory[::-1].copy() if stationary else None

    # one extra node so that the last velocity is a central difference
    x = np.zeros((batch, npts + 1))
    x[:, 0] = x0

    def accel(n):
        a = -w2 * x[:, n]
        if forcing is not None:
            a = a + forcing[:, n]
        if use_mem and n > 0:
            if stationary:
                row = rev[npts - 1 - n:]
            else:
                row = memory[n, : n + 1]
            integral = x[:, : n + 1] @ row - 0.5 * (x[:, 0] * row[0] + x[:, n] * row[n])
            a = a - coef * dt * integral
        return a

    a0 = accel(0)
    jerk = -w2 * v0
    if forcing is not None:
        jerk = jerk + (forcing[:, 1] - forcing[:, 0]) / dt
    if use_mem:
        k00 = memory[0] if stationary else memory[0, 0]
        jerk = jerk - coef * k00 * x0
    x[:, 1] = x0 + dt * v0 + 0.5 * dt * dt * a0 + dt**3 / 6.0 * jerk
    dt2 = dt * dt
    for n in range(1, npts):
        x[:, n + 1] = 2 * x[:, n] - x[:, n - 1] + dt2 * accel(n)
    v = np.empty((batch, npts))
    v[:, 0] = v0
    v[:, 1:] = (x[:, 2:] - x[:, :-2]) / (2 * dt)
    return x[:, :npts], v
