"""Split-step spectral propagator for the 1-D Schroedinger equation.

Serves as an independent oracle for the closed-form packet evolutions
elsewhere in the package: kinetic steps are applied exactly in Fourier
space, potential steps pointwise, composed with Strang splitting. With no
potential the propagation is spectrally exact for any step count.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import InvalidParameterError


def split_step_evolve(psi0: np.ndarray, xs: np.ndarray, mass: float, hbar: float,
                      total_time: float, n_steps: int = 256,
                      potential: Callable | None = None) -> np.ndarray:
    """Evolve psi0 on the uniform grid xs for total_time.

    The grid is treated as periodic; callers must keep the state away from
    the edges. Returns the final complex amplitude array.
    """
    psi = np.asarray(psi0, dtype=complex)
    xs = np.asarray(xs, dtype=float)
    if psi.shape != xs.shape:
        raise InvalidParameterError("psi0 and xs must have the same shape")
    if n_steps < 1:
        raise InvalidParameterError(f"n_steps must be >= 1, got {n_steps}")
    dx = xs[1] - xs[0]
    k = 2.0 * np.pi * np.fft.fftfreq(xs.size, d=dx)

    if potential is None:
        kinetic = np.exp(-1j * hbar * k**2 * total_time / (2.0 * mass))
        return np.fft.ifft(kinetic * np.fft.fft(psi))

    dt = total_time / n_steps
    half_v = np.exp(-0.5j * dt * np.asarray(potential(xs), dtype=float) / hbar)
    kinetic = np.exp(-1j * hbar * k**2 * dt / (2.0 * mass))
    for _ in range(n_steps):
        psi = half_v * psi
        psi = np.fft.ifft(kinetic * np.fft.fft(psi))
        psi = half_v * psi
    return psi
