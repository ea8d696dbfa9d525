"""Shared domain types and numeric utilities.

Everything downstream (trajectory engines, phase-space engine, Monte Carlo
oracle, pipeline) is built on the pieces here: Gaussian preparations, uniform
grids, tabulated densities, bracketed root finding and trapezoid quadrature.
All functions are pure; all types are immutable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class NumericsError(Exception):
    """Base class for numerical failures that callers may want to catch."""


class InvalidParameterError(ValueError):
    """A parameter violates its documented precondition."""


class DegenerateDistributionError(NumericsError):
    """A density cannot be normalized (zero, NaN or infinite integral)."""


class CausticSingularityError(NumericsError):
    """The position-map Jacobian vanished; the density is singular there."""


class TurningPointError(NumericsError):
    """The trajectory velocity vanished; flight-time bookkeeping is singular."""


class UnsupportedInversionError(NumericsError):
    """The requested trajectory inversion does not exist for this family."""


class AccuracyError(NumericsError):
    """Quadrature failed to reach the requested tolerance.

    Carries the best estimate so callers can decide whether to use it.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


def worker_count() -> int:
    """Worker cap from the TETLAB_THREADS environment variable (default 1)."""
    raw = os.environ.get("TETLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameterError(f"TETLAB_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise InvalidParameterError(f"TETLAB_THREADS must be positive, got {n}")
    return n


@dataclass(frozen=True)
class GaussianPrep1D:
    """Gaussian preparation plus the physical constants of a 1-D problem.

    Attributes
    ----------
    mean_q, mean_p : float
        Mean initial position and momentum.
    sigma0 : float
        Initial spatial width (> 0).
    mass, hbar : float
        Particle mass and Planck constant (> 0).
    gravity : float
        Uniform gravitational acceleration (0 for free motion).
    """

    mean_q: float
    mean_p: float
    sigma0: float
    mass: float
    hbar: float = 1.0
    gravity: float = 0.0

    def __post_init__(self):
        if not (self.sigma0 > 0):
            raise InvalidParameterError(f"sigma0 must be > 0, got {self.sigma0}")
        if not (self.mass > 0):
            raise InvalidParameterError(f"mass must be > 0, got {self.mass}")
        if not (self.hbar > 0):
            raise InvalidParameterError(f"hbar must be > 0, got {self.hbar}")
        if self.gravity < 0:
            raise InvalidParameterError(f"gravity must be >= 0, got {self.gravity}")
        if not np.isfinite(self.omega):
            raise InvalidParameterError("spreading rate is not finite")

    @property
    def omega(self) -> float:
        """Spreading rate hbar / (2 m sigma0^2) of the Gaussian packet."""
        return self.hbar / (2.0 * self.mass * self.sigma0**2)

    def spreading(self, t):
        """Width growth factor sqrt(1 + (omega t)^2)."""
        return np.sqrt(1.0 + (self.omega * np.asarray(t, dtype=float)) ** 2)

    def sigma_t(self, t):
        """Packet width at time t."""
        return self.sigma0 * self.spreading(t)

    @property
    def sigma_p(self) -> float:
        """Momentum width hbar / (2 sigma0) of the minimum-uncertainty packet."""
        return self.hbar / (2.0 * self.sigma0)


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D grid on [lo, hi] with n_points nodes."""

    lo: float
    hi: float
    n_points: int

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise InvalidParameterError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.n_points < 2:
            raise InvalidParameterError(f"need n_points >= 2, got {self.n_points}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    @property
    def span(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class SampledDistribution:
    """A 1-D probability density tabulated on a uniform grid."""

    grid: Grid1D
    density: np.ndarray
    label: str = ""

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float)
        if dens.shape != (self.grid.n_points,):
            raise InvalidParameterError(
                f"density shape {dens.shape} does not match grid ({self.grid.n_points},)"
            )
        object.__setattr__(self, "density", dens)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid.points))

    def normalize(self, label: str | None = None) -> "SampledDistribution":
        return normalize(self, label=label)

    def mean(self) -> float:
        x = self.grid.points
        return float(np.trapezoid(x * self.density, x) / self.integral())

    def variance(self) -> float:
        x = self.grid.points
        mu = self.mean()
        return float(np.trapezoid((x - mu) ** 2 * self.density, x) / self.integral())

    def skewness(self) -> float:
        x = self.grid.points
        mu = self.mean()
        var = self.variance()
        third = np.trapezoid((x - mu) ** 3 * self.density, x) / self.integral()
        return float(third / var**1.5)

    def l1_distance(self, other: "SampledDistribution") -> float:
        if other.grid != self.grid:
            raise InvalidParameterError("distributions live on different grids")
        return float(np.trapezoid(np.abs(self.density - other.density), self.grid.points))

    def interpolate(self, x) -> np.ndarray:
        """Linear interpolation of the density (0 outside the grid)."""
        return np.interp(np.asarray(x, dtype=float), self.grid.points, self.density,
                         left=0.0, right=0.0)


def eval_gaussian(u, mean, width):
    """Normalized Gaussian density with the given mean and width.

    Accepts scalars or arrays for ``u``; raises on non-positive width.
    """
    if not np.all(np.asarray(width) > 0):
        raise InvalidParameterError(f"width must be > 0, got {width}")
    u = np.asarray(u, dtype=float)
    out = np.exp(-((u - mean) ** 2) / (2.0 * width**2)) / (width * np.sqrt(2.0 * np.pi))
    return out if out.ndim else float(out)


def normalize(d: SampledDistribution, label: str | None = None) -> SampledDistribution:
    """Rescale a tabulated density so its trapezoid integral is 1."""
    total = d.integral()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateDistributionError(
            f"cannot normalize {d.label!r}: integral is {total}"
        )
    return SampledDistribution(d.grid, d.density / total,
                               d.label if label is None else label)


def trapezoid(y, x) -> float:
    return float(np.trapezoid(np.asarray(y, dtype=float), np.asarray(x, dtype=float)))


def central_diff(f: Callable[[float], float], x: float, h: float | None = None) -> float:
    """Central finite difference with the default step 1e-6 * max(1, |x|)."""
    if h is None:
        h = 1e-6 * max(1.0, abs(x))
    return (f(x + h) - f(x - h)) / (2.0 * h)


def _eval_on(f: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate f on an array, falling back to a loop if f is scalar-only."""
    try:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([f(float(x)) for x in xs], dtype=float)


def find_roots(f: Callable[[float], float], t_lo: float, t_hi: float,
               scan_steps: int = 4096) -> list[float]:
    """All sign-change roots of ``f`` on [t_lo, t_hi], refined by bisection.

    The bracket is scanned on ``scan_steps`` nodes; each sign change is
    bisected until |f| < 1e-12 * scale or the interval is below
    1e-12 * (t_hi - t_lo). Tangent roots that do not change sign are not
    guaranteed to be found. Returns a sorted list (possibly empty).
    """
    if scan_steps < 2:
        raise InvalidParameterError(f"scan_steps must be >= 2, got {scan_steps}")
    if not (t_hi > t_lo):
        raise InvalidParameterError(f"need t_hi > t_lo, got [{t_lo}, {t_hi}]")
    ts = np.linspace(t_lo, t_hi, scan_steps)
    vals = _eval_on(f, ts)
    if not np.all(np.isfinite(vals)):
        raise InvalidParameterError("f is not finite on the scan grid")
    scale = max(1.0, float(np.max(np.abs(vals))))
    f_tol = 1e-12 * scale
    t_tol = 1e-12 * (t_hi - t_lo)

    roots: list[float] = []
    exact = np.flatnonzero(np.abs(vals) <= f_tol)
    sign = np.sign(vals)
    change = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    for i in change:
        a, b = float(ts[i]), float(ts[i + 1])
        fa, fb = float(vals[i]), float(vals[i + 1])
        while (b - a) > t_tol:
            m = 0.5 * (a + b)
            fm = float(f(m))
            if abs(fm) <= f_tol:
                a = b = m
                break
            if fa * fm < 0:
                b, fb = m, fm
            else:
                a, fa = m, fm
        roots.append(0.5 * (a + b))
    for i in exact:
        roots.append(float(ts[i]))

    roots.sort()
    deduped: list[float] = []
    sep = max(t_tol, 1e-12 * (t_hi - t_lo)) * 10.0
    for r in roots:
        if not deduped or r - deduped[-1] > sep:
            deduped.append(r)
    return deduped


def sign_change_count(vals: np.ndarray) -> np.ndarray:
    """Count sign changes along the last axis of a scan-value array.

    Nodes that are exactly zero are perturbed to the sign of their left
    neighbor so a single root is not double counted.
    """
    vals = np.asarray(vals, dtype=float)
    sign = np.sign(vals)
    # propagate the previous sign through exact zeros
    for k in range(1, sign.shape[-1]):
        zero = sign[..., k] == 0
        if np.any(zero):
            sign[..., k] = np.where(zero, sign[..., k - 1], sign[..., k])
    return np.sum(sign[..., :-1] * sign[..., 1:] < 0, axis=-1)


def tabulated_inverse_cdf(density_fn: Callable, lo: float, hi: float,
                          n_points: int = 16385) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse CDF of a 1-D density by fine tabulation and interpolation."""
    xs = np.linspace(lo, hi, n_points)
    dens = np.clip(_eval_on(density_fn, xs), 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    if cdf[-1] <= 0 or not np.isfinite(cdf[-1]):
        raise DegenerateDistributionError("density has no mass on the tabulation window")
    cdf /= cdf[-1]

    def inverse(u):
        return np.interp(np.asarray(u, dtype=float), cdf, xs)

    return inverse
