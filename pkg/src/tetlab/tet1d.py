"""Position and flight-time densities from velocity-field trajectories.

A deterministic theory that assigns each initial position q0 a smooth
trajectory q = Q(q0, t) induces, for any preparation density rho0(q0),

* a position density at fixed time: rho0(Q0(q, t)) / |dQ/dq0|, and
* a flight-time density at a fixed detector q, built from the crossing
  times of the trajectories, with a 1/n weight when a trajectory crosses
  the detector n times (recurrences).

The engine below works for any family of invertible closed-form
trajectories; the concrete families live in :mod:`tetlab.models`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .core import (
    CausticSingularityError,
    DegenerateDistributionError,
    Grid1D,
    SampledDistribution,
    TurningPointError,
    find_roots,
    normalize,
    sign_change_count,
)

# relative threshold below which a Jacobian / velocity counts as singular
_JACOBIAN_FLOOR = 1e-14
_VELOCITY_FLOOR = 1e-9


@dataclass(frozen=True)
class TrajectoryFamily1D:
    """Closed-form trajectory bundle q = Q(q0, t) with inverse and partials.

    All callables must broadcast over numpy arrays. ``t_bracket`` is the
    window scanned for detector crossings.
    """

    q_of: Callable          # (q0, t) -> q
    dq_dq0: Callable        # (q0, t) -> dQ/dq0
    dq_dt: Callable         # (q0, t) -> velocity along the trajectory
    q0_of: Callable         # (q, t) -> q0
    t_bracket: tuple[float, float]
    name: str = ""


@dataclass(frozen=True)
class CrossingSet:
    """Sorted detector-crossing times of one trajectory."""

    times: tuple[float, ...]

    @property
    def branch_count(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class Preparation1D:
    """Initial-position density rho0(q0), normalized on ``support``."""

    rho0: Callable
    support: tuple[float, float]


def crossing_times(traj: TrajectoryFamily1D, q: float, q0: float,
                   scan_steps: int = 4096) -> CrossingSet:
    """Times in ``traj.t_bracket`` at which the trajectory from q0 reaches q.

    Roots of Q(q0, t) - q are located by a scan-plus-bisection search, so
    tangent (non-sign-changing) contacts are not guaranteed. Negative times
    never occur because the bracket starts at max(0, t_lo).
    """
    t_lo, t_hi = traj.t_bracket
    t_lo = max(0.0, t_lo)
    roots = find_roots(lambda t: traj.q_of(q0, t) - q, t_lo, t_hi, scan_steps)
    tol = 1e-9 * (1.0 + abs(q))
    kept = tuple(t for t in roots if abs(traj.q_of(q0, t) - q) < tol)
    return CrossingSet(times=kept)


def position_pdf(traj: TrajectoryFamily1D, prep: Preparation1D, q, t):
    """Position density rho0(Q0(q,t)) / |dQ/dq0| at (q, t).

    Broadcasts over arrays of q. Raises CausticSingularityError if the
    Jacobian dQ/dq0 vanishes anywhere in the evaluation.
    """
    q0 = traj.q0_of(q, t)
    jac = np.abs(traj.dq_dq0(q0, t))
    scale = max(1.0, float(np.max(jac))) if np.ndim(jac) else max(1.0, abs(float(jac)))
    if np.any(jac < _JACOBIAN_FLOOR * scale):
        raise CausticSingularityError(
            f"position map has vanishing Jacobian at q={q}, t={t}"
        )
    out = prep.rho0(q0) / jac
    return out if np.ndim(out) else float(out)


def _branch_count(traj: TrajectoryFamily1D, q: float, q0: float,
                  scan_steps: int) -> int:
    return crossing_times(traj, q, q0, scan_steps).branch_count


def _velocity_scale(traj: TrajectoryFamily1D, q0, t) -> float:
    v = np.abs(np.asarray(traj.dq_dt(q0, t), dtype=float))
    return max(float(np.max(v)), 1e-300)


def flighttime_pdf(traj: TrajectoryFamily1D, prep: Preparation1D,
                   q: float, t: float, scan_steps: int = 4096) -> float:
    """Flight-time density at detector q and time t (branch-sum form).

    Evaluates the branch through (q, t): with q0 = Q0(q, t) and n the number
    of crossings of q by that trajectory, the density is
    rho0(q0) * |dQ/dt| / |dQ/dq0| / n, the crossing-time derivative being
    obtained from the implicit-function rule. Returns 0 when the crossing
    search does not recover t (the trajectory effectively misses q there).
    Raises TurningPointError when the trajectory velocity vanishes at (q, t).
    """
    q0 = float(traj.q0_of(q, t))
    crossings = crossing_times(traj, q, q0, scan_steps)
    if crossings.branch_count == 0:
        return 0.0
    t_lo, t_hi = traj.t_bracket
    t_match = 1e-7 * (t_hi - t_lo)
    if not any(abs(tc - t) < t_match for tc in crossings.times):
        return 0.0
    v = float(traj.dq_dt(q0, t))
    vscale = _velocity_scale(traj, q0, np.linspace(max(0.0, t_lo), t_hi, 64))
    if abs(v) < _VELOCITY_FLOOR * vscale:
        raise TurningPointError(f"velocity vanishes at q={q}, t={t}")
    jac = abs(float(traj.dq_dq0(q0, t)))
    if jac < _JACOBIAN_FLOOR:
        raise CausticSingularityError(f"vanishing Jacobian at q={q}, t={t}")
    return float(prep.rho0(q0)) * abs(v) / jac / crossings.branch_count


def flighttime_pdf_current(traj: TrajectoryFamily1D, prep: Preparation1D,
                           q: float, t: float, scan_steps: int = 4096) -> float:
    """Flight-time density via the probability current, |v| * wp_q / n.

    Identical to :func:`flighttime_pdf` for single-valued velocity fields;
    kept as a separate route so the two can cross-check each other.
    """
    q0 = float(traj.q0_of(q, t))
    n = _branch_count(traj, q, q0, scan_steps)
    if n == 0:
        return 0.0
    v = float(traj.dq_dt(q0, t))
    vscale = _velocity_scale(traj, q0, np.linspace(max(0.0, traj.t_bracket[0]),
                                                   traj.t_bracket[1], 64))
    if abs(v) < _VELOCITY_FLOOR * vscale:
        raise TurningPointError(f"velocity vanishes at q={q}, t={t}")
    return abs(v) * position_pdf(traj, prep, q, t) / n


def tabulate_flighttime(traj: TrajectoryFamily1D, prep: Preparation1D, q: float,
                        time_grid: Grid1D,
                        method: Literal["branch-sum", "current"] = "branch-sum",
                        scan_steps: int = 4096) -> SampledDistribution:
    """Tabulate the flight-time density on a grid and normalize it.

    Grid points where the trajectory velocity vanishes (turning points) are
    masked to zero before normalizing; the singular set has measure zero, so
    the trapezoid integral converges as the grid refines.
    """
    if method not in ("branch-sum", "current"):
        raise ValueError(f"unknown method {method!r}")
    t_lo, t_hi = traj.t_bracket
    if time_grid.lo < t_lo - 1e-12 or time_grid.hi > t_hi + 1e-12:
        raise ValueError(
            f"time grid [{time_grid.lo}, {time_grid.hi}] outside "
            f"trajectory bracket [{t_lo}, {t_hi}]"
        )
    ts = time_grid.points
    q0s = np.asarray(traj.q0_of(q, ts), dtype=float)
    vs = np.asarray(traj.dq_dt(q0s, ts), dtype=float)
    jacs = np.abs(np.asarray(traj.dq_dq0(q0s, ts), dtype=float))
    rhos = np.asarray(prep.rho0(q0s), dtype=float)

    # branch counts: one vectorized scan over the whole bracket per grid point
    scan_ts = np.linspace(max(0.0, t_lo), t_hi, scan_steps)
    fvals = np.asarray(traj.q_of(q0s[:, None], scan_ts[None, :]), dtype=float) - q
    ns = sign_change_count(fvals)

    vscale = max(float(np.max(np.abs(vs))), 1e-300)
    singular = np.abs(vs) < _VELOCITY_FLOOR * vscale
    valid = (~singular) & (ns > 0) & (jacs > _JACOBIAN_FLOOR)

    density = np.zeros_like(ts)
    np.divide(rhos * np.abs(vs), jacs * np.maximum(ns, 1), out=density, where=valid)
    if np.count_nonzero(valid) < 2:
        raise DegenerateDistributionError(
            f"fewer than 2 valid flight-time samples at detector q={q}"
        )
    label = f"wp_t|q {'BM' if method == 'current' else 'branch-sum'} q={q:g}"
    return normalize(SampledDistribution(time_grid, density, label))
