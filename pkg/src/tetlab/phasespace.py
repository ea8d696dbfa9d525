"""Joint position/momentum/time densities from phase-space trajectories.

A deterministic phase-space flow (Q(q0, p0, t), P(q0, p0, t)) plus an
unconditioned preparation rho0(q0, p0) determines joint densities for any
two of {q, p, t} given the rest, provided the flow is invertible and free
of recurrences on the window of interest. Each density is the preparation
divided by the Jacobian factors of the inversions used; the momentum root
p0 shared by the (q, p) and (p, t) densities is found in closed form when
the family supplies one, otherwise by a bracketed scan-and-bisect search.

Families must declare which time inversions exist: a conserved momentum has
no time-from-momentum inverse, and a flow that revisits positions has no
single-valued time-from-position inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    CausticSingularityError,
    GaussianPrep1D,
    Grid1D,
    UnsupportedInversionError,
    eval_gaussian,
    find_roots,
    trapezoid,
    _eval_on,
)

_JACOBIAN_FLOOR = 1e-14
_ROOT_BRACKET_SIGMAS = 10.0


@dataclass(frozen=True)
class PhaseSpaceFamily:
    """Phase-space flow with its inverse functions and analytic partials.

    Inversions that do not exist for the family are declared as ``None``.
    All callables must broadcast over numpy arrays.
    """

    q_of: Callable               # (q0, p0, t) -> q
    p_of: Callable               # (q0, p0, t) -> p
    q0_from_q: Callable          # (q, p0, t) -> q0
    p0_from_q: Callable          # (q, q0, t) -> p0
    q0_from_p: Callable | None   # (p, p0, t) -> q0
    p0_from_p: Callable | None   # (p, q0, t) -> p0
    t_from_q: Callable | None    # (q, q0, p0) -> t
    t_from_p: Callable | None    # (p, q0, p0) -> t
    dq_dq0: Callable             # partials of the forward maps, args (q0, p0, t)
    dq_dp0: Callable
    dp_dq0: Callable
    dp_dp0: Callable
    dtq_dq0: Callable | None     # (q, q0, p0) -> d t_from_q / d q0
    dtp_dq0: Callable | None     # (p, q0, p0) -> d t_from_p / d q0
    dtp_dp0: Callable | None     # (p, q0, p0) -> d t_from_p / d p0
    p0_bracket: tuple[float, float]
    p0_root_qp: Callable | None = None   # closed-form p0 solving p = P(Q0q(q,p0,t),p0,t)
    p0_root_qt: Callable | None = None   # closed-form p0 solving t = Tp(p, Q0q(q,p0,t), p0)
    name: str = ""


@dataclass(frozen=True)
class PhasePreparation:
    """Initial phase-space density rho0(q0, p0), normalized on ``support``."""

    rho0: Callable
    support: tuple[tuple[float, float], tuple[float, float]]


def gaussian_phase_preparation(prep: GaussianPrep1D) -> PhasePreparation:
    """Product preparation: Gaussian in q0 (width sigma0) and in p0 (width hbar/2 sigma0)."""
    sq, sp = prep.sigma0, prep.sigma_p

    def rho0(q0, p0):
        return eval_gaussian(q0, prep.mean_q, sq) * eval_gaussian(p0, prep.mean_p, sp)

    return PhasePreparation(
        rho0=rho0,
        support=((prep.mean_q - 8.0 * sq, prep.mean_q + 8.0 * sq),
                 (prep.mean_p - 8.0 * sp, prep.mean_p + 8.0 * sp)),
    )


def default_momentum_grid(prep: GaussianPrep1D, n_points: int = 2001) -> Grid1D:
    """Momentum grid covering mean_p +/- 10 momentum widths."""
    half = _ROOT_BRACKET_SIGMAS * prep.sigma_p
    return Grid1D(prep.mean_p - half, prep.mean_p + half, n_points)


def _momentum_jacobian(fam: PhaseSpaceFamily, q0, p0, t):
    """d/dp0 of P(Q0q(q, p0, t), p0, t) at fixed q (the shared Jacobian factor)."""
    dq_dq0 = fam.dq_dq0(q0, p0, t)
    return fam.dp_dp0(q0, p0, t) - fam.dp_dq0(q0, p0, t) * fam.dq_dp0(q0, p0, t) / dq_dq0


def _solve_p0_qp(fam: PhaseSpaceFamily, q: float, p: float, t: float):
    """Momentum root p0 with P(Q0q(q, p0, t), p0, t) = p, or None."""
    if fam.p0_root_qp is not None:
        return fam.p0_root_qp(q, p, t)

    def f(p0):
        return fam.p_of(fam.q0_from_q(q, p0, t), p0, t) - p

    roots = find_roots(f, fam.p0_bracket[0], fam.p0_bracket[1], scan_steps=512)
    if not roots:
        return None
    if len(roots) > 1:
        raise UnsupportedInversionError(
            f"momentum root is not unique at q={q}, p={p}, t={t}; "
            "the family violates the no-recurrence assumption"
        )
    return roots[0]


def _solve_p0_qt(fam: PhaseSpaceFamily, q: float, p: float, t: float):
    """Momentum root p0 with Tp(p, Q0q(q, p0, t), p0) = t, or None."""
    if fam.p0_root_qt is not None:
        return fam.p0_root_qt(q, p, t)

    def f(p0):
        return fam.t_from_p(p, fam.q0_from_q(q, p0, t), p0) - t

    roots = find_roots(f, fam.p0_bracket[0], fam.p0_bracket[1], scan_steps=512)
    if not roots:
        return None
    if len(roots) > 1:
        raise UnsupportedInversionError(
            f"momentum root is not unique at q={q}, p={p}, t={t}"
        )
    return roots[0]


def _check_jacobians(*factors) -> None:
    for fac in factors:
        if np.any(np.abs(fac) < _JACOBIAN_FLOOR):
            raise CausticSingularityError("vanishing Jacobian factor in phase-space map")


def joint_qp_pdf(fam: PhaseSpaceFamily, prep: PhasePreparation, q, p, t):
    """Joint density of (q, p) at time t.

    rho0 / (|dQ/dq0| |dP/dp0 at fixed q|) evaluated at the initial condition
    that reaches (q, p) at t. Zero when no initial condition does. Arrays are
    accepted whenever the family has a closed-form momentum root.
    """
    p0 = _solve_p0_qp(fam, q, p, t)
    if p0 is None:
        return 0.0
    q0 = fam.q0_from_q(q, p0, t)
    d_q = np.abs(fam.dq_dq0(q0, p0, t))
    d_p = np.abs(_momentum_jacobian(fam, q0, p0, t))
    _check_jacobians(d_q, d_p)
    out = prep.rho0(q0, p0) / (d_q * d_p)
    return out if np.ndim(out) else float(out)


def joint_pt_pdf(fam: PhaseSpaceFamily, prep: PhasePreparation, q, p, t):
    """Joint density of (p, t) given detection at position q.

    Uses the time-from-position inverse, so the family must be free of
    position recurrences; families that are not declare ``t_from_q = None``
    and are rejected here.
    """
    if fam.t_from_q is None or fam.dtq_dq0 is None:
        raise UnsupportedInversionError(
            f"family {fam.name!r} has no single-valued time-from-position inverse"
        )
    p0 = _solve_p0_qp(fam, q, p, t)
    if p0 is None:
        return 0.0
    with np.errstate(divide="ignore"):
        q0 = fam.q0_from_q(q, p0, t)
        d_t = np.abs(fam.dtq_dq0(q, q0, p0))
        d_p = np.abs(_momentum_jacobian(fam, q0, p0, t))
        _check_jacobians(d_t, d_p)
        out = prep.rho0(q0, p0) / (d_t * d_p)
    return out if np.ndim(out) else float(out)


def joint_qt_pdf(fam: PhaseSpaceFamily, prep: PhasePreparation, q, p, t):
    """Joint density of (q, t) given detection of momentum p.

    Uses the time-from-momentum inverse, which only exists when the momentum
    actually evolves (a conserved momentum carries no time information).
    """
    if fam.t_from_p is None or fam.dtp_dp0 is None or fam.dtp_dq0 is None:
        raise UnsupportedInversionError(
            f"family {fam.name!r} has no time-from-momentum inverse"
        )
    p0 = _solve_p0_qt(fam, q, p, t)
    if p0 is None:
        return 0.0
    q0 = fam.q0_from_q(q, p0, t)
    d_q = np.abs(fam.dq_dq0(q0, p0, t))
    # total derivative of Tp(p, Q0q(q, p0, t), p0) in p0 at fixed q
    dq0_dp0 = -fam.dq_dp0(q0, p0, t) / fam.dq_dq0(q0, p0, t)
    d_t = np.abs(fam.dtp_dp0(p, q0, p0) + fam.dtp_dq0(p, q0, p0) * dq0_dp0)
    _check_jacobians(d_q, d_t)
    out = prep.rho0(q0, p0) / (d_q * d_t)
    return out if np.ndim(out) else float(out)


def marginalize_p(f: Callable, p_grid: Grid1D) -> float:
    """Trapezoid integral of a momentum-resolved density over the grid."""
    ps = p_grid.points
    vals = _eval_on(f, ps)
    if not np.all(np.isfinite(vals)):
        raise UnsupportedInversionError("density is not finite on the momentum grid")
    return trapezoid(vals, ps)


def classical_free_family(prep: GaussianPrep1D) -> PhaseSpaceFamily:
    """Classical free flight: Q = q0 + p0 t / m, P = p0."""
    m = prep.mass
    half = _ROOT_BRACKET_SIGMAS * prep.sigma_p

    return PhaseSpaceFamily(
        q_of=lambda q0, p0, t: q0 + p0 * np.asarray(t, dtype=float) / m,
        p_of=lambda q0, p0, t: p0 + 0.0 * np.asarray(q0, dtype=float),
        q0_from_q=lambda q, p0, t: np.asarray(q, dtype=float) - p0 * np.asarray(t, dtype=float) / m,
        p0_from_q=lambda q, q0, t: m * (np.asarray(q, dtype=float) - q0) / np.asarray(t, dtype=float),
        q0_from_p=None,  # momentum is conserved: it carries no initial-position information
        p0_from_p=lambda p, q0, t: np.asarray(p, dtype=float) + 0.0 * np.asarray(q0, dtype=float),
        t_from_q=lambda q, q0, p0: m * (np.asarray(q, dtype=float) - q0) / p0,
        t_from_p=None,   # momentum never evolves, time cannot be read from it
        dq_dq0=lambda q0, p0, t: 1.0 + 0.0 * np.asarray(q0, dtype=float),
        dq_dp0=lambda q0, p0, t: np.asarray(t, dtype=float) / m + 0.0 * np.asarray(q0, dtype=float),
        dp_dq0=lambda q0, p0, t: 0.0 * np.asarray(q0, dtype=float),
        dp_dp0=lambda q0, p0, t: 1.0 + 0.0 * np.asarray(q0, dtype=float),
        dtq_dq0=lambda q, q0, p0: -m / np.asarray(p0, dtype=float) + 0.0 * np.asarray(q0, dtype=float),
        dtp_dq0=None,
        dtp_dp0=None,
        p0_bracket=(prep.mean_p - half, prep.mean_p + half),
        p0_root_qp=lambda q, p, t: np.asarray(p, dtype=float) + 0.0 * np.asarray(q, dtype=float),
        p0_root_qt=None,
        name="classical free",
    )


def classical_gravity_family(prep: GaussianPrep1D) -> PhaseSpaceFamily:
    """Classical uniform-gravity flight: Q = q0 + p0 t / m - g t^2 / 2, P = p0 - m g t.

    Positions recur (rise and fall), so the time-from-position inverse is not
    single-valued and is not exposed; the time-from-momentum inverse is exact.
    """
    m, g = prep.mass, prep.gravity
    if not (g > 0):
        raise UnsupportedInversionError("gravity family requires g > 0")
    half = _ROOT_BRACKET_SIGMAS * prep.sigma_p

    return PhaseSpaceFamily(
        q_of=lambda q0, p0, t: q0 + p0 * np.asarray(t, dtype=float) / m
        - 0.5 * g * np.asarray(t, dtype=float) ** 2,
        p_of=lambda q0, p0, t: p0 - m * g * np.asarray(t, dtype=float)
        + 0.0 * np.asarray(q0, dtype=float),
        q0_from_q=lambda q, p0, t: np.asarray(q, dtype=float) - p0 * np.asarray(t, dtype=float) / m
        + 0.5 * g * np.asarray(t, dtype=float) ** 2,
        p0_from_q=lambda q, q0, t: m * (np.asarray(q, dtype=float) - q0) / np.asarray(t, dtype=float)
        + 0.5 * m * g * np.asarray(t, dtype=float),
        q0_from_p=None,
        p0_from_p=lambda p, q0, t: np.asarray(p, dtype=float) + m * g * np.asarray(t, dtype=float)
        + 0.0 * np.asarray(q0, dtype=float),
        t_from_q=None,   # the flow revisits positions: no single-valued inverse
        t_from_p=lambda p, q0, p0: (np.asarray(p0, dtype=float) - p) / (m * g),
        dq_dq0=lambda q0, p0, t: 1.0 + 0.0 * np.asarray(q0, dtype=float),
        dq_dp0=lambda q0, p0, t: np.asarray(t, dtype=float) / m + 0.0 * np.asarray(q0, dtype=float),
        dp_dq0=lambda q0, p0, t: 0.0 * np.asarray(q0, dtype=float),
        dp_dp0=lambda q0, p0, t: 1.0 + 0.0 * np.asarray(q0, dtype=float),
        dtq_dq0=None,
        dtp_dq0=lambda p, q0, p0: 0.0 * np.asarray(q0, dtype=float),
        dtp_dp0=lambda p, q0, p0: 1.0 / (m * g) + 0.0 * np.asarray(q0, dtype=float),
        p0_bracket=(prep.mean_p - half, prep.mean_p + half),
        p0_root_qp=lambda q, p, t: np.asarray(p, dtype=float) + m * g * np.asarray(t, dtype=float),
        p0_root_qt=lambda q, p, t: np.asarray(p, dtype=float) + m * g * np.asarray(t, dtype=float),
        name="classical uniform gravity",
    )
