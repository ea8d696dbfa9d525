"""Closed-form ingredients for the three case studies.

Free particle and free fall ship as analytic Bohmian trajectory families
(linear in the initial position, so Gaussian preparations stay Gaussian).
The double slit ships as a two-branch Gaussian superposition evolved
analytically per branch, plus the numerically integrated Bohmian
trajectories it induces in the slit direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    DegenerateDistributionError,
    GaussianPrep1D,
    Grid1D,
    InvalidParameterError,
    SampledDistribution,
    eval_gaussian,
    normalize,
)
from .tet1d import Preparation1D, TrajectoryFamily1D

PREP_SUPPORT_SIGMAS = 8.0


def position_preparation(prep: GaussianPrep1D) -> Preparation1D:
    """Initial-position density |psi(q0, 0)|^2 of the Gaussian preparation."""
    lo = prep.mean_q - PREP_SUPPORT_SIGMAS * prep.sigma0
    hi = prep.mean_q + PREP_SUPPORT_SIGMAS * prep.sigma0
    return Preparation1D(
        rho0=lambda q0: eval_gaussian(q0, prep.mean_q, prep.sigma0),
        support=(lo, hi),
    )


def classical_center(prep: GaussianPrep1D, t):
    """Center of the packet under classical motion (gravity included)."""
    t = np.asarray(t, dtype=float)
    out = prep.mean_q + prep.mean_p * t / prep.mass - 0.5 * prep.gravity * t**2
    return out if out.ndim else float(out)


def default_freeparticle_t_max(prep: GaussianPrep1D, q_detect: float = 0.0) -> float:
    """Crossing window: mean flight time plus eight crossing-time widths."""
    if prep.mean_p == 0:
        raise InvalidParameterError("mean momentum must be nonzero for a flight window")
    t_bar = prep.mass * (q_detect - prep.mean_q) / prep.mean_p
    if t_bar <= 0:
        raise InvalidParameterError(
            f"detector at {q_detect} is behind the moving packet"
        )
    spread = prep.sigma_t(t_bar) * prep.mass / abs(prep.mean_p)
    return t_bar + 8.0 * spread


def default_freefall_t_max(prep: GaussianPrep1D, q_detect: float = 0.0) -> float:
    """Crossing window: 1.5x the later classical crossing of the detector."""
    # roots of mean_q + mean_p t / m - g t^2 / 2 = q_detect
    a = -0.5 * prep.gravity
    b = prep.mean_p / prep.mass
    c = prep.mean_q - q_detect
    disc = b * b - 4.0 * a * c
    if disc > 0:
        t2 = (-b - np.sqrt(disc)) / (2.0 * a)  # a < 0, so this is the later root
        if t2 > 0:
            return 1.5 * float(t2)
    return 3.0 * prep.mean_p / (prep.mass * prep.gravity)


def freeparticle_bm_family(prep: GaussianPrep1D, t_max: float | None = None,
                           q_detect: float = 0.0) -> TrajectoryFamily1D:
    """Bohmian trajectories of a free Gaussian packet.

    Q(q0, t) = mean_q + mean_p t / m + spread(t) (q0 - mean_q), where the
    spreading factor sqrt(1 + (omega t)^2) carries the quantum dispersion.
    """
    if prep.gravity != 0.0:
        raise InvalidParameterError("free-particle family requires gravity = 0")
    w, m = prep.omega, prep.mass
    qb, pb = prep.mean_q, prep.mean_p
    if t_max is None:
        t_max = default_freeparticle_t_max(prep, q_detect)

    def spread(t):
        return np.sqrt(1.0 + (w * t) ** 2)

    return TrajectoryFamily1D(
        q_of=lambda q0, t: qb + pb * t / m + spread(t) * (q0 - qb),
        dq_dq0=lambda q0, t: spread(t) + 0.0 * np.asarray(q0, dtype=float),
        dq_dt=lambda q0, t: pb / m + w**2 * np.asarray(t, dtype=float)
        * (np.asarray(q0, dtype=float) - qb) / spread(t),
        q0_of=lambda q, t: qb + (np.asarray(q, dtype=float) - qb - pb * t / m) / spread(t),
        t_bracket=(0.0, float(t_max)),
        name="free particle BM",
    )


def freeparticle_psi_sq(prep: GaussianPrep1D, q, t):
    """|psi(q, t)|^2 of the free Gaussian packet: drifting, spreading Gaussian."""
    return eval_gaussian(q, prep.mean_q + prep.mean_p * np.asarray(t, dtype=float) / prep.mass,
                         prep.sigma_t(t))


def freefall_bm_family(prep: GaussianPrep1D, t_max: float | None = None,
                       q_detect: float = 0.0) -> TrajectoryFamily1D:
    """Bohmian trajectories of a Gaussian packet in a uniform gravitational field.

    Identical to the free-particle family with the classical parabolic drift
    added to the center; every trajectory is still linear in q0.
    """
    if not (prep.gravity > 0):
        raise InvalidParameterError("free-fall family requires gravity > 0")
    w, m, g = prep.omega, prep.mass, prep.gravity
    qb, pb = prep.mean_q, prep.mean_p
    if t_max is None:
        t_max = default_freefall_t_max(prep, q_detect)

    def spread(t):
        return np.sqrt(1.0 + (w * t) ** 2)

    def center(t):
        return qb + pb * t / m - 0.5 * g * np.asarray(t, dtype=float) ** 2

    # search window twice the grid window: a trajectory whose late crossing
    # falls just beyond the plotted times must still count as recurrent,
    # or the 1/n weight jumps and the density tail turns jagged
    return TrajectoryFamily1D(
        q_of=lambda q0, t: center(t) + spread(t) * (np.asarray(q0, dtype=float) - qb),
        dq_dq0=lambda q0, t: spread(t) + 0.0 * np.asarray(q0, dtype=float),
        dq_dt=lambda q0, t: pb / m - g * np.asarray(t, dtype=float)
        + w**2 * np.asarray(t, dtype=float) * (np.asarray(q0, dtype=float) - qb) / spread(t),
        q0_of=lambda q, t: qb + (np.asarray(q, dtype=float) - center(t)) / spread(t),
        t_bracket=(0.0, 2.0 * float(t_max)),
        name="free fall BM",
    )


def freefall_psi_sq(prep: GaussianPrep1D, q, t):
    """|psi(q, t)|^2 for the falling packet: Gaussian around the classical center.

    Follows from the trajectory family being linear in q0, and is verified
    independently against split-step propagation in the test suite.
    """
    return eval_gaussian(q, classical_center(prep, t), prep.sigma_t(t))


def freefall_velocity_field(prep: GaussianPrep1D, q, t):
    """Bohmian velocity field of the falling packet (finite at t = 0)."""
    t = np.asarray(t, dtype=float)
    w, m, g = prep.omega, prep.mass, prep.gravity
    drift = prep.mean_p / m - g * t
    correction = w**2 * t * (np.asarray(q, dtype=float) - classical_center(prep, t)) \
        / (1.0 + (w * t) ** 2)
    out = drift + correction
    return out if out.ndim else float(out)


def freefall_ml_pdf(prep: GaussianPrep1D, q: float, time_grid: Grid1D) -> SampledDistribution:
    """Arrival-time density from the bare probability current, |v| |psi|^2.

    This is the Muga-Leavens construction: no per-branch recurrence weight,
    just the normalized modulus of the current at the detector.
    """
    ts = time_grid.points
    density = np.abs(freefall_velocity_field(prep, q, ts)) * freefall_psi_sq(prep, q, ts)
    if not np.any(density > 0):
        raise DegenerateDistributionError(f"current density has no mass at q={q}")
    return normalize(SampledDistribution(time_grid, density, f"wp_t|q ML q={q:g}"))


# --------------------------------------------------------------------------
# double slit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubleSlitConfig:
    """Two-slit setup: slits at +/- slit_offset on x=0, screen at x=detector_x.

    The transverse state is a symmetric pair of Gaussian branches with
    opposite momenta +/- prep_y.mean_p; the longitudinal motion is a
    box-normalized plane wave with momentum p0x, so position and flight
    time along x are uniform on their intervals. ``energy`` only ever
    contributes a global phase and never enters any density.
    """

    prep_y: GaussianPrep1D
    slit_offset: float
    p0x: float
    detector_x: float
    energy: float = 0.0

    def __post_init__(self):
        if not (self.slit_offset > 0):
            raise InvalidParameterError(f"slit_offset must be > 0, got {self.slit_offset}")
        if self.p0x == 0:
            raise InvalidParameterError("p0x must be nonzero")
        if not (self.detector_x > 0):
            raise InvalidParameterError(f"detector_x must be > 0, got {self.detector_x}")
        if self.prep_y.gravity != 0:
            raise InvalidParameterError("transverse preparation must be gravity-free")

    @property
    def t_d(self) -> float:
        """Classical flight time to the screen, m * x_d / |p0x|."""
        return self.prep_y.mass * self.detector_x / abs(self.p0x)

    def y_halfwidth(self, n_sigmas: float = 8.0) -> float:
        """Transverse window covering both branches up to the screen time."""
        p = self.prep_y
        drift = self.slit_offset + abs(p.mean_p) * self.t_d / p.mass
        return drift + n_sigmas * p.sigma_t(self.t_d)


def _slit_branches(cfg: DoubleSlitConfig, y, t):
    """The two freely evolving Gaussian branches of the slit state (unnormalized).

    The branch emerging from the slit at +/- slit_offset carries transverse
    momentum -/+ mean_p: the branches converge on the symmetry axis, which is
    what lets the screen patterns build a central interference region. The
    t = 0 density is unchanged under flipping both momenta, so this
    convention is fixed by the evolved patterns, not the initial state.
    """
    p = cfg.prep_y
    y = np.asarray(y, dtype=complex)
    t = np.asarray(t, dtype=float)
    w, m, hbar, s0 = p.omega, p.mass, p.hbar, p.sigma0
    alpha = 1.0 + 1j * w * t
    amp = (2.0 * np.pi * s0**2) ** -0.25 / np.sqrt(alpha)
    out = []
    for sgn in (-1.0, +1.0):
        c, pbar = sgn * cfg.slit_offset, -sgn * p.mean_p
        drifted = y - c - pbar * t / m
        phase = pbar * (y - c) / hbar - pbar**2 * t / (2.0 * m * hbar)
        out.append(amp * np.exp(-drifted**2 / (4.0 * s0**2 * alpha) + 1j * phase))
    return out[0], out[1]


@lru_cache(maxsize=32)
def _slit_norm(cfg: DoubleSlitConfig) -> float:
    """Quadrature norm of the unnormalized slit state at t = 0."""
    p = cfg.prep_y
    half = cfg.slit_offset + PREP_SUPPORT_SIGMAS * p.sigma0
    ys = np.linspace(-half, half, 20001)
    minus, plus = _slit_branches(cfg, ys, 0.0)
    total = float(np.trapezoid(np.abs(minus + plus) ** 2, ys))
    if not np.isfinite(total) or total <= 0:
        raise DegenerateDistributionError("slit state has no finite norm")
    return np.sqrt(total)


def slit_norm_report(cfg: DoubleSlitConfig) -> dict:
    """Compare closed-form normalizations of the slit state against quadrature.

    The closed-form squared norm is 2 [1 + exp(-y_s^2/(2 s0^2) - 2 p0y^2 s0^2
    / hbar^2)]; the sign-flipped momentum term is also reported because it is
    an easy transcription error whose exponent can overflow. Raises
    InvalidParameterError when that flipped exponent is too large to evaluate.
    """
    p = cfg.prep_y
    base = -cfg.slit_offset**2 / (2.0 * p.sigma0**2)
    cross = 2.0 * p.mean_p**2 * p.sigma0**2 / p.hbar**2
    if base + cross > 700.0:
        raise InvalidParameterError(
            "sign-flipped normalization exponent overflows; "
            "use the quadrature norm instead"
        )
    return {
        "closed_form_norm_sq": 2.0 * (1.0 + np.exp(base - cross)),
        "sign_flipped_norm_sq": 2.0 * (1.0 + np.exp(base + cross)),
        "quadrature_norm_sq": _slit_norm(cfg) ** 2,
    }


def doubleslit_psi_y0(cfg: DoubleSlitConfig, y):
    """Transverse slit-state amplitude at t = 0, normalized by quadrature."""
    minus, plus = _slit_branches(cfg, y, 0.0)
    out = (minus + plus) / _slit_norm(cfg)
    return out if out.ndim else complex(out)


def doubleslit_psi_y(cfg: DoubleSlitConfig, y, t):
    """Transverse slit-state amplitude at time t (analytic branch evolution)."""
    minus, plus = _slit_branches(cfg, y, t)
    out = (minus + plus) / _slit_norm(cfg)
    return out if out.ndim else complex(out)


def doubleslit_psi_y_sq(cfg: DoubleSlitConfig, y, t):
    """Transverse probability density |psi_y(y, t)|^2."""
    out = np.abs(doubleslit_psi_y(cfg, y, t)) ** 2
    return out if np.ndim(out) else float(out)


def doubleslit_velocity_y(cfg: DoubleSlitConfig, y, t):
    """Bohmian transverse velocity field hbar Im(d_y psi / psi) / m."""
    p = cfg.prep_y
    minus, plus = _slit_branches(cfg, y, t)
    t = np.asarray(t, dtype=float)
    alpha = 1.0 + 1j * p.omega * t
    grads = []
    for sgn, branch in ((-1.0, minus), (+1.0, plus)):
        c, pbar = sgn * cfg.slit_offset, -sgn * p.mean_p
        drifted = np.asarray(y, dtype=complex) - c - pbar * t / p.mass
        grads.append(branch * (-drifted / (2.0 * p.sigma0**2 * alpha) + 1j * pbar / p.hbar))
    psi = minus + plus
    dpsi = grads[0] + grads[1]
    ratio = np.divide(dpsi, psi, out=np.zeros_like(dpsi), where=np.abs(psi) > 0)
    out = p.hbar * np.imag(ratio) / p.mass
    return out if out.ndim else float(out)


def doubleslit_x_pdf(cfg: DoubleSlitConfig, x, t=0.0):
    """Longitudinal position density: uniform 1/x_d on [0, x_d], any t."""
    x = np.asarray(x, dtype=float)
    out = np.where((x >= 0.0) & (x <= cfg.detector_x), 1.0 / cfg.detector_x, 0.0)
    return out if out.ndim else float(out)


def doubleslit_time_pdf(cfg: DoubleSlitConfig, t):
    """Screen flight-time density: uniform 1/t_d on [0, t_d]."""
    t = np.asarray(t, dtype=float)
    out = np.where((t >= 0.0) & (t <= cfg.t_d), 1.0 / cfg.t_d, 0.0)
    return out if out.ndim else float(out)


def doubleslit_screen_pdf_bm(cfg: DoubleSlitConfig, y_grid: Grid1D,
                             n_time: int = 256) -> SampledDistribution:
    """Screen pattern as the flight-time average of |psi_y|^2 over [0, t_d].

    The average over the uniform flight-time law preserves the central
    fringes that any single-time snapshot progressively loses.
    """
    if n_time < 16:
        raise InvalidParameterError(f"n_time must be >= 16, got {n_time}")
    ts = np.linspace(0.0, cfg.t_d, n_time)
    ys = y_grid.points
    dens = doubleslit_psi_y_sq(cfg, ys[:, None], ts[None, :])
    avg = np.trapezoid(dens, ts, axis=1) / cfg.t_d
    return normalize(SampledDistribution(y_grid, avg, "wp_y|x BM"))


def doubleslit_screen_pdf_ct(cfg: DoubleSlitConfig, y_grid: Grid1D) -> SampledDistribution:
    """Screen pattern as the single-time snapshot |psi_y(y, t_d)|^2."""
    dens = doubleslit_psi_y_sq(cfg, y_grid.points, cfg.t_d)
    return normalize(SampledDistribution(y_grid, dens, "wp_y|x CT"))


def doubleslit_bm_y_family(cfg: DoubleSlitConfig, n_steps: int = 2048) -> TrajectoryFamily1D:
    """Transverse Bohmian trajectories of the slit state.

    No closed form exists, so trajectories integrate the velocity field with
    fixed-step RK4 (step t_d / n_steps). ``q_of`` and ``q0_of`` accept arrays
    of matching shape for initial values and times, which the Monte Carlo
    counter relies on; results are independent of batching.
    """
    t_d = cfg.t_d
    dt = t_d / n_steps

    def _march(y_start, t_start, t_end):
        y0a, ta, tb = np.broadcast_arrays(
            np.asarray(y_start, dtype=float),
            np.asarray(t_start, dtype=float),
            np.asarray(t_end, dtype=float),
        )
        shape = y0a.shape
        y = y0a.astype(float).ravel().copy()
        tau = ta.astype(float).ravel().copy()
        target = tb.astype(float).ravel()
        sign = np.sign(target - tau)
        for _ in range(n_steps):
            h_all = sign * np.minimum(np.abs(target - tau), dt)
            act = np.flatnonzero(h_all != 0.0)
            if act.size == 0:
                break
            # per-element step sizes let one pass serve mixed target times
            ya, taua, h = y[act], tau[act], h_all[act]
            k1 = doubleslit_velocity_y(cfg, ya, taua)
            k2 = doubleslit_velocity_y(cfg, ya + 0.5 * h * k1, taua + 0.5 * h)
            k3 = doubleslit_velocity_y(cfg, ya + 0.5 * h * k2, taua + 0.5 * h)
            k4 = doubleslit_velocity_y(cfg, ya + h * k3, taua + h)
            y[act] = ya + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            tau[act] = taua + h
        out = y.reshape(shape)
        return out if shape else float(out)

    def q_of(y0, t):
        return _march(y0, 0.0, t)

    def q0_of(y, t):
        return _march(y, t, 0.0)

    def dq_dq0(y0, t, h: float = 1e-6):
        return (q_of(np.asarray(y0) + h, t) - q_of(np.asarray(y0) - h, t)) / (2.0 * h)

    def dq_dt(y0, t):
        return doubleslit_velocity_y(cfg, q_of(y0, t), t)

    return TrajectoryFamily1D(
        q_of=q_of, dq_dq0=dq_dq0, dq_dt=dq_dt, q0_of=q0_of,
        t_bracket=(0.0, t_d), name="double slit BM (y)",
    )
