"""Experiment composition: named figure presets and the time-marginal law.

``run_figure`` assembles the full curve set for each canonical experiment
(free-particle arrival times, free-fall trajectory fans and arrival times,
double-slit screen patterns), on shared grids, with the Monte Carlo
histogram where the study calls for one. ``marginalize_time`` is the
general composition rule turning a time-conditioned position density plus
a flight-time density into the unconditioned position density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import models
from .core import (
    GaussianPrep1D,
    Grid1D,
    InvalidParameterError,
    SampledDistribution,
    eval_gaussian,
    normalize,
    tabulated_inverse_cdf,
)
from .kijowski import tabulate_kijowski
from .montecarlo import EnsembleConfig, Histogram, count_crossing_times, \
    count_screen_positions, sample_initial_positions
from .phasespace import (
    classical_free_family,
    default_momentum_grid,
    gaussian_phase_preparation,
    joint_pt_pdf,
    marginalize_p,
)
from .tet1d import tabulate_flighttime

DEFAULT_SEED = 20240815

FIGURE_PRESETS: dict[str, dict[str, float]] = {
    "fig1a": {"sigma0": 2.0, "q0bar": -15.0, "p0bar": 1.0, "mass": 0.5, "hbar": 1.0,
              "g": 0.0, "t_max": 15.0, "grid_n": 600},
    "fig1b": {"sigma0": 2.0, "q0bar": -15.0, "p0bar": 20.0, "mass": 10.0, "hbar": 1.0,
              "g": 0.0, "t_max": 15.0, "grid_n": 600},
    "fig2a": {"sigma0": 1.0, "q0bar": -8.0, "p0bar": 10.0, "mass": 0.5, "hbar": 1.0,
              "g": 10.0, "grid_n": 512},
    "fig2b": {"sigma0": 2.0, "q0bar": -8.0, "p0bar": 40.0, "mass": 2.0, "hbar": 1.0,
              "g": 10.0, "grid_n": 512},
    "fig3a": {"sigma0": 1.0, "q0bar": -8.0, "p0bar": 9.0, "mass": 0.5, "hbar": 1.0,
              "g": 10.0, "t_max": 4.0, "grid_n": 801, "samples": 10_000, "bins": 100},
    "fig3b": {"sigma0": 2.0, "q0bar": -8.0, "p0bar": 36.0, "mass": 2.0, "hbar": 1.0,
              "g": 10.0, "t_max": 4.0, "grid_n": 801, "samples": 10_000, "bins": 100},
    "fig4a": {"sigma0": 1.0, "p0y": 2.0, "p0x": 1.0, "mass": 0.5, "hbar": 1.0,
              "xd": 1.0, "ys": 2.0, "grid_n": 1201, "samples": 10_000, "bins": 100},
    "fig4b": {"sigma0": 1.0, "p0y": 2.0, "p0x": 1.0, "mass": 0.5, "hbar": 1.0,
              "xd": 3.0, "ys": 2.0, "grid_n": 1201, "samples": 10_000, "bins": 100},
}


@dataclass(frozen=True)
class ExperimentResult:
    """Curve set, optional histogram, and reproduction metadata of one run."""

    curves: dict[str, SampledDistribution]
    histogram: Histogram | None
    metadata: dict
    trajectories: np.ndarray | None = None
    trajectory_grid: Grid1D | None = None

    def __post_init__(self):
        grids = {c.grid for c in self.curves.values()}
        if len(grids) > 1:
            raise InvalidParameterError("result curves must share one grid")


def marginalize_time(cond_pdf: Callable, time_pdf: SampledDistribution,
                     y_grid: Grid1D) -> SampledDistribution:
    """Position density from a (position | time) density and a flight-time law.

    Trapezoid-integrates cond_pdf(y, t) * time_pdf(t) over the flight-time
    grid for every y, then normalizes on ``y_grid``. ``time_pdf`` must
    already be normalized.
    """
    if not isinstance(y_grid, Grid1D) or not isinstance(time_pdf, SampledDistribution):
        raise InvalidParameterError("marginalize_time needs a Grid1D and a SampledDistribution")
    if abs(time_pdf.integral() - 1.0) > 1e-6:
        raise InvalidParameterError(
            f"flight-time density is not normalized (integral {time_pdf.integral():.6g})"
        )
    ts = time_pdf.grid.points
    ys = y_grid.points
    try:
        vals = np.asarray(cond_pdf(ys[:, None], ts[None, :]), dtype=float)
        if vals.shape != (ys.size, ts.size):
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([[cond_pdf(float(y), float(t)) for t in ts] for y in ys])
    dens = np.trapezoid(vals * time_pdf.density[None, :], ts, axis=1)
    return normalize(SampledDistribution(y_grid, dens, "wp_y|x"))


def classical_flighttime_curve(prep: GaussianPrep1D, q_detect: float,
                               time_grid: Grid1D) -> SampledDistribution:
    """Classical flight-time density at a detector, by momentum marginalization."""
    fam = classical_free_family(prep)
    phase_prep = gaussian_phase_preparation(prep)
    p_grid = default_momentum_grid(prep)
    dens = np.array([
        marginalize_p(lambda p: joint_pt_pdf(fam, phase_prep, q_detect, p, t), p_grid)
        for t in time_grid.points
    ])
    return normalize(SampledDistribution(time_grid, dens, "wp_t|q C"))


def _prep_from(params: dict) -> GaussianPrep1D:
    return GaussianPrep1D(
        mean_q=params["q0bar"], mean_p=params["p0bar"], sigma0=params["sigma0"],
        mass=params["mass"], hbar=params["hbar"], gravity=params["g"],
    )


def _slit_cfg_from(params: dict) -> models.DoubleSlitConfig:
    prep_y = GaussianPrep1D(mean_q=0.0, mean_p=params["p0y"], sigma0=params["sigma0"],
                            mass=params["mass"], hbar=params["hbar"], gravity=0.0)
    return models.DoubleSlitConfig(prep_y=prep_y, slit_offset=params["ys"],
                                   p0x=params["p0x"], detector_x=params["xd"],
                                   energy=params["p0x"] ** 2 / (2.0 * params["mass"]))


def _run_fig1(params: dict, figure_id: str) -> ExperimentResult:
    prep = _prep_from(params)
    grid = Grid1D(0.0, params["t_max"], int(params["grid_n"]))
    family = models.freeparticle_bm_family(prep, t_max=max(params["t_max"] * 1.01,
                                                           models.default_freeparticle_t_max(prep)))
    bm = tabulate_flighttime(family, models.position_preparation(prep), 0.0, grid,
                             method="current")
    classical = classical_flighttime_curve(prep, 0.0, grid)
    kijowski = tabulate_kijowski(prep, grid)
    return ExperimentResult(
        curves={"classical": classical, "bm": bm, "kijowski": kijowski},
        histogram=None,
        metadata=_metadata(figure_id, params, "t", grid),
    )


def _run_fig2(params: dict, figure_id: str) -> ExperimentResult:
    prep = _prep_from(params)
    t_max = params.get("t_max") or models.default_freefall_t_max(prep)
    grid = Grid1D(0.0, float(t_max), int(params["grid_n"]))
    family = models.freefall_bm_family(prep, t_max=float(t_max))
    n_traj = int(params.get("samples") or 100)
    quantiles = (np.arange(n_traj) + 0.5) / n_traj
    inverse = tabulated_inverse_cdf(lambda q0: eval_gaussian(q0, prep.mean_q, prep.sigma0),
                                    prep.mean_q - 8 * prep.sigma0,
                                    prep.mean_q + 8 * prep.sigma0)
    q0s = inverse(quantiles)
    paths = np.asarray(family.q_of(q0s[:, None], grid.points[None, :]), dtype=float)
    return ExperimentResult(
        curves={}, histogram=None,
        metadata=_metadata(figure_id, params, "t", grid),
        trajectories=paths, trajectory_grid=grid,
    )


def _run_fig3(params: dict, figure_id: str) -> ExperimentResult:
    prep = _prep_from(params)
    grid = Grid1D(0.0, params["t_max"], int(params["grid_n"]))
    family = models.freefall_bm_family(prep)
    bm = tabulate_flighttime(family, models.position_preparation(prep), 0.0, grid,
                             method="branch-sum")
    ml = models.freefall_ml_pdf(prep, 0.0, grid)
    ens = EnsembleConfig(n_samples=int(params["samples"]), seed=int(params["seed"]),
                         bins=int(params["bins"]), range=(grid.lo, grid.hi))
    hist = count_crossing_times(family, sample_initial_positions(prep, ens), 0.0, ens)
    return ExperimentResult(
        curves={"bm": bm, "ml": ml}, histogram=hist,
        metadata=_metadata(figure_id, params, "t", grid),
    )


def _run_fig4(params: dict, figure_id: str) -> ExperimentResult:
    cfg = _slit_cfg_from(params)
    half = float(params.get("y_halfwidth") or cfg.y_halfwidth())
    grid = Grid1D(-half, half, int(params["grid_n"]))
    time_grid = Grid1D(0.0, cfg.t_d, 257)
    uniform = SampledDistribution(time_grid, models.doubleslit_time_pdf(cfg, time_grid.points),
                                  "wp_t|x")
    bm = marginalize_time(lambda y, t: models.doubleslit_psi_y_sq(cfg, y, t), uniform, grid)
    bm = SampledDistribution(bm.grid, bm.density, "wp_y|x BM")
    ct = models.doubleslit_screen_pdf_ct(cfg, grid)
    ens = EnsembleConfig(n_samples=int(params["samples"]), seed=int(params["seed"]),
                         bins=int(params["bins"]), range=(-half, half))
    hist = count_screen_positions(cfg, models.doubleslit_bm_y_family(cfg), ens)
    meta = _metadata(figure_id, params, "y", grid)
    try:
        meta["slit_norm_check"] = models.slit_norm_report(cfg)
    except InvalidParameterError as exc:
        meta["slit_norm_check"] = {"error": str(exc)}
    return ExperimentResult(
        curves={"bm": bm, "ct": ct}, histogram=hist, metadata=meta,
    )


def _metadata(figure_id: str, params: dict, abscissa: str, grid: Grid1D) -> dict:
    return {
        "figure": figure_id,
        "parameters": dict(sorted(params.items())),
        "seed": int(params.get("seed", DEFAULT_SEED)),
        "abscissa": abscissa,
        "grid": {"lo": grid.lo, "hi": grid.hi, "n_points": grid.n_points},
    }


def run_figure(figure_id: str, overrides: dict | None = None) -> ExperimentResult:
    """Build the full result set of one named experiment.

    ``overrides`` is shallow-merged over the preset parameters; unknown
    figure ids and unknown override keys are rejected. Deterministic for a
    fixed (figure_id, overrides, seed).
    """
    if figure_id not in FIGURE_PRESETS:
        raise InvalidParameterError(
            f"unknown figure {figure_id!r}; expected one of {sorted(FIGURE_PRESETS)}"
        )
    params = {"seed": DEFAULT_SEED, **FIGURE_PRESETS[figure_id]}
    for key, value in (overrides or {}).items():
        if key not in _ALLOWED_KEYS:
            raise InvalidParameterError(f"unknown parameter {key!r}")
        params[key] = value
    if figure_id.startswith("fig1"):
        return _run_fig1(params, figure_id)
    if figure_id.startswith("fig2"):
        return _run_fig2(params, figure_id)
    if figure_id.startswith("fig3"):
        return _run_fig3(params, figure_id)
    return _run_fig4(params, figure_id)


_ALLOWED_KEYS = frozenset({
    "sigma0", "q0bar", "p0bar", "mass", "hbar", "g", "xd", "ys", "p0x", "p0y",
    "samples", "seed", "bins", "grid_n", "t_max", "y_halfwidth",
})
