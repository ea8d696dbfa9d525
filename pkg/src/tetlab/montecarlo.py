"""Trajectory-counting oracle: sample, evolve, histogram.

Independent validation route for every analytic density in the package:
initial conditions are drawn from the preparation with a counter-based
generator, evolved along the closed-form (or integrated) trajectories, and
every detector crossing is recorded as one histogram event. Recurrences
therefore contribute multiple events per trajectory, which is exactly the
bookkeeping the branch-sum densities encode with their 1/n weight.

Work is chunked in fixed-size blocks; when TETLAB_THREADS allows more than
one worker the blocks run on a thread pool and are merged in block order,
so histograms are bit-identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import GaussianPrep1D, InvalidParameterError, tabulated_inverse_cdf, worker_count
from .models import PREP_SUPPORT_SIGMAS, DoubleSlitConfig, doubleslit_psi_y_sq
from .tet1d import TrajectoryFamily1D

_CHUNK = 4096
_BISECT_ITERS = 42
_SCAN_STEPS = 2048


@dataclass(frozen=True)
class EnsembleConfig:
    """Monte Carlo run: sample count, seed, and histogram binning."""

    n_samples: int
    seed: int
    bins: int
    range: tuple[float, float]

    def __post_init__(self):
        if self.n_samples < 100:
            raise InvalidParameterError(f"n_samples must be >= 100, got {self.n_samples}")
        if self.bins < 10:
            raise InvalidParameterError(f"bins must be >= 10, got {self.bins}")
        if not (self.range[1] > self.range[0]):
            raise InvalidParameterError(f"range must increase, got {self.range}")


@dataclass(frozen=True)
class Histogram:
    """Event counts with a per-recorded-event density normalization."""

    bin_edges: np.ndarray
    counts: np.ndarray
    normalized_density: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.shape != (edges.size - 1,):
            raise InvalidParameterError("bin_edges and counts shapes are inconsistent")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        total = counts.sum()
        widths = np.diff(edges)
        if total > 0:
            density = counts / (total * widths)
        else:
            density = np.zeros_like(widths)
        object.__setattr__(self, "normalized_density", density)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def total_events(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_events(cls, events: np.ndarray, cfg: EnsembleConfig) -> "Histogram":
        counts, edges = np.histogram(np.asarray(events, dtype=float),
                                     bins=cfg.bins, range=cfg.range)
        return cls(bin_edges=edges, counts=counts)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def sample_initial_positions(prep: GaussianPrep1D, cfg: EnsembleConfig) -> np.ndarray:
    """Draw initial positions from |psi(q0, 0)|^2 with a counter-based RNG."""
    return _rng(cfg.seed).normal(prep.mean_q, prep.sigma0, cfg.n_samples)


def _chunk_crossing_events(traj: TrajectoryFamily1D, q0s: np.ndarray, q_detect: float,
                           scan_steps: int) -> np.ndarray:
    """All crossing times of the given trajectories, by scan plus bisection."""
    t_lo = max(0.0, traj.t_bracket[0])
    t_hi = traj.t_bracket[1]
    ts = np.linspace(t_lo, t_hi, scan_steps)
    vals = np.asarray(traj.q_of(q0s[:, None], ts[None, :]), dtype=float) - q_detect
    # exact zeros are a measure-zero accident for sampled q0; fold them into
    # the positive side so a node hit is not double counted
    neg = np.signbit(vals) & (vals != 0.0)
    rows, cols = np.nonzero(neg[:, :-1] != neg[:, 1:])
    if rows.size == 0:
        return np.empty(0)

    a = ts[cols]
    b = ts[cols + 1]
    fa = vals[rows, cols]
    samples = q0s[rows]
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        fm = np.asarray(traj.q_of(samples, mid), dtype=float) - q_detect
        left = fa * fm < 0
        b = np.where(left, mid, b)
        a = np.where(left, a, mid)
        fa = np.where(left, fa, fm)
    return 0.5 * (a + b)


def _run_chunked(worker, n_items: int) -> list:
    """Run worker(start, stop) over fixed-size blocks, in block order."""
    spans = [(s, min(s + _CHUNK, n_items)) for s in range(0, n_items, _CHUNK)]
    n_workers = worker_count()
    if n_workers == 1 or len(spans) == 1:
        return [worker(*span) for span in spans]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(lambda span: worker(*span), spans))


def count_crossing_times(traj: TrajectoryFamily1D, samples: np.ndarray, q_detect: float,
                         cfg: EnsembleConfig, scan_steps: int = _SCAN_STEPS) -> Histogram:
    """Histogram of every detector-crossing time in the ensemble.

    Each crossing of each trajectory is one event; trajectories that never
    reach the detector contribute nothing. The scan resolution only has to
    separate distinct crossings of one trajectory (tangent grazes carry no
    statistical weight); each bracketed crossing is then bisected until
    |Q(q0, t) - q_detect| is at machine level.
    """
    samples = np.asarray(samples, dtype=float)

    def worker(start: int, stop: int) -> np.ndarray:
        return _chunk_crossing_events(traj, samples[start:stop], q_detect, scan_steps)

    events = np.concatenate(_run_chunked(worker, samples.size) or [np.empty(0)])
    return Histogram.from_events(events, cfg)


def count_screen_positions(cfg_ds: DoubleSlitConfig, bm_y_traj: TrajectoryFamily1D,
                           cfg: EnsembleConfig) -> Histogram:
    """Histogram of screen positions for the double-slit ensemble.

    Longitudinal starts are uniform on [0, x_d] and transverse starts are
    drawn from |psi_y(y0, 0)|^2 by inverse CDF; each sample reaches the
    screen exactly once, at t* = (x_d - x0) m / p0x, where its transverse
    Bohmian position is recorded.
    """
    if cfg_ds.p0x <= 0:
        raise InvalidParameterError("screen counting requires motion toward the screen (p0x > 0)")
    p = cfg_ds.prep_y
    rng = _rng(cfg.seed)
    x0 = rng.uniform(0.0, cfg_ds.detector_x, cfg.n_samples)
    u = rng.random(cfg.n_samples)
    half = cfg_ds.slit_offset + PREP_SUPPORT_SIGMAS * p.sigma0
    inverse = tabulated_inverse_cdf(lambda y: doubleslit_psi_y_sq(cfg_ds, y, 0.0),
                                    -half, half)
    y0 = inverse(u)
    t_star = (cfg_ds.detector_x - x0) * p.mass / cfg_ds.p0x

    def worker(start: int, stop: int) -> np.ndarray:
        return np.asarray(bm_y_traj.q_of(y0[start:stop], t_star[start:stop]), dtype=float)

    y_screen = np.concatenate(_run_chunked(worker, cfg.n_samples))
    return Histogram.from_events(y_screen, cfg)
