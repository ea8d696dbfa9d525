"""Command-line front end: run experiments, emit CSV/JSON/SVG.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical-accuracy
error. Every run writes a ``run.json`` with the parameters, seed, grid and
tool version needed to reproduce it; output bytes are deterministic for a
fixed configuration, including across TETLAB_THREADS settings.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import AccuracyError, InvalidParameterError
from .pipeline import FIGURE_PRESETS, ExperimentResult, run_figure

_PARAM_KEYS = (
    "sigma0", "q0bar", "p0bar", "mass", "hbar", "g", "xd", "ys", "p0x", "p0y",
    "samples", "seed", "bins", "grid_n", "t_max", "y_halfwidth",
)
_COMMANDS = ("free-particle", "free-fall", "double-slit", "figure")
_COMMAND_FIGURES = {"free-particle": "fig1a", "free-fall": "fig3a", "double-slit": "fig4a"}
_FORMATS = ("csv", "json", "svg")

_USAGE = f"""usage: tetlab COMMAND [--key=value ...]

commands: {', '.join(_COMMANDS)}

flags:
  --id=figNN            figure preset to run (figure command only)
  --config FILE         key=value file ('#' comments); flags override it
  --output-dir=DIR      where to write results (default: ./results)
  --formats=csv,json,svg  subset of output formats (default: all)
  --<param>=NUMBER      parameter override; params: {', '.join(_PARAM_KEYS)}
"""


class UsageError(Exception):
    """Bad command line or config file; maps to exit status 1."""


@dataclass
class RunConfig:
    """Parsed invocation: command, parameter overrides, output destinations."""

    command: str
    parameters: dict[str, float] = field(default_factory=dict)
    output_dir: Path = Path("results")
    formats: tuple[str, ...] = _FORMATS
    figure_id: str | None = None


def _parse_number(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"malformed number for --{key}: {raw!r}")


def _read_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    return pairs


def parse_args(argv: list[str]) -> RunConfig:
    """Parse ``command --key=value ...`` into a RunConfig.

    Raises UsageError on unknown commands, unknown keys, or malformed
    numbers; a ``--config`` file is applied first, flags override it.
    """
    if not argv:
        raise UsageError("missing command")
    command, raw = argv[0], argv[1:]
    if command in ("-h", "--help"):
        raise UsageError("")
    if command not in _COMMANDS:
        raise UsageError(f"unknown command {command!r}")

    flat: dict[str, str] = {}
    config_path: str | None = None
    i = 0
    while i < len(raw):
        token = raw[i]
        if not token.startswith("--"):
            raise UsageError(f"unexpected argument {token!r}")
        body = token[2:]
        if "=" in body:
            key, value = body.split("=", 1)
        else:
            key = body
            if i + 1 >= len(raw):
                raise UsageError(f"flag --{key} needs a value")
            i += 1
            value = raw[i]
        if key == "config":
            config_path = value
        else:
            flat[key] = value
        i += 1

    merged: dict[str, str] = {}
    if config_path is not None:
        merged.update(_read_config_file(config_path))
    merged.update(flat)

    cfg = RunConfig(command=command)
    for key, value in merged.items():
        if key == "id":
            cfg.figure_id = value
        elif key == "output-dir" or key == "output_dir":
            cfg.output_dir = Path(value)
        elif key == "formats":
            formats = tuple(part.strip() for part in value.split(",") if part.strip())
            bad = [f for f in formats if f not in _FORMATS]
            if bad or not formats:
                raise UsageError(f"formats must be a subset of {_FORMATS}, got {value!r}")
            cfg.formats = formats
        elif key in _PARAM_KEYS:
            cfg.parameters[key] = _parse_number(key, value)
        else:
            raise UsageError(f"unknown flag --{key}")

    if command == "figure":
        if cfg.figure_id is None:
            raise UsageError("the figure command needs --id=figNN")
        if cfg.figure_id not in FIGURE_PRESETS:
            raise UsageError(
                f"unknown figure {cfg.figure_id!r}; expected one of {sorted(FIGURE_PRESETS)}"
            )
    else:
        cfg.figure_id = _COMMAND_FIGURES[command]
    return cfg


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def emit_csv(result: ExperimentResult, path: Path) -> None:
    """Write the curve set (or trajectory fan) as CSV, plus any histogram.

    First column is the abscissa; one column per curve, named by its result
    key; the histogram goes to a ``<name>.hist.csv`` side file with columns
    bin_lo,bin_hi,count,density. Floats carry 17 significant digits so a
    read-back is bit-exact.
    """
    abscissa = result.metadata.get("abscissa", "x")
    lines: list[str] = []
    if result.curves:
        names = list(result.curves)
        xs = next(iter(result.curves.values())).grid.points
        lines.append(",".join([abscissa] + names))
        columns = [result.curves[name].density for name in names]
        for i, x in enumerate(xs):
            lines.append(",".join([_fmt(x)] + [_fmt(col[i]) for col in columns]))
    elif result.trajectories is not None:
        paths = result.trajectories
        names = [f"traj_{k:03d}" for k in range(paths.shape[0])]
        xs = result.trajectory_grid.points
        lines.append(",".join([abscissa] + names))
        for i, x in enumerate(xs):
            lines.append(",".join([_fmt(x)] + [_fmt(paths[k, i]) for k in range(paths.shape[0])]))
    else:
        raise InvalidParameterError("result has neither curves nor trajectories")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    if result.histogram is not None:
        hist = result.histogram
        hlines = ["bin_lo,bin_hi,count,density"]
        for lo, hi, count, density in zip(hist.bin_edges[:-1], hist.bin_edges[1:],
                                          hist.counts, hist.normalized_density):
            hlines.append(",".join([_fmt(lo), _fmt(hi), str(int(count)), _fmt(density)]))
        hist_path = path.with_name(path.name.removesuffix(".csv") + ".hist.csv")
        hist_path.write_text("\n".join(hlines) + "\n", encoding="utf-8")


def emit_json(result: ExperimentResult, path: Path) -> None:
    """Write the same content as the CSV pair, as one JSON document."""
    doc: dict = {"metadata": result.metadata}
    abscissa = result.metadata.get("abscissa", "x")
    if result.curves:
        xs = next(iter(result.curves.values())).grid.points
        doc["abscissa"] = {"name": abscissa, "values": xs.tolist()}
        doc["curves"] = {name: curve.density.tolist() for name, curve in result.curves.items()}
    if result.trajectories is not None:
        doc["abscissa"] = {"name": abscissa, "values": result.trajectory_grid.points.tolist()}
        doc["trajectories"] = result.trajectories.tolist()
    if result.histogram is not None:
        hist = result.histogram
        doc["histogram"] = {
            "bin_lo": hist.bin_edges[:-1].tolist(),
            "bin_hi": hist.bin_edges[1:].tolist(),
            "count": hist.counts.tolist(),
            "density": hist.normalized_density.tolist(),
        }
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 800, 520
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def emit_svg(result: ExperimentResult, path: Path) -> None:
    """Write a standalone deterministic SVG line chart of the result.

    One polyline per curve, dots for histogram densities, tick marks and a
    legend from the curve names. Byte output depends only on the input.
    """
    series: list[tuple[str, np.ndarray, np.ndarray]] = []
    if result.curves:
        for name, curve in result.curves.items():
            series.append((name, curve.grid.points, curve.density))
    elif result.trajectories is not None:
        xs = result.trajectory_grid.points
        for k in range(result.trajectories.shape[0]):
            series.append((f"traj_{k:03d}", xs, result.trajectories[k]))
    if not series:
        raise InvalidParameterError("nothing to draw: empty curve set")

    dots = None
    if result.histogram is not None:
        dots = (result.histogram.bin_centers, result.histogram.normalized_density)

    x_lo = min(float(xs[0]) for _, xs, _ in series)
    x_hi = max(float(xs[-1]) for _, xs, _ in series)
    y_vals = [ys for _, _, ys in series] + ([dots[1]] if dots is not None else [])
    y_lo = min(0.0, min(float(np.min(ys)) for ys in y_vals))
    y_hi = max(float(np.max(ys)) for ys in y_vals)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi *= 1.05

    def px(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y: float) -> float:
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    for tx in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(tx):.2f}" y1="{_H - _MB}" x2="{px(tx):.2f}" '
                   f'y2="{_H - _MB + 5}" stroke="#333333"/>')
        out.append(f'<text x="{px(tx):.2f}" y="{_H - _MB + 18}" font-size="11" '
                   f'text-anchor="middle" fill="#333333">{tx:.4g}</text>')
    for ty in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{_ML - 5}" y1="{py(ty):.2f}" x2="{_ML}" '
                   f'y2="{py(ty):.2f}" stroke="#333333"/>')
        out.append(f'<text x="{_ML - 8}" y="{py(ty):.2f}" font-size="11" '
                   f'text-anchor="end" dominant-baseline="middle" '
                   f'fill="#333333">{ty:.4g}</text>')
    out.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" font-size="13" '
               f'text-anchor="middle" fill="#333333">'
               f'{result.metadata.get("abscissa", "x")}</text>')

    fan = result.trajectories is not None and not result.curves
    for idx, (name, xs, ys) in enumerate(series):
        color = "#1f77b4" if fan else _PALETTE[idx % len(_PALETTE)]
        opacity = ' stroke-opacity="0.35"' if fan else ""
        points = " ".join(f"{px(float(x)):.2f},{py(float(y)):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4"'
                   f'{opacity} points="{points}"/>')
    if dots is not None:
        for x, y in zip(*dots):
            out.append(f'<circle cx="{px(float(x)):.2f}" cy="{py(float(y)):.2f}" '
                       'r="2.2" fill="#1a55a0" fill-opacity="0.8"/>')
    if not fan:
        for idx, (name, _, _) in enumerate(series):
            y0 = _MT + 16 + 16 * idx
            out.append(f'<line x1="{_W - 150}" y1="{y0}" x2="{_W - 120}" y2="{y0}" '
                       f'stroke="{_PALETTE[idx % len(_PALETTE)]}" stroke-width="2"/>')
            out.append(f'<text x="{_W - 114}" y="{y0 + 4}" font-size="12" '
                       f'fill="#333333">{name}</text>')
        if dots is not None:
            y0 = _MT + 16 + 16 * len(series)
            out.append(f'<circle cx="{_W - 135}" cy="{y0}" r="2.2" fill="#1a55a0"/>')
            out.append(f'<text x="{_W - 114}" y="{y0 + 4}" font-size="12" '
                       f'fill="#333333">monte carlo</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def write_run_record(result: ExperimentResult, cfg: RunConfig, path: Path) -> None:
    record = {
        "version": __version__,
        "command": cfg.command,
        "figure": cfg.figure_id,
        "formats": list(cfg.formats),
        "metadata": result.metadata,
    }
    path.write_text(json.dumps(record, indent=1) + "\n", encoding="utf-8")


def run(cfg: RunConfig) -> Path:
    """Execute a parsed configuration; returns the output directory."""
    result = run_figure(cfg.figure_id, cfg.parameters)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.figure_id
    if "csv" in cfg.formats:
        emit_csv(result, out / f"{name}.csv")
    if "json" in cfg.formats:
        emit_json(result, out / f"{name}.json")
    if "svg" in cfg.formats:
        emit_svg(result, out / f"{name}.svg")
    write_run_record(result, cfg, out / "run.json")
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
        run(cfg)
    except UsageError as exc:
        if str(exc):
            print(f"error: {exc}", file=sys.stderr)
        print(_USAGE, file=sys.stderr)
        return 1
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
