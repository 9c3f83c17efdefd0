"""SVG line and scatter plots rendered from a jinja2 template."""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from jinja2 import Environment, PackageLoader, select_autoescape

from src.core.errors import ValidationError

logger = logging.getLogger(__name__)

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

_env = Environment(
    loader=PackageLoader("src.evaluation", "templates"),
    autoescape=select_autoescape(["svg", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
)

Series = Tuple[Sequence[float], Sequence[float]]


def _ticks(lo: float, hi: float, start: float, end: float, n: int = 5) -> List[dict]:
    return [
        {"pos": round(start + (end - start) * k / (n - 1), 2), "label": f"{lo + (hi - lo) * k / (n - 1):.3g}"}
        for k in range(n)
    ]


def render_plot(series: Dict[str, Series], title: str = "", xlabel: str = "", ylabel: str = "",
                markers: bool = False, lines: bool = True, width: int = 640, height: int = 400) -> str:
    finite = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys)
              if math.isfinite(x) and math.isfinite(y)]
    if not finite:
        raise ValidationError("nothing finite to plot")
    left, right, top, bottom = 60, width - 20, 30, height - 40
    x_lo, x_hi = min(p[0] for p in finite), max(p[0] for p in finite)
    y_lo, y_hi = min(p[1] for p in finite), max(p[1] for p in finite)
    x_hi = x_hi if x_hi > x_lo else x_lo + 1.0
    y_hi = y_hi if y_hi > y_lo else y_lo + 1.0

    def sx(x: float) -> float:
        return round(left + (x - x_lo) / (x_hi - x_lo) * (right - left), 2)

    def sy(y: float) -> float:
        return round(bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top), 2)

    rendered = []
    for i, (name, (xs, ys)) in enumerate(series.items()):
        coords = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        rendered.append({
            "name": name,
            "color": COLORS[i % len(COLORS)],
            "coords": coords,
            "points": " ".join(f"{x},{y}" for x, y in coords),
            "lines": lines,
            "markers": markers,
        })
    return _env.get_template("line_plot.svg.j2").render(
        width=width, height=height, left=left, right=right, top=top, bottom=bottom,
        title=title, xlabel=xlabel, ylabel=ylabel, series=rendered,
        x_ticks=_ticks(x_lo, x_hi, left, right), y_ticks=_ticks(y_hi, y_lo, top, bottom),
    )


def write_plot(path: Union[str, Path], series: Dict[str, Series], **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_plot(series, **kwargs))
    logger.info(f"Wrote plot {path}")
    return path


def plot_stress(path, stress: Dict[str, List[float]]) -> Path:
    return write_plot(path, {"w/ corrector": (stress["cutoff"], stress["corrected"]),
                             "w/o corrector": (stress["cutoff"], stress["uncorrected"])},
                      title="Long-horizon stress test", xlabel="timestep", ylabel="log MSE")


def plot_reduction(path, cutoffs: Sequence[int], reductions: Sequence[float],
                   threshold: Optional[float] = None) -> Path:
    series = {"reduction %": (list(cutoffs), list(reductions))}
    if threshold is not None:
        series[f"{threshold:g}% threshold"] = ([cutoffs[0], cutoffs[-1]], [threshold, threshold])
    return write_plot(path, series, title="MSE reduction by cutoff", xlabel="cutoff", ylabel="reduction (%)")


def plot_nfe(path, curves: Dict[str, Sequence[float]]) -> Path:
    series = {name: (list(range(1, len(nfe) + 1)), list(nfe)) for name, nfe in curves.items()}
    return write_plot(path, series, title="NFE per epoch", xlabel="epoch", ylabel="NFE")


def plot_pareto(path, runs: Sequence[Tuple[float, float]], front: Sequence[Tuple[float, float]]) -> Path:
    front = sorted(front)
    series = {"runs": ([r[0] for r in runs], [r[1] for r in runs]),
              "pareto front": ([f[0] for f in front], [f[1] for f in front])}
    return write_plot(path, series, title="NFE vs extrapolation horizon", xlabel="NFE", ylabel="horizon",
                      markers=True, lines=False)
