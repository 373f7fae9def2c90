"""Cost-comparison suite: analytic (and optionally measured) counts over a
grid of dimensions, written as CSV plus a deterministic SVG line chart.

Rows follow config order exactly: the dimension grid is the cartesian
product of the per-field value lists in declared field order, and
mechanisms iterate in their listed order within each dimension tuple.
That order is independent of how many worker threads compute the rows.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .costs import CostReport, MECHANISMS, mhsa_cost, nonlocal_cost, pca_cost
from .counting import measure_nonlocal, measure_pca

CSV_COLUMNS = ["mechanism", "H", "W", "T", "D", "C_v", "N", "em_iters",
               "heads", "analytic_multiplies", "analytic_adds",
               "analytic_exps", "measured_multiplies", "peak_elements"]

SERIES_COLORS = {"pca": "#1f77b4", "nonlocal": "#d62728", "mhsa": "#555555"}


class UnsupportedMechanismError(ValueError):
    """Requested an execution mode a mechanism does not support."""


@dataclass(frozen=True)
class BenchConfig:
    mechanisms: tuple[str, ...] = ("pca", "nonlocal", "mhsa")
    h: tuple[int, ...] = (45,)
    w: tuple[int, ...] = (80,)
    t: tuple[int, ...] = (2, 4, 8)
    d: tuple[int, ...] = (64,)
    c_v: tuple[int, ...] = (64,)
    n: tuple[int, ...] = (64,)
    em_iters: tuple[int, ...] = (6,)
    heads: tuple[int, ...] = (8,)
    instrumented: bool = False

    def __post_init__(self):
        for mech in self.mechanisms:
            if mech not in MECHANISMS:
                raise ValueError(f"unknown mechanism {mech!r}")

    def grid(self):
        return itertools.product(self.h, self.w, self.t, self.d, self.c_v,
                                 self.n, self.em_iters, self.heads)


def _one_report(mechanism: str, dims, instrumented: bool) -> CostReport:
    h, w, t, d, c_v, n, em_iters, heads = dims
    if mechanism == "pca":
        report = pca_cost(h, w, t, d, c_v, n, em_iters)
        if instrumented:
            report = replace(
                report,
                measured_multiplies=measure_pca(h, w, t, d, c_v, n,
                                                em_iters).multiplies)
        return report
    if mechanism == "nonlocal":
        report = nonlocal_cost(h, w, t, d, c_v)
        if instrumented:
            report = replace(
                report,
                measured_multiplies=measure_nonlocal(h, w, t, d,
                                                     c_v).multiplies)
        return report
    return mhsa_cost(h, w, t, d, c_v, heads)


def compute_reports(config: BenchConfig, threads: int = 1) -> list[CostReport]:
    if config.instrumented and "mhsa" in config.mechanisms:
        raise UnsupportedMechanismError(
            "mhsa is modeled analytically only and cannot be instrumented")
    jobs = [(mech, dims) for dims in config.grid()
            for mech in config.mechanisms]
    if threads > 1 and jobs:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(
                lambda job: _one_report(job[0], job[1], config.instrumented),
                jobs))
    return [_one_report(mech, dims, config.instrumented)
            for mech, dims in jobs]


def write_csv(reports: list[CostReport], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow([
                r.mechanism, r.h, r.w, r.t, r.d, r.c_v, r.n, r.em_iters,
                r.heads, r.analytic_multiplies, r.analytic_adds,
                r.analytic_exps,
                "" if r.measured_multiplies is None else r.measured_multiplies,
                r.peak_elements,
            ])


def _svg_series(reports: list[CostReport]) -> dict[str, list[tuple[int, int]]]:
    series: dict[str, list[tuple[int, int]]] = {}
    for r in reports:
        series.setdefault(r.mechanism, []).append((r.t, r.analytic_multiplies))
    for pts in series.values():
        pts.sort()
    return series


def write_svg(reports: list[CostReport], path, title="multiplies vs. tube length"):
    """Hand-emitted line chart of analytic multiplies against T, log-10
    vertical axis.  Output bytes are a pure function of the reports."""
    series = _svg_series(reports)
    width, height = 640, 420
    left, right, top, bottom = 80, 160, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="24" font-family="monospace" font-size="14">'
        f'{title}</text>',
    ]
    if series:
        all_t = sorted({t for pts in series.values() for t, _ in pts})
        all_c = [max(c, 1) for pts in series.values() for _, c in pts]
        t_lo, t_hi = min(all_t), max(all_t)
        t_span = max(t_hi - t_lo, 1)
        y_lo = math.floor(math.log10(min(all_c)))
        y_hi = math.ceil(math.log10(max(all_c)))
        if y_hi == y_lo:
            y_hi += 1

        def sx(t):
            return left + plot_w * (t - t_lo) / t_span

        def sy(c):
            frac = (math.log10(max(c, 1)) - y_lo) / (y_hi - y_lo)
            return top + plot_h * (1.0 - frac)

        axis = f'stroke="black" stroke-width="1"'
        lines.append(f'<line x1="{left}" y1="{top + plot_h}" '
                     f'x2="{left + plot_w}" y2="{top + plot_h}" {axis}/>')
        lines.append(f'<line x1="{left}" y1="{top}" x2="{left}" '
                     f'y2="{top + plot_h}" {axis}/>')
        for t in all_t:
            x = sx(t)
            lines.append(f'<line x1="{x:.2f}" y1="{top + plot_h}" '
                         f'x2="{x:.2f}" y2="{top + plot_h + 5}" {axis}/>')
            lines.append(f'<text x="{x:.2f}" y="{top + plot_h + 20}" '
                         f'font-family="monospace" font-size="11" '
                         f'text-anchor="middle">{t}</text>')
        for decade in range(y_lo, y_hi + 1):
            y = sy(10 ** decade)
            lines.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" '
                         f'y2="{y:.2f}" {axis}/>')
            lines.append(f'<text x="{left - 8}" y="{y + 4:.2f}" '
                         f'font-family="monospace" font-size="11" '
                         f'text-anchor="end">1e{decade}</text>')
        for row, (mech, pts) in enumerate(sorted(series.items())):
            color = SERIES_COLORS.get(mech, "#2ca02c")
            coords = " ".join(f"{sx(t):.2f},{sy(c):.2f}" for t, c in pts)
            lines.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="2"/>')
            for t, c in pts:
                lines.append(f'<circle cx="{sx(t):.2f}" cy="{sy(c):.2f}" '
                             f'r="3" fill="{color}"/>')
            ly = top + 16 + 18 * row
            lx = left + plot_w + 14
            lines.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                         f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            lines.append(f'<text x="{lx + 28}" y="{ly}" '
                         f'font-family="monospace" font-size="12">{mech}</text>')
        lines.append(f'<text x="{left + plot_w // 2}" y="{height - 12}" '
                     f'font-family="monospace" font-size="12" '
                     f'text-anchor="middle">tube length T</text>')
    lines.append("</svg>")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def run_suite(config: BenchConfig, out_dir, threads: int = 1,
              figure: bool = True) -> dict:
    """Compute all rows and write suite.csv / suite.svg (plus suite.png).

    Returns the reports and output paths.  An empty mechanism list yields
    a header-only CSV and an empty chart.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = compute_reports(config, threads)
    csv_path = out / "suite.csv"
    svg_path = out / "suite.svg"
    write_csv(reports, csv_path)
    write_svg(reports, svg_path)
    paths = {"csv": str(csv_path), "svg": str(svg_path)}
    if figure:
        from .figures import render_bench_figure

        png_path = out / "suite.png"
        render_bench_figure(reports, png_path)
        paths["png"] = str(png_path)
    return {"reports": reports, "paths": paths}
