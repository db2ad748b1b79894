"""CSV tables written at 17 significant digits, and a dependency-free SVG log-log plot."""

from __future__ import annotations

import csv
import math
from html import escape
from pathlib import Path

from .analysis import CONVERGENCE_HEADER, ConvergenceTable, EnergyReport, ErrorReport
from .scheme import StepReport

REPORT_HEADER = ("time", "mass", "min", "max", "l1", "l2")
ERROR_HEADER = ("time", "l1_error", "sampling_density", "estimated_quadrature_error")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    return f"{float(v):.17g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    """Return ``(header, rows)``; numeric fields come back as floats."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        rows = [tuple(_parse(v) for v in row) for row in r]
    return header, rows


def _parse(v: str):
    try:
        return float(v)
    except ValueError:
        return v


def write_step_report(path, report: StepReport) -> None:
    write_csv(path, REPORT_HEADER, report.rows())


def energy_row(h, dt, xi, mesh_kind, l1, energy: EnergyReport):
    return (h, dt, xi, mesh_kind, l1, energy.E_h, energy.Q_h, energy.eps_h, energy.identity_residual)


def write_energy(path, row) -> None:
    write_csv(path, CONVERGENCE_HEADER, [row])


def write_error(path, report: ErrorReport) -> None:
    rows = [(t, e, report.sampling_density, report.estimated_quadrature_error)
            for t, e in zip(report.times, report.l1_per_time)]
    write_csv(path, ERROR_HEADER, rows)


def write_convergence(path, table: ConvergenceTable) -> None:
    write_csv(path, CONVERGENCE_HEADER, table.rows)


def loglog_svg(h, err, slope=None, intercept=None, title="", width=480, height=360) -> str:
    """Scatter of ``(h, err)`` on log axes, with the fitted line if given."""
    lx = [math.log10(v) for v in h]
    ly = [math.log10(v) for v in err]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    if x1 == x0:
        x1 += 1
    if y1 == y0:
        y1 += 1
    m = 56
    pw, ph = width - 2 * m, height - 2 * m

    def sx(v):
        return m + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return height - m - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for d in range(x0, x1 + 1):
        out.append(f'<line x1="{sx(d):.2f}" y1="{m}" x2="{sx(d):.2f}" y2="{height - m}" stroke="#ddd"/>')
        out.append(f'<text x="{sx(d):.2f}" y="{height - m + 16}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        out.append(f'<line x1="{m}" y1="{sy(d):.2f}" x2="{width - m}" y2="{sy(d):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{m - 6}" y="{sy(d) + 4:.2f}" text-anchor="end">1e{d}</text>')
    if slope is not None and intercept is not None:
        # intercept is in natural log units: log e = slope log h + intercept
        a, b = min(lx), max(lx)
        ya = slope * a + intercept / math.log(10)
        yb = slope * b + intercept / math.log(10)
        out.append(f'<line x1="{sx(a):.2f}" y1="{sy(ya):.2f}" x2="{sx(b):.2f}" y2="{sy(yb):.2f}" '
                   f'stroke="steelblue" stroke-dasharray="5,3"/>')
        title = f"{title} (slope {slope:.3f})" if title else f"slope {slope:.3f}"
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3.5" fill="firebrick"/>')
    out.append(f'<text x="{width / 2}" y="{height - 14}" text-anchor="middle">h</text>')
    out.append(f'<text x="14" y="{height / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {height / 2})">L1 error</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="{m - 18}" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg: str) -> None:
    Path(path).write_text(svg)
