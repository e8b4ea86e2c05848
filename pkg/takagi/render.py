"""Artifact writers: CSV tables, JSON documents and the SVG profile of f_n.

Every writer takes the effective config echo and puts it in the artifact
header, so an output file always says how it was produced.
"""

import csv
import json
import logging
from fractions import Fraction
from typing import IO, Any, Dict, Iterable, List, Sequence

import svgwrite

from takagi.piecewise import GridFunction
from takagi.rationals import format_rational

logger = logging.getLogger(__name__)

SVG_WIDTH = 800
SVG_HEIGHT = 400
SVG_MARGIN = 40


def write_echo(stream: IO[str], echo: Dict[str, str]) -> None:
    """`# key=value` header lines, skipped by the CSV and matrix readers."""
    for key, value in echo.items():
        stream.write(f"# {key}={value}\n")


def write_csv(
    stream: IO[str],
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    echo: Dict[str, str],
) -> None:
    write_echo(stream, echo)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)


def write_json(stream: IO[str], payload: Dict[str, Any], echo: Dict[str, str]) -> None:
    document = {"config": echo}
    document.update(payload)
    json.dump(document, stream, indent=2, sort_keys=False)
    stream.write("\n")


def grid_rows(gf: GridFunction) -> List[List[str]]:
    """(j, x, f_n(x)) at every grid point, exact rationals as strings."""
    rows = []
    for j, v in enumerate(gf.values.tolist()):
        x = Fraction(j, gf.cells)
        fx = Fraction(v, gf.cells)
        rows.append([j, format_rational(x), format_rational(fx), f"{float(fx):.12g}"])
    return rows


def write_grid_csv(stream: IO[str], gf: GridFunction, echo: Dict[str, str]) -> None:
    write_csv(stream, ["j", "x", "f", "f_float"], grid_rows(gf), echo)


def grid_svg(gf: GridFunction, echo: Dict[str, str]) -> svgwrite.Drawing:
    """Polyline of f_n over [0,1] x [min, max] with a few axis ticks."""
    low = min(int(gf.values.min()), 0)
    high = max(int(gf.values.max()), 1)
    span = high - low
    inner_w = SVG_WIDTH - 2 * SVG_MARGIN
    inner_h = SVG_HEIGHT - 2 * SVG_MARGIN

    def to_px(j: int, v: int):
        px = SVG_MARGIN + inner_w * j / gf.cells
        py = SVG_MARGIN + inner_h * (high - v) / span
        return round(px, 3), round(py, 3)

    dwg = svgwrite.Drawing(size=(SVG_WIDTH, SVG_HEIGHT), profile="tiny", debug=False)
    dwg.set_desc(
        title=f"f_{gf.depth}",
        desc=" ".join(f"{key}={value}" for key, value in echo.items()),
    )
    axis = dwg.g(stroke="#888", stroke_width=1)
    axis.add(dwg.line(to_px(0, 0), to_px(gf.cells, 0)))
    axis.add(dwg.line(to_px(0, low), to_px(0, high)))
    for quarter in range(5):
        x, y = to_px(quarter * gf.cells // 4, 0)
        axis.add(dwg.line((x, y - 4), (x, y + 4)))
        dwg.add(dwg.text(format_rational(Fraction(quarter, 4)), insert=(x - 6, y + 18), font_size=11))
    for v in (low, high):
        x, y = to_px(0, v)
        axis.add(dwg.line((x - 4, y), (x + 4, y)))
        label = format_rational(Fraction(v, gf.cells))
        dwg.add(dwg.text(label, insert=(4, y + 4), font_size=11))
    dwg.add(axis)
    points = [to_px(j, v) for j, v in enumerate(gf.values.tolist())]
    dwg.add(dwg.polyline(points, stroke="#000", fill="none", stroke_width=1))
    logger.debug("rendered %d points at depth %d", len(points), gf.depth)
    return dwg


def write_grid_svg(stream: IO[str], gf: GridFunction, echo: Dict[str, str]) -> None:
    grid_svg(gf, echo).write(stream, pretty=True)
