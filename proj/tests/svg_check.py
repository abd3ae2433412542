"""Structural check of report.svg against the error table it was drawn from."""

import csv
import math
import sys
import xml.etree.ElementTree as ET

NS = "{http://www.w3.org/2000/svg}"
SERIES = {"bk": "err_bk_L2", "PBDW, true observations": "err_star_L2", "SVDA": "err_svda_L2"}


def fail(msg):
    print(f"svg_check: {msg}", file=sys.stderr)
    sys.exit(1)


def main(svg_path, csv_path):
    root = ET.parse(svg_path).getroot()
    if root.tag != NS + "svg":
        fail(f"root element is {root.tag}")
    plot = root.find(f"{NS}g[@id='plot']")
    if plot is None:
        fail("no plot group")
    x0, y0 = float(plot.get("data-x0")), float(plot.get("data-y0"))
    width, height = float(plot.get("data-width")), float(plot.get("data-height"))
    log_min, log_max = float(plot.get("data-log-min")), float(plot.get("data-log-max"))
    t_min, t_max = float(plot.get("data-t-min")), float(plot.get("data-t-max"))

    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    lines = plot.findall(f"{NS}polyline")
    if len(lines) != 3:
        fail(f"expected 3 polylines, found {len(lines)}")

    for line in lines:
        name = line.get("data-series")
        if name not in SERIES:
            fail(f"unexpected series {name!r}")
        points = [tuple(map(float, p.split(","))) for p in line.get("points").split()]
        if len(points) != len(rows):
            fail(f"{name}: {len(points)} points for {len(rows)} rows")
        values = [float(r[SERIES[name]]) for r in rows]
        for (px, py), row, v in zip(points, rows, values):
            t = t_min + (px - x0) / width * (t_max - t_min)
            if abs(t - float(row["t"])) > 1e-3 * (t_max - t_min):
                fail(f"{name}: x {px} maps to t {t}, expected {row['t']}")
            if not (y0 - 1e-9 <= py <= y0 + height + 1e-9):
                fail(f"{name}: y {py} outside the plot area")
        # The vertical extent must invert to the extreme positive values.
        positive = [v for v in values if v > 0]
        ys = [py for (_, py), v in zip(points, values) if v > 0]
        to_log = lambda py: log_max - (py - y0) / height * (log_max - log_min)
        for got, want in ((to_log(max(ys)), min(positive)), (to_log(min(ys)), max(positive))):
            # Coordinates carry three decimals, so allow a thousandth of a pixel.
            if abs(got - math.log10(want)) > 1e-3 * (log_max - log_min) / height:
                fail(f"{name}: y range maps to 10^{got:.4f}, expected {want}")
        for (_, py), v in zip(points, values):
            if v <= 0 and abs(py - (y0 + height)) > 1e-6:
                fail(f"{name}: non-positive value not drawn at the bottom edge")
    print("svg_check: ok")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
