# scamfqi/services/svg.py - learning curves as a standalone SVG document
import xml.etree.ElementTree as ET
from collections import defaultdict
from typing import Sequence

from scamfqi.schemas.experiment import CurvePoint

WIDTH, HEIGHT = 720, 440
MARGIN = {"left": 70, "right": 180, "top": 30, "bottom": 50}
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_curves(points: Sequence[CurvePoint], title: str = "Makespan vs. iteration") -> str:
    """One polyline per (d, mode) with its CI band drawn underneath."""
    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "version": "1.1",
            "width": str(WIDTH),
            "height": str(HEIGHT),
            "viewBox": f"0 0 {WIDTH} {HEIGHT}",
        },
    )
    ET.SubElement(svg, "rect", {"x": "0", "y": "0", "width": str(WIDTH), "height": str(HEIGHT), "fill": "white"})
    ET.SubElement(svg, "text", {"x": str(WIDTH // 2), "y": "20", "text-anchor": "middle", "font-size": "14"}).text = title

    series: dict[tuple, list[CurvePoint]] = defaultdict(list)
    for p in points:
        series[(p.d, p.mode.value)].append(p)
    if not series:
        return ET.tostring(svg, encoding="unicode")

    k_max = max(p.iteration for p in points) or 1
    y_lo = min(p.ci_low for p in points)
    y_hi = max(p.ci_high for p in points)
    if y_hi - y_lo < 1e-9:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def sx(k: float) -> float:
        return x0 + (x1 - x0) * k / k_max

    def sy(v: float) -> float:
        return y0 - (y0 - y1) * (v - y_lo) / (y_hi - y_lo)

    axis = {"stroke": "black", "stroke-width": "1"}
    ET.SubElement(svg, "line", {"x1": _fmt(x0), "y1": _fmt(y0), "x2": _fmt(x1), "y2": _fmt(y0), **axis})
    ET.SubElement(svg, "line", {"x1": _fmt(x0), "y1": _fmt(y0), "x2": _fmt(x0), "y2": _fmt(y1), **axis})
    for k in range(k_max + 1):
        ET.SubElement(svg, "text", {"x": _fmt(sx(k)), "y": _fmt(y0 + 16), "text-anchor": "middle", "font-size": "10"}).text = str(k)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = y_lo + frac * (y_hi - y_lo)
        ET.SubElement(svg, "text", {"x": _fmt(x0 - 6), "y": _fmt(sy(v) + 3), "text-anchor": "end", "font-size": "10"}).text = f"{v:.1f}"
    ET.SubElement(svg, "text", {"x": _fmt((x0 + x1) / 2), "y": _fmt(HEIGHT - 12), "text-anchor": "middle", "font-size": "12"}).text = "iteration"
    ET.SubElement(
        svg, "text",
        {"x": "16", "y": _fmt((y0 + y1) / 2), "text-anchor": "middle", "font-size": "12",
         "transform": f"rotate(-90 16 {_fmt((y0 + y1) / 2)})"},
    ).text = "makespan (ticks)"

    for n, key in enumerate(sorted(series)):
        color = PALETTE[n % len(PALETTE)]
        pts = sorted(series[key], key=lambda p: p.iteration)
        upper = [f"{_fmt(sx(p.iteration))},{_fmt(sy(p.ci_high))}" for p in pts]
        lower = [f"{_fmt(sx(p.iteration))},{_fmt(sy(p.ci_low))}" for p in reversed(pts)]
        ET.SubElement(svg, "polygon", {"points": " ".join(upper + lower), "fill": color, "fill-opacity": "0.15", "stroke": "none"})
        line = " ".join(f"{_fmt(sx(p.iteration))},{_fmt(sy(p.mean_makespan))}" for p in pts)
        ET.SubElement(svg, "polyline", {"points": line, "fill": "none", "stroke": color, "stroke-width": "2"})
        ly = MARGIN["top"] + 18 * n + 10
        ET.SubElement(svg, "line", {"x1": _fmt(x1 + 15), "y1": _fmt(ly), "x2": _fmt(x1 + 35), "y2": _fmt(ly), "stroke": color, "stroke-width": "2"})
        ET.SubElement(svg, "text", {"x": _fmt(x1 + 40), "y": _fmt(ly + 4), "font-size": "11"}).text = pts[0].label
    return ET.tostring(svg, encoding="unicode")
