"""Plain SVG output: a request map and a per-satellite Gantt chart."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .core import Plan, ProblemInstance
from .geometry import midpoint

COMPLETED = "#2e9d3a"
MISSED = "#2f5fd0"


def _header(w, h):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
            f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>']


def map_svg(plan: Plan, instance: ProblemInstance, width: int = 900, margin: int = 20) -> str:
    """Request centres on an equirectangular frame fitted to the data; green completed, blue missed."""
    done = set(plan.completed_ids())
    pts = []
    for r in sorted(instance.pending(), key=lambda r: r.request_id):
        c = midpoint(r.median_start, r.median_end)
        pts.append((r.request_id, c.latitude_deg, c.longitude_deg, r.request_id in done))
    if not pts:
        lat0, lat1, lon0, lon1 = -90.0, 90.0, -180.0, 180.0
    else:
        lat0, lat1 = min(p[1] for p in pts), max(p[1] for p in pts)
        lon0, lon1 = min(p[2] for p in pts), max(p[2] for p in pts)
    span_lon = max(lon1 - lon0, 1e-6)
    span_lat = max(lat1 - lat0, 1e-6)
    inner = width - 2 * margin
    height = int(round(inner * min(2.0, max(0.25, span_lat / span_lon)))) + 2 * margin + 20
    sy = (height - 2 * margin - 20) / span_lat
    sx = inner / span_lon
    out = _header(width, height)
    out.append(f'<text x="{margin}" y="{margin}" font-size="12" font-family="sans-serif">'
               f'{len(done)} of {len(pts)} requests completed</text>')
    for rid, lat, lon, ok in pts:
        x = margin + (lon - lon0) * sx
        y = height - margin - (lat - lat0) * sy
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{COMPLETED if ok else MISSED}">'
                   f'<title>{escape(rid)}</title></circle>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def gantt_svg(plan: Plan, width: int = 1000, row_h: int = 28, margin: int = 60) -> str:
    """One row per satellite: relay in grey, acquisition in green, time relative to the first start."""
    rows = [(sid, plan.satellites[sid]) for sid in sorted(plan.satellites)]
    starts = [a.acquisition_start_ms - a.relay_duration_s * 1000 for _, seq in rows for a in seq]
    ends = [a.end_ms for _, seq in rows for a in seq]
    t0 = min(starts) if starts else 0
    t1 = max(ends) if ends else 1
    scale = (width - margin - 10) / max(1, t1 - t0)
    height = margin // 2 + row_h * max(1, len(rows)) + 30
    out = _header(width, height)
    for k, (sid, seq) in enumerate(rows):
        y = margin // 2 + k * row_h
        out.append(f'<text x="4" y="{y + row_h * 0.6:.1f}" font-size="12" font-family="sans-serif">'
                   f'{escape(sid)}</text>')
        for a in seq:
            rs = margin + (a.acquisition_start_ms - a.relay_duration_s * 1000 - t0) * scale
            xs = margin + (a.acquisition_start_ms - t0) * scale
            xe = margin + (a.end_ms - t0) * scale
            out.append(f'<rect x="{rs:.2f}" y="{y + 6}" width="{xs - rs:.2f}" height="{row_h - 12}" '
                       f'fill="#bbbbbb"/>')
            out.append(f'<rect x="{xs:.2f}" y="{y + 4}" width="{max(xe - xs, 0.5):.2f}" height="{row_h - 8}" '
                       f'fill="{COMPLETED}"><title>{escape(a.request_id)}</title></rect>')
    span_s = (t1 - t0) / 1000.0
    out.append(f'<text x="{margin}" y="{height - 8}" font-size="11" font-family="sans-serif">'
               f'0 s .. {span_s:.0f} s</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
