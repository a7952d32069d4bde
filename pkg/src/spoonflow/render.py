"""SVG frames of snapshots. Presentation only; fixed viewport from the domain."""

from __future__ import annotations

from pathlib import Path

from .network import Disc, SpoonNetwork


def _path(points, sx, sy, close=False):
    d = "M " + " L ".join(f"{sx(p[0]):.2f} {sy(p[1]):.2f}" for p in points)
    return d + (" Z" if close else "")


def render_frame(net: SpoonNetwork, size: int = 640) -> str:
    dom = net.domain
    if isinstance(dom, Disc):
        cx, cy, r = dom.center[0], dom.center[1], dom.radius
        x0, x1, y0, y1 = cx - r, cx + r, cy - r, cy + r
    else:
        v = dom.vertices
        x0, x1 = v[:, 0].min(), v[:, 0].max()
        y0, y1 = v[:, 1].min(), v[:, 1].max()
    pad = 0.05 * max(x1 - x0, y1 - y0)
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    scale = size / max(x1 - x0, y1 - y0)

    def sx(x):
        return (x - x0) * scale

    def sy(y):
        return (y1 - y) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if isinstance(dom, Disc):
        parts.append(
            f'<circle cx="{sx(dom.center[0]):.2f}" cy="{sy(dom.center[1]):.2f}" '
            f'r="{dom.radius * scale:.2f}" fill="none" stroke="#999" stroke-dasharray="6 4"/>'
        )
    else:
        parts.append(
            f'<path d="{_path(dom.vertices, sx, sy, close=True)}" fill="none" '
            f'stroke="#999" stroke-dasharray="6 4"/>'
        )
    parts.append(f'<path d="{_path(net.loop.points, sx, sy)}" fill="none" stroke="#1f5fb4" stroke-width="1.6"/>')
    parts.append(f'<path d="{_path(net.handle.points, sx, sy)}" fill="none" stroke="#b44c1f" stroke-width="1.6"/>')
    O = net.junction
    parts.append(f'<circle cx="{sx(O[0]):.2f}" cy="{sy(O[1]):.2f}" r="3" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def render_frames(snapshots, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, (t, net) in enumerate(snapshots):
        (outdir / f"frame_{i:05d}.svg").write_text(render_frame(net))
    return len(snapshots)
