"""Built-in initial networks: circle, ellipse and dumbbell loops with a
straight handle pinned on a disc boundary.

All generators place the pinned endpoint P on the domain boundary at
angle zero, the junction O = P - handle * (1, 0), and bend the loop
into the exact 120 degree junction over a collar: the nodes of the
first and last eighth of the loop are rotated about O with a cosine
taper so the end edges leave at exactly +-120 degrees of the handle
direction.  Spreading the bend keeps the initial curvature moderate,
which keeps the early discrete transients small.
"""

from __future__ import annotations

import math
import numpy as np

from .geometry import Polyline, _shoelace
from .network import Disc, SpoonNetwork

__all__ = ["GeometryInfeasible", "circle_spoon", "ellipse_spoon", "dumbbell_spoon",
           "generate_initial", "GENERATORS"]

COLLAR_FRAC = 0.125


class GeometryInfeasible(Exception):
    pass


def _rot(v, ang):
    c, s = math.cos(ang), math.sin(ang)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _end_tangent(p0, p1, p2):
    g = 0.5 * (-3.0 * p0 + 4.0 * p1 - p2)
    return g / np.linalg.norm(g)


def _apply_collar(loop_pts: np.ndarray, O: np.ndarray, u: np.ndarray,
                  collar_frac: float = COLLAR_FRAC) -> np.ndarray:
    """Rotate the loop ends about O so the end tangents leave at +-120 deg of u.

    The frame measures end tangents with a second-order one-sided
    stencil, which sees the collar bend; a couple of corrective rounds
    align the measured tangents with the targets to roundoff level.
    """
    n = len(loop_pts) - 1
    m = max(3, int(collar_frac * n))
    out = loop_pts.copy()
    for sgn in (1, -1):
        d_target = _rot(u, sgn * 2.0 * math.pi / 3.0)
        for _ in range(4):
            if sgn == 1:
                e = _end_tangent(out[0], out[1], out[2])
            else:
                # reversed stencil at the loop end already points away
                # from the junction, the outgoing direction
                e = _end_tangent(out[-1], out[-2], out[-3])
            alpha = math.atan2(e[0] * d_target[1] - e[1] * d_target[0],
                               e[0] * d_target[0] + e[1] * d_target[1])
            if abs(alpha) < 1e-12:
                break
            for j in range(1, m + 1):
                idx = j if sgn == 1 else -(j + 1)
                w = 0.5 * (1.0 + math.cos(math.pi * (j - 1) / m))
                out[idx] = O + _rot(out[idx] - O, alpha * w)
    return out


def _assemble(loop_pts, O, P, domain_radius, n_handle) -> SpoonNetwork:
    t = np.linspace(0.0, 1.0, n_handle)[:, None]
    handle = Polyline(O * (1.0 - t) + P * t, closed=False)
    net = SpoonNetwork(
        loop=Polyline(loop_pts, closed=False),
        handle=handle,
        domain=Disc(np.zeros(2), float(domain_radius)),
    )
    failures = net.validate()
    if failures:
        raise GeometryInfeasible("; ".join(failures))
    return net


def _anchor(handle: float, domain_radius: float):
    if handle <= 0:
        raise ValueError("handle length must be positive")
    if handle >= domain_radius:
        raise GeometryInfeasible(
            f"handle {handle} cannot reach the boundary from inside a disc of radius {domain_radius}"
        )
    P = np.array([float(domain_radius), 0.0])
    O = P - np.array([float(handle), 0.0])
    return O, P


def circle_spoon(r: float = 1.0, handle: float = 1.0, domain_radius: float = 3.0,
                 n_loop: int = 256, n_handle: int = 64,
                 collar_frac: float = COLLAR_FRAC) -> SpoonNetwork:
    """Circular loop of nominal enclosed area pi r^2 with a straight handle.

    The collar sheds a few percent of area, so the circle radius is
    adjusted (two fixed-point rounds) until the enclosed area matches
    the nominal circle to well within a percent.
    """
    O, P = _anchor(handle, domain_radius)
    u = np.array([1.0, 0.0])
    target = math.pi * r * r
    r_eff = float(r)
    loop_pts = None
    for _ in range(3):
        th = 2.0 * math.pi * np.arange(n_loop + 1) / n_loop
        C = O - np.array([r_eff, 0.0])
        pts = C + r_eff * np.column_stack([np.cos(th), np.sin(th)])
        pts[0] = O
        pts[-1] = O
        loop_pts = _apply_collar(pts, O, u, collar_frac)
        area = abs(_shoelace(loop_pts[:-1]))
        r_eff *= math.sqrt(target / area)
    return _assemble(loop_pts, O, P, domain_radius, n_handle)


def ellipse_spoon(a: float = 1.2, b: float = 0.8, handle: float = 1.0,
                  domain_radius: float = 3.0, n_loop: int = 256, n_handle: int = 64,
                  collar_frac: float = COLLAR_FRAC) -> SpoonNetwork:
    """Elliptic loop (semi-axis a along the handle direction, b across)."""
    O, P = _anchor(handle, domain_radius)
    u = np.array([1.0, 0.0])
    th = 2.0 * math.pi * np.arange(n_loop + 1) / n_loop
    C = O - np.array([float(a), 0.0])
    pts = C + np.column_stack([a * np.cos(th), b * np.sin(th)])
    pts[0] = O
    pts[-1] = O
    loop_pts = _apply_collar(pts, O, u, collar_frac)
    return _assemble(loop_pts, O, P, domain_radius, n_handle)


def dumbbell_spoon(lobe: float = 0.7, neck: float = 0.25, handle: float = 1.0,
                   domain_radius: float = 3.0, n_loop: int = 256, n_handle: int = 64,
                   collar_frac: float = COLLAR_FRAC) -> SpoonNetwork:
    """Two lobes joined by a neck of half-width ``neck`` (a Cassini oval).

    The oval is the locus of points whose distances to the two foci
    (+-lobe, 0) have product lobe^2 + neck^2; it is peanut-shaped
    whenever neck < lobe.
    """
    if not (0 < neck < lobe):
        raise ValueError("need 0 < neck < lobe for a dumbbell shape")
    O, P = _anchor(handle, domain_radius)
    u = np.array([1.0, 0.0])
    a2 = lobe * lobe
    b4 = (a2 + neck * neck) ** 2
    th = 2.0 * math.pi * np.arange(n_loop + 1) / n_loop
    r2 = a2 * np.cos(2 * th) + np.sqrt(b4 - (a2 * np.sin(2 * th)) ** 2)
    rr = np.sqrt(np.maximum(r2, 0.0))
    tip = math.sqrt(a2 + math.sqrt(b4))
    C = O - np.array([tip, 0.0])
    pts = C + np.column_stack([rr * np.cos(th), rr * np.sin(th)])
    pts[0] = O
    pts[-1] = O
    loop_pts = _apply_collar(pts, O, u, collar_frac)
    return _assemble(loop_pts, O, P, domain_radius, n_handle)


GENERATORS = {
    "circle_spoon": circle_spoon,
    "ellipse_spoon": ellipse_spoon,
    "dumbbell_spoon": dumbbell_spoon,
}


def generate_initial(name: str, params: dict) -> SpoonNetwork:
    """Dispatch to a named generator with keyword parameters."""
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[name](**params)
