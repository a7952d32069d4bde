"""Discrete differential geometry of planar polylines.

Curves are node sequences in the plane.  The frame (arclength, unit
tangent, unit normal, signed curvature) is computed with centered
differences in the node index, treating the polyline as a sampling of a
regular parametrized curve gamma(x):

    tau = gamma_x / |gamma_x|,   nu = R tau,   k = <gamma_xx | nu> / |gamma_x|^2

where R is the counterclockwise rotation by pi/2.  A loop stored
counterclockwise therefore has k > 0 where it is convex.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

__all__ = [
    "GeometryError",
    "DegenerateEdge",
    "NotClosed",
    "SelfIntersecting",
    "Point2",
    "Polyline",
    "CurveFrame",
    "frame",
    "enclosed_area",
    "resample",
    "polyline_distance",
    "segments_intersect_scan",
    "curve_edges",
    "clip_to_disc",
]

# A point in the plane is a length-2 float array throughout.
Point2 = np.ndarray

# Relative threshold below which an edge counts as collapsed.
DEGENERATE_EDGE_REL = 1e-14


class GeometryError(Exception):
    pass


class DegenerateEdge(GeometryError):
    pass


class NotClosed(GeometryError):
    pass


class SelfIntersecting(GeometryError):
    pass


def _rot90(v):
    """Counterclockwise rotation by pi/2 of an (..., 2) array."""
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass(frozen=True)
class Polyline:
    """Ordered point sequence (n, 2); ``closed`` joins last to first logically.

    A closed polyline does not duplicate the first node.  Consecutive
    nodes must be distinct.  The spoon loop is stored as an *open*
    polyline whose first and last nodes coincide (both ends at the
    junction); that is allowed since they are not consecutive.
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        # own the storage: the array is frozen below, and freezing a
        # caller's array in place would be a surprising side effect
        pts = np.array(self.points, dtype=float, order="C")
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        if pts.shape[0] < 3:
            raise ValueError("a polyline needs at least 3 nodes")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg == 0.0):
            raise DegenerateEdge("consecutive nodes coincide")
        if self.closed and np.linalg.norm(pts[-1] - pts[0]) == 0.0:
            raise DegenerateEdge("closed polyline must not duplicate the first node")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def edge_lengths(self) -> np.ndarray:
        """Edge lengths; includes the closing edge for a closed polyline."""
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        if self.closed:
            seg = np.append(seg, np.linalg.norm(self.points[0] - self.points[-1]))
        return seg

    @property
    def length(self) -> float:
        return float(self.edge_lengths().sum())

    def to_json(self) -> dict:
        return {"closed": bool(self.closed), "points": self.points.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "Polyline":
        return Polyline(np.asarray(obj["points"], dtype=float), bool(obj["closed"]))


@dataclass(frozen=True)
class CurveFrame:
    """Per-node arclength, unit tangent, unit normal (= R tau), signed curvature."""

    s: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    k: np.ndarray


def _check_edges(curve: Polyline):
    seg = curve.edge_lengths()
    total = seg.sum()
    if seg.min() < DEGENERATE_EDGE_REL * total:
        raise DegenerateEdge(
            f"edge length {seg.min():.3e} below {DEGENERATE_EDGE_REL:g} x total {total:.3e}"
        )
    return seg


def frame(curve: Polyline) -> CurveFrame:
    """Arclength, tangents, normals and curvature of a polyline.

    Interior nodes use centered differences in the node index; the ends
    of an open curve use second-order one-sided stencils.  On a uniform
    sampling of a smooth curve the curvature error is O(h^2).
    """
    seg = _check_edges(curve)
    pts = curve.points
    n = curve.n
    s = np.concatenate([[0.0], np.cumsum(seg[: n - 1])])

    if curve.closed:
        prv = np.roll(pts, 1, axis=0)
        nxt = np.roll(pts, -1, axis=0)
        gx = 0.5 * (nxt - prv)
        gxx = nxt - 2.0 * pts + prv
    else:
        gx = np.empty_like(pts)
        gxx = np.empty_like(pts)
        gx[1:-1] = 0.5 * (pts[2:] - pts[:-2])
        gxx[1:-1] = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
        gx[0] = 0.5 * (-3.0 * pts[0] + 4.0 * pts[1] - pts[2])
        gx[-1] = 0.5 * (3.0 * pts[-1] - 4.0 * pts[-2] + pts[-3])
        if n >= 4:
            # second-order one-sided second difference at the ends
            gxx[0] = 2.0 * pts[0] - 5.0 * pts[1] + 4.0 * pts[2] - pts[3]
            gxx[-1] = 2.0 * pts[-1] - 5.0 * pts[-2] + 4.0 * pts[-3] - pts[-4]
        else:
            gxx[0] = pts[2] - 2.0 * pts[1] + pts[0]
            gxx[-1] = pts[-1] - 2.0 * pts[-2] + pts[-3]

    gx2 = np.einsum("ij,ij->i", gx, gx)
    tau = gx / np.sqrt(gx2)[:, None]
    nu = _rot90(tau)
    k = np.einsum("ij,ij->i", gxx, nu) / gx2
    return CurveFrame(s=s, tau=tau, nu=nu, k=k)


def arclength_weights(curve: Polyline) -> np.ndarray:
    """Trapezoidal quadrature weights ds per node."""
    seg = curve.edge_lengths()
    n = curve.n
    w = np.zeros(n)
    if curve.closed:
        w += 0.5 * seg
        w += 0.5 * np.roll(seg, 1)
    else:
        w[:-1] += 0.5 * seg
        w[1:] += 0.5 * seg
    return w


def _shoelace(pts: np.ndarray) -> float:
    """Signed area of the polygon with vertex list pts (closed implicitly)."""
    x = pts[:, 0]
    y = pts[:, 1]
    area = np.dot(x[:-1], y[1:]) - np.dot(y[:-1], x[1:])
    area += x[-1] * y[0] - y[-1] * x[0]
    return 0.5 * float(area)


def enclosed_area(loop: Polyline) -> float:
    """Absolute area enclosed by a simple closed polyline (shoelace)."""
    if not loop.closed:
        raise NotClosed("enclosed_area needs a closed polyline")
    _check_edges(loop)
    if segments_intersect_scan(curve_edges([loop])):
        raise SelfIntersecting("loop has self-intersections")
    return abs(_shoelace(loop.points))


def resample(curve: Polyline, n: int) -> Polyline:
    """Redistribute n nodes uniformly in arclength by linear interpolation.

    Endpoints of an open curve are preserved bit-exactly.
    """
    if n < 3:
        raise ValueError("resample needs n >= 3")
    seg = _check_edges(curve)
    pts = curve.points
    if curve.closed:
        src = np.vstack([pts, pts[0]])
    else:
        src = pts
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if curve.closed:
        targets = total * np.arange(n) / n
    else:
        targets = total * np.arange(n) / (n - 1)
    x = np.interp(targets, s, src[:, 0])
    y = np.interp(targets, s, src[:, 1])
    out = np.column_stack([x, y])
    out[0] = pts[0]
    if not curve.closed:
        out[-1] = pts[-1]
    return Polyline(out, closed=curve.closed)


def _point_segment_dist(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances of each point (n, 2) to each segment a[j]..b[j] (m, 2): (n, m)."""
    ab = b - a  # (m, 2)
    ap = points[:, None, :] - a[None, :, :]  # (n, m, 2)
    ab2 = np.einsum("mj,mj->m", ab, ab)
    t = np.einsum("nmj,mj->nm", ap, ab) / ab2[None, :]
    t = np.clip(t, 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = points[:, None, :] - proj
    return np.sqrt(np.einsum("nmj,nmj->nm", d, d))


def _segments_of(curve: Polyline) -> tuple[np.ndarray, np.ndarray]:
    pts = curve.points
    if curve.closed:
        a = pts
        b = np.roll(pts, -1, axis=0)
    else:
        a = pts[:-1]
        b = pts[1:]
    return a, b


def polyline_distance(a: Polyline, b: Polyline) -> float:
    """Symmetric Hausdorff distance between two polylines (point-to-segment)."""
    a1, a2 = _segments_of(a)
    b1, b2 = _segments_of(b)
    d_ab = _point_segment_dist(a.points, b1, b2).min(axis=1).max()
    d_ba = _point_segment_dist(b.points, a1, a2).min(axis=1).max()
    return float(max(d_ab, d_ba))


def curve_edges(curves) -> np.ndarray:
    """Stack all edges of the given polylines into an (m, 2, 2) array."""
    out = []
    for c in curves:
        a, b = _segments_of(c)
        out.append(np.stack([a, b], axis=1))
    return np.concatenate(out, axis=0)


def segments_intersect_scan(segments: np.ndarray) -> list[tuple[int, int]]:
    """All intersecting pairs of non-adjacent segments.

    ``segments`` is (m, 2, 2).  Two segments are adjacent, and therefore
    excluded, when they share an endpoint exactly (bit-equal
    coordinates); this covers consecutive edges of one curve as well as
    different curves meeting at a common junction node.  The test uses
    the classical orientation predicates, so touching at a point that is
    not a shared endpoint counts as an intersection.
    """
    seg = np.asarray(segments, dtype=float)
    m = seg.shape[0]
    if m < 2:
        return []
    p = seg[:, 0, :]
    q = seg[:, 1, :]

    def orient(a, b, c):
        # sign of the cross product (b - a) x (c - a); broadcasting over pairs
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
            b[..., 1] - a[..., 1]
        ) * (c[..., 0] - a[..., 0])

    P1 = p[:, None, :]
    Q1 = q[:, None, :]
    P2 = p[None, :, :]
    Q2 = q[None, :, :]
    d1 = orient(P1, Q1, P2)
    d2 = orient(P1, Q1, Q2)
    d3 = orient(P2, Q2, P1)
    d4 = orient(P2, Q2, Q1)

    proper = ((d1 * d2) < 0) & ((d3 * d4) < 0)

    def on_seg(a, b, c, d_abc):
        # c collinear with a-b and within the bounding box
        inside = (
            (np.minimum(a[..., 0], b[..., 0]) <= c[..., 0])
            & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1])
            & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
        )
        return (d_abc == 0) & inside

    touch = (
        on_seg(P1, Q1, P2, d1)
        | on_seg(P1, Q1, Q2, d2)
        | on_seg(P2, Q2, P1, d3)
        | on_seg(P2, Q2, Q1, d4)
    )
    hit = proper | touch

    shared = np.zeros((m, m), dtype=bool)
    for u in (p, q):
        for v in (p, q):
            shared |= np.all(u[:, None, :] == v[None, :, :], axis=2)
    hit &= ~shared
    iu = np.triu_indices(m, k=1)
    mask = hit[iu]
    return list(zip(iu[0][mask].tolist(), iu[1][mask].tolist()))


def clip_to_disc(curve: Polyline, radius: float, center=(0.0, 0.0)) -> list[Polyline]:
    """Pieces of a polyline inside the closed disc, with exact boundary cuts.

    Used to restrict rescaled networks to a comparison window.  Pieces
    shorter than 3 nodes are padded with their midpoint dropped, i.e.
    skipped when degenerate.
    """
    c = np.asarray(center, dtype=float)
    pts = curve.points
    if curve.closed:
        pts = np.vstack([pts, pts[0]])
    inside = np.linalg.norm(pts - c, axis=1) <= radius
    pieces = []
    cur = []

    def crossing(p0, p1):
        # solve |p0 + t (p1 - p0) - c| = radius for t in [0, 1]
        d = p1 - p0
        f = p0 - c
        a = d @ d
        b = 2.0 * (f @ d)
        cc = f @ f - radius * radius
        disc = b * b - 4 * a * cc
        disc = max(disc, 0.0)
        r1 = (-b - np.sqrt(disc)) / (2 * a)
        r2 = (-b + np.sqrt(disc)) / (2 * a)
        ts = [t for t in (r1, r2) if 0.0 <= t <= 1.0]
        return [p0 + t * d for t in ts]

    for i in range(len(pts) - 1):
        p0, p1 = pts[i], pts[i + 1]
        if inside[i]:
            if not cur:
                cur = [p0]
            if inside[i + 1]:
                cur.append(p1)
            else:
                cur.extend(crossing(p0, p1)[:1])
                pieces.append(cur)
                cur = []
        else:
            if inside[i + 1]:
                xs = crossing(p0, p1)
                cur = [xs[0]] if xs else []
                cur.append(p1)
            else:
                xs = crossing(p0, p1)
                if len(xs) == 2:
                    pieces.append(xs)
    if cur:
        pieces.append(cur)

    out = []
    for piece in pieces:
        arr = np.asarray(piece)
        keep = np.ones(len(arr), dtype=bool)
        keep[1:] = np.linalg.norm(np.diff(arr, axis=0), axis=1) > 0
        arr = arr[keep]
        if len(arr) >= 3:
            out.append(Polyline(arr, closed=False))
        elif len(arr) == 2:
            mid = 0.5 * (arr[0] + arr[1])
            out.append(Polyline(np.vstack([arr[0], mid, arr[1]]), closed=False))
    return out
