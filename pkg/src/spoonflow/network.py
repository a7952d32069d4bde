"""Spoon-shaped networks and the triple-junction algebra.

A spoon network is a closed loop and an open handle meeting at a single
triple junction O; the far handle end P is pinned on the boundary of a
convex domain.  The loop is stored split at O as an open point sequence
whose first and last nodes both equal O, so the three curve ends that
the junction relations address are all first-class.

At a junction where the three unit tangents satisfy the 120 degree
condition tau1(0) - tau1(1) + tau2(0) = 0, differentiating the
concurrency of the ends in time yields linear relations between the end
curvatures k and the tangential speeds lam:

    lam1(0) = (k1(1) + k2(0)) / sqrt(3)
    lam1(1) = (k2(0) - k1(0)) / sqrt(3)
    lam2(0) = (-k1(0) - k1(1)) / sqrt(3)

with the inverse

    k1(0) = (-lam1(1) - lam2(0)) / sqrt(3)
    k1(1) = ( lam1(0) - lam2(0)) / sqrt(3)
    k2(0) = ( lam1(0) + lam1(1)) / sqrt(3)

whence both alternating sums k1(0) - k1(1) + k2(0) and
lam1(0) - lam1(1) + lam2(0) vanish.
"""

from __future__ import annotations

import math
import numpy as np
from dataclasses import dataclass
from typing import Union

from .geometry import (
    Polyline,
    curve_edges,
    frame,
    segments_intersect_scan,
    _shoelace,
)

SQRT3 = math.sqrt(3.0)

# Angle condition tolerances (radians): acceptance of initial data, and
# the runtime alarm used while the flow is stepping.
ANGLE_TOL_ACCEPT = 1e-2
ANGLE_TOL_RUNTIME = 5e-2

ENDPOINT_BOUNDARY_REL_TOL = 1e-9


class NetworkError(Exception):
    pass


class InvalidNetwork(NetworkError):
    """Raised by validation; carries the list of failed invariants."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


@dataclass(frozen=True)
class Disc:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise ValueError("disc radius must be positive")

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius + tol

    def boundary_distance(self, p):
        return abs(np.linalg.norm(np.asarray(p) - self.center) - self.radius)

    @property
    def diameter(self):
        return 2.0 * self.radius

    def to_json(self):
        return {"type": "disc", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        e = np.roll(v, -1, axis=0) - v
        e2 = np.roll(e, -1, axis=0)
        cr = e[:, 0] * e2[:, 1] - e[:, 1] * e2[:, 0]
        if not (np.all(cr > 0) or np.all(cr < 0)):
            raise ValueError("polygon must be strictly convex")
        if np.all(cr < 0):
            v = v[::-1].copy()  # store counterclockwise
        object.__setattr__(self, "vertices", v)

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        rel = pts[:, None, :] - v[None, :, :]
        cr = e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]
        scale = np.linalg.norm(e, axis=1)[None, :]
        return np.all(cr >= -tol * scale, axis=1)

    def boundary_distance(self, p):
        p = np.asarray(p, dtype=float)
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        ab = w - v
        t = np.clip(np.einsum("ij,ij->i", p - v, ab) / np.einsum("ij,ij->i", ab, ab), 0, 1)
        proj = v + t[:, None] * ab
        return float(np.linalg.norm(proj - p, axis=1).min())

    @property
    def diameter(self):
        v = self.vertices
        d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2)
        return float(d.max())

    def to_json(self):
        return {"type": "polygon", "vertices": self.vertices.tolist()}


ConvexDomain = Union[Disc, ConvexPolygon]


def domain_from_json(obj) -> ConvexDomain:
    if obj["type"] == "disc":
        return Disc(np.asarray(obj["center"], dtype=float), float(obj["radius"]))
    if obj["type"] == "polygon":
        return ConvexPolygon(np.asarray(obj["vertices"], dtype=float))
    raise ValueError(f"unknown domain type {obj['type']!r}")


@dataclass(frozen=True)
class SpoonNetwork:
    """Loop + handle meeting at the junction O, handle end P on the boundary.

    loop:   open storage from O around back to O (first == last == O)
    handle: open, from O to P
    """

    loop: Polyline
    handle: Polyline
    domain: ConvexDomain

    @property
    def junction(self) -> np.ndarray:
        return self.loop.points[0]

    @property
    def endpoint(self) -> np.ndarray:
        return self.handle.points[-1]

    def loop_polygon(self) -> Polyline:
        """The loop as a closed polyline (duplicate junction node dropped)."""
        return Polyline(self.loop.points[:-1], closed=True)

    def loop_area(self) -> float:
        return abs(_shoelace(self.loop.points[:-1]))

    def all_edges(self) -> np.ndarray:
        return curve_edges([self.loop, self.handle])

    def validate(self, angle_tol: float = ANGLE_TOL_ACCEPT) -> list[str]:
        """Return the list of violated invariants (empty when valid)."""
        failures = []
        O = self.junction
        lp = self.loop.points
        hp = self.handle.points
        if not (np.array_equal(lp[0], O) and np.array_equal(lp[-1], O)):
            failures.append("loop ends do not coincide at the junction")
        if not np.array_equal(hp[0], O):
            failures.append("handle does not start at the junction")
        d = self.domain
        if d.boundary_distance(self.endpoint) > ENDPOINT_BOUNDARY_REL_TOL * d.diameter:
            failures.append("endpoint is not on the domain boundary")
        if not d.contains(O[None, :])[0] or d.boundary_distance(O) <= 1e-9 * d.diameter:
            failures.append("junction is not strictly interior to the domain")
        if not check_containment(self):
            failures.append("network leaves the domain")
        if segments_intersect_scan(self.all_edges()):
            failures.append("network is not embedded")
        rep = check_angle_condition(self, angle_tol)
        if not rep["pass"]:
            failures.append(
                f"junction angles deviate from 120 degrees by {rep['max_angle_deviation']:.3e} rad"
            )
        return failures

    def require_valid(self, angle_tol: float = ANGLE_TOL_ACCEPT):
        failures = self.validate(angle_tol)
        if failures:
            raise InvalidNetwork(failures)
        return self

    def transformed(self, scale=1.0, rotation=0.0, translation=(0.0, 0.0)) -> "SpoonNetwork":
        """Image under the similarity x -> scale * R(rotation) x + translation."""
        c, s = math.cos(rotation), math.sin(rotation)
        R = np.array([[c, -s], [s, c]])
        t = np.asarray(translation, dtype=float)

        def tf(pts):
            return scale * pts @ R.T + t

        if isinstance(self.domain, Disc):
            dom = Disc(tf(self.domain.center[None, :])[0], scale * self.domain.radius)
        else:
            dom = ConvexPolygon(tf(self.domain.vertices))
        return SpoonNetwork(
            loop=Polyline(tf(self.loop.points), closed=False),
            handle=Polyline(tf(self.handle.points), closed=False),
            domain=dom,
        )

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "loop": self.loop.points.tolist(),
            "handle": self.handle.points.tolist(),
        }

    @staticmethod
    def from_json(obj, validate: bool = True) -> "SpoonNetwork":
        net = SpoonNetwork(
            loop=Polyline(np.asarray(obj["loop"], dtype=float), closed=False),
            handle=Polyline(np.asarray(obj["handle"], dtype=float), closed=False),
            domain=domain_from_json(obj["domain"]),
        )
        if validate:
            net.require_valid()
        return net


@dataclass(frozen=True)
class JunctionState:
    """End data of the three curve ends at the junction.

    Indices: 1_0 loop start, 1_1 loop end, 2_0 handle start.  Tangents
    follow each curve's own orientation, so t1_1 points *into* the
    junction.
    """

    k1_0: float
    k1_1: float
    k2_0: float
    lam1_0: float
    lam1_1: float
    lam2_0: float
    t1_0: np.ndarray
    t1_1: np.ndarray
    t2_0: np.ndarray


def end_frames(net: SpoonNetwork):
    """One-sided (tau, nu, k) at the three curve ends, each curve's own orientation."""
    lf = frame(net.loop)
    hf = frame(net.handle)
    return (
        (lf.tau[0], lf.nu[0], float(lf.k[0])),
        (lf.tau[-1], lf.nu[-1], float(lf.k[-1])),
        (hf.tau[0], hf.nu[0], float(hf.k[0])),
    )


def junction_speeds_from_curvatures(k1_0: float, k1_1: float, k2_0: float):
    """Tangential speeds of the three ends from the end curvatures."""
    lam1_0 = (k1_1 + k2_0) / SQRT3
    lam1_1 = (k2_0 - k1_0) / SQRT3
    lam2_0 = (-k1_0 - k1_1) / SQRT3
    return lam1_0, lam1_1, lam2_0


def junction_curvatures_from_speeds(lam1_0: float, lam1_1: float, lam2_0: float):
    """Inverse of junction_speeds_from_curvatures on the constraint subspace."""
    k1_0 = (-lam1_1 - lam2_0) / SQRT3
    k1_1 = (lam1_0 - lam2_0) / SQRT3
    k2_0 = (lam1_0 + lam1_1) / SQRT3
    return k1_0, k1_1, k2_0


def project_end_curvatures(k1_0: float, k1_1: float, k2_0: float):
    """Least-squares projection onto the constraint k1_0 - k1_1 + k2_0 = 0."""
    r = (k1_0 - k1_1 + k2_0) / 3.0
    return k1_0 - r, k1_1 + r, k2_0 - r


def junction_state(net: SpoonNetwork) -> JunctionState:
    """Measure the junction end data and derive speeds via the junction relations.

    The measured end curvatures only satisfy the alternating-sum
    constraint approximately; they are projected before the speed
    formulas are applied.
    """
    (t10, _, k10), (t11, _, k11), (t20, _, k20) = end_frames(net)
    k10, k11, k20 = project_end_curvatures(k10, k11, k20)
    lam10, lam11, lam20 = junction_speeds_from_curvatures(k10, k11, k20)
    return JunctionState(
        k1_0=k10, k1_1=k11, k2_0=k20,
        lam1_0=lam10, lam1_1=lam11, lam2_0=lam20,
        t1_0=t10, t1_1=t11, t2_0=t20,
    )


def _pairwise_angle(u, v):
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), u[0] * v[0] + u[1] * v[1])


def check_angle_condition(net: SpoonNetwork, tol: float = ANGLE_TOL_ACCEPT) -> dict:
    """Residual of tau1(0) - tau1(1) + tau2(0) and the pairwise end angles.

    Passes when every pairwise angle between the three outgoing
    directions is within ``tol`` of 2 pi / 3.
    """
    (t10, _, _), (t11, _, _), (t20, _, _) = end_frames(net)
    residual = float(np.linalg.norm(t10 - t11 + t20))
    d = [t10, -t11, t20]  # outgoing directions
    angles = [
        _pairwise_angle(d[0], d[1]),
        _pairwise_angle(d[1], d[2]),
        _pairwise_angle(d[0], d[2]),
    ]
    dev = max(abs(a - 2.0 * math.pi / 3.0) for a in angles)
    return {
        "residual": residual,
        "angles": angles,
        "max_angle_deviation": dev,
        "pass": dev <= tol,
    }


def check_compatibility_order2(net: SpoonNetwork, tol: float = 1e-8) -> dict:
    """Second-order compatibility residuals of an initial network.

    The curvature velocity gamma_xx / |gamma_x|^2 must vanish at the
    pinned endpoint and take the same value at all three junction ends.
    Generic initial data violate both; the flow mollifies the defect in
    an initial layer, so violations are reported, not raised.
    """
    hp = net.handle.points
    gx = 0.5 * (3.0 * hp[-1] - 4.0 * hp[-2] + hp[-3])
    gxx = hp[-1] - 2.0 * hp[-2] + hp[-3]
    v_end = gxx / (gx @ gx)

    vels = []
    for pts in (net.loop.points, net.loop.points[::-1], net.handle.points):
        gx = 0.5 * (-3.0 * pts[0] + 4.0 * pts[1] - pts[2])
        gxx = pts[2] - 2.0 * pts[1] + pts[0]
        vels.append(gxx / (gx @ gx))
    spread = max(
        float(np.linalg.norm(vels[i] - vels[j])) for i in range(3) for j in range(i + 1, 3)
    )
    endpoint_residual = float(np.linalg.norm(v_end))
    return {
        "endpoint_residual": endpoint_residual,
        "junction_spread": spread,
        "compatible": endpoint_residual <= tol and spread <= tol,
    }


def check_containment(net: SpoonNetwork) -> bool:
    """True iff every node lies in the closure of the domain."""
    d = net.domain
    tol = 1e-12 * d.diameter
    pts = np.vstack([net.loop.points, net.handle.points])
    return bool(np.all(d.contains(pts, tol=tol)))
