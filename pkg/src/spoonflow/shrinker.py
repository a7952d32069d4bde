"""Self-similar shrinking profiles: the shooting solver and the flat catalog.

A network that evolves by homothety satisfies k + <x | nu> = 0 at every
point.  Along a solution arc parametrized by arclength with tangent
angle theta this closes into the first-order system

    x' = cos theta,  y' = sin theta,  theta' = x sin theta - y cos theta

since k = -<x, nu> with nu = (-sin theta, cos theta).  The spoon
profile exploits reflection symmetry about the x-axis: the junction
sits at (-d, 0), the half-line runs along the negative x-axis (its
supporting line passes through the origin, as k = 0 forces <x, nu> = 0
there), and the upper loop arc leaves the junction at +60 degrees.  The
arc closes symmetrically iff it meets the x-axis with a vertical
tangent, which happens for exactly one junction distance d; the solver
brackets and bisects the closure residual y(theta = -pi/2) in d.

By construction theta decreases from pi/3 to -pi/2 on the upper arc, so
the loop turning is 2 (pi/3 + pi/2) = 5 pi / 3.
"""

from __future__ import annotations

import math
import numpy as np
from dataclasses import dataclass

from .geometry import Polyline, frame, arclength_weights
from .network import Disc, SpoonNetwork
from .diagnostics import gaussian_density_rescaled

__all__ = [
    "StepTooLarge",
    "NoBracket",
    "ShrinkerProfile",
    "FlatShrinker",
    "integrate_shrinker_arc",
    "shoot_brakke_spoon",
    "shrinker_residual",
    "spoon_gaussian_density",
    "flat_line",
    "flat_half_line",
    "flat_triod",
]

UPPER_ARC_START_ANGLE = math.pi / 3.0
UPPER_ARC_END_ANGLE = -math.pi / 2.0


class StepTooLarge(Exception):
    pass


class NoBracket(Exception):
    pass


def _rk4_until(x, y, th, ds, stop_angle, s_max, record=None):
    """Integrate the closure system until theta <= stop_angle.

    Lands exactly on the stop angle by bisecting the final partial step.
    Returns (x, y, th, s) or None when the event never fires within s_max.
    Appends (x, y, th) tuples to ``record`` when given.
    """
    s = 0.0
    while s < s_max:
        x0, y0, th0 = x, y, th
        # inlined RK4 of x'=cos th, y'=sin th, th' = x sin th - y cos th
        c1 = math.cos(th); s1 = math.sin(th); k1 = x * s1 - y * c1
        x2 = x + 0.5 * ds * c1; y2 = y + 0.5 * ds * s1; t2 = th + 0.5 * ds * k1
        c2 = math.cos(t2); s2 = math.sin(t2); k2 = x2 * s2 - y2 * c2
        x3 = x + 0.5 * ds * c2; y3 = y + 0.5 * ds * s2; t3 = th + 0.5 * ds * k2
        c3 = math.cos(t3); s3 = math.sin(t3); k3 = x3 * s3 - y3 * c3
        x4 = x + ds * c3; y4 = y + ds * s3; t4 = th + ds * k3
        c4 = math.cos(t4); s4 = math.sin(t4); k4 = x4 * s4 - y4 * c4
        x += ds / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)
        y += ds / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
        th += ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += ds
        if th <= stop_angle:
            lo, hi = 0.0, ds
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                xm, ym, tm = _rk4_one(x0, y0, th0, mid)
                if tm > stop_angle:
                    lo = mid
                else:
                    hi = mid
            xm, ym, tm = _rk4_one(x0, y0, th0, 0.5 * (lo + hi))
            if record is not None:
                record.append((xm, ym, tm))
            return xm, ym, tm, s - ds + 0.5 * (lo + hi)
        if record is not None:
            record.append((x, y, th))
    return None


def _rk4_one(x, y, th, ds):
    c1 = math.cos(th); s1 = math.sin(th); k1 = x * s1 - y * c1
    x2 = x + 0.5 * ds * c1; y2 = y + 0.5 * ds * s1; t2 = th + 0.5 * ds * k1
    c2 = math.cos(t2); s2 = math.sin(t2); k2 = x2 * s2 - y2 * c2
    x3 = x + 0.5 * ds * c2; y3 = y + 0.5 * ds * s2; t3 = th + 0.5 * ds * k2
    c3 = math.cos(t3); s3 = math.sin(t3); k3 = x3 * s3 - y3 * c3
    x4 = x + ds * c3; y4 = y + ds * s3; t4 = th + ds * k3
    c4 = math.cos(t4); s4 = math.sin(t4); k4 = x4 * s4 - y4 * c4
    return (
        x + ds / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4),
        y + ds / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4),
        th + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4),
    )


def integrate_shrinker_arc(k0, start, theta0, ds=1e-3, s_max=20.0,
                           truncation_tol=1e-8):
    """Sample the self-shrinker arc from ``start`` with tangent angle theta0.

    ``k0`` is the expected initial curvature; the closure relation
    k = -<x, nu> determines the curvature from position, so k0 is
    checked for consistency rather than integrated.  Returns a dict with
    the samples, the per-sample curvature and the per-sample value of
    k + <x, nu> (zero by construction up to integrator roundoff).  A
    step-doubling estimate guards the local truncation error.
    """
    x, y = float(start[0]), float(start[1])
    th = float(theta0)
    k_init = x * math.sin(th) - y * math.cos(th)
    consistent = abs(k_init - k0) <= 1e-6 * max(1.0, abs(k0))

    # local truncation estimate on the first step: full step vs two halves
    xf, yf, tf = _rk4_one(x, y, th, ds)
    xh, yh, thh = _rk4_one(*_rk4_one(x, y, th, 0.5 * ds), 0.5 * ds)
    lte = math.hypot(xf - xh, yf - yh) + abs(tf - thh)
    if lte > truncation_tol:
        raise StepTooLarge(f"local truncation estimate {lte:.3e} exceeds {truncation_tol:g}")

    n = max(1, int(round(s_max / ds)))
    ds_eff = s_max / n  # land on s_max exactly
    xs = np.empty((n + 1, 2))
    thetas = np.empty(n + 1)
    xs[0] = (x, y)
    thetas[0] = th
    for i in range(1, n + 1):
        x, y, th = _rk4_one(x, y, th, ds_eff)
        xs[i] = (x, y)
        thetas[i] = th
    nu = np.column_stack([-np.sin(thetas), np.cos(thetas)])
    k = -(xs[:, 0] * nu[:, 0] + xs[:, 1] * nu[:, 1])
    return {
        "points": xs,
        "theta": thetas,
        "k": k,
        "closure_residual": k + np.einsum("ij,ij->i", xs, nu),
        "k0_consistent": consistent,
        "ds": ds,
    }


def _closure_mismatch(d, ds):
    """Height of the upper arc where its tangent turns vertical (want 0)."""
    hit = _rk4_until(-d, 0.0, UPPER_ARC_START_ANGLE, ds, UPPER_ARC_END_ANGLE, s_max=20.0)
    if hit is None:
        raise NoBracket(f"arc from d = {d} never reaches a vertical tangent")
    return hit[1]


def _bisect(f, lo, hi, flo, tol=1e-12, max_iter=200):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _secant(f, a, b, tol=1e-13, max_iter=80):
    fa, fb = f(a), f(b)
    for _ in range(max_iter):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        a, fa, b, fb = b, fb, c, f(c)
        if abs(b - a) < tol:
            break
    return b


@dataclass(frozen=True)
class ShrinkerProfile:
    """Shooting output: the closed loop, junction data and residual bookkeeping."""

    loop: Polyline           # open storage: junction -> upper arc -> lower arc -> junction
    halfline_dir: np.ndarray  # unit direction of the half-line from the junction
    junction: np.ndarray
    shoot_param: float        # curvature at the junction (upper arc)
    junction_distance: float  # d: junction at (-d, 0)
    residual_max: float
    closure_residual: float
    loop_length: float
    theta: np.ndarray         # tangent angle per loop node (continuous lift)

    def halfline(self, length: float = 20.0, n: int = 400) -> Polyline:
        """The half-line truncated at the given length."""
        t = np.linspace(0.0, length, n)[:, None]
        pts = self.junction + t * self.halfline_dir
        return Polyline(pts, closed=False)

    def loop_turning(self) -> float:
        return float(self.theta[-1] - self.theta[0])

    def junction_angle_deviation(self) -> float:
        """Max deviation of the three junction angles from 120 degrees (exact lift)."""
        out_start = self.theta[0]
        out_end = self.theta[-1] + math.pi  # reversed incoming tangent
        out_half = math.atan2(self.halfline_dir[1], self.halfline_dir[0])
        devs = []
        for a, b in ((out_start, out_end), (out_start, out_half), (out_end, out_half)):
            ang = abs((a - b + math.pi) % (2 * math.pi) - math.pi)
            devs.append(abs(ang - 2 * math.pi / 3))
        return max(devs)

    def to_network(self, domain_radius_factor: float = 4.0,
                   halfline_length: float | None = None,
                   n_handle: int = 64, n_loop: int | None = None) -> SpoonNetwork:
        """Export as a spoon network; the half-line is truncated on a disc boundary.

        ``n_loop`` resamples the (finely sampled) loop to a node count
        commensurate with the handle, which the flow module needs.
        """
        from .geometry import resample

        extent = float(np.linalg.norm(self.loop.points, axis=1).max())
        if halfline_length is None:
            halfline_length = domain_radius_factor * extent
        t = np.linspace(0.0, 1.0, n_handle)[:, None]
        P = self.junction + halfline_length * self.halfline_dir
        handle = Polyline(self.junction * (1 - t) + P * t, closed=False)
        loop = self.loop if n_loop is None else resample(self.loop, n_loop + 1)
        radius = float(np.linalg.norm(P))
        return SpoonNetwork(
            loop=loop, handle=handle, domain=Disc(np.zeros(2), radius)
        )


def shoot_brakke_spoon(tolerance: float = 1e-12, ds: float = 1e-3,
                       scan=(0.05, 3.0, 30), refine_factor: int = 10,
                       root_finder: str = "bisect") -> ShrinkerProfile:
    """Shoot the symmetric self-shrinking spoon profile.

    Scans the junction distance for a sign change of the closure
    mismatch, solves it to ``tolerance`` with the requested root finder,
    then samples the converged arc at ds / refine_factor and mirrors it
    across the x-axis to close the loop.
    """
    lo, hi, count = scan
    grid = np.linspace(lo, hi, count)
    bracket = None
    prev = None
    for d in grid:
        try:
            v = _closure_mismatch(float(d), ds)
        except NoBracket:
            v = None
        if prev is not None and v is not None and prev[1] is not None:
            if (v > 0) != (prev[1] > 0):
                bracket = (prev[0], float(d), prev[1])
                break
        prev = (float(d), v)
    if bracket is None:
        raise NoBracket(f"no sign change of the closure mismatch on [{lo}, {hi}] ({count} samples)")

    f = lambda d: _closure_mismatch(d, ds)
    if root_finder == "bisect":
        d_star = _bisect(f, bracket[0], bracket[1], bracket[2], tol=tolerance)
    elif root_finder == "secant":
        d_star = _secant(f, bracket[0], bracket[1], tol=tolerance)
    else:
        raise ValueError(f"unknown root finder {root_finder!r}")

    ds_fine = ds / refine_factor
    hit = _rk4_until(-d_star, 0.0, UPPER_ARC_START_ANGLE, ds_fine,
                     UPPER_ARC_END_ANGLE, s_max=20.0)
    if hit is None:
        raise NoBracket("converged parameter fails to reach the closure event")
    closure = float(hit[1])
    s_star = hit[3]
    # resample the arc with a uniform step dividing the event arclength
    # exactly; a trailing partial step would put a spacing jump at the
    # mirror seam, which the discrete curvature stencil is sensitive to
    n_steps = max(8, int(round(s_star / ds_fine)))
    ds_uni = s_star / n_steps
    arc = np.empty((n_steps + 1, 2))
    theta_u = np.empty(n_steps + 1)
    x, y, th = -d_star, 0.0, UPPER_ARC_START_ANGLE
    arc[0] = (x, y)
    theta_u[0] = th
    for i in range(1, n_steps + 1):
        x, y, th = _rk4_one(x, y, th, ds_uni)
        arc[i] = (x, y)
        theta_u[i] = th
    # enforce exact symmetry: pin the crossing onto the axis
    arc[-1, 1] = 0.0
    lower = arc[-2::-1].copy()
    lower[:, 1] = -lower[:, 1]
    loop_pts = np.vstack([arc, lower])
    theta_l = (2.0 * UPPER_ARC_END_ANGLE - theta_u)[-2::-1]
    theta_full = np.concatenate([theta_u, theta_l])
    # the arc integrates clockwise; store the loop counterclockwise
    # (convex loop with k > 0, and the orientation class the junction
    # speed relations are written for): reverse the walk and lift the
    # reversed tangents by pi
    loop_pts = loop_pts[::-1].copy()
    theta_full = math.pi + theta_full[::-1]
    loop = Polyline(loop_pts, closed=False)

    fr = frame(loop)
    res = np.abs(fr.k + np.einsum("ij,ij->i", loop_pts, fr.nu))
    junction = np.array([-d_star, 0.0])
    k_junction = float(d_star * math.sin(UPPER_ARC_START_ANGLE))
    return ShrinkerProfile(
        loop=loop,
        halfline_dir=np.array([-1.0, 0.0]),
        junction=junction,
        shoot_param=k_junction,
        junction_distance=float(d_star),
        residual_max=float(res.max()),
        closure_residual=abs(closure),
        loop_length=loop.length,
        theta=theta_full,
    )


def shrinker_residual(target) -> dict:
    """Pointwise statistics of k + <x, nu> over a polyline or network.

    Uses the discrete frame, so the result carries the frame's O(h^2)
    curvature error; this is the a-posteriori validation of the
    closure-relation reduction used by the integrator.
    """
    if isinstance(target, SpoonNetwork):
        curves = [target.loop, target.handle]
    elif isinstance(target, Polyline):
        curves = [target]
    else:
        curves = list(target)
    worst = 0.0
    sq = 0.0
    for c in curves:
        fr = frame(c)
        res = fr.k + np.einsum("ij,ij->i", c.points, fr.nu)
        w = arclength_weights(c)
        worst = max(worst, float(np.abs(res).max()))
        sq += float(np.sum(res**2 * w))
    return {"max": worst, "l2": math.sqrt(sq)}


# ---------------------------------------------------------------------------
# Flat homothetic catalog and densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatShrinker:
    """Line, half-line or flat triod anchored at the origin."""

    kind: str  # "Line" | "HalfLine" | "FlatTriod"
    direction: float = 0.0  # rotation of the canonical representative

    def curves(self, length: float = 20.0, spacing: float = 0.05) -> list[Polyline]:
        n = max(3, int(math.ceil(length / spacing)) + 1)
        t = np.linspace(0.0, length, n)[:, None]

        def ray(angle):
            d = np.array([math.cos(angle), math.sin(angle)])
            return Polyline(t * d, closed=False)

        a = self.direction
        if self.kind == "Line":
            return [ray(a), ray(a + math.pi)]
        if self.kind == "HalfLine":
            return [ray(a)]
        if self.kind == "FlatTriod":
            return [ray(a), ray(a + 2 * math.pi / 3), ray(a + 4 * math.pi / 3)]
        raise ValueError(f"unknown flat shrinker {self.kind!r}")

    def density(self) -> float:
        # each half-line through the origin carries exactly 1/2
        return {"Line": 1.0, "HalfLine": 0.5, "FlatTriod": 1.5}[self.kind]


def flat_line(direction=0.0):
    return FlatShrinker("Line", direction)


def flat_half_line(direction=0.0):
    return FlatShrinker("HalfLine", direction)


def flat_triod(direction=0.0):
    return FlatShrinker("FlatTriod", direction)


def spoon_gaussian_density(profile: ShrinkerProfile) -> float:
    """Gaussian density of the spoon profile: loop quadrature plus the
    analytically integrated half-line tail."""
    loop_part = gaussian_density_rescaled([profile.loop])
    d = profile.junction_distance
    half_part = 0.5 * math.erfc(d / math.sqrt(2.0))
    return loop_part + half_part
