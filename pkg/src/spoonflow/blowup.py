"""Parabolic rescaling about the singular point and limit classification.

The singular time of a loop collapse follows from the exact area law
dA/dt = -5 pi / 3: the vanishing time is t + 3 A(t) / (5 pi) evaluated
on the measured area series (for the exact law this is independent of
t and equals 3 A0 / (5 pi); anchoring it on the latest monitored area
absorbs the O(h^2) slope drift of the discretization, which matters
because the rescaling magnifies times near T by 1 / (T - t)).

The singular point is the limit of the loop centroid.  Self-similar
collapse makes the centroid x0 + sqrt(2 (T - t)) * c for a constant
offset c, so the centroid is regressed on sqrt(T - t), not on t.

Rescaled networks (x - x0) / sqrt(2 (T - t)) at rescaled times
frak_t = -log(T - t) / 2 are compared inside a radius-5 window against
the catalog: half-line, line, flat triod (fitted by direction) and the
shot spoon profile (fitted by rotation, seeded by the handle
direction).  Classification is by least final Hausdorff distance.
"""

from __future__ import annotations

import math
import numpy as np
from dataclasses import dataclass, field

from .geometry import Polyline, arclength_weights, clip_to_disc, frame, resample, _point_segment_dist, _segments_of
from .network import SpoonNetwork
from .diagnostics import InvalidTime, gaussian_density_rescaled
from .shrinker import ShrinkerProfile, flat_half_line, flat_line, flat_triod

__all__ = [
    "WrongStopReason",
    "RescaledSnapshot",
    "BlowupReport",
    "estimate_singularity",
    "rescale_trajectory",
    "classify_limit",
    "rescaled_dissipation",
    "rescaled_boundary_term",
    "hausdorff_union",
]

WINDOW_RADIUS = 5.0
INCONCLUSIVE_DISTANCE = 0.1
CANDIDATE_KINDS = ("HalfLine", "Line", "FlatTriod", "BrakkeSpoon")

AREA_RATE = 5.0 * math.pi / 3.0


class WrongStopReason(Exception):
    pass


@dataclass(frozen=True)
class RescaledSnapshot:
    frak_t: float
    net: SpoonNetwork


@dataclass
class BlowupReport:
    x0: np.ndarray
    T_est: float
    limit_class: str
    distance_series: list          # per snapshot: distance of the winning class
    density_series: list           # per snapshot: rescaled Gaussian density
    frak_t: list
    final_distances: dict          # per candidate kind
    fitted_angles: dict
    thresholds: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "x0": list(map(float, self.x0)),
            "T_est": self.T_est,
            "limit_class": self.limit_class,
            "frak_t": self.frak_t,
            "distance_series": self.distance_series,
            "density_series": self.density_series,
            "final_distances": self.final_distances,
            "fitted_angles": self.fitted_angles,
            "thresholds": self.thresholds,
        }


def _loop_centroid(net: SpoonNetwork) -> np.ndarray:
    pts = net.loop.points
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    mid = 0.5 * (pts[:-1] + pts[1:])
    return (mid * seg[:, None]).sum(axis=0) / seg.sum()


def estimate_singularity(result) -> tuple[np.ndarray, float]:
    """Estimated singular point and time of an area-vanishing run.

    ``result`` is a flow RunResult.  The time comes from the area law
    anchored at the last monitored area; the point from the loop
    centroid regressed on sqrt(T - t) over the last fifth of the run.
    """
    if result.stop.kind != "AreaVanishing":
        raise WrongStopReason(f"run stopped with {result.stop.kind}, not AreaVanishing")
    snaps = result.snapshots
    t_last, net_last = snaps[-1]
    T_est = t_last + net_last.loop_area() / AREA_RATE

    t0 = snaps[0][0]
    cutoff = T_est - 0.2 * (T_est - t0)
    window = [(t, net) for t, net in snaps if t >= cutoff]
    if len(window) < 6:
        window = snaps[-6:]
    times = np.array([t for t, _ in window])
    cent = np.array([_loop_centroid(net) for _, net in window])
    basis = np.column_stack([np.ones_like(times), np.sqrt(np.maximum(T_est - times, 0.0))])
    coef, *_ = np.linalg.lstsq(basis, cent, rcond=None)
    x0 = coef[0]
    return x0, float(T_est)


def rescale_trajectory(snapshots, x0, T_est: float, frak_t_grid) -> list[RescaledSnapshot]:
    """Snapshots nearest to each requested rescaled time, exactly transformed."""
    x0 = np.asarray(x0, dtype=float)
    times = np.array([t for t, _ in snapshots])
    if np.any(times >= T_est):
        raise InvalidTime("all snapshot times must lie below T_est")
    out = []
    used = set()
    for ft in frak_t_grid:
        t_req = T_est - math.exp(-2.0 * float(ft))
        i = int(np.argmin(np.abs(times - t_req)))
        if i in used:
            continue
        used.add(i)
        t, net = snapshots[i]
        lam = 1.0 / math.sqrt(2.0 * (T_est - t))
        rescaled = net.transformed(scale=lam, translation=-lam * x0)
        out.append(RescaledSnapshot(frak_t=-0.5 * math.log(T_est - t), net=rescaled))
    return out


# ---------------------------------------------------------------------------
# Window Hausdorff distance and candidate fitting
# ---------------------------------------------------------------------------

def _window_pieces(curves, radius=WINDOW_RADIUS, max_nodes=160):
    pieces = []
    for c in curves:
        for piece in clip_to_disc(c, radius):
            if piece.n > max_nodes:
                piece = resample(piece, max_nodes)
            pieces.append(piece)
    return pieces


def hausdorff_union(curves_a, curves_b) -> float:
    """Symmetric Hausdorff distance between two unions of polylines."""
    if not curves_a or not curves_b:
        return math.inf

    def directed(A, B):
        segs = [_segments_of(c) for c in B]
        a1 = np.vstack([s[0] for s in segs])
        a2 = np.vstack([s[1] for s in segs])
        worst = 0.0
        for c in A:
            d = _point_segment_dist(c.points, a1, a2).min(axis=1).max()
            worst = max(worst, float(d))
        return worst

    return max(directed(curves_a, curves_b), directed(curves_b, curves_a))


def _golden_min(f, lo, hi, tol=1e-6):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _spoon_base(profile: ShrinkerProfile, radius=WINDOW_RADIUS, nodes: int = 200):
    """Decimated canonical spoon (loop + truncated half-line) for rotation fits."""
    loop = resample(profile.loop, nodes)
    half = profile.halfline(length=3.0 * radius, n=nodes)
    return (loop.points, half.points)


def _rotated_pieces(base_points, angle, radius=WINDOW_RADIUS):
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return _window_pieces([Polyline(p @ R.T, closed=False) for p in base_points], radius)


def _candidate_fit(kind, net_pieces, spoon_base, handle_dir, radius=WINDOW_RADIUS,
                   angle_tol=1e-4):
    """Best-fit angle and window Hausdorff distance for one catalog entry."""
    if kind == "BrakkeSpoon":
        if spoon_base is None:
            return math.nan, math.inf
        # the profile's half-line points along -x; seed so it tracks the handle
        seed = math.atan2(handle_dir[1], handle_dir[0]) - math.pi
        f = lambda a: hausdorff_union(net_pieces, _rotated_pieces(spoon_base, a, radius))
        ang, dist = _golden_min(f, seed - 0.4, seed + 0.4, tol=angle_tol)
        return ang, dist

    maker = {"Line": flat_line, "HalfLine": flat_half_line, "FlatTriod": flat_triod}[kind]
    period = {"Line": math.pi, "HalfLine": 2.0 * math.pi, "FlatTriod": 2.0 * math.pi / 3.0}[kind]
    base = tuple(c.points for c in maker(0.0).curves(length=radius, spacing=0.08))

    def dist_at(a):
        return hausdorff_union(net_pieces, _rotated_pieces(base, a, radius))

    coarse = np.linspace(0.0, period, 13)[:-1]
    vals = [dist_at(a) for a in coarse]
    i = int(np.argmin(vals))
    lo = coarse[i] - period / 12.0
    hi = coarse[i] + period / 12.0
    ang, dist = _golden_min(dist_at, lo, hi, tol=angle_tol)
    return ang, dist


def classify_limit(rescaled, profile: ShrinkerProfile | None) -> BlowupReport:
    """Classify the rescaled sequence against the homothetic catalog.

    Needs at least 5 snapshots spanning at least 2 units of rescaled
    time.  Fits every candidate per snapshot, reports the density
    series, and classifies by the least final window distance;
    ``Inconclusive`` when nothing comes within the distance threshold.
    """
    if len(rescaled) < 5:
        raise ValueError("need at least 5 rescaled snapshots")
    span = rescaled[-1].frak_t - rescaled[0].frak_t
    if span < 2.0:
        raise ValueError(f"rescaled time span {span:.3f} below 2")

    frak_ts = [r.frak_t for r in rescaled]
    density = [gaussian_density_rescaled([r.net.loop, r.net.handle]) for r in rescaled]
    spoon_base = _spoon_base(profile) if profile is not None else None

    per_candidate = {k: [] for k in CANDIDATE_KINDS}
    angles = {k: [] for k in CANDIDATE_KINDS}
    for r in rescaled:
        net = r.net
        pieces = _window_pieces([net.loop, net.handle])
        hdir = net.endpoint - net.junction
        nrm = np.linalg.norm(hdir)
        hdir = hdir / nrm if nrm > 0 else np.array([1.0, 0.0])
        for kind in CANDIDATE_KINDS:
            if not pieces:
                angles[kind].append(math.nan)
                per_candidate[kind].append(math.inf)
                continue
            ang, dist = _candidate_fit(kind, pieces, spoon_base, hdir)
            angles[kind].append(ang)
            per_candidate[kind].append(dist)

    final = {k: per_candidate[k][-1] for k in CANDIDATE_KINDS}
    best = min(final, key=final.get)
    limit_class = best if final[best] < INCONCLUSIVE_DISTANCE else "Inconclusive"
    chosen = per_candidate[best]

    return BlowupReport(
        x0=np.zeros(2),  # filled by the caller that owns the estimate
        T_est=math.nan,
        limit_class=limit_class,
        distance_series=[float(v) for v in chosen],
        density_series=[float(v) for v in density],
        frak_t=[float(v) for v in frak_ts],
        final_distances={k: float(v) for k, v in final.items()},
        fitted_angles={k: float(angles[k][-1]) for k in CANDIDATE_KINDS},
        thresholds={
            "window_radius": WINDOW_RADIUS,
            "inconclusive_distance": INCONCLUSIVE_DISTANCE,
        },
    )


# ---------------------------------------------------------------------------
# Rescaled monotonicity instrumentation
# ---------------------------------------------------------------------------

def rescaled_dissipation(net: SpoonNetwork) -> float:
    """integral of |k nu + x_perp|^2 exp(-|x|^2 / 2) over a rescaled network."""
    total = 0.0
    for c in (net.loop, net.handle):
        fr = frame(c)
        w = arclength_weights(c)
        r2 = np.einsum("ij,ij->i", c.points, c.points)
        perp = np.einsum("ij,ij->i", c.points, fr.nu)
        total += float(np.sum((fr.k + perp) ** 2 * np.exp(-0.5 * r2) * w))
    return total


def rescaled_boundary_term(net: SpoonNetwork) -> float:
    """< P_rescaled | tau(P) > exp(-|P|^2 / 2) of a rescaled network."""
    P = net.endpoint
    tauP = frame(net.handle).tau[-1]
    return float((P @ tauP) * math.exp(-0.5 * float(P @ P)))
