"""Explicit time integration of motion by curvature for spoon networks.

Every node carries the velocity gamma_xx / |gamma_x|^2, discretized in
the node index:

    v_i = 4 (p_{i+1} - 2 p_i + p_{i-1}) / |p_{i+1} - p_{i-1}|^2

whose normal component is the curvature vector and whose tangential
component drives the nodes toward parametric uniformity.  Time steps
are explicit Euler with dt = cfl * (min edge)^2.

The pinned endpoint P never moves.  The junction moves with the common
end velocity lam * tau + k * nu, computed from one-sided end
curvatures projected onto the alternating-sum constraint and converted
to tangential speeds by the junction relations; after each step the
three adjacent edge directions are rotated to the nearest exact
120-degree triple, preserving edge lengths, so the angle condition is
an every-step invariant rather than a drifting target.

Runs stop by a four-way taxonomy: loop area under the floor, handle
length collapse, a curvature blow-up flag, or the time limit.
"""

from __future__ import annotations

import logging
import math
import numpy as np
from dataclasses import dataclass, field, replace

from .geometry import Polyline, resample, _shoelace
from .network import (
    ANGLE_TOL_RUNTIME,
    SpoonNetwork,
    junction_speeds_from_curvatures,
    project_end_curvatures,
)

__all__ = [
    "FlowConfig",
    "FlowState",
    "StopReason",
    "RunResult",
    "StepRejected",
    "JunctionDegenerate",
    "step",
    "junction_update",
    "run",
    "step_closed_curve",
    "run_closed_curve",
]


log = logging.getLogger("spoonflow.flow")


class StepRejected(Exception):
    pass


class JunctionDegenerate(Exception):
    pass


@dataclass(frozen=True)
class FlowConfig:
    n_loop: int = 256
    n_handle: int = 64
    cfl: float = 0.2
    regrid_every: int = 200
    t_max: float = math.inf
    # resolved to 1e-3 * (initial area) when None
    area_floor: float | None = None
    min_edge_factor: float = 0.05
    monitor_every: int = 100
    handle_floor_factor: float = 1e-2
    blowup_angle_threshold: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.cfl <= 0.5):
            raise ValueError("cfl must lie in (0, 0.5]")
        if self.n_loop < 16 or self.n_handle < 16:
            raise ValueError("node counts must be >= 16")


@dataclass(frozen=True)
class FlowState:
    net: SpoonNetwork
    t: float = 0.0
    step_index: int = 0
    dt_last: float = 0.0


@dataclass(frozen=True)
class StopReason:
    """Exactly one of AreaVanishing / HandleVanishing / CurvatureBlowup / TimeLimit."""

    kind: str
    t: float
    values: dict = field(default_factory=dict)

    KINDS = ("AreaVanishing", "HandleVanishing", "CurvatureBlowup", "TimeLimit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown stop reason {self.kind!r}")

    def to_json(self):
        return {"reason": self.kind, "t": self.t, "values": self.values}


@dataclass
class RunResult:
    snapshots: list  # [(t, SpoonNetwork), ...] at monitored times
    stop: StopReason
    config: FlowConfig
    initial_area: float
    initial_handle_length: float


def interior_velocity(pts: np.ndarray) -> np.ndarray:
    """gamma_xx / |gamma_x|^2 at the interior nodes of an open point array."""
    d2 = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
    ch = pts[2:] - pts[:-2]
    den = 0.25 * np.einsum("ij,ij->i", ch, ch)
    return d2 / den[:, None]


def closed_velocity(pts: np.ndarray) -> np.ndarray:
    """Same stencil with wraparound, for a closed curve without junction."""
    nxt = np.roll(pts, -1, axis=0)
    prv = np.roll(pts, 1, axis=0)
    d2 = nxt - 2.0 * pts + prv
    ch = nxt - prv
    den = 0.25 * np.einsum("ij,ij->i", ch, ch)
    return d2 / den[:, None]


def _end_frame(p0, p1, p2, p3):
    """One-sided tangent, normal, curvature at p0 (second order)."""
    gx = 0.5 * (-3.0 * p0 + 4.0 * p1 - p2)
    gxx = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3
    gx2 = gx @ gx
    if gx2 == 0.0:
        raise JunctionDegenerate("coincident nodes adjacent to the junction")
    tau = gx / math.sqrt(gx2)
    nu = np.array([-tau[1], tau[0]])
    k = (gxx @ nu) / gx2
    return tau, nu, k


def junction_velocity(loop_pts, handle_pts):
    """Common velocity of the three curve ends at the junction.

    Returns the mean of the three representations lam * tau + k * nu,
    which coincide exactly when the tangents satisfy the 120 degree
    condition; averaging keeps the update symmetric in the three ends.
    """
    t10, n10, k10 = _end_frame(loop_pts[0], loop_pts[1], loop_pts[2], loop_pts[3])
    # loop end, measured in reversed orientation then flipped back:
    # reversal sends tau -> -tau, nu -> -nu, k -> -k
    t11r, n11r, k11r = _end_frame(loop_pts[-1], loop_pts[-2], loop_pts[-3], loop_pts[-4])
    t11, n11, k11 = -t11r, -n11r, -k11r
    t20, n20, k20 = _end_frame(handle_pts[0], handle_pts[1], handle_pts[2], handle_pts[3])

    k10, k11, k20 = project_end_curvatures(k10, k11, k20)
    lam10, lam11, lam20 = junction_speeds_from_curvatures(k10, k11, k20)
    v1 = lam10 * t10 + k10 * n10
    v2 = lam11 * t11 + k11 * n11
    v3 = lam20 * t20 + k20 * n20
    return (v1 + v2 + v3) / 3.0, (v1, v2, v3)


def junction_update(state: FlowState) -> np.ndarray:
    """Junction position after one explicit step of its common end velocity."""
    net = state.net
    v, _ = junction_velocity(net.loop.points, net.handle.points)
    return net.junction + state.dt_last * v


_THIRD = 2.0 * math.pi / 3.0


def restore_junction_angles(loop_pts, handle_pts, O):
    """Rotate the three junction-adjacent edges to the closest exact 120-degree triple.

    Edge lengths from O are preserved.  The target triple is found by
    snapping the relative edge angles to multiples of 2 pi / 3 and
    taking the circular mean of the de-offset angles, which minimizes
    the summed squared rotation.  Mutates the two point arrays.
    """
    anchors = (loop_pts[1], loop_pts[-2], handle_pts[1])
    d = [a - O for a in anchors]
    r = [math.hypot(*e) for e in d]
    if min(r) == 0.0:
        raise JunctionDegenerate("junction-adjacent node coincides with the junction")
    th = [math.atan2(e[1], e[0]) for e in d]
    offs = [0.0]
    for i in (1, 2):
        rel = (th[i] - th[0]) % (2.0 * math.pi)
        offs.append((round(rel / _THIRD) * _THIRD) % (2.0 * math.pi))
    if abs(offs[1] - offs[2]) < 1e-12 or min(offs[1:]) < _THIRD / 2:
        raise JunctionDegenerate("junction edges do not separate into three sectors")
    c = sum(math.cos(th[i] - offs[i]) for i in range(3))
    s = sum(math.sin(th[i] - offs[i]) for i in range(3))
    base = math.atan2(s, c)
    for i, (arr, idx) in enumerate(((loop_pts, 1), (loop_pts, -2), (handle_pts, 1))):
        a = base + offs[i]
        arr[idx] = O + r[i] * np.array([math.cos(a), math.sin(a)])


def _edge_lengths(pts):
    return np.linalg.norm(np.diff(pts, axis=0), axis=1)


def step(state: FlowState, cfg: FlowConfig) -> FlowState:
    """One explicit Euler step; endpoint pinned, junction angles restored."""
    net = state.net
    lp = net.loop.points.copy()
    hp = net.handle.points.copy()
    edges = np.concatenate([_edge_lengths(lp), _edge_lengths(hp)])
    dt = cfg.cfl * float(edges.min()) ** 2

    v_loop = interior_velocity(lp)
    v_handle = interior_velocity(hp)
    vO, _ = junction_velocity(lp, hp)

    lp[1:-1] += dt * v_loop
    hp[1:-1] += dt * v_handle
    O = net.junction + dt * vO
    lp[0] = O
    lp[-1] = O
    hp[0] = O
    restore_junction_angles(lp, hp, O)

    new_edges = np.concatenate([_edge_lengths(lp), _edge_lengths(hp)])
    if new_edges.min() < cfg.min_edge_factor * new_edges.mean():
        raise StepRejected(
            f"edge collapsed to {new_edges.min():.3e} "
            f"(floor {cfg.min_edge_factor:g} x mean {new_edges.mean():.3e})"
        )

    new_net = SpoonNetwork(
        loop=Polyline(lp, closed=False),
        handle=Polyline(hp, closed=False),
        domain=net.domain,
    )
    return FlowState(net=new_net, t=state.t + dt, step_index=state.step_index + 1, dt_last=dt)


def regrid(net: SpoonNetwork, cfg: FlowConfig) -> SpoonNetwork:
    """Resample both curves to uniform arclength, preserving O and P."""
    lp = resample(net.loop, cfg.n_loop + 1).points.copy()
    hp = resample(net.handle, cfg.n_handle).points.copy()
    O = lp[0].copy()
    lp[-1] = O
    hp[0] = O
    restore_junction_angles(lp, hp, O)
    return SpoonNetwork(
        loop=Polyline(lp, closed=False),
        handle=Polyline(hp, closed=False),
        domain=net.domain,
    )


def _ccw_normalized(net: SpoonNetwork) -> SpoonNetwork:
    """Reverse the loop storage if it runs clockwise.

    The junction speed relations fix an orientation class; with the
    loop counterclockwise (k > 0 when convex) the formulas apply as
    written.  Reversal relabels the parametrization without moving a
    point.
    """
    if _shoelace(net.loop.points[:-1]) >= 0.0:
        return net
    return SpoonNetwork(
        loop=Polyline(net.loop.points[::-1].copy(), closed=False),
        handle=net.handle,
        domain=net.domain,
    )


def run(initial: SpoonNetwork, cfg: FlowConfig, monitor=None) -> RunResult:
    """Evolve until a stop condition; snapshot the network at monitored times.

    ``monitor`` is an optional callback (t, net) -> None invoked at each
    monitored time, so diagnostics can stream without the run depending
    on them.
    """
    initial.require_valid()
    initial = _ccw_normalized(initial)
    state = FlowState(net=initial)
    A0 = initial.loop_area()
    L2_0 = initial.handle.length
    area_floor = cfg.area_floor if cfg.area_floor is not None else 1e-3 * A0
    handle_floor = cfg.handle_floor_factor * L2_0

    snapshots = [(0.0, initial)]
    if monitor is not None:
        monitor(0.0, initial)
    rejected_once = False
    angle_alarm = False
    stop = None

    while True:
        net = state.net
        A = net.loop_area()
        L2 = net.handle.length
        if A < area_floor:
            stop = StopReason("AreaVanishing", state.t, {"area": A, "area_floor": area_floor})
            break
        if L2 < handle_floor:
            stop = StopReason(
                "HandleVanishing", state.t, {"handle_length": L2, "handle_floor": handle_floor}
            )
            break
        if state.t >= cfg.t_max:
            stop = StopReason("TimeLimit", state.t, {"t_max": cfg.t_max})
            break
        # the kink detector sees a blow-up build over many steps; probing
        # every few steps keeps it off the per-step budget
        if state.step_index % 8 == 0:
            kink = _max_discrete_turning(net)
            if kink > cfg.blowup_angle_threshold:
                stop = StopReason(
                    "CurvatureBlowup", state.t,
                    {"max_k_times_edge": kink, "threshold": cfg.blowup_angle_threshold},
                )
                break
            dev = _junction_angle_deviation(net)
            if dev > ANGLE_TOL_RUNTIME and not angle_alarm:
                angle_alarm = True
                log.warning(
                    "junction angles drifted %.3f rad from 120 degrees at t=%.6f",
                    dev, state.t,
                )

        try:
            state = step(state, cfg)
            rejected_once = False
        except StepRejected as exc:
            if rejected_once:
                stop = StopReason("CurvatureBlowup", state.t, {"detail": str(exc)})
                break
            rejected_once = True
            state = replace(state, net=regrid(state.net, cfg))
            continue

        if state.step_index % cfg.regrid_every == 0:
            state = replace(state, net=regrid(state.net, cfg))
        if state.step_index % cfg.monitor_every == 0:
            snapshots.append((state.t, state.net))
            if monitor is not None:
                monitor(state.t, state.net)

    if not snapshots or snapshots[-1][0] != state.t:
        snapshots.append((state.t, state.net))
        if monitor is not None:
            monitor(state.t, state.net)
    return RunResult(
        snapshots=snapshots,
        stop=stop,
        config=cfg,
        initial_area=A0,
        initial_handle_length=L2_0,
    )


def _junction_angle_deviation(net: SpoonNetwork) -> float:
    """Worst deviation of the measured junction angles from 120 degrees."""
    lp, hp = net.loop.points, net.handle.points
    t10, _, _ = _end_frame(lp[0], lp[1], lp[2], lp[3])
    t11r, _, _ = _end_frame(lp[-1], lp[-2], lp[-3], lp[-4])
    t20, _, _ = _end_frame(hp[0], hp[1], hp[2], hp[3])
    dirs = (t10, t11r, t20)
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            u, v = dirs[i], dirs[j]
            ang = math.atan2(abs(u[0] * v[1] - u[1] * v[0]), u @ v)
            worst = max(worst, abs(ang - 2.0 * math.pi / 3.0))
    return worst


def _max_discrete_turning(net: SpoonNetwork) -> float:
    """max |k| * (local edge), a resolution-relative blow-up detector."""
    worst = 0.0
    for pts in (net.loop.points, net.handle.points):
        ch = pts[2:] - pts[:-2]
        d2 = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
        ch2 = np.einsum("ij,ij->i", ch, ch)
        cross = np.abs(ch[:, 0] * d2[:, 1] - ch[:, 1] * d2[:, 0])
        # |k| = 4 |ch x d2| / |ch|^3, local edge ~ |ch| / 2
        val = 2.0 * cross / ch2
        worst = max(worst, float(val.max()))
    return worst


# ---------------------------------------------------------------------------
# Pure closed-curve mode (no junction): the shrinking-circle oracle rig.
# ---------------------------------------------------------------------------

def step_closed_curve(curve: Polyline, cfl: float = 0.2) -> tuple[Polyline, float]:
    """One explicit step of a plain closed curve; returns (curve, dt)."""
    pts = curve.points
    dt = cfl * float(curve.edge_lengths().min()) ** 2
    return Polyline(pts + dt * closed_velocity(pts), closed=True), dt


def run_closed_curve(curve: Polyline, t_end: float, cfl: float = 0.2,
                     monitor_every: int = 100):
    """Evolve a closed curve to t_end, recording (t, curve) snapshots."""
    t = 0.0
    out = [(0.0, curve)]
    i = 0
    while t < t_end:
        curve, dt = step_closed_curve(curve, cfl)
        t += dt
        i += 1
        if i % monitor_every == 0:
            out.append((t, curve))
    if out[-1][0] != t:
        out.append((t, curve))
    return out
