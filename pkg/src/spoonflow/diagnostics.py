"""Instrumented quantities along a flow: lengths, area, curvature norms,
the embeddedness measure, Gaussian densities and monotonicity residuals.

Embeddedness measure.  For two network points p, q let the candidate
regions be bounded by the chord [p, q] and a simple network path from p
to q.  With A the loop area and A_i the smaller chord-arc region,

    Phi(p, q) = |p - q|^2 / psi(A_i)      both points on the loop,
                psi(A_i) = (A / pi) sin(pi A_i / A)
    Phi(p, q) = |p - q|^2 / A_pq          otherwise (smallest candidate)
    Phi(O, O) = 4 sqrt(3),  Phi(p, p) = +inf for p != O

and E = inf Phi over all pairs.  E is positive iff the network is
embedded, bounded above by 4 sqrt(3), invariant under similarity
transforms, and increases in time while 0 < E < 1/2.

Gaussian density.  With backward heat kernel
rho(x, t) = exp(-|x - x0|^2 / (4 (T - t))) / sqrt(4 pi (T - t)), the
density Theta(x0, t) = integral of rho over the network satisfies

    dTheta/dt = - int |k nu + (x - x0)^perp / (2(T-t))|^2 rho ds
                + < (P - x0) / (2(T-t)) | tau(P) > rho(P)

so Theta corrected by the accumulated endpoint term is nonincreasing.
"""

from __future__ import annotations

import math
import numpy as np
from dataclasses import dataclass

from .geometry import Polyline, arclength_weights, frame, _shoelace
from .network import SpoonNetwork, junction_state

__all__ = [
    "InvalidTime",
    "DegenerateRegion",
    "MonitorRecord",
    "PairClassification",
    "psi",
    "classify_pair",
    "phi_pair",
    "embeddedness_measure",
    "gaussian_density",
    "gaussian_density_rescaled",
    "monotonicity_residual",
    "dL_residual",
    "cond4_residual",
    "monitor_series",
    "minimizing_pair_angles",
]

PHI_JUNCTION = 4.0 * math.sqrt(3.0)
DEGENERATE_REGION_REL = 1e-14


class InvalidTime(Exception):
    pass


class DegenerateRegion(Exception):
    pass


# ---------------------------------------------------------------------------
# psi and the pair functional
# ---------------------------------------------------------------------------

def psi(A_total: float, A_i: float) -> float:
    """(A / pi) sin(pi A_i / A); the caller passes the smaller region area."""
    if A_total <= 0.0:
        raise ValueError("total area must be positive")
    return (A_total / math.pi) * math.sin(math.pi * A_i / A_total)


def _node_table(net: SpoonNetwork):
    """Global node addressing: loop nodes first (junction = 0), then handle[1:]."""
    loop_nodes = net.loop.points[:-1]
    handle_tail = net.handle.points[1:]
    return loop_nodes, handle_tail


def node_count(net: SpoonNetwork) -> int:
    l, h = _node_table(net)
    return len(l) + len(h)


def node_position(net: SpoonNetwork, i: int) -> np.ndarray:
    l, h = _node_table(net)
    return l[i] if i < len(l) else h[i - len(l)]


def _proper_crossings(path: np.ndarray, q: np.ndarray, p: np.ndarray):
    """Strictly interior intersections of the chord q->p with the path edges.

    Returns a list of (edge_index, t_path, t_chord, point).
    """
    a = path[:-1]
    b = path[1:]
    d1 = b - a
    d2 = p - q
    denom = d1[:, 0] * d2[1] - d1[:, 1] * d2[0]
    rel = q - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (rel[:, 0] * d2[1] - rel[:, 1] * d2[0]) / denom
        t2 = (rel[:, 0] * d1[:, 1] - rel[:, 1] * d1[:, 0]) / denom
    eps = 1e-12
    ok = (np.abs(denom) > 0) & (t1 > eps) & (t1 < 1 - eps) & (t2 > eps) & (t2 < 1 - eps)
    out = []
    for idx in np.nonzero(ok)[0]:
        pt = a[idx] + t1[idx] * d1[idx]
        out.append((int(idx), float(t1[idx]), float(t2[idx]), pt))
    return out


def _split_circuit_area(path: np.ndarray) -> float:
    """Area enclosed by the circuit (path + closing chord), as the sum of
    the unsigned areas of its simple components.

    The circuit self-intersects exactly where the chord crosses the
    path; the walk is split at those points and each simple sub-loop
    contributes its absolute shoelace area.
    """
    p = path[0]
    q = path[-1]
    crossings = _proper_crossings(path, q, p)
    if not crossings:
        return abs(_shoelace(path))

    # Circuit walk: path vertices with crossings inserted, then the chord
    # side q -> p with the same crossings in chord order.
    verts = []  # (point, crossing_id or None)
    by_edge = {}
    for cid, (e, t1, t2, pt) in enumerate(crossings):
        by_edge.setdefault(e, []).append((t1, cid, pt))
    for e in by_edge:
        by_edge[e].sort()
    for i in range(len(path) - 1):
        verts.append((path[i], None))
        for t1, cid, pt in by_edge.get(i, ()):
            verts.append((pt, cid))
    verts.append((path[-1], None))
    chord_side = sorted(
        ((t2, cid, pt) for cid, (e, t1, t2, pt) in enumerate(crossings)), key=lambda z: z[0]
    )
    for t2, cid, pt in chord_side:
        verts.append((pt, cid))

    total = 0.0
    walk = list(verts)
    guard = 0
    while guard <= len(crossings):
        guard += 1
        seen = {}
        popped = False
        for i, (pt, cid) in enumerate(walk):
            if cid is None:
                continue
            if cid in seen:
                j = seen[cid]
                sub = [v[0] for v in walk[j:i]]
                if len(sub) >= 3:
                    total += abs(_shoelace(np.asarray(sub)))
                walk = walk[:j] + walk[i:]
                popped = True
                break
            seen[cid] = i
        if not popped:
            break
    rest = [v[0] for v in walk]
    if len(rest) >= 3:
        total += abs(_shoelace(np.asarray(rest)))
    return total


def _candidate_area(path: np.ndarray, loop_area: float) -> float:
    """Candidate region area with the degenerate-sliver sentinel applied."""
    area = _split_circuit_area(path)
    if area < DEGENERATE_REGION_REL * loop_area:
        return math.inf  # DegenerateRegion sentinel
    return area


@dataclass(frozen=True)
class PairClassification:
    """Case split of a node pair: both points on the loop, or not.

    ``areas`` holds the candidate region areas (a degenerate sliver is
    reported as +inf by the sentinel rule); ``loop_area`` is the total
    enclosed area the psi weight refers to.
    """

    kind: str  # "BothOnLoop" | "Mixed"
    chord: float
    areas: tuple
    loop_area: float


def classify_pair(net: SpoonNetwork, p_index: int, q_index: int) -> PairClassification | None:
    """Region data behind the pair functional; None for self-pairs."""
    loop_nodes, handle_tail = _node_table(net)
    M = len(loop_nodes)
    if p_index == q_index:
        return None
    # recenter on the loop: the functional is translation invariant and
    # the shifted shoelace sums avoid the cancellation of large offsets
    center = loop_nodes.mean(axis=0)
    loop_nodes = loop_nodes - center
    handle_pts = net.handle.points - center
    A = abs(_shoelace(loop_nodes))

    if p_index < M and q_index < M:
        i, j = min(p_index, q_index), max(p_index, q_index)
        fwd = loop_nodes[i : j + 1]
        bwd = np.vstack([loop_nodes[j:], loop_nodes[: i + 1]])
        areas = (_candidate_area(fwd, A), _candidate_area(bwd, A))
        chord = float(np.linalg.norm(loop_nodes[p_index] - loop_nodes[q_index]))
        return PairClassification("BothOnLoop", chord, areas, A)

    if p_index >= M and q_index >= M:
        ha, hb = sorted((p_index - M + 1, q_index - M + 1))
        path = handle_pts[ha : hb + 1]
        chord = float(np.linalg.norm(path[0] - path[-1]))
        return PairClassification("Mixed", chord, (_candidate_area(path, A),), A)

    h_idx = (p_index if p_index >= M else q_index) - M + 1
    l_idx = q_index if p_index >= M else p_index
    down_handle = handle_pts[: h_idx + 1][::-1]  # handle node -> O
    if l_idx == 0:
        candidates = [down_handle]
    else:
        arc_fwd = loop_nodes[1 : l_idx + 1]
        arc_bwd = np.vstack([loop_nodes[l_idx:], loop_nodes[:1]])[::-1][1:]
        candidates = [np.vstack([down_handle, arc_fwd]),
                      np.vstack([down_handle, arc_bwd])]
    areas = tuple(_candidate_area(path, A) for path in candidates)
    chord = float(np.linalg.norm(handle_pts[h_idx] - loop_nodes[l_idx]))
    return PairClassification("Mixed", chord, areas, A)


def phi_pair(net: SpoonNetwork, p_index: int, q_index: int) -> float:
    """The pair functional at two network nodes (global node indices)."""
    if p_index == q_index:
        return PHI_JUNCTION if p_index == 0 else math.inf
    pc = classify_pair(net, p_index, q_index)
    A_i = min(pc.areas)
    if not math.isfinite(A_i):
        return math.inf
    chord2 = pc.chord * pc.chord
    if pc.kind == "BothOnLoop":
        # fold onto [0, A/2]; sin is symmetric about A/2, and the fold
        # guards the rare crossing-decomposed candidate exceeding A/2
        A_i = min(A_i, pc.loop_area - A_i)
        if A_i <= 0.0:
            return math.inf
        return chord2 / psi(pc.loop_area, A_i)
    return chord2 / A_i


# ---------------------------------------------------------------------------
# Vectorized scan + exact refinement
# ---------------------------------------------------------------------------

def _cross_prefix(pts_cycle: np.ndarray):
    """Prefix sums of cross(v_m, v_{m+1}) over consecutive vertices."""
    x, y = pts_cycle[:, 0], pts_cycle[:, 1]
    c = x[:-1] * y[1:] - y[:-1] * x[1:]
    return np.concatenate([[0.0], np.cumsum(c)])


def _phi_estimates(net: SpoonNetwork):
    """Fast signed-shoelace estimate of Phi for every node pair.

    Assumes chords do not cross the network; the caller re-evaluates the
    best pairs exactly.  Returns (values, pairs) flattened arrays.
    """
    loop_nodes, handle_tail = _node_table(net)
    M = len(loop_nodes)
    H = len(handle_tail)
    center = loop_nodes.mean(axis=0)  # recenter, as in phi_pair
    loop_nodes = loop_nodes - center
    hp = net.handle.points - center
    A_signed = _shoelace(loop_nodes)
    A = abs(A_signed)

    cyc = np.vstack([loop_nodes, loop_nodes[:1]])
    C = _cross_prefix(cyc)  # C[M] = 2 A_signed
    cross_ll = np.subtract.outer(C[:M], C[:M]).T  # C[j] - C[i] at (i, j)
    xj_yi = np.outer(loop_nodes[:, 0], loop_nodes[:, 1])
    chord_cross = xj_yi.T - xj_yi  # cross(L_j, L_i) at (i, j)
    S_f = 0.5 * (cross_ll + chord_cross)
    A1 = np.abs(S_f)
    A2 = np.abs(A_signed - S_f)
    Ai = np.minimum(A1, A2)
    diff = loop_nodes[:, None, :] - loop_nodes[None, :, :]
    chord2 = np.einsum("ijk,ijk->ij", diff, diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi_val = (A / math.pi) * np.sin(math.pi * np.clip(Ai, 0.0, A) / A)
        phi_ll = chord2 / psi_val
    phi_ll[~np.isfinite(phi_ll)] = math.inf
    iu = np.triu_indices(M, k=1)
    vals = [phi_ll[iu]]
    pairs = [np.stack([iu[0], iu[1]], axis=1)]

    Ch = _cross_prefix(hp)  # over handle edges
    if H > 0:
        # mixed pairs: handle a (1..H) x loop b (0..M-1)
        a_idx = np.arange(1, H + 1)
        b_idx = np.arange(M)
        cross_hb = np.outer(loop_nodes[:, 0], hp[1:, 1]).T - np.outer(
            loop_nodes[:, 1], hp[1:, 0]
        ).T  # cross(L_b, H_a) at (a-1, b)
        S1 = 0.5 * (-Ch[a_idx][:, None] + C[b_idx][None, :] + cross_hb)
        S2 = S1 - A_signed
        area = np.minimum(np.abs(S1), np.abs(S2))
        area[:, 0] = np.abs(S1[:, 0])  # paths to the junction do not wrap the loop
        dh = hp[1:, None, :] - loop_nodes[None, :, :]
        chord2_m = np.einsum("abk,abk->ab", dh, dh)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi_m = chord2_m / area
        phi_m[~np.isfinite(phi_m)] = math.inf
        vals.append(phi_m.ravel())
        ga = (M + a_idx - 1)[:, None] + np.zeros((1, M), dtype=int)
        gb = np.zeros((H, 1), dtype=int) + b_idx[None, :]
        pairs.append(np.stack([ga.ravel(), gb.ravel()], axis=1))

        # handle-handle pairs
        S_hh = 0.5 * (
            np.subtract.outer(Ch[a_idx], Ch[a_idx]).T
            + (np.outer(hp[1:, 0], hp[1:, 1]).T - np.outer(hp[1:, 1], hp[1:, 0]).T)
        )
        dhh = hp[1:, None, :] - hp[None, 1:, :]
        chord2_hh = np.einsum("abk,abk->ab", dhh, dhh)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi_hh = chord2_hh / np.abs(S_hh)
        phi_hh[~np.isfinite(phi_hh)] = math.inf
        iuh = np.triu_indices(H, k=1)
        vals.append(phi_hh[iuh])
        pairs.append(np.stack([M + iuh[0], M + iuh[1]], axis=1))

    return np.concatenate(vals), np.vstack(pairs)


def embeddedness_measure(net: SpoonNetwork, refine_top: int = 64):
    """E = min Phi over node pairs; returns (E, (i, j)) with the argmin pair.

    A vectorized scan ranks all pairs assuming chords do not cross the
    network; the ``refine_top`` best pairs are then recomputed exactly
    with crossing-aware region areas.  The junction self-pair value
    4 sqrt(3) is always a candidate.
    """
    vals, pairs = _phi_estimates(net)
    order = np.argsort(vals)[: max(1, refine_top)]
    best = PHI_JUNCTION
    best_pair = (0, 0)
    for idx in order:
        i, j = int(pairs[idx, 0]), int(pairs[idx, 1])
        v = phi_pair(net, i, j)
        if v < best:
            best = v
            best_pair = (i, j)
    return best, best_pair


def minimizing_pair_angles(net: SpoonNetwork, i: int, j: int):
    """Chord-tangent angles alpha(p), alpha(q) at a node pair (radians, in (0, pi))."""
    loop_nodes, handle_tail = _node_table(net)
    M = len(loop_nodes)
    lf = frame(net.loop)
    hf = frame(net.handle)

    def tangent(idx):
        if idx < M:
            return lf.tau[idx]  # loop frame; node M-1 is the pre-junction node
        return hf.tau[idx - M + 1]

    p = node_position(net, i)
    q = node_position(net, j)
    tp = tangent(i)
    tq = tangent(j)
    def ang(tv, w):
        c = float(np.dot(tv, w) / np.linalg.norm(w))
        return math.acos(max(-1.0, min(1.0, c)))
    return ang(tp, q - p), ang(tq, p - q)


# ---------------------------------------------------------------------------
# Gaussian density and monotonicity
# ---------------------------------------------------------------------------

def _as_curves(target) -> list[Polyline]:
    if isinstance(target, SpoonNetwork):
        return [target.loop, target.handle]
    if isinstance(target, Polyline):
        return [target]
    return list(target)


def gaussian_density(target, x0, t: float, T: float) -> float:
    """Theta(x0, t): backward heat kernel integrated over the curves."""
    if t >= T:
        raise InvalidTime(f"t = {t} must be below T = {T}")
    x0 = np.asarray(x0, dtype=float)
    four_tt = 4.0 * (T - t)
    norm = math.sqrt(math.pi * four_tt)
    total = 0.0
    for c in _as_curves(target):
        w = arclength_weights(c)
        r2 = np.sum((c.points - x0) ** 2, axis=1)
        total += float(np.sum(np.exp(-r2 / four_tt) * w)) / norm
    return total


def gaussian_density_rescaled(target, x0=(0.0, 0.0)) -> float:
    """(1 / sqrt(2 pi)) integral of exp(-|x - x0|^2 / 2) over the curves."""
    x0 = np.asarray(x0, dtype=float)
    total = 0.0
    for c in _as_curves(target):
        w = arclength_weights(c)
        r2 = np.sum((c.points - x0) ** 2, axis=1)
        total += float(np.sum(np.exp(-0.5 * r2) * w))
    return total / math.sqrt(2.0 * math.pi)


def _dissipation_and_boundary(target, x0, t, T):
    """Quadratures of the two right-hand-side terms of the density identity."""
    x0 = np.asarray(x0, dtype=float)
    two_tt = 2.0 * (T - t)
    norm = math.sqrt(2.0 * math.pi * two_tt)
    curves = _as_curves(target)
    dissipation = 0.0
    for c in curves:
        f = frame(c)
        w = arclength_weights(c)
        rel = c.points - x0
        r2 = np.einsum("ij,ij->i", rel, rel)
        rho = np.exp(-r2 / (2.0 * two_tt)) / norm
        perp = np.einsum("ij,ij->i", rel, f.nu)
        integrand = (f.k + perp / two_tt) ** 2 * rho
        dissipation += float(np.sum(integrand * w))
    boundary = 0.0
    if isinstance(target, SpoonNetwork):
        P = target.endpoint
        tauP = frame(target.handle).tau[-1]
        rel = P - x0
        rho_P = math.exp(-float(rel @ rel) / (2.0 * two_tt)) / norm
        boundary = float((rel / two_tt) @ tauP) * rho_P
    return dissipation, boundary


def monotonicity_residual(snapshots, x0, T: float):
    """Finite-difference d Theta / dt minus the identity right-hand side.

    ``snapshots`` is a window [(t, network-or-curves), ...] of at least
    three entries with increasing times below T.  Returns a dict of
    arrays over the interior times: residual, theta, dissipation and the
    standalone endpoint boundary term.
    """
    if len(snapshots) < 3:
        raise ValueError("need at least 3 snapshots")
    times = np.array([s[0] for s in snapshots], dtype=float)
    if np.any(times >= T):
        raise InvalidTime("all snapshot times must be below T")
    theta = np.array([gaussian_density(net, x0, t, T) for t, net in snapshots])
    diss = np.empty(len(snapshots))
    bnd = np.empty(len(snapshots))
    for i, (t, net) in enumerate(snapshots):
        diss[i], bnd[i] = _dissipation_and_boundary(net, x0, t, T)
    dtheta = (theta[2:] - theta[:-2]) / (times[2:] - times[:-2])
    rhs = -diss[1:-1] + bnd[1:-1]
    return {
        "t": times[1:-1],
        "residual": dtheta - rhs,
        "dtheta_dt": dtheta,
        "theta": theta,
        "theta_times": times,
        "dissipation": diss[1:-1],
        "boundary": bnd,
    }


def dL_residual(window):
    """Finite-difference dL/dt plus the curvature energy, per interior time.

    ``window`` is [(t, L, k2_total), ...]; the identity dL/dt = -int k^2
    makes the result vanish under refinement.
    """
    t = np.array([w[0] for w in window], dtype=float)
    L = np.array([w[1] for w in window], dtype=float)
    k2 = np.array([w[2] for w in window], dtype=float)
    if len(t) < 3:
        raise ValueError("need at least 3 entries")
    dL = (L[2:] - L[:-2]) / (t[2:] - t[:-2])
    return {"t": t[1:-1], "residual": dL + k2[1:-1], "k2": k2[1:-1]}


def cond4_residual(net: SpoonNetwork) -> float:
    """Spread of k_s + lam k across the three junction ends (monitored only)."""
    js = junction_state(net)
    lf = frame(net.loop)
    hf = frame(net.handle)
    v1 = (lf.k[1] - lf.k[0]) / (lf.s[1] - lf.s[0]) + js.lam1_0 * js.k1_0
    v2 = (lf.k[-1] - lf.k[-2]) / (lf.s[-1] - lf.s[-2]) + js.lam1_1 * js.k1_1
    v3 = (hf.k[1] - hf.k[0]) / (hf.s[1] - hf.s[0]) + js.lam2_0 * js.k2_0
    return float(max(abs(v1 - v2), abs(v1 - v3), abs(v2 - v3)))


# ---------------------------------------------------------------------------
# Monitor records
# ---------------------------------------------------------------------------

@dataclass
class MonitorRecord:
    t: float
    L1: float
    L2: float
    L: float
    A: float
    k2_loop: float
    k2_total: float
    turning_loop: float
    E: float
    theta_x0: float
    dL_residual: float
    cond4_residual: float

    FIELDS = (
        "t", "L1", "L2", "L", "A", "k2_loop", "k2_total",
        "turning_loop", "E", "theta_x0", "dL_residual", "cond4_residual",
    )


def monitor_series(snapshots, density_center=None, density_T=None,
                   compute_E: bool = True) -> list[MonitorRecord]:
    """Per-snapshot diagnostics rows; dL_residual filled by central differences."""
    rows = []
    for t, net in snapshots:
        lf = frame(net.loop)
        wl = arclength_weights(net.loop)
        hfw = arclength_weights(net.handle)
        hk = frame(net.handle).k
        L1 = net.loop.length
        L2 = net.handle.length
        k2_loop = float(np.sum(lf.k**2 * wl))
        k2_total = k2_loop + float(np.sum(hk**2 * hfw))
        turning = float(np.sum(lf.k * wl))
        E = math.nan
        if compute_E:
            E, _ = embeddedness_measure(net)
        theta = math.nan
        if density_center is not None and density_T is not None and t < density_T:
            theta = gaussian_density(net, density_center, t, density_T)
        rows.append(
            MonitorRecord(
                t=t, L1=L1, L2=L2, L=L1 + L2, A=net.loop_area(),
                k2_loop=k2_loop, k2_total=k2_total, turning_loop=turning,
                E=E, theta_x0=theta, dL_residual=math.nan,
                cond4_residual=cond4_residual(net),
            )
        )
    for i in range(1, len(rows) - 1):
        dL = (rows[i + 1].L - rows[i - 1].L) / (rows[i + 1].t - rows[i - 1].t)
        rows[i].dL_residual = dL + rows[i].k2_total
    return rows
