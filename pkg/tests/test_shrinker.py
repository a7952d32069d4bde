import math

import numpy as np
import pytest

from spoonflow.diagnostics import gaussian_density_rescaled
from spoonflow.geometry import arclength_weights, frame, segments_intersect_scan
from spoonflow.shrinker import (
    NoBracket,
    StepTooLarge,
    flat_half_line,
    flat_line,
    flat_triod,
    integrate_shrinker_arc,
    shoot_brakke_spoon,
    shrinker_residual,
    spoon_gaussian_density,
)
from conftest import circle_polyline

# regression locks, produced by the independent fine-step (ds = 1e-5)
# secant run of the shooting problem
JUNCTION_DISTANCE = 0.805403164935
SPOON_DENSITY = 1.699424136

TURN = 5.0 * math.pi / 3.0


def test_integrate_arc_unit_circle():
    out = integrate_shrinker_arc(
        k0=1.0, start=(1.0, 0.0), theta0=math.pi / 2, ds=1e-3, s_max=2 * math.pi
    )
    assert out["k0_consistent"]
    assert np.linalg.norm(out["points"][-1] - out["points"][0]) < 1e-6
    assert np.max(np.abs(out["k"] - 1.0)) < 1e-9
    assert np.max(np.abs(out["closure_residual"])) < 1e-12


def test_integrate_arc_straight_ray():
    out = integrate_shrinker_arc(k0=0.0, start=(0.5, 0.0), theta0=0.0, ds=1e-3, s_max=2.0)
    assert np.max(np.abs(out["points"][:, 1])) < 1e-15
    assert np.max(np.abs(out["k"])) < 1e-15


def test_integrate_arc_step_too_large():
    with pytest.raises(StepTooLarge):
        integrate_shrinker_arc(k0=1.0, start=(1.0, 0.0), theta0=math.pi / 2, ds=0.5, s_max=2.0)


def test_shoot_converges(spoon_profile):
    p = spoon_profile
    assert p.closure_residual < 1e-10
    assert p.residual_max <= 1e-6
    assert abs(p.junction_distance - JUNCTION_DISTANCE) < 1e-6
    assert p.junction[0] == pytest.approx(-p.junction_distance)
    assert p.shoot_param == pytest.approx(p.junction_distance * math.sin(math.pi / 3), rel=1e-12)


def test_shot_loop_turning(spoon_profile):
    fr = frame(spoon_profile.loop)
    w = arclength_weights(spoon_profile.loop)
    assert abs(float(np.sum(fr.k * w)) - TURN) < 1e-4
    assert abs(spoon_profile.loop_turning() - TURN) < 1e-12


def test_shot_loop_embedded_and_convex(spoon_profile):
    loop = spoon_profile.loop
    from spoonflow.geometry import curve_edges, resample

    assert segments_intersect_scan(curve_edges([resample(loop, 512)])) == []
    fr = frame(loop)
    assert np.all(fr.k > 0)  # one-signed: stored counterclockwise


def test_shot_junction_angles(spoon_profile):
    assert spoon_profile.junction_angle_deviation() < 1e-6


def test_halfline_supporting_line_through_origin(spoon_profile):
    # the half-line lies on y = 0, whose distance to the origin is zero
    half = spoon_profile.halfline(length=5.0)
    assert np.max(np.abs(half.points[:, 1])) < 1e-9


def test_shrinker_residual_circles():
    unit = circle_polyline(1.0, 1024)
    assert shrinker_residual(unit)["max"] < 1e-4
    two = circle_polyline(2.0, 1024)
    fr = frame(two)
    # k = 1/2 and <x, nu> = -2 pointwise: residual 1.5 everywhere
    res = fr.k + np.einsum("ij,ij->i", two.points, fr.nu)
    assert np.allclose(np.abs(res), 1.5, atol=1e-4)
    assert shrinker_residual(two)["max"] == pytest.approx(1.5, abs=1e-4)


def test_uniqueness_probe_random_brackets(spoon_profile):
    rng = np.random.default_rng(11)
    d_ref = spoon_profile.junction_distance
    for _ in range(20):
        lo = rng.uniform(0.3, d_ref - 0.05)
        hi = rng.uniform(d_ref + 0.05, 2.0)
        p = shoot_brakke_spoon(scan=(lo, hi, 7), refine_factor=1)
        assert abs(p.junction_distance - d_ref) < 1e-8


def test_no_bracket_reported():
    with pytest.raises(NoBracket):
        shoot_brakke_spoon(scan=(1.5, 2.5, 6))


def test_flat_densities_by_quadrature():
    # quadrature over the truncated catalog curves against the exact values
    for maker, expect in ((flat_line, 1.0), (flat_half_line, 0.5), (flat_triod, 1.5)):
        fs = maker(direction=0.7)
        val = gaussian_density_rescaled(fs.curves(length=20.0, spacing=0.04))
        assert val == pytest.approx(expect, abs=1e-6)
        assert fs.density() == expect


def test_spoon_density(spoon_profile):
    val = spoon_gaussian_density(spoon_profile)
    assert val > 1.5
    assert val == pytest.approx(SPOON_DENSITY, abs=1e-5)


def test_density_ordering(spoon_profile):
    assert 0.5 < 1.0 < 1.5 < spoon_gaussian_density(spoon_profile)


def test_self_similarity_under_flow(spoon_profile):
    from spoonflow.flow import FlowConfig, run
    from spoonflow.geometry import polyline_distance, resample

    T = 0.5  # the profile at unit scale is sqrt(2 T) times itself
    net0 = spoon_profile.to_network(halfline_length=3.0, n_loop=384, n_handle=96)
    delta = 0.004
    res = run(net0, FlowConfig(n_loop=384, n_handle=96, t_max=delta,
                               monitor_every=10**9, regrid_every=10**9))
    t1, net1 = res.snapshots[-1]
    back = net1.transformed(scale=1.0 / math.sqrt(1.0 - t1 / T))
    d = polyline_distance(resample(back.loop, 256), resample(net0.loop, 256))
    diam = 2.0 * float(np.abs(spoon_profile.loop.points).max()) + 3.0
    assert d < 5e-3 * diam
