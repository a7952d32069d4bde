"""Shared fixtures. The expensive runs are session-scoped and reused by
both the unit tests and the acceptance suite."""

import math

import numpy as np
import pytest

from spoonflow.blowup import estimate_singularity, rescale_trajectory
from spoonflow.flow import FlowConfig, run, run_closed_curve
from spoonflow.generators import circle_spoon
from spoonflow.geometry import Polyline
from spoonflow.shrinker import shoot_brakke_spoon


def circle_polyline(r=1.0, n=256, center=(0.0, 0.0)) -> Polyline:
    th = 2.0 * np.pi * np.arange(n) / n
    c = np.asarray(center, dtype=float)
    return Polyline(c + r * np.column_stack([np.cos(th), np.sin(th)]), closed=True)


@pytest.fixture(scope="session")
def spoon_profile():
    return shoot_brakke_spoon()


@pytest.fixture(scope="session")
def run1():
    """The benchmark run: circle_spoon(r=1, handle=1, R=3) at 256/64 nodes."""
    net = circle_spoon(r=1.0, handle=1.0, domain_radius=3.0, n_loop=256, n_handle=64)
    cfg = FlowConfig(n_loop=256, n_handle=64, monitor_every=200, regrid_every=200)
    return run(net, cfg)


@pytest.fixture(scope="session")
def run1_estimate(run1):
    return estimate_singularity(run1)


@pytest.fixture(scope="session")
def run1_rescaled(run1, run1_estimate):
    """Rescaled sequence on a uniform frak_t grid ending near the last snapshot."""
    x0, T_est = run1_estimate
    t_last = run1.snapshots[-1][0]
    ft_last = -0.5 * math.log(T_est - t_last)
    grid = np.arange(ft_last - 2.45, ft_last - 0.05, 0.1)
    return rescale_trajectory(run1.snapshots, x0, T_est, grid)


@pytest.fixture(scope="session")
def run1_report(run1_rescaled, spoon_profile):
    from spoonflow.blowup import classify_limit

    return classify_limit(run1_rescaled, spoon_profile)


@pytest.fixture(scope="session")
def refinement_runs():
    """Matched partial runs at 256 and 512 loop nodes.

    The monitor spacing halves with h (so the residuals' time-difference
    part refines along with the spatial part) and the regrid cadence is
    fixed in *time* (dt ~ h^2), keeping the resampling length loss a
    refining perturbation.
    """
    out = {}
    net = circle_spoon(n_loop=256, n_handle=64)
    out[256] = run(net, FlowConfig(n_loop=256, n_handle=64, t_max=0.3,
                                   monitor_every=100, regrid_every=400))
    net = circle_spoon(n_loop=512, n_handle=128)
    out[512] = run(net, FlowConfig(n_loop=512, n_handle=128, t_max=0.3,
                                   monitor_every=200, regrid_every=1600))
    return out


@pytest.fixture(scope="session")
def closed_circle_run():
    """Pure closed-curve mode: unit circle, 256 nodes, evolved to t = 0.45."""
    return run_closed_curve(circle_polyline(1.0, 256), t_end=0.45, monitor_every=100)
