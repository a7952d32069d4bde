import json
import math
import os

import numpy as np
import pytest

from spoonflow.cli import main
from spoonflow.generators import (
    GeometryInfeasible,
    circle_spoon,
    dumbbell_spoon,
    ellipse_spoon,
    generate_initial,
)
from spoonflow.network import check_angle_condition
from spoonflow import runio


def test_circle_spoon_area_contract():
    net = circle_spoon(r=1.0, handle=1.0, domain_radius=3.0)
    assert abs(net.loop_area() - math.pi) < 0.01 * math.pi
    assert net.validate() == []


def test_infeasible_handle():
    with pytest.raises(GeometryInfeasible):
        circle_spoon(r=1.0, handle=2.0, domain_radius=1.5)


def test_infeasible_loop_leaves_domain():
    with pytest.raises(GeometryInfeasible):
        circle_spoon(r=1.4, handle=0.5, domain_radius=1.6)


def test_all_generators_pass_angle_condition():
    for net in (
        circle_spoon(n_loop=64, n_handle=32),
        ellipse_spoon(n_loop=64, n_handle=32),
        dumbbell_spoon(n_loop=128, n_handle=32),
    ):
        rep = check_angle_condition(net, tol=1e-2)
        assert rep["pass"]
        assert net.validate() == []


def test_generate_initial_dispatch():
    net = generate_initial("circle_spoon", {"r": 0.8, "n_loop": 64, "n_handle": 32})
    assert net.loop_area() == pytest.approx(math.pi * 0.64, rel=0.01)
    with pytest.raises(ValueError):
        generate_initial("nonsense", {})


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

RUN_ARGS = [
    "run", "--generator", "circle_spoon", "--r", "1", "--handle", "1",
    "--domain-radius", "3", "--n-loop", "128", "--n-handle", "32",
    "--monitor-every", "50", "--t-max", "0.12",
]


@pytest.fixture(scope="module")
def cli_run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "out"
    assert main(RUN_ARGS + ["--out", str(out)]) == 0
    return out


def test_cli_run_outputs(cli_run_dir):
    assert (cli_run_dir / "monitors.csv").exists()
    assert (cli_run_dir / "snapshots.jsonl").exists()
    stop = runio.read_stop_json(cli_run_dir / "stop.json")
    assert stop.kind == "TimeLimit"
    records = runio.read_monitors_csv(cli_run_dir / "monitors.csv")
    assert len(records) > 5
    assert records[0].A == pytest.approx(math.pi, rel=0.01)


def test_cli_determinism(cli_run_dir, tmp_path):
    out2 = tmp_path / "again"
    assert main(RUN_ARGS + ["--out", str(out2)]) == 0
    assert (out2 / "monitors.csv").read_bytes() == (cli_run_dir / "monitors.csv").read_bytes()
    assert (out2 / "snapshots.jsonl").read_bytes() == (cli_run_dir / "snapshots.jsonl").read_bytes()


def test_cli_verify_passes_and_is_read_only(cli_run_dir, capsys):
    before = sorted(os.listdir(cli_run_dir))
    assert main(["verify", str(cli_run_dir)]) == 0
    after = sorted(os.listdir(cli_run_dir))
    assert before == after
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "FAIL" not in out


def test_cli_render(cli_run_dir, tmp_path):
    frames = tmp_path / "frames"
    assert main(["render", str(cli_run_dir), "--out", str(frames)]) == 0
    svgs = list(frames.glob("frame_*.svg"))
    assert len(svgs) > 5
    assert svgs[0].read_text().startswith("<svg")


def test_cli_blowup_rejects_time_limit_run(cli_run_dir, tmp_path, capsys):
    code = main(["blowup", str(cli_run_dir)])
    assert code != 0
    err = capsys.readouterr().err
    payload = json.loads(err.strip().splitlines()[-1])
    assert "error" in payload


def test_cli_full_blowup_pipeline(tmp_path, capsys):
    out = tmp_path / "full"
    args = [
        "run", "--generator", "circle_spoon", "--n-loop", "128", "--n-handle", "32",
        "--monitor-every", "100", "--out", str(out),
    ]
    assert main(args) == 0
    stop = runio.read_stop_json(out / "stop.json")
    assert stop.kind == "AreaVanishing"
    assert main(["blowup", str(out)]) == 0
    report = json.loads((out / "blowup_report.json").read_text())
    assert report["limit_class"] in ("BrakkeSpoon", "Inconclusive")
    assert len(report["density_series"]) >= 5
    assert main(["verify", str(out)]) == 0


def test_cli_shrinker(tmp_path):
    out = tmp_path / "profile"
    assert main(["shrinker", "--out", str(out)]) == 0
    obj = runio.read_profile_json(out / "spoon_profile.json")
    assert obj["residual_max"] <= 1e-6
    assert obj["density"] > 1.5
    net = obj["network"]
    assert net.validate() == []


def test_cli_usage_errors(tmp_path, capsys):
    code = main(["run", "--out", str(tmp_path / "x")])
    assert code != 0
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "usage"


def test_cli_config_file_flags_win(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"generator": "circle_spoon", "n_loop": 48,
                               "n_handle": 16, "t_max": 0.01, "monitor_every": 50}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--n-loop", "64", "--out", str(out)]) == 0
    snaps = runio.read_snapshots_jsonl(out / "snapshots.jsonl")
    assert snaps[0][1].loop.n == 65  # flag n_loop=64 beat the config's 48


def test_cli_input_network_roundtrip(tmp_path):
    net = circle_spoon(n_loop=64, n_handle=24)
    src = tmp_path / "net.json"
    src.write_text(json.dumps(net.to_json()))
    out = tmp_path / "out"
    assert main(["run", "--input", str(src), "--t-max", "0.01",
                 "--monitor-every", "50", "--out", str(out)]) == 0
    stop = runio.read_stop_json(out / "stop.json")
    assert stop.kind == "TimeLimit"


def test_cli_geometry_infeasible_error(tmp_path, capsys):
    code = main(["run", "--generator", "circle_spoon", "--handle", "5",
                 "--domain-radius", "3", "--out", str(tmp_path / "x")])
    assert code != 0
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "geometry_infeasible"


def test_cli_density_center_column(tmp_path):
    out = tmp_path / "dens"
    assert main(RUN_ARGS + ["--density-center", "1.0,0.0", "--out", str(out)]) == 0
    records = runio.read_monitors_csv(out / "monitors.csv")
    vals = [r.theta_x0 for r in records]
    assert all(math.isfinite(v) for v in vals)
    assert all(v > 0 for v in vals)


def test_cli_log_env_smoke(tmp_path, monkeypatch):
    monkeypatch.setenv("SPOONFLOW_LOG", "INFO")
    out = tmp_path / "log"
    assert main(["run", "--generator", "circle_spoon", "--n-loop", "48",
                 "--n-handle", "16", "--t-max", "0.005", "--monitor-every", "50",
                 "--out", str(out)]) == 0


def test_network_loader_reports_failures(tmp_path):
    from spoonflow.network import InvalidNetwork, SpoonNetwork

    net = circle_spoon(n_loop=64, n_handle=24)
    obj = net.to_json()
    obj["handle"][-1] = [2.5, 0.0]  # endpoint pulled off the boundary
    with pytest.raises(InvalidNetwork) as exc:
        SpoonNetwork.from_json(obj)
    assert any("endpoint" in f for f in exc.value.failures)


def test_polyline_json_roundtrip():
    from spoonflow.geometry import Polyline
    import numpy as np

    pl = Polyline(np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 0.0]]), closed=False)
    back = Polyline.from_json(pl.to_json())
    assert back.closed == pl.closed
    assert np.array_equal(back.points, pl.points)
