"""Run directory file formats: monitors.csv, snapshots.jsonl, stop.json,
spoon_profile.json, blowup_report.json.

Floats are written with repr, which round-trips IEEE doubles exactly,
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

from .diagnostics import MonitorRecord
from .flow import StopReason
from .network import SpoonNetwork


def _fmt(v: float) -> str:
    return repr(float(v))


def write_monitors_csv(path, records: list[MonitorRecord]):
    path = Path(path)
    lines = [",".join(MonitorRecord.FIELDS)]
    for r in records:
        lines.append(",".join(_fmt(getattr(r, f)) for f in MonitorRecord.FIELDS))
    path.write_text("\n".join(lines) + "\n")


def read_monitors_csv(path) -> list[MonitorRecord]:
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split(",")
    if tuple(header) != MonitorRecord.FIELDS:
        raise ValueError(f"unexpected monitors.csv header: {header}")
    out = []
    for line in text[1:]:
        vals = [float(v) for v in line.split(",")]
        out.append(MonitorRecord(**dict(zip(MonitorRecord.FIELDS, vals))))
    return out


def write_snapshots_jsonl(path, snapshots):
    with Path(path).open("w") as fh:
        for t, net in snapshots:
            obj = {"t": t}
            obj.update(net.to_json())
            fh.write(json.dumps(obj) + "\n")


def read_snapshots_jsonl(path):
    out = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            t = float(obj.pop("t"))
            out.append((t, SpoonNetwork.from_json(obj, validate=False)))
    return out


def write_stop_json(path, stop: StopReason):
    Path(path).write_text(json.dumps(stop.to_json(), indent=2) + "\n")


def read_stop_json(path) -> StopReason:
    obj = json.loads(Path(path).read_text())
    return StopReason(kind=obj["reason"], t=float(obj["t"]), values=obj.get("values", {}))


def write_profile_json(path, profile, density: float, network: SpoonNetwork):
    obj = {
        "junction_distance": profile.junction_distance,
        "shoot_param": profile.shoot_param,
        "residual_max": profile.residual_max,
        "closure_residual": profile.closure_residual,
        "loop_length": profile.loop_length,
        "loop_turning": profile.loop_turning(),
        "density": density,
        "halfline_dir": profile.halfline_dir.tolist(),
        "network": network.to_json(),
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_profile_json(path) -> dict:
    obj = json.loads(Path(path).read_text())
    obj["network"] = SpoonNetwork.from_json(obj["network"], validate=False)
    return obj


def write_blowup_report(path, report):
    # round-trip through the permissive encoder to map inf/nan to null
    obj = json.loads(json.dumps(report.to_json()), parse_constant=lambda c: None)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")
