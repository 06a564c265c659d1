import json

import numpy as np
import pytest

from qddsim.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_presets_list(capsys):
    code, out, _ = run(capsys, "presets", "--list")
    assert code == 0
    names = [ln.split()[0] for ln in out.splitlines()]
    assert "press" in names and "snatch_ball" in names and len(names) == 20


def test_presets_show_is_loadable(capsys, tmp_path):
    code, out, _ = run(capsys, "presets", "--show", "press")
    assert code == 0
    p = tmp_path / "press.json"
    p.write_text(out)
    code, out, _ = run(capsys, "presets", "--show", "nope")
    assert code == 2


def workspace_points(out):
    lines = out.splitlines()
    assert lines[0] == "finger,x_m,y_m"
    return np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


def test_workspace_grid_two(capsys):
    code, out, _ = run(capsys, "workspace", "--grid", "2")
    assert code == 0
    assert len(out.splitlines()) == 9


def test_workspace_clouds_overlap_and_respect_radius(capsys):
    code, out, _ = run(capsys, "workspace", "--grid", "40")
    pts = workspace_points(out)
    bases = {0: (0.04, 0.0), 1: (-0.04, 0.0)}
    for i, base in bases.items():
        p = pts[pts[:, 0] == i][:, 1:]
        r = np.hypot(p[:, 0] - base[0], p[:, 1] - base[1])
        assert r.min() >= 0.01 - 1e-12 and r.max() <= 0.09 + 1e-12
    a, b = pts[pts[:, 0] == 0][:, 1:], pts[pts[:, 0] == 1][:, 1:]
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    assert d.min() < 2e-3


def test_workspace_rejects_tiny_grid(capsys):
    assert run(capsys, "workspace", "--grid", "1")[0] == 2


def write_grasp(tmp_path, contacts):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"name": "g", "contacts": contacts}))
    return str(p)


def test_closure_triangle_not_form_closed(capsys, tmp_path):
    c = [{"position": [np.cos(a), np.sin(a)], "normal": [-np.cos(a), -np.sin(a)], "mu": 0.0}
         for a in (0.0, 2.1, 4.2)]
    code, out, _ = run(capsys, "closure", "--grasp", write_grasp(tmp_path, c))
    assert code == 0
    assert "form_closure: false" in out


def test_closure_antipodal_pair(capsys, tmp_path):
    c = [{"position": [0.01, 0.0], "normal": [-1.0, 0.0], "mu": 0.3},
         {"position": [-0.01, 0.0], "normal": [1.0, 0.0], "mu": 0.3}]
    code, out, _ = run(capsys, "closure", "--grasp", write_grasp(tmp_path, c))
    assert code == 0
    assert "force_closure: true" in out
    for ci in c:
        ci["mu"] = 0.0
    code, out, _ = run(capsys, "closure", "--grasp", write_grasp(tmp_path, c))
    assert "force_closure: false" in out


@pytest.mark.parametrize("body", ['{"contacts": []}', '[1, 2]', '{"contacts": [{"position": [0]}]}',
                                  '{"contacts": [{"position": [0, 0], "normal": [0, 0]}]}', "{"])
def test_closure_malformed_input(capsys, tmp_path, body):
    p = tmp_path / "bad.json"
    p.write_text(body)
    code, _, err = run(capsys, "closure", "--grasp", str(p))
    assert code == 2 and err.startswith("error")


def test_run_preset_writes_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "run", "--preset", "motor_torque", "--out-dir", str(tmp_path))
    assert code == 0
    assert out.startswith("PASS motor_torque")
    assert (tmp_path / "motor_torque_summary.json").exists()
    assert (tmp_path / "motor_torque_trace.csv").exists()


def test_run_config_and_errors(capsys, tmp_path):
    good = tmp_path / "tiny.json"
    good.write_text('{"name": "tiny", "duration": 0.02}')
    assert run(capsys, "run", "--config", str(good), "--out-dir", str(tmp_path))[0] == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "duration": 1.0, "plant": {"bogus": 1}}')
    code, _, err = run(capsys, "run", "--config", str(bad))
    assert code == 2 and "plant.bogus" in err
    assert run(capsys, "run")[0] == 2
    assert run(capsys, "run", "--config", str(good), "--preset", "press")[0] == 2
    assert run(capsys, "run", "--preset", "nope")[0] == 2
    assert run(capsys, "run", "--config", str(tmp_path / "missing.json"))[0] == 2
