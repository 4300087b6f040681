import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cqbem.channel_mesh import write_channel_off
from cqbem.cli import main
from cqbem.config import ConfigError, RunConfig
from cqbem.mesh import enclosed_volume, load_mesh


SPHERE_CFG = """
# small sphere scenario
mesh.kind = icosphere
mesh.subdivisions = 1
bc.kind = B2
bc.eps = 0.01
time.order = 2
time.final = 4.0
time.steps = 16
wave.kind = spherical
observe.points = 2 0 0 ; 0 2 0
output.dir = {out}
"""


def test_config_defaults_recorded():
    cfg = RunConfig.from_text("bc.kind = C\n")
    assert cfg.raw["time.steps"] == "128"
    assert "time.steps" in cfg.applied_defaults
    assert "bc.kind" not in cfg.applied_defaults


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key 'bc.epsilon'"):
        RunConfig.from_text("bc.epsilon = 3\n")


def test_config_bad_values_name_the_key():
    with pytest.raises(ConfigError, match="time.order"):
        RunConfig.from_text("time.order = 3\n")
    with pytest.raises(ConfigError, match="mesh.path"):
        RunConfig.from_text("mesh.kind = file\n")
    with pytest.raises(ConfigError, match="observe.points"):
        RunConfig.from_text("observe.points = 1 2\n")


def test_config_comments_and_spacing():
    cfg = RunConfig.from_text("  bc.kind = B1   # absorbing\n\n# blank\n")
    assert cfg.raw["bc.kind"] == "B1"


def test_config_resolves_objects(tmp_path):
    cfg = RunConfig.from_text(SPHERE_CFG.format(out=tmp_path))
    mesh = cfg.mesh()
    assert mesh.num_triangles == 80
    assert cfg.scheme().N == 16
    assert cfg.transfer_spec().eps == 0.01
    assert cfg.observation_points().shape == (2, 3)


def test_cli_run_writes_artifacts(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    out = tmp_path / "out"
    cfg_path.write_text(SPHERE_CFG.format(out=out))
    assert main(["run", "--config", str(cfg_path), "--quiet"]) == 0
    assert (out / "densities.csv").exists()
    assert (out / "field_points.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "run"
    assert manifest["config"]["time.steps"] == "16"
    # defaults are all recorded explicitly
    assert "quad.regular_order" in manifest["config"]
    assert manifest["derived"]["distinct_frequencies"] == 9
    header = (out / "field_points.csv").read_text().splitlines()[0]
    assert header == "t,p0,p1"


def test_cli_run_deterministic(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(SPHERE_CFG.format(out=tmp_path / "a"))
    assert main(["run", "--config", str(cfg_path), "--quiet",
                 "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["run", "--config", str(cfg_path), "--quiet",
                 "--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    for name in ("densities.csv", "field_points.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b


def test_cli_reference(tmp_path):
    cfg_path = tmp_path / "ref.cfg"
    out = tmp_path / "ref"
    cfg_path.write_text(
        "bc.kind = B2\nbc.eps = 0.01\nreference.steps = 512\n"
        f"observe.points = 2 0 0\noutput.dir = {out}\n")
    assert main(["reference", "--config", str(cfg_path), "--quiet"]) == 0
    lines = (out / "reference.csv").read_text().splitlines()
    assert lines[0] == "t,psi_ref,u_p0"
    assert len(lines) == 514  # header + N+1 rows
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["derived"]["reference_steps"] == 512


def test_cli_reference_rejects_nonsphere(tmp_path):
    mesh_path = tmp_path / "channel.off"
    write_channel_off(mesh_path, pitch=0.25)
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text(
        f"mesh.kind = file\nmesh.path = {mesh_path}\n"
        f"output.dir = {tmp_path / 'x'}\n")
    assert main(["reference", "--config", str(cfg_path), "--quiet"]) == 2


def test_cli_convergence_time_mode(tmp_path):
    cfg_path = tmp_path / "conv.cfg"
    out = tmp_path / "conv"
    cfg_path.write_text(
        "mesh.kind = icosphere\nmesh.subdivisions = 1\n"
        "bc.kind = C\ntime.steps = 8\ntime.final = 4.0\n"
        "reference.steps = 512\nobserve.points = 2 0 0\n"
        f"output.dir = {out}\n")
    assert main(["convergence", "--config", str(cfg_path), "--mode", "time",
                 "--levels", "3", "--quiet"]) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "level,h_or_tau,error,eoc"
    assert len(lines) == 4


def test_cli_convergence_rejects_single_level(tmp_path):
    cfg_path = tmp_path / "conv.cfg"
    cfg_path.write_text(f"bc.kind = C\noutput.dir = {tmp_path / 'y'}\n")
    assert main(["convergence", "--config", str(cfg_path), "--mode", "time",
                 "--levels", "1", "--quiet"]) == 2


def test_cli_entry_point_installed():
    proc = subprocess.run([sys.executable, "-m", "cqbem.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0


def test_snapshot_run_masks_interior(tmp_path):
    mesh_path = tmp_path / "channel.off"
    write_channel_off(mesh_path, pitch=0.25)
    out = tmp_path / "snap"
    cfg_path = tmp_path / "snap.cfg"
    cfg_path.write_text(f"""
mesh.kind = file
mesh.path = {mesh_path}
bc.kind = C
time.final = 3.0
time.steps = 12
wave.kind = plane
wave.direction = 0 -1 0
wave.delay = 1.0
observe.points = 0 0 1.5
snapshot.axis = z
snapshot.offset = 0.25
snapshot.extent = -0.8 0.8 -0.8 0.8
snapshot.resolution = 9
snapshot.times = 1.5
output.dir = {out}
""")
    assert main(["run", "--config", str(cfg_path), "--quiet"]) == 0
    snap = [p for p in os.listdir(out) if p.startswith("snapshot_")]
    assert len(snap) == 1
    rows = (out / snap[0]).read_text().splitlines()[1:]
    values = np.array([[float(v) for v in r.split(",")] for r in rows])
    inside = np.isnan(values[:, 3])
    assert inside.any() and not inside.all()
    # the wall points of the z=0.25 plane are inside the obstacle
    assert not np.any(np.isnan(values[~inside][:, :3]))


def test_channel_mesh_loader_roundtrip(tmp_path):
    mesh_path = tmp_path / "c.off"
    built = write_channel_off(mesh_path, pitch=0.125)
    loaded = load_mesh(mesh_path)
    assert loaded.num_triangles == built.num_triangles
    assert enclosed_volume(loaded) == pytest.approx(0.15625, rel=1e-12)


def test_cli_convergence_space_mode(tmp_path):
    cfg_path = tmp_path / "conv.cfg"
    out = tmp_path / "conv_space"
    cfg_path.write_text(
        "mesh.kind = icosphere\nmesh.subdivisions = 0\n"
        "bc.kind = C\ntime.steps = 32\ntime.final = 4.0\n"
        "reference.steps = 1024\nobserve.points = 2 0 0\n"
        f"output.dir = {out}\n")
    assert main(["convergence", "--config", str(cfg_path), "--mode", "space",
                 "--levels", "3", "--quiet"]) == 0
    rows = (out / "convergence.csv").read_text().splitlines()[1:]
    h = [float(r.split(",")[1]) for r in rows]
    errs = [float(r.split(",")[2]) for r in rows]
    assert h[0] > h[1] > h[2]           # meshwidth shrinks per level
    assert errs[2] < errs[0]            # error falls across the ladder
