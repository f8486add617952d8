import json
from pathlib import Path

import numpy as np
import pytest

from sddr import io as sio
from sddr.cli import main
from sddr.radar import RadarConfig

DATA = Path(__file__).parent / "data"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def demo(tmp_path):
    assert run("demo", "--out", tmp_path / "demo") == 0
    d = tmp_path / "demo"
    return d / "demo_scene.json", d / "demo_config.json"


@pytest.fixture
def pipeline(tmp_path, demo):
    scene, config = demo
    sim = tmp_path / "sim"
    assert run("simulate", scene, config, "--seed", 3, "--out", sim) == 0
    assert run("encode", sim / "adc.tensor", "--cube", tmp_path / "cube.tensor",
               "--out", tmp_path / "sddr.tensor") == 0
    return tmp_path, sim


def test_simulate_outputs(pipeline):
    _, sim = pipeline
    man = json.loads((sim / "manifest.json").read_text())
    assert man["n_real"] == 3 and man["n_ghosts"] == 0
    assert {"adc.tensor", "truth.csv", "truth_sddr.tensor"} <= set(man["files"])
    assert len(sio.read_cloud(sim / "truth.csv")) == 3


def test_simulate_empty_scene(tmp_path, demo):
    _, config = demo
    (tmp_path / "empty.json").write_text('{"scatterers": [], "ego_velocity": [0, 0, 0]}')
    assert run("simulate", tmp_path / "empty.json", config, "--noise-floor", 0, "--out", tmp_path / "o") == 0
    adc, _ = sio.load_adc(tmp_path / "o" / "adc.tensor")
    assert not adc.any()
    assert len((tmp_path / "o" / "truth.csv").read_text().splitlines()) == 1  # header only
    assert run("encode", tmp_path / "o" / "adc.tensor", "--out", tmp_path / "s.tensor") == 0
    assert not sio.load_sddr(tmp_path / "s.tensor").u.any()


def test_simulate_ghost_count(tmp_path, demo):
    scene, config = demo
    doc = json.loads(scene.read_text())
    cfg = RadarConfig.from_dict(json.loads(config.read_text()))
    doc["scatterers"].append({"position": cfg.cell_center(14, 6, 3).tolist(), "reflectivity": 0.8})
    (tmp_path / "four.json").write_text(json.dumps(doc))
    assert run("simulate", tmp_path / "four.json", config, "--ghost-fraction", 0.5, "--out", tmp_path / "g") == 0
    assert json.loads((tmp_path / "g" / "manifest.json").read_text())["n_ghosts"] == 4


def test_encode_peak_matches_truth(pipeline):
    tmp, sim = pipeline
    sd = sio.load_sddr(tmp / "sddr.tensor")
    cells = json.loads((sim / "manifest.json").read_text())["truth_cells"]
    peak = np.unravel_index(np.argmax(sd.u), sd.u.shape)
    assert list(map(int, peak)) in cells
    for k, i, j in cells:
        assert sd.u[k, i, j] >= 0.4


def test_encode_checksum_error(tmp_path, pipeline):
    _, sim = pipeline
    blob = bytearray((sim / "adc.tensor").read_bytes())
    blob[100] ^= 1
    (tmp_path / "bad.tensor").write_bytes(bytes(blob))
    assert run("encode", tmp_path / "bad.tensor", "--out", tmp_path / "x.tensor") == 1
    assert not (tmp_path / "x.tensor").exists()


def test_eve_demo_accuracy(pipeline):
    tmp, sim = pipeline
    truth = np.array(json.loads((sim / "manifest.json").read_text())["scene"]["ego_velocity"])
    for method in ("wls", "ransac"):
        assert run("eve", tmp / "sddr.tensor", "--method", method, "--out", tmp / f"{method}.json") == 0
        v = np.array(json.loads((tmp / f"{method}.json").read_text())["velocity"])
        assert np.linalg.norm(v - truth) <= 0.05


def test_eve_ransac_with_ghosts_reports_inliers(tmp_path, demo):
    scene, config = demo
    assert run("simulate", scene, config, "--ghost-fraction", 0.3, "--out", tmp_path / "g") == 0
    assert run("encode", tmp_path / "g" / "adc.tensor", "--out", tmp_path / "s.tensor") == 0
    assert run("eve", tmp_path / "s.tensor", "--out", tmp_path / "v.json") == 0
    rep = json.loads((tmp_path / "v.json").read_text())
    assert "inliers" in rep and 0 < rep["inlier_rate"] <= 1


def test_eve_coplanar_exits_nonzero(tmp_path, capsys):
    (tmp_path / "obs.csv").write_text("a,e,v_r\n0.1,0,1\n0.2,0,1\n-0.3,0,1\n0.5,0,1\n")
    assert run("eve", tmp_path / "obs.csv", "--method", "wls", "--out", tmp_path / "v.json") == 1
    assert "unobservable" in capsys.readouterr().err


def test_diffuse_oracle_and_determinism(pipeline):
    tmp, sim = pipeline
    args = ("diffuse", tmp / "sddr.tensor", "--denoiser", "oracle", "--truth", sim / "truth_sddr.tensor",
            "--seed", 5)
    assert run(*args, "--out", tmp / "a.tensor") == 0
    assert run(*args, "--out", tmp / "b.tensor") == 0
    assert (tmp / "a.tensor").read_bytes() == (tmp / "b.tensor").read_bytes()
    occ, _ = sio.load_volume(tmp / "a.tensor", "occupancy")
    truth = sio.load_sddr(sim / "truth_sddr.tensor").u
    from sddr.schedule import build_schedule
    assert np.max(np.abs(occ - truth)) <= 5 * np.sqrt(build_schedule().sigma_sq.max()) + 1e-6
    assert run(*args, "--lam", 0, "--out", tmp / "z.tensor") == 0
    assert np.array_equal(sio.load_volume(tmp / "z.tensor")[0], truth)


def test_diffuse_oracle_needs_truth(pipeline, capsys):
    tmp, _ = pipeline
    assert run("diffuse", tmp / "sddr.tensor", "--denoiser", "oracle", "--out", tmp / "o.tensor") == 1
    assert "--truth" in capsys.readouterr().err


def test_eval_golden(tmp_path):
    assert run("eval", DATA / "pred.csv", DATA / "truth.csv", "--out", tmp_path / "m.json") == 0
    got = json.loads((tmp_path / "m.json").read_text())
    want = json.loads((DATA / "golden_metrics.json").read_text())
    assert set(got) == set(want)
    for k, v in want.items():
        if isinstance(v, float):
            assert got[k] == pytest.approx(v, abs=1e-12), k
        else:
            assert got[k] == v, k


def test_eval_identical_and_empty(tmp_path, capsys):
    assert run("eval", DATA / "truth.csv", DATA / "truth.csv", "--out", tmp_path / "m.json") == 0
    m = json.loads((tmp_path / "m.json").read_text())
    assert (m["CD"], m["EMD"], m["VPR"], m["SRL"], m["EGD"]) == (0.0, 0.0, 1.0, 1.0, 1.0)
    (tmp_path / "e.csv").write_text("x,y,z\n")
    assert run("eval", tmp_path / "e.csv", DATA / "truth.csv", "--out", tmp_path / "n.json") == 1
    assert "empty" in capsys.readouterr().err


def test_render_views(tmp_path, pipeline, demo):
    tmp, _ = pipeline
    _, config = demo
    assert run("surface", "--velocity", 1, 0, 0, "--config", config, "--out", tmp / "surf.tensor") == 0
    assert run("render", tmp / "surf.tensor", "--view", "doppler-surface", "--scale", 1,
               "--out", tmp / "s.ppm") == 0
    from sddr.render import read_ppm
    px = read_ppm((tmp / "s.ppm").read_bytes())[..., 0]
    cfg = RadarConfig.from_dict(json.loads(config.read_text()))
    row, col = np.unravel_index(np.argmax(px), px.shape)
    assert col == cfg.azimuth_bins // 2
    assert cfg.elevation_bins - 1 - row == cfg.elevation_bins // 2
    assert run("render", tmp / "sddr.tensor", "--out", tmp / "b1.ppm") == 0
    assert run("render", tmp / "sddr.tensor", "--out", tmp / "b2.ppm") == 0
    assert (tmp / "b1.ppm").read_bytes() == (tmp / "b2.ppm").read_bytes()


def test_render_zero_field_black(tmp_path):
    cfg = RadarConfig()
    sio.save_volume(tmp_path / "z.tensor", np.zeros(cfg.shape), cfg, "occupancy")
    assert run("render", tmp_path / "z.tensor", "--scale", 1, "--out", tmp_path / "z.ppm") == 0
    blob = (tmp_path / "z.ppm").read_bytes()
    header = f"P6\n{cfg.azimuth_bins} {cfg.range_bins}\n255\n".encode()
    assert blob.startswith(header) and set(blob[len(header):]) == {0}


def test_bad_json_reports_line(tmp_path, demo, capsys):
    _, config = demo
    (tmp_path / "bad.json").write_text('{\n  "scatterers": [,]\n}')
    assert run("simulate", tmp_path / "bad.json", config, "--out", tmp_path / "o") == 1
    assert "line 2" in capsys.readouterr().err


def test_schedule_command(tmp_path):
    assert run("schedule", "--T", 5, "--out", tmp_path / "s.json") == 0
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["T"] == 5 and len(doc["alpha_bar"]) == 5
    assert run("diffuse", tmp_path / "nope.tensor", "--schedule", tmp_path / "s.json",
               "--out", tmp_path / "o.tensor") == 1


def test_help_lists_every_command(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("simulate", "encode", "diffuse", "eve", "eval", "surface", "render", "schedule", "demo"):
        assert cmd in out
