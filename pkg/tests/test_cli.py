"""Command-line interface: reports, sidecar files, exit codes, determinism."""

import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

import lipcmatch as lm
from lipcmatch.cli import main

model = lm.make_mixing_model()


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def _schema(name):
    with resources.files("lipcmatch").joinpath(f"schemas/{name}").open() as fh:
        return json.load(fh)


def _write_png(path, arr):
    lm.save_image(np.asarray(arr, dtype=np.float64), str(path))
    return str(path)


@pytest.fixture
def scene(tmp_path):
    # quantized random scene plus an exact probe cut from the loaded bytes,
    # so the probe matches the image bit for bit at the plant site
    rng = np.random.default_rng(71)
    img = rng.uniform(25.0, 230.0, size=(12, 14, 3))
    img_path = _write_png(tmp_path / "scene.png", img)
    loaded = lm.load_image(img_path)
    probe_path = _write_png(tmp_path / "probe.png", loaded[4:7, 6:9])
    return img_path, probe_path, (6, 4)


def test_distance_zero_on_equal_inputs(tmp_path, capsys):
    p = _write_png(tmp_path / "a.png",
                   np.random.default_rng(70).uniform(20, 230, (6, 5, 3)))
    code, out = _run(capsys, "distance", p, p)
    assert code == 0
    assert out.splitlines()[0] == "distance 0.000000"


def test_distance_json_report_schema(tmp_path, capsys):
    rng = np.random.default_rng(72)
    a = _write_png(tmp_path / "a.png", rng.uniform(20, 230, (4, 6, 3)))
    b = _write_png(tmp_path / "b.png", rng.uniform(20, 230, (4, 6, 3)))
    code, out = _run(capsys, "distance", a, b, "--json",
                     "--discard-fraction", "0.1")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, _schema("distance.schema.json"))
    assert report["kind"] == "distance"
    assert report["discard_fraction"] == 0.1
    assert report["distance"] > 0.0
    assert report["discarded_low"] == report["discarded_high"] > 0


def test_distance_missing_file_is_data_error(tmp_path, capsys):
    p = _write_png(tmp_path / "a.png", np.full((3, 3, 3), 90.0))
    assert _run(capsys, "distance", p, str(tmp_path / "nope.png"))[0] == 3


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["distance", "only-one-arg"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_map_sidecars_deterministic(scene, tmp_path, capsys):
    img_path, probe_path, _ = scene
    outs = []
    for name, threads in (("m1", "1"), ("m2", "1"), ("m3", "4")):
        d = tmp_path / name
        d.mkdir()
        base = str(d / "map")
        code, _ = _run(capsys, "map", img_path, "--probe", probe_path,
                       "--out", base, "--threads", threads)
        assert code == 0
        outs.append({ext: open(f"{base}.{ext}", "rb").read()
                     for ext in ("json", "f64", "pgm")})
    # reruns and thread counts never change a byte of the payload
    assert outs[0]["f64"] == outs[1]["f64"] == outs[2]["f64"]
    assert outs[0]["pgm"] == outs[1]["pgm"] == outs[2]["pgm"]
    assert outs[0]["json"] == outs[1]["json"] == outs[2]["json"]


def test_map_explicit_zero_tolerance_matches_default(scene, tmp_path, capsys):
    img_path, probe_path, _ = scene
    base_a, base_b = str(tmp_path / "pa"), str(tmp_path / "pb")
    assert _run(capsys, "map", img_path, "--probe", probe_path,
                "--out", base_a)[0] == 0
    assert _run(capsys, "map", img_path, "--probe", probe_path,
                "--out", base_b, "--discard-fraction", "0.0")[0] == 0
    assert open(base_a + ".f64", "rb").read() == open(base_b + ".f64", "rb").read()


def test_map_and_correlate_json_schema(scene, tmp_path, capsys):
    img_path, probe_path, _ = scene
    for cmd, kind in (("map", "map"), ("correlate", "correlation-map")):
        code, out = _run(capsys, cmd, img_path, "--probe", probe_path,
                         "--out", str(tmp_path / f"r_{cmd}"), "--json")
        assert code == 0
        report = json.loads(out)
        jsonschema.validate(report, _schema("map.schema.json"))
        assert report["kind"] == kind
        assert report["valid_count"] == 10 * 12


def test_map_probe_rect_variant(scene, tmp_path, capsys):
    img_path, probe_path, (px, py) = scene
    base_a, base_b = str(tmp_path / "ra"), str(tmp_path / "rb")
    assert _run(capsys, "map", img_path, "--probe", probe_path,
                "--out", base_a)[0] == 0
    assert _run(capsys, "map", img_path, "--probe-rect",
                str(px), str(py), "3", "3", "--out", base_b)[0] == 0
    assert open(base_a + ".f64", "rb").read() == open(base_b + ".f64", "rb").read()
    # a rect reaching outside the image is a data error
    assert _run(capsys, "map", img_path, "--probe-rect", "13", "0", "3", "3",
                "--out", str(tmp_path / "rc"))[0] == 3


def test_match_finds_planted_probe(scene, capsys):
    img_path, probe_path, (px, py) = scene
    code, out = _run(capsys, "match", img_path, "--probe", probe_path,
                     "--threshold", "1e-6")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, _schema("match.schema.json"))
    hits = [(pt["x"], pt["y"]) for pt in report["points"]]
    # minima are reported at the anchor, the probe's floor centre
    assert (px + 1, py + 1) in hits
    top = report["points"][0]
    assert top["rank"] == 1 and top["value"] <= 1e-9


def test_synth_report_and_determinism(tmp_path, capsys):
    out_a, out_b = str(tmp_path / "sa.png"), str(tmp_path / "sb.png")
    gt = str(tmp_path / "gt.json")
    code, out = _run(capsys, "synth", "--seed", "9", "--out", out_a,
                     "--ground-truth", gt, "--json")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, _schema("synth.schema.json"))
    assert _run(capsys, "synth", "--seed", "9", "--out", out_b)[0] == 0
    assert open(out_a, "rb").read() == open(out_b, "rb").read()
    assert json.load(open(gt))["centres"] == report["ground_truth"]


def test_synth_spec_roundtrip_and_conflict(tmp_path, capsys):
    code, out = _run(capsys, "spec-template", "--seed", "5")
    assert code == 0
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(out)
    out_a = str(tmp_path / "fa.png")
    out_b = str(tmp_path / "fb.png")
    assert _run(capsys, "synth", "--spec", str(spec_path),
                "--out", out_a)[0] == 0
    assert _run(capsys, "synth", "--seed", "5", "--out", out_b)[0] == 0
    assert open(out_a, "rb").read() == open(out_b, "rb").read()
    assert _run(capsys, "synth", "--spec", str(spec_path), "--seed", "5",
                "--out", str(tmp_path / "fc.png"))[0] == 3


def test_noise_and_drift_smoke(tmp_path, capsys):
    src = _write_png(tmp_path / "src.png", np.full((16, 16, 3), 120.0))
    noisy, drifted = str(tmp_path / "n.png"), str(tmp_path / "d.png")
    assert _run(capsys, "noise", src, noisy, "--density", "0.02",
                "--sigma2", "2.6", "--seed", "3")[0] == 0
    assert _run(capsys, "drift", src, drifted, "--alpha-top", "0.5",
                "--alpha-bottom", "3.0")[0] == 0
    base = lm.load_image(src)
    n, d = lm.load_image(noisy), lm.load_image(drifted)
    assert (n != base).any(axis=2).sum() > 0
    assert d[0].mean() > base[0].mean() > d[-1].mean()


def test_verify_quick_json_schema(capsys):
    code, out = _run(capsys, "verify", "--quick", "--json")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, _schema("verify.schema.json"))
    assert report["passed"] is True
    assert {s["name"] for s in report["suites"]} >= {"construction", "algebra",
                                                     "oracle", "invariance"}


def test_verify_perturbed_model_fails(capsys):
    code, out = _run(capsys, "verify", "--quick", "--perturb-k")
    assert code == 4
    assert "FAILED" in out


def test_console_script_installed(tmp_path):
    p = _write_png(tmp_path / "a.png", np.full((4, 4, 3), 100.0))
    r = subprocess.run([sys.executable, "-m", "lipcmatch.cli",
                        "distance", str(p), str(p)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == "distance 0.000000"
    r = subprocess.run(["lipcmatch", "distance", str(p), str(p)],
                       capture_output=True, text=True)
    assert r.returncode == 0
