import hashlib
import io
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from facies_gtm import cli
from facies_gtm.config import load_config
from facies_gtm.glcm_texture import read_attribute_csv
from facies_gtm.latent_models import load_model, read_trace
from facies_gtm.facies_classify import read_facies_csv
from facies_gtm.rbf_interp import read_report
from facies_gtm.render import read_ppm
from facies_gtm.volume_io import SeismicVolume, VolumeHeader, load_facies_volume, save_volume

SMALL = {
    "paths": {"volume": "vol", "output_dir": "out"},
    "synth": {"shape": [24, 24, 6], "seed": 1},
    "glcm": {"window_half": 2},
    "rbf": {"max_centers": 200},
    "gtm": {"grid": [8, 8], "basis": [4, 4], "max_iterations": 15},
    "classify": {"n_init": 3},
}

# stage -> (declared inputs relative to the work dir, declared output patterns)
DECLARED = {
    "attributes": (["vol.json", "vol.f32"], ["out/attributes.csv", "out/attributes.header.json", "out/attribute_*.ppm"]),
    "interpolate": (
        ["out/attributes.csv", "out/attributes.header.json"],
        ["out/attributes_filled.csv", "out/attributes_filled.header.json", "out/rbf_report.csv"],
    ),
    "train": (["out/attributes_filled.csv", "out/attributes_filled.header.json"], ["out/gtm_model.json", "out/ll_trace.csv"]),
    "classify": (
        ["out/gtm_model.json", "out/attributes_filled.csv", "out/attributes_filled.header.json"],
        ["out/facies.csv", "out/facies.json", "out/facies.f32"],
    ),
    "render": (["out/facies.json", "out/facies.f32"], ["out/facies_time_*.ppm", "out/legend.svg"]),
}


def write_config(directory, raw=SMALL):
    path = directory / "config.json"
    path.write_text(json.dumps(raw))
    return path


def snapshot(directory):
    return {
        str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    work = tmp_path_factory.mktemp("run")
    cfg_path = write_config(work)
    assert cli.main(["synth", "--config", str(cfg_path)]) == 0
    out = io.StringIO()
    cli.cmd_pipeline(load_config(cfg_path), out=out)
    return work, out.getvalue()


def test_pipeline_artifacts_validate(full_run):
    work, log = full_run
    out = work / "out"
    raw = read_attribute_csv(out / "attributes.csv")
    filled = read_attribute_csv(out / "attributes_filled.csv")
    assert raw.n_missing > 0 and filled.n_missing == 0
    np.testing.assert_array_equal(filled.values[~raw.missing], raw.values[~raw.missing])
    assert [r.attribute for r in read_report(out / "rbf_report.csv").rows] == [
        "energy", "homogeneity", "contrast", "dissimilarity"
    ]
    model, meta = load_model(out / "gtm_model.json")
    assert model.W.shape == (17, 4) and set(meta["standardization"]) == {"mean", "std"}
    trace = read_trace(out / "ll_trace.csv")
    assert 1 <= len(trace) <= 15
    facies = read_facies_csv(out / "facies.csv", raw.header, 4)
    assert set(np.unique(facies.labels)) <= {1, 2, 3, 4}
    assert np.array_equal(load_facies_volume(out / "facies").labels, facies.labels)
    assert read_ppm(out / "facies_time_3.ppm").shape == (24, 24, 3)
    assert "ARI:" in log and all(f"[{s}] done" in log for s in cli.STAGES)


@pytest.mark.parametrize("stage", cli.STAGES)
def test_stage_isolation(full_run, tmp_path, stage):
    work, _ = full_run
    inputs, outputs = DECLARED[stage]
    for rel in inputs:
        (tmp_path / rel).parent.mkdir(parents=True, exist_ok=True)
        shutil.copy(work / rel, tmp_path / rel)
    cfg_path = write_config(tmp_path)
    before = snapshot(tmp_path)
    cli.run_stage(stage, load_config(cfg_path), out=io.StringIO())
    after = snapshot(tmp_path)
    assert {k: v for k, v in after.items() if k in before} == before
    added = set(after) - set(before)
    expected = set()
    for pattern in outputs:
        expected |= {str(p.relative_to(tmp_path)) for p in tmp_path.glob(pattern)}
    assert added == expected and expected
    # outputs of an isolated rerun equal the ones from the chained run
    for rel in added:
        assert after[rel] == hashlib.sha256((work / rel).read_bytes()).hexdigest()


def test_rerun_is_byte_identical(full_run, tmp_path):
    work, _ = full_run
    cfg_path = write_config(tmp_path)
    assert cli.main(["synth", "--config", str(cfg_path)]) == 0
    cli.cmd_pipeline(load_config(cfg_path), out=io.StringIO())
    assert snapshot(tmp_path / "out") == snapshot(work / "out")


def test_exit_codes(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert cli.main(["attributes", "--config", str(cfg_path)]) == cli.EXIT_STAGE
    assert "stage 'attributes' failed" in capsys.readouterr().err
    assert cli.main(["attributes", "--config", str(cfg_path), "--override", "glcm.bogus=1"]) == cli.EXIT_CONFIG
    assert cli.main(["synth", "--config", str(cfg_path)]) == cli.EXIT_OK


def test_invalid_key_stops_before_any_stage(tmp_path):
    raw = dict(SMALL, gtm={"grid": [8, 8], "typo": 1})
    cfg_path = write_config(tmp_path, raw)
    assert cli.main(["pipeline", "--config", str(cfg_path)]) == cli.EXIT_CONFIG
    assert not (tmp_path / "out").exists()


def test_first_failing_stage_named(tmp_path):
    cfg_path = write_config(tmp_path)
    header = VolumeHeader.from_shape((12, 12, 3))
    save_volume(SeismicVolume(header, np.full(header.shape, 4.0, np.float32)), tmp_path / "vol")
    with pytest.raises(cli.StageError) as info:
        cli.cmd_pipeline(load_config(cfg_path), out=io.StringIO())
    # a constant volume yields constant attributes, which cannot be standardized
    assert info.value.stage == "train" and "zero-variance" in str(info.value)
    table = read_attribute_csv(tmp_path / "out" / "attributes.csv")
    interior = table.values.reshape(12, 12, 3, 4)[2:-2, 2:-2]
    assert np.all(interior == [1.0, 1.0, 0.0, 0.0])
    assert not (tmp_path / "out" / "gtm_model.json").exists()


def test_single_facies_gives_uniform_map(full_run, tmp_path):
    work, _ = full_run
    shutil.copytree(work / "out", tmp_path / "out")
    cfg = load_config(write_config(tmp_path), ["classify.n_facies=1"])
    cli.run_stage("classify", cfg, out=io.StringIO())
    assert np.all(load_facies_volume(tmp_path / "out" / "facies").labels == 1)


def test_classify_geometry_mismatch(full_run, tmp_path):
    work, _ = full_run
    shutil.copytree(work / "out", tmp_path / "out")
    meta = json.loads((tmp_path / "out" / "gtm_model.json").read_text())
    meta["volume_header"]["inline_range"] = [0, 99]
    (tmp_path / "out" / "gtm_model.json").write_text(json.dumps(meta))
    with pytest.raises(cli.StageError, match="geometry mismatch"):
        cli.run_stage("classify", load_config(write_config(tmp_path)), out=io.StringIO())


def test_single_iteration_trace(full_run, tmp_path):
    work, _ = full_run
    shutil.copytree(work / "out", tmp_path / "out")
    cfg = load_config(write_config(tmp_path), ["gtm.max_iterations=1"])
    cli.run_stage("train", cfg)
    assert len(read_trace(tmp_path / "out" / "ll_trace.csv")) == 1


def test_render_out_of_range_index(full_run, tmp_path):
    work, _ = full_run
    shutil.copytree(work / "out", tmp_path / "out")
    cfg = load_config(write_config(tmp_path), ["render.index=50"])
    with pytest.raises(cli.StageError, match="outside range"):
        cli.run_stage("render", cfg)


def test_render_falls_back_to_attribute_slices(full_run, tmp_path):
    work, _ = full_run
    (tmp_path / "out").mkdir()
    for name in ("attributes_filled.csv", "attributes_filled.header.json"):
        shutil.copy(work / "out" / name, tmp_path / "out" / name)
    written = cli.run_stage("render", load_config(write_config(tmp_path)))
    assert sorted(p.name for p in written) == sorted(
        f"filled_{a}_time_3.ppm" for a in ("energy", "homogeneity", "contrast", "dissimilarity")
    )


def test_console_entry_point(tmp_path):
    cfg_path = write_config(tmp_path, {"nope": {}})
    proc = subprocess.run(
        [sys.executable, "-m", "facies_gtm.cli", "train", "--config", str(cfg_path)], capture_output=True, text=True
    )
    assert proc.returncode == cli.EXIT_CONFIG and "unknown section" in proc.stderr
