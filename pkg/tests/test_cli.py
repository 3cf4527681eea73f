import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from jsonschema import Draft202012Validator

from motionseed.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, dumps, main
from motionseed.imageio import read_image, read_mask, write_mask
from motionseed.schemas import SCHEMAS

SPEC = {
    "scene": {"shape": "ellipse", "shape_size": [13, 9], "start": [14, 14], "end": [46, 40],
              "jitter_sigma": 1.0, "rng_seed": 4},
    "attention": {"grid": {"frame_count": 16, "frame_height": 64, "frame_width": 64,
                           "patch_t": 4, "patch_h": 16, "patch_w": 16},
                  "n_inliers": 9, "rng_seed": 2, "layers": [22, 26], "step": 10},
}

COMMANDS = {
    "synth": ["synth", "--spec", "spec.json", "--out-dir", "synth"],
    "select-seed": ["select-seed", "synth/attention", "--mask", "synth/attention_mask.png"],
    "select-seed-sinkhorn": ["select-seed", "synth/attention", "--mask", "synth/attention_mask.png",
                             "--backend", "sinkhorn"],
    "composite": ["composite", "--first", "synth/frames/000.png", "--mask", "synth/masks/000.png",
                  "--dx", "5", "--dy", "-3", "--rot", "10", "--scale", "1.1", "--out", "out/comp.png"],
    "sample-placements": ["sample-placements", "--first", "synth/frames/000.png", "--mask", "synth/masks/000.png",
                          "--placement-mask", "place.png", "--grid-step", "4", "--n", "3", "--seed", "5",
                          "--out-dir", "out/place"],
    "eval-obj": ["eval-obj", "--frames-dir", "synth/frames", "--masks-dir", "synth/masks",
                 "--target-mask", "synth/masks/015.png"],
    "rank-align": ["rank-align", "--judgments", "j.csv", "--scores", "a.json", "b.json", "--k", "3"],
    "rank-align-random": ["rank-align", "--simulate-random", "2000", "--n", "10", "--k", "5", "--seed", "3"],
}
SCHEMA_FOR = {"select-seed-sinkhorn": "select-seed"}


def write_inputs(d: Path):
    d.mkdir(parents=True, exist_ok=True)
    (d / "out").mkdir(exist_ok=True)
    (d / "spec.json").write_text(json.dumps(SPEC))
    place = np.zeros((64, 64), bool)
    place[20:44, 16:48] = True
    write_mask(d / "place.png", place)
    items = [str(i) for i in range(6)]
    rows = [f"{a},{b},{min(a, b, key=int) if (int(a) + int(b)) % 3 else max(a, b, key=int)}"
            for i, a in enumerate(items) for b in items[i + 1:]]
    (d / "j.csv").write_text("item_a,item_b,winner\n" + "\n".join(rows) + "\n")
    (d / "a.json").write_text(json.dumps({str(i): 1.0 / (i + 1) for i in range(6)}))
    (d / "b.json").write_text(json.dumps({"name": "dist", "higher_is_better": False,
                                          "scores": {str(i): (i * 7) % 6 * 0.1 for i in range(6)}}))


def run(cwd, args, threads=1):
    env = dict(os.environ, S2M_THREADS=str(threads))
    return subprocess.run([sys.executable, "-m", "motionseed", *args], cwd=cwd, env=env,
                          capture_output=True, timeout=300)


def run_all(cwd, threads):
    outs = {}
    for name, args in COMMANDS.items():
        proc = run(cwd, args, threads)
        assert proc.returncode == 0, (name, proc.stderr.decode())
        outs[name] = proc.stdout
    return outs


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    result = {}
    for threads in (1, 8):
        d = tmp_path_factory.mktemp(f"threads{threads}")
        write_inputs(d)
        result[threads] = (d, run_all(d, threads))
    return result


class TestOutputs:
    @pytest.mark.parametrize("name", list(COMMANDS))
    def test_schema(self, runs, name):
        _, outs = runs[1]
        doc = json.loads(outs[name])
        Draft202012Validator(SCHEMAS[SCHEMA_FOR.get(name, name)]).validate(doc)

    @pytest.mark.parametrize("name", list(COMMANDS))
    def test_thread_count_does_not_change_json(self, runs, name):
        assert runs[1][1][name] == runs[8][1][name]

    def test_written_files_identical(self, runs):
        a, b = runs[1][0], runs[8][0]
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        for rel in files:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_repeat_run_identical(self, runs, tmp_path):
        write_inputs(tmp_path)
        assert run_all(tmp_path, 1) == runs[1][1]

    def test_select_seed_avoids_outlier(self, runs):
        d, outs = runs[1]
        outlier = json.loads(outs["synth"])["attention"]["outlier_seed"]
        for name in ("select-seed", "select-seed-sinkhorn"):
            doc = json.loads(outs[name])
            assert doc["selected"] != outlier
            assert doc["ranking"][0] == doc["selected"]
            assert doc["config"]["layer_start"] == 22 and doc["config"]["t_early"] == 10
        assert json.loads(outs["select-seed"])["ranking"][-1] == outlier

    def test_composite_files(self, runs):
        d, outs = runs[1]
        doc = json.loads(outs["composite"])
        mask = read_mask(d / doc["mask"])
        assert mask.sum() == doc["mask_pixels"]
        img = read_image(d / doc["image"])
        first = read_image(d / "synth/frames/000.png")
        np.testing.assert_array_equal(img[~mask], first[~mask])

    def test_placements_file(self, runs):
        d, outs = runs[1]
        assert (d / "out/place/placements.json").read_bytes() == outs["sample-placements"]
        doc = json.loads(outs["sample-placements"])
        assert doc["valid_count"] == 3
        for s in doc["samples"]:
            assert (d / "out/place" / s["image"]).is_file()

    def test_random_recall_near_half(self, runs):
        doc = json.loads(runs[1][1]["rank-align-random"])
        assert abs(doc["r_at_top_k"] - 50) < 3 and abs(doc["r_at_bottom_k"] - 50) < 3


class TestExitCodes:
    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["select-seed"])
        assert info.value.code == EXIT_USAGE

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == EXIT_USAGE

    def test_bad_config(self, tmp_path, capsys):
        assert main(["select-seed", str(tmp_path), "--mask", "m.png", "--t-early", "0"]) == EXIT_USAGE

    def test_missing_mask(self, tmp_path, capsys):
        code = main(["composite", "--first", str(tmp_path / "nope.png"), "--mask", "x", "--out", str(tmp_path / "o.png")])
        assert code == EXIT_DATA
        err = json.loads(capsys.readouterr().err)
        Draft202012Validator(SCHEMAS["error"]).validate(err)
        assert err["error"] == "MissingFile" and err["filename"].endswith("nope.png")

    def test_eval_obj_missing_mask(self, runs, tmp_path, capsys):
        d, _ = runs[1]
        shutil.copytree(d / "synth/masks", tmp_path / "masks")
        (tmp_path / "masks/007.png").unlink()
        code = main(["eval-obj", "--frames-dir", str(d / "synth/frames"), "--masks-dir", str(tmp_path / "masks"),
                     "--target-mask", str(d / "synth/masks/015.png")])
        assert code == EXIT_DATA
        err = json.loads(capsys.readouterr().err)
        assert err == {"error": "MissingFile", "message": "no mask for frame 007.png", "filename": "007.png"}

    def test_rank_align_needs_inputs(self, capsys):
        assert main(["rank-align"]) == EXIT_USAGE

    def test_success(self, tmp_path, capsys):
        assert main(["rank-align", "--simulate-random", "10", "--out", str(tmp_path / "r.json")]) == EXIT_OK
        Draft202012Validator(SCHEMAS["rank-align-random"]).validate(json.loads((tmp_path / "r.json").read_text()))


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.t_early, cfg.total_steps, cfg.layer_start, cfg.layer_end) == (10, 50, 22, 26)
        assert (cfg.region, cfg.backend, cfg.epsilon, cfg.coverage) == ("InverseForeground", "cosine", 0.05, 0.5)

    @pytest.mark.parametrize("kw", [dict(t_early=51), dict(layer_start=27), dict(backend="l2"),
                                    dict(epsilon=0), dict(coverage=0), dict(n_seeds=1)])
    def test_invalid(self, kw):
        with pytest.raises(UsageError):
            RunConfig(**kw)

    def test_dumps_canonical(self):
        assert dumps({"b": 0.1, "a": np.float64(1 / 3)}) == '{\n  "a": 0.3333333333333333,\n  "b": 0.1\n}\n'
        with pytest.raises(ValueError):
            dumps({"x": float("nan")})
