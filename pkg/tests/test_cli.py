import subprocess
import sys

import numpy as np
import pytest

from panostitch.cli import EXIT_IO, EXIT_NOTHING, EXIT_OK, EXIT_USAGE, UsageError, main, parse_args
from panostitch.image import Image, load_image, save_image
from synth import crops, textured_rgb

STAGES = ["resize", "features", "match", "subset", "warp", "seam", "gain", "blend"]


@pytest.fixture(scope="module")
def small_inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    src = textured_rgb(600, 450, seed=3)
    paths = []
    for k, im in enumerate(crops(src, (0, 125, 250), 350)):
        p = d / f"c{k}.ppm"
        save_image(im, p)
        paths.append(str(p))
    other = d / "other.ppm"
    save_image(Image(textured_rgb(350, 450, seed=5)), other)
    return d, paths, str(other)


# ------------------------------------------------------------- parse_args

def test_parse_defaults():
    c = parse_args(["a.ppm", "b.ppm", "-o", "out.ppm"])
    assert c.inputs == ["a.ppm", "b.ppm"] and c.output == "out.ppm"
    assert (c.final_megapix, c.medium_megapix, c.low_megapix) == (-1.0, 0.6, 0.1)
    assert (c.conf_thresh, c.ransac_thresh, c.ransac_iters, c.seed) == (1.0, 3.0, 2000, 0)
    assert (c.max_features, c.feather_radius, c.draw, c.dot_out) == (500, 15, "none", None)


def test_parse_one_input():
    with pytest.raises(UsageError, match="need at least 2 input images"):
        parse_args(["a.ppm"])


def test_parse_conf_thresh():
    assert parse_args(["a.ppm", "b.ppm", "-o", "out.ppm", "--conf-thresh", "0.5"]).conf_thresh == 0.5


def test_parse_all_flags():
    c = parse_args(["x", "y", "z", "--output", "o.pgm", "--final-megapix", "2", "--medium-megapix",
                    "0.5", "--low-megapix", "0.05", "--ransac-thresh", "2.5", "--ransac-iters",
                    "100", "--seed", "7", "--max-features", "300", "--feather-radius", "9",
                    "--draw", "weights", "--dot-out", "g.dot", "--jobs", "1", "--verbose"])
    assert c.inputs == ["x", "y", "z"] and c.final_megapix == 2 and c.seed == 7
    assert c.draw == "weights" and c.dot_out == "g.dot" and c.jobs == 1 and c.verbose


@pytest.mark.parametrize("argv, token", [
    (["a", "b", "-o", "o", "--bogus"], "--bogus"),
    (["a", "b", "-o", "o", "--seed"], "--seed"),
    (["a", "b", "-o", "o", "--seed", "x"], "x"),
    (["a", "b", "-o", "o", "--draw", "dots"], "dots"),
])
def test_parse_names_offending_token(argv, token):
    with pytest.raises(UsageError, match=token):
        parse_args(argv)


def test_parse_missing_output():
    with pytest.raises(UsageError, match="-o"):
        parse_args(["a", "b"])


@pytest.mark.parametrize("extra", [["--medium-megapix", "0.05"], ["--conf-thresh", "-1"],
                                   ["--ransac-thresh", "0"]])
def test_parse_config_invariants(extra):
    with pytest.raises(UsageError):
        parse_args(["a", "b", "-o", "o"] + extra)


def test_main_usage_exit(capsys):
    assert main(["a.ppm"]) == EXIT_USAGE
    assert "need at least 2 input images" in capsys.readouterr().err


# ------------------------------------------------------------------- runs

def test_run_success_writes_output(small_inputs):
    d, paths, _ = small_inputs
    out = d / "pano.ppm"
    assert main(paths + ["-o", str(out), "--jobs", "1"]) == EXIT_OK
    pano = load_image(out)
    assert 590 <= pano.width <= 610 and 440 <= pano.height <= 460


def test_run_unrelated_exit3_still_writes_dot(small_inputs):
    d, paths, other = small_inputs
    out, dot = d / "none.ppm", d / "none.dot"
    code = main([paths[0], other, "-o", str(out), "--dot-out", str(dot)])
    assert code == EXIT_NOTHING
    assert not out.exists()
    text = dot.read_text()
    assert text.startswith("graph matches {\n") and "--" not in text


def test_run_missing_input(small_inputs):
    d, paths, _ = small_inputs
    assert main([paths[0], str(d / "missing.ppm"), "-o", str(d / "x.ppm")]) == EXIT_IO


def test_run_malformed_input(small_inputs):
    d, paths, _ = small_inputs
    bad = d / "bad.ppm"
    bad.write_bytes(b"P6\n10 10\n255\n" + b"\0" * 20)
    assert main([paths[0], str(bad), "-o", str(d / "x.ppm")]) == EXIT_IO


def test_run_unwritable_output(small_inputs):
    d, paths, _ = small_inputs
    assert main(paths[:2] + ["-o", str(d / "no" / "such" / "dir.ppm")]) == EXIT_IO


def test_stage_log_order(small_inputs):
    d, paths, _ = small_inputs
    proc = subprocess.run([sys.executable, "-m", "panostitch.cli", *paths[:2],
                           "-o", str(d / "log.ppm"), "--draw", "lines"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == ""
    stages = [line.split()[2] for line in proc.stderr.splitlines() if line.startswith("panostitch: stage")]
    assert stages == STAGES
