import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from skimage.metrics import structural_similarity

from onlinepd.harness.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, HEADER, OUTDIR_ENV, main
from onlinepd.harness.config import DEFAULT_DUMPS, ConfigError, ExperimentConfig, load_config, parse_config, snapshot
from onlinepd.harness.imageio import ImageFormatError, decode_pgm, encode_pgm, load_image, save_image
from onlinepd.harness.metrics import psnr, ssim

SMALL = ["--N", "12", "--crop-h", "24", "--crop-w", "24", "--source-size", "48", "--timing", "false"]


# --- config -------------------------------------------------------------------------


def test_config_defaults_valid():
    cfg = ExperimentConfig().validate()
    assert cfg.dumps == DEFAULT_DUMPS
    assert cfg.flow_theta == 64 * 64 * 100.0**3


def test_config_snapshot_round_trip():
    cfg = replace(ExperimentConfig(), mode="popd-unknown", tau=0.02, theta=3.5, dumps=(1, 7), timing=False, T=0.5)
    assert parse_config(snapshot(cfg)) == cfg
    assert parse_config(snapshot(ExperimentConfig())) == ExperimentConfig()


def test_config_snapshot_records_ssim_parameters():
    assert "gaussian window 11, std 1.5" in snapshot(ExperimentConfig())


def test_config_partial_file_overrides_defaults(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[steps]\ntau = 0.05\n\n[output]\ndumps = 3, 4\n")
    cfg = load_config(p)
    assert cfg.tau == 0.05 and cfg.dumps == (3, 4) and cfg.alpha == 1.0


@pytest.mark.parametrize(
    "text",
    [
        "[steps]\ntau = -1\n",
        "[steps]\ntau = abc\n",
        "[nope]\nx = 1\n",
        "[steps]\nalpha = 1\n",
        "[experiment]\nmode = fast\n",
        "[steps]\nkappa = 1.0\n",
        "[output]\ndumps = 0\n",
        "[experiment]\ntiming = maybe\n",
        "no section\n",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# --- image files ---------------------------------------------------------------------


def test_pgm_header_bit_exact():
    data = encode_pgm(np.zeros((3, 5)))
    assert data[:11] == b"P5\n5 3\n255\n" and len(data) == 11 + 15


def test_pgm_quantisation_and_clamp():
    img = np.array([[-0.5, 0.0, 0.5, 1.0, 7.0, 0.1 / 255]])
    body = encode_pgm(img)[len(b"P5\n6 1\n255\n") :]
    assert list(body) == [0, 0, 128, 255, 255, 0]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.floats(-2, 3)))
def test_pgm_save_load_idempotent(img):
    once = decode_pgm(encode_pgm(img))
    assert np.all((once >= 0) & (once <= 1))
    assert np.array_equal(decode_pgm(encode_pgm(once)), once)
    assert encode_pgm(once) == encode_pgm(img)


def test_pgm_comments_accepted():
    data = b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255])
    assert np.array_equal(decode_pgm(data), [[0.0, 1.0]])


@pytest.mark.parametrize(
    "data, where",
    [
        (b"P2\n2 1\n255\n\x00\x00", "byte 0"),
        (b"P5\n2 x\n255\n\x00\x00", "byte 5"),
        (b"P5\n2 1\n65535\n\x00\x00", "byte 7"),
        (b"P5\n2 1\n255\n\x00", "byte 12"),
        (b"P5\n2 1", "byte 6"),
    ],
)
def test_pgm_errors_carry_position(data, where):
    with pytest.raises(ImageFormatError, match=where):
        decode_pgm(data)


def test_image_files_round_trip(tmp_path, rng):
    img = decode_pgm(encode_pgm(rng.uniform(0, 1, (6, 4))))
    save_image(tmp_path / "a.pgm", img)
    assert np.array_equal(load_image(tmp_path / "a.pgm"), img)
    pytest.importorskip("PIL")
    save_image(tmp_path / "a.png", img)
    assert np.array_equal(load_image(tmp_path / "a.png"), img)


# --- metrics -------------------------------------------------------------------------


def test_psnr_examples():
    a = np.zeros((4, 4))
    assert psnr(a, a) == 99.0
    assert psnr(a, a + 0.1) == pytest.approx(20.0)
    assert psnr(a, a + 1.0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        psnr(a, np.zeros((4, 5)))


def test_ssim_identical_is_one(rng):
    a = rng.uniform(0, 1, (20, 20))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_matches_skimage(rng):
    for shape in ((16, 16), (33, 40)):
        a = rng.uniform(0, 1, shape)
        b = np.clip(a + 0.2 * rng.standard_normal(shape), 0, 1)
        ref = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5, use_sample_covariance=True)
        assert ssim(a, b) == pytest.approx(ref, abs=1e-10)


def test_ssim_constant_offset_oracle():
    # a ramp and a shifted copy have equal local variances, so only the luminance term is left
    a = np.tile(np.linspace(0, 0.5, 16), (16, 1))
    b = a + 0.5
    r = np.arange(11) - 5.0
    g = np.exp(-0.5 * (r / 1.5) ** 2)
    g /= g.sum()
    w = np.outer(g, g)
    c1 = 0.01**2
    vals = []
    for i in range(6):
        for j in range(6):
            mu = np.sum(w * a[i : i + 11, j : j + 11])
            vals.append((2 * mu * (mu + 0.5) + c1) / (mu**2 + (mu + 0.5) ** 2 + c1))
    assert ssim(a, b) == pytest.approx(np.mean(vals), rel=1e-10)


def test_ssim_independent_noise_near_zero():
    r = np.random.default_rng(3)
    assert abs(ssim(r.uniform(0, 1, (64, 64)), r.uniform(0, 1, (64, 64)))) < 0.1


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


# --- command line ---------------------------------------------------------------------


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(SMALL + ["--outdir", str(out)] + list(extra))
    return code, out


def test_cli_writes_metrics_and_dumps(tmp_path):
    code, out = run(tmp_path, "a", "--dumps", "1", "5")
    assert code == EXIT_OK
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == HEADER == "k,objective,psnr,ssim,psnr_data,ssim_data,pred_residual,ms"
    assert len(lines) == 13 and [int(ln.split(",")[0]) for ln in lines[1:]] == list(range(1, 13))
    assert sorted(os.listdir(out / "frames")) == ["b_00001.pgm", "b_00005.pgm", "x_00001.pgm", "x_00005.pgm"]
    assert load_image(out / "frames" / "x_00005.pgm").shape == (24, 24)
    assert parse_config((out / "config.ini").read_text()).N == 12


@pytest.mark.parametrize("mode", ["pofb", "popd-known", "popd-unknown"])
def test_cli_deterministic(tmp_path, mode):
    _, a = run(tmp_path, "a", "--mode", mode)
    _, b = run(tmp_path, "b", "--mode", mode)
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert all(ln.endswith(",0.0") for ln in (a / "metrics.csv").read_text().splitlines()[1:])


def test_cli_config_file_reproduces_run(tmp_path):
    _, a = run(tmp_path, "a", "--seed", "4")
    code = main(["--config", str(a / "config.ini"), "--outdir", str(tmp_path / "b")])
    assert code == EXIT_OK
    assert (a / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "c", "--kappa", "1.5")[0] == EXIT_CONFIG
    with pytest.raises(SystemExit) as e:
        main(["--timing", "maybe"])
    assert e.value.code == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    assert run(tmp_path, "i", "--Lambda", "1.02")[0] == EXIT_INFEASIBLE
    assert run(tmp_path, "s", "--source", str(tmp_path / "none.pgm"))[0] == EXIT_IO
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P6\n1 1\n255\n\x00")
    assert run(tmp_path, "f", "--source", str(bad))[0] == EXIT_IO
    assert "byte 0" in capsys.readouterr().err


def test_cli_source_image(tmp_path, rng):
    src = tmp_path / "src.pgm"
    save_image(src, rng.uniform(0, 1, (40, 50)))
    code, out = run(tmp_path, "a", "--source", str(src))
    assert code == EXIT_OK and len((out / "metrics.csv").read_text().splitlines()) == 13


def test_cli_env_overrides_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTDIR_ENV, str(tmp_path / "env"))
    assert main(SMALL + ["--outdir", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "env" / "metrics.csv").exists() and not (tmp_path / "flag").exists()


def test_cli_diagnostics_mode(tmp_path):
    code, out = run(tmp_path, "d", "--mode", "diagnostics")
    assert code == EXIT_OK
    lines = (out / "certificates.txt").read_text().splitlines()
    assert len(lines) == 2 and all("holds" in ln for ln in lines)


def test_cli_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "onlinepd", *SMALL, "--N", "3", "--outdir", str(tmp_path / "m")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert len((tmp_path / "m" / "metrics.csv").read_text().splitlines()) == 4
