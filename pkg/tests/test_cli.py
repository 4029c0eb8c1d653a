import csv
import json

import numpy as np
import pytest
from scipy.io import wavfile

from sectorbf.bank_io import load_bank
from sectorbf.cli import main
from sectorbf.pipeline import export_pattern, read_pattern_csv, read_wav

DESIGN = """\
geometry: {type: circular, num_mics: 8, radius_m: 0.1}
sectors: {preset: paper4}
design: {angle_step_deg: 5}
"""

SCENE = """\
sources:
  - {azimuth_deg: 90, elevation_deg: 35}
  - {azimuth_deg: 270, elevation_deg: 35}
duration_s: 0.5
seed: 4
"""


@pytest.fixture(scope="module")
def bank_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("bank")
    (d / "design.yaml").write_text(DESIGN)
    assert main(["design", "--config", str(d / "design.yaml"), "--out", str(d / "b.bin")]) == 0
    return d / "b.bin"


def test_design_output_and_determinism(tmp_path, bank_path):
    bank = load_bank(bank_path)
    assert bank.weights.shape == (257, 8, 4)
    (tmp_path / "design.yaml").write_text(DESIGN)
    out = tmp_path / "again.bin"
    assert main(["design", "--config", str(tmp_path / "design.yaml"), "--out", str(out),
                 "--threads", "2", "--csv", str(tmp_path / "w.csv")]) == 0
    assert out.read_bytes() == bank_path.read_bytes()
    assert len((tmp_path / "w.csv").read_text().splitlines()) == 1 + 257 * 8 * 4


def test_design_invalid_config(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text(DESIGN.replace("{preset: paper4}", "[{azimuth_start_deg: 0, azimuth_end_deg: 90,"
                                " elevation_min_deg: 0, elevation_max_deg: 95}]"))
    assert main(["design", "--config", str(p), "--out", str(tmp_path / "x.bin")]) == 1
    assert "elevation_max_deg" in capsys.readouterr().err
    assert not (tmp_path / "x.bin").exists()


def test_design_singular_is_numerical_failure(tmp_path, capsys):
    p = tmp_path / "sing.yaml"
    p.write_text(DESIGN.replace("{angle_step_deg: 5}", "{angle_step_deg: 5, diagonal_loading: 0}"))
    assert main(["design", "--config", str(p), "--out", str(tmp_path / "x.bin")]) == 2
    assert "bin 0" in capsys.readouterr().err


def test_bad_flag_is_input_error():
    with pytest.raises(SystemExit) as err:
        main(["design", "--nope"])
    assert err.value.code == 1


def test_apply(tmp_path, bank_path, rng):
    wav = tmp_path / "in.wav"
    wavfile.write(wav, 16000, (0.1 * rng.standard_normal((4000, 8))).astype(np.float32))
    out = tmp_path / "out.wav"
    assert main(["apply", str(wav), "--bank", str(bank_path), "--out", str(out)]) == 0
    audio = read_wav(out)
    assert audio.samples.shape == (4, 4000)
    meta = json.loads((tmp_path / "out.wav.json").read_text())
    assert meta["channels"] == ["sector1", "sector2", "sector3", "sector4"]
    assert len(meta["bank_sha256"]) == 64


def test_apply_silence(tmp_path, bank_path):
    wav = tmp_path / "z.wav"
    wavfile.write(wav, 16000, np.zeros((3000, 8), dtype=np.int16))
    out = tmp_path / "o.wav"
    assert main(["apply", str(wav), "--bank", str(bank_path), "--out", str(out)]) == 0
    assert not np.any(read_wav(out).samples)


def test_apply_channel_mismatch(tmp_path, bank_path, capsys):
    wav = tmp_path / "four.wav"
    wavfile.write(wav, 16000, np.zeros((1000, 4), dtype=np.float32))
    assert main(["apply", str(wav), "--bank", str(bank_path), "--out", str(tmp_path / "o.wav")]) == 1
    err = capsys.readouterr().err
    assert "expected 8" in err and "found 4" in err


def test_pattern(tmp_path, bank_path):
    out = tmp_path / "p.csv"
    assert main(["pattern", "--bank", str(bank_path), "--sector", "2",
                 "--elevations", "10,25,40,55", "--out", str(out)]) == 0
    back = read_pattern_csv(out)
    assert back.magnitudes_db.shape == (4, 360, 257)
    expected = export_pattern(load_bank(bank_path), 1, [10, 25, 40, 55])
    np.testing.assert_array_equal(back.magnitudes_db, expected.magnitudes_db)


@pytest.mark.parametrize("sector, elevations", [("2", ""), ("2", "10,x"), ("5", "10"),
                                                ("0", "10"), ("1", "100")])
def test_pattern_bad_arguments(tmp_path, bank_path, sector, elevations):
    assert main(["pattern", "--bank", str(bank_path), "--sector", sector,
                 "--elevations", elevations, "--out", str(tmp_path / "p.csv")]) == 1


def _read_report(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate(tmp_path, bank_path):
    cfg = tmp_path / "scene.yaml"
    cfg.write_text(SCENE)
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", str(cfg), "--bank", str(bank_path), "--out", str(out)]) == 0
    rows = _read_report(out)
    assert len(rows) == 4
    assert [r["contains_target"] for r in rows] == ["0", "1", "0", "0"]
    assert float(rows[1]["sir_gain_db"]) >= 6.0
    assert read_wav(tmp_path / "r_mixture.wav").num_channels == 8
    assert read_wav(tmp_path / "r_beams.wav").num_channels == 4

    again = tmp_path / "r2.csv"
    assert main(["simulate", "--config", str(cfg), "--bank", str(bank_path), "--out", str(again)]) == 0
    assert again.read_text() == out.read_text()
    other = tmp_path / "r3.csv"
    assert main(["simulate", "--config", str(cfg), "--bank", str(bank_path), "--out", str(other),
                 "--seed", "5"]) == 0
    assert other.read_text() != out.read_text()


def test_simulate_errors(tmp_path, bank_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("sources: []\n")
    assert main(["simulate", "--config", str(empty), "--bank", str(bank_path),
                 "--out", str(tmp_path / "r.csv")]) == 1
    outside = tmp_path / "outside.yaml"
    outside.write_text(SCENE.replace("{azimuth_deg: 90, elevation_deg: 35}",
                                     "{azimuth_deg: 90, elevation_deg: 80}"))
    assert main(["simulate", "--config", str(outside), "--bank", str(bank_path),
                 "--out", str(tmp_path / "r.csv")]) == 2


def test_eval_counts(tmp_path):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("true_count,estimated_count\n" + "1,1\n" * 7)
    out = tmp_path / "s.csv"
    assert main(["eval-counts", str(pairs), "--out", str(out)]) == 0
    assert out.read_text().splitlines() == ["true_k,est_i,score", "1,1,1.0"]


def test_eval_counts_reported_single_speaker_row(tmp_path):
    pairs = tmp_path / "pairs.csv"
    rows = [(1, 1)] * 9684 + [(1, 2)] * 302 + [(1, 3)] * 14
    pairs.write_text("".join(f"{k},{i}\n" for k, i in rows))
    out = tmp_path / "s.csv"
    assert main(["eval-counts", str(pairs), "--out", str(out)]) == 0
    scores = {(r["true_k"], r["est_i"]): float(r["score"]) for r in _read_report(out)}
    assert scores[("1", "1")] == 0.9684


def test_eval_counts_errors(tmp_path, capsys):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("")
    assert main(["eval-counts", str(pairs), "--out", str(tmp_path / "s.csv")]) == 1
    pairs.write_text("1,1\n2,2\n3\n")
    assert main(["eval-counts", str(pairs), "--out", str(tmp_path / "s.csv")]) == 1
    assert ":3:" in capsys.readouterr().err
