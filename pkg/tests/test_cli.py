import json

import numpy as np
import pytest

from cli_pipeline import run_pipeline
from dnnfbcc.cli import run_command
from dnnfbcc.dsp import AudioBuffer, write_wav
from dnnfbcc.evaluation import read_scores
from dnnfbcc.fileio import read_features
from dnnfbcc.filterbanks import read_bank_csv


@pytest.fixture
def one_wav(tmp_path, rng):
    write_wav(tmp_path / "a.wav", AudioBuffer(0.1 * rng.standard_normal(16000), 16000))
    (tmp_path / "m.tsv").write_text("a.wav\thuman\t-\t0\n")
    return tmp_path / "m.tsv"


class TestMakeBank:
    def test_preset(self, tmp_path):
        assert run_command(["make-bank", "--preset", "igfcc", "--out", str(tmp_path / "b.csv")]) == 0
        bank, _ = read_bank_csv(tmp_path / "b.csv")
        assert bank.shape == (513, 128)
        sidecar = json.loads((tmp_path / "b.csv.run.json").read_text())
        assert sidecar["preset"] == "igfcc" and sidecar["command"] == "make-bank"

    def test_kind(self, tmp_path):
        assert run_command(["make-bank", "--kind", "rectangular", "--channels", "4",
                            "--out", str(tmp_path / "b.csv")]) == 0
        bank, _ = read_bank_csv(tmp_path / "b.csv")
        assert bank.shape == (257, 4)


class TestExtract:
    def test_lfcc_dimensions(self, tmp_path, one_wav):
        assert run_command(["extract", "--preset", "lfcc", "--manifest", str(one_wav),
                            "--out-dir", str(tmp_path / "out")]) == 0
        feats, kind = read_features(tmp_path / "out" / "a.fbf")
        assert feats.shape == (99, 40) and kind == "cep_deltas"
        sidecar = json.loads((tmp_path / "out" / "run.json").read_text())
        assert str(tmp_path / "a.wav") in sidecar["inputs"]

    def test_power_mode(self, tmp_path, one_wav):
        assert run_command(["extract", "--preset", "gfcc", "--mode", "power", "--manifest", str(one_wav),
                            "--out-dir", str(tmp_path / "out")]) == 0
        feats, kind = read_features(tmp_path / "out" / "a.fbf")
        assert feats.shape == (99, 513) and kind == "power"

    def test_parallel_matches_serial(self, tmp_path, rng):
        for i in range(3):
            write_wav(tmp_path / f"u{i}.wav", AudioBuffer(0.1 * rng.standard_normal(8000), 16000))
        (tmp_path / "m.tsv").write_text("".join(f"u{i}.wav\tspoof\tS{i + 1}\n" for i in range(3)))
        for jobs in (1, 2):
            assert run_command(["extract", "--manifest", str(tmp_path / "m.tsv"), "--jobs", str(jobs),
                                "--out-dir", str(tmp_path / f"j{jobs}")]) == 0
        for i in range(3):
            assert (tmp_path / "j1" / f"u{i}.fbf").read_bytes() == (tmp_path / "j2" / f"u{i}.fbf").read_bytes()

    def test_learned_preset_needs_model(self, tmp_path, one_wav, capsys):
        code = run_command(["extract", "--preset", "dnn-igfcc", "--manifest", str(one_wav),
                            "--out-dir", str(tmp_path / "out")])
        assert code == 1
        assert "error in extract" in capsys.readouterr().err

    def test_bad_manifest(self, tmp_path, capsys):
        (tmp_path / "m.tsv").write_text("missing.wav\thuman\t-\n")
        assert run_command(["extract", "--manifest", str(tmp_path / "m.tsv"), "--out-dir", str(tmp_path)]) == 1
        assert "error in extract: line 1" in capsys.readouterr().err

    def test_wrong_sample_rate(self, tmp_path, rng, capsys):
        write_wav(tmp_path / "a.wav", AudioBuffer(0.1 * rng.standard_normal(8000), 8000))
        (tmp_path / "m.tsv").write_text("a.wav\thuman\t-\n")
        assert run_command(["extract", "--manifest", str(tmp_path / "m.tsv"), "--out-dir", str(tmp_path)]) == 1
        assert "8000 Hz" in capsys.readouterr().err


class TestEval:
    def write_scores(self, path):
        lines = [f"h{i}\t{s}\thuman\t-" for i, s in enumerate([3.0, 2.5, 2.0, 1.0])]
        lines += [f"a{i}\t{s}\tspoof\tS1" for i, s in enumerate([0.0, -1.0])]
        lines += [f"b{i}\t{s}\tspoof\tS10" for i, s in enumerate([1.5, -0.5])]
        path.write_text("\n".join(lines) + "\n")

    def test_table(self, tmp_path, capsys):
        self.write_scores(tmp_path / "s.tsv")
        assert run_command(["eval", "--scores", str(tmp_path / "s.tsv"), "--known", "S1", "--unknown", "S10",
                            "--feature-name", "lfcc", "--json", str(tmp_path / "r.json")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[-2].split() == ["feature", "Known", "Unknown", "All"]
        assert out[-1].split()[0] == "lfcc"
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["per_attack_eer"]["S1"] == 0.0
        assert report["all_avg"] == pytest.approx((report["per_attack_eer"]["S1"] + report["per_attack_eer"]["S10"]) / 2)

    def test_unlisted_attack(self, tmp_path, capsys):
        self.write_scores(tmp_path / "s.tsv")
        assert run_command(["eval", "--scores", str(tmp_path / "s.tsv"), "--known", "S1"]) == 1
        assert "error in eval" in capsys.readouterr().err


class TestErrors:
    def test_unknown_flag_exits_two(self):
        assert run_command(["extract", "--bogus"]) == 2

    def test_unknown_command(self):
        assert run_command(["frobnicate"]) == 2

    def test_missing_features_dir(self, tmp_path, capsys):
        assert run_command(["train-gmm", "--features", str(tmp_path), "--label", "human",
                            "--out", str(tmp_path / "g.json")]) == 1
        assert "error in train-gmm" in capsys.readouterr().err


def test_inspect(tmp_path, one_wav, capsys):
    run_command(["extract", "--manifest", str(one_wav), "--out-dir", str(tmp_path / "out")])
    capsys.readouterr()
    assert run_command(["inspect", str(tmp_path / "out" / "a.fbf")]) == 0
    assert "99 frames x 40 dims" in capsys.readouterr().out


def test_small_pipeline(tmp_path):
    artefacts = run_pipeline(tmp_path, n_train=3, n_test=3, epochs=1)
    scores = read_scores(tmp_path / "scores.tsv")
    assert len(scores) == 6 and all(np.isfinite(e.score) for e in scores)
    assert "fbnn.json" in artefacts and json.loads(artefacts["report.json"])["known"] == ["S1"]
