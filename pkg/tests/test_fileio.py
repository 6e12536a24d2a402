import numpy as np
import pytest

from dnnfbcc.exceptions import FormatError, ManifestError
from dnnfbcc.fileio import load_container, parse_manifest, read_features, save_container, write_features


class TestFeatureFiles:
    def test_empty_matrix(self, tmp_path):
        write_features(tmp_path / "a.fbf", np.zeros((0, 40)), "cep_deltas")
        data, kind = read_features(tmp_path / "a.fbf")
        assert data.shape == (0, 40) and kind == "cep_deltas"
        assert (tmp_path / "a.fbf").stat().st_size == 13

    def test_bit_exact_float32(self, tmp_path, rng):
        x = rng.normal(size=(2, 40)).astype(np.float32)
        write_features(tmp_path / "a.fbf", x, "cep")
        data, kind = read_features(tmp_path / "a.fbf")
        assert data.tobytes() == x.tobytes() and kind == "cep"

    def test_truncated(self, tmp_path, rng):
        write_features(tmp_path / "a.fbf", rng.normal(size=(3, 4)), "power")
        blob = (tmp_path / "a.fbf").read_bytes()
        (tmp_path / "a.fbf").write_bytes(blob[:-5])
        with pytest.raises(FormatError) as err:
            read_features(tmp_path / "a.fbf")
        assert err.value.offset == len(blob) - 5

    def test_bad_magic(self, tmp_path):
        (tmp_path / "a.fbf").write_bytes(b"XXXX" + bytes(9))
        with pytest.raises(FormatError) as err:
            read_features(tmp_path / "a.fbf")
        assert err.value.offset == 0

    def test_trailing_bytes(self, tmp_path):
        write_features(tmp_path / "a.fbf", np.ones((1, 2)), "fbank")
        with open(tmp_path / "a.fbf", "ab") as fh:
            fh.write(b"\0")
        with pytest.raises(FormatError) as err:
            read_features(tmp_path / "a.fbf")
        assert err.value.offset == 13 + 8

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError):
            write_features(tmp_path / "a.fbf", np.ones((1, 2)), "mfcc")


class TestContainer:
    def test_round_trip(self, tmp_path, rng):
        tensors = {"W": rng.normal(size=(5, 3)), "b": rng.normal(size=4), "s": np.array(2.5)}
        save_container(tmp_path / "m.json", "fbnn", tensors, {"seed": 1})
        back, meta = load_container(tmp_path / "m.json", kind="fbnn")
        assert meta == {"seed": 1}
        for name, value in tensors.items():
            assert back[name].tobytes() == value.tobytes() and back[name].shape == value.shape

    def test_deterministic_bytes(self, tmp_path, rng):
        tensors = {"b": rng.normal(size=3), "a": rng.normal(size=2)}
        save_container(tmp_path / "1.json", "gmm", tensors, {"z": 1, "a": 2})
        save_container(tmp_path / "2.json", "gmm", dict(reversed(list(tensors.items()))), {"a": 2, "z": 1})
        assert (tmp_path / "1.json").read_bytes() == (tmp_path / "2.json").read_bytes()

    def test_kind_mismatch(self, tmp_path):
        save_container(tmp_path / "m.json", "gmm", {"x": np.zeros(1)})
        with pytest.raises(FormatError, match="fbnn"):
            load_container(tmp_path / "m.json", kind="fbnn")

    def test_not_json(self, tmp_path):
        (tmp_path / "m.json").write_text("{nope")
        with pytest.raises(FormatError):
            load_container(tmp_path / "m.json")


class TestManifest:
    @pytest.fixture
    def audio(self, tmp_path):
        for name in ("a", "b", "c", "d"):
            (tmp_path / f"{name}.wav").write_bytes(b"")
        return tmp_path

    def write(self, directory, *lines):
        path = directory / "m.tsv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_valid(self, audio):
        rows = parse_manifest(self.write(audio, "a.wav\thuman\t-\t0", "b.wav\tspoof\tS1\t1",
                                         "c.wav\tspoof\tS2\t2"))
        assert [(r.label, r.attack_id, r.class_index) for r in rows] == [
            ("human", "-", 0), ("spoof", "S1", 1), ("spoof", "S2", 2)]
        assert rows[0].audio_path == audio / "a.wav" and rows[0].utt_id == "a"

    def test_default_class(self, audio):
        rows = parse_manifest(self.write(audio, "# comment", "a.wav\thuman\t-", "b.wav\tspoof\tS1"))
        assert [r.class_index for r in rows] == [0, 1]

    def test_shared_class_allowed(self, audio):
        rows = parse_manifest(self.write(audio, "a.wav\tspoof\tS3\t3", "b.wav\tspoof\tS4\t3"), n_outputs=4)
        assert {r.class_index for r in rows} == {3}

    @pytest.mark.parametrize("bad", [
        "b.wav\tspoof\t-\t1",
        "b.wav\thuman\tS1\t0",
        "b.wav\tbonafide\t-\t0",
        "b.wav\tspoof\tS1\t0",
        "b.wav\tspoof\tS1\t9",
        "b.wav\tspoof\tS1\tone",
        "missing.wav\tspoof\tS1\t1",
        "a.wav\tspoof\tS1\t1",
        "b.wav\tspoof",
    ])
    def test_bad_row_reports_line(self, audio, bad):
        path = self.write(audio, "a.wav\thuman\t-\t0", bad)
        with pytest.raises(ManifestError) as err:
            parse_manifest(path, n_outputs=6)
        assert err.value.line == 2 and str(err.value).startswith("line 2:")

    def test_duplicate_stem(self, audio):
        (audio / "sub").mkdir()
        (audio / "sub" / "a.wav").write_bytes(b"")
        with pytest.raises(ManifestError, match="duplicate utterance"):
            parse_manifest(self.write(audio, "a.wav\thuman\t-", "sub/a.wav\tspoof\tS1"))

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError):
            parse_manifest(tmp_path / "none.tsv")
