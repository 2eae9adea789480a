import numpy as np
import pytest

from fixtures_eval import build_closed_loop
from fixtures_voices import VOICE_A, silence, voice_clip

from podforge.audio import Waveform, load_wav, save_wav
from podforge.cli import cli_dispatch
from podforge.config import AppConfig, load_config
from podforge.pipeline import read_manifest

RATE = 16000


class TestConfig:
    def test_defaults(self):
        cfg = AppConfig()
        assert cfg.sample_rate == 16000
        assert cfg.mos_threshold_pipeline == 3.8
        assert cfg.mos_threshold_decoder == 4.5
        assert cfg.codebook_size == 1024
        assert cfg.generation_cap_tokens == 1500

    def test_file_and_override_precedence(self, tmp_path):
        path = tmp_path / "pf.conf"
        path.write_text("seed=5\nchunk_s=30.0\n")
        cfg = load_config(str(path), overrides={"seed": 9})
        assert cfg.seed == 9          # flag beats file
        assert cfg.chunk_s == 30.0    # file beats default
        assert cfg.sample_rate == 16000

    def test_env_var_fallback(self, tmp_path, monkeypatch):
        path = tmp_path / "pf.conf"
        path.write_text("seed=77\n")
        monkeypatch.setenv("PODFORGE_CONFIG", str(path))
        assert load_config().seed == 77

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "pf.conf"
        path.write_text("volume=11\n")
        with pytest.raises(ValueError):
            load_config(str(path))

    def test_invalid_threshold_rejected(self):
        with pytest.raises(ValueError):
            AppConfig(mos_threshold_pipeline=0.5)

    def test_digest_round_trip(self, tmp_path):
        cfg = AppConfig(seed=3, chunk_s=45.0)
        path = tmp_path / "saved.conf"
        cfg.save(path)
        assert load_config(str(path)).digest() == cfg.digest()


class TestCliBasics:
    def test_unknown_subcommand(self, capsys):
        assert cli_dispatch(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand(self, capsys):
        assert cli_dispatch([]) == 1

    def test_help_exits_zero(self, capsys):
        assert cli_dispatch(["--help"]) == 0

    def test_missing_required_flag(self, capsys):
        assert cli_dispatch(["synth", "--text", "Hi."]) == 1


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """Closed-loop model/vocab/codec saved to disk for CLI runs."""
    root = tmp_path_factory.mktemp("artifacts")
    fixture = build_closed_loop(3)
    fixture.model.save(root / "m.bin")
    fixture.vocab.save(root / "m.vocab")
    fixture.codebook.save(root / "c.bin")
    conf = root / "pf.conf"
    conf.write_text("sft_template={instruction}\ntemperature=0.0\n")
    return root, fixture, conf


class TestCliSynth:
    def test_happy_path(self, artifacts, tmp_path):
        root, fixture, conf = artifacts
        out = tmp_path / "o.wav"
        code = cli_dispatch([
            "--config", str(conf), "synth", "--mode", "sft",
            "--text", fixture.texts[0], "--model", str(root / "m.bin"),
            "--codec", str(root / "c.bin"), "--out", str(out), "--seed", "0",
        ])
        assert code == 0
        assert load_wav(out).duration_s > 1.0

    def test_vocab_defaults_to_model_sibling(self, artifacts, tmp_path):
        root, fixture, conf = artifacts
        out = tmp_path / "o.wav"
        assert cli_dispatch([
            "--config", str(conf), "synth", "--text", fixture.texts[1],
            "--model", str(root / "m.bin"), "--codec", str(root / "c.bin"),
            "--out", str(out),
        ]) == 0

    def test_missing_model_is_runtime_error(self, artifacts, tmp_path):
        root, fixture, conf = artifacts
        assert cli_dispatch([
            "synth", "--text", "Hi.", "--model", str(tmp_path / "nope.bin"),
            "--codec", str(root / "c.bin"), "--out", str(tmp_path / "o.wav"),
        ]) == 2


class TestCliTrainCodec:
    def make_manifest(self, tmp_path, mos_values):
        records = []
        for i, mos in enumerate(mos_values):
            path = tmp_path / f"u{i}.wav"
            save_wav(voice_clip(VOICE_A, 4.0, 200 + i), path)
            records.append({
                "id": f"u{i}", "source_path": str(path), "start_s": 0.0,
                "end_s": 4.0, "duration_s": 4.0, "sample_rate": RATE,
                "stage": "scored", "mos": mos,
            })
        manifest = tmp_path / "m.jsonl"
        import json
        manifest.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        return manifest

    def test_refuses_when_nothing_qualifies(self, tmp_path, capsys):
        manifest = self.make_manifest(tmp_path, [4.5, 4.1, 3.0])
        code = cli_dispatch(["train-codec", "--manifest", str(manifest),
                             "--out", str(tmp_path / "c.bin")])
        assert code == 2
        assert "4.5" in capsys.readouterr().err

    def test_trains_small_codebook(self, tmp_path):
        manifest = self.make_manifest(tmp_path, [4.8, 4.9, 4.7])
        out = tmp_path / "c.bin"
        code = cli_dispatch(["train-codec", "--manifest", str(manifest),
                             "--out", str(out), "--k", "16", "--seed", "3"])
        assert code == 0 and out.exists()


class TestCliPipelineStages:
    def test_ingest_clean_segment(self, tmp_path):
        source = tmp_path / "source.wav"
        stream = Waveform(np.concatenate([
            silence(0.3).samples,
            voice_clip(VOICE_A, 8.0, 300).samples,
            silence(0.8).samples,
            voice_clip(VOICE_A, 6.0, 301).samples,
            silence(0.5).samples,
        ]), RATE)
        save_wav(stream, source)

        m1 = tmp_path / "chunked.jsonl"
        assert cli_dispatch(["ingest", "--audio", str(source),
                             "--out-dir", str(tmp_path / "chunks"),
                             "--manifest", str(m1)]) == 0
        chunked = read_manifest(m1)
        assert len(chunked) == 1 and chunked[0].stage == "chunked"

        m2 = tmp_path / "cleaned.jsonl"
        assert cli_dispatch(["clean", "--manifest", str(m1),
                             "--out-dir", str(tmp_path / "cleaned"),
                             "--out-manifest", str(m2)]) == 0
        assert all(r.stage == "cleaned" for r in read_manifest(m2))

        m3 = tmp_path / "segmented.jsonl"
        assert cli_dispatch(["segment", "--manifest", str(m2),
                             "--out-dir", str(tmp_path / "segments"),
                             "--out-manifest", str(m3)]) == 0
        segments = read_manifest(m3)
        assert len(segments) == 2
        assert all(r.stage == "segmented" for r in segments)
        assert all(r.duration_s >= 5.0 for r in segments)
