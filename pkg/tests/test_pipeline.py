import json
import sys

import numpy as np
import pytest

from fixtures_voices import VOICE_A, VOICE_B, silence, voice_clip

from podforge.audio import (KIND_MAGNITUDE, Waveform, extract_features,
                            save_wav)
from podforge.codec import Codebook
from podforge.errors import (CodecMismatch, EmptyAudio, MissingScore,
                             MixedSpeakers, StageFailure, TooShort,
                             TranscriberFailure)
from podforge.pipeline import (DEFAULT_STAGES, ExternalProcessScorer,
                               ExternalProcessTranscriber, HighpassStage,
                               LookupTranscriber, ManifestRecord,
                               SnrProxyScorer, SpectralGateStage,
                               apply_cleaning, build_pretrain_corpus,
                               build_sft_corpus, chunk_audio, filter_quality,
                               filter_single_speaker, read_manifest,
                               score_quality, segment_utterances, transcribe,
                               write_manifest)
from podforge.pipeline.cleaning import CleaningStage

RATE = 16000


def make_record(**kwargs):
    base = dict(id="r0", source_path="x.wav", start_s=0.0, end_s=1.0,
                duration_s=1.0, sample_rate=RATE, stage="chunked")
    base.update(kwargs)
    return ManifestRecord(**base)


class TestManifest:
    def test_round_trip(self, tmp_path):
        records = [make_record(id=f"r{i}", mos=3.0 + i * 0.5) for i in range(3)]
        path = tmp_path / "m.jsonl"
        write_manifest(records, path)
        back = read_manifest(path)
        assert back == records

    def test_keys_are_field_names(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest([make_record()], path)
        row = json.loads(path.read_text().splitlines()[0])
        assert set(row) == {"id", "source_path", "start_s", "end_s", "duration_s",
                            "sample_rate", "stage", "mos", "speaker_count",
                            "speaker_id", "text"}

    def test_stage_monotone(self):
        rec = make_record(stage="segmented")
        rec.advance("scored")
        with pytest.raises(ValueError):
            rec.advance("chunked")

    def test_invariants(self):
        with pytest.raises(ValueError):
            make_record(end_s=0.0)
        with pytest.raises(ValueError):
            make_record(duration_s=2.0)
        with pytest.raises(ValueError):
            make_record(mos=5.5)
        with pytest.raises(ValueError):
            make_record(stage="polished")


class TestChunkAudio:
    def test_150s_gives_60_60_30(self):
        w = Waveform(np.zeros(150 * RATE), RATE)
        chunks = chunk_audio(w)
        durs = [round(c.duration_s) for c, _ in chunks]
        assert durs == [60, 60, 30]
        spans = [(r.start_s, r.end_s) for _, r in chunks]
        assert spans == [(0.0, 60.0), (60.0, 120.0), (120.0, 150.0)]
        assert all(r.stage == "chunked" for _, r in chunks)

    def test_59s_single_chunk(self):
        chunks = chunk_audio(Waveform(np.zeros(59 * RATE), RATE))
        assert [round(c.duration_s) for c, _ in chunks] == [59]

    def test_sub_second_tail_dropped(self):
        chunks = chunk_audio(Waveform(np.zeros(int(60.5 * RATE)), RATE))
        assert [round(c.duration_s) for c, _ in chunks] == [60]

    def test_reassembly_covers_source(self):
        w = Waveform(np.zeros(int(137.2 * RATE)), RATE)
        chunks = chunk_audio(w)
        assert chunks[0][1].start_s == 0.0
        for (_, a), (_, b) in zip(chunks, chunks[1:]):
            assert a.end_s == b.start_s
        assert w.duration_s - chunks[-1][1].end_s < 1.0


class TestCleaning:
    def test_empty_chain_is_identity(self):
        w = voice_clip(VOICE_A, 1.0, 0)
        out = apply_cleaning(w, [])
        assert np.array_equal(out.samples, w.samples)

    def test_highpass_kills_hum_keeps_speech_band(self):
        t = np.arange(2 * RATE) / RATE
        mix = Waveform(0.3 * np.sin(2 * np.pi * 50 * t)
                       + 0.3 * np.sin(2 * np.pi * 1000 * t), RATE)
        out = apply_cleaning(mix, [HighpassStage()])
        before = extract_features(mix, KIND_MAGNITUDE).frames.mean(axis=0)
        after = extract_features(out, KIND_MAGNITUDE).frames.mean(axis=0)
        bin50, bin1k = round(50 * 1024 / RATE), round(1000 * 1024 / RATE)
        assert 20 * np.log10(after[bin50] / before[bin50]) <= -20.0
        assert abs(20 * np.log10(after[bin1k] / before[bin1k])) < 1.0

    def test_spectral_gate_suppresses_pure_noise(self):
        rng = np.random.default_rng(7)
        noise = Waveform(np.clip(rng.normal(0.0, 0.1, 4 * RATE), -1, 1), RATE)
        out = apply_cleaning(noise, [SpectralGateStage()])
        rms_in = np.sqrt((noise.samples ** 2).mean())
        rms_out = np.sqrt((out.samples ** 2).mean())
        assert rms_out <= 0.25 * rms_in

    def test_stage_failure_carries_name(self):
        class Broken(CleaningStage):
            name = "broken"

            def transform(self, w):
                raise RuntimeError("boom")

        with pytest.raises(StageFailure) as err:
            apply_cleaning(voice_clip(VOICE_A, 1.0, 0), [Broken()])
        assert err.value.stage_name == "broken"

    def test_contract_violation_detected(self):
        class RateChanger(CleaningStage):
            name = "rate_changer"

            def transform(self, w):
                return Waveform(w.samples, w.sample_rate * 2)

        with pytest.raises(StageFailure):
            apply_cleaning(voice_clip(VOICE_A, 1.0, 0), [RateChanger()])

    def test_default_chain_preserves_duration(self):
        w = voice_clip(VOICE_A, 2.0, 3)
        out = apply_cleaning(w, DEFAULT_STAGES)
        assert out.sample_rate == w.sample_rate
        assert abs(len(out) - len(w)) <= 640


class TestSegmentation:
    def test_short_burst_discarded(self):
        stream = Waveform(np.concatenate([
            voice_clip(VOICE_A, 8.0, 1).samples,
            silence(1.0).samples,
            voice_clip(VOICE_A, 3.0, 2).samples,
        ]), RATE)
        segs = segment_utterances(stream)
        assert len(segs) == 1
        _, rec = segs[0]
        assert rec.stage == "segmented"
        assert rec.end_s - rec.start_s == pytest.approx(8.0, abs=0.3)

    def test_pure_silence_empty(self):
        assert segment_utterances(silence(30.0)) == []

    def test_tiny_input_empty(self):
        assert segment_utterances(Waveform(np.zeros(100), RATE)) == []

    def test_long_tone_split_at_energy_dip(self):
        t = np.arange(90 * RATE) / RATE
        tone = 0.3 * np.sin(2 * np.pi * 440 * t)
        tone[45 * RATE:45 * RATE + 640] *= 0.001  # deliberate one-frame dip
        segs = segment_utterances(Waveform(tone, RATE))
        assert len(segs) == 2
        for _, rec in segs:
            assert rec.duration_s <= 60.0
        assert segs[0][1].end_s == pytest.approx(45.0, abs=0.1)


class TestQuality:
    def block_wave(self, low, high, n_low=50, n_high=50):
        blocks = [np.full(640, low)] * n_low + [np.full(640, high)] * n_high
        return Waveform(np.concatenate(blocks), RATE)

    def test_constant_amplitude_floor(self):
        assert score_quality(Waveform(np.full(RATE, 0.3), RATE), SnrProxyScorer()) == 1.0

    def test_40db_dynamics_ceiling(self):
        assert score_quality(self.block_wave(0.005, 0.5), SnrProxyScorer()) == 5.0

    def test_20db_midpoint(self):
        assert score_quality(self.block_wave(0.05, 0.5), SnrProxyScorer()) == pytest.approx(3.0)

    def test_empty_audio(self):
        with pytest.raises(EmptyAudio):
            score_quality(Waveform(np.zeros(0), RATE), SnrProxyScorer())

    def test_filter_strictness(self):
        records = [make_record(id=f"r{i}", stage="segmented", mos=m)
                   for i, m in enumerate([3.9, 3.8, 3.7])]
        kept, dropped = filter_quality(records, 3.8)
        assert [r.mos for r in kept] == [3.9]
        assert [r.mos for r in dropped] == [3.8, 3.7]
        assert all(r.stage == "scored" for r in records)

    def test_filter_partition(self):
        records = [make_record(id=f"r{i}", stage="segmented", mos=1.0 + (i % 9) * 0.5)
                   for i in range(30)]
        kept, dropped = filter_quality(records)
        assert len(kept) + len(dropped) == 30
        assert {r.id for r in kept}.isdisjoint({r.id for r in dropped})

    def test_filter_empty(self):
        assert filter_quality([]) == ([], [])

    def test_missing_score(self):
        with pytest.raises(MissingScore):
            filter_quality([make_record(stage="segmented")])

    def test_seventy_thirty_split(self):
        records = [make_record(id=f"hi{i}", stage="segmented", mos=4.2) for i in range(70)]
        records += [make_record(id=f"lo{i}", stage="segmented", mos=3.1) for i in range(30)]
        kept, _ = filter_quality(records)
        assert len(kept) / len(records) == pytest.approx(0.70, abs=0.02)


class TestSpeakerFilter:
    def test_single_voice_retained(self):
        w = voice_clip(VOICE_A, 6.0, 21)
        rec = make_record(stage="scored", end_s=6.0, duration_s=6.0)
        out = filter_single_speaker(w, rec)
        assert out is not None
        assert out.stage == "speaker_filtered" and out.speaker_count == 1

    def test_two_voices_rejected(self):
        w = Waveform(np.concatenate([
            voice_clip(VOICE_A, 3.0, 22).samples,
            voice_clip(VOICE_B, 3.0, 23).samples,
        ]), RATE)
        rec = make_record(stage="scored", end_s=6.0, duration_s=6.0)
        assert filter_single_speaker(w, rec) is None

    def test_too_short(self):
        with pytest.raises(TooShort):
            filter_single_speaker(voice_clip(VOICE_A, 3.0, 24),
                                  make_record(stage="scored", end_s=3.0, duration_s=3.0))


class TestTranscribe:
    def test_lookup_round_trip(self):
        w = voice_clip(VOICE_A, 2.0, 30)
        t = LookupTranscriber()
        t.register(w, "hello world")
        rec = make_record(stage="speaker_filtered", end_s=2.0, duration_s=2.0)
        out = transcribe(w, t, rec)
        assert out.text == "hello world" and out.stage == "transcribed"

    def test_unregistered_fails(self):
        t = LookupTranscriber()
        rec = make_record(stage="speaker_filtered", end_s=2.0, duration_s=2.0)
        with pytest.raises(TranscriberFailure):
            transcribe(voice_clip(VOICE_A, 2.0, 31), t, rec)

    def test_stage_precondition(self):
        t = LookupTranscriber()
        with pytest.raises(ValueError):
            transcribe(voice_clip(VOICE_A, 2.0, 32), t, make_record(stage="segmented"))

    def test_external_process_round_trip(self, tmp_path):
        script = tmp_path / "echo_transcriber.py"
        script.write_text(
            "import sys\n"
            "for line in sys.stdin:\n"
            "    print('a fixed transcript')\n"
        )
        t = ExternalProcessTranscriber([sys.executable, str(script)])
        rec = make_record(stage="speaker_filtered", end_s=2.0, duration_s=2.0)
        out = transcribe(voice_clip(VOICE_A, 2.0, 33), t, rec)
        assert out.text == "a fixed transcript"

    def test_external_process_failure(self, tmp_path):
        script = tmp_path / "dies.py"
        script.write_text("import sys; sys.exit(3)\n")
        t = ExternalProcessTranscriber([sys.executable, str(script)])
        with pytest.raises(TranscriberFailure):
            t.transcribe(voice_clip(VOICE_A, 2.0, 34))

    def test_external_scorer(self, tmp_path):
        script = tmp_path / "scorer.py"
        script.write_text(
            "import sys\n"
            "for line in sys.stdin:\n"
            "    print('4.2')\n"
        )
        scorer = ExternalProcessScorer([sys.executable, str(script)])
        assert score_quality(voice_clip(VOICE_A, 2.0, 35), scorer) == 4.2


def forced_token_codebook(token_id: int, k: int = 1024) -> Codebook:
    """Every frame quantizes to token_id: that centroid sits at the
    silence MFCC origin, all others far away."""
    centroids = np.full((k, 13), 1000.0)
    centroids[token_id] = 0.0
    return Codebook(centroids, np.full((k, 513), 1e-6))


class TestCorpusBuilders:
    def write_silence_record(self, tmp_path, rec_id="u0", duration_s=2.0, text="Hi.",
                             speaker_id=None):
        path = tmp_path / f"{rec_id}.wav"
        save_wav(silence(duration_s), path)
        return ManifestRecord(id=rec_id, source_path=str(path), start_s=0.0,
                              end_s=duration_s, duration_s=duration_s,
                              sample_rate=RATE, stage="transcribed", text=text,
                              speaker_id=speaker_id)

    def test_pretrain_line_format(self, tmp_path):
        rec = self.write_silence_record(tmp_path, duration_s=2.0, text="Hi.")
        out = tmp_path / "pretrain.txt"
        count = build_pretrain_corpus([rec], forced_token_codebook(7), out)
        assert count == 1
        line = out.read_text(encoding="utf-8").splitlines()[0]
        assert line == "Hi. " + "<|audio_token_7|>" * 49 + "<|audio_token_end|>"

    def test_pretrain_empty(self, tmp_path):
        out = tmp_path / "pretrain.txt"
        assert build_pretrain_corpus([], forced_token_codebook(0), out) == 0
        assert out.read_text() == ""

    def test_five_second_record_has_124_tokens(self, tmp_path):
        rec = self.write_silence_record(tmp_path, duration_s=5.0)
        out = tmp_path / "pretrain.txt"
        build_pretrain_corpus([rec], forced_token_codebook(3), out)
        line = out.read_text().splitlines()[0]
        assert line.count("<|audio_token_3|>") == 124

    def test_sft_record_format(self, tmp_path):
        rec = self.write_silence_record(
            tmp_path, text="Hey, great to have you in Chatpods.", speaker_id="spk0")
        out = tmp_path / "sft.jsonl"
        count = build_sft_corpus([rec], forced_token_codebook(520), out)
        assert count == 1
        row = json.loads(out.read_text().splitlines()[0])
        assert list(row) == ["instruction", "input", "output"]
        assert row["instruction"] == "Hey, great to have you in Chatpods."
        assert row["input"] == ""
        assert row["output"] == "<|audio_token_520|>" * 49 + "<|audio_token_end|>"

    def test_mixed_speakers_rejected(self, tmp_path):
        recs = [
            self.write_silence_record(tmp_path, rec_id="a", speaker_id="spk0"),
            self.write_silence_record(tmp_path, rec_id="b", speaker_id="spk1"),
        ]
        with pytest.raises(MixedSpeakers):
            build_sft_corpus(recs, forced_token_codebook(0), tmp_path / "sft.jsonl")

    def test_codec_mismatch_guard(self, tmp_path):
        rec = self.write_silence_record(tmp_path)
        oversized = forced_token_codebook(1030, k=1031)
        with pytest.raises(CodecMismatch):
            build_pretrain_corpus([rec], oversized, tmp_path / "pretrain.txt")

    def test_untranscribed_rejected(self, tmp_path):
        rec = self.write_silence_record(tmp_path)
        rec.text = None
        with pytest.raises(ValueError):
            build_pretrain_corpus([rec], forced_token_codebook(0), tmp_path / "x.txt")
