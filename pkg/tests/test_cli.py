import json
import logging
import struct

import pytest

import fetch_alffa_lexicon
from cli import PipelineConfig, check_closure, main
from corpus import SplitConfig, read_manifest
from lexicon import build_lexicon
from ngram_lm import Smoothing
from phoneset import Scheme

SEGMENT_ONE = (
    "juu ya kitanda alilala mgonjwa ambaye kwa miezi saba sasa hajapata ashekali alizingirwa na "
    "walokole wakimuasaa Mterehemezi tena anakaribia kuwa mauti tofauti yake na maiti ilikuwa moja "
    "tu, uhai, sura yake iliyokuwa nzuri miaka ayami iliyopita sasa ilikuwa inatisha"
)

HEADER = ["utt_id", "speaker", "gender", "path", "duration", "split", "text"]

PIPELINE_FILES = [
    "train.fileids", "train.transcription", "test.fileids", "test.transcription",
    "dictionary.dic", "fillers.fil", "phones.lst", "model.arpa", "config.json",
]


@pytest.fixture(autouse=True)
def restore_root_logger():
    # main() reconfigures the root logger
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def write_manifest_rows(path, rows):
    lines = ["\t".join(HEADER)]
    for utt_id, speaker, gender, duration, split, text in rows:
        lines.append("\t".join([utt_id, speaker, gender, f"{speaker}/{utt_id}.wav", duration, split, text]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def manifest_path(tmp_path):
    return write_manifest_rows(tmp_path / "manifest.tsv", [
        ("0430_swa_segment1", "Speaker_1", "F", "20.0", "train", SEGMENT_ONE),
        ("0431_swa_segment1", "Speaker_2", "M", "5.0", "train", "Mgonjwa uguzwe, nilijizuia."),
        ("0432_swa_segment1", "Speaker_3", "F", "4.0", "test", "juu ya kitanda"),
    ])


def wav_bytes(sample_rate=16000, n_samples=1600):
    fmt = struct.pack("<HHIIHH", 1, 1, sample_rate, sample_rate * 2, 2, 16)
    data = b"\x00\x00" * n_samples
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", len(body)) + body


# -------------------------------------------------------------------------
# usage
# -------------------------------------------------------------------------
@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["lm", "build", "--input", "x.txt", "--order", "6"],
    ["phonemize", "--scheme", "klingon", "--word", "juu"],
    ["prep", "split", "--ratios", "0.5,0.5"],
    ["pipeline", "--manifest", "m.tsv", "--out-dir", "out", "--experiment", "6"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


# -------------------------------------------------------------------------
# phonemize
# -------------------------------------------------------------------------
def test_phonemize(capsys):
    assert main(["phonemize", "--word", "chakula"]) == 0
    assert capsys.readouterr().out == "chakula\tCH AH K UH L AH\n"


def test_phonemize_normalizes_and_deduplicates(capsys):
    assert main(["phonemize", "--scheme", "basic", "--word", "Ng’ombe,", "--word", "ng'ombe"]) == 0
    assert capsys.readouterr().out == "ng'ombe\tng' o mb e\n"


def test_phonemize_help_mentions_deduplication(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["phonemize", "--help"])
    assert exit_info.value.code == 0
    assert "one line of phones per distinct normalized word" in " ".join(capsys.readouterr().out.split())


def test_phonemize_file_skips_non_words(tmp_path, capsys):
    words = tmp_path / "words.txt"
    words.write_text("juu 123 ya\n", encoding="utf-8")
    assert main(["phonemize", "--file", str(words)]) == 0
    assert capsys.readouterr().out == "juu\tJH UU\nya\tY AH\n"


def test_phonemize_unknown_grapheme(capsys):
    assert main(["phonemize", "--word", "xylofoni"]) == 1
    assert "error: phonemize:" in capsys.readouterr().err


# -------------------------------------------------------------------------
# dict
# -------------------------------------------------------------------------
def test_dict_build(tmp_path, capsys):
    transcript = tmp_path / "train.transcription"
    transcript.write_text("<s> juu ya kitanda </s> (a)\n<s> ya juu </s> (b)\n", encoding="utf-8")
    out = tmp_path / "dict"
    assert main(["dict", "build", "--input", str(transcript), "--out-dir", str(out)]) == 0

    assert (out / "dictionary.dic").read_text(encoding="utf-8") == "juu JH UU\nkitanda K IH T AH ND AH\nya Y AH\n"
    assert (out / "fillers.fil").read_text(encoding="utf-8") == "<s> SIL\n</s> SIL\n<sil> SIL\n"
    assert "SIL" in (out / "phones.lst").read_text(encoding="utf-8").splitlines()
    assert "✅ Saved 3 dictionary entries" in capsys.readouterr().err


def test_dict_build_warns_about_rejects(tmp_path, capsys):
    transcript = tmp_path / "words.txt"
    transcript.write_text("juu xylofoni\n", encoding="utf-8")
    assert main(["-q", "dict", "build", "--input", str(transcript), "--out-dir", str(tmp_path)]) == 0
    err = capsys.readouterr().err
    assert "1 words rejected: xylofoni" in err
    assert "✅" not in err


# -------------------------------------------------------------------------
# prep
# -------------------------------------------------------------------------
def test_prep_emit(manifest_path, tmp_path):
    out = tmp_path / "etc"
    assert main(["prep", "emit", "--manifest", str(manifest_path), "--out-dir", str(out)]) == 0
    assert (out / "test.fileids").read_text(encoding="utf-8") == "Speaker_3/0432_swa_segment1\n"
    assert (out / "test.transcription").read_text(encoding="utf-8") == (
        "<s> juu ya kitanda </s> (0432_swa_segment1)\n"
    )
    assert len((out / "train.fileids").read_text(encoding="utf-8").splitlines()) == 2
    assert not (out / "eval.fileids").exists()


def test_prep_emit_one_split(manifest_path, tmp_path):
    assert main(["prep", "--manifest", str(manifest_path), "--split", "test", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "test.fileids").exists()
    assert not (tmp_path / "train.fileids").exists()


def test_prep_emit_needs_manifest(capsys):
    assert main(["prep", "emit"]) == 1
    assert "error: prep:" in capsys.readouterr().err


def test_prep_split(manifest_path, tmp_path, capsys):
    out = tmp_path / "labelled.tsv"
    argv = ["prep", "split", "--manifest", str(manifest_path), "--out", str(out),
            "--train-speakers", "Speaker_1,Speaker_2", "--test-speakers", "Speaker_3"]
    assert main(argv) == 0
    labelled = read_manifest(out)
    assert labelled.split_labels["0432_swa_segment1"] == "test"
    assert [u.utt_id for u in labelled.utterances_in("train")] == ["0430_swa_segment1", "0431_swa_segment1"]
    assert "train" in capsys.readouterr().out


def test_prep_split_needs_out(manifest_path, capsys):
    before = manifest_path.read_bytes()
    argv = ["prep", "split", "--manifest", str(manifest_path),
            "--train-speakers", "Speaker_1,Speaker_2", "--test-speakers", "Speaker_3"]
    assert main(argv) == 1
    assert "error: prep: split needs --out" in capsys.readouterr().err
    assert manifest_path.read_bytes() == before


def test_prep_split_rejects_unknown_speaker(manifest_path, tmp_path, capsys):
    argv = ["prep", "split", "--manifest", str(manifest_path), "--out", str(tmp_path / "labelled.tsv"),
            "--train-speakers", "Speaker_9", "--test-speakers", "Speaker_3"]
    assert main(argv) == 1
    assert "error: prep:" in capsys.readouterr().err


def test_prep_segment(tmp_path, capsys):
    raw = tmp_path / "raw.txt"
    raw.write_text(SEGMENT_ONE, encoding="utf-8")
    assert main(["prep", "segment", "--input", str(raw), "--target-seconds", "4"]) == 0
    segments = capsys.readouterr().out.splitlines()
    assert len(segments) > 1
    assert " ".join(segments).split()[:3] == ["juu", "ya", "kitanda"]


def test_prep_validate_audio(tmp_path, capsys):
    (tmp_path / "Speaker_1").mkdir()
    (tmp_path / "Speaker_1" / "good.wav").write_bytes(wav_bytes())
    (tmp_path / "Speaker_1" / "bad.wav").write_bytes(wav_bytes(sample_rate=44100))
    assert main(["prep", "validate-audio", "--root", str(tmp_path), "--workers", "2"]) == 1
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("❌ Speaker_1/bad.wav: sample_rate")
    assert out[1] == "✅ Speaker_1/good.wav"


def test_prep_validate_audio_all_good(tmp_path, capsys):
    (tmp_path / "a.wav").write_bytes(wav_bytes())
    assert main(["prep", "validate-audio", "--root", str(tmp_path)]) == 0
    assert capsys.readouterr().out == "✅ a.wav\n"


def test_prep_validate_audio_skips_wav_named_directory(tmp_path, capsys):
    (tmp_path / "good.wav").write_bytes(wav_bytes())
    (tmp_path / "takes.wav").mkdir()
    assert main(["prep", "validate-audio", "--root", str(tmp_path)]) == 0
    assert capsys.readouterr().out == "✅ good.wav\n"


# -------------------------------------------------------------------------
# lm
# -------------------------------------------------------------------------
def test_lm_build_and_ppl(tmp_path, capsys):
    text = tmp_path / "train.txt"
    text.write_text("a b\n", encoding="utf-8")
    model = tmp_path / "model.arpa"
    assert main(["lm", "build", "--input", str(text), "--order", "2", "--smoothing", "mle", "--out", str(model)]) == 0
    assert model.read_text(encoding="utf-8").startswith("# smoothing=mle\n")

    capsys.readouterr()
    assert main(["lm", "ppl", "--input", str(text), "--model", str(model)]) == 0
    assert capsys.readouterr().out == "perplexity 1.0000\n"


def test_lm_ppl_unknown_word(tmp_path, capsys):
    train = tmp_path / "train.txt"
    train.write_text("<s> juu ya </s> (a)\n", encoding="utf-8")
    heldout = tmp_path / "heldout.txt"
    heldout.write_text("juu kitanda\n", encoding="utf-8")
    model = tmp_path / "model.arpa"
    assert main(["lm", "build", "--input", str(train), "--out", str(model), "--unk", "<unk>"]) == 0

    assert main(["lm", "ppl", "--input", str(heldout), "--model", str(model)]) == 1
    assert "error: lm:" in capsys.readouterr().err
    assert main(["lm", "ppl", "--input", str(heldout), "--model", str(model), "--unk", "<unk>"]) == 0
    assert capsys.readouterr().out.startswith("perplexity ")


# -------------------------------------------------------------------------
# score
# -------------------------------------------------------------------------
@pytest.fixture
def transcripts(tmp_path):
    ref = tmp_path / "ref.transcription"
    ref.write_text("<s> juu ya kitanda alilala </s> (u1)\n<s> juu ya kitanda alilala </s> (u2)\n", encoding="utf-8")
    hyp = tmp_path / "hyp.transcription"
    hyp.write_text("<s> juu ya kitanda alilala </s> (u1)\n<s> juu ya kitabu alilala </s> (u2)\n", encoding="utf-8")
    return ref, hyp


def test_score_text(transcripts, capsys):
    ref, hyp = transcripts
    assert main(["score", "--ref", str(ref), "--hyp", str(hyp)]) == 0
    out = capsys.readouterr().out
    assert "WER 12.50" in out
    assert "SER 50.0" in out


def test_score_structured_with_dashboard(transcripts, tmp_path, capsys):
    ref, hyp = transcripts
    dashboard = tmp_path / "dash" / "index.html"
    argv = ["score", "--ref", str(ref), "--hyp", str(hyp), "--format", "structured", "--dashboard", str(dashboard)]
    assert main(argv) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["aggregate"]["WER_percent"] == 12.5
    assert [u["S"] for u in payload["utterances"]] == [0, 1]
    assert dashboard.exists()


def test_score_missing_file(tmp_path, capsys):
    assert main(["score", "--ref", str(tmp_path / "nope"), "--hyp", str(tmp_path / "nope")]) == 1
    assert "error: score:" in capsys.readouterr().err


# -------------------------------------------------------------------------
# pipeline
# -------------------------------------------------------------------------
def _outputs(directory):
    return {name: (directory / name).read_bytes() for name in PIPELINE_FILES}


def test_pipeline_writes_every_trainer_input(manifest_path, tmp_path):
    out = tmp_path / "run"
    assert main(["pipeline", "--manifest", str(manifest_path), "--out-dir", str(out)]) == 0
    for name in PIPELINE_FILES:
        assert (out / name).exists(), name

    dictionary = (out / "dictionary.dic").read_text(encoding="utf-8").splitlines()
    assert "juu JH UU" in dictionary
    assert "kitanda K IH T AH ND AH" in dictionary
    assert "uguzwe UH G UH Z W EH" in dictionary
    assert "nilijizuia N IH L IH JH IH Z UH IH AH" in dictionary

    train = (out / "train.transcription").read_text(encoding="utf-8")
    assert train.startswith("<s> juu ya kitanda alilala mgonjwa ")
    assert train.endswith("<s> mgonjwa uguzwe nilijizuia </s> (0431_swa_segment1)\n")

    config = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert config["scheme"] == "augmented"
    assert config["lm_order"] == 3
    assert config["smoothing"] == "witten-bell"
    assert (config["gaussians"], config["senones"]) == (16, 2500)


def test_pipeline_is_deterministic(manifest_path, tmp_path):
    for run in ("one", "two"):
        assert main(["pipeline", "--manifest", str(manifest_path), "--out-dir", str(tmp_path / run)]) == 0
    assert _outputs(tmp_path / "one") == _outputs(tmp_path / "two")


def test_pipeline_config_reproduces_run(manifest_path, tmp_path):
    first = tmp_path / "first"
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(first), "--order", "2", "--scheme", "basic"]
    assert main(argv) == 0
    assert "kitanda k i t a nd a" in (first / "dictionary.dic").read_text(encoding="utf-8")

    again = tmp_path / "again"
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(again), "--config", str(first / "config.json")]
    assert main(argv) == 0
    assert _outputs(first) == _outputs(again)


def test_pipeline_with_speaker_split(manifest_path, tmp_path):
    out = tmp_path / "run"
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(out),
            "--train-speakers", "Speaker_1", "--test-speakers", "Speaker_2,Speaker_3"]
    assert main(argv) == 0
    assert (out / "train.fileids").read_text(encoding="utf-8") == "Speaker_1/0430_swa_segment1\n"
    config = PipelineConfig.load(out / "config.json")
    assert config.split.test_speakers == ("Speaker_2", "Speaker_3")


@pytest.mark.parametrize(("experiment", "scheme", "gaussians", "senones"), [
    ("1", "basic", 8, 2000),
    ("4", "augmented", 8, 2000),
    ("5b", "augmented", 16, 2500),
])
def test_pipeline_experiment_presets(experiment, scheme, gaussians, senones, manifest_path, tmp_path):
    out = tmp_path / "run"
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(out), "--experiment", experiment]
    assert main(argv) == 0
    config = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert (config["scheme"], config["gaussians"], config["senones"]) == (scheme, gaussians, senones)


def test_pipeline_flags_override_experiment(manifest_path, tmp_path):
    out = tmp_path / "run"
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(out), "--experiment", "1", "--senones", "3000"]
    assert main(argv) == 0
    config = PipelineConfig.load(out / "config.json")
    assert (config.scheme, config.gaussians, config.senones) == (Scheme.BASIC34, 8, 3000)


def test_pipeline_warns_about_overlong_utterances(manifest_path, tmp_path, capsys):
    out = tmp_path / "run"
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(out), "--target-seconds", "10"]
    assert main(argv) == 0
    assert "⚠️ 1 utterances run past 15 s (first: 0430_swa_segment1)" in capsys.readouterr().err
    assert PipelineConfig.load(out / "config.json").target_seconds == 10.0


@pytest.mark.parametrize(("rows", "stage"), [
    ([("a", "S1", "F", "1.0", "train", "juu xylofoni")], "closure"),
    ([("a", "S1", "F", "1.0", "test", "juu ya")], "split"),
    ([("a", "S1", "F", "1.0", "train", "?!")], "prep"),
    ([("a", "S1", "F", "soon", "train", "juu")], "load"),
])
def test_pipeline_names_the_failing_stage(rows, stage, tmp_path, capsys):
    manifest = write_manifest_rows(tmp_path / "manifest.tsv", rows)
    assert main(["pipeline", "--manifest", str(manifest), "--out-dir", str(tmp_path / "out")]) == 1
    assert f"error: {stage}:" in capsys.readouterr().err


def test_pipeline_missing_manifest(tmp_path, capsys):
    assert main(["pipeline", "--manifest", str(tmp_path / "nope.tsv"), "--out-dir", str(tmp_path)]) == 1
    assert "error: load:" in capsys.readouterr().err


# -------------------------------------------------------------------------
# config and closure
# -------------------------------------------------------------------------
def test_config_round_trip():
    cfg = PipelineConfig(
        scheme="alffa",
        lm_order=4,
        smoothing="mle",
        unk_token="<unk>",
        split=SplitConfig(("S1",), ("S2",), (), None, 3),
    )
    assert cfg.scheme is Scheme.ALFFA36
    assert cfg.smoothing is Smoothing.MLE
    assert PipelineConfig.from_dict(json.loads(cfg.to_json())) == cfg


def test_config_rejects_bad_order():
    with pytest.raises(ValueError):
        PipelineConfig(lm_order=6)


def test_config_rejects_unknown_key():
    data = PipelineConfig().to_dict()
    data["lm_ordr"] = data.pop("lm_order")
    with pytest.raises(ValueError, match="unknown config key 'lm_ordr'"):
        PipelineConfig.from_dict(data)


def test_config_rejects_nonpositive_reading_rate():
    with pytest.raises(ValueError):
        PipelineConfig(reading_rate=0)


def test_pipeline_config_file_with_unknown_key(manifest_path, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"lm_ordr": 2}), encoding="utf-8")
    argv = ["pipeline", "--manifest", str(manifest_path), "--out-dir", str(tmp_path / "run"), "--config", str(config)]
    assert main(argv) == 1
    assert "error: pipeline: unknown config key 'lm_ordr'" in capsys.readouterr().err


def test_check_closure():
    lex, _ = build_lexicon(["juu", "ya"], Scheme.AUGMENTED40)
    transcripts = {"train": "<s> juu ya </s> (a)\n", "test": "<s> ya kitanda juu </s> (b)\n"}
    assert check_closure(transcripts, lex) == ["kitanda"]


# -------------------------------------------------------------------------
# alffa-check
# -------------------------------------------------------------------------
class FakeResponse:
    def __init__(self, text):
        self.text = text

    def raise_for_status(self):
        pass


def test_alffa_check(tmp_path, capsys, monkeypatch):
    lexicon = "<UNK> SPN\nalingara a l i GG a r a\nzoya z o y a\nzorah z o r a\n"
    monkeypatch.setattr(fetch_alffa_lexicon.requests, "get", lambda url, **kwargs: FakeResponse(lexicon))
    out = tmp_path / "check.csv"
    assert main(["alffa-check", "--out", str(out)]) == 0
    assert capsys.readouterr().out == "agreement 0.6667 over 3 entries\n"
    assert out.read_text(encoding="utf-8").startswith("word,reference,predicted,agree\n")


def test_alffa_check_html_response_exits_1(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(fetch_alffa_lexicon.requests, "get", lambda url, **kwargs: FakeResponse("<!DOCTYPE html>\n"))
    assert main(["alffa-check", "--out", str(tmp_path / "check.csv")]) == 1
    assert "error: alffa-check: No lexicon entries found." in capsys.readouterr().err
    assert not (tmp_path / "check.csv").exists()
