"""
Corpus preparation: text cleaning and segmentation, the utterance manifest,
file_ids / transcription emission, speaker-disjoint splits and WAV checks.

The manifest is a tab-separated file with a header row:
    utt_id  speaker  gender  path  duration  split  text
"""

import csv
import logging
import math
import random
import re
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path, PurePosixPath
from typing import NamedTuple

import pandas as pd

from errors import PrepError
from g2p import fold_apostrophes

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["utt_id", "speaker", "gender", "path", "duration", "split", "text"]
SPLITS = ("train", "test", "eval")
REQUIRED_SPLITS = ("train", "test")

DEFAULT_READING_RATE = 2.5   # words per second
DEFAULT_TARGET_SECONDS = 20.0
MAX_SEGMENT_FACTOR = 1.5

HEADER_READ_BYTES = 65536

_SENTENCE_END = re.compile(r"[.!?\n]+")
_TRANSCRIPT_LINE = re.compile(r"^(?P<body>.*?)\s*(?:\((?P<utt_id>[^()\s]+)\))?\s*$")


class ManifestError(PrepError):
    def __init__(self, row: int | None, reason: str):
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}{reason}")
        self.row = row


class MissingText(PrepError):
    def __init__(self, utt_id: str):
        super().__init__(f"utterance {utt_id} has no text after normalization")
        self.utt_id = utt_id


class InfeasibleSplit(PrepError):
    pass


class MalformedTranscriptLine(PrepError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


# -------------------------------------------------------------------
# Text cleaning
# -------------------------------------------------------------------
def normalize_text(raw: str) -> str:
    text = fold_apostrophes(raw.lower())
    out = []
    for ch in text:
        if "a" <= ch <= "z":
            out.append(ch)
        elif ch == "'" and "".join(out[-2:]) == "ng":
            out.append(ch)
        else:
            out.append(" ")
    return " ".join("".join(out).split())


def _pieces(words: list[str], max_words: float) -> list[list[str]]:
    # cut an over-long sentence into the fewest near-equal pieces that fit
    n = len(words)
    if n <= max_words:
        return [words]
    k = math.ceil(n / math.floor(max_words))
    bounds = [round(i * n / k) for i in range(k + 1)]
    return [words[bounds[i]:bounds[i + 1]] for i in range(k)]


def split_sentences(text: str, target_seconds: float = DEFAULT_TARGET_SECONDS,
                    words_per_second: float = DEFAULT_READING_RATE) -> list[str]:
    if target_seconds <= 0 or words_per_second <= 0:
        raise ValueError("target_seconds and words_per_second must be positive")

    min_words = target_seconds * words_per_second
    max_words = max(1.0, MAX_SEGMENT_FACTOR * min_words)

    pieces = []
    for sentence in _SENTENCE_END.split(text):
        words = normalize_text(sentence).split()
        if words:
            pieces.extend(_pieces(words, max_words))

    segments = []
    current = []
    for piece in pieces:
        if current and len(current) + len(piece) > max_words:
            segments.append(current)
            current = []
        current = current + piece
        if len(current) >= min_words:
            segments.append(current)
            current = []

    if current:
        # a short tail joins the previous segment when it still fits
        if segments and len(segments[-1]) + len(current) <= max_words:
            segments[-1] = segments[-1] + current
        else:
            segments.append(current)

    return [" ".join(words) for words in segments]


# -------------------------------------------------------------------
# Manifest
# -------------------------------------------------------------------
class Gender(str, Enum):
    F = "F"
    M = "M"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, value: str) -> "Gender":
        value = (value or "").strip().upper()
        return {"F": cls.F, "M": cls.M}.get(value, cls.UNKNOWN)


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    speaker_id: str
    speaker_gender: Gender
    text: str
    audio_path: str
    duration_s: float | None = None

    def __post_init__(self):
        if not self.utt_id or re.search(r"[\s()]", self.utt_id):
            raise ManifestError(None, f"utt_id {self.utt_id!r} must be nonempty without whitespace or parentheses")
        path = PurePosixPath(self.audio_path)
        if path.name != f"{self.utt_id}.wav" or str(path.parent) in ("", "."):
            raise ManifestError(None, f"audio path {self.audio_path!r} must look like <speaker_dir>/{self.utt_id}.wav")

    @property
    def speaker_dir(self) -> str:
        return str(PurePosixPath(self.audio_path).parent)

    @property
    def file_id(self) -> str:
        return f"{self.speaker_dir}/{self.utt_id}"


@dataclass
class CorpusManifest:
    utterances: list[Utterance]
    split_labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for utt in self.utterances:
            if utt.utt_id in seen:
                raise ManifestError(None, f"duplicate utt_id {utt.utt_id}")
            seen.add(utt.utt_id)
        for utt_id, split in self.split_labels.items():
            if utt_id not in seen:
                raise ManifestError(None, f"split label for unknown utterance {utt_id}")
            if split not in SPLITS:
                raise ManifestError(None, f"unknown split {split!r} for {utt_id}")

    def utterances_in(self, split: str | None) -> list[Utterance]:
        if split is None:
            return list(self.utterances)
        return [u for u in self.utterances if self.split_labels.get(u.utt_id) == split]

    def splits_present(self) -> list[str]:
        labels = set(self.split_labels.values())
        return [s for s in SPLITS if s in labels]

    def speakers(self) -> dict[str, Gender]:
        genders = {}
        for utt in self.utterances:
            known = genders.setdefault(utt.speaker_id, utt.speaker_gender)
            if known != utt.speaker_gender:
                raise ManifestError(None, f"speaker {utt.speaker_id} is recorded as both {known.value} and "
                                          f"{utt.speaker_gender.value}")
        return genders

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "utt_id": u.utt_id,
                    "speaker": u.speaker_id,
                    "gender": u.speaker_gender.value,
                    "path": u.audio_path,
                    "duration": "" if u.duration_s is None else f"{u.duration_s:.3f}",
                    "split": self.split_labels.get(u.utt_id, ""),
                    "text": u.text,
                }
                for u in self.utterances
            ],
            columns=MANIFEST_COLUMNS,
        )


def read_manifest(path: str | Path) -> CorpusManifest:
    df = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, quoting=csv.QUOTE_MINIMAL)
    missing = [c for c in ("utt_id", "speaker", "path") if c not in df.columns]
    if missing:
        raise ManifestError(None, f"{path}: missing columns {missing}")

    utterances = []
    labels = {}
    for row_number, row in enumerate(df.to_dict("records"), start=2):  # header is row 1
        duration = row.get("duration", "").strip()
        try:
            utt = Utterance(
                utt_id=row["utt_id"].strip(),
                speaker_id=row["speaker"].strip(),
                speaker_gender=Gender.parse(row.get("gender", "")),
                text=row.get("text", ""),
                audio_path=row["path"].strip(),
                duration_s=float(duration) if duration else None,
            )
        except ManifestError as err:
            raise ManifestError(row_number, str(err)) from err
        except ValueError as err:
            raise ManifestError(row_number, f"bad duration {duration!r}") from err
        utterances.append(utt)
        split = row.get("split", "").strip()
        if split:
            labels[utt.utt_id] = split

    return CorpusManifest(utterances, labels)


def write_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    manifest.to_frame().to_csv(path, sep="\t", index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"✅ Saved {len(manifest.utterances)} utterances to {path}")


# -------------------------------------------------------------------
# file_ids and transcription
# -------------------------------------------------------------------
def emit_file_ids(manifest: CorpusManifest, split: str | None = None) -> str:
    return "".join(f"{u.file_id}\n" for u in manifest.utterances_in(split))


def emit_transcript(manifest: CorpusManifest, split: str | None = None) -> str:
    lines = []
    for utt in manifest.utterances_in(split):
        text = normalize_text(utt.text)
        if not text:
            raise MissingText(utt.utt_id)
        lines.append(f"<s> {text} </s> ({utt.utt_id})\n")
    return "".join(lines)


class TranscriptLine(NamedTuple):
    utt_id: str | None
    text: str


def parse_transcript(text: str, require_ids: bool = False) -> list[TranscriptLine]:
    records = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        match = _TRANSCRIPT_LINE.match(line.strip())
        utt_id = match.group("utt_id")
        if require_ids and utt_id is None:
            raise MalformedTranscriptLine(n, "missing trailing (utt_id)")
        body = match.group("body").replace("<s>", " ").replace("</s>", " ")
        records.append(TranscriptLine(utt_id, normalize_text(body)))
    return records


# -------------------------------------------------------------------
# Speaker splits
# -------------------------------------------------------------------
@dataclass(frozen=True)
class SplitConfig:
    train_speakers: tuple = ()
    test_speakers: tuple = ()
    eval_speakers: tuple = ()
    ratios: tuple | None = None  # (train, test, eval) shares of total duration
    seed: int = 0

    @property
    def explicit(self) -> bool:
        return bool(self.train_speakers or self.test_speakers or self.eval_speakers)

    def speaker_lists(self) -> dict[str, tuple]:
        return {"train": self.train_speakers, "test": self.test_speakers, "eval": self.eval_speakers}


def estimated_duration(utt: Utterance, words_per_second: float = DEFAULT_READING_RATE) -> float:
    if utt.duration_s is not None:
        return utt.duration_s
    return len(normalize_text(utt.text).split()) / words_per_second


def overlong_utterances(manifest: CorpusManifest, target_seconds: float = DEFAULT_TARGET_SECONDS,
                        words_per_second: float = DEFAULT_READING_RATE) -> list[str]:
    limit = MAX_SEGMENT_FACTOR * target_seconds
    return [u.utt_id for u in manifest.utterances if estimated_duration(u, words_per_second) > limit]


def speaker_weights(manifest: CorpusManifest, words_per_second: float | None = None) -> pd.Series:
    if words_per_second is not None:
        weights = {}
        for utt in manifest.utterances:
            weights[utt.speaker_id] = weights.get(utt.speaker_id, 0.0) + estimated_duration(utt, words_per_second)
        return pd.Series(weights, dtype=float)

    df = manifest.to_frame()
    # fall back to utterance counts when any duration is unknown
    if (df["duration"] == "").any():
        return df.groupby("speaker").size().astype(float)
    return df.assign(duration=df["duration"].astype(float)).groupby("speaker")["duration"].sum()


def split_speakers(manifest: CorpusManifest, cfg: SplitConfig,
                   words_per_second: float | None = None) -> CorpusManifest:
    """
    Labels every utterance of a listed or drawn speaker. Ratio splits weigh
    speakers by recorded duration; with words_per_second, missing durations
    are estimated from the word count instead of falling back to counting
    utterances.
    """
    speakers = manifest.speakers()
    assignment = {}

    if cfg.explicit:
        for split, listed in cfg.speaker_lists().items():
            for speaker in listed:
                if speaker in assignment:
                    raise InfeasibleSplit(f"speaker {speaker} is listed for both {assignment[speaker]} and {split}")
                if speaker not in speakers:
                    raise InfeasibleSplit(f"speaker {speaker} ({split}) does not occur in the manifest")
                assignment[speaker] = split
        for split in REQUIRED_SPLITS:
            if not cfg.speaker_lists()[split]:
                raise InfeasibleSplit(f"no speakers given for the {split} split")
    elif cfg.ratios is not None:
        if len(cfg.ratios) != len(SPLITS) or any(r < 0 for r in cfg.ratios) or sum(cfg.ratios) <= 0:
            raise InfeasibleSplit(f"ratios must be three nonnegative shares, got {cfg.ratios}")
        total_share = sum(cfg.ratios)
        shares = [r / total_share for r in cfg.ratios]

        weights = speaker_weights(manifest, words_per_second)
        order = sorted(speakers)
        random.Random(cfg.seed).shuffle(order)
        grand_total = float(weights.sum())
        assigned = [0.0] * len(SPLITS)
        for speaker in order:
            # the split furthest below its target share takes the next speaker
            deficits = [shares[i] * grand_total - assigned[i] if shares[i] > 0 else -math.inf
                        for i in range(len(SPLITS))]
            best = max(range(len(SPLITS)), key=lambda i: (deficits[i], -i))
            assignment[speaker] = SPLITS[best]
            assigned[best] += float(weights[speaker])
    else:
        raise InfeasibleSplit("split config needs speaker lists or ratios")

    labels = {u.utt_id: assignment[u.speaker_id] for u in manifest.utterances if u.speaker_id in assignment}
    return CorpusManifest(list(manifest.utterances), labels)


def split_summary(manifest: CorpusManifest) -> pd.DataFrame:
    df = manifest.to_frame()
    df = df[df["split"] != ""].copy()
    df["duration_s"] = pd.to_numeric(df["duration"], errors="coerce")

    rows = []
    for split in SPLITS:
        part = df[df["split"] == split]
        genders = part.drop_duplicates("speaker")["gender"]
        rows.append({
            "split": split,
            "speakers": int(part["speaker"].nunique()),
            "female": int((genders == Gender.F.value).sum()),
            "male": int((genders == Gender.M.value).sum()),
            "unknown": int((genders == Gender.UNKNOWN.value).sum()),
            "utterances": len(part),
            "duration_s": float(part["duration_s"].sum()),
        })
    return pd.DataFrame(rows)


# -------------------------------------------------------------------
# WAV header checks
# -------------------------------------------------------------------
@dataclass(frozen=True)
class AudioSpec:
    container: str
    channels: int
    bit_depth: int
    sample_rate: int
    byte_order: str
    encoding: str


REQUIRED_AUDIO_SPEC = AudioSpec(
    container="wav", channels=1, bit_depth=16, sample_rate=16000, byte_order="little", encoding="pcm",
)

FORMAT_TAGS = {1: "pcm", 3: "ieee_float", 6: "alaw", 7: "mulaw"}
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavProblem(NamedTuple):
    code: str  # not_riff | not_wave | no_fmt_chunk | mismatch | unreadable
    field: str = ""
    expected: object = None
    found: object = None

    def __str__(self) -> str:
        if self.code == "mismatch":
            return f"{self.field}: {self.expected}≠{self.found}"
        return self.code if self.found is None else f"{self.code} (found {self.found!r})"


@dataclass
class WavCheck:
    spec: AudioSpec | None
    problems: list[WavProblem]
    duration_s: float | None = None

    @property
    def accepted(self) -> bool:
        return self.spec is not None and not self.problems

    def mismatched_fields(self) -> set[str]:
        return {p.field for p in self.problems if p.code == "mismatch"}


def _read_spec(fmt: bytes, endian: str) -> AudioSpec:
    tag, channels, sample_rate, _byte_rate, _block_align, bits = struct.unpack(endian + "HHIIHH", fmt[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        # sub-format GUID starts at offset 24, its first two bytes are the real tag
        tag = struct.unpack(endian + "H", fmt[24:26])[0]
    return AudioSpec(
        container="wav",
        channels=channels,
        bit_depth=bits,
        sample_rate=sample_rate,
        byte_order="little" if endian == "<" else "big",
        encoding=FORMAT_TAGS.get(tag, f"tag_{tag}"),
    )


def validate_wav(header_bytes: bytes) -> WavCheck:
    magic = header_bytes[:4]
    if magic not in (b"RIFF", b"RIFX"):
        return WavCheck(None, [WavProblem("not_riff", found=magic)])
    if header_bytes[8:12] != b"WAVE":
        return WavCheck(None, [WavProblem("not_wave", found=header_bytes[8:12])])
    endian = "<" if magic == b"RIFF" else ">"

    spec = None
    data_size = None
    offset = 12
    while offset + 8 <= len(header_bytes):
        chunk_id = header_bytes[offset:offset + 4]
        chunk_size = struct.unpack(endian + "I", header_bytes[offset + 4:offset + 8])[0]
        body = header_bytes[offset + 8:offset + 8 + chunk_size]
        if chunk_id == b"fmt " and len(body) >= 16:
            spec = _read_spec(body, endian)
        elif chunk_id == b"data":
            data_size = chunk_size
            break
        offset += 8 + chunk_size + (chunk_size % 2)  # chunks are word aligned

    if spec is None:
        return WavCheck(None, [WavProblem("no_fmt_chunk")])

    problems = [
        WavProblem("mismatch", name, getattr(REQUIRED_AUDIO_SPEC, name), getattr(spec, name))
        for name in ("encoding", "channels", "sample_rate", "bit_depth", "byte_order")
        if getattr(spec, name) != getattr(REQUIRED_AUDIO_SPEC, name)
    ]

    duration = None
    bytes_per_second = spec.sample_rate * spec.channels * spec.bit_depth // 8
    if data_size is not None and bytes_per_second > 0:
        duration = data_size / bytes_per_second
    return WavCheck(spec, problems, duration)


def validate_wav_file(path: str | Path) -> WavCheck:
    with open(path, "rb") as f:
        return validate_wav(f.read(HEADER_READ_BYTES))


def _check_or_unreadable(path: Path) -> WavCheck:
    try:
        return validate_wav_file(path)
    except OSError as err:
        return WavCheck(None, [WavProblem("unreadable", found=str(err))])


def validate_audio_tree(root: str | Path, workers: int = 4) -> pd.DataFrame:
    root = Path(root)
    paths = sorted(p for p in root.rglob("*.wav") if p.is_file())
    with ThreadPoolExecutor(max_workers=workers) as pool:
        checks = list(pool.map(_check_or_unreadable, paths))

    return pd.DataFrame(
        [
            {
                "path": path.relative_to(root).as_posix(),
                "ok": check.accepted,
                "duration_s": check.duration_s,
                "problems": "; ".join(str(p) for p in check.problems),
            }
            for path, check in zip(paths, checks)
        ],
        columns=["path", "ok", "duration_s", "problems"],
    )


def main():
    # python corpus.py manifest.tsv
    print(split_summary(read_manifest(sys.argv[1])).to_string(index=False))


if __name__ == "__main__":
    main()
