"""
Word error rate (WER) and sentence error rate (SER) between reference and
hypothesis transcripts.

Words are aligned by unit-cost Levenshtein distance. When several minimal
alignments exist the backtrace prefers match, then substitution, then
deletion, then insertion. Corpus WER is pooled: total errors over total
reference words.
"""

import json
import logging
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import pandas as pd

from corpus import normalize_text, parse_transcript
from errors import PrepError

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ["utt_id", "S", "D", "I", "N_ref", "errors", "wer"]
NOT_AVAILABLE = "n/a"


class DuplicateUttId(PrepError):
    def __init__(self, utt_id: str):
        super().__init__(f"utterance id {utt_id!r} appears more than once")
        self.utt_id = utt_id


class MalformedReport(PrepError):
    pass


# -------------------------------------------------------------------
# Alignment
# -------------------------------------------------------------------
class OpKind(str, Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE = "delete"
    INSERT = "insert"


class AlignOp(NamedTuple):
    kind: OpKind
    ref: str | None
    hyp: str | None


@dataclass(frozen=True)
class Alignment:
    ops: tuple = ()

    def _count(self, kind: OpKind) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def S(self) -> int:
        return self._count(OpKind.SUBSTITUTE)

    @property
    def D(self) -> int:
        return self._count(OpKind.DELETE)

    @property
    def I(self) -> int:  # noqa: E743
        return self._count(OpKind.INSERT)

    @property
    def M(self) -> int:
        return self._count(OpKind.MATCH)

    @property
    def errors(self) -> int:
        return self.S + self.D + self.I

    def ref_words(self) -> list[str]:
        return [op.ref for op in self.ops if op.kind != OpKind.INSERT]

    def hyp_words(self) -> list[str]:
        return [op.hyp for op in self.ops if op.kind != OpKind.DELETE]


def _distance_matrix(ref: list[str], hyp: list[str]) -> list[list[int]]:
    d = [[0] * (len(hyp) + 1) for _ in range(len(ref) + 1)]
    for i in range(1, len(ref) + 1):
        d[i][0] = i
    for j in range(1, len(hyp) + 1):
        d[0][j] = j
    for i in range(1, len(ref) + 1):
        for j in range(1, len(hyp) + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            d[i][j] = min(d[i - 1][j - 1] + cost, d[i - 1][j] + 1, d[i][j - 1] + 1)
    return d


def align(ref, hyp) -> Alignment:
    ref, hyp = list(ref), list(hyp)
    d = _distance_matrix(ref, hyp)

    ops = []
    i, j = len(ref), len(hyp)
    while i > 0 or j > 0:
        here = d[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and here == d[i - 1][j - 1]:
            ops.append(AlignOp(OpKind.MATCH, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and here == d[i - 1][j - 1] + 1:
            ops.append(AlignOp(OpKind.SUBSTITUTE, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and here == d[i - 1][j] + 1:
            ops.append(AlignOp(OpKind.DELETE, ref[i - 1], None))
            i -= 1
        else:
            ops.append(AlignOp(OpKind.INSERT, None, hyp[j - 1]))
            j -= 1

    ops.reverse()
    return Alignment(tuple(ops))


# -------------------------------------------------------------------
# Corpus scoring
# -------------------------------------------------------------------
@dataclass(frozen=True)
class UtteranceScore:
    utt_id: str
    alignment: Alignment
    N_ref: int

    @property
    def S(self) -> int:
        return self.alignment.S

    @property
    def D(self) -> int:
        return self.alignment.D

    @property
    def I(self) -> int:  # noqa: E743
        return self.alignment.I

    @property
    def errors(self) -> int:
        return self.alignment.errors

    @property
    def wer(self) -> float | None:
        return 100.0 * self.errors / self.N_ref if self.N_ref else None

    def record(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "S": self.S,
            "D": self.D,
            "I": self.I,
            "N_ref": self.N_ref,
            "errors": self.errors,
            "wer": self.wer,
        }


@dataclass(frozen=True)
class ScoreReport:
    utterances: tuple = ()

    @property
    def total_S(self) -> int:
        return sum(u.S for u in self.utterances)

    @property
    def total_D(self) -> int:
        return sum(u.D for u in self.utterances)

    @property
    def total_I(self) -> int:
        return sum(u.I for u in self.utterances)

    @property
    def total_N(self) -> int:
        return sum(u.N_ref for u in self.utterances)

    @property
    def total_errors(self) -> int:
        return self.total_S + self.total_D + self.total_I

    @property
    def sentences(self) -> int:
        return len(self.utterances)

    @property
    def sentences_with_error(self) -> int:
        return sum(1 for u in self.utterances if u.errors > 0)

    @property
    def WER_percent(self) -> float | None:
        return 100.0 * self.total_errors / self.total_N if self.total_N else None

    @property
    def SER_percent(self) -> float | None:
        return 100.0 * self.sentences_with_error / self.sentences if self.sentences else None

    def aggregate(self) -> dict:
        return {
            "total_S": self.total_S,
            "total_D": self.total_D,
            "total_I": self.total_I,
            "total_N": self.total_N,
            "WER_percent": self.WER_percent,
            "sentences": self.sentences,
            "sentences_with_error": self.sentences_with_error,
            "SER_percent": self.SER_percent,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([u.record() for u in self.utterances], columns=SCORE_COLUMNS)


def _words(text) -> list[str]:
    return normalize_text(text).split() if isinstance(text, str) else list(text)


def score_corpus(pairs) -> ScoreReport:
    """
    pairs: iterable of (utt_id, ref, hyp). ref/hyp are raw strings (normalized
    here) or ready token lists.
    """
    seen = set()
    scores = []
    for utt_id, ref, hyp in pairs:
        if utt_id in seen:
            raise DuplicateUttId(utt_id)
        seen.add(utt_id)
        ref_words = _words(ref)
        scores.append(UtteranceScore(utt_id, align(ref_words, _words(hyp)), len(ref_words)))
    return ScoreReport(tuple(scores))


def pair_transcripts(ref_text: str, hyp_text: str) -> list[tuple[str, str, str]]:
    """Pair two transcription files by utterance id, in reference order."""
    refs = {}
    for line in parse_transcript(ref_text, require_ids=True):
        if line.utt_id in refs:
            raise DuplicateUttId(line.utt_id)
        refs[line.utt_id] = line.text

    hyps = {}
    for line in parse_transcript(hyp_text, require_ids=True):
        if line.utt_id in hyps:
            raise DuplicateUttId(line.utt_id)
        if line.utt_id not in refs:
            logger.warning(f"⚠️ hypothesis {line.utt_id} has no reference, ignored")
            continue
        hyps[line.utt_id] = line.text

    for utt_id in refs:
        if utt_id not in hyps:
            logger.warning(f"⚠️ no hypothesis for {utt_id}, scored as all deletions")
    return [(utt_id, text, hyps.get(utt_id, "")) for utt_id, text in refs.items()]


# -------------------------------------------------------------------
# Rendering
# -------------------------------------------------------------------
def _percent(value: float | None, decimals: int) -> str:
    return NOT_AVAILABLE if value is None else f"{value:.{decimals}f}"


def render_report(report: ScoreReport, format: str = "text") -> str:
    if format == "structured":
        payload = {"aggregate": report.aggregate(), "utterances": [u.record() for u in report.utterances]}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")

    lines = [
        f"sentences {report.sentences}",
        f"sentences with error {report.sentences_with_error}",
        f"words {report.total_N}",
        f"errors {report.total_errors} (S={report.total_S} D={report.total_D} I={report.total_I})",
        f"WER {_percent(report.WER_percent, 2)}",
        f"SER {_percent(report.SER_percent, 1)}",
    ]
    return "\n".join(lines) + "\n"


def parse_structured_report(text: str) -> dict:
    try:
        payload = json.loads(text)
        aggregate = payload["aggregate"]
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise MalformedReport(f"not a structured score report: {err}") from None
    missing = set(ScoreReport().aggregate()) - set(aggregate)
    if missing:
        raise MalformedReport(f"aggregate is missing {sorted(missing)}")
    return aggregate


def main():
    # python scorer.py ref.transcription hyp.transcription
    ref_path, hyp_path = sys.argv[1], sys.argv[2]
    pairs = pair_transcripts(Path(ref_path).read_text(encoding="utf-8"), Path(hyp_path).read_text(encoding="utf-8"))
    print(render_report(score_corpus(pairs)), end="")


if __name__ == "__main__":
    main()
