"""
Pronunciation dictionary, filler dictionary and phone list for the trainer.

File formats (UTF-8, LF line endings, trailing LF):
  dictionary.dic  <word> <phone> <phone> ...    sorted by word codepoints
  fillers.fil     <s> SIL / </s> SIL / <sil> SIL
  phones.lst      one phone per line, sorted, SIL included
"""

import logging
import sys
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

from errors import PrepError
from g2p import (
    EmptyAfterNormalization,
    PhoneSequence,
    UnknownGrapheme,
    is_normalized,
    normalize_word,
    parse_phones,
    phonemize,
)
from phoneset import SILENCE_PHONE, Scheme

logger = logging.getLogger(__name__)

DICTIONARY_FILE = "dictionary.dic"
FILLER_FILE = "fillers.fil"
PHONE_LIST_FILE = "phones.lst"

FILLER_WORDS = ("<s>", "</s>", "<sil>")


class MalformedLine(PrepError):
    def __init__(self, line: int, reason: str = "expected '<word> <phones>'"):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class LexiconEntry(NamedTuple):
    word: str
    pronunciation: PhoneSequence


class Reject(NamedTuple):
    word: str
    position: int


@dataclass(frozen=True)
class Lexicon:
    scheme: Scheme
    entries: tuple = ()
    fillers: tuple = FILLER_WORDS

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def index(self) -> dict[str, PhoneSequence]:
        return {e.word: e.pronunciation for e in self.entries}

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def words(self) -> set[str]:
        return set(self.index)

    def lookup(self, word: str) -> PhoneSequence | None:
        return self.index.get(word)


def phones_used(lex: Lexicon) -> set[str]:
    return {phone for entry in lex.entries for phone in entry.pronunciation}


def build_lexicon(words: list[str], scheme: Scheme | str) -> tuple[Lexicon, list[Reject]]:
    scheme = Scheme(scheme)
    pronunciations = {}
    rejects = []
    rejected = set()

    for raw in words:
        try:
            word = normalize_word(raw)
        except EmptyAfterNormalization:
            continue
        if word in pronunciations or word in rejected:
            continue
        try:
            pronunciations[word] = phonemize(word, scheme)
        except UnknownGrapheme as err:
            logger.warning(f"⚠️ {err}")
            rejects.append(Reject(word, err.position))
            rejected.add(word)

    entries = tuple(LexiconEntry(w, pronunciations[w]) for w in sorted(pronunciations))
    return Lexicon(scheme, entries), rejects


# -------------------------------------------------------------------
# Emitters
# -------------------------------------------------------------------
def emit_dictionary(lex: Lexicon) -> str:
    return "".join(f"{e.word} {e.pronunciation}\n" for e in lex.entries)


def emit_filler_dictionary() -> str:
    return "".join(f"{word} {SILENCE_PHONE}\n" for word in FILLER_WORDS)


def emit_phone_list(lex: Lexicon) -> str:
    phones = sorted(phones_used(lex) | {SILENCE_PHONE})
    return "".join(f"{phone}\n" for phone in phones)


# -------------------------------------------------------------------
# Parser (for dictionaries edited outside the toolkit)
# -------------------------------------------------------------------
def parse_dictionary(text: str, scheme: Scheme | str = Scheme.AUGMENTED40,
                     allow_silence: bool = False) -> Lexicon:
    scheme = Scheme(scheme)
    entries = {}
    fillers = []

    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(maxsplit=1)
        if len(parts) < 2:
            raise MalformedLine(n)
        word, phones = parts

        if allow_silence and phones.split() == [SILENCE_PHONE]:
            fillers.append(word)
            continue
        if not is_normalized(word):
            raise MalformedLine(n, f"{word!r} is not a normalized word")
        if word in entries:
            raise MalformedLine(n, f"duplicate word {word!r}")
        entries[word] = parse_phones(phones, scheme, line=n)

    return Lexicon(
        scheme,
        tuple(LexiconEntry(w, entries[w]) for w in sorted(entries)),
        tuple(fillers) if allow_silence else FILLER_WORDS,
    )


def main():
    # python lexicon.py augmented words.txt > dictionary.dic
    scheme = Scheme(sys.argv[1])
    with open(sys.argv[2], encoding="utf-8") as f:
        lex, _ = build_lexicon(f.read().split(), scheme)
    print(emit_dictionary(lex), end="")


if __name__ == "__main__":
    main()
