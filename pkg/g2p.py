"""
Rule-based grapheme-to-phoneme conversion for Kiswahili words.

Words are segmented left to right by greedy longest match against the
scheme's graphemes (length 3, then 2, then 1) and each segment is looked up
in the inventory. There are no context rules beyond the inventory itself.
"""

import re
import sys
from dataclasses import dataclass

from errors import PrepError
from phoneset import MAX_GRAPHEME_LENGTH, PhoneInventory, Scheme, inventory

# typographic apostrophes folded to U+0027
APOSTROPHES = {"‘": "'", "’": "'", "ʼ": "'"}

_NOT_WORD_CHAR = re.compile(r"[^a-z']")
_NORMALIZED_WORD = re.compile(r"^(?:[a-z]|(?<=ng)')+$")


class EmptyAfterNormalization(PrepError):
    def __init__(self, raw: str):
        super().__init__(f"nothing left of {raw!r} after normalization (not a word)")
        self.raw = raw


class UnknownGrapheme(PrepError):
    def __init__(self, word: str, position: int, scheme: Scheme):
        super().__init__(
            f"no {Scheme(scheme).value} grapheme matches {word[position:]!r} "
            f"at position {position} of {word!r}"
        )
        self.word = word
        self.position = position
        self.scheme = scheme


class UnknownPhone(PrepError):
    def __init__(self, symbol: str, scheme: Scheme, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}phone {symbol!r} is not in the {Scheme(scheme).value} inventory")
        self.symbol = symbol
        self.scheme = scheme
        self.line = line


@dataclass(frozen=True)
class PhoneSequence:
    scheme: Scheme
    phones: tuple

    def __str__(self) -> str:
        return " ".join(self.phones)

    def __len__(self) -> int:
        return len(self.phones)

    def __iter__(self):
        return iter(self.phones)


def fold_apostrophes(text: str) -> str:
    for typographic, plain in APOSTROPHES.items():
        text = text.replace(typographic, plain)
    return text


def is_normalized(text: str) -> bool:
    return bool(_NORMALIZED_WORD.match(text))


def normalize_word(raw: str) -> str:
    text = fold_apostrophes(raw.strip().lower())
    text = _NOT_WORD_CHAR.sub("", text)

    # keep an apostrophe only when it closes "ng'"
    out = []
    for ch in text:
        if ch == "'" and "".join(out[-2:]) != "ng":
            continue
        out.append(ch)

    word = "".join(out)
    if not word:
        raise EmptyAfterNormalization(raw)
    return word


def _segment(word: str, inv: PhoneInventory) -> list[str]:
    forms = inv.surface_forms
    segments = []
    i = 0
    while i < len(word):
        for length in range(MAX_GRAPHEME_LENGTH, 0, -1):
            piece = word[i:i + length]
            if len(piece) == length and piece in forms:
                segments.append(piece)
                i += length
                break
        else:
            raise UnknownGrapheme(word, i, inv.scheme)
    return segments


def segment_graphemes(word: str, scheme: Scheme | str) -> list[str]:
    return _segment(word, inventory(scheme))


def phonemize(word: str, scheme: Scheme | str) -> PhoneSequence:
    inv = inventory(scheme)
    phones = tuple(inv.phone_of(inv.surface_forms[seg]) for seg in _segment(word, inv))
    return PhoneSequence(inv.scheme, phones)


def canonical_spelling(word: str, scheme: Scheme | str) -> str:
    inv = inventory(scheme)
    return "".join(inv.surface_forms[seg] for seg in _segment(word, inv))


def detokenize(phones: PhoneSequence) -> str:
    inv = inventory(phones.scheme)
    graphemes = []
    for symbol in phones.phones:
        if symbol not in inv.phone_to_grapheme:
            raise UnknownPhone(symbol, inv.scheme)
        graphemes.append(inv.grapheme_of(symbol))
    return "".join(graphemes)


def parse_phones(text: str, scheme: Scheme | str, line: int | None = None) -> PhoneSequence:
    inv = inventory(scheme)
    phones = tuple(text.split())
    for symbol in phones:
        if symbol not in inv.phone_to_grapheme:
            raise UnknownPhone(symbol, inv.scheme, line)
    return PhoneSequence(inv.scheme, phones)


def main():
    # python g2p.py augmented chakula ng'ombe ...
    scheme = Scheme(sys.argv[1]) if len(sys.argv) > 1 else Scheme.AUGMENTED40
    for raw in sys.argv[2:]:
        word = normalize_word(raw)
        print(f"{word}\t{phonemize(word, scheme)}")


if __name__ == "__main__":
    main()
