"""
Kiswahili phone inventories used for the pronunciation dictionaries.

Three schemes are compiled in:
  basic     - 29 consonants + 5 vowels, every phone spelled like its grapheme
  alffa     - 23 single letters + 13 doubled-uppercase digraph phones
  augmented - 30 consonants + 10 short/long vowels, CMU-style uppercase phones

The inventories are fixed linguistic facts, not configuration.
"""

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import NamedTuple

SILENCE_PHONE = "SIL"
MAX_GRAPHEME_LENGTH = 3  # only "ng'"

_GRAPHEME_CHARS = re.compile(r"^[a-z']+$")


class Scheme(str, Enum):
    BASIC34 = "basic"
    ALFFA36 = "alffa"
    AUGMENTED40 = "augmented"


EXPECTED_SIZES = {
    Scheme.BASIC34: 34,
    Scheme.ALFFA36: 36,
    Scheme.AUGMENTED40: 40,
}


@dataclass(frozen=True)
class PhoneInventory:
    scheme: Scheme
    entries: tuple  # ((grapheme, phone), ...)
    silence_phone: str = SILENCE_PHONE
    # surface spelling -> canonical grapheme, never part of the inventory proper
    spelling_variants: tuple = ()

    @cached_property
    def grapheme_to_phone(self) -> dict[str, str]:
        return dict(self.entries)

    @cached_property
    def phone_to_grapheme(self) -> dict[str, str]:
        return {phone: grapheme for grapheme, phone in self.entries}

    @cached_property
    def surface_forms(self) -> dict[str, str]:
        # every spelling segment_graphemes may match, mapped to its canonical grapheme
        forms = {grapheme: grapheme for grapheme, _ in self.entries}
        forms.update(dict(self.spelling_variants))
        return forms

    @property
    def graphemes(self) -> list[str]:
        return [g for g, _ in self.entries]

    @property
    def phones(self) -> list[str]:
        return [p for _, p in self.entries]

    def phone_of(self, grapheme: str) -> str:
        return self.grapheme_to_phone[grapheme]

    def grapheme_of(self, phone: str) -> str:
        return self.phone_to_grapheme[phone]

    def __len__(self) -> int:
        return len(self.entries)


# -------------------------------------------------------------------
# basic: Nchimbi's 29 consonants (word-initial examples in the comments) + 5 vowels
# -------------------------------------------------------------------
_BASIC_CONSONANTS = [
    "b",    # bora
    "ch",   # chakula
    "d",    # dada
    "dh",   # dhambi
    "f",    # fua
    "g",    # gari
    "gh",   # ghala
    "h",    # haraka
    "j",    # jana
    "k",    # kata
    "l",    # ladha
    "m",    # mkate
    "mb",   # mboga
    "n",    # nina
    "nd",   # ndoo
    "ng",   # ngoma
    "ng'",  # ng'ombe
    "nj",   # vunja
    "ny",   # nyanya
    "p",    # paka
    "r",    # ramba
    "s",    # sasa
    "sh",   # shamba
    "t",    # tena
    "th",   # thamani
    "v",    # vaa
    "w",    # weka
    "y",    # yai
    "z",    # zaa
]
_VOWELS = ["a", "e", "i", "o", "u"]

BASIC34 = PhoneInventory(
    scheme=Scheme.BASIC34,
    entries=tuple((g, g) for g in _BASIC_CONSONANTS + _VOWELS),
)

# -------------------------------------------------------------------
# alffa: doubled phones for digraphs, the rest spelled as single letters.
# BB CC DD GG NN SS ZZ are attested in ALFFA sample words; JJ TT LL RR VV XX
# are assigned by elimination and kept together here so they are easy to fix.
# -------------------------------------------------------------------
_ALFFA_DIGRAPHS = [
    ("mb", "BB"),
    ("ch", "CC"),
    ("nd", "DD"),
    ("ng", "GG"),
    ("nj", "JJ"),
    ("dh", "LL"),
    ("ng'", "NN"),
    ("gh", "RR"),
    ("sh", "SS"),
    ("th", "TT"),
    ("mv", "VV"),
    ("kh", "XX"),
    ("nz", "ZZ"),
]
_ALFFA_LETTERS = list("abdefghijklmnoprstuvwyz")

ALFFA36 = PhoneInventory(
    scheme=Scheme.ALFFA36,
    entries=tuple(_ALFFA_DIGRAPHS) + tuple((g, g) for g in _ALFFA_LETTERS),
    # "alinggara" is transcribed with NN in the ALFFA samples
    spelling_variants=(("ngg", "ng'"),),
)

# -------------------------------------------------------------------
# augmented: the 40-phone set written to the phone list
# -------------------------------------------------------------------
AUGMENTED40 = PhoneInventory(
    scheme=Scheme.AUGMENTED40,
    entries=(
        ("a", "AH"),
        ("aa", "AA"),
        ("b", "B"),
        ("ch", "CH"),
        ("d", "D"),
        ("dh", "DH"),
        ("e", "EH"),
        ("ee", "EE"),
        ("f", "F"),
        ("g", "G"),
        ("gh", "GH"),
        ("h", "HH"),
        ("i", "IH"),
        ("ii", "II"),
        ("j", "JH"),
        ("k", "K"),
        ("kh", "KH"),
        ("l", "L"),
        ("m", "M"),
        ("mb", "MB"),
        ("n", "N"),
        ("ng", "NG"),
        ("ng'", "NG'"),
        ("nd", "ND"),
        ("ny", "NY"),
        ("nj", "NJ"),
        ("o", "OH"),
        ("oo", "OO"),
        ("p", "P"),
        ("r", "R"),
        ("s", "S"),
        ("sh", "SH"),
        ("t", "T"),
        ("th", "TH"),
        ("u", "UH"),
        ("uu", "UU"),
        ("v", "V"),
        ("w", "W"),
        ("y", "Y"),
        ("z", "Z"),
    ),
)

_INVENTORIES = {
    Scheme.BASIC34: BASIC34,
    Scheme.ALFFA36: ALFFA36,
    Scheme.AUGMENTED40: AUGMENTED40,
}


def inventory(scheme: Scheme | str) -> PhoneInventory:
    return _INVENTORIES[Scheme(scheme)]


# -------------------------------------------------------------------
# Validation
# -------------------------------------------------------------------
class InventoryProblem(NamedTuple):
    kind: str  # duplicate_phone | duplicate_grapheme | size_mismatch | illegal_grapheme | illegal_phone
    detail: str


@dataclass
class ValidationReport:
    problems: list[InventoryProblem]

    @property
    def ok(self) -> bool:
        return not self.problems

    def kinds(self) -> set[str]:
        return {p.kind for p in self.problems}

    def __len__(self) -> int:
        return len(self.problems)


def _legal_grapheme(grapheme: str) -> bool:
    if not grapheme or len(grapheme) > MAX_GRAPHEME_LENGTH:
        return False
    if not _GRAPHEME_CHARS.match(grapheme):
        return False
    # apostrophe only directly after "ng"
    return all(grapheme[max(0, i - 2):i] == "ng" for i, ch in enumerate(grapheme) if ch == "'")


def _duplicates(items: list[str]) -> list[str]:
    seen, dups = set(), []
    for item in items:
        if item in seen and item not in dups:
            dups.append(item)
        seen.add(item)
    return dups


def validate_inventory(inv: PhoneInventory) -> ValidationReport:
    problems = []

    for phone in _duplicates(inv.phones):
        owners = [g for g, p in inv.entries if p == phone]
        problems.append(InventoryProblem(
            "duplicate_phone", f"phone {phone!r} is shared by graphemes {owners} (map is not injective)"))

    for grapheme in _duplicates(inv.graphemes):
        problems.append(InventoryProblem("duplicate_grapheme", f"grapheme {grapheme!r} is listed more than once"))

    expected = EXPECTED_SIZES[Scheme(inv.scheme)]
    if len(inv.entries) != expected:
        problems.append(InventoryProblem(
            "size_mismatch", f"{Scheme(inv.scheme).value} expects {expected} entries, found {len(inv.entries)}"))

    for grapheme in inv.graphemes:
        if not _legal_grapheme(grapheme):
            problems.append(InventoryProblem("illegal_grapheme", f"grapheme {grapheme!r}"))

    for phone in inv.phones:
        if not phone or any(ch.isspace() for ch in phone) or phone == inv.silence_phone:
            problems.append(InventoryProblem("illegal_phone", f"phone {phone!r}"))

    return ValidationReport(problems)


def main():
    for scheme in Scheme:
        inv = inventory(scheme)
        report = validate_inventory(inv)
        status = "✅" if report.ok else "❌"
        print(f"{status} {scheme.value}: {len(inv)} phones {' '.join(inv.phones)}")
        for problem in report.problems:
            print(f"   {problem.kind}: {problem.detail}")


if __name__ == "__main__":
    main()
