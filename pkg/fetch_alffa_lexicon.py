import logging
import sys

import pandas as pd
import requests

from errors import PrepError
from g2p import EmptyAfterNormalization, UnknownGrapheme, normalize_word, phonemize
from phoneset import Scheme

logger = logging.getLogger(__name__)

URL = "https://raw.githubusercontent.com/getalp/ALFFA_PUBLIC/master/ASR/SWAHILI/lang/lexicon.txt"
RAW_OUTPUT = "alffa_lexicon_check.csv"
TIMEOUT_S = 60


class EmptyLexicon(PrepError):
    pass


headers = {
    "User-Agent": (
        "Mozilla/5.0 (Windows NT 10.0; Win64; x64) "
        "AppleWebKit/537.36 (KHTML, like Gecko) "
        "Chrome/122.0.0.0 Safari/537.36"
    )
}


def fetch_lexicon_text(url: str = URL) -> str:
    resp = requests.get(url, headers=headers, timeout=TIMEOUT_S)
    resp.raise_for_status()
    return resp.text


def parse_alffa_lexicon(text: str) -> list[tuple[str, str]]:
    # "<word> <phone> <phone> ..."; <UNK>, <sil> and friends are not words
    entries = []
    for line in text.splitlines():
        parts = line.split()
        if len(parts) < 2 or parts[0].startswith("<"):
            continue
        entries.append((parts[0], " ".join(parts[1:])))

    if not entries:
        raise EmptyLexicon("No lexicon entries found.")
    return entries


def compare_with_alffa(entries: list[tuple[str, str]]) -> pd.DataFrame:
    rows = []
    for word, reference in entries:
        try:
            predicted = str(phonemize(normalize_word(word), Scheme.ALFFA36))
        except (EmptyAfterNormalization, UnknownGrapheme) as err:
            logger.debug(f"{word}: {err}")
            predicted = ""
        rows.append({"word": word, "reference": reference, "predicted": predicted, "agree": predicted == reference})
    return pd.DataFrame(rows, columns=["word", "reference", "predicted", "agree"])


def agreement_rate(df: pd.DataFrame) -> float:
    return float(df["agree"].mean()) if len(df) else 0.0


def check_alffa(url: str = URL, out_path: str = RAW_OUTPUT) -> pd.DataFrame:
    df = compare_with_alffa(parse_alffa_lexicon(fetch_lexicon_text(url)))
    df.to_csv(out_path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info(f"✅ Saved {len(df)} ALFFA entries to {out_path}")
    logger.info(f"Alffa36 agrees with the ALFFA lexicon on {agreement_rate(df):.1%} of entries")
    return df


def main():
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    check_alffa(url=sys.argv[1] if len(sys.argv) > 1 else URL)


if __name__ == "__main__":
    main()
