"""
Backoff n-gram language model over transcripts: counting, Witten-Bell (or
MLE) estimation, ARPA text emission/parsing and perplexity.

Sentences are padded with order-1 leading <s> and one trailing </s>.
<s> is only ever a context: it is counted but never predicted, and it sits
in the ARPA unigrams with log10 probability -99 the way SRILM writes it.
"""

import logging
import math
import re
import sys
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from errors import PrepError

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
LOG10_ZERO = -99.0
DEFAULT_ORDER = 3
MAX_ORDER = 5
ARPA_DECIMALS = 6

_SMOOTHING_LINE = re.compile(r"smoothing=(\S+)")
_NGRAM_HEADER = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION = re.compile(r"^\\(\d+)-grams:$")


class Smoothing(str, Enum):
    WITTEN_BELL = "witten-bell"
    MLE = "mle"


class LmError(PrepError):
    pass


class EmptyCounts(LmError):
    def __init__(self):
        super().__init__("no n-gram events to estimate from")


class MalformedHeader(LmError):
    pass


class SectionCountMismatch(LmError):
    def __init__(self, order: int, declared: int, found: int):
        super().__init__(f"\\data\\ declares ngram {order}={declared} but the section has {found} entries")
        self.order = order
        self.declared = declared
        self.found = found


class MalformedEntry(LmError):
    def __init__(self, line: int, text: str):
        super().__init__(f"line {line}: malformed n-gram entry {text!r}")
        self.line = line


class UnknownToken(LmError):
    def __init__(self, token: str):
        super().__init__(f"token {token!r} is not in the model vocabulary")
        self.token = token


# -------------------------------------------------------------------
# Counting
# -------------------------------------------------------------------
@dataclass
class NgramCounts:
    order: int
    tables: list[Counter]  # tables[k-1]: k-gram tuple -> count
    vocabulary: frozenset = frozenset()


def _tokens(sentence) -> list[str]:
    return sentence.split() if isinstance(sentence, str) else list(sentence)


def count_ngrams(sentences, order: int = DEFAULT_ORDER) -> NgramCounts:
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    tables = [Counter() for _ in range(order)]
    vocabulary = set()

    for sentence in sentences:
        tokens = _tokens(sentence)
        padded = [BOS] * (order - 1) + tokens + [EOS]
        vocabulary.update(tokens)
        vocabulary.update((BOS, EOS))
        for k in range(1, order + 1):
            table = tables[k - 1]
            for i in range(len(padded) - k + 1):
                table[tuple(padded[i:i + k])] += 1

    return NgramCounts(order, tables, frozenset(vocabulary))


def merge_counts(a: NgramCounts, b: NgramCounts) -> NgramCounts:
    if a.order != b.order:
        raise ValueError(f"cannot merge order {a.order} counts with order {b.order}")
    return NgramCounts(a.order, [ta + tb for ta, tb in zip(a.tables, b.tables)], a.vocabulary | b.vocabulary)


def _events(counts: NgramCounts, k: int) -> dict[tuple, dict[str, int]]:
    # context -> {word: count}; <s> is never a predicted word
    events = {}
    for ngram, c in counts.tables[k - 1].items():
        if ngram[-1] == BOS or c <= 0:
            continue
        events.setdefault(ngram[:-1], {})[ngram[-1]] = c
    return events


# -------------------------------------------------------------------
# Model
# -------------------------------------------------------------------
@dataclass
class NgramModel:
    order: int
    probs: list[dict] = field(default_factory=list)     # probs[k-1]: k-gram -> log10 p
    backoffs: list[dict] = field(default_factory=list)  # backoffs[k-1]: k-gram -> log10 backoff weight
    vocabulary: frozenset = frozenset()
    smoothing: Smoothing = Smoothing.WITTEN_BELL

    def predictable(self) -> list[str]:
        return sorted(self.vocabulary - {BOS})

    def _lookup(self, history: tuple, word: str) -> float:
        ngram = history + (word,)
        k = len(ngram)
        hit = self.probs[k - 1].get(ngram)
        if hit is not None:
            return hit
        if not history or self.smoothing == Smoothing.MLE:
            return -math.inf
        return self.backoffs[k - 2].get(history, 0.0) + self._lookup(history[1:], word)

    def logprob(self, word: str, history=()) -> float:
        if word not in self.vocabulary or word == BOS:
            raise UnknownToken(word)
        history = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        return self._lookup(history, word)


def estimate(counts: NgramCounts, smoothing: Smoothing | str = Smoothing.WITTEN_BELL,
             extra_vocabulary=()) -> NgramModel:
    smoothing = Smoothing(smoothing)
    unigram_events = _events(counts, 1).get((), {})
    if not unigram_events:
        raise EmptyCounts()

    vocabulary = frozenset(counts.vocabulary | set(extra_vocabulary))
    model = NgramModel(
        order=counts.order,
        probs=[{} for _ in range(counts.order)],
        backoffs=[{} for _ in range(counts.order)],
        vocabulary=vocabulary,
        smoothing=smoothing,
    )
    predictable = model.predictable()

    # unigrams
    n = sum(unigram_events.values())
    if smoothing == Smoothing.MLE:
        for w, c in unigram_events.items():
            model.probs[0][(w,)] = math.log10(c / n)
    else:
        # Witten-Bell floor: the unseen mass T/(N+T) spread evenly over the vocabulary
        t = len(unigram_events)
        for w in predictable:
            model.probs[0][(w,)] = math.log10((unigram_events.get(w, 0) + t / len(predictable)) / (n + t))
    if BOS in vocabulary:
        model.probs[0][(BOS,)] = LOG10_ZERO

    for k in range(2, counts.order + 1):
        for history, seen in _events(counts, k).items():
            c_h = sum(seen.values())
            t_h = len(seen)

            if smoothing == Smoothing.MLE:
                for w, c in seen.items():
                    model.probs[k - 1][history + (w,)] = math.log10(c / c_h)
                continue

            if set(seen) >= set(predictable):
                # nothing left to back off to
                for w, c in seen.items():
                    model.probs[k - 1][history + (w,)] = math.log10(c / c_h)
                bow = 1.0
            else:
                lower_mass = sum(10 ** model._lookup(history[1:], w) for w in seen)
                for w, c in seen.items():
                    model.probs[k - 1][history + (w,)] = math.log10(c / (c_h + t_h))
                bow = (t_h / (c_h + t_h)) / (1.0 - lower_mass)

            model.backoffs[k - 2][history] = math.log10(bow)
            # a context that is not itself an event still needs an entry to hang its weight on
            model.probs[k - 2].setdefault(history, LOG10_ZERO)

    logger.debug(
        f"estimated order-{model.order} {smoothing.value} model: "
        + ", ".join(f"{len(p)} {k}-grams" for k, p in enumerate(model.probs, start=1))
    )
    return model


# -------------------------------------------------------------------
# ARPA text format
# -------------------------------------------------------------------
def _section(model: NgramModel, k: int) -> list[tuple]:
    return sorted(set(model.probs[k - 1]) | set(model.backoffs[k - 1]))


def emit_arpa(model: NgramModel, decimals: int = ARPA_DECIMALS) -> str:
    lines = [f"# smoothing={model.smoothing.value}", "", "\\data\\"]
    sections = [_section(model, k) for k in range(1, model.order + 1)]
    for k, section in enumerate(sections, start=1):
        lines.append(f"ngram {k}={len(section)}")

    for k, section in enumerate(sections, start=1):
        lines += ["", f"\\{k}-grams:"]
        for ngram in section:
            prob = model.probs[k - 1].get(ngram, LOG10_ZERO)
            line = f"{prob:.{decimals}f}\t{' '.join(ngram)}"
            bow = model.backoffs[k - 1].get(ngram)
            if bow is not None:
                line += f"\t{bow:.{decimals}f}"
            lines.append(line)

    lines += ["", "\\end\\", ""]
    return "\n".join(lines)


def parse_arpa(text: str) -> NgramModel:
    lines = [line.strip() for line in text.splitlines()]
    smoothing = Smoothing.WITTEN_BELL

    try:
        start = lines.index("\\data\\")
    except ValueError:
        raise MalformedHeader("missing \\data\\ line") from None
    for line in lines[:start]:
        match = _SMOOTHING_LINE.search(line)
        if match:
            smoothing = Smoothing(match.group(1))

    declared = {}
    i = start + 1
    while i < len(lines) and not lines[i].startswith("\\"):
        if lines[i]:
            match = _NGRAM_HEADER.match(lines[i])
            if not match:
                raise MalformedHeader(f"line {i + 1}: expected 'ngram k=n', got {lines[i]!r}")
            declared[int(match.group(1))] = int(match.group(2))
        i += 1
    if not declared or sorted(declared) != list(range(1, max(declared) + 1)):
        raise MalformedHeader(f"\\data\\ must declare orders 1..n, got {sorted(declared)}")

    order = max(declared)
    probs = [{} for _ in range(order)]
    backoffs = [{} for _ in range(order)]
    found = Counter()
    k = None
    ended = False
    for i in range(i, len(lines)):
        line = lines[i]
        if not line:
            continue
        if line == "\\end\\":
            ended = True
            break
        section = _SECTION.match(line)
        if section:
            k = int(section.group(1))
            if k not in declared:
                raise MalformedHeader(f"line {i + 1}: section {k} is not declared in \\data\\")
            continue
        if k is None:
            raise MalformedEntry(i + 1, line)

        fields = line.split()
        if len(fields) not in (k + 1, k + 2):
            raise MalformedEntry(i + 1, line)
        try:
            prob = float(fields[0])
            bow = float(fields[k + 1]) if len(fields) == k + 2 else None
        except ValueError:
            raise MalformedEntry(i + 1, line) from None
        ngram = tuple(fields[1:k + 1])
        probs[k - 1][ngram] = prob
        if bow is not None:
            backoffs[k - 1][ngram] = bow
        found[k] += 1

    if not ended:
        raise MalformedHeader("missing \\end\\ line")
    for k, n in sorted(declared.items()):
        if found[k] != n:
            raise SectionCountMismatch(k, n, found[k])

    vocabulary = frozenset(ngram[0] for ngram in probs[0])
    return NgramModel(order, probs, backoffs, vocabulary, smoothing)


# -------------------------------------------------------------------
# Evaluation
# -------------------------------------------------------------------
def perplexity(model: NgramModel, sentences, unk: str | None = None) -> float:
    total = 0.0
    scored = 0
    for sentence in sentences:
        tokens = []
        for token in _tokens(sentence):
            if token not in model.vocabulary:
                if unk is None or unk not in model.vocabulary:
                    raise UnknownToken(token)
                token = unk
            tokens.append(token)

        padded = [BOS] * (model.order - 1) + tokens + [EOS]
        for i in range(model.order - 1, len(padded)):
            total += model.logprob(padded[i], padded[i - model.order + 1:i])
            scored += 1

    if scored == 0:
        raise LmError("nothing to score")
    if total == -math.inf:
        return math.inf
    try:
        return 10 ** (-total / scored)
    except OverflowError:
        return math.inf


def main():
    # python ngram_lm.py sentences.txt 3 > model.arpa
    with open(sys.argv[1], encoding="utf-8") as f:
        sentences = [line.split() for line in f if line.strip()]
    order = int(sys.argv[2]) if len(sys.argv) > 2 else DEFAULT_ORDER
    print(emit_arpa(estimate(count_ngrams(sentences, order))), end="")


if __name__ == "__main__":
    main()
