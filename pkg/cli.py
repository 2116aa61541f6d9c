"""
Command-line entry point.

    phonemize     words -> phones under a scheme
    dict build    transcript words -> dictionary.dic, fillers.fil, phones.lst
    prep          emit | split | validate-audio | segment
    lm            build | ppl
    score         reference vs hypothesis transcriptions -> WER / SER
    pipeline      manifest -> every trainer input file + model.arpa + config.json
    alffa-check   compare Alffa36 G2P with the public ALFFA lexicon

Data errors exit 1 with "error: <stage>: <message>" on stderr, usage errors
exit 2. Progress goes to stderr so stdout stays machine-readable.
"""

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from build_dashboard import build_dashboard
from corpus import (
    DEFAULT_READING_RATE,
    DEFAULT_TARGET_SECONDS,
    MAX_SEGMENT_FACTOR,
    SPLITS,
    CorpusManifest,
    InfeasibleSplit,
    SplitConfig,
    emit_file_ids,
    emit_transcript,
    overlong_utterances,
    parse_transcript,
    read_manifest,
    split_sentences,
    split_speakers,
    split_summary,
    validate_audio_tree,
    write_manifest,
)
from errors import PrepError
from fetch_alffa_lexicon import RAW_OUTPUT, URL, agreement_rate, check_alffa
from g2p import EmptyAfterNormalization, normalize_word, phonemize
from lexicon import (
    DICTIONARY_FILE,
    FILLER_FILE,
    PHONE_LIST_FILE,
    Lexicon,
    build_lexicon,
    emit_dictionary,
    emit_filler_dictionary,
    emit_phone_list,
)
from ngram_lm import (
    DEFAULT_ORDER,
    MAX_ORDER,
    Smoothing,
    count_ngrams,
    emit_arpa,
    estimate,
    parse_arpa,
    perplexity,
)
from phoneset import Scheme
from scorer import pair_transcripts, render_report, score_corpus

logger = logging.getLogger(__name__)

MODEL_FILE = "model.arpa"
CONFIG_FILE = "config.json"
DEFAULT_SCHEME = Scheme.AUGMENTED40
DEFAULT_SEED = 0
# best trainer settings from the experiments; recorded, never used here
DEFAULT_GAUSSIANS = 16
DEFAULT_SENONES = 2500

# trainer settings of each experiment run on the corpus (scheme, gaussians, senones)
EXPERIMENT_PRESETS = {
    "1": (Scheme.BASIC34, 8, 2000),
    "2": (Scheme.ALFFA36, 8, 2000),
    "3": (Scheme.AUGMENTED40, 8, 2000),
    "4": (Scheme.AUGMENTED40, 8, 2000),
    "5a": (Scheme.AUGMENTED40, 8, 2000),
    "5b": (Scheme.AUGMENTED40, DEFAULT_GAUSSIANS, DEFAULT_SENONES),
}

PIPELINE_STAGES = ("load", "split", "prep", "dict", "closure", "lm", "config")


class PipelineError(PrepError):
    def __init__(self, stage: str, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


# -------------------------------------------------------------------
# Configuration
# -------------------------------------------------------------------
@dataclass(frozen=True)
class PipelineConfig:
    scheme: Scheme = DEFAULT_SCHEME
    lm_order: int = DEFAULT_ORDER
    smoothing: Smoothing = Smoothing.WITTEN_BELL
    unk_token: str | None = None
    split: SplitConfig | None = None
    reading_rate: float = DEFAULT_READING_RATE
    target_seconds: float = DEFAULT_TARGET_SECONDS
    seed: int = DEFAULT_SEED
    gaussians: int = DEFAULT_GAUSSIANS
    senones: int = DEFAULT_SENONES

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "smoothing", Smoothing(self.smoothing))
        if not 1 <= self.lm_order <= MAX_ORDER:
            raise ValueError(f"lm_order must be in 1..{MAX_ORDER}, got {self.lm_order}")
        if self.reading_rate <= 0 or self.target_seconds <= 0:
            raise ValueError("reading_rate and target_seconds must be positive")

    def to_dict(self) -> dict:
        split = None
        if self.split is not None:
            split = {
                "train_speakers": list(self.split.train_speakers),
                "test_speakers": list(self.split.test_speakers),
                "eval_speakers": list(self.split.eval_speakers),
                "ratios": None if self.split.ratios is None else list(self.split.ratios),
                "seed": self.split.seed,
            }
        data = asdict(self)
        data.update(scheme=self.scheme.value, smoothing=self.smoothing.value, split=split)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        if unknown:
            raise ValueError(f"unknown config key {unknown[0]!r}")
        split = data.pop("split", None)
        if split is not None:
            ratios = split.get("ratios")
            split = SplitConfig(
                train_speakers=tuple(split.get("train_speakers", ())),
                test_speakers=tuple(split.get("test_speakers", ())),
                eval_speakers=tuple(split.get("eval_speakers", ())),
                ratios=None if ratios is None else tuple(ratios),
                seed=split.get("seed", DEFAULT_SEED),
            )
        return cls(split=split, **data)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -------------------------------------------------------------------
# Helpers
# -------------------------------------------------------------------
def _write(path: Path, text: str, what: str, n: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    logger.info(f"✅ Saved {n} {what} to {path}")


def _read(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _speaker_list(value: str) -> tuple:
    return tuple(s.strip() for s in value.split(",") if s.strip())


def _ratios(value: str) -> tuple:
    try:
        ratios = tuple(float(r) for r in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be comma-separated numbers, got {value!r}") from None
    if len(ratios) != len(SPLITS):
        raise argparse.ArgumentTypeError(f"expected {len(SPLITS)} ratios (train,test,eval), got {value!r}")
    return ratios


def _split_config(args, seed: int) -> SplitConfig | None:
    if not (args.train_speakers or args.test_speakers or args.eval_speakers or args.ratios):
        return None
    return SplitConfig(
        train_speakers=args.train_speakers or (),
        test_speakers=args.test_speakers or (),
        eval_speakers=args.eval_speakers or (),
        ratios=args.ratios,
        seed=seed,
    )


def _transcript_sentences(text: str) -> list[str]:
    return [line.text for line in parse_transcript(text) if line.text]


def _transcript_words(text: str) -> list[str]:
    return [word for sentence in _transcript_sentences(text) for word in sentence.split()]


def check_closure(transcripts: dict[str, str], lex: Lexicon) -> list[str]:
    """Words used in any transcript that the dictionary lacks, sorted."""
    words = {w for text in transcripts.values() for w in _transcript_words(text)}
    return sorted(w for w in words if w not in lex)


def labelled_manifest(manifest: CorpusManifest, split: SplitConfig | None,
                      words_per_second: float = DEFAULT_READING_RATE) -> CorpusManifest:
    if split is not None:
        return split_speakers(manifest, split, words_per_second)
    if not manifest.split_labels:
        logger.info("manifest has no split labels, every utterance goes to train")
        return CorpusManifest(list(manifest.utterances), {u.utt_id: "train" for u in manifest.utterances})
    return manifest


def emit_splits(manifest: CorpusManifest, out_dir: Path, splits: list[str]) -> dict[str, str]:
    transcripts = {}
    for split in splits:
        n = len(manifest.utterances_in(split))
        _write(out_dir / f"{split}.fileids", emit_file_ids(manifest, split), "file ids", n)
        transcripts[split] = emit_transcript(manifest, split)
        _write(out_dir / f"{split}.transcription", transcripts[split], "transcript lines", n)
    return transcripts


def write_dictionary_files(lex: Lexicon, out_dir: Path) -> None:
    _write(out_dir / DICTIONARY_FILE, emit_dictionary(lex), "dictionary entries", len(lex))
    _write(out_dir / FILLER_FILE, emit_filler_dictionary(), "fillers", len(lex.fillers))
    phones = emit_phone_list(lex)
    _write(out_dir / PHONE_LIST_FILE, phones, "phones", len(phones.splitlines()))


# -------------------------------------------------------------------
# Pipeline
# -------------------------------------------------------------------
@contextmanager
def _stage(name: str):
    logger.debug(f"stage {name}")
    try:
        yield
    except PipelineError:
        raise
    except (PrepError, OSError, ValueError, KeyError) as err:
        raise PipelineError(name, err) from err


def run_pipeline(manifest_path: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> CorpusManifest:
    out_dir = Path(out_dir)

    with _stage("load"):
        manifest = read_manifest(manifest_path)
        overlong = overlong_utterances(manifest, cfg.target_seconds, cfg.reading_rate)
        if overlong:
            logger.warning(f"⚠️ {len(overlong)} utterances run past {MAX_SEGMENT_FACTOR * cfg.target_seconds:g} s "
                           f"(first: {overlong[0]}); prep segment can cut the source text shorter")

    with _stage("split"):
        manifest = labelled_manifest(manifest, cfg.split, cfg.reading_rate)
        splits = manifest.splits_present()
        if "train" not in splits:
            raise InfeasibleSplit("no utterance is labelled train")

    with _stage("prep"):
        transcripts = emit_splits(manifest, out_dir, splits)

    with _stage("dict"):
        words = [w for text in transcripts.values() for w in _transcript_words(text)]
        lex, _rejects = build_lexicon(words, cfg.scheme)
        write_dictionary_files(lex, out_dir)

    with _stage("closure"):
        missing = check_closure(transcripts, lex)
        if missing:
            raise PrepError(f"{len(missing)} transcript words have no dictionary entry: {' '.join(missing)}")

    with _stage("lm"):
        counts = count_ngrams(_transcript_sentences(transcripts["train"]), cfg.lm_order)
        extra = (cfg.unk_token,) if cfg.unk_token else ()
        model = estimate(counts, cfg.smoothing, extra_vocabulary=extra)
        arpa = emit_arpa(model)
        _write(out_dir / MODEL_FILE, arpa, "n-grams", sum(len(p) for p in model.probs))

    with _stage("config"):
        _write(out_dir / CONFIG_FILE, cfg.to_json(), "settings", len(cfg.to_dict()))

    return manifest


# -------------------------------------------------------------------
# Subcommands
# -------------------------------------------------------------------
def cmd_phonemize(args) -> int:
    raw_words = list(args.word or [])
    if args.file:
        raw_words += _read(args.file).split()

    seen = set()
    for raw in raw_words:
        try:
            word = normalize_word(raw)
        except EmptyAfterNormalization:
            if args.file:
                continue
            raise
        if word in seen:
            continue
        seen.add(word)
        print(f"{word}\t{phonemize(word, args.scheme)}")
    return 0


def cmd_dict(args) -> int:
    lex, rejects = build_lexicon(_transcript_words(_read(args.input)), args.scheme)
    write_dictionary_files(lex, Path(args.out_dir))
    if rejects:
        logger.warning(f"⚠️ {len(rejects)} words rejected: {' '.join(r.word for r in rejects)}")
    return 0


def cmd_prep(args) -> int:
    if args.action == "segment":
        if not args.input:
            raise PrepError("segment needs --input")
        for segment in split_sentences(_read(args.input), args.target_seconds, args.reading_rate):
            print(segment)
        return 0

    if args.action == "validate-audio":
        if not args.root:
            raise PrepError("validate-audio needs --root")
        report = validate_audio_tree(args.root, workers=args.workers)
        if report.empty:
            logger.warning(f"⚠️ no .wav files below {args.root}")
        for row in report.itertuples(index=False):
            print(f"✅ {row.path}" if row.ok else f"❌ {row.path}: {row.problems}")
        failed = int((~report["ok"]).sum()) if len(report) else 0
        logger.info(f"{len(report) - failed}/{len(report)} files accepted")
        return 1 if failed else 0

    if not args.manifest:
        raise PrepError(f"{args.action} needs --manifest")
    if args.action == "split" and not args.out:
        raise PrepError("split needs --out")
    manifest = read_manifest(args.manifest)

    if args.action == "split":
        cfg = _split_config(args, args.seed if args.seed is not None else DEFAULT_SEED)
        if cfg is None:
            raise InfeasibleSplit("give --train-speakers/--test-speakers or --ratios")
        manifest = split_speakers(manifest, cfg, args.reading_rate)
        write_manifest(manifest, args.out)
        print(split_summary(manifest).to_string(index=False))
        return 0

    # emit
    manifest = labelled_manifest(manifest, None)
    splits = [args.split] if args.split else manifest.splits_present()
    emit_splits(manifest, Path(args.out_dir), splits)
    return 0


def cmd_lm(args) -> int:
    sentences = _transcript_sentences(_read(args.input))
    if args.action == "build":
        if not args.out:
            raise PrepError("build needs --out")
        model = estimate(
            count_ngrams(sentences, args.order),
            args.smoothing,
            extra_vocabulary=(args.unk,) if args.unk else (),
        )
        _write(Path(args.out), emit_arpa(model), "n-grams", sum(len(p) for p in model.probs))
        return 0

    if not args.model:
        raise PrepError("ppl needs --model")
    model = parse_arpa(_read(args.model))
    print(f"perplexity {perplexity(model, sentences, unk=args.unk):.4f}")
    return 0


def cmd_score(args) -> int:
    report = score_corpus(pair_transcripts(_read(args.ref), _read(args.hyp)))
    print(render_report(report, args.format), end="")
    if args.dashboard:
        build_dashboard(report.to_frame(), report.aggregate(), args.dashboard)
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.experiment:
        scheme, gaussians, senones = EXPERIMENT_PRESETS[args.experiment]
        cfg = replace(cfg, scheme=scheme, gaussians=gaussians, senones=senones)

    overrides = {
        "scheme": args.scheme,
        "lm_order": args.order,
        "smoothing": args.smoothing,
        "unk_token": args.unk,
        "reading_rate": args.reading_rate,
        "target_seconds": args.target_seconds,
        "seed": args.seed,
        "gaussians": args.gaussians,
        "senones": args.senones,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    split = _split_config(args, cfg.seed) or cfg.split
    if split is not None:
        split = replace(split, seed=cfg.seed)
    cfg = replace(cfg, split=split)

    run_pipeline(args.manifest, args.out_dir, cfg)
    return 0


def cmd_alffa_check(args) -> int:
    df = check_alffa(args.url, args.out)
    print(f"agreement {agreement_rate(df):.4f} over {len(df)} entries")
    return 0


# -------------------------------------------------------------------
# Argument parsing
# -------------------------------------------------------------------
def _add_split_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-speakers", type=_speaker_list, help="comma-separated speaker ids")
    p.add_argument("--test-speakers", type=_speaker_list, help="comma-separated speaker ids")
    p.add_argument("--eval-speakers", type=_speaker_list, help="comma-separated speaker ids")
    p.add_argument("--ratios", type=_ratios, help="train,test,eval duration shares, e.g. 0.7,0.2,0.1")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    schemes = [s.value for s in Scheme]
    smoothings = [s.value for s in Smoothing]
    orders = range(1, MAX_ORDER + 1)

    parser = argparse.ArgumentParser(prog="kiswahili-asr-prep", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug messages")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("phonemize", help="print the phones of words",
                       description="Print one line of phones per distinct normalized word, in first-seen order.")
    p.add_argument("--scheme", choices=schemes, default=DEFAULT_SCHEME.value)
    p.add_argument("--word", action="append", help="a word (repeatable; spellings that normalize alike print once)")
    p.add_argument("--file", help="text file of words")
    p.set_defaults(func=cmd_phonemize)

    p = sub.add_parser("dict", help="build the pronunciation dictionary files")
    p.add_argument("action", choices=["build"])
    p.add_argument("--scheme", choices=schemes, default=DEFAULT_SCHEME.value)
    p.add_argument("--input", required=True, help="transcription or plain text")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_dict)

    p = sub.add_parser("prep", help="manifest and audio preparation")
    p.add_argument("action", nargs="?", default="emit", choices=["emit", "split", "validate-audio", "segment"])
    p.add_argument("--manifest")
    p.add_argument("--split", choices=SPLITS, help="emit only this split")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--out", help="where split writes the labelled manifest (required for split)")
    p.add_argument("--root", help="audio root for validate-audio")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--input", help="raw text for segment")
    p.add_argument("--target-seconds", type=float, default=DEFAULT_TARGET_SECONDS)
    p.add_argument("--reading-rate", type=float, default=DEFAULT_READING_RATE,
                   help="words per second (segment, and split weights when durations are missing)")
    _add_split_options(p)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("lm", help="n-gram language model")
    p.add_argument("action", choices=["build", "ppl"])
    p.add_argument("--input", required=True, help="transcription or plain text, one sentence per line")
    p.add_argument("--order", type=int, choices=orders, default=DEFAULT_ORDER)
    p.add_argument("--smoothing", choices=smoothings, default=Smoothing.WITTEN_BELL.value)
    p.add_argument("--out", help="ARPA file to write (build)")
    p.add_argument("--model", help="ARPA file to evaluate (ppl)")
    p.add_argument("--unk", help="unknown-word token")
    p.set_defaults(func=cmd_lm)

    p = sub.add_parser("score", help="WER / SER of a hypothesis transcription")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--dashboard", help="also write an HTML dashboard here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pipeline", help="manifest -> all trainer inputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help=f"a {CONFIG_FILE} from an earlier run; flags override it")
    p.add_argument("--experiment", choices=list(EXPERIMENT_PRESETS),
                   help="scheme and trainer settings of an experiment run; other flags override it")
    p.add_argument("--scheme", choices=schemes)
    p.add_argument("--order", type=int, choices=orders)
    p.add_argument("--smoothing", choices=smoothings)
    p.add_argument("--unk")
    p.add_argument("--reading-rate", type=float, help="words per second for utterances without a duration")
    p.add_argument("--target-seconds", type=float, help="warn about utterances longer than 1.5x this")
    p.add_argument("--gaussians", type=int)
    p.add_argument("--senones", type=int)
    _add_split_options(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("alffa-check", help="compare Alffa36 G2P with the ALFFA lexicon")
    p.add_argument("--url", default=URL)
    p.add_argument("--out", default=RAW_OUTPUT)
    p.set_defaults(func=cmd_alffa_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)

    try:
        return args.func(args)
    except PipelineError as err:
        logger.error(f"error: {err}")
    except (PrepError, OSError, ValueError) as err:
        logger.error(f"error: {args.command}: {err}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
