"""``grrhyme`` command line.

Exit codes: 0 success, 1 a negative domain answer (not a rhyme, invalid
poem), 2 usage, configuration or engine errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .classifier import (
    POSITION_BY_INDEX,
    ClassifierError,
    NotARhyme,
    classify_lines,
    extract_domain,
    format_label,
)
from .corpus import (
    CorpusError,
    ExtractionCounts,
    corpus_stats,
    extract_corpus,
    load_dataset,
    load_poems,
    save_dataset,
)
from .evaluation import (
    GenerationReport,
    bundled_cases,
    bundled_constraints,
    fixture_path,
    load_cases,
    load_constraints,
    load_responses,
    make_run_dir,
    regrade,
    run_generation_bench,
    run_identification_bench,
)
from .generation import GenerationAborted, GenerationConstraint, generate_refine
from .llm_bridge import (
    ChatClient,
    ConfigError,
    DatasetEmpty,
    LLMError,
    PromptStrategy,
    STRATEGIES,
    ScriptedLLM,
    load_endpoints,
    retrieve_examples,
)
from .phonology import PhonologyError, format_syllables, fuse_clitics, tokenize

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2
DEFAULT_CONFIG = "endpoints.json"


class CliError(Exception):
    """Reported on stderr with exit code 2."""


@dataclass(frozen=True)
class CliConfig:
    config: Optional[Path]
    dataset: Optional[Path]
    strategies: tuple[str, ...]
    output_dir: Path
    verbosity: int
    mock: Optional[Path]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        config = args.config or os.environ.get("GRRHYME_CONFIG")
        mock = Path(args.mock) if args.mock else None
        if mock is not None and not mock.is_file():
            raise CliError(f"mock script not found: {mock}")
        dataset = getattr(args, "dataset", None)
        if dataset and not Path(dataset).is_file():
            raise CliError(f"dataset not found: {dataset}")
        return cls(
            config=Path(config) if config else None,
            dataset=Path(dataset) if dataset else None,
            strategies=tuple(getattr(args, "strategy", None) or ()),
            output_dir=Path(args.output_dir),
            verbosity=args.verbose,
            mock=mock,
        )


# ---------------------------------------------------------------------------
# model resolution

def _models(cfg: CliConfig, names: Sequence[str] | None):
    """Completers for the run: the mock script or configured endpoints."""
    if cfg.mock is not None:
        try:
            return [ScriptedLLM.from_jsonl(cfg.mock, name=(names[0] if names else None))]
        except ConfigError as exc:
            raise CliError(str(exc)) from exc
    path = cfg.config or Path(DEFAULT_CONFIG)
    if not path.is_file():
        raise CliError(f"no endpoint config at {path} (use --config or --mock)")
    try:
        endpoints = load_endpoints(path)
    except ConfigError as exc:
        raise CliError(str(exc)) from exc
    chosen = list(names) if names else list(endpoints)
    missing = [n for n in chosen if n not in endpoints]
    if missing:
        raise CliError(f"unknown model(s) {', '.join(missing)}; configured: {', '.join(endpoints)}")
    unset = [endpoints[n].api_key_ref for n in chosen if not os.environ.get(endpoints[n].api_key_ref)]
    if unset:
        raise CliError(f"API key variable(s) not set: {', '.join(sorted(set(unset)))}")
    return [ChatClient(endpoints[n]) for n in chosen]


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(args, cfg: CliConfig) -> int:
    text = " ".join(args.text)
    words = fuse_clitics(tokenize(text))
    single = len(words) == 1 and len(words[0].orthography) == 1
    for w in words:
        summary = f"{format_syllables(w.syllables)} | stress: {POSITION_BY_INDEX[w.stress_from_end]}"
        print(summary if single else f"{' '.join(w.orthography)}: {summary}")
        print("  phones: " + " ".join(str(p) for p in w.phones))
    return EXIT_OK


def cmd_classify(args, cfg: CliConfig) -> int:
    try:
        label = classify_lines(args.line_a, args.line_b)
    except NotARhyme as exc:
        print("NOT-A-RHYME")
        if cfg.verbosity:
            print(f"  {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    print(format_label(label))
    if cfg.verbosity:
        for line in (args.line_a, args.line_b):
            d = extract_domain(line)
            print(f"  {d.word}: /{' '.join(str(p) for p in d.domain_phones)}/ "
                  f"onset /{''.join(d.onset_symbols)}/ span {d.word_span}")
    return EXIT_OK


def cmd_corpus_build(args, cfg: CliConfig) -> int:
    poems = load_poems(args.input)
    counts = ExtractionCounts()
    records = extract_corpus(poems, args.window, counts)
    save_dataset(records, args.output)
    print(f"{len(poems)} poems, {counts.lines_seen} lines ({counts.lines_skipped} skipped), "
          f"{counts.pairs_tested} pairs tested, {len(records)} records -> {args.output}")
    return EXIT_OK


def cmd_stats(args, cfg: CliConfig) -> int:
    if args.bundled:
        records = bundled_cases(args.bundled)
    elif args.cases:
        records = load_cases(args.path)
    else:
        if not args.path:
            raise CliError("stats needs a dataset path, --cases PATH or --bundled N")
        records = load_dataset(args.path)
    stats = corpus_stats(records)
    if args.json:
        print(json.dumps(stats.to_dict(), ensure_ascii=False, indent=1))
    else:
        print(stats.render())
    return EXIT_OK


def cmd_retrieve(args, cfg: CliConfig) -> int:
    if cfg.dataset is None:
        raise CliError("retrieve needs --dataset")
    records = load_dataset(cfg.dataset)
    for rec in retrieve_examples(records, (args.line_a, args.line_b), args.k):
        print(f"{rec.label_text}\t{rec.word_a} / {rec.word_b}\t[{rec.poet}: {rec.title}]")
    return EXIT_OK


def _strategies(names: Sequence[str] | None, k: int) -> list[PromptStrategy]:
    if not names:
        return [PromptStrategy(s.kind, s.rag, k) for s in STRATEGIES]
    try:
        return [PromptStrategy.from_name(n, k) for n in names]
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _rag_dataset(cfg: CliConfig, strategies):
    if not any(s.rag for s in strategies):
        return None
    if cfg.dataset is not None:
        return load_dataset(cfg.dataset)
    return extract_corpus(load_poems(fixture_path("sample_corpus.json")))


def cmd_identify_bench(args, cfg: CliConfig) -> int:
    cases = load_cases(args.cases) if args.cases else bundled_cases(args.n)
    if args.regrade:
        report = regrade(load_responses(args.regrade), cases)
        print(report.render(), end="")
        return EXIT_OK
    strategies = _strategies(args.strategy, args.k)
    models = _models(cfg, args.model)
    dataset = _rag_dataset(cfg, strategies)
    run_dir = make_run_dir(cfg.output_dir, "identify")
    report = run_identification_bench(cases, models, strategies, dataset, run_dir, workers=args.workers)
    print(report.render(), end="")
    print(f"\nraw responses and reports in {run_dir}")
    return EXIT_OK


def _features(raw: Sequence[str] | None) -> frozenset:
    feats = set()
    for chunk in raw or ():
        for part in chunk.replace("+", ",").split(","):
            part = part.strip().upper()
            if part in ("", "BASIC"):
                continue
            feats.add({"IMP": "IMPERFECT", "MOS": "MOSAIC"}.get(part, part))
    return frozenset(feats)


def cmd_generate(args, cfg: CliConfig) -> int:
    if args.bench is not None:
        constraints = load_constraints(args.bench) if args.bench else bundled_constraints()
        models = _models(cfg, args.model)
        if args.results:
            report = GenerationReport.from_jsonl(args.results)
        else:
            run_dir = make_run_dir(cfg.output_dir, "generate")
            report = run_generation_bench(constraints, models, run_dir=run_dir)
            print(f"traces and reports in {run_dir}", file=sys.stderr)
        print(report.render(), end="")
        return EXIT_OK
    if args.results:
        print(GenerationReport.from_jsonl(args.results).render(), end="")
        return EXIT_OK
    if not args.type:
        raise CliError("generate needs --type M|F2|F3 (or --bench / --results)")
    try:
        constraint = GenerationConstraint(args.theme, args.type, _features(args.features),
                                          args.lines, args.scheme)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    model = _models(cfg, [args.model] if args.model else None)[0]
    try:
        trace = generate_refine(model, constraint, verify=args.verify)
    except GenerationAborted as exc:
        if cfg.verbosity:
            print(exc.trace.render(), file=sys.stderr)
        raise CliError(str(exc)) from exc
    if cfg.verbosity:
        print(trace.render())
        print()
    print(trace.final_poem)
    if trace.warning:
        print(f"WARNING: no valid poem after {trace.attempts_used} attempts", file=sys.stderr)
    elif not trace.valid:
        print("WARNING: poem fails verification", file=sys.stderr)
    if args.save_trace:
        trace.save(args.save_trace)
    return EXIT_OK if trace.valid else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grrhyme", description="Modern Greek rhyme engine and LLM harness")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help=f"endpoint config JSON (default: $GRRHYME_CONFIG or ./{DEFAULT_CONFIG})")
    p.add_argument("--output-dir", default="runs", help="where run directories are created")
    p.add_argument("--mock", help="scripted answers (JSONL) instead of live endpoints")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="transcribe, syllabify and stress a word or line")
    a.add_argument("text", nargs="+")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("classify", help="label the rhyme between two lines")
    c.add_argument("line_a")
    c.add_argument("line_b")
    c.set_defaults(func=cmd_classify)

    b = sub.add_parser("corpus-build", help="extract and label rhyme pairs from a poem JSON file")
    b.add_argument("input")
    b.add_argument("output")
    b.add_argument("--window", type=int, default=2, choices=(1, 2, 3))
    b.set_defaults(func=cmd_corpus_build)

    s = sub.add_parser("stats", help="counts by poet, label, position and feature")
    s.add_argument("path", nargs="?")
    s.add_argument("--cases", action="store_true", help="PATH is an identification case file")
    s.add_argument("--bundled", type=int, choices=(26, 40), help="use a bundled identification set")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_stats)

    r = sub.add_parser("retrieve", help="show the RAG examples for a pair")
    r.add_argument("line_a")
    r.add_argument("line_b")
    r.add_argument("--dataset", required=True)
    r.add_argument("-k", type=int, default=3)
    r.set_defaults(func=cmd_retrieve)

    i = sub.add_parser("identify-bench", help="rhyme identification benchmark")
    i.add_argument("--cases", help="case JSONL (default: bundled set)")
    i.add_argument("-n", type=int, default=26, choices=(26, 40), help="bundled set size")
    i.add_argument("--strategy", action="append", help="Structured, Structured+RAG, CoT, CoT+RAG (repeatable)")
    i.add_argument("--model", action="append", help="endpoint name from the config (repeatable)")
    i.add_argument("--dataset", help="labelled JSONL for RAG (default: bundled sample corpus)")
    i.add_argument("-k", type=int, default=3, help="RAG examples per prompt")
    i.add_argument("--workers", type=int, default=1)
    i.add_argument("--regrade", help="re-grade an archived responses.jsonl instead of calling models")
    i.set_defaults(func=cmd_identify_bench)

    g = sub.add_parser("generate", help="write a poem under a rhyme constraint")
    g.add_argument("--theme", default="love")
    g.add_argument("--type", choices=("M", "F2", "F3"))
    g.add_argument("--features", action="append", help="e.g. RICH or IDV,PURE")
    g.add_argument("--lines", type=int, default=4)
    g.add_argument("--scheme")
    g.add_argument("--verify", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--model")
    g.add_argument("--save-trace", help="write the attempt trace as JSONL")
    g.add_argument("--bench", nargs="?", const="", help="run the generation benchmark (default: bundled 26)")
    g.add_argument("--results", help="render tables from a saved results.jsonl")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = CliConfig.from_args(args)
        return args.func(args, cfg)
    except (CliError, PhonologyError, ClassifierError, CorpusError, ConfigError,
            DatasetEmpty, LLMError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
