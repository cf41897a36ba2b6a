"""Extract labelled rhyme pairs from a poem file and print the statistics.

    python3 scripts/build_corpus.py poems.json pairs.jsonl --window 2
"""
import argparse

from grrhyme.corpus import ExtractionCounts, corpus_stats, extract_corpus, load_poems, save_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("poems")
    ap.add_argument("output")
    ap.add_argument("--window", type=int, default=2, choices=(1, 2, 3))
    args = ap.parse_args(argv)

    counts = ExtractionCounts()
    records = extract_corpus(load_poems(args.poems), args.window, counts)
    save_dataset(records, args.output)
    print(f"{counts.lines_seen} lines, {counts.lines_skipped} skipped, {len(records)} pairs")
    print(corpus_stats(records).render())


if __name__ == "__main__":
    main()
