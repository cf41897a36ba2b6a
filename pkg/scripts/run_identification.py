"""Run the identification benchmark over configured endpoints.

Without --config it replays the bundled archived responses, so the
table can be checked offline:

    python3 scripts/run_identification.py
    python3 scripts/run_identification.py --config endpoints.json --model gpt-4o
"""
import argparse

from grrhyme.corpus import extract_corpus, load_dataset, load_poems
from grrhyme.evaluation import (
    bundled_cases,
    fixture_path,
    load_responses,
    make_run_dir,
    regrade,
    run_identification_bench,
)
from grrhyme.llm_bridge import STRATEGIES, ChatClient, load_endpoints


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--model", action="append")
    ap.add_argument("-n", type=int, default=26, choices=(26, 40))
    ap.add_argument("--dataset", help="labelled pairs for RAG (default: bundled sample corpus)")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--output-dir", default="runs")
    args = ap.parse_args(argv)

    cases = bundled_cases(args.n)
    if not args.config:
        report = regrade(load_responses(fixture_path("responses_table1.jsonl")), bundled_cases(26))
        print(report.render(), end="")
        return
    endpoints = load_endpoints(args.config)
    models = [ChatClient(endpoints[m]) for m in (args.model or endpoints)]
    if args.dataset:
        dataset = load_dataset(args.dataset)
    else:
        dataset = extract_corpus(load_poems(fixture_path("sample_corpus.json")))
    run_dir = make_run_dir(args.output_dir, "identify")
    report = run_identification_bench(cases, models, STRATEGIES, dataset, run_dir, workers=args.workers)
    print(report.render(), end="")
    print(f"\nwritten to {run_dir}")


if __name__ == "__main__":
    main()
