"""Run the generation benchmark (with and without verification).

Without --config it renders the bundled archived results:

    python3 scripts/run_generation.py
    python3 scripts/run_generation.py --config endpoints.json --model gpt-4o
"""
import argparse

from grrhyme.evaluation import (
    GenerationReport,
    bundled_constraints,
    fixture_path,
    make_run_dir,
    run_generation_bench,
)
from grrhyme.llm_bridge import ChatClient, load_endpoints


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--model", action="append")
    ap.add_argument("--output-dir", default="runs")
    args = ap.parse_args(argv)

    if not args.config:
        print(GenerationReport.from_jsonl(fixture_path("generation_results_claude37.jsonl")).render(), end="")
        return
    endpoints = load_endpoints(args.config)
    models = [ChatClient(endpoints[m]) for m in (args.model or endpoints)]
    run_dir = make_run_dir(args.output_dir, "generate")
    report = run_generation_bench(bundled_constraints(), models, run_dir=run_dir)
    print(report.render(), end="")
    print(f"\nwritten to {run_dir}")


if __name__ == "__main__":
    main()
