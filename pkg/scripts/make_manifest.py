"""Write per-poet poem/line counts for a poem JSON file.

Deliberately independent of the grrhyme package: it only reads JSON and
counts, so the manifest can cross-check the loader.

    python3 scripts/make_manifest.py src/grrhyme/data/fixtures/sample_corpus.json
"""
import argparse
import json
import sys
from collections import OrderedDict
from pathlib import Path


def manifest(poems):
    out = OrderedDict()
    for poem in poems:
        row = out.setdefault(poem["poet"], {"poems": 0, "lines": 0})
        row["poems"] += 1
        row["lines"] += sum(1 for ln in poem["lines"] if ln.strip())
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("corpus")
    ap.add_argument("-o", "--output", help="default: <corpus>.manifest.json next to the input")
    args = ap.parse_args(argv)
    src = Path(args.corpus)
    poems = json.loads(src.read_text(encoding="utf-8"))
    dst = Path(args.output) if args.output else src.with_suffix(".manifest.json")
    body = {"source": src.name, "poets": manifest(poems)}
    dst.write_text(json.dumps(body, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {dst} ({len(body['poets'])} poets)")


if __name__ == "__main__":
    sys.exit(main())
