"""Acceptance suite. Each test prints one PASS/FAIL line and the session
summary repeats them under "acceptance criteria"."""
import json
import random
import time

import pytest

import oracle
import pseudowords
from grrhyme.classifier import (
    NotARhyme,
    StressMismatch,
    classify_lines,
    classify_pair,
    coarsen,
    extract_domain,
    format_label,
)
from grrhyme.corpus import (
    ExtractionCounts,
    corpus_stats,
    extract_corpus,
    load_dataset,
    load_poems,
    save_dataset,
)
from grrhyme.evaluation import (
    GenerationReport,
    bundled_cases,
    fixture_path,
    fmt_pct,
    load_responses,
    regrade,
)
from grrhyme.generation import (
    MAX_ATTEMPTS,
    GenerationConstraint,
    generate_refine,
    verify_rhymes,
)
from grrhyme.llm_bridge import ScriptedLLM
from grrhyme.phonology import transcribe

# Named components each taxonomy illustration must show. The illustrations
# name one feature apiece, so the check is that those components appear.
TAXONOMY_EXAMPLES = [
    ("καλά", "μαλά", "M", {"RICH"}, "TR-S", None),
    ("στόματα", "σώματα", "F3", {"RICH"}, "PR-C1", None),
    ("ξανθή", "γραφή", None, {"IDV"}, None, None),
    ("όνομά της", "ο μπάτης", None, {"MOSAIC"}, None, None),
    ("χάνετε", "γίνετε", None, {"IMPERFECT"}, None, "IMP-V"),
    ("ξαφνίζει", "τεχνίτη", None, {"IMPERFECT"}, None, "IMP-C"),
]


@pytest.mark.criterion("Golden taxonomy suite")
def test_golden_taxonomy(criterion):
    t0 = time.perf_counter()
    failures = []
    for a, b, pos, feats, rich, imp in TAXONOMY_EXAMPLES:
        got = classify_lines(a, b)
        ok = (pos is None or got.position == pos) and feats <= got.features
        ok = ok and (rich is None or got.rich_subtype == rich)
        ok = ok and (imp is None or got.imp_subtype == imp)
        if not ok:
            failures.append(f"{a}/{b} -> {format_label(got)}")
    gold = bundled_cases(40)[:9]
    for case in gold:
        got = classify_lines(case.line_a, case.line_b)
        if format_label(coarsen(got, case.gold)) != format_label(coarsen(case.gold)):
            failures.append(f"{case.keyword} -> {format_label(got)} (gold {format_label(case.gold)})")
    elapsed = time.perf_counter() - t0
    n = len(TAXONOMY_EXAMPLES) + len(gold)
    criterion.check(
        not failures and elapsed < 1.0,
        f"{n - len(failures)}/{n} labels, {elapsed:.3f} s" + (f"; wrong: {failures}" if failures else ""),
    )


I_SPELLINGS = [
    ("ι", "ί"), ("η", "ή"), ("υ", "ύ"), ("ει", "εί"), ("οι", "οί"), ("υι", "υί"),
]


def _syms(word):
    return [(p.symbol, p.stressed) for p in transcribe(word)]


@pytest.mark.criterion("Homophone property")
def test_homophones(criterion):
    checks = [_syms("κρίνοι") == _syms("κρίνει")]
    # each /i/ spelling in stressed and unstressed slots of the same frame
    for frame in ("κ{}τα", "μ{}λος", "π{}", "λ{}ς"):
        for k in (0, 1):
            seqs = {tuple(_syms(frame.format(sp[k]))) for sp in I_SPELLINGS}
            checks.append(len(seqs) == 1)
    for sp in I_SPELLINGS:
        checks.append([p.symbol for p in transcribe(sp[0])] == ["i"])
    criterion.check(all(checks), f"{sum(checks)}/{len(checks)} equalities hold")


APPENDIX_B = [
    (
        ["Στο χέρι σου το μυστικό αναβιώνει,", "και μέσα στα σκιερά πελάγη απλώνει."],
        GenerationConstraint("sky", "F3", frozenset(), num_lines=2),
        "Stress mismatch: Expected F3, found F2 for 'αναβιώνει'/'απλώνει'.",
    ),
    (
        ["Θα λάμπει πάντα φωτεινό στον κόσμο το σκληρό,", "γλυκαίνει κάθε σκοτεινή γωνιά σαν θησαυρό."],
        GenerationConstraint("light", "M", frozenset({"PURE"}), num_lines=2),
        "PURE requested but 'σκληρό'/'θησαυρό' is RICH (Onset: /r/).",
    ),
    (
        ["Η καρδιά μου χτυπά δυνατά για σένα που αγαπώ,",
         "κάθε στιγμή που περνά χωρίς εσένα είναι πικρή, το ξέρω."],
        GenerationConstraint("love", "M", frozenset(), num_lines=2),
        "No rhyme: 'αγαπώ' / 'ξέρω'.",
    ),
]


@pytest.mark.criterion("Feedback bit-exactness")
def test_feedback_bytes(criterion):
    hits = 0
    for poem, constraint, want in APPENDIX_B:
        errs = verify_rhymes(poem, constraint)
        if len(errs) == 1 and errs[0].message.encode("utf-8") == want.encode("utf-8"):
            hits += 1
    criterion.check(hits == 3, f"{hits}/3 messages byte-identical")


VALID_POEM = "Μέσα στην καρδιά μου κρύβεται αγαπώ,\nένα όνειρο γλυκό που με κρατώ,"
INVALID_POEM = "Η καρδιά μου χτυπά για σένα που αγαπώ,\nκάθε στιγμή το ξέρω."


@pytest.mark.criterion("Refinement loop contract")
def test_loop_contract(criterion):
    constraint = GenerationConstraint("love", "M", frozenset(), num_lines=2)
    violations = []
    for seed in range(100):
        rng = random.Random(seed)
        script = [rng.choice([VALID_POEM, INVALID_POEM]) if rng.random() < 0.3 else INVALID_POEM
                  for _ in range(rng.randint(1, 25))]
        llm = ScriptedLLM.from_responses(script + [INVALID_POEM] * MAX_ATTEMPTS)
        trace = generate_refine(llm, constraint, verify=True)
        first = next((i for i, p in enumerate(script[:MAX_ATTEMPTS]) if p == VALID_POEM), None)
        if trace.attempts_used > MAX_ATTEMPTS:
            violations.append((seed, "bound"))
        if first is not None:
            if not trace.valid or trace.attempts_used != first + 1:
                violations.append((seed, "first valid"))
        elif trace.valid or trace.attempts_used != MAX_ATTEMPTS or not trace.warning:
            violations.append((seed, "exhaustion"))
        if len(llm.prompts) != trace.attempts_used:
            violations.append((seed, "calls"))
        if any(a.valid for a in trace.attempts[:-1]):
            violations.append((seed, "accounting"))
    criterion.check(not violations, f"100 seeded scripts, {len(violations)} violations {violations[:3]}")


def _quality(label):
    if label.features & {"PURE", "COPY"}:
        return "PURE"
    return label.imp_subtype


def _engine(da, db):
    try:
        lab = classify_pair(da, db)
    except StressMismatch:
        return ("StressMismatch", None)
    except NotARhyme:
        return (da.position, None)
    return (lab.position, _quality(lab))


@pytest.mark.criterion("Oracle equivalence")
def test_oracle(criterion):
    t0 = time.perf_counter()
    words = pseudowords.tier_a() + pseudowords.tier_b()
    word_bad = []
    reps = {}
    for w in words:
        d = extract_domain(w)
        want = tuple(s for s, _ in oracle.rhyme(w))
        if d.position != oracle.position(w) or d.symbols != want:
            word_bad.append(w)
        reps.setdefault((d.position, d.symbols), (w, d))

    by_pos = {}
    for (pos, _), rep in reps.items():
        by_pos.setdefault(pos, []).append(rep)
    pairs, pair_bad = 0, []
    for items in by_pos.values():
        for i, (wa, da) in enumerate(items):
            for wb, db in items[i:]:
                pairs += 1
                if _engine(da, db) != oracle.expected(wa, wb):
                    pair_bad.append((wa, wb))
    # mixed positions must be refused: all of M against the rest, every 7th F2 against F3
    m, f2, f3 = by_pos["M"], by_pos["F2"], by_pos["F3"]
    cross = [(a, b) for a in m for b in f2 + f3] + [(a, b) for a in f2[::7] for b in f3]
    for (wa, da), (wb, db) in cross:
        pairs += 1
        if _engine(da, db) != oracle.expected(wa, wb):
            pair_bad.append((wa, wb))
    elapsed = time.perf_counter() - t0
    criterion.check(
        not word_bad and not pair_bad and elapsed < 30,
        f"{len(words)} words, {pairs} pairs, {len(word_bad) + len(pair_bad)} disagreements, {elapsed:.1f} s",
    )


@pytest.mark.criterion("Metric arithmetic")
def test_metric_arithmetic(criterion):
    report = regrade(load_responses(fixture_path("responses_table1.jsonl")), bundled_cases(26))
    row = [fmt_pct(*report.accuracy("claude-3.7", s)) for s in report.strategies()]
    gen = GenerationReport.from_jsonl(fixture_path("generation_results_claude37.jsonl"))
    verified = fmt_pct(*gen.validity("claude-3.7", True))
    base = fmt_pct(*gen.validity("claude-3.7", False))
    ok = row == ["38.5%", "42.3%", "42.3%", "30.8%"] and verified == "73.1%" and base == "3.8%"
    ok = ok and abs(gen.improvement("claude-3.7") - 69.3) < 0.05
    criterion.check(ok, f"identification {' / '.join(row)}; generation {base} -> {verified} "
                        f"(+{gen.improvement('claude-3.7'):.1f})")


@pytest.mark.criterion("Corpus re-validation")
def test_corpus_revalidation(criterion, tmp_path):
    records = []
    for name in ("sample_corpus.json", "one_poem.json"):
        records += extract_corpus(load_poems(fixture_path(name)), counts=ExtractionCounts())
    bad = [r for r in records if classify_pair(extract_domain(r.line_a), extract_domain(r.line_b)) != r.label]
    out = tmp_path / "pairs.jsonl"
    save_dataset(records, out)
    back = load_dataset(out)
    again = tmp_path / "again.jsonl"
    save_dataset(back, again)
    lossless = back == records and out.read_bytes() == again.read_bytes()
    criterion.check(
        records and not bad and lossless,
        f"{len(records)} records, {len(bad)} mismatches, round-trip {'lossless' if lossless else 'LOSSY'}",
    )


@pytest.mark.criterion("Fixture composition check")
def test_fixture_composition(criterion):
    stats = corpus_stats(bundled_cases(40))
    pos = stats.by_position
    feats = stats.by_feature
    want_pos = {"M": 13, "F2": 16, "F3": 11}
    want_feat = {"PURE": 21, "RICH": 10, "IDV": 10, "IMPERFECT": 6, "MOSAIC": 5}
    ok = stats.total == 40 and pos == want_pos and all(feats.get(k) == v for k, v in want_feat.items())
    criterion.check(ok, f"total {stats.total}; {json.dumps(pos)}; "
                        + json.dumps({k: feats.get(k, 0) for k in want_feat}))
