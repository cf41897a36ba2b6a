import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grrhyme.classifier import classify_pair, extract_domain, parse_label
from grrhyme.generation import (
    MAX_ATTEMPTS,
    GenerationAborted,
    GenerationConstraint,
    VerifierError,
    build_generation_prompt,
    format_errors,
    generate_refine,
    mated_pairs,
    parse_poem,
    satisfies,
    update_prompt,
    verify_rhymes,
    violation,
)
from grrhyme.llm_bridge import ScriptedLLM

M2 = GenerationConstraint("love", "M", frozenset(), num_lines=2)

GOOD = ["Μέσα στην καρδιά μου κρύβεται αγαπώ,", "ένα όνειρο γλυκό που με κρατώ,"]
BAD = ["Η καρδιά μου χτυπά για σένα που αγαπώ,", "κάθε στιγμή που περνά, το ξέρω."]

QUATRAIN_OK = "\n".join([
    "Έτσι από σένα περιμένω κι απαιτώ.",
    "της Τραγωδίας τον Λόγο τον λαμπρό —",
    "Μέσα στην καρδιά μου κρύβεται αγαπώ,",
    "ένα όνειρο γλυκό που με κρατώ,",
])


# -- constraints ----------------------------------------------------------------

def test_default_scheme():
    assert GenerationConstraint("x", "M").scheme == "AABB"
    assert GenerationConstraint("x", "M", num_lines=6).scheme == "AABBCC"


@pytest.mark.parametrize("kw", [
    dict(position="F4"),
    dict(num_lines=3),
    dict(num_lines=0),
    dict(num_lines=4, scheme="ABCA"),
    dict(num_lines=4, scheme="AAB"),
    dict(required_features={"PURE", "IMPERFECT"}),
    dict(required_features={"SHINY"}),
])
def test_constraint_invariants(kw):
    base = dict(theme="x", position="M")
    base.update(kw)
    with pytest.raises(ValueError):
        GenerationConstraint(**base)


def test_feature_class_names():
    assert GenerationConstraint("x", "M").feature_class == "BASIC"
    c = GenerationConstraint("x", "F3", {"PURE", "MOSAIC", "IDV"})
    assert c.feature_class == "IDV+MOSAIC+PURE"
    assert c.rhyme_type == "F3-IDV-MOSAIC-PURE"
    assert GenerationConstraint.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_mated_pairs():
    assert mated_pairs("AABB") == [(0, 1), (2, 3)]
    assert mated_pairs("ABAB") == [(0, 2), (1, 3)]
    assert mated_pairs("ABBA") == [(0, 3), (1, 2)]
    assert mated_pairs("AAA") == [(0, 1), (1, 2)]


# -- feature checks -------------------------------------------------------------

@pytest.mark.parametrize("label, required, missing", [
    ("M-PURE", set(), None),
    ("M-TR-S-PURE", {"PURE"}, "RICH"),
    ("M-IMP-C", {"PURE"}, "IMPERFECT"),
    ("M-COPY", {"PURE"}, "COPY"),
    ("M-IDV-PURE", {"PURE"}, None),
    ("M-PURE", {"IDV"}, "IDV"),
    ("M-TR-S-IDV-PURE", {"IDV", "RICH"}, None),
    ("M-IMP-V", {"IMPERFECT"}, None),
])
def test_violation(label, required, missing):
    assert violation(parse_label(label), frozenset(required)) == missing


# -- verify_rhymes -----------------------------------------------------------------

def test_valid_pair():
    assert verify_rhymes(GOOD, M2) == []


def test_stress_mismatch_message():
    c = GenerationConstraint("sky", "F3", frozenset(), num_lines=2)
    (err,) = verify_rhymes(["Στο χέρι σου το μυστικό αναβιώνει,", "και μέσα στα σκιερά πελάγη απλώνει."], c)
    assert err.kind == "StressMismatch" and err.line_pair == (0, 1)
    assert err.message == "Stress mismatch: Expected F3, found F2 for 'αναβιώνει'/'απλώνει'."


def test_rich_message():
    c = GenerationConstraint("light", "M", {"PURE"}, num_lines=2)
    (err,) = verify_rhymes(["στον κόσμο το σκληρό,", "γωνιά σαν θησαυρό."], c)
    assert err.kind == "FeatureViolation"
    assert err.message == "PURE requested but 'σκληρό'/'θησαυρό' is RICH (Onset: /r/)."


def test_no_rhyme_message():
    (err,) = verify_rhymes(["για σένα που αγαπώ,", "είναι πικρή, το ξέρω."], M2)
    assert err.kind == "NoRhyme" and err.message == "No rhyme: 'αγαπώ' / 'ξέρω'."


def test_other_feature_messages():
    c = GenerationConstraint("x", "M", {"PURE"}, num_lines=2)
    (err,) = verify_rhymes(["πάντα αγαπώ", "πάλι αγαπώ"], c)
    assert err.message == "PURE requested but 'αγαπώ'/'αγαπώ' is COPY (same word repeated)."
    c = GenerationConstraint("x", "M", {"IDV"}, num_lines=2)
    (err,) = verify_rhymes(["σκληρό", "θησαυρό"], c)
    assert err.message == "IDV requested but 'σκληρό'/'θησαυρό' is M-TR-S-PURE."
    c = GenerationConstraint("x", "M", {"PURE"}, num_lines=2)
    (err,) = verify_rhymes(["αγαπώ", "ουρανός"], c)
    assert err.message == "PURE requested but 'αγαπώ'/'ουρανός' is IMPERFECT (IMP-0F)."


def test_no_stress_found():
    (err,) = verify_rhymes(["για σένα που αγαπω", "ένα όνειρο γλυκό που με κρατώ,"], M2)
    assert err.kind == "NoStressFound"
    assert err.message == "No stress found: line 1 'για σένα που αγαπω' has no usable stressed word at its end."


def test_line_count():
    (err,) = verify_rhymes(GOOD[:1], M2)
    assert err.kind == "LineCount" and "expected 2 lines, found 1" in err.message


def test_errors_per_pair():
    c = GenerationConstraint("x", "M")
    errs = verify_rhymes(BAD + GOOD, c)
    assert [e.line_pair for e in errs] == [(0, 1)]


@pytest.mark.parametrize("a, b", [
    ("καλά", "μαλά"), ("στόματα", "σώματα"), ("ξανθή", "γραφή"), ("χάνετε", "γίνετε"),
    ("σκληρό", "θησαυρό"), ("αγαπώ", "κρατώ"), ("όνομά της", "ο μπάτης"), ("κρίνοι", "κρίνει"),
])
@pytest.mark.parametrize("required", [
    set(), {"PURE"}, {"RICH"}, {"IDV"}, {"MOSAIC"}, {"IMPERFECT"}, {"IDV", "PURE"}, {"IDV", "RICH"},
])
def test_verifier_agrees_with_classifier(a, b, required):
    label = classify_pair(extract_domain(a), extract_domain(b))
    c = GenerationConstraint("x", label.position, frozenset(required), num_lines=2)
    errs = verify_rhymes([a, b], c)
    assert (errs == []) == satisfies(label, c)


# -- formatting -----------------------------------------------------------------

def test_format_errors():
    assert format_errors([]) == ""
    e1 = VerifierError("NoRhyme", (2, 3), "second")
    e2 = VerifierError("NoRhyme", (0, 1), "first")
    assert format_errors([e1]) == "second\n"
    assert format_errors([e1, e2]) == "first\nsecond\n"


def test_parse_poem():
    raw = "Here is your poem:\n<poem>\n1. Μέσα στην καρδιά,\n2) **ένα όνειρο γλυκό**\n</poem>\nHope you like it."
    assert parse_poem(raw) == ["Μέσα στην καρδιά,", "ένα όνειρο γλυκό"]
    assert parse_poem("```\nα β\n```") == ["α β"]


def test_prompts():
    c = GenerationConstraint("love", "F3", {"RICH"})
    base = build_generation_prompt(c)
    assert base.startswith("Write a 4-line poem in Modern Greek with F3-RICH rhyme on theme: love.")
    again = update_prompt(base, GOOD, "No rhyme: 'α' / 'β'.\n")
    assert again.startswith(base) and GOOD[0] in again and "No rhyme: 'α' / 'β'." in again


# -- the loop ---------------------------------------------------------------------

def _llm(*poems, loop_last=False):
    return ScriptedLLM.from_responses(["\n".join(p) for p in poems], loop_last=loop_last)


def test_invalid_then_valid():
    llm = _llm(BAD, GOOD)
    trace = generate_refine(llm, M2, verify=True)
    assert trace.valid and trace.attempts_used == 2 and not trace.warning
    assert [a.valid for a in trace.attempts] == [False, True]
    # the second prompt carries the first attempt's feedback
    assert "No rhyme: 'αγαπώ' / 'ξέρω'." in llm.prompts[1]
    assert trace.final_poem == "\n".join(GOOD)


def test_always_invalid():
    trace = generate_refine(_llm(BAD, loop_last=True), M2, verify=True)
    assert trace.attempts_used == MAX_ATTEMPTS and not trace.valid and trace.warning
    assert all(a.errors for a in trace.attempts)
    assert "WARNING" in trace.render()


def test_no_verify_single_call():
    llm = _llm(GOOD)
    trace = generate_refine(llm, M2, verify=False)
    assert trace.attempts_used == 1 and trace.valid
    bad = generate_refine(_llm(BAD, GOOD), M2, verify=False)
    assert bad.attempts_used == 1 and not bad.valid and not bad.warning


def test_quatrain():
    c = GenerationConstraint("x", "M")
    trace = generate_refine(ScriptedLLM.from_responses([QUATRAIN_OK]), c)
    assert trace.valid and trace.attempts_used == 1


def test_max_attempts_bounds():
    with pytest.raises(ValueError):
        generate_refine(_llm(GOOD), M2, max_attempts=16)
    trace = generate_refine(_llm(BAD, loop_last=True), M2, max_attempts=3)
    assert trace.attempts_used == 3


def test_transport_error_keeps_trace():
    llm = _llm(BAD, BAD)
    with pytest.raises(GenerationAborted) as err:
        generate_refine(llm, M2)
    assert err.value.trace.attempts_used == 2


def test_trace_jsonl(tmp_path):
    trace = generate_refine(_llm(BAD, GOOD), M2)
    path = tmp_path / "t.jsonl"
    trace.save(path)
    rows = [json.loads(x) for x in path.read_text(encoding="utf-8").splitlines()]
    assert [r["attempt"] for r in rows] == [1, 2]
    assert rows[0]["errors"][0]["kind"] == "NoRhyme" and rows[1]["valid"]
    assert rows[0]["constraint"]["position"] == "M"


@given(st.lists(st.booleans(), min_size=1, max_size=20), st.booleans())
@settings(max_examples=60, deadline=None)
def test_loop_properties(script, verify):
    llm = ScriptedLLM.from_responses(["\n".join(GOOD if ok else BAD) for ok in script] + ["\n".join(BAD)] * 15)
    trace = generate_refine(llm, M2, verify=verify)
    assert 1 <= trace.attempts_used <= MAX_ATTEMPTS
    assert trace.valid == trace.attempts[-1].valid
    assert not any(a.valid for a in trace.attempts[:-1])
    if verify and True in script[:MAX_ATTEMPTS]:
        assert trace.attempts_used == script.index(True) + 1
    if not verify:
        assert trace.attempts_used == 1
