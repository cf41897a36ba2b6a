"""Benchmarks: rhyme identification accuracy and generation validity.

Every percentage is ``k/n`` over integer counts kept in the report, printed
with one decimal. Raw model answers are archived so a report can be
re-graded offline without calling any model again.
"""
from __future__ import annotations

import json
import logging
import time
from collections import OrderedDict, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .classifier import (
    POSITIONS,
    LabelError,
    RhymeLabel,
    format_label,
    labels_match,
    normalized_features,
    parse_label,
)
from .corpus import RhymePairRecord
from .generation import GenerationAborted, GenerationConstraint, GenerationTrace, generate_refine
from .llm_bridge import (
    Completer,
    LLMError,
    ParseFailure,
    PromptStrategy,
    STRATEGIES,
    build_identification_prompt,
    parse_identification_response,
    retrieve_examples,
)

log = logging.getLogger(__name__)

__all__ = [
    "FEATURE_COLUMNS",
    "FEATURE_CLASSES",
    "IdentificationCase",
    "Grade",
    "Outcome",
    "BenchReport",
    "GenerationResult",
    "GenerationReport",
    "pct",
    "fmt_pct",
    "grade_case",
    "load_cases",
    "bundled_cases",
    "load_constraints",
    "bundled_constraints",
    "run_identification_bench",
    "regrade",
    "load_responses",
    "run_generation_bench",
    "make_run_dir",
    "fixture_path",
]

FEATURE_COLUMNS = ("PURE", "RICH", "MOSAIC", "IDV", "IMPERFECT")
FEATURE_CLASSES = ("BASIC", "IMPERFECT", "IDV+PURE", "IDV+RICH", "IDV+IMPERFECT", "IDV+MOSAIC+PURE")


def pct(k: int, n: int) -> float:
    return round(100.0 * k / n, 1) if n else 0.0


def fmt_pct(k: int, n: int) -> str:
    return f"{100.0 * k / n:.1f}%" if n else "-"


# ---------------------------------------------------------------------------
# cases

@dataclass(frozen=True)
class IdentificationCase:
    keyword: str
    line_a: str
    line_b: str
    gold: RhymeLabel
    poet: str = ""
    title: str = ""
    source: str = ""

    @property
    def label(self) -> RhymeLabel:
        # lets corpus_stats count gold labels directly
        return self.gold

    @property
    def pair(self) -> tuple[str, str]:
        return (self.line_a, self.line_b)


def load_cases(path: str | Path) -> list[IdentificationCase]:
    cases = []
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            gold = parse_label(obj["gold"])
            cases.append(IdentificationCase(
                obj["keyword"], obj["line_a"], obj["line_b"], gold,
                obj.get("poet", ""), obj.get("title", ""), obj.get("source", ""),
            ))
        except (ValueError, KeyError, LabelError) as exc:
            raise ValueError(f"{path}:{n}: bad identification case ({exc})") from exc
    return cases


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("grrhyme") / "data" / "fixtures" / name))


def bundled_cases(n: int = 40) -> list[IdentificationCase]:
    if n not in (26, 40):
        raise ValueError("bundled identification sets have 26 or 40 cases")
    return load_cases(fixture_path(f"identification_{n}.jsonl"))


def load_constraints(path: str | Path) -> list[GenerationConstraint]:
    out = []
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if raw.strip():
            try:
                out.append(GenerationConstraint.from_dict(json.loads(raw)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{n}: bad constraint ({exc})") from exc
    return out


def bundled_constraints() -> list[GenerationConstraint]:
    return load_constraints(fixture_path("generation_26.jsonl"))


# ---------------------------------------------------------------------------
# grading

@dataclass(frozen=True)
class Grade:
    exact: bool
    type_match: bool
    feature_hits: tuple[tuple[str, bool], ...]

    @property
    def type_only(self) -> bool:
        """Right position, wrong features."""
        return self.type_match and not self.exact

    @property
    def symbol(self) -> str:
        return "ok" if self.exact else ("type" if self.type_match else "x")


def grade_case(predicted: RhymeLabel | ParseFailure, gold: RhymeLabel) -> Grade:
    gold_feats = sorted(normalized_features(gold))
    if isinstance(predicted, ParseFailure):
        return Grade(False, False, tuple((f, False) for f in gold_feats))
    hits = tuple((f, f in predicted.features) for f in gold_feats)
    return Grade(labels_match(predicted, gold), predicted.position == gold.position, hits)


@dataclass(frozen=True)
class Outcome:
    model: str
    strategy: str
    index: int
    keyword: str
    gold: str
    position: str
    predicted: str
    grade: Grade
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "strategy": self.strategy,
            "index": self.index,
            "keyword": self.keyword,
            "gold": self.gold,
            "predicted": self.predicted,
            "exact": self.grade.exact,
            "type_match": self.grade.type_match,
            "features": dict(self.grade.feature_hits),
            "error": self.error,
        }


def _outcome(model: str, strategy: str, index: int, case: IdentificationCase,
             response: str, error: Optional[str]) -> Outcome:
    pred = ParseFailure("ERROR") if error is not None else parse_identification_response(response)
    shown = pred.token if isinstance(pred, ParseFailure) else format_label(pred)
    return Outcome(model, strategy, index, case.keyword, format_label(case.gold),
                   case.gold.position, shown, grade_case(pred, case.gold), error)


@dataclass
class BenchReport:
    outcomes: list = field(default_factory=list)

    # grouping helpers keep first-seen order so tables are stable
    def models(self) -> list[str]:
        return list(OrderedDict.fromkeys(o.model for o in self.outcomes))

    def strategies(self) -> list[str]:
        return list(OrderedDict.fromkeys(o.strategy for o in self.outcomes))

    def accuracy(self, model: str, strategy: str | None = None) -> tuple[int, int]:
        sel = [o for o in self.outcomes if o.model == model and (strategy is None or o.strategy == strategy)]
        return sum(o.grade.exact for o in sel), len(sel)

    def by_type(self, model: str) -> dict[str, tuple[int, int]]:
        out = {}
        for pos in POSITIONS:
            sel = [o for o in self.outcomes if o.model == model and o.position == pos]
            out[pos] = (sum(o.grade.exact for o in sel), len(sel))
        return out

    def by_feature(self, model: str) -> dict[str, tuple[int, int]]:
        hits: dict[str, list[int]] = {f: [0, 0] for f in FEATURE_COLUMNS}
        for o in self.outcomes:
            if o.model != model:
                continue
            for feat, hit in o.grade.feature_hits:
                if feat in hits:
                    hits[feat][0] += hit
                    hits[feat][1] += 1
        return {f: (k, n) for f, (k, n) in hits.items()}

    # -- rendering --------------------------------------------------------

    def rows(self) -> list[dict]:
        rows = []
        for m in self.models():
            for s in self.strategies():
                k, n = self.accuracy(m, s)
                rows.append({"table": "identification", "model": m, "strategy": s,
                             "correct": k, "n": n, "pct": pct(k, n)})
        for m in self.models():
            for pos, (k, n) in self.by_type(m).items():
                rows.append({"table": "by_type", "model": m, "type": pos,
                             "correct": k, "n": n, "pct": pct(k, n)})
        for m in self.models():
            for feat, (k, n) in self.by_feature(m).items():
                rows.append({"table": "by_feature", "model": m, "feature": feat,
                             "correct": k, "n": n, "pct": pct(k, n)})
        return rows

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in self.rows())

    def render(self) -> str:
        models, strategies = self.models(), self.strategies()
        w = max([len("Model")] + [len(m) for m in models])

        def table(title, header, cells):
            cw = [max(len(h), 7) for h in header]
            out = [title, f"{'Model':<{w}}  " + "  ".join(f"{h:>{c}}" for h, c in zip(header, cw))]
            for m, vals in cells:
                out.append(f"{m:<{w}}  " + "  ".join(f"{v:>{c}}" for v, c in zip(vals, cw)))
            return "\n".join(out)

        t1 = table("Identification accuracy (exact match)", strategies,
                   [(m, [fmt_pct(*self.accuracy(m, s)) for s in strategies]) for m in models])
        n_type = {p: (self.by_type(models[0])[p][1] if models else 0) for p in POSITIONS}
        t2 = table("Accuracy by rhyme type", [f"{p} (n={n_type[p]})" for p in POSITIONS],
                   [(m, [fmt_pct(*self.by_type(m)[p]) for p in POSITIONS]) for m in models])
        n_feat = {f: (self.by_feature(models[0])[f][1] if models else 0) for f in FEATURE_COLUMNS}
        t3 = table("Feature detection", [f"{f} (n={n_feat[f]})" for f in FEATURE_COLUMNS],
                   [(m, [fmt_pct(*self.by_feature(m)[f]) for f in FEATURE_COLUMNS]) for m in models])
        return "\n\n".join([t1, t2, t3]) + "\n"


def _response_row(model: str, strategy: str, index: int, case: IdentificationCase,
                  response: str, error: Optional[str]) -> dict:
    return {"model": model, "strategy": strategy, "index": index, "keyword": case.keyword,
            "response": response, "error": error}


def regrade(responses: Iterable[dict], cases: Sequence[IdentificationCase]) -> BenchReport:
    """Rebuild a report from archived raw responses."""
    report = BenchReport()
    for row in responses:
        case = cases[row["index"]]
        if case.keyword != row.get("keyword", case.keyword):
            raise ValueError(f"response row {row['index']} does not belong to case {case.keyword!r}")
        report.outcomes.append(_outcome(row["model"], row["strategy"], row["index"], case,
                                        row.get("response", ""), row.get("error")))
    return report


def load_responses(path: str | Path) -> list[dict]:
    return [json.loads(raw) for raw in Path(path).read_text(encoding="utf-8").splitlines() if raw.strip()]


def make_run_dir(root: str | Path, prefix: str) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = Path(root) / f"{prefix}-{stamp}"
    n = 1
    while path.exists():
        n += 1
        path = Path(root) / f"{prefix}-{stamp}-{n}"
    path.mkdir(parents=True)
    return path


def run_identification_bench(cases: Sequence[IdentificationCase], models: Sequence[Completer],
                             strategies: Sequence[PromptStrategy] = STRATEGIES,
                             dataset: Sequence[RhymePairRecord] | None = None,
                             run_dir: str | Path | None = None, workers: int = 1) -> BenchReport:
    """Prompt, answer, parse and grade every (model, strategy, case).

    Transport errors become failed cases; the run carries on.
    """
    if any(s.rag for s in strategies) and not dataset:
        raise ValueError("RAG strategies need a retrieval dataset")
    jobs = [(m, s, i, c) for m in models for s in strategies for i, c in enumerate(cases)]

    def run(job):
        model, strategy, index, case = job
        examples = retrieve_examples(dataset, case.pair, strategy.k_examples) if strategy.rag else ()
        prompt = build_identification_prompt(case.line_a, case.line_b, strategy, examples)
        try:
            return model.complete(prompt), None
        except LLMError as exc:
            log.warning("%s/%s case %d failed: %s", model.name, strategy.name, index, exc)
            return "", f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            answers = list(pool.map(run, jobs))
    else:
        answers = [run(j) for j in jobs]

    responses = [_response_row(m.name, s.name, i, c, text, err)
                 for (m, s, i, c), (text, err) in zip(jobs, answers)]
    report = regrade(responses, cases)
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        with (run_dir / "responses.jsonl").open("w", encoding="utf-8") as fh:
            for row in responses:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        (run_dir / "outcomes.jsonl").write_text(
            "".join(json.dumps(o.to_dict(), ensure_ascii=False) + "\n" for o in report.outcomes),
            encoding="utf-8")
        (run_dir / "report.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
        (run_dir / "report.txt").write_text(report.render(), encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# generation

@dataclass(frozen=True)
class GenerationResult:
    model: str
    index: int
    feature_class: str
    verify: bool
    valid: bool
    attempts_used: int
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"model": self.model, "index": self.index, "feature_class": self.feature_class,
                "verify": self.verify, "valid": self.valid, "attempts_used": self.attempts_used,
                "error": self.error}


@dataclass
class GenerationReport:
    results: list = field(default_factory=list)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "GenerationReport":
        rows = [json.loads(raw) for raw in Path(path).read_text(encoding="utf-8").splitlines() if raw.strip()]
        return cls([GenerationResult(**row) for row in rows])

    def models(self) -> list[str]:
        return list(OrderedDict.fromkeys(r.model for r in self.results))

    def validity(self, model: str, verify: bool) -> tuple[int, int]:
        sel = [r for r in self.results if r.model == model and r.verify == verify]
        return sum(r.valid for r in sel), len(sel)

    def improvement(self, model: str) -> float:
        """Verified minus unverified, on the one-decimal percentages."""
        return round(pct(*self.validity(model, True)) - pct(*self.validity(model, False)), 1)

    def by_class(self, model: str, verify: bool = True) -> dict[str, tuple[int, int]]:
        counts: dict[str, list[int]] = defaultdict(lambda: [0, 0])
        for r in self.results:
            if r.model == model and r.verify == verify:
                counts[r.feature_class][0] += r.valid
                counts[r.feature_class][1] += 1
        order = [c for c in FEATURE_CLASSES if c in counts] + sorted(set(counts) - set(FEATURE_CLASSES))
        return {c: tuple(counts[c]) for c in order}

    def rows(self) -> list[dict]:
        rows = []
        for m in self.models():
            for v in (False, True):
                k, n = self.validity(m, v)
                if n:
                    rows.append({"table": "generation", "model": m, "verify": v,
                                 "valid": k, "n": n, "pct": pct(k, n)})
            rows.append({"table": "improvement", "model": m, "pp": self.improvement(m)})
            for c, (k, n) in self.by_class(m).items():
                rows.append({"table": "by_feature_class", "model": m, "feature_class": c,
                             "valid": k, "n": n, "pct": pct(k, n)})
        return rows

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in self.rows())

    def render(self) -> str:
        models = self.models()
        w = max([len("Model")] + [len(m) for m in models])
        out = ["Generation validity",
               f"{'Model':<{w}}  {'No Verify':>10}  {'With Verify':>11}  {'Improvement':>11}"]
        for m in models:
            imp = self.improvement(m)
            out.append(f"{m:<{w}}  {fmt_pct(*self.validity(m, False)):>10}  "
                       f"{fmt_pct(*self.validity(m, True)):>11}  {imp:>+10.1f}%")
        classes = list(OrderedDict.fromkeys(c for m in models for c in self.by_class(m)))
        cw = max([len("Feature Type")] + [len(c) for c in classes])
        out += ["", "Validity with verification by feature class",
                f"{'Feature Type':<{cw}}  {'n':>3}  " + "  ".join(f"{m:>{max(len(m), 7)}}" for m in models)]
        for c in classes:
            n = max((self.by_class(m).get(c, (0, 0))[1] for m in models), default=0)
            cells = "  ".join(f"{fmt_pct(*self.by_class(m).get(c, (0, 0))):>{max(len(m), 7)}}" for m in models)
            out.append(f"{c:<{cw}}  {n:>3}  {cells}")
        return "\n".join(out) + "\n"


def run_generation_bench(constraints: Sequence[GenerationConstraint], models: Sequence[Completer],
                         modes: Sequence[bool] = (False, True),
                         run_dir: str | Path | None = None) -> GenerationReport:
    report = GenerationReport()
    trace_dir = None
    if run_dir is not None:
        trace_dir = Path(run_dir) / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
    for model in models:
        for verify in modes:
            for i, con in enumerate(constraints):
                error = None
                try:
                    trace = generate_refine(model, con, verify=verify)
                except GenerationAborted as exc:
                    trace, error = exc.trace, f"{type(exc.cause).__name__}: {exc.cause}"
                valid = error is None and trace.valid
                report.results.append(GenerationResult(model.name, i, con.feature_class, verify,
                                                       valid, trace.attempts_used, error))
                if trace_dir is not None:
                    mode = "verify" if verify else "noverify"
                    trace.save(trace_dir / f"{_slug(model.name)}-{i:02d}-{mode}.jsonl")
    if run_dir is not None:
        run_dir = Path(run_dir)
        (run_dir / "results.jsonl").write_text(
            "".join(json.dumps(r.to_dict()) + "\n" for r in report.results), encoding="utf-8")
        (run_dir / "report.jsonl").write_text(report.to_jsonl(), encoding="utf-8")
        (run_dir / "report.txt").write_text(report.render(), encoding="utf-8")
    return report


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
