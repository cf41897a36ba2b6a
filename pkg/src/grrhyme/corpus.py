"""Poem ingestion, rhyme-pair extraction and the labelled pair dataset.

Input is a JSON array of ``{"poet", "title", "lines"}`` objects. Blank
lines separate stanzas and pairs never cross them. Output datasets are
JSONL, one :class:`RhymePairRecord` per line with the label written in
the compound-label grammar.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .classifier import (
    ClassifierError,
    LabelError,
    NotARhyme,
    RhymeDomain,
    RhymeLabel,
    classify_pair,
    extract_domain,
    format_label,
    normalized_features,
    parse_label,
)
from .phonology import PhonologyError

__all__ = [
    "Poem",
    "RhymePairRecord",
    "CorpusError",
    "MalformedJson",
    "MissingField",
    "SchemaViolation",
    "ExtractionCounts",
    "CorpusStats",
    "load_poems",
    "extract_pairs",
    "extract_corpus",
    "corpus_stats",
    "save_dataset",
    "load_dataset",
    "record_to_json",
]

DEFAULT_WINDOW = 2


class CorpusError(ValueError):
    pass


class MalformedJson(CorpusError):
    def __init__(self, line: int, col: int, msg: str = ""):
        super().__init__(f"malformed JSON at line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


class MissingField(CorpusError):
    def __init__(self, name: str, poem_index: int):
        super().__init__(f"poem #{poem_index} is missing field {name!r}")
        self.name = name
        self.poem_index = poem_index


class SchemaViolation(CorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class Poem:
    poet: str
    title: str
    lines: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if not self.poet:
            raise ValueError("poet must be non-empty")
        if not self.lines:
            raise ValueError("a poem needs at least one line")

    def stanzas(self) -> list[list[int]]:
        """Indices of non-blank lines, grouped by blank-line breaks."""
        groups: list[list[int]] = [[]]
        for i, line in enumerate(self.lines):
            if line.strip():
                groups[-1].append(i)
            elif groups[-1]:
                groups.append([])
        return [g for g in groups if g]


@dataclass(frozen=True)
class RhymePairRecord:
    line_a: str
    line_b: str
    word_a: str
    word_b: str
    label: RhymeLabel
    poet: str
    title: str
    line_distance: int
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.line_distance < 1:
            raise ValueError("line_distance must be >= 1")
        if not self.label.is_engine_valid:
            raise ValueError(f"label {format_label(self.label)} is not a classifier output")

    @property
    def label_text(self) -> str:
        return format_label(self.label)


_FIELDS = ("line_a", "line_b", "word_a", "word_b", "label", "poet", "title", "line_distance", "window")


def record_to_json(rec: RhymePairRecord) -> str:
    payload = {
        "line_a": rec.line_a,
        "line_b": rec.line_b,
        "word_a": rec.word_a,
        "word_b": rec.word_b,
        "label": rec.label_text,
        "poet": rec.poet,
        "title": rec.title,
        "line_distance": rec.line_distance,
        "window": rec.window,
    }
    return json.dumps(payload, ensure_ascii=False)


def _record_from_obj(obj, line_no: int) -> RhymePairRecord:
    if not isinstance(obj, dict):
        raise SchemaViolation(line_no, "record is not a JSON object")
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise SchemaViolation(line_no, f"missing field(s) {', '.join(missing)}")
    for name in ("line_a", "line_b", "word_a", "word_b", "label", "poet", "title"):
        if not isinstance(obj[name], str):
            raise SchemaViolation(line_no, f"field {name!r} must be a string")
    for name in ("line_distance", "window"):
        if not isinstance(obj[name], int) or isinstance(obj[name], bool):
            raise SchemaViolation(line_no, f"field {name!r} must be an integer")
    try:
        label = parse_label(obj["label"])
        return RhymePairRecord(
            obj["line_a"], obj["line_b"], obj["word_a"], obj["word_b"], label,
            obj["poet"], obj["title"], obj["line_distance"], obj["window"],
        )
    except (LabelError, ValueError) as exc:
        raise SchemaViolation(line_no, str(exc)) from exc


# ---------------------------------------------------------------------------
# loading

def _poem_from_obj(obj, index: int) -> Poem:
    if not isinstance(obj, dict):
        raise CorpusError(f"poem #{index} is not a JSON object")
    for name in ("poet", "title", "lines"):
        if name not in obj:
            raise MissingField(name, index)
    lines = obj["lines"]
    if not isinstance(lines, list) or not all(isinstance(x, str) for x in lines):
        raise CorpusError(f"poem #{index}: 'lines' must be a list of strings")
    if not isinstance(obj["poet"], str) or not isinstance(obj["title"], str):
        raise CorpusError(f"poem #{index}: 'poet' and 'title' must be strings")
    try:
        return Poem(obj["poet"], obj["title"], tuple(lines))
    except ValueError as exc:
        raise CorpusError(f"poem #{index}: {exc}") from exc


def load_poems(path: str | Path) -> list[Poem]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(exc.lineno, exc.colno, exc.msg) from exc
    if not isinstance(data, list):
        raise CorpusError("top level must be a JSON array of poems")
    return [_poem_from_obj(obj, i) for i, obj in enumerate(data)]


# ---------------------------------------------------------------------------
# extraction

@dataclass
class ExtractionCounts:
    """Running tallies; lines whose ending has no usable stress are skipped."""
    lines_seen: int = 0
    lines_skipped: int = 0
    pairs_tested: int = 0
    pairs_emitted: int = 0
    skipped_lines: list = field(default_factory=list)


def _domain(line: str) -> Optional[RhymeDomain]:
    try:
        return extract_domain(line)
    except (ClassifierError, PhonologyError):
        return None


def extract_pairs(poem: Poem, window: int = DEFAULT_WINDOW,
                  counts: ExtractionCounts | None = None) -> list[RhymePairRecord]:
    """Classify every line against the next ``window`` lines of its stanza."""
    if not 1 <= window <= 3:
        raise ValueError("window must be in [1, 3]")
    counts = counts if counts is not None else ExtractionCounts()
    records: list[RhymePairRecord] = []
    seen: set[tuple[int, int]] = set()
    for stanza in poem.stanzas():
        domains = {}
        for i in stanza:
            counts.lines_seen += 1
            domains[i] = _domain(poem.lines[i])
            if domains[i] is None:
                counts.lines_skipped += 1
                counts.skipped_lines.append((poem.title, i))
        for pos, i in enumerate(stanza):
            for dist in range(1, window + 1):
                if pos + dist >= len(stanza):
                    break
                j = stanza[pos + dist]
                key = (min(i, j), max(i, j))
                a, b = domains[i], domains[j]
                if key in seen or a is None or b is None:
                    continue
                seen.add(key)
                counts.pairs_tested += 1
                try:
                    label = classify_pair(a, b)
                except NotARhyme:
                    continue
                records.append(RhymePairRecord(
                    poem.lines[i], poem.lines[j], a.word, b.word, label,
                    poem.poet, poem.title, dist, window,
                ))
    counts.pairs_emitted += len(records)
    return records


def extract_corpus(poems: Iterable[Poem], window: int = DEFAULT_WINDOW,
                   counts: ExtractionCounts | None = None) -> list[RhymePairRecord]:
    counts = counts if counts is not None else ExtractionCounts()
    out: list[RhymePairRecord] = []
    for poem in poems:
        out.extend(extract_pairs(poem, window, counts))
    return out


# ---------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class CorpusStats:
    total: int
    by_poet: dict
    by_label: dict
    by_position: dict
    by_feature: dict
    by_window: dict

    def render(self) -> str:
        rows = [f"total pairs: {self.total}", "", "by poet:"]
        width = max((len(p) for p in self.by_poet), default=4)
        for poet, n in self.by_poet.items():
            rows.append(f"  {poet:<{width}}  {n:>7}")
        rows += ["", "by position:"]
        rows += [f"  {k:<3} {v:>7}" for k, v in self.by_position.items()]
        rows += ["", "by feature:"]
        rows += [f"  {k:<10} {v:>7}" for k, v in self.by_feature.items()]
        return "\n".join(rows)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "by_poet": self.by_poet,
            "by_label": self.by_label,
            "by_position": self.by_position,
            "by_feature": self.by_feature,
            "by_window": self.by_window,
        }


def _sorted_counts(counter: Counter, order: Sequence[str] | None = None) -> dict:
    if order is not None:
        return {k: counter[k] for k in order if counter[k]}
    return dict(sorted(counter.items(), key=lambda kv: (-kv[1], kv[0])))


def corpus_stats(records: Iterable) -> CorpusStats:
    """Counts by poet, label string, position and normalized feature.

    Anything with ``label`` and ``poet`` attributes can be counted, so gold
    identification cases go through the same table as extracted pairs.
    """
    poets, labels, positions, feats, windows = Counter(), Counter(), Counter(), Counter(), Counter()
    total = 0
    for rec in records:
        total += 1
        poets[rec.poet] += 1
        labels[format_label(rec.label)] += 1
        positions[rec.label.position] += 1
        feats.update(normalized_features(rec.label))
        window = getattr(rec, "window", None)
        if window is not None:
            windows[str(window)] += 1
    return CorpusStats(
        total=total,
        by_poet=_sorted_counts(poets),
        by_label=_sorted_counts(labels),
        by_position=_sorted_counts(positions, ("M", "F2", "F3")),
        by_feature=_sorted_counts(feats, ("PURE", "RICH", "IDV", "IMPERFECT", "MOSAIC", "COPY")),
        by_window=_sorted_counts(windows),
    )


# ---------------------------------------------------------------------------
# persistence

def save_dataset(records: Iterable[RhymePairRecord], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")
            n += 1
    return n


def _iter_jsonl(path: Path) -> Iterator[tuple[int, object]]:
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield line_no, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(line_no, f"invalid JSON ({exc.msg})") from exc


def load_dataset(path: str | Path) -> list[RhymePairRecord]:
    return [_record_from_obj(obj, n) for n, obj in _iter_jsonl(Path(path))]
