"""Rhyme domains and the compound-label rhyme taxonomy.

A pair of line endings is classified in four steps: stress position,
perfect-match check on the post-stress material, feature detection
(RICH onset, IDV pre-stress vowel, MOSAIC word crossing) and, when the
match is not perfect, the kind of imperfection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .phonology import (
    Phone,
    PhonologyError,
    NoStress,
    EmptyLine,
    fuse_clitics,
    tokenize,
)

__all__ = [
    "POSITIONS",
    "POSITION_BY_INDEX",
    "FEATURES",
    "RICH_SUBTYPES",
    "IMP_SUBTYPES",
    "RhymeDomain",
    "RhymeLabel",
    "ClassifierError",
    "NoStressFound",
    "NotARhyme",
    "StressMismatch",
    "LabelError",
    "UnknownSegment",
    "MissingPosition",
    "extract_domain",
    "classify_pair",
    "classify_lines",
    "compare_domains",
    "onset_match",
    "format_label",
    "parse_label",
    "normalized_features",
    "coarsen",
    "labels_match",
]

POSITIONS = ("M", "F2", "F3")
POSITION_BY_INDEX = {1: "M", 2: "F2", 3: "F3"}
FEATURES = ("PURE", "RICH", "IDV", "MOSAIC", "COPY", "IMPERFECT")
RICH_SUBTYPES = ("TR-S", "TR-CC", "PR-C1", "PR-C2")
IMP_SUBTYPES = ("IMP-V", "IMP-C", "IMP-0F", "IMP-0M")
BASE_QUALITIES = frozenset({"PURE", "IMPERFECT", "COPY"})


class ClassifierError(ValueError):
    pass


class NoStressFound(ClassifierError):
    pass


class NotARhyme(ClassifierError):
    pass


class StressMismatch(NotARhyme):
    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(f"stress mismatch: {expected} vs {found}")


class LabelError(ValueError):
    pass


class UnknownSegment(LabelError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"unknown label segment {token!r}")


class MissingPosition(LabelError):
    pass


# ---------------------------------------------------------------------------
# domains

@dataclass(frozen=True)
class RhymeDomain:
    domain_phones: tuple[Phone, ...]
    stressed_onset: tuple[Phone, ...]
    pre_stress_vowel: Optional[Phone]
    word_span: int
    source_words: tuple[str, ...]
    stress_from_end: int

    def __post_init__(self):
        first = self.domain_phones[0] if self.domain_phones else None
        if first is None or not first.is_vowel or not first.stressed:
            raise ValueError("a domain starts at its stressed vowel")
        if self.word_span < 1:
            raise ValueError("word_span must be positive")

    @property
    def position(self) -> str:
        return POSITION_BY_INDEX[self.stress_from_end]

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(p.symbol for p in self.domain_phones)

    @property
    def onset_symbols(self) -> tuple[str, ...]:
        return tuple(p.symbol for p in self.stressed_onset)

    @property
    def word(self) -> str:
        return " ".join(self.source_words)


def extract_domain(line: str) -> RhymeDomain:
    """Rhyme domain of the last phonological word of a verse line."""
    tokens = tokenize(line)
    try:
        words = fuse_clitics(tokens)
    except (NoStress, EmptyLine) as exc:
        raise NoStressFound(f"no stress at the end of {line!r}: {exc}") from exc
    final = words[-1]

    syllables = final.syllables
    stressed = len(syllables) - final.stress_from_end
    syl = syllables[stressed]
    start = sum(len(s.phones) for s in syllables[:stressed])
    nucleus_at = start + len(syl.onset)
    phones = final.phones
    vowel_at = next(i for i in range(nucleus_at, len(phones)) if phones[i].stressed)

    pre_vowel = None
    for i in range(start - 1, final.host_offset - 1, -1):
        if phones[i].is_vowel:
            pre_vowel = phones[i]
            break

    host = final.host_words
    return RhymeDomain(
        domain_phones=phones[vowel_at:],
        stressed_onset=syl.onset,
        pre_stress_vowel=pre_vowel,
        word_span=len(host),
        source_words=host,
        stress_from_end=final.stress_from_end,
    )


# ---------------------------------------------------------------------------
# labels

@dataclass(frozen=True)
class RhymeLabel:
    position: str
    features: frozenset = field(default_factory=frozenset)
    rich_subtype: Optional[str] = None
    imp_subtype: Optional[str] = None

    def __post_init__(self):
        if self.position not in POSITIONS:
            raise ValueError(f"bad position {self.position!r}")
        object.__setattr__(self, "features", frozenset(self.features))
        unknown = self.features - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown features {sorted(unknown)}")
        if self.rich_subtype is not None and "RICH" not in self.features:
            raise ValueError("rich_subtype without RICH")
        if self.imp_subtype is not None and "IMPERFECT" not in self.features:
            raise ValueError("imp_subtype without IMPERFECT")

    @property
    def is_engine_valid(self) -> bool:
        """True for labels the classifier can emit (subtypes always set)."""
        return (
            len(self.features & BASE_QUALITIES) == 1
            and ("RICH" not in self.features or self.rich_subtype is not None)
            and ("IMPERFECT" not in self.features or self.imp_subtype is not None)
        )

    def __str__(self) -> str:
        return format_label(self)


def format_label(label: RhymeLabel) -> str:
    parts = [label.position]
    if "RICH" in label.features:
        parts.append(label.rich_subtype or "RICH")
    if "IDV" in label.features:
        parts.append("IDV")
    if "MOSAIC" in label.features:
        parts.append("MOSAIC")
    if "IMPERFECT" in label.features:
        parts.append(label.imp_subtype or "IMP")
    if "PURE" in label.features:
        parts.append("PURE")
    if "COPY" in label.features:
        parts.append("COPY")
    return "-".join(parts)


_FOLLOWERS = {
    "TR": {"S": "TR-S", "CC": "TR-CC"},
    "PR": {"C1": "PR-C1", "C2": "PR-C2"},
    "IMP": {"V": "IMP-V", "C": "IMP-C", "0F": "IMP-0F", "0M": "IMP-0M", "OF": "IMP-0F", "OM": "IMP-0M"},
}
# lenient forms seen in model answers
_BARE_RICH = {"C1": "PR-C1", "C2": "PR-C2", "CC": "TR-CC"}
_ALIASES = {"MOS": "MOSAIC", "2W": "MOSAIC", "IMPERFECT": "IMP"}


def parse_label(text: str) -> RhymeLabel:
    """Inverse of format_label; also accepts bare RICH/IMP and C1/C2/CC."""
    tokens = [t for t in text.strip().upper().split("-") if t]
    position = None
    features: set[str] = set()
    rich = imp = None
    i = 0
    while i < len(tokens):
        tok = _ALIASES.get(tokens[i], tokens[i])
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if tok in POSITIONS:
            if position is not None and position != tok:
                raise UnknownSegment(tok)
            position = tok
        elif tok in ("TR", "PR"):
            features.add("RICH")
            if nxt in _FOLLOWERS[tok]:
                rich = _FOLLOWERS[tok][nxt]
                i += 1
        elif tok in _BARE_RICH:
            features.add("RICH")
            rich = rich or _BARE_RICH[tok]
        elif tok == "RICH":
            features.add("RICH")
        elif tok == "IMP":
            features.add("IMPERFECT")
            if nxt in _FOLLOWERS["IMP"]:
                imp = _FOLLOWERS["IMP"][nxt]
                i += 1
        elif tok in ("IDV", "MOSAIC", "PURE", "COPY"):
            features.add(tok)
        else:
            raise UnknownSegment(tokens[i])
        i += 1
    if position is None:
        raise MissingPosition(f"no M/F2/F3 segment in {text!r}")
    return RhymeLabel(position, frozenset(features), rich, imp)


def normalized_features(label: RhymeLabel) -> frozenset:
    """Feature names with PURE dropped whenever another feature is present."""
    feats = label.features
    if "PURE" in feats and len(feats) > 1:
        feats = feats - {"PURE"}
    return frozenset(feats)


def coarsen(label: RhymeLabel, like: RhymeLabel | None = None) -> RhymeLabel:
    """PURE-normalized label, with subtypes kept only where ``like`` has them."""
    feats = normalized_features(label)
    keep_rich = like is None or like.rich_subtype is not None
    keep_imp = like is None or like.imp_subtype is not None
    return RhymeLabel(
        label.position,
        feats,
        label.rich_subtype if keep_rich and "RICH" in feats else None,
        label.imp_subtype if keep_imp and "IMPERFECT" in feats else None,
    )


def labels_match(predicted: RhymeLabel, gold: RhymeLabel) -> bool:
    """Position and normalized features agree; gold subtypes must be matched."""
    return format_label(coarsen(predicted, gold)) == format_label(coarsen(gold))


# ---------------------------------------------------------------------------
# classification

def compare_domains(a: tuple[str, ...], b: tuple[str, ...], vowels: frozenset) -> Optional[str]:
    """PURE, an IMP-* subtype, or None when the material does not correspond.

    Equal lengths are compared slot by slot; a one-consonant length
    difference must vanish by deleting that consonant. Every mismatch must
    belong to one class, and mismatches may not outnumber matches.
    """
    if a == b:
        return "PURE"
    if len(a) == len(b):
        classes = set()
        diffs = 0
        for x, y in zip(a, b):
            if x == y:
                continue
            diffs += 1
            if (x in vowels) != (y in vowels):
                return None
            classes.add("IMP-V" if x in vowels else "IMP-C")
        if len(classes) != 1 or diffs > len(a) - diffs:
            return None
        return classes.pop()
    longer, shorter = (a, b) if len(a) > len(b) else (b, a)
    if len(longer) - len(shorter) != 1:
        return None
    # prefer the final slot so that -ς/zero reads as IMP-0F
    for k in range(len(longer) - 1, -1, -1):
        if longer[k] in vowels:
            continue
        if longer[:k] + longer[k + 1:] == shorter:
            return "IMP-0F" if k == len(longer) - 1 else "IMP-0M"
    return None


def onset_match(a: tuple[str, ...], b: tuple[str, ...]) -> Optional[tuple[str, tuple[str, ...]]]:
    """RICH subtype and the shared onset material, or None.

    Total rich needs identical onsets; partial rich shares a left prefix of
    one (PR-C1) or two (PR-C2) consonants.
    """
    if not a or not b:
        return None
    if a == b:
        return ("TR-S" if len(a) == 1 else "TR-CC"), a
    shared = 0
    for x, y in zip(a, b):
        if x != y:
            break
        shared += 1
    if shared == 1:
        return "PR-C1", a[:1]
    if shared >= 2:
        return "PR-C2", a[:2]
    return None


_VOWELS = frozenset({"a", "e", "i", "o", "u"})


def classify_pair(a: RhymeDomain, b: RhymeDomain) -> RhymeLabel:
    if a.stress_from_end != b.stress_from_end:
        raise StressMismatch(a.position, b.position)
    position = a.position

    base = compare_domains(a.symbols, b.symbols, _VOWELS)
    if base is None:
        raise NotARhyme(f"no correspondence between {a.word!r} and {b.word!r}")

    if base == "PURE" and a.source_words == b.source_words:
        return RhymeLabel(position, frozenset({"COPY"}))

    features = set()
    rich = imp = None
    if base == "PURE":
        features.add("PURE")
    else:
        features.add("IMPERFECT")
        imp = base
    onset = onset_match(a.onset_symbols, b.onset_symbols)
    if onset is not None:
        features.add("RICH")
        rich = onset[0]
    if (
        a.pre_stress_vowel is not None
        and b.pre_stress_vowel is not None
        and a.pre_stress_vowel.symbol == b.pre_stress_vowel.symbol
    ):
        features.add("IDV")
    if a.word_span >= 2 or b.word_span >= 2:
        features.add("MOSAIC")
    return RhymeLabel(position, frozenset(features), rich, imp)


def classify_lines(line_a: str, line_b: str) -> RhymeLabel:
    return classify_pair(extract_domain(line_a), extract_domain(line_b))
