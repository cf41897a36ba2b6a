"""Generate-Verify-Refine: LLM drafting checked by the symbolic verifier.

The verifier reports problems as :class:`VerifierError` values whose
messages are stable strings; they are pasted verbatim into the next
prompt, so their wording is part of the interface (see docs/labels.md).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .classifier import (
    NoStressFound,
    NotARhyme,
    RhymeDomain,
    RhymeLabel,
    classify_pair,
    extract_domain,
    format_label,
    onset_match,
)
from .llm_bridge import TAXONOMY, Completer, LLMError
from .phonology import PhonologyError

__all__ = [
    "MAX_ATTEMPTS",
    "GENERATION_TEMPERATURE",
    "REQUESTABLE",
    "GenerationConstraint",
    "VerifierError",
    "Attempt",
    "GenerationTrace",
    "GenerationAborted",
    "mated_pairs",
    "satisfies",
    "violation",
    "verify_rhymes",
    "format_errors",
    "parse_poem",
    "build_generation_prompt",
    "update_prompt",
    "generate_refine",
]

MAX_ATTEMPTS = 15
GENERATION_TEMPERATURE = 0.7
REQUESTABLE = ("IDV", "MOSAIC", "RICH", "IMPERFECT", "PURE", "COPY")


@dataclass(frozen=True)
class GenerationConstraint:
    theme: str
    position: str
    required_features: frozenset = frozenset()
    num_lines: int = 4
    scheme: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "required_features", frozenset(self.required_features))
        if self.position not in ("M", "F2", "F3"):
            raise ValueError(f"bad position {self.position!r}")
        unknown = self.required_features - set(REQUESTABLE)
        if unknown:
            raise ValueError(f"unknown features {sorted(unknown)}")
        if len(self.required_features & {"PURE", "IMPERFECT", "COPY"}) > 1:
            raise ValueError("PURE, IMPERFECT and COPY exclude each other")
        if self.num_lines < 2 or self.num_lines % 2:
            raise ValueError("num_lines must be an even number >= 2")
        scheme = self.scheme or "".join(chr(ord("A") + i // 2) for i in range(self.num_lines))
        scheme = scheme.upper()
        if len(scheme) != self.num_lines:
            raise ValueError(f"scheme {scheme!r} does not have {self.num_lines} lines")
        lonely = [c for c in set(scheme) if scheme.count(c) < 2]
        if lonely:
            raise ValueError(f"scheme letters without a partner: {''.join(sorted(lonely))}")
        object.__setattr__(self, "scheme", scheme)

    @property
    def feature_class(self) -> str:
        if not self.required_features:
            return "BASIC"
        return "+".join(f for f in REQUESTABLE if f in self.required_features)

    @property
    def rhyme_type(self) -> str:
        return "-".join([self.position] + [f for f in REQUESTABLE if f in self.required_features])

    def to_dict(self) -> dict:
        return {
            "theme": self.theme,
            "position": self.position,
            "required_features": [f for f in REQUESTABLE if f in self.required_features],
            "num_lines": self.num_lines,
            "scheme": self.scheme,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GenerationConstraint":
        return cls(obj["theme"], obj["position"], frozenset(obj.get("required_features", ())),
                   int(obj.get("num_lines", 4)), obj.get("scheme"))


@dataclass(frozen=True)
class VerifierError:
    kind: str               # StressMismatch | FeatureViolation | NoRhyme | NoStressFound | LineCount
    line_pair: tuple[int, int]
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "line_pair": list(self.line_pair), "message": self.message}


def mated_pairs(scheme: str) -> list[tuple[int, int]]:
    """Consecutive lines sharing a scheme letter, in line order."""
    last: dict[str, int] = {}
    pairs = []
    for i, c in enumerate(scheme):
        if c in last:
            pairs.append((last[c], i))
        last[c] = i
    return sorted(pairs)


# ---------------------------------------------------------------------------
# feature checks

def violation(label: RhymeLabel, required: frozenset) -> Optional[str]:
    """The first requirement a label fails, or None."""
    feats = label.features
    if "PURE" in required:
        for bad in ("RICH", "IMPERFECT", "COPY"):
            if bad in feats:
                return bad
        if "PURE" not in feats:
            return "PURE"
    for f in REQUESTABLE:
        if f in required and f not in feats:
            return f
    return None


def satisfies(label: RhymeLabel, constraint: GenerationConstraint) -> bool:
    return label.position == constraint.position and violation(label, constraint.required_features) is None


def _feature_message(label: RhymeLabel, missing: str, required: frozenset,
                     a: RhymeDomain, b: RhymeDomain) -> str:
    words = f"'{a.word}'/'{b.word}'"
    if "PURE" in required and missing == "RICH":
        shared = onset_match(a.onset_symbols, b.onset_symbols)
        onset = "".join(shared[1]) if shared else ""
        return f"PURE requested but {words} is RICH (Onset: /{onset}/)."
    if "PURE" in required and missing == "IMPERFECT":
        return f"PURE requested but {words} is IMPERFECT ({label.imp_subtype})."
    if "PURE" in required and missing == "COPY":
        return f"PURE requested but {words} is COPY (same word repeated)."
    return f"{missing} requested but {words} is {format_label(label)}."


# ---------------------------------------------------------------------------
# verification

def verify_rhymes(poem: Sequence[str], constraint: GenerationConstraint) -> list[VerifierError]:
    """All problems with a poem; an empty list means the poem is valid."""
    lines = list(poem)
    if len(lines) != constraint.num_lines:
        return [VerifierError(
            "LineCount", (0, 0),
            f"Line count: expected {constraint.num_lines} lines, found {len(lines)}.",
        )]
    domains: dict[int, Optional[RhymeDomain]] = {}
    errors: list[VerifierError] = []
    for i, j in mated_pairs(constraint.scheme):
        for k in (i, j):
            if k not in domains:
                try:
                    domains[k] = extract_domain(lines[k])
                except (NoStressFound, PhonologyError):
                    domains[k] = None
        a, b = domains[i], domains[j]
        if a is None or b is None:
            bad = i if a is None else j
            errors.append(VerifierError(
                "NoStressFound", (i, j),
                f"No stress found: line {bad + 1} '{lines[bad].strip()}' has no usable stressed word at its end.",
            ))
            continue
        try:
            label = classify_pair(a, b)
        except NotARhyme:   # includes words stressed on different syllables
            errors.append(VerifierError("NoRhyme", (i, j), f"No rhyme: '{a.word}' / '{b.word}'."))
            continue
        if label.position != constraint.position:
            errors.append(VerifierError(
                "StressMismatch", (i, j),
                f"Stress mismatch: Expected {constraint.position}, found {label.position} "
                f"for '{a.word}'/'{b.word}'.",
            ))
            continue
        missing = violation(label, constraint.required_features)
        if missing is not None:
            errors.append(VerifierError(
                "FeatureViolation", (i, j),
                _feature_message(label, missing, constraint.required_features, a, b),
            ))
    return errors


def format_errors(errors: Iterable[VerifierError]) -> str:
    ordered = sorted(errors, key=lambda e: e.line_pair)
    return "".join(e.message + "\n" for e in ordered)


# ---------------------------------------------------------------------------
# prompts

_GREEK = re.compile(r"[Ͱ-Ͽἀ-῿]")
_TAGS = re.compile(r"</?poem>|```\w*", re.IGNORECASE)
_NUMBERING = re.compile(r"^\s*(?:\d+[.)]\s*|[-*>]\s+)")


def parse_poem(text: str) -> list[str]:
    """Verse lines of an LLM reply: Greek-bearing lines, markup removed."""
    out = []
    for raw in _TAGS.sub("\n", text).splitlines():
        line = _NUMBERING.sub("", raw).strip().strip("*_\"«»")
        if line and _GREEK.search(line):
            out.append(line.strip())
    return out


def build_generation_prompt(constraint: GenerationConstraint) -> str:
    feats = constraint.rhyme_type
    pairs = ", ".join(f"{i + 1}-{j + 1}" for i, j in mated_pairs(constraint.scheme))
    return (
        f"Write a {constraint.num_lines}-line poem in Modern Greek with {feats} rhyme "
        f"on theme: {constraint.theme}.\n\n"
        f"{TAXONOMY}\n\n"
        f"Rhyme scheme: {constraint.scheme} (rhyming lines: {pairs}). Every rhyming pair must be "
        f"{constraint.position}"
        + (f" and carry {', '.join(f for f in REQUESTABLE if f in constraint.required_features)}"
           if constraint.required_features else "")
        + ".\nWrite accents on every word. Reply with the poem only, one verse per line.\n"
    )


def update_prompt(base_prompt: str, poem: Sequence[str], feedback: str) -> str:
    return (
        base_prompt
        + "\nYour previous attempt:\n" + "\n".join(poem) + "\n"
        + "\nA phonological verifier rejected it:\n" + feedback
        + "\nRewrite the poem so that every rhyming pair satisfies the constraint.\n"
    )


# ---------------------------------------------------------------------------
# the loop

@dataclass(frozen=True)
class Attempt:
    poem: tuple[str, ...]
    errors: tuple[VerifierError, ...]
    raw: str = ""

    @property
    def valid(self) -> bool:
        return not self.errors


@dataclass
class GenerationTrace:
    constraint: GenerationConstraint
    verify: bool
    attempts: list = field(default_factory=list)

    @property
    def attempts_used(self) -> int:
        return len(self.attempts)

    @property
    def valid(self) -> bool:
        return bool(self.attempts) and self.attempts[-1].valid

    @property
    def warning(self) -> bool:
        """Loop ran out of attempts without a valid poem."""
        return self.verify and bool(self.attempts) and not self.valid

    @property
    def final_poem(self) -> str:
        return "\n".join(self.attempts[-1].poem) if self.attempts else ""

    def to_jsonl(self) -> str:
        rows = []
        for n, att in enumerate(self.attempts, 1):
            rows.append(json.dumps({
                "attempt": n,
                "constraint": self.constraint.to_dict(),
                "verify": self.verify,
                "poem": list(att.poem),
                "errors": [e.to_dict() for e in att.errors],
                "valid": att.valid,
            }, ensure_ascii=False))
        return "".join(r + "\n" for r in rows)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    def render(self) -> str:
        """Human-readable attempt log."""
        out = []
        for n, att in enumerate(self.attempts, 1):
            out.append(f"--- attempt {n} ---")
            out.extend(att.poem)
            out.append(format_errors(att.errors).rstrip("\n") or "(valid)")
        if self.warning:
            out.append(f"WARNING: no valid poem after {self.attempts_used} attempts")
        return "\n".join(out)


class GenerationAborted(RuntimeError):
    """Transport failure mid-loop; ``trace`` holds the attempts made so far."""

    def __init__(self, trace: GenerationTrace, cause: Exception):
        super().__init__(f"generation aborted after {trace.attempts_used} attempt(s): {cause}")
        self.trace = trace
        self.cause = cause


def generate_refine(llm: Completer, constraint: GenerationConstraint, verify: bool = True,
                    max_attempts: int = MAX_ATTEMPTS, temperature: float = GENERATION_TEMPERATURE,
                    on_attempt: Callable[[int, Attempt], None] | None = None) -> GenerationTrace:
    """Draft, verify and, if ``verify``, feed errors back until valid.

    Without ``verify`` the single draft is still scored so that both modes
    are measured the same way.
    """
    if not 1 <= max_attempts <= MAX_ATTEMPTS:
        raise ValueError(f"max_attempts must be in [1, {MAX_ATTEMPTS}]")
    trace = GenerationTrace(constraint, verify)
    base = build_generation_prompt(constraint)
    prompt = base
    budget = max_attempts if verify else 1
    while trace.attempts_used < budget:
        try:
            raw = llm.complete(prompt, temperature=temperature)
        except LLMError as exc:
            raise GenerationAborted(trace, exc) from exc
        poem = parse_poem(raw)
        att = Attempt(tuple(poem), tuple(verify_rhymes(poem, constraint)), raw)
        trace.attempts.append(att)
        if on_attempt is not None:
            on_attempt(trace.attempts_used, att)
        if att.valid:
            break
        prompt = update_prompt(base, poem, format_errors(att.errors))
    return trace
