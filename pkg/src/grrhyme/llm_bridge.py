"""Chat-completion client, prompt strategies and answer parsing.

Every model is reached through the same OpenAI-style ``/chat/completions``
wire shape. Tests and offline runs swap the network for
``httpx.MockTransport`` or for :class:`ScriptedLLM`, which replays answers
from a JSONL script.
"""
from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Protocol, Sequence

import httpx

from .classifier import (
    ClassifierError,
    LabelError,
    RhymeLabel,
    extract_domain,
    format_label,
    parse_label,
)
from .corpus import RhymePairRecord
from .phonology import PhonologyError, fuse_clitics, normalize_text, tokenize

log = logging.getLogger(__name__)

__all__ = [
    "ModelEndpoint",
    "PromptStrategy",
    "STRATEGIES",
    "ParseFailure",
    "LLMError",
    "AuthError",
    "Timeout",
    "RateLimited",
    "ServerError",
    "MalformedResponse",
    "ScriptExhausted",
    "ConfigError",
    "DatasetEmpty",
    "ChatClient",
    "ScriptedLLM",
    "Completer",
    "TAXONOMY",
    "build_identification_prompt",
    "retrieve_examples",
    "complete",
    "load_endpoints",
    "parse_identification_response",
]


# ---------------------------------------------------------------------------
# errors

class LLMError(RuntimeError):
    pass


class AuthError(LLMError):
    pass


class Timeout(LLMError):
    pass


class RateLimited(LLMError):
    pass


class ServerError(LLMError):
    pass


class MalformedResponse(LLMError):
    pass


class ScriptExhausted(LLMError):
    pass


class ConfigError(ValueError):
    pass


class DatasetEmpty(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    base_url: str
    model: str
    api_key_ref: str = "OPENAI_API_KEY"
    max_tokens: int = 1024
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    backoff: float = 1.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError(f"{self.name}: timeout must be > 0")
        if self.max_retries < 0:
            raise ConfigError(f"{self.name}: max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ConfigError(f"{self.name}: max_concurrency must be >= 1")


def load_endpoints(path: str | Path) -> dict[str, ModelEndpoint]:
    """Read ``{"endpoints": [{name, base_url, model, ...}, ...]}``."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read endpoint config {path}: {exc}") from exc
    items = data.get("endpoints") if isinstance(data, dict) else None
    if not isinstance(items, list):
        raise ConfigError("config needs an 'endpoints' list")
    known = set(ModelEndpoint.__dataclass_fields__)
    out: dict[str, ModelEndpoint] = {}
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"endpoint #{i} is not an object")
        extra = set(item) - known
        if extra:
            raise ConfigError(f"endpoint #{i}: unknown keys {sorted(extra)}")
        try:
            ep = ModelEndpoint(**item)
        except TypeError as exc:
            raise ConfigError(f"endpoint #{i}: {exc}") from exc
        out[ep.name] = ep
    return out


@dataclass(frozen=True)
class PromptStrategy:
    kind: str = "Structured"
    rag: bool = False
    k_examples: int = 3

    def __post_init__(self):
        if self.kind not in ("Structured", "CoT"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.rag and self.k_examples < 1:
            raise ValueError("k_examples must be >= 1 with RAG")

    @property
    def name(self) -> str:
        return self.kind + ("+RAG" if self.rag else "")

    @classmethod
    def from_name(cls, name: str, k_examples: int = 3) -> "PromptStrategy":
        kind, _, rag = name.partition("+")
        if rag not in ("", "RAG"):
            raise ValueError(f"unknown strategy {name!r}")
        return cls(kind, rag == "RAG", k_examples)


STRATEGIES = (
    PromptStrategy("Structured", False),
    PromptStrategy("Structured", True),
    PromptStrategy("CoT", False),
    PromptStrategy("CoT", True),
)


# ---------------------------------------------------------------------------
# prompts

TAXONOMY = """\
Modern Greek rhyme taxonomy.

Position (where the stress of the rhyme words falls, counted from the end):
  M   stress on the last syllable (oxytone), e.g. καρδιά / φωτιά
  F2  stress on the second-to-last syllable (paroxytone)
  F3  stress on the third-to-last syllable (proparoxytone)

Match quality (exactly one):
  PURE       the sounds from the stressed vowel to the end are identical
  IMP-V      imperfect: one vowel differs
  IMP-C      imperfect: one consonant differs
  IMP-0F     imperfect: one side has an extra final consonant
  IMP-0M     imperfect: one side has an extra consonant inside the rhyme
  COPY       the same word is repeated

Optional features:
  TR-S / TR-CC   rich rhyme: the whole onset of the stressed syllable matches
                 (single consonant / consonant cluster)
  PR-C1 / PR-C2  partially rich: the onsets share their first one / two consonants
  IDV            the vowel right before the stressed syllable is the same
  MOSAIC         the rhyme spans more than one written word (e.g. with clitics)

Judge by sound, not spelling: ι, η, υ, ει, οι, υι all sound /i/; ο and ω are /o/;
ε and αι are /e/.

A label joins the parts with hyphens in this order:
position, rich subtype, IDV, MOSAIC, imperfect subtype, PURE or COPY.
Examples: M-PURE, F2-TR-S-IDV-PURE, F3-IMP-C, M-IDV-MOSAIC-PURE."""

COT_STEPS = """\
Work through these steps before answering:
1. Find the last stressed vowel of each line and decide M, F2 or F3.
2. Transcribe both endings from the stressed vowel on and compare them sound by sound.
3. If they differ, name the single difference (vowel, consonant, final or medial consonant).
4. Compare the onsets of the stressed syllables (rich rhyme).
5. Compare the vowels just before the stressed syllables (IDV).
6. Check whether either rhyme crosses a word boundary (MOSAIC)."""

ANSWER_FORMAT = "Finish with one line of the form\nLABEL: <compound label>"


def _example_block(i: int, rec: RhymePairRecord) -> str:
    return (
        f"Example {i}:\n"
        f"  Line 1: {rec.line_a}\n"
        f"  Line 2: {rec.line_b}\n"
        f"  LABEL: {format_label(rec.label)}"
    )


def build_identification_prompt(line_a: str, line_b: str, strategy: PromptStrategy,
                                examples: Sequence[RhymePairRecord] = ()) -> str:
    if examples and not strategy.rag:
        raise ValueError("examples given to a strategy without RAG")
    parts = [
        "You are an expert in Modern Greek prosody.",
        TAXONOMY,
    ]
    if examples:
        parts.append("Labelled examples from a poetry corpus:\n\n"
                     + "\n\n".join(_example_block(i, r) for i, r in enumerate(examples, 1)))
    parts.append(f"Classify the rhyme between these two lines.\nLine 1: {line_a}\nLine 2: {line_b}")
    if strategy.kind == "CoT":
        parts.append(COT_STEPS)
    else:
        parts.append("Answer directly without explanation.")
    parts.append(ANSWER_FORMAT)
    return "\n\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# retrieval

def _tail(line: str) -> tuple[str, ...]:
    """Phone symbols of the line-final stress group (rhyme domain included)."""
    try:
        return tuple(p.symbol for p in fuse_clitics(tokenize(line))[-1].phones)
    except (PhonologyError, IndexError):
        return ()


def _position(line: str) -> Optional[str]:
    try:
        return extract_domain(line).position
    except (ClassifierError, PhonologyError):
        return None


def _common_suffix(a: Sequence[str], b: Sequence[str]) -> int:
    n = 0
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            break
        n += 1
    return n


def retrieve_examples(dataset: Sequence[RhymePairRecord], query: tuple[str, str],
                      k: int) -> list[RhymePairRecord]:
    """Top-k records by shared phone suffix, then stress position, then order.

    The suffix is measured on the line-final stress group, so records whose
    endings also share onsets and pre-stress vowels rank above bare rhymes.
    """
    if not dataset:
        raise DatasetEmpty("retrieval dataset is empty")
    qa, qb = (_tail(x) for x in query)
    q_pos = _position(query[0]) or _position(query[1])
    q_key = frozenset(normalize_text(x) for x in query)
    scored = []
    for idx, rec in enumerate(dataset):
        if frozenset((normalize_text(rec.line_a), normalize_text(rec.line_b))) == q_key:
            continue
        ra, rb = _tail(rec.line_a), _tail(rec.line_b)
        overlap = max(_common_suffix(qa, ra) + _common_suffix(qb, rb),
                      _common_suffix(qa, rb) + _common_suffix(qb, ra))
        same_pos = int(rec.label.position == q_pos)
        scored.append((-overlap, -same_pos, idx, rec))
    scored.sort(key=lambda t: t[:3])
    return [t[3] for t in scored[:k]]


# ---------------------------------------------------------------------------
# completion

class Completer(Protocol):
    name: str

    def complete(self, prompt: str, temperature: float | None = None) -> str: ...


_SEMAPHORES: dict[str, threading.BoundedSemaphore] = {}
_SEM_LOCK = threading.Lock()


def _semaphore(ep: ModelEndpoint) -> threading.BoundedSemaphore:
    with _SEM_LOCK:
        sem = _SEMAPHORES.get(ep.name)
        if sem is None:
            sem = _SEMAPHORES[ep.name] = threading.BoundedSemaphore(ep.max_concurrency)
        return sem


class ChatClient:
    """HTTP chat-completion client with exponential backoff.

    ``retries`` counts every re-sent request over the client's lifetime.
    """

    def __init__(self, endpoint: ModelEndpoint, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 env: Mapping[str, str] | None = None):
        self.endpoint = endpoint
        self.name = endpoint.name
        self._sleep = sleep
        self._env = os.environ if env is None else env
        self._http = httpx.Client(transport=transport, timeout=endpoint.timeout)
        self.retries = 0
        self.calls = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict[str, str]:
        key = self._env.get(self.endpoint.api_key_ref)
        if not key:
            raise AuthError(f"{self.name}: environment variable {self.endpoint.api_key_ref} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _delay(self, attempt: int, response: httpx.Response | None) -> float:
        if response is not None:
            after = response.headers.get("retry-after")
            if after:
                try:
                    return max(0.0, float(after))
                except ValueError:
                    pass
        return self.endpoint.backoff * (2 ** attempt)

    def complete(self, prompt: str, temperature: float | None = None) -> str:
        ep = self.endpoint
        payload = {
            "model": ep.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": ep.temperature if temperature is None else temperature,
            "max_tokens": ep.max_tokens,
        }
        headers = self._headers()
        url = ep.base_url.rstrip("/") + "/chat/completions"
        last: Exception | None = None
        with _semaphore(ep):
            for attempt in range(ep.max_retries + 1):
                if attempt:
                    self.retries += 1
                response = None
                self.calls += 1
                try:
                    response = self._http.post(url, json=payload, headers=headers)
                except (httpx.TimeoutException, httpx.NetworkError) as exc:
                    last = Timeout(f"{self.name}: {type(exc).__name__}: {exc}")
                else:
                    status = response.status_code
                    if status in (401, 403):
                        raise AuthError(f"{self.name}: HTTP {status}")
                    if status == 429:
                        last = RateLimited(f"{self.name}: HTTP 429 after {attempt + 1} attempt(s)")
                    elif status >= 500:
                        last = ServerError(f"{self.name}: HTTP {status}")
                    elif status >= 400:
                        raise LLMError(f"{self.name}: HTTP {status}: {response.text[:200]}")
                    else:
                        return _content(response, self.name)
                if attempt < ep.max_retries:
                    delay = self._delay(attempt, response)
                    log.info("%s: %s, retrying in %.1fs", self.name, last, delay)
                    self._sleep(delay)
        assert last is not None
        raise last


def _content(response: httpx.Response, name: str) -> str:
    try:
        body = response.json()
        content = body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"{name}: unexpected response body") from exc
    if not isinstance(content, str):
        raise MalformedResponse(f"{name}: message content is not text")
    return content


def complete(endpoint: ModelEndpoint, prompt: str, transport: httpx.BaseTransport | None = None,
             sleep: Callable[[float], None] = time.sleep) -> str:
    """One-shot convenience wrapper around :class:`ChatClient`."""
    with ChatClient(endpoint, transport=transport, sleep=sleep) as client:
        return client.complete(prompt)


@dataclass
class _ScriptEntry:
    response: str
    match: Optional[str] = None
    times: int = 1      # 0 means unlimited


@dataclass
class ScriptedLLM:
    """Offline stand-in that answers from a script.

    Entries with ``match`` answer any prompt containing that substring and are
    tried first; the remaining entries are consumed in order, each ``times``
    times (0 = forever).
    """
    entries: list = field(default_factory=list)
    name: str = "mock"
    prompts: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = [e if isinstance(e, _ScriptEntry) else _ScriptEntry(**e) if isinstance(e, dict)
                        else _ScriptEntry(str(e)) for e in self.entries]
        self._used = [0] * len(self.entries)

    @classmethod
    def from_responses(cls, responses: Iterable[str], name: str = "mock", loop_last: bool = False):
        entries = [_ScriptEntry(r) for r in responses]
        if loop_last and entries:
            entries[-1].times = 0
        return cls(entries, name)

    @classmethod
    def from_jsonl(cls, path: str | Path, name: str | None = None) -> "ScriptedLLM":
        entries = []
        for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                entries.append(_ScriptEntry(obj["response"], obj.get("match"), int(obj.get("times", 1))))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{n}: bad script entry ({exc})") from exc
        return cls(entries, name or Path(path).stem)

    def complete(self, prompt: str, temperature: float | None = None) -> str:
        self.prompts.append(prompt)
        for e in self.entries:
            if e.match is not None and e.match in prompt:
                return e.response
        for i, e in enumerate(self.entries):
            if e.match is None and (e.times == 0 or self._used[i] < e.times):
                self._used[i] += 1
                return e.response
        raise ScriptExhausted(f"{self.name}: script has no answer left")


# ---------------------------------------------------------------------------
# parsing

@dataclass(frozen=True)
class ParseFailure:
    token: str

    def __str__(self) -> str:
        return self.token


_LABEL_LINE = re.compile(r"^[\s*#>`_]*LABEL[\s*`_]*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)
_BRACKETS = re.compile(r"[\[\]'\",()`*{}]")


def _first_token(text: str) -> str:
    parts = text.split()
    return parts[0] if parts else ""


def _candidate(text: str) -> str:
    """Turn answer styles like ``M ['MOSAIC', 'IDV']`` into hyphen form."""
    flat = _BRACKETS.sub(" ", text).strip().rstrip(".;:!")
    return "-".join(flat.split())


def parse_identification_response(text: str) -> RhymeLabel | ParseFailure:
    matches = _LABEL_LINE.findall(text)
    if matches:
        raw = matches[-1].strip()
    else:
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        raw = lines[-1].strip() if lines else ""
    try:
        return parse_label(_candidate(raw))
    except (LabelError, ValueError):
        source = raw if matches else text
        return ParseFailure(_first_token(_BRACKETS.sub(" ", source)) or _first_token(source))
