"""Orthography-driven phonology for Standard Modern Greek.

Converts normalized Greek text into phones, syllables and phonological
words (a stressed host plus any leaning clitics). Stress comes only from
the written accent; unaccented monosyllables are stressless unless they
close a line on their own.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

__all__ = [
    "Phone",
    "Syllable",
    "PhonologicalWord",
    "PhonologyError",
    "NonGreekCharacter",
    "NoVowel",
    "NoStress",
    "MultipleStress",
    "StressOutOfRange",
    "EmptyLine",
    "INVENTORY",
    "ENCLITICS",
    "normalize_text",
    "tokenize",
    "transcribe",
    "syllabify",
    "stress_position",
    "fuse_clitics",
    "format_syllables",
    "strip_accents",
]


class PhonologyError(ValueError):
    pass


class NonGreekCharacter(PhonologyError):
    def __init__(self, char: str, word: str = ""):
        self.char = char
        self.word = word
        super().__init__(f"non-Greek character {char!r} in {word!r}")


class NoVowel(PhonologyError):
    pass


class NoStress(PhonologyError):
    pass


class MultipleStress(PhonologyError):
    pass


class StressOutOfRange(PhonologyError):
    """Stress further back than the antepenultimate syllable."""


class EmptyLine(PhonologyError):
    pass


# ---------------------------------------------------------------------------
# rule tables

def _data_lines(name: str) -> list[str]:
    text = resources.files("grrhyme").joinpath("data", name).read_text(encoding="utf-8")
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _load_inventory() -> dict[str, str]:
    inv = {}
    for line in _data_lines("inventory.tsv"):
        symbol, kind = line.split("\t")
        inv[symbol] = kind
    return inv


def _load_graphemes() -> dict[str, tuple[str, ...]]:
    table = {}
    for line in _data_lines("graphemes.tsv"):
        grapheme, phonemes = line.split("\t")
        table[grapheme] = tuple(phonemes.split())
    return table


INVENTORY: dict[str, str] = _load_inventory()
GRAPHEMES: dict[str, tuple[str, ...]] = _load_graphemes()
LICIT_ONSETS: frozenset[tuple[str, ...]] = frozenset(
    tuple(line.split()) for line in _data_lines("onsets.txt")
)
ENCLITICS: frozenset[str] = frozenset(_data_lines("clitics.txt"))
HIATUS_WORDS: frozenset[str] = frozenset(_data_lines("synizesis_exceptions.txt"))

_MAX_GRAPHEME = max(len(g) for g in GRAPHEMES)
_VOWEL_LETTERS = frozenset("αεηιουω")
_VOWEL_DIGRAPHS = frozenset(g for g in GRAPHEMES if len(g) == 2 and g[0] in _VOWEL_LETTERS)
_VOICED = frozenset({"b", "d", "g", "v", "ð", "z", "ɣ", "j", "m", "n", "l", "r", "dz"})

_ACUTE = "́"
_DIAERESIS = "̈"
# grave and circumflex mark stress in polytonic text
_AS_ACUTE = {"̀", "͂", "́"}
_APOSTROPHES = "’'ʼ‘᾽᾿"
ELISION = "’"


@dataclass(frozen=True)
class Phone:
    symbol: str
    kind: str
    stressed: bool = False
    # consonant that stays with the preceding vowel (the /v,f/ of αυ, ευ)
    coda: bool = False
    # /i/ that never glides (learned words in hiatus)
    hiatus: bool = False

    def __post_init__(self):
        if INVENTORY.get(self.symbol) != self.kind:
            raise ValueError(f"{self.symbol!r} is not a {self.kind} of the inventory")
        if self.stressed and self.kind != "vowel":
            raise ValueError("only vowels carry stress")

    @property
    def is_vowel(self) -> bool:
        return self.kind == "vowel"

    def __str__(self) -> str:
        return ("'" if self.stressed else "") + self.symbol


@dataclass(frozen=True)
class Syllable:
    onset: tuple[Phone, ...]
    nucleus: tuple[Phone, ...]
    coda: tuple[Phone, ...] = ()

    def __post_init__(self):
        if not self.nucleus or not all(p.is_vowel for p in self.nucleus):
            raise ValueError("nucleus must be one or more vowels")
        if any(p.is_vowel for p in self.onset + self.coda):
            raise ValueError("onset and coda hold consonants only")

    @property
    def phones(self) -> tuple[Phone, ...]:
        return self.onset + self.nucleus + self.coda

    @property
    def stressed(self) -> bool:
        return any(p.stressed for p in self.nucleus)

    def __str__(self) -> str:
        mark = "'" if self.stressed else ""
        return mark + "".join(p.symbol for p in self.phones)


@dataclass(frozen=True)
class PhonologicalWord:
    """A stress group: leading proclitics, the host, trailing enclitics."""

    orthography: tuple[str, ...]
    syllables: tuple[Syllable, ...]
    stress_from_end: int
    # leading stressless words that sit outside the host (τον in "τον λαμπρό")
    proclitics: int = 0
    host_offset: int = 0

    @property
    def phones(self) -> tuple[Phone, ...]:
        return tuple(p for s in self.syllables for p in s.phones)

    @property
    def host_words(self) -> tuple[str, ...]:
        return self.orthography[self.proclitics:]

    def __str__(self) -> str:
        return format_syllables(self.syllables)


def format_syllables(syllables: Iterable[Syllable]) -> str:
    return "-".join(str(s) for s in syllables)


# ---------------------------------------------------------------------------
# text normalization

_SPACES = re.compile(r"\s+")


def _is_letter(ch: str) -> bool:
    return unicodedata.category(ch).startswith("L")


def normalize_text(raw: str) -> str:
    """Lowercase, strip punctuation and settle accents into composed form.

    Elision apostrophes attached to a letter (σ’, απ’) survive as ’.
    """
    decomposed = unicodedata.normalize("NFD", raw)
    kept = []
    for ch in decomposed:
        cat = unicodedata.category(ch)
        if cat == "Mn":
            if ch in _AS_ACUTE:
                kept.append(_ACUTE)
            elif ch in (_ACUTE, _DIAERESIS):
                kept.append(ch)
            continue
        if cat.startswith("L"):
            kept.append(ch)
        elif ch in _APOSTROPHES:
            kept.append(ELISION if kept and _is_letter(kept[-1]) or (kept and kept[-1] in (_ACUTE, _DIAERESIS)) else " ")
        else:
            kept.append(" ")
    text = unicodedata.normalize("NFC", "".join(kept)).lower()
    return _SPACES.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    return normalize_text(text).split()


def strip_accents(word: str) -> str:
    nfd = unicodedata.normalize("NFD", word)
    return "".join(c for c in nfd if unicodedata.category(c) != "Mn")


# ---------------------------------------------------------------------------
# grapheme to phoneme

@dataclass(frozen=True)
class _Letter:
    base: str
    acute: bool = False
    diaeresis: bool = False


def _letters(word: str) -> list[_Letter]:
    out: list[_Letter] = []
    for ch in unicodedata.normalize("NFD", word):
        if ch in (_ACUTE, _DIAERESIS) or ch in _AS_ACUTE:
            if out:
                prev = out[-1]
                out[-1] = _Letter(
                    prev.base,
                    prev.acute or ch != _DIAERESIS,
                    prev.diaeresis or ch == _DIAERESIS,
                )
            continue
        if unicodedata.category(ch) == "Mn":
            continue
        if ch in _APOSTROPHES or ch.isspace():
            continue
        if ch == "ς":
            ch = "σ"
        if ch not in GRAPHEMES:
            raise NonGreekCharacter(ch, word)
        out.append(_Letter(ch))
    return out


def _match(letters: list[_Letter], i: int) -> tuple[str, int]:
    # γι + vowel is a single palatal: για, γιος
    if (
        letters[i].base == "γ"
        and i + 2 < len(letters)
        and letters[i + 1].base == "ι"
        and not letters[i + 1].acute
        and not letters[i + 1].diaeresis
        and letters[i + 2].base in _VOWEL_LETTERS
    ):
        return "j", 2
    for size in range(min(_MAX_GRAPHEME, len(letters) - i), 1, -1):
        chunk = letters[i:i + size]
        grapheme = "".join(l.base for l in chunk)
        if grapheme not in GRAPHEMES:
            continue
        if grapheme in _VOWEL_DIGRAPHS and (chunk[0].acute or chunk[1].diaeresis):
            continue
        return grapheme, size
    return letters[i].base, 1


def _transcribe_token(token: str) -> list[Phone]:
    letters = _letters(token)
    hiatus = strip_accents(token).replace(ELISION, "") in HIATUS_WORDS
    raw: list[tuple[str, bool]] = []
    i = 0
    while i < len(letters):
        grapheme, size = _match(letters, i)
        stressed = any(l.acute for l in letters[i:i + size])
        symbols = ("j",) if grapheme == "j" else GRAPHEMES[grapheme]
        for sym in symbols:
            is_vowel = sym in INVENTORY and INVENTORY[sym] == "vowel"
            raw.append((sym, stressed and is_vowel))
        i += size

    phones: list[Phone] = []
    for k, (sym, stressed) in enumerate(raw):
        coda = False
        if sym == "V":
            nxt = raw[k + 1][0] if k + 1 < len(raw) else None
            if nxt is None:
                sym = "f"
            elif nxt in INVENTORY and INVENTORY[nxt] == "vowel":
                sym = "v"
            else:
                sym = "v" if nxt in _VOICED or nxt == "V" else "f"
                coda = True
        kind = INVENTORY[sym]
        if kind == "consonant" and phones and phones[-1].symbol == sym and not phones[-1].is_vowel:
            continue  # geminates are written, not pronounced
        phones.append(Phone(sym, kind, stressed, coda=coda, hiatus=hiatus and sym == "i"))
    return phones


@lru_cache(maxsize=65536)
def _transcribe_cached(text: str) -> tuple[Phone, ...]:
    out: list[Phone] = []
    for token in text.split():
        out.extend(_transcribe_token(token))
    return tuple(out)


def transcribe(word: str) -> tuple[Phone, ...]:
    """Phones for a normalized word (or space separated words).

    Many-to-one spellings collapse: ι η υ ει οι υι all give /i/.
    """
    return _transcribe_cached(word)


# ---------------------------------------------------------------------------
# syllables

def _glides(phones: Sequence[Phone], k: int) -> bool:
    p = phones[k]
    return (
        p.symbol == "i"
        and not p.stressed
        and not p.hiatus
        and k > 0
        and not phones[k - 1].is_vowel
        and k + 1 < len(phones)
        and phones[k + 1].is_vowel
    )


def _split_cluster(cluster: Sequence[Phone]) -> int:
    """Index where the onset of the next syllable starts."""
    start = 0
    for idx, p in enumerate(cluster):
        if p.coda:
            start = idx + 1
    symbols = tuple(p.symbol for p in cluster)
    for cut in range(start, len(cluster)):
        tail = symbols[cut:]
        if len(tail) == 1 or tail in LICIT_ONSETS:
            return cut
    return len(cluster)


def syllabify(phones: Sequence[Phone]) -> tuple[Syllable, ...]:
    """Maximal-onset syllabification restricted to licit Greek onsets."""
    phones = tuple(phones)
    if not any(p.is_vowel for p in phones):
        raise NoVowel(f"no vowel in {''.join(p.symbol for p in phones)!r}")

    # nuclei as (start, end) spans
    nuclei: list[tuple[int, int]] = []
    k = 0
    while k < len(phones):
        if not phones[k].is_vowel:
            k += 1
            continue
        if _glides(phones, k):
            nuclei.append((k, k + 2))
            k += 2
        else:
            nuclei.append((k, k + 1))
            k += 1

    syllables = []
    onset_start = 0
    for n, (start, end) in enumerate(nuclei):
        onset = phones[onset_start:start]
        if n + 1 < len(nuclei):
            cluster = phones[end:nuclei[n + 1][0]]
            cut = _split_cluster(cluster)
            coda = cluster[:cut]
            onset_start = end + cut
        else:
            coda = phones[end:]
        syllables.append(Syllable(tuple(onset), phones[start:end], tuple(coda)))
    return tuple(syllables)


def _stress_index(syllables: Sequence[Syllable]) -> int:
    marked = [i for i, s in enumerate(syllables) if s.stressed]
    if not marked:
        raise NoStress(f"no stressed syllable in {format_syllables(syllables)!r}")
    if len(marked) > 1:
        raise MultipleStress(f"several stressed syllables in {format_syllables(syllables)!r}")
    from_end = len(syllables) - marked[0]
    if from_end > 3:
        raise StressOutOfRange(f"stress on syllable {from_end} from the end in {format_syllables(syllables)!r}")
    return from_end


def stress_position(word: PhonologicalWord | Sequence[Syllable]) -> int:
    """1 for oxytone (M), 2 for paroxytone (F2), 3 for proparoxytone (F3)."""
    syllables = word.syllables if isinstance(word, PhonologicalWord) else word
    return _stress_index(syllables)


# ---------------------------------------------------------------------------
# clitic fusion

@dataclass
class _Token:
    text: str
    phones: list[Phone]

    @property
    def accents(self) -> int:
        return sum(p.stressed for p in self.phones)

    @property
    def vowels(self) -> int:
        if not any(p.is_vowel for p in self.phones):
            return 0
        return len(syllabify(self.phones))


def _restress(phones: list[Phone], index: int | None) -> list[Phone]:
    return [
        Phone(p.symbol, p.kind, i == index, coda=p.coda, hiatus=p.hiatus)
        for i, p in enumerate(phones)
    ]


def _last_vowel(phones: Sequence[Phone]) -> int:
    return max(i for i, p in enumerate(phones) if p.is_vowel)


def _build(proclitics: list[_Token], host: list[_Token], enclitics: list[_Token],
           stress_final: bool = False) -> PhonologicalWord:
    pro_phones = [p for t in proclitics for p in t.phones]
    host_phones = [p for t in host for p in t.phones]
    enc_phones = [p for t in enclitics for p in t.phones]

    if stress_final:
        last = host[-1]
        if last.vowels != 1:
            raise NoStress(f"line ends in unaccented {last.text!r}")
        host_phones = _restress(host_phones, _last_vowel(host_phones))
    elif enclitics and host[0].accents > 1:
        # κάλεσέ με: the rightmost accent is the one that counts
        stressed = [i for i, p in enumerate(host_phones) if p.stressed]
        host_phones = _restress(host_phones, stressed[-1])

    phones = pro_phones + host_phones + enc_phones
    syllables = syllabify(phones)
    try:
        from_end = _stress_index(syllables)
    except StressOutOfRange:
        if not enclitics:
            raise
        # host + clitics beyond three syllables: stress moves to the host's end
        host_phones = _restress(host_phones, _last_vowel(host_phones))
        phones = pro_phones + host_phones + enc_phones
        syllables = syllabify(phones)
        from_end = _stress_index(syllables)

    words = tuple(t.text for t in proclitics + host + enclitics)
    return PhonologicalWord(words, syllables, from_end, len(proclitics), len(pro_phones))


def fuse_clitics(words: Sequence[str]) -> tuple[PhonologicalWord, ...]:
    """Group the tokens of one line into phonological words.

    Enclitic pronouns lean on the preceding accented word. Other stressless
    words lean forward on the next accented word. A line that closes on
    stressless words that cannot all be enclitics (το φως, για με) forms one
    stress group stressed on its final monosyllable.
    """
    if not words:
        raise EmptyLine("no tokens")
    tokens = [_Token(w, list(transcribe(w))) for w in words]

    tail_start = len(tokens)
    while tail_start > 0 and tokens[tail_start - 1].accents == 0:
        tail_start -= 1
    head, tail = tokens[:tail_start], tokens[tail_start:]

    groups: list[tuple[list[_Token], list[_Token], list[_Token], bool]] = []
    pending: list[_Token] = []
    for tok in head:
        if tok.accents:
            groups.append((pending, [tok], [], False))
            pending = []
        elif tok.text in ENCLITICS and groups and not pending:
            groups[-1][2].append(tok)
        else:
            pending.append(tok)

    if tail:
        if groups and all(t.text in ENCLITICS for t in tail):
            groups[-1][2].extend(tail)
        else:
            groups.append(([], tail, [], True))

    return tuple(_build(*g) for g in groups)
