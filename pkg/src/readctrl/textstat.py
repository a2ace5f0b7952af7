"""Deterministic text segmentation and readability indices.

Everything in this module is a pure function of its inputs. The counting
conventions are frozen so that scores are reproducible bit-for-bit:

* words are maximal runs of alphanumerics joined by apostrophes/hyphens,
  so a hyphenated compound is one word;
* letters are alphabetic characters only, characters are alphanumerics
  only; punctuation is never counted by either;
* syllables are counted as typographically hyphenatable fragments
  (vowel-group splitting constrained by the conventional 2-character
  leading / 3-character trailing hyphenation margins), which is the
  convention mainstream readability tooling uses. It deliberately counts
  fragments, not phonetic syllables: "away" is one fragment because
  "a-way" leaves an unhyphenatable single letter.

Grade-level outputs are not clamped; very simple text can score below
zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class EmptyTextError(ValueError):
    """Raised when a text contains no alphabetic character to analyze."""


DEFAULT_ABBREVIATIONS = frozenset(
    {
        "mr.", "mrs.", "ms.", "dr.", "prof.", "rev.", "sr.", "jr.", "st.",
        "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "fig.", "no.",
        "inc.", "ltd.", "co.", "u.s.", "u.k.",
    }
)

# Dictionary-checked overrides for words whose spelling defeats the
# fragment rules (mostly elided medial vowels).
_SYLLABLE_EXCEPTIONS = {
    "business": 2,
    "businesses": 3,
    "clothes": 1,
    "evening": 2,
    "wednesday": 2,
}

_WORD_RE = re.compile(r"[A-Za-z0-9]+(?:['’-][A-Za-z0-9]+)*")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_VOWELS = frozenset("aeiouy")
# sentence break: terminator(s), optional closing quotes/brackets, then
# whitespace; the break position is captured after the closing run
_SENTENCE_BREAK_RE = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s)")


@dataclass(frozen=True)
class TokenizerConfig:
    """Frozen knobs for segmentation and hard-word thresholds."""

    abbreviation_list: frozenset[str] = DEFAULT_ABBREVIATIONS
    long_word_min_chars: int = 8
    complex_word_min_syllables: int = 3

    def __post_init__(self) -> None:
        if self.long_word_min_chars < 1:
            raise ValueError("long_word_min_chars must be >= 1")
        if self.complex_word_min_syllables < 1:
            raise ValueError("complex_word_min_syllables must be >= 1")


DEFAULT_CONFIG = TokenizerConfig()


@dataclass(frozen=True)
class TextStats:
    """Raw counts for one text; the substrate of every index."""

    sentences: int
    words: int
    syllables: int
    letters: int
    characters: int
    long_words: int
    complex_words: int
    per_word_syllables: tuple[int, ...]


@dataclass(frozen=True)
class ReadabilityReport:
    """The four grade indices plus their arithmetic mean (RGL)."""

    fkgl: float
    gfi: float
    ari: float
    cli_index: float
    rgl: float


def _require_analyzable(text: str) -> None:
    if not any(c.isalpha() for c in text):
        raise EmptyTextError("text contains no alphabetic character")


def segment_sentences(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> list[str]:
    """Split text into sentence strings.

    Breaks occur after ``.``/``!``/``?`` (plus any closing quote or
    bracket) followed by whitespace, unless the token ending at a period
    is a known abbreviation. Text with no terminator is one sentence, so
    every analyzable text yields at least one.
    """
    _require_analyzable(text)
    breaks: list[int] = []
    for m in _SENTENCE_BREAK_RE.finditer(text):
        if _is_abbreviation_break(text, m.start(), config):
            continue
        breaks.append(m.end())
    sentences = []
    start = 0
    for pos in breaks:
        piece = text[start:pos].strip()
        if piece:
            sentences.append(piece)
        start = pos
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    if not sentences:
        sentences.append(text.strip())
    return sentences


def _is_abbreviation_break(text: str, term_start: int, config: TokenizerConfig) -> bool:
    if text[term_start] != ".":
        return False
    # the candidate token is the non-space run ending at (and including)
    # this period, e.g. "Dr." or "U.S."
    i = term_start
    while i > 0 and not text[i - 1].isspace():
        i -= 1
    token = text[i : term_start + 1].lower()
    return token in config.abbreviation_list


def tokenize_words(text: str) -> list[str]:
    """Maximal alphanumeric+apostrophe+hyphen runs, in order."""
    return _WORD_RE.findall(text)


def count_syllables(word: str) -> int:
    """Count hyphenatable fragments of one word (always >= 1).

    Rules, applied to the lowercased alphabetic residue:

    1. silent suffixes are dropped: final "e" after a consonant (kept in
       consonant+"le" endings), "-ed" unless preceded by t/d, "-es"
       unless preceded by a sibilant-ish letter (s, x, z, c, g, h);
    2. each vowel group ("aeiouy" run) starts a candidate fragment;
    3. the split between two adjacent groups survives only if some
       placement inside the consonant cluster leaves >= 2 characters
       before it and >= 3 after it (standard hyphenation margins).

    Non-alphabetic residue counts as one syllable.
    """
    w = "".join(c for c in word.lower() if c.isalpha())
    if not w:
        return 1
    if w in _SYLLABLE_EXCEPTIONS:
        return _SYLLABLE_EXCEPTIONS[w]
    w = _strip_silent_suffix(w)
    groups = [(m.start(), m.end()) for m in _VOWEL_GROUP_RE.finditer(w)]
    if not groups:
        return 1
    count = 1
    n = len(w)
    for (_, end1), (start2, _) in zip(groups, groups[1:]):
        # split after index p, for p anywhere in the consonant cluster
        if any(p + 1 >= 2 and n - (p + 1) >= 3 for p in range(end1 - 1, start2)):
            count += 1
    return count


def _strip_silent_suffix(w: str) -> str:
    if len(w) >= 3 and w.endswith("ed") and w[-3] not in _VOWELS and w[-3] not in "td":
        return w[:-2]
    if len(w) >= 3 and w.endswith("es") and w[-3] not in _VOWELS and w[-3] not in "sxzcgh":
        return w[:-2]
    if (
        len(w) >= 2
        and w.endswith("e")
        and w[-2] not in _VOWELS
        and not (len(w) >= 3 and w[-2] == "l" and w[-3] not in _VOWELS)
    ):
        return w[:-1]
    return w


def analyze(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> TextStats:
    """Compute all counts for one text.

    Raises EmptyTextError when the text has no alphabetic character.
    Sentence count is the number of segments that contain at least one
    word; a terminator-free text counts as one sentence.
    """
    _require_analyzable(text)
    segments = segment_sentences(text, config)
    sentences = sum(1 for s in segments if _WORD_RE.search(s))
    sentences = max(sentences, 1)

    words = tokenize_words(text)
    if not words:
        raise EmptyTextError("text contains no word tokens")
    per_word = tuple(count_syllables(w) for w in words)
    letters = sum(1 for w in words for c in w if c.isalpha())
    characters = sum(1 for w in words for c in w if c.isalnum())
    word_lengths = [sum(1 for c in w if c.isalnum()) for w in words]
    long_words = sum(1 for n in word_lengths if n >= config.long_word_min_chars)
    complex_words = sum(1 for s in per_word if s >= config.complex_word_min_syllables)

    return TextStats(
        sentences=sentences,
        words=len(words),
        syllables=sum(per_word),
        letters=letters,
        characters=characters,
        long_words=long_words,
        complex_words=complex_words,
        per_word_syllables=per_word,
    )


def fkgl(stats: TextStats) -> float:
    """Flesch-Kincaid grade: 0.39*(W/S) + 11.8*(Syll/W) - 15.59."""
    return 0.39 * (stats.words / stats.sentences) + 11.8 * (stats.syllables / stats.words) - 15.59


def flesch_reading_ease(stats: TextStats) -> float:
    """Flesch Reading Ease (higher = easier); not part of the RGL mean."""
    return (
        206.835
        - 1.015 * (stats.words / stats.sentences)
        - 84.6 * (stats.syllables / stats.words)
    )


def gunning_fog(stats: TextStats, variant: str = "complex_word") -> float:
    """Gunning Fog: 0.4*(W/S + 100*hard/W).

    ``complex_word`` (default) takes hard words as those with >= 3
    syllables; ``long_word`` takes words of >= 8 alphanumerics.
    """
    if variant == "complex_word":
        hard = stats.complex_words
    elif variant == "long_word":
        hard = stats.long_words
    else:
        raise ValueError(f"unknown gunning_fog variant: {variant!r}")
    return 0.4 * (stats.words / stats.sentences + 100.0 * hard / stats.words)


def ari(stats: TextStats) -> float:
    """Automated Readability Index: 4.71*(chars/W) + 0.5*(W/S) - 21.43."""
    return (
        4.71 * (stats.characters / stats.words)
        + 0.5 * (stats.words / stats.sentences)
        - 21.43
    )


def coleman_liau(stats: TextStats) -> float:
    """Coleman-Liau: 0.0588*L - 0.296*S - 15.8 (L, S per 100 words)."""
    letters_per_100 = 100.0 * stats.letters / stats.words
    sentences_per_100 = 100.0 * stats.sentences / stats.words
    return 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8


def readability_report(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> ReadabilityReport:
    """Compute the four indices and their mean (RGL) for one text."""
    stats = analyze(text, config)
    f = fkgl(stats)
    g = gunning_fog(stats)
    a = ari(stats)
    c = coleman_liau(stats)
    return ReadabilityReport(fkgl=f, gfi=g, ari=a, cli_index=c, rgl=(f + g + a + c) / 4.0)


def rgl(text: str, config: TokenizerConfig = DEFAULT_CONFIG) -> float:
    """Shorthand for the RGL of one text."""
    return readability_report(text, config).rgl
