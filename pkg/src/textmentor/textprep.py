"""Raw text to normalized token sequences.

Three stages: cleaning (markup/URL/citation removal, Unicode and
whitespace normalization), sentence segmentation with an abbreviation
exception list, and tokenization (lowercase, boundary punctuation
strip, stopword removal, stemming). All stages are pure functions;
identical inputs give byte-identical outputs.
"""

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum

from . import resources
from .errors import InvalidEncoding, TooShort, UnsupportedLanguage
from .stemming import stem_word

DEFAULT_MIN_WORDS = 300


class Language(str, Enum):
    EN = "en"
    DE = "de"


def as_language(value) -> Language:
    try:
        return Language(getattr(value, "value", str(value).lower()))
    except ValueError:
        raise UnsupportedLanguage(f"unsupported language {value!r}") from None


@dataclass(frozen=True)
class RawSubmissionText:
    content: str
    declared_language: Language
    source_id: str = ""

    def __post_init__(self):
        if not self.content:
            raise ValueError("submission content must be non-empty")

    @classmethod
    def from_bytes(cls, data: bytes, language, source_id: str = ""):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidEncoding(f"submission is not valid UTF-8 text: {exc}") from None
        return cls(content=text, declared_language=as_language(language), source_id=source_id)


@dataclass(frozen=True)
class CleanText:
    text: str
    language: Language
    word_count: int


@dataclass(frozen=True)
class Token:
    surface: str
    stem: str


@dataclass(frozen=True)
class TokenizedSentence:
    tokens: tuple = field(default_factory=tuple)

    def stems(self):
        return [t.stem for t in self.tokens]


_TAG_RE = re.compile(r"<[^>]*>")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_CITATION_RE = re.compile(r"\[\d+(?:\s*[,;\-–]\s*\d+)*\]")

_SENTENCE_TERMINATORS = ".!?"


def clean_text(raw: RawSubmissionText, min_words: int = DEFAULT_MIN_WORDS) -> CleanText:
    """Normalize a submission; raises TooShort below the word floor."""
    language = as_language(raw.declared_language)
    text = raw.content
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InvalidEncoding(f"submission contains undecodable characters: {exc}") from None
    text = unicodedata.normalize("NFC", text)
    text = _TAG_RE.sub(" ", text)
    text = _URL_RE.sub(" ", text)
    text = _CITATION_RE.sub(" ", text)
    text = _strip_control(text)
    lines = [" ".join(line.split()) for line in text.split("\n")]
    text = "\n".join(line for line in lines if line)
    word_count = len(text.split())
    if word_count < min_words:
        raise TooShort(
            f"text too short, at least {min_words} words are needed "
            f"(received {word_count})"
        )
    return CleanText(text=text, language=language, word_count=word_count)


def _strip_control(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\n":
            out.append(ch)
            continue
        category = unicodedata.category(ch)
        if category == "Cc":
            out.append(" ")
        elif category.startswith("C"):
            continue  # zero-width/format characters vanish
        else:
            out.append(ch)
    return "".join(out)


def segment_sentences(clean: CleanText, abbreviations=None) -> list:
    """Split on . ! ? followed by whitespace or end of text.

    A final period is not a boundary when the whitespace-delimited word
    it closes (e.g. "Dr.", "z.B.") is on the language's abbreviation
    list. No words are dropped; trailing text without a terminator
    forms the last sentence.
    """
    if abbreviations is None:
        abbreviations = resources.abbreviations(clean.language)
    abbrev = {a.lower() for a in abbreviations}
    text = clean.text
    sentences = []
    start = 0
    for i, ch in enumerate(text):
        if ch not in _SENTENCE_TERMINATORS:
            continue
        if i + 1 < len(text) and not text[i + 1].isspace():
            continue
        if ch == "." and _closing_word(text, start, i).lower() in abbrev:
            continue
        segment = " ".join(text[start : i + 1].split())
        if segment:
            sentences.append(segment)
        start = i + 1
    tail = " ".join(text[start:].split())
    if tail:
        sentences.append(tail)
    return sentences


def _closing_word(text: str, start: int, dot_index: int) -> str:
    j = dot_index
    while j > start and not text[j - 1].isspace():
        j -= 1
    return text[j : dot_index + 1]


def tokenize_normalize(sentence: str, language, stopwords) -> TokenizedSentence:
    """Lowercase, strip boundary punctuation, drop stopwords, stem."""
    code = as_language(language).value
    surface_stop = {w.lower() for w in stopwords}
    stem_stop = surface_stop | {stem_word(w, code) for w in surface_stop}
    tokens = []
    for raw_word in sentence.split():
        word = _strip_boundary_punct(raw_word.lower())
        if not word or word in surface_stop:
            continue
        stem = stem_word(word, code)
        if len(stem) < 2 or stem in stem_stop:
            continue
        tokens.append(Token(surface=word, stem=stem))
    return TokenizedSentence(tokens=tuple(tokens))


def _strip_boundary_punct(word: str) -> str:
    start, end = 0, len(word)
    while start < end and unicodedata.category(word[start])[0] in "PS":
        start += 1
    while end > start and unicodedata.category(word[end - 1])[0] in "PS":
        end -= 1
    return word[start:end]


def sentences_to_tokens(clean: CleanText, stopwords=None, abbreviations=None) -> list:
    """Convenience: segment and tokenize a cleaned text in one step."""
    if stopwords is None:
        stopwords = resources.stopwords(clean.language)
    return [
        tokenize_normalize(sentence, clean.language, stopwords)
        for sentence in segment_sentences(clean, abbreviations)
    ]
