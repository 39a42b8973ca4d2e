"""Access to bundled data files.

Stopword and abbreviation lists are plain UTF-8 text, one entry per
line, '#' starts a comment. Feedback templates and dialog message
catalogs are keyed by language. Stopword list content hashes are
exposed so graph metadata can pin the exact list a build used.
"""

import hashlib
import json
from functools import lru_cache
from importlib import resources as importlib_resources

from .errors import UnknownTemplate, UnsupportedLanguage

SUPPORTED_LANGUAGES = ("en", "de")

TEMPLATE_IDS = ("comparison", "student_graph", "reference_graph")


def _lang_code(language) -> str:
    code = getattr(language, "value", language)
    if code not in SUPPORTED_LANGUAGES:
        raise UnsupportedLanguage(f"no resources for language {code!r}")
    return code


def _data_file(relpath: str):
    return importlib_resources.files("textmentor").joinpath("data", *relpath.split("/"))


def _read_bytes(relpath: str) -> bytes:
    return _data_file(relpath).read_bytes()


def parse_word_list(text: str) -> frozenset:
    """Parse a one-entry-per-line list; '#' comments and blanks ignored."""
    entries = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line.lower())
    return frozenset(entries)


@lru_cache(maxsize=None)
def stopwords(language) -> frozenset:
    raw = _read_bytes(f"stopwords/{_lang_code(language)}.txt")
    return parse_word_list(raw.decode("utf-8"))


@lru_cache(maxsize=None)
def stopword_hash(language) -> str:
    raw = _read_bytes(f"stopwords/{_lang_code(language)}.txt")
    return hashlib.sha256(raw).hexdigest()


@lru_cache(maxsize=None)
def abbreviations(language) -> frozenset:
    raw = _read_bytes(f"abbreviations/{_lang_code(language)}.txt")
    return parse_word_list(raw.decode("utf-8"))


@lru_cache(maxsize=None)
def template_body(template_id: str, language) -> str:
    code = _lang_code(language)
    if template_id not in TEMPLATE_IDS:
        raise UnknownTemplate(f"unknown template {template_id!r}")
    return _read_bytes(f"templates/{template_id}.{code}.txt").decode("utf-8")


@lru_cache(maxsize=None)
def dialog_messages(language) -> dict:
    raw = _read_bytes(f"dialog/{_lang_code(language)}.json")
    return json.loads(raw.decode("utf-8"))


def sample_text(name: str) -> str:
    return _read_bytes(f"samples/{name}.txt").decode("utf-8")
