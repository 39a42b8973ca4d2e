"""Suffix-stripping stemmers for English and German.

Both are classic rule-table stemmers: the English one follows Porter's
original 1980 rule set, the German one the Snowball German rules
(umlaut folding, R1/R2 regions, three suffix passes). They are pure
functions of the input word, which is what makes graph builds
reproducible; their exact outputs are frozen by golden tests.
"""

from .errors import UnsupportedLanguage

# ---------------------------------------------------------------------------
# English (Porter)
# ---------------------------------------------------------------------------

_EN_VOWELS = "aeiou"


def _en_is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _EN_VOWELS:
        return False
    if ch == "y":
        # y after a consonant acts as a vowel ("syzygy")
        return i == 0 or not _en_is_cons(word, i - 1)
    return True


def _en_measure(stem: str) -> int:
    """Number of vowel->consonant transitions in [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        cons = _en_is_cons(stem, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _en_has_vowel(stem: str) -> bool:
    return any(not _en_is_cons(stem, i) for i in range(len(stem)))


def _en_double_cons(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _en_is_cons(word, len(word) - 1)
    )


def _en_ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _en_is_cons(word, len(word) - 3)
        and not _en_is_cons(word, len(word) - 2)
        and _en_is_cons(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


# (suffix, replacement) tables; within a step the longest matching suffix
# is selected and no shorter alternative is retried if its condition fails.
_EN_STEP2 = [
    ("ational", "ate"), ("ization", "ize"), ("iveness", "ive"),
    ("fulness", "ful"), ("ousness", "ous"), ("tional", "tion"),
    ("biliti", "ble"), ("entli", "ent"), ("ousli", "ous"),
    ("ation", "ate"), ("alism", "al"), ("aliti", "al"),
    ("iviti", "ive"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"),
    ("ator", "ate"), ("eli", "e"),
]

_EN_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"),
    ("iciti", "ic"), ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_EN_STEP4 = [
    "ement", "ance", "ence", "able", "ible", "ment",
    "ion", "ism", "ate", "iti", "ous", "ive", "ize", "ant", "ent",
    "al", "er", "ic", "ou",
]


def _en_step1(word: str) -> str:
    # 1a: plurals
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]
    # 1b: -eed / -ed / -ing
    grew = False
    if word.endswith("eed"):
        if _en_measure(word[:-3]) > 0:
            word = word[:-1]
    elif word.endswith("ed") and _en_has_vowel(word[:-2]):
        word = word[:-2]
        grew = True
    elif word.endswith("ing") and _en_has_vowel(word[:-3]):
        word = word[:-3]
        grew = True
    if grew:
        if word.endswith(("at", "bl", "iz")):
            word += "e"
        elif _en_double_cons(word) and word[-1] not in "lsz":
            word = word[:-1]
        elif _en_measure(word) == 1 and _en_ends_cvc(word):
            word += "e"
    # 1c: terminal y
    if word.endswith("y") and _en_has_vowel(word[:-1]):
        word = word[:-1] + "i"
    return word


def _en_map_suffix(word: str, table, min_measure: int) -> str:
    for suffix, repl in table:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _en_measure(stem) > min_measure:
                return stem + repl
            return word
    return word


def _en_step4(word: str) -> str:
    for suffix in _EN_STEP4:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _en_measure(stem) > 1 and (
                suffix != "ion" or stem.endswith(("s", "t"))
            ):
                return stem
            return word
    return word


def _en_step5(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _en_measure(stem)
        if m > 1 or (m == 1 and not _en_ends_cvc(stem)):
            word = stem
    if _en_measure(word) > 1 and _en_double_cons(word) and word.endswith("l"):
        word = word[:-1]
    return word


def stem_english(word: str) -> str:
    word = word.lower()
    if len(word) <= 2:
        return word
    word = _en_step1(word)
    word = _en_map_suffix(word, _EN_STEP2, 0)
    word = _en_map_suffix(word, _EN_STEP3, 0)
    word = _en_step4(word)
    word = _en_step5(word)
    return word


# ---------------------------------------------------------------------------
# German (Snowball rules)
# ---------------------------------------------------------------------------

_DE_VOWELS = "aeiouyäöü"
_DE_S_ENDINGS = "bdfghklmnrt"
_DE_ST_ENDINGS = "bdfghklmnt"


def _de_prepare(word: str) -> str:
    word = word.replace("ß", "ss")
    chars = list(word)
    # u/y between vowels behave as consonants; mark with upper case
    for i in range(1, len(chars) - 1):
        if (
            chars[i] in "uy"
            and chars[i - 1] in _DE_VOWELS
            and chars[i + 1] in _DE_VOWELS
        ):
            chars[i] = chars[i].upper()
    return "".join(chars)


def _de_region_after_vc(word: str, start: int) -> int:
    for i in range(start + 1, len(word)):
        if word[i] not in _DE_VOWELS and word[i - 1] in _DE_VOWELS:
            return i + 1
    return len(word)


def _de_finalize(word: str) -> str:
    word = word.lower()
    for src, dst in (("ä", "a"), ("ö", "o"), ("ü", "u")):
        word = word.replace(src, dst)
    return word


def stem_german(word: str) -> str:
    word = _de_prepare(word.lower())
    if len(word) <= 2:
        return _de_finalize(word)
    r1 = _de_region_after_vc(word, 0)
    r2 = _de_region_after_vc(word, r1)
    r1 = max(r1, 3)

    def in_r1(w, suffix):
        return len(w) - len(suffix) >= r1

    def in_r2(w, suffix):
        return len(w) - len(suffix) >= r2

    # pass 1: inflectional endings
    for suffix in ("ern", "em", "er", "en", "es", "e", "s"):
        if word.endswith(suffix):
            if suffix == "s":
                if in_r1(word, "s") and word[-2] in _DE_S_ENDINGS:
                    word = word[:-1]
            elif in_r1(word, suffix):
                word = word[: -len(suffix)]
                if suffix in ("en", "es", "e") and word.endswith("niss"):
                    word = word[:-1]
            break

    # pass 2: verb/comparative endings
    for suffix in ("est", "en", "er", "st"):
        if word.endswith(suffix):
            if suffix == "st":
                if (
                    in_r1(word, "st")
                    and len(word) >= 6
                    and word[-3] in _DE_ST_ENDINGS
                ):
                    word = word[:-2]
            elif in_r1(word, suffix):
                word = word[: -len(suffix)]
            break

    # pass 3: derivational endings
    for suffix in ("keit", "lich", "heit", "isch", "end", "ung", "ig", "ik"):
        if word.endswith(suffix):
            if suffix in ("end", "ung"):
                if in_r2(word, suffix):
                    word = word[: -len(suffix)]
                    if (
                        word.endswith("ig")
                        and in_r2(word, "ig")
                        and not word.endswith("eig")
                    ):
                        word = word[:-2]
            elif suffix in ("ig", "ik", "isch"):
                if in_r2(word, suffix) and word[-len(suffix) - 1] != "e":
                    word = word[: -len(suffix)]
            elif suffix in ("lich", "heit"):
                if in_r2(word, suffix):
                    word = word[: -len(suffix)]
                    for sub in ("er", "en"):
                        if word.endswith(sub) and in_r1(word, sub):
                            word = word[:-2]
                            break
            elif suffix == "keit":
                if in_r2(word, suffix):
                    word = word[: -len(suffix)]
                    for sub in ("lich", "ig"):
                        if word.endswith(sub) and in_r2(word, sub):
                            word = word[: -len(sub)]
                            break
            break

    return _de_finalize(word)


_STEMMERS = {
    "en": stem_english,
    "de": stem_german,
}


def stem_word(word: str, language: str) -> str:
    """Stem a single word for a language code ('en' or 'de')."""
    try:
        stemmer = _STEMMERS[language]
    except KeyError:
        raise UnsupportedLanguage(f"no stemmer for language {language!r}") from None
    return stemmer(word)
