"""Deterministic tweet normalization, tokenization and stub tagging.

``normalize`` applies a fixed rule order (retweet prefix, mentions, URLs,
emails/digits, emoticons, contractions, hashtags, elongation, casing,
punctuation, word dedup, whitespace).  The order matters and is frozen:
normalize(normalize(x)) == normalize(x) for any input, which the golden
corpus pins down.

Tagging is a rule-based stub (suffix + small lexicon).  Tag *accuracy* is
explicitly not a goal; determinism and tagset validity are.  Datasets with
pre-computed tag columns bypass it entirely.
"""

import math
import re
from dataclasses import dataclass
from pathlib import Path

SENTINELS = ("@USER", "HTTPURL", "NUMBER", "EMAIL", "EMPTY")
_SENTINEL_SET = set(SENTINELS)

POS_TAGS = ("ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
            "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X")
DEP_TAGS = ("ROOT", "nsubj", "obj", "det", "amod", "advmod", "case", "mark", "cc", "dep")

_RESOURCE_DIR = Path(__file__).parent / "resources"

_RT_RE = re.compile(r"^RT\s*@\w+:?\s*")
_MENTION_RE = re.compile(r"(?<!\S)@\w+")
_URL_RE = re.compile(r"(?:https?://\S+|www\.\S+)")
_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")
_DIGITS_RE = re.compile(r"\d+")
_HASHTAG_RE = re.compile(r"#(\w+)")
# case-insensitive: "AAa" must collapse before lowercasing recreates a run
_ELONG_RE = re.compile(r"(.)\1{2,}", flags=re.DOTALL | re.IGNORECASE)
_CAMEL_RE1 = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_CAMEL_RE2 = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")


def _boundary_pattern(key):
    # word-ish emoticon edges must not glue onto neighbouring words
    pat = re.escape(key)
    if re.match(r"\w", key):
        pat = r"(?<!\w)" + pat
    if re.search(r"\w$", key):
        pat = pat + r"(?!\w)"
    return pat


def _load_tsv_map(path):
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise ValueError(f"{path}:{lineno}: expected `key<TAB>value`")
            mapping[cells[0]] = cells[1]
    return mapping


def _load_wordfreq(path):
    freqs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise ValueError(f"{path}:{lineno}: expected `word<TAB>frequency`")
            freqs[cells[0]] = float(cells[1])
    return freqs


@dataclass
class NormalizerResources:
    emoji_map: dict
    contractions: dict
    wordfreq: dict

    def __post_init__(self):
        keys = sorted(self.emoji_map, key=len, reverse=True)
        self._emoji_re = re.compile("|".join(_boundary_pattern(k) for k in keys)) if keys else None
        ckeys = sorted(self.contractions, key=len, reverse=True)
        self._contraction_re = (
            re.compile(r"\b(?:" + "|".join(re.escape(k) for k in ckeys) + r")\b", re.IGNORECASE)
            if ckeys else None)
        self._total_freq = sum(self.wordfreq.values())
        self._max_word_len = max((len(w) for w in self.wordfreq), default=1)


def load_resources(emoji_path=None, contractions_path=None, dictionary_path=None):
    """Load normalizer resources, falling back to the bundled defaults."""
    return NormalizerResources(
        emoji_map=_load_tsv_map(emoji_path or _RESOURCE_DIR / "emoji_map.tsv"),
        contractions=_load_tsv_map(contractions_path or _RESOURCE_DIR / "contractions.tsv"),
        wordfreq=_load_wordfreq(dictionary_path or _RESOURCE_DIR / "wordfreq.tsv"),
    )


def count_emoticons(text, resources):
    """Emoticon/emoji occurrences in raw text (metadata feature F2)."""
    if resources._emoji_re is None:
        return 0
    return len(resources._emoji_re.findall(text))


def segment_hashtag(tag, resources):
    """Split a hashtag body into words.

    Camel-case boundaries split first; each piece is then segmented by
    dynamic programming minimizing sum(-log p(word)) over the unigram
    dictionary, with single unknown characters allowed at a high cost.
    A piece in which no dictionary word is found comes back whole.
    """
    if not tag:
        raise ValueError("empty hashtag")
    spaced = _CAMEL_RE2.sub(" ", _CAMEL_RE1.sub(" ", tag))
    words = []
    for piece in spaced.split(" "):
        if piece:
            words.extend(_segment_piece(piece.lower(), resources))
    return words


def _segment_piece(piece, resources):
    freqs = resources.wordfreq
    total = resources._total_freq
    if piece in freqs or total <= 0:
        return [piece]
    unk_cost = math.log(total) + 20.0
    n = len(piece)
    maxlen = min(resources._max_word_len, n)
    best = [math.inf] * (n + 1)
    back = [0] * (n + 1)
    best[0] = 0.0
    for i in range(1, n + 1):
        for j in range(max(0, i - maxlen), i):
            word = piece[j:i]
            if word in freqs:
                cost = best[j] - math.log(freqs[word] / total)
            elif i - j == 1:
                cost = best[j] + unk_cost
            else:
                continue
            if cost < best[i]:
                best[i] = cost
                back[i] = j
    words = []
    i = n
    while i > 0:
        words.append(piece[back[i]:i])
        i = back[i]
    words.reverse()
    if not any(w in freqs for w in words):
        return [piece]
    return words


def normalize(text, resources):
    """Canonicalize raw tweet text.  Idempotent; see module docstring."""
    if not text or not text.strip():
        raise ValueError("tweet text is empty after trimming")
    out = text
    # 1. retweet prefix (repeatedly, for nested retweets)
    while True:
        stripped = _RT_RE.sub("", out, count=1)
        if stripped == out:
            break
        out = stripped
    # 2-4. variable surface forms -> sentinel tokens
    out = _MENTION_RE.sub(" @USER ", out)
    out = _URL_RE.sub(" HTTPURL ", out)
    out = _EMAIL_RE.sub(" EMAIL ", out)
    out = _DIGITS_RE.sub(" NUMBER ", out)
    # 5. emoticons/emoji -> their meaning
    if resources._emoji_re is not None:
        out = resources._emoji_re.sub(
            lambda m: " " + resources.emoji_map.get(m.group(0), m.group(0)) + " ", out)
    # 6. contractions
    if resources._contraction_re is not None:
        out = resources._contraction_re.sub(
            lambda m: resources.contractions[m.group(0).lower()], out)
    # 7. hashtags: drop '#', segment the body
    out = _HASHTAG_RE.sub(
        lambda m: " " + " ".join(segment_hashtag(m.group(1), resources)) + " ", out)
    # 8. elongation: any character repeated more than twice collapses to two
    out = _ELONG_RE.sub(r"\1\1", out)
    # 9-11. per-token casing, punctuation, adjacent-duplicate removal
    cleaned = []
    for tok in out.split():
        if tok in _SENTINEL_SET:
            word = tok
        else:
            word = "".join(ch for ch in tok.lower() if ch.isalnum())
            # stripping can butt repeats together ("a:aa" -> "aaa")
            word = _ELONG_RE.sub(r"\1\1", word)
            if not word:
                continue
        if cleaned and cleaned[-1] == word:
            continue
        cleaned.append(word)
    # 12. squeeze whitespace (the join); degenerate input falls back to EMPTY
    return " ".join(cleaned) if cleaned else "EMPTY"


def tokenize(clean_text, max_len=200):
    """Whitespace split of normalized text, truncated to `max_len` tokens."""
    tokens = clean_text.split()
    if not tokens:
        tokens = ["EMPTY"]
    return tokens[:max_len]


_POS_LEXICON = {
    "the": "DET", "a": "DET", "an": "DET", "this": "DET", "that": "DET",
    "these": "DET", "those": "DET", "my": "DET", "your": "DET", "his": "DET",
    "her": "DET", "its": "DET", "our": "DET", "their": "DET", "every": "DET",
    "some": "DET", "any": "DET", "no": "DET",
    "i": "PRON", "you": "PRON", "he": "PRON", "she": "PRON", "it": "PRON",
    "we": "PRON", "they": "PRON", "me": "PRON", "him": "PRON", "them": "PRON",
    "us": "PRON", "who": "PRON", "what": "PRON", "someone": "PRON",
    "is": "AUX", "am": "AUX", "are": "AUX", "was": "AUX", "were": "AUX",
    "be": "AUX", "been": "AUX", "being": "AUX", "have": "AUX", "has": "AUX",
    "had": "AUX", "do": "AUX", "does": "AUX", "did": "AUX", "will": "AUX",
    "would": "AUX", "can": "AUX", "could": "AUX", "should": "AUX",
    "may": "AUX", "might": "AUX", "must": "AUX",
    "and": "CCONJ", "or": "CCONJ", "but": "CCONJ", "nor": "CCONJ",
    "because": "SCONJ", "if": "SCONJ", "while": "SCONJ", "although": "SCONJ",
    "though": "SCONJ", "when": "SCONJ", "since": "SCONJ",
    "in": "ADP", "on": "ADP", "at": "ADP", "of": "ADP", "to": "ADP",
    "for": "ADP", "with": "ADP", "from": "ADP", "by": "ADP", "about": "ADP",
    "against": "ADP", "into": "ADP", "over": "ADP", "under": "ADP",
    "not": "PART", "never": "ADV", "very": "ADV", "so": "ADV", "too": "ADV",
    "really": "ADV", "now": "ADV", "then": "ADV", "here": "ADV",
    "there": "ADV", "also": "ADV", "just": "ADV", "still": "ADV",
    "oh": "INTJ", "wow": "INTJ", "yay": "INTJ", "ugh": "INTJ", "lol": "INTJ",
    "omg": "INTJ", "please": "INTJ", "yes": "INTJ",
    "trump": "PROPN", "biden": "PROPN", "obama": "PROPN", "pfizer": "PROPN",
    "moderna": "PROPN", "astrazeneca": "PROPN", "america": "PROPN",
    "twitter": "PROPN", "facebook": "PROPN", "google": "PROPN",
    "covid": "PROPN", "measles": "PROPN", "cdc": "PROPN",
    "get": "VERB", "got": "VERB", "go": "VERB", "went": "VERB", "make": "VERB",
    "made": "VERB", "take": "VERB", "took": "VERB", "say": "VERB",
    "said": "VERB", "think": "VERB", "know": "VERB", "want": "VERB",
    "need": "VERB", "love": "VERB", "hate": "VERB", "stop": "VERB",
    "one": "NUM", "two": "NUM", "three": "NUM", "first": "NUM",
    "good": "ADJ", "bad": "ADJ", "great": "ADJ", "safe": "ADJ",
    "dangerous": "ADJ", "sad": "ADJ", "happy": "ADJ", "new": "ADJ",
    "sick": "ADJ", "healthy": "ADJ",
}

_SENTINEL_POS = {"@USER": "SYM", "HTTPURL": "SYM", "EMAIL": "SYM",
                 "NUMBER": "NUM", "EMPTY": "SYM"}

_SUFFIX_RULES = (
    ("ly", "ADV"),
    ("ing", "VERB"), ("ed", "VERB"), ("ize", "VERB"), ("ise", "VERB"),
    ("ful", "ADJ"), ("ous", "ADJ"), ("ive", "ADJ"), ("able", "ADJ"),
    ("ible", "ADJ"), ("ic", "ADJ"), ("al", "ADJ"), ("est", "ADJ"),
    ("tion", "NOUN"), ("sion", "NOUN"), ("ment", "NOUN"), ("ness", "NOUN"),
    ("ity", "NOUN"), ("ship", "NOUN"), ("hood", "NOUN"), ("ism", "NOUN"),
)


def _pos_of(token):
    if token in _SENTINEL_POS:
        return _SENTINEL_POS[token]
    if token in _POS_LEXICON:
        return _POS_LEXICON[token]
    for suffix, tag in _SUFFIX_RULES:
        if len(token) > len(suffix) + 1 and token.endswith(suffix):
            return tag
    return "NOUN"


def tag(tokens):
    """Stub POS/dependency tagging; returns two id lists aligned to tokens.

    First verb (VERB or AUX) is ROOT, its left neighbour nsubj, its right
    neighbour obj; determiners det; everything else dep.
    """
    if not tokens:
        raise ValueError("cannot tag an empty token list")
    pos_names = [_pos_of(t) for t in tokens]
    pos_ids = [POS_TAGS.index(p) for p in pos_names]
    dep_names = ["dep"] * len(tokens)
    root = next((i for i, p in enumerate(pos_names) if p in ("VERB", "AUX")), None)
    if root is not None:
        dep_names[root] = "ROOT"
        if root - 1 >= 0:
            dep_names[root - 1] = "nsubj"
        if root + 1 < len(tokens):
            dep_names[root + 1] = "obj"
    for i, p in enumerate(pos_names):
        if dep_names[i] == "dep" and p == "DET":
            dep_names[i] = "det"
    dep_ids = [DEP_TAGS.index(d) for d in dep_names]
    return pos_ids, dep_ids


@dataclass
class TokenSequence:
    tokens: list
    pos_ids: list
    dep_ids: list

    def __post_init__(self):
        if not (len(self.tokens) == len(self.pos_ids) == len(self.dep_ids)):
            raise ValueError(
                f"misaligned token sequence: {len(self.tokens)} tokens, "
                f"{len(self.pos_ids)} pos, {len(self.dep_ids)} dep")
        if not self.tokens:
            raise ValueError("token sequence must be non-empty")


def process(text, resources, max_len=200):
    """normalize -> tokenize -> tag, as one call."""
    tokens = tokenize(normalize(text, resources), max_len=max_len)
    pos_ids, dep_ids = tag(tokens)
    return TokenSequence(tokens, pos_ids, dep_ids)
