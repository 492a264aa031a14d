"""Non-contextual feature extraction: linguistic one-hots, VAD lexicon
scores and per-tweet user-metadata vectors."""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .preprocess import count_emoticons

_WORD_RE = re.compile(r"[a-z']+")
_MENTION_RE = re.compile(r"(?<!\S)@\w+")
_HASHTAG_RE = re.compile(r"#\w+")

FEATURE_IDS = tuple(f"F{i}" for i in range(1, 18))

FEATURE_FIELDS = (
    "post_date", "emoticon_count", "hashtag_count", "exclamation_count",
    "question_count", "mention_count", "positive_word_count",
    "negative_word_count", "favorite_count", "retweet_count",
    "user_favorites", "followers", "friends", "listed_count", "statuses",
    "verified", "has_profile_image",
)


def linguistic_onehot(pos_ids, dep_ids, pos_size, dep_size):
    """Per token: POS one-hot concatenated with dependency one-hot.

    Every row holds exactly two ones.
    """
    if len(pos_ids) != len(dep_ids):
        raise ValueError(f"{len(pos_ids)} pos tags vs {len(dep_ids)} dep tags")
    k = len(pos_ids)
    out = np.zeros((k, pos_size + dep_size))
    for t, (p, d) in enumerate(zip(pos_ids, dep_ids)):
        if not 0 <= p < pos_size:
            raise ValueError(f"pos tag id {p} out of range [0, {pos_size})")
        if not 0 <= d < dep_size:
            raise ValueError(f"dep tag id {d} out of range [0, {dep_size})")
        out[t, p] = 1.0
        out[t, pos_size + d] = 1.0
    return out


class VadLexicon:
    """word -> (valence, arousal, dominance), each in [0, 1].

    Words not in the lexicon score the zero triple.
    """

    def __init__(self, scores=None):
        self.scores = dict(scores or {})

    @classmethod
    def load(cls, path):
        scores = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cells = line.split("\t")
                if len(cells) != 4:
                    raise ValueError(f"{path}:{lineno}: expected `word<TAB>V<TAB>A<TAB>D`")
                triple = tuple(float(c) for c in cells[1:])
                for v in triple:
                    if not 0.0 <= v <= 1.0:
                        raise ValueError(f"{path}:{lineno}: score {v} outside [0, 1]")
                scores[cells[0]] = triple
        return cls(scores)

    def lookup(self, word):
        return self.scores.get(word, (0.0, 0.0, 0.0))


def _part_sizes(k):
    p1 = math.ceil(k / 3)
    p2 = math.ceil((k - p1) / 2)
    return p1, p2, k - p1 - p2


def vad_features(tokens, lexicon):
    """9-dim sentiment vector: mean (V, A, D) over three contiguous parts.

    The token list splits into leading/middle/trailing thirds (sizes
    ceil(k/3), ceil(rest/2), remainder); a part's score is the mean triple
    over its tokens with absent words contributing zeros, and an empty
    part is all-zero.
    """
    if not tokens:
        raise ValueError("vad_features needs at least one token")
    k = len(tokens)
    sizes = _part_sizes(k)
    out = np.zeros(9)
    start = 0
    for i, size in enumerate(sizes):
        part = tokens[start:start + size]
        start += size
        if not part:
            continue
        triples = [lexicon.lookup(t) for t in part]
        for dim in range(3):
            out[3 * i + dim] = math.fsum(tr[dim] for tr in triples) / size
    return out


def load_wordlist(path):
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word and not word.startswith(";"):
                words.add(word.lower())
    return words


@dataclass
class MetadataRecord:
    """The 17 per-tweet user/behaviour features (F1..F17)."""

    post_date: int = 0
    emoticon_count: int = 0
    hashtag_count: int = 0
    exclamation_count: int = 0
    question_count: int = 0
    mention_count: int = 0
    positive_word_count: int = 0
    negative_word_count: int = 0
    favorite_count: int = 0
    retweet_count: int = 0
    user_favorites: int = 0
    followers: int = 0
    friends: int = 0
    listed_count: int = 0
    statuses: int = 0
    verified: int = 0
    has_profile_image: int = 0

    def __post_init__(self):
        for name in FEATURE_FIELDS:
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be non-negative, got {v}")
        for name in ("verified", "has_profile_image"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")

    def full_vector(self):
        return np.asarray([float(getattr(self, n)) for n in FEATURE_FIELDS])


def text_counts(text, resources, positive_words, negative_words):
    """F2..F8 computed from the *raw* tweet text."""
    words = _WORD_RE.findall(text.lower())
    return {
        "emoticon_count": count_emoticons(text, resources),
        "hashtag_count": len(_HASHTAG_RE.findall(text)),
        "exclamation_count": text.count("!"),
        "question_count": text.count("?"),
        "mention_count": len(_MENTION_RE.findall(text)),
        "positive_word_count": sum(1 for w in words if w in positive_words),
        "negative_word_count": sum(1 for w in words if w in negative_words),
    }


def parse_selection(spec):
    """Parse a feature selection like ``F1-F8`` or ``F1,F3,F7-F8``."""
    ids = []
    for chunk in str(spec).replace(" ", "").split(","):
        if not chunk:
            continue
        if "-" in chunk:
            lo, hi = chunk.split("-", 1)
            lo_i, hi_i = _feature_index(lo), _feature_index(hi)
            if lo_i > hi_i:
                raise ValueError(f"bad feature range {chunk}")
            ids.extend(range(lo_i, hi_i + 1))
        else:
            ids.append(_feature_index(chunk))
    if not ids:
        return []
    return sorted(set(ids))


def _feature_index(name):
    name = name.upper()
    if name not in FEATURE_IDS:
        raise ValueError(f"unknown feature id {name!r} (expected F1..F17)")
    return FEATURE_IDS.index(name)


def extract_metadata(record, selection):
    """Restrict the 17-feature vector to `selection` (list of indices into
    F1..F17), preserving schema order."""
    full = record.full_vector()
    return full[np.asarray(selection, dtype=np.intp)] if selection else np.empty(0)


class MinMax:
    """Column-wise min-max scaling fit on one split, applied to any other.

    Constant columns map to 0; out-of-range values clamp to [0, 1].
    """

    def __init__(self, mins, maxs):
        self.mins = np.asarray(mins, dtype=np.float64)
        self.maxs = np.asarray(maxs, dtype=np.float64)

    @classmethod
    def fit(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1:
            raise ValueError(f"need a non-empty 2-D matrix, got shape {matrix.shape}")
        return cls(matrix.min(axis=0), matrix.max(axis=0))

    def transform(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        span = self.maxs - self.mins
        safe = np.where(span == 0.0, 1.0, span)
        out = (matrix - self.mins) / safe
        out = np.where(span == 0.0, 0.0, out)
        return np.clip(out, 0.0, 1.0)

    def inverse(self, matrix):
        return np.asarray(matrix) * (self.maxs - self.mins) + self.mins
