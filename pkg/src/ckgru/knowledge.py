"""Commonsense concept extraction and per-token affective embeddings.

A concept lexicon maps underscore-joined phrases (1-3 tokens) to vectors.
At every token position, *all* lexicon n-grams covering that position
contribute their vectors as candidates -- no greedy longest match -- and
the position's embedding is the candidate mean (zero vector when nothing
matches, so concept-free text degrades toward a plain GRU).
"""

import math

import numpy as np


class ConceptLexicon:
    """phrase -> d_c-dimensional vector; phrases lowercase, underscore-joined."""

    def __init__(self, dim, vectors=None):
        if dim < 1:
            raise ValueError(f"concept dimension must be >= 1, got {dim}")
        self.dim = dim
        self.vectors = {}
        for phrase, vec in (vectors or {}).items():
            self.add(phrase, vec)

    def add(self, phrase, vec):
        phrase = phrase.lower()
        if " " in phrase:
            raise ValueError(f"phrase {phrase!r} contains whitespace (use underscores)")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"phrase {phrase!r}: vector has shape {vec.shape}, lexicon dim is {self.dim}")
        self.vectors[phrase] = vec

    @classmethod
    def load(cls, path):
        lex = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cells = line.split("\t")
                if len(cells) < 2:
                    raise ValueError(f"{path}:{lineno}: expected `phrase<TAB>v1<TAB>...`")
                vec = [float(c) for c in cells[1:]]
                if lex is None:
                    lex = cls(len(vec))
                try:
                    lex.add(cells[0], vec)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        if lex is None:
            raise ValueError(f"{path}: empty concept lexicon")
        return lex

    def __contains__(self, phrase):
        return phrase.lower() in self.vectors

    def __len__(self):
        return len(self.vectors)


def extract_concepts(tokens, lexicon, max_ngram=3):
    """Candidate concept vectors per token position.

    Position t receives the vector of every lexicon n-gram (n <= max_ngram)
    whose span covers t.
    """
    if not tokens:
        raise ValueError("extract_concepts needs at least one token")
    k = len(tokens)
    candidates = [[] for _ in range(k)]
    lowered = [t.lower() for t in tokens]
    for n in range(1, max_ngram + 1):
        for start in range(0, k - n + 1):
            phrase = "_".join(lowered[start:start + n])
            vec = lexicon.vectors.get(phrase)
            if vec is not None:
                for t in range(start, start + n):
                    candidates[t].append(vec)
    return candidates


def average_candidates(candidates, dim):
    """Mean of the candidate vectors; zero vector when there are none.

    Uses exact summation (math.fsum) per dimension, so the result is
    invariant to candidate order, bit for bit.
    """
    if not candidates:
        return np.zeros(dim)
    for vec in candidates:
        if vec.shape != (dim,):
            raise ValueError(f"candidate has shape {vec.shape}, expected ({dim},)")
    c = len(candidates)
    return np.asarray([math.fsum(v[d] for v in candidates) / c for d in range(dim)])


def concept_matrix(tokens, lexicon, max_ngram=3):
    """(k, d_c) matrix of averaged concept embeddings for a token list."""
    cands = extract_concepts(tokens, lexicon, max_ngram=max_ngram)
    return np.stack([average_candidates(c, lexicon.dim) for c in cands])
