"""Dataset ingestion and per-sample feature assembly.

Datasets are UTF-8 TSV files with a header row.  Required columns: ``id``,
``text`` and (for training) ``label`` in {positive, negative, neutral},
case-insensitive.  Optional metadata columns use the source-field names in
:data:`ckgru.features.FEATURE_FIELDS` (post_date, favorite_count, ...);
optional ``tokens``/``pos_ids``/``dep_ids`` columns carry a pre-computed
tokenization that bypasses the built-in normalizer and stub tagger.
"""

import datetime
from dataclasses import dataclass

import numpy as np

from .features import (
    FEATURE_FIELDS,
    MetadataRecord,
    VadLexicon,
    linguistic_onehot,
    load_wordlist,
    text_counts,
    vad_features,
)
from .knowledge import ConceptLexicon, concept_matrix
from .model import EmbeddingProvider
from .preprocess import load_resources, process

LABELS = ("negative", "neutral", "positive")

_META_COLUMNS = ("post_date", "favorite_count", "retweet_count", "user_favorites",
                 "followers", "friends", "listed_count", "statuses", "verified",
                 "has_profile_image")


class DatasetError(ValueError):
    pass


@dataclass
class RawTweet:
    tweet_id: str
    text: str
    label: int | None = None
    meta: dict | None = None        # parsed metadata source columns
    tokens: list | None = None      # pre-tokenized input, if the file carries it
    pos_ids: list | None = None
    dep_ids: list | None = None


def _parse_label(value, path, lineno):
    name = value.strip().lower()
    if name not in LABELS:
        raise DatasetError(f"{path}:{lineno}: unknown label {value!r} "
                           f"(expected one of {', '.join(LABELS)})")
    return LABELS.index(name)


def _parse_days(value, path, lineno):
    value = value.strip()
    if not value:
        return 0
    try:
        return int(value)
    except ValueError:
        pass
    try:
        date = datetime.date.fromisoformat(value)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: bad post_date {value!r} "
                           f"(expected integer days or YYYY-MM-DD)") from None
    return (date - datetime.date(1970, 1, 1)).days


def _parse_flag(value, path, lineno, column):
    name = value.strip().lower()
    if name in ("1", "yes", "true", "y"):
        return 1
    if name in ("0", "no", "false", "n", ""):
        return 0
    raise DatasetError(f"{path}:{lineno}: bad {column} value {value!r}")


def _parse_count(value, path, lineno, column):
    value = value.strip()
    if not value:
        return 0
    try:
        n = int(value)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: bad {column} value {value!r}") from None
    if n < 0:
        raise DatasetError(f"{path}:{lineno}: {column} must be non-negative")
    return n


def ingest_dataset(path, require_labels=True):
    """Parse a dataset TSV into RawTweet records."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline().rstrip("\n")
        if not header_line:
            raise DatasetError(f"{path}: empty file")
        header = header_line.split("\t")
        columns = {name: i for i, name in enumerate(header)}
        for required in ("id", "text"):
            if required not in columns:
                raise DatasetError(f"{path}: missing required column {required!r}")
        if require_labels and "label" not in columns:
            raise DatasetError(f"{path}: missing required column 'label'")
        rows = []
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}")
            text = cells[columns["text"]]
            if not text.strip():
                raise DatasetError(f"{path}:{lineno}: empty text")
            label = None
            if "label" in columns:
                raw = cells[columns["label"]].strip()
                if raw:
                    label = _parse_label(raw, path, lineno)
                elif require_labels:
                    raise DatasetError(f"{path}:{lineno}: missing label")
            meta = {}
            for col in _META_COLUMNS:
                if col not in columns:
                    continue
                value = cells[columns[col]]
                if col == "post_date":
                    meta[col] = _parse_days(value, path, lineno)
                elif col in ("verified", "has_profile_image"):
                    meta[col] = _parse_flag(value, path, lineno, col)
                else:
                    meta[col] = _parse_count(value, path, lineno, col)
            tokens = pos_ids = dep_ids = None
            if "tokens" in columns and "pos_ids" in columns and "dep_ids" in columns:
                tokens = cells[columns["tokens"]].split()
                pos_ids = [int(x) for x in cells[columns["pos_ids"]].split(",") if x]
                dep_ids = [int(x) for x in cells[columns["dep_ids"]].split(",") if x]
                if not (len(tokens) == len(pos_ids) == len(dep_ids)) or not tokens:
                    raise DatasetError(f"{path}:{lineno}: tokens/pos_ids/dep_ids misaligned")
            rows.append(RawTweet(
                tweet_id=cells[columns["id"]], text=text, label=label,
                meta=meta, tokens=tokens, pos_ids=pos_ids, dep_ids=dep_ids))
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return rows


@dataclass
class ResourceBundle:
    normalizer: object
    vad: VadLexicon
    concepts: ConceptLexicon | None
    positive_words: set
    negative_words: set
    embeddings: EmbeddingProvider | None


def load_bundle(cfg):
    """Load every external resource the config names (bundled defaults for
    the normalizer tables, empty lexicons when unset)."""
    normalizer = load_resources(
        emoji_path=cfg.emoji_map or None,
        contractions_path=cfg.contractions or None,
        dictionary_path=cfg.dictionary or None,
    )
    vad = VadLexicon.load(cfg.vad_lexicon) if cfg.vad_lexicon else VadLexicon()
    concepts = ConceptLexicon.load(cfg.concept_lexicon) if cfg.concept_lexicon else None
    if concepts is not None and concepts.dim != cfg.d_c:
        raise ValueError(
            f"concept lexicon dimension {concepts.dim} != configured d_c {cfg.d_c}")
    positive = load_wordlist(cfg.bingliu_positive) if cfg.bingliu_positive else set()
    negative = load_wordlist(cfg.bingliu_negative) if cfg.bingliu_negative else set()
    embeddings = EmbeddingProvider.from_file(cfg.embeddings) if cfg.embeddings else None
    if embeddings is not None and embeddings.d_w != cfg.d_w:
        raise ValueError(
            f"embeddings file width {embeddings.d_w} != configured d_w {cfg.d_w}")
    return ResourceBundle(normalizer, vad, concepts, positive, negative, embeddings)


@dataclass
class Prepared:
    """One tweet with every model-independent feature materialized."""

    tweet_id: str
    text: str
    tokens: list
    pos_ids: list
    dep_ids: list
    onehot: np.ndarray
    alphas: np.ndarray
    vad: np.ndarray
    meta_full: np.ndarray  # all 17 features in schema order
    label: int | None


def prepare_samples(raws, bundle, cfg):
    """normalize/tokenize/tag (unless pre-tagged), then featurize."""
    out = []
    for raw in raws:
        if raw.tokens is not None:
            tokens, pos_ids, dep_ids = raw.tokens, raw.pos_ids, raw.dep_ids
        else:
            seq = process(raw.text, bundle.normalizer, max_len=cfg.max_len)
            tokens, pos_ids, dep_ids = seq.tokens, seq.pos_ids, seq.dep_ids
        onehot = linguistic_onehot(pos_ids, dep_ids, cfg.pos_size, cfg.dep_size)
        if bundle.concepts is not None:
            alphas = concept_matrix(tokens, bundle.concepts)
        else:
            alphas = np.zeros((len(tokens), cfg.d_c))
        vad = vad_features(tokens, bundle.vad)
        counts = text_counts(raw.text, bundle.normalizer,
                             bundle.positive_words, bundle.negative_words)
        record = MetadataRecord(**counts, **(raw.meta or {}))
        out.append(Prepared(
            tweet_id=raw.tweet_id, text=raw.text, tokens=tokens,
            pos_ids=pos_ids, dep_ids=dep_ids, onehot=onehot, alphas=alphas,
            vad=vad, meta_full=record.full_vector(), label=raw.label))
    return out


def write_tokenized(path, prepared):
    """Write the `preprocess` subcommand output TSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\ttokens\tpos_ids\tdep_ids\tlabel\n")
        for p in prepared:
            label = LABELS[p.label] if p.label is not None else ""
            fh.write("\t".join([
                p.tweet_id,
                " ".join(p.tokens),
                ",".join(str(i) for i in p.pos_ids),
                ",".join(str(i) for i in p.dep_ids),
                label,
            ]) + "\n")
