"""Synthetic desk-scale datasets for verification experiments.

Three generators:

``separable``
    Labels follow keyword presence (one positive/negative keyword per
    non-neutral tweet), so a trivial keyword rule scores 100%.  Used for
    the overfit sanity experiment.

``concept_task``
    Every tweet contains exactly one planted concept (a 1- or 2-token
    phrase) that occurs nowhere else in the dataset, and the label is
    argmax_c(u_c . v) over the concept's lexicon vector v.  Surface tokens
    therefore carry no transferable signal across train/test splits --
    test concepts are out-of-vocabulary by construction -- while the
    concept vectors determine the label exactly.  A model that consumes
    the lexicon can generalize; a concept-blind one cannot.

``noise``
    Uniformly random labels over filler text; nothing is learnable.

Each run writes ``dataset.tsv`` plus, for concept_task, ``concepts.tsv``
and a ``task_meta.json`` describing the labelling rule so tests can
re-derive every label independently.
"""

import json
from pathlib import Path

import numpy as np

from .data import LABELS
from .rng import Rng

FILLERS = ("the", "a", "and", "people", "today", "really", "just", "now",
           "think", "about", "day", "time", "news", "story", "thing", "post")

POSITIVE_KEYWORDS = ("love", "great")
NEGATIVE_KEYWORDS = ("hate", "awful")

SPECS = ("separable", "concept_task", "noise")


def _letters(i):
    out = ""
    i += 1
    while i:
        i, rem = divmod(i - 1, 26)
        out = chr(ord("a") + rem) + out
    return out


def _filler_tokens(rng, lo=4, hi=8):
    n = lo + rng.randbelow(hi - lo + 1)
    return [FILLERS[rng.randbelow(len(FILLERS))] for _ in range(n)]


def _write_dataset(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\ttext\tlabel\n")
        for i, (text, label) in enumerate(rows):
            fh.write(f"t{i:04d}\t{text}\t{LABELS[label]}\n")


def _gen_separable(n, rng):
    rows = []
    for i in range(n):
        target = i % 3
        tokens = _filler_tokens(rng)
        if target == LABELS.index("positive"):
            kw = POSITIVE_KEYWORDS[rng.randbelow(len(POSITIVE_KEYWORDS))]
        elif target == LABELS.index("negative"):
            kw = NEGATIVE_KEYWORDS[rng.randbelow(len(NEGATIVE_KEYWORDS))]
        else:
            kw = None
        if kw is not None:
            tokens.insert(rng.randbelow(len(tokens) + 1), kw)
        rows.append((" ".join(tokens), target))
    meta = {"kind": "separable",
            "positive_keywords": list(POSITIVE_KEYWORDS),
            "negative_keywords": list(NEGATIVE_KEYWORDS)}
    return rows, None, meta


def _gen_concept_task(n, rng, d_c, margin=0.3):
    class_dirs = rng.uniform_block(3 * d_c, -1.0, 1.0).reshape(3, d_c)
    lexicon = {}
    rows = []
    for i in range(n):
        target = i % 3
        while True:
            vec = rng.uniform_block(d_c, -1.0, 1.0)
            scores = class_dirs @ vec
            order = np.argsort(scores)
            if int(np.argmax(scores)) == target and scores[order[-1]] - scores[order[-2]] >= margin:
                break
        if rng.randbelow(3) == 0:  # third of the concepts span two tokens
            toks = [f"p{_letters(i)}", f"q{_letters(i)}"]
        else:
            toks = [f"c{_letters(i)}"]
        lexicon["_".join(toks)] = vec
        tokens = _filler_tokens(rng)
        pos = rng.randbelow(len(tokens) + 1)
        tokens[pos:pos] = toks
        rows.append((" ".join(tokens), target))
    meta = {"kind": "concept_task", "d_c": d_c,
            "class_dirs": [[repr(float(x)) for x in row] for row in class_dirs]}
    return rows, lexicon, meta


def _gen_noise(n, rng):
    rows = [(" ".join(_filler_tokens(rng)), rng.randbelow(3)) for _ in range(n)]
    return rows, None, {"kind": "noise"}


def synth_gen(spec, n, seed, out_dir, d_c=8):
    """Generate a synthetic dataset into `out_dir`; returns written paths."""
    if spec not in SPECS:
        raise ValueError(f"unknown synthetic spec {spec!r} (expected one of {', '.join(SPECS)})")
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Rng(seed, stream=9)
    if spec == "separable":
        rows, lexicon, meta = _gen_separable(n, rng)
    elif spec == "concept_task":
        rows, lexicon, meta = _gen_concept_task(n, rng, d_c)
    else:
        rows, lexicon, meta = _gen_noise(n, rng)
    paths = {"dataset": out_dir / "dataset.tsv"}
    _write_dataset(paths["dataset"], rows)
    if lexicon is not None:
        paths["concepts"] = out_dir / "concepts.tsv"
        with open(paths["concepts"], "w", encoding="utf-8") as fh:
            for phrase, vec in lexicon.items():
                fh.write(phrase + "\t" + "\t".join(repr(float(x)) for x in vec) + "\n")
    paths["meta"] = out_dir / "task_meta.json"
    with open(paths["meta"], "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
