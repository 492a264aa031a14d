"""The network: knowledge-gated GRU cells, bidirectional layers, global
context attention and the fusion/classification head.

One cell step computes

    r  = sigmoid(W_r [x, h, a] + b_r)
    z  = sigmoid(W_z [x, h, a] + b_z)
    n  = tanh(W_n x + b_n + r * (W_m x + b_m))
    nc = tanh(W_cn a + b_cn + r * (W_cm x + b_cm))
    h' = (1-z)*n + z*h + (1-z)*nc

where `a` is the per-token commonsense concept vector.  With a zeroed
concept pathway (a = 0 and W_cn = W_cm = b_cn = b_cm = 0) the cell reduces
exactly to a plain GRU with gates restricted to the [x, h] columns.

``ck_gru_step`` builds the step out of generic autodiff ops;
``ck_gru_sequence`` runs a whole sequence through the fused recurrence
kernel (compiled or NumPy, see ckgru.backend) with a hand-derived
backward pass.  The two agree to rounding error and are cross-checked in
the test suite.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .autodiff import (
    ShapeError,
    Tensor,
    _accumulate,
    _make,
    as_tensor,
    concat,
    dropout,
    gather_rows,
    matmul,
    mean_rows,
    reshape,
    sigmoid,
    softmax,
    tanh_op,
    transpose,
)
from .optim import ParamSet

OOV_TOKEN = "<oov>"

_CELL_FIELDS = ("w_r", "b_r", "w_z", "b_z", "w_n", "b_n", "w_m", "b_m",
                "w_cn", "b_cn", "w_cm", "b_cm")


@dataclass
class CkGruParams:
    """All weights of one knowledge-gated GRU cell."""

    w_r: Tensor   # (h, d_in + h + d_c)
    b_r: Tensor   # (h,)
    w_z: Tensor   # (h, d_in + h + d_c)
    b_z: Tensor   # (h,)
    w_n: Tensor   # (h, d_in)
    b_n: Tensor   # (h,)
    w_m: Tensor   # (h, d_in)
    b_m: Tensor   # (h,)
    w_cn: Tensor  # (h, d_c)
    b_cn: Tensor  # (h,)
    w_cm: Tensor  # (h, d_in)
    b_cm: Tensor  # (h,)

    @property
    def h(self):
        return self.w_n.data.shape[0]

    @property
    def d_in(self):
        return self.w_n.data.shape[1]

    @property
    def d_c(self):
        return self.w_cn.data.shape[1]

    def tensors(self):
        return tuple(getattr(self, f) for f in _CELL_FIELDS)

    def validate(self):
        d_in, h, d_c = self.d_in, self.h, self.d_c
        gate = (h, d_in + h + d_c)
        expect = {"w_r": gate, "w_z": gate, "w_n": (h, d_in), "w_m": (h, d_in),
                  "w_cn": (h, d_c), "w_cm": (h, d_in)}
        for name, shape in expect.items():
            got = getattr(self, name).data.shape
            if got != shape:
                raise ShapeError(f"{name}: expected {shape}, got {got}")
        for name in _CELL_FIELDS:
            if name.startswith("b") and getattr(self, name).data.shape != (h,):
                raise ShapeError(f"{name}: expected ({h},), got {getattr(self, name).data.shape}")


def _uniform_tensor(rng, shape, bound):
    n = int(np.prod(shape))
    return Tensor(rng.uniform_block(n, -bound, bound).reshape(shape))


def init_ck_gru_params(rng, d_in, h, d_c, zero_concepts=False):
    """Fresh cell weights: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), zero biases."""
    def w(rows, cols):
        return _uniform_tensor(rng, (rows, cols), 1.0 / math.sqrt(cols))

    def b():
        return Tensor(np.zeros(h))

    p = CkGruParams(
        w_r=w(h, d_in + h + d_c), b_r=b(),
        w_z=w(h, d_in + h + d_c), b_z=b(),
        w_n=w(h, d_in), b_n=b(),
        w_m=w(h, d_in), b_m=b(),
        w_cn=Tensor(np.zeros((h, d_c))) if zero_concepts else w(h, d_c), b_cn=b(),
        w_cm=Tensor(np.zeros((h, d_in))) if zero_concepts else w(h, d_in), b_cm=b(),
    )
    return p


def ck_gru_step(x, h_prev, alpha, p, combine="sum"):
    """One cell step built from generic autodiff ops."""
    x, h_prev, alpha = as_tensor(x), as_tensor(h_prev), as_tensor(alpha)
    if x.shape != (p.d_in,) or h_prev.shape != (p.h,) or alpha.shape != (p.d_c,):
        raise ShapeError(
            f"step inputs x{x.shape} h{h_prev.shape} a{alpha.shape} do not match "
            f"cell dims (d_in={p.d_in}, h={p.h}, d_c={p.d_c})")
    u = concat([x, h_prev, alpha])
    r = sigmoid(matmul(p.w_r, u) + p.b_r)
    z = sigmoid(matmul(p.w_z, u) + p.b_z)
    n = tanh_op(matmul(p.w_n, x) + p.b_n + r * (matmul(p.w_m, x) + p.b_m))
    nc = tanh_op(matmul(p.w_cn, alpha) + p.b_cn + r * (matmul(p.w_cm, x) + p.b_cm))
    if combine == "mean":
        return (1.0 - z) * ((n + nc) * 0.5) + z * h_prev
    return (1.0 - z) * n + z * h_prev + (1.0 - z) * nc


def _sequence_arrays(X, A, p, mean_combine):
    """Run the recurrence kernel on processing-order arrays.

    Shared by the autodiff op and the value-only fast path, so both
    compute the same function through the same kernel.
    """
    d_in, h = p.d_in, p.h
    wr, wz = p.w_r.data, p.w_z.data
    wrh = np.ascontiguousarray(wr[:, d_in:d_in + h])
    wzh = np.ascontiguousarray(wz[:, d_in:d_in + h])
    gxr = X @ wr[:, :d_in].T + A @ wr[:, d_in + h:].T + p.b_r.data
    gxz = X @ wz[:, :d_in].T + A @ wz[:, d_in + h:].T + p.b_z.data
    pn = X @ p.w_n.data.T + p.b_n.data
    pm = X @ p.w_m.data.T + p.b_m.data
    pcn = A @ p.w_cn.data.T + p.b_cn.data
    pcm = X @ p.w_cm.data.T + p.b_cm.data
    H, R, Z, N, NC = backend.seq_forward(gxr, gxz, pn, pm, pcn, pcm, wrh, wzh, mean_combine)
    return H, R, Z, N, NC, pm, pcm, wrh, wzh


def _check_sequence_shapes(xs_data, alphas_data, p):
    if xs_data.ndim != 2 or alphas_data.ndim != 2:
        raise ShapeError(f"sequence inputs must be 2-D, got {xs_data.shape} and {alphas_data.shape}")
    if alphas_data.shape[0] != xs_data.shape[0]:
        raise ShapeError(
            f"length mismatch: {xs_data.shape[0]} inputs vs {alphas_data.shape[0]} concept rows")
    if xs_data.shape[1] != p.d_in or alphas_data.shape[1] != p.d_c:
        raise ShapeError(
            f"widths {xs_data.shape}/{alphas_data.shape} do not match cell dims "
            f"(d_in={p.d_in}, d_c={p.d_c})")


def ck_gru_sequence(xs, alphas, p, reverse=False, combine="sum"):
    """Run a whole sequence through the fused recurrence kernel.

    `xs` is (k, d_in), `alphas` is (k, d_c); returns the (k, h) hidden
    states in input order.  With ``reverse=True`` the recurrence consumes
    the sequence right-to-left (concepts reversed in step with it) and row
    t still describes token t.
    """
    xs, alphas = as_tensor(xs), as_tensor(alphas)
    _check_sequence_shapes(xs.data, alphas.data, p)
    d_in, h = p.d_in, p.h
    mean_combine = combine == "mean"

    X = np.ascontiguousarray(xs.data[::-1] if reverse else xs.data)
    A = np.ascontiguousarray(alphas.data[::-1] if reverse else alphas.data)
    wr, wz = p.w_r.data, p.w_z.data
    wr_x, wr_a = wr[:, :d_in], wr[:, d_in + h:]
    wz_x, wz_a = wz[:, :d_in], wz[:, d_in + h:]
    H, R, Z, N, NC, pm, pcm, wrh, wzh = _sequence_arrays(X, A, p, mean_combine)
    out_data = np.ascontiguousarray(H[::-1]) if reverse else H

    def backprop(g):
        gp = np.ascontiguousarray(g[::-1] if reverse else g)
        dgxr, dgxz, dpn, dpm, dpcn, dpcm, dwrh, dwzh = backend.seq_backward(
            gp, H, R, Z, N, NC, pm, pcm, wrh, wzh, mean_combine)
        _accumulate(p.w_r, np.concatenate([dgxr.T @ X, dwrh, dgxr.T @ A], axis=1))
        _accumulate(p.b_r, dgxr.sum(axis=0))
        _accumulate(p.w_z, np.concatenate([dgxz.T @ X, dwzh, dgxz.T @ A], axis=1))
        _accumulate(p.b_z, dgxz.sum(axis=0))
        _accumulate(p.w_n, dpn.T @ X)
        _accumulate(p.b_n, dpn.sum(axis=0))
        _accumulate(p.w_m, dpm.T @ X)
        _accumulate(p.b_m, dpm.sum(axis=0))
        _accumulate(p.w_cn, dpcn.T @ A)
        _accumulate(p.b_cn, dpcn.sum(axis=0))
        _accumulate(p.w_cm, dpcm.T @ X)
        _accumulate(p.b_cm, dpcm.sum(axis=0))
        dX = dgxr @ wr_x + dgxz @ wz_x + dpn @ p.w_n.data + dpm @ p.w_m.data + dpcm @ p.w_cm.data
        dA = dgxr @ wr_a + dgxz @ wz_a + dpcn @ p.w_cn.data
        if reverse:
            dX, dA = dX[::-1], dA[::-1]
        _accumulate(xs, dX)
        _accumulate(alphas, dA)

    return _make(out_data, (xs, alphas) + p.tensors(), backprop)


def bigru_forward(xs, alphas, p_fwd, p_bwd, combine="sum"):
    """Bidirectional pass; row t is [fwd state at t || bwd state at t]."""
    hf = ck_gru_sequence(xs, alphas, p_fwd, reverse=False, combine=combine)
    hb = ck_gru_sequence(xs, alphas, p_bwd, reverse=True, combine=combine)
    return concat([hf, hb], axis=1)


def _bigru_values(X, A, p_fwd, p_bwd, mean_combine):
    hf = _sequence_arrays(X, A, p_fwd, mean_combine)[0]
    hb = _sequence_arrays(np.ascontiguousarray(X[::-1]),
                          np.ascontiguousarray(A[::-1]), p_bwd, mean_combine)[0]
    return np.concatenate([hf, hb[::-1]], axis=1)


def gcm_attend(hidden, w_q, w_k, w_v, iterations=2, residual=True):
    """Global context attention with iterative memory refinement.

    The per-token memory starts as the hidden states themselves.  Each
    iteration pools the memory into a global query, scores every row
    against it (scaled dot product), reweights the value-projected rows
    and writes them back (plus a residual copy when `residual`).

    Returns the final memory and an (iterations, k) array of the weight
    vectors, one row per refinement, for heatmap export.
    """
    memory = as_tensor(hidden)
    k, width = memory.data.shape
    scale = 1.0 / math.sqrt(width)
    weights = np.empty((iterations, k))
    w_k_t = transpose(w_k)
    w_v_t = transpose(w_v)
    for it in range(iterations):
        q = matmul(w_q, mean_rows(memory))
        keys = matmul(memory, w_k_t)
        scores = matmul(keys, q) * scale
        a = softmax(scores)
        vals = matmul(memory, w_v_t)
        out = reshape(a, (k, 1)) * vals
        memory = out + memory if residual else out
        weights[it] = a.data
    return memory, weights


@dataclass
class ClassifierHead:
    w_red: Tensor  # (d_red, 2h)
    b_red: Tensor
    w_out: Tensor  # (3, d_red + |vad| + |meta|)
    b_out: Tensor


def fuse_and_classify(summary, vad, meta, head):
    """Reduce the recurrent summary, splice in the lexicon/metadata
    features, and map to the 3 class logits (softmax lives in the loss)."""
    reduced = matmul(head.w_red, summary) + head.b_red
    parts = [reduced]
    if vad is not None:
        parts.append(Tensor(vad))
    if meta is not None and len(meta):
        parts.append(Tensor(meta))
    feats = concat(parts) if len(parts) > 1 else parts[0]
    return matmul(head.w_out, feats) + head.b_out


class EmbeddingProvider:
    """Token -> embedding-row mapping, trainable or loaded from file.

    Row 0 is always the dedicated out-of-vocabulary row.
    """

    def __init__(self, vocab, table, mode):
        self.vocab = vocab
        self.table = np.asarray(table, dtype=np.float64)
        self.mode = mode  # trainable_table | file_backed

    @classmethod
    def build(cls, token_lists, d_w, rng):
        """Vocabulary from a corpus (frequency order, ties lexicographic)."""
        counts = {}
        for tokens in token_lists:
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        vocab = {OOV_TOKEN: 0}
        for tok in ordered:
            vocab[tok] = len(vocab)
        table = rng.uniform_block(len(vocab) * d_w, -0.1, 0.1).reshape(len(vocab), d_w)
        return cls(vocab, table, "trainable_table")

    @classmethod
    def from_vocab(cls, tokens, table):
        vocab = {OOV_TOKEN: 0}
        for tok in tokens:
            if tok != OOV_TOKEN:
                vocab[tok] = len(vocab)
        return cls(vocab, table, "trainable_table")

    @classmethod
    def from_file(cls, path):
        """TSV rows `token<TAB>v1<TAB>...`; vectors are frozen at training."""
        vocab = {OOV_TOKEN: 0}
        rows = []
        d_w = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cells = line.split("\t")
                if len(cells) < 2:
                    raise ValueError(f"{path}:{lineno}: expected token and values")
                tok = cells[0]
                vec = [float(c) for c in cells[1:]]
                if d_w is None:
                    d_w = len(vec)
                elif len(vec) != d_w:
                    raise ValueError(f"{path}:{lineno}: expected {d_w} values, got {len(vec)}")
                if tok in vocab:
                    raise ValueError(f"{path}:{lineno}: duplicate token {tok!r}")
                vocab[tok] = len(vocab)
                rows.append(vec)
        if d_w is None:
            raise ValueError(f"{path}: empty embeddings file")
        table = np.vstack([np.zeros((1, d_w)), np.asarray(rows)])
        return cls(vocab, table, "file_backed")

    @property
    def d_w(self):
        return self.table.shape[1]

    def ids(self, tokens):
        return np.asarray([self.vocab.get(t, 0) for t in tokens], dtype=np.intp)

    def vocab_list(self):
        items = sorted(self.vocab.items(), key=lambda kv: kv[1])
        return [tok for tok, _ in items]

    def vocab_hash(self):
        joined = "\n".join(self.vocab_list()).encode("utf-8")
        return hashlib.sha256(joined).hexdigest()


@dataclass
class ModelConfig:
    """Architecture knobs; see RunConfig for the file-level surface."""

    d_w: int = 50
    d_c: int = 100
    h: int = 50
    d_red: int = 32
    gcm_iterations: int = 2
    gcm_residual: bool = True
    candidate_combine: str = "sum"  # sum | mean
    dropout: float = 0.5
    pos_size: int = 17
    dep_size: int = 10
    use_attention: bool = True
    use_vad: bool = True
    n_meta: int = 8
    concept_mode: str = "full"  # full | no_vectors | zeroed


@dataclass
class EncodedSample:
    """One tweet, ready for the network."""

    sample_id: str
    tokens: list
    token_ids: np.ndarray   # (k,)
    onehot: np.ndarray      # (k, pos_size + dep_size)
    alphas: np.ndarray      # (k, d_c)
    vad: np.ndarray         # (9,)
    meta: np.ndarray        # (n_meta,)
    label: int | None = None


class SentimentModel:
    """Embedding -> dropout -> bi-layer 1 -> attention -> dropout ->
    bi-layer 2 -> [last fwd state || last bwd state] -> fusion head."""

    def __init__(self, cfg, embedding, rng):
        self.cfg = cfg
        self.embedding = embedding
        self.params = ParamSet()
        if embedding.d_w != cfg.d_w:
            raise ShapeError(f"embedding width {embedding.d_w} != configured d_w {cfg.d_w}")
        if embedding.mode == "trainable_table":
            self.embed_table = self.params.add("embed.table", Tensor(embedding.table.copy()))
        else:
            self.embed_table = Tensor(embedding.table)
        d_in1 = cfg.d_w + cfg.pos_size + cfg.dep_size
        self.layer1 = (self._cell("layer1.fwd", d_in1, rng), self._cell("layer1.bwd", d_in1, rng))
        two_h = 2 * cfg.h
        if cfg.use_attention:
            bound = 1.0 / math.sqrt(two_h)
            self.w_q = self.params.add("attn.w_q", _uniform_tensor(rng, (two_h, two_h), bound))
            self.w_k = self.params.add("attn.w_k", _uniform_tensor(rng, (two_h, two_h), bound))
            self.w_v = self.params.add("attn.w_v", _uniform_tensor(rng, (two_h, two_h), bound))
        self.layer2 = (self._cell("layer2.fwd", two_h, rng), self._cell("layer2.bwd", two_h, rng))
        n_feats = cfg.d_red + (9 if cfg.use_vad else 0) + cfg.n_meta
        self.head = ClassifierHead(
            w_red=self.params.add("head.w_red", _uniform_tensor(rng, (cfg.d_red, two_h), 1.0 / math.sqrt(two_h))),
            b_red=self.params.add("head.b_red", Tensor(np.zeros(cfg.d_red))),
            w_out=self.params.add("head.w_out", _uniform_tensor(rng, (3, n_feats), 1.0 / math.sqrt(n_feats))),
            b_out=self.params.add("head.b_out", Tensor(np.zeros(3))),
        )

    def _cell(self, prefix, d_in, rng):
        cfg = self.cfg
        p = init_ck_gru_params(rng, d_in, cfg.h, cfg.d_c, zero_concepts=cfg.concept_mode == "zeroed")
        for name in _CELL_FIELDS:
            if cfg.concept_mode == "zeroed" and name in ("w_cn", "b_cn", "w_cm", "b_cm"):
                continue  # frozen at zero, not trained
            self.params.add(f"{prefix}.{name}", getattr(p, name))
        return p

    def forward(self, sample, training=False, rng=None):
        """Returns (logits Tensor(3,), attention weights (iterations, k))."""
        cfg = self.cfg
        k = len(sample.token_ids)
        emb = gather_rows(self.embed_table, sample.token_ids)
        x0 = concat([emb, Tensor(sample.onehot)], axis=1)
        x0 = dropout(x0, cfg.dropout, rng, training)
        if cfg.concept_mode == "full":
            alphas = Tensor(sample.alphas)
        else:
            alphas = Tensor(np.zeros((k, cfg.d_c)))
        h1 = bigru_forward(x0, alphas, *self.layer1, combine=cfg.candidate_combine)
        if cfg.use_attention:
            attended, weights = gcm_attend(
                h1, self.w_q, self.w_k, self.w_v,
                iterations=cfg.gcm_iterations, residual=cfg.gcm_residual)
        else:
            attended, weights = h1, np.full((1, k), 1.0 / k)
        attended = dropout(attended, cfg.dropout, rng, training)
        h2 = bigru_forward(attended, alphas, *self.layer2, combine=cfg.candidate_combine)
        summary = concat([h2[k - 1, :cfg.h], h2[0, cfg.h:]])
        logits = fuse_and_classify(
            summary,
            sample.vad if cfg.use_vad else None,
            sample.meta if cfg.n_meta else None,
            self.head)
        return logits, weights

    def loss(self, sample, training=False, rng=None):
        from .autodiff import cross_entropy

        logits, _ = self.forward(sample, training=training, rng=rng)
        return cross_entropy(reshape(logits, (1, 3)), [sample.label])

    def logits_values(self, sample):
        """Evaluation-mode forward on plain arrays (no graph).

        Same kernels and formulas as :meth:`forward`; used to keep
        finite-difference probes cheap.
        """
        cfg = self.cfg
        k = len(sample.token_ids)
        x0 = np.concatenate([self.embed_table.data[sample.token_ids], sample.onehot], axis=1)
        alphas = sample.alphas if cfg.concept_mode == "full" else np.zeros((k, cfg.d_c))
        mean_combine = cfg.candidate_combine == "mean"
        h1 = _bigru_values(x0, alphas, *self.layer1, mean_combine)
        if cfg.use_attention:
            memory = h1
            scale = 1.0 / math.sqrt(memory.shape[1])
            for _ in range(cfg.gcm_iterations):
                q = self.w_q.data @ memory.mean(axis=0)
                scores = (memory @ self.w_k.data.T) @ q * scale
                e = np.exp(scores - scores.max())
                a = e / e.sum()
                out = a[:, None] * (memory @ self.w_v.data.T)
                memory = out + memory if cfg.gcm_residual else out
        else:
            memory = h1
        h2 = _bigru_values(np.ascontiguousarray(memory), alphas, *self.layer2, mean_combine)
        summary = np.concatenate([h2[k - 1, :cfg.h], h2[0, cfg.h:]])
        reduced = self.head.w_red.data @ summary + self.head.b_red.data
        parts = [reduced]
        if cfg.use_vad:
            parts.append(sample.vad)
        if cfg.n_meta:
            parts.append(sample.meta)
        feats = np.concatenate(parts)
        return self.head.w_out.data @ feats + self.head.b_out.data

    def loss_value(self, sample):
        """Float loss via :meth:`logits_values`."""
        logits = self.logits_values(sample)
        shifted = logits - logits.max()
        return float(math.log(np.exp(shifted).sum()) - shifted[sample.label])

    def predict(self, sample):
        """(class index, class probabilities); ties go to the lowest index."""
        logits, weights = self.forward(sample, training=False)
        probs = softmax(logits).data
        return int(np.argmax(logits.data)), probs, weights
