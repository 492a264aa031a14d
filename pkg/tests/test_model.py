import math

import numpy as np
import pytest

from ckgru.autodiff import ShapeError, Tensor, softmax, tsum
from ckgru.gradcheck import finite_diff_check
from ckgru.model import (
    CkGruParams,
    ClassifierHead,
    EmbeddingProvider,
    bigru_forward,
    ck_gru_sequence,
    ck_gru_step,
    fuse_and_classify,
    gcm_attend,
    init_ck_gru_params,
)
from ckgru.optim import ParamSet
from ckgru.rng import Rng

from oracles import plain_gru_forward


def _zero_concept_params(rng, d, h, c):
    """Cell weights with the concept pathway nulled out."""
    p = init_ck_gru_params(rng, d, h, c, zero_concepts=True)
    # gate columns for alpha stay random; alpha = 0 makes them inert
    return p


def _gate_slices(p, d, h):
    wr = p.w_r.data
    wz = p.w_z.data
    return wr[:, :d + h], wz[:, :d + h]


@pytest.mark.parametrize("seed", range(25))
def test_step_reduces_to_plain_gru(seed):
    rng = Rng(1000 + seed)
    d = 1 + rng.randbelow(5)
    h = 1 + rng.randbelow(5)
    c = 1 + rng.randbelow(4)
    p = _zero_concept_params(rng, d, h, c)
    x = rng.uniform_block(d, -1, 1)
    hprev = rng.uniform_block(h, -1, 1)
    out = ck_gru_step(Tensor(x), Tensor(hprev), Tensor(np.zeros(c)), p).data

    wr, wz = _gate_slices(p, d, h)
    u = np.concatenate([x, hprev])
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    r = sig(wr @ u + p.b_r.data)
    z = sig(wz @ u + p.b_z.data)
    n = np.tanh(p.w_n.data @ x + p.b_n.data + r * (p.w_m.data @ x + p.b_m.data))
    expected = (1.0 - z) * n + z * hprev
    assert np.abs(out - expected).max() < 1e-12


@pytest.mark.parametrize("seed", range(25))
def test_sequence_reduces_to_plain_gru_oracle(seed):
    rng = Rng(2000 + seed)
    d = 1 + rng.randbelow(5)
    h = 1 + rng.randbelow(5)
    c = 1 + rng.randbelow(4)
    k = 1 + rng.randbelow(7)
    p = _zero_concept_params(rng, d, h, c)
    X = rng.uniform_block(k * d, -1, 1).reshape(k, d)
    A = np.zeros((k, c))
    wr, wz = _gate_slices(p, d, h)
    for reverse in (False, True):
        got = ck_gru_sequence(Tensor(X), Tensor(A), p, reverse=reverse).data
        want = plain_gru_forward(X, wr, p.b_r.data, wz, p.b_z.data,
                                 p.w_n.data, p.b_n.data, p.w_m.data, p.b_m.data,
                                 reverse=reverse)
        assert np.abs(got - want).max() < 1e-12


def test_saturated_update_gate_carries_state():
    rng = Rng(5)
    d, h, c = 3, 4, 2
    p = init_ck_gru_params(rng, d, h, c)
    p.b_z.data[...] = 50.0  # z ~= 1 exactly
    hprev = rng.uniform_block(h, -1, 1)
    out = ck_gru_step(Tensor(rng.uniform_block(d, -1, 1)), Tensor(hprev),
                      Tensor(rng.uniform_block(c, -1, 1)), p).data
    assert np.abs(out - hprev).max() < 1e-10


def test_gates_stay_in_unit_interval_and_state_bounded():
    rng = Rng(6)
    d, h, c = 4, 6, 3
    p = init_ck_gru_params(rng, d, h, c)
    state = np.zeros(h)
    for _ in range(1000):
        x = rng.uniform_block(d, -3, 3)
        a = rng.uniform_block(c, -3, 3)
        out = ck_gru_step(Tensor(x), Tensor(state), Tensor(a), p).data
        bound = max(np.abs(state).max(), 2.0)
        assert np.abs(out).max() <= bound + 1e-12
        state = out


def test_step_gradients_match_finite_differences():
    rng = Rng(7)
    d, h, c = 3, 4, 2
    p = init_ck_gru_params(rng, d, h, c)
    params = ParamSet()
    for name in ("w_r", "b_r", "w_z", "b_z", "w_n", "b_n", "w_m", "b_m",
                 "w_cn", "b_cn", "w_cm", "b_cm"):
        params.add(name, getattr(p, name))
    x = params.add("x", rng.uniform_block(d, -1, 1))
    hp = params.add("h", rng.uniform_block(h, -1, 1))
    a = params.add("a", rng.uniform_block(c, -1, 1))
    w = rng.uniform_block(h, -1, 1)

    def fn():
        return tsum(ck_gru_step(x, hp, a, p) * w)

    assert finite_diff_check(fn, params) < 1e-4


def test_step_shape_validation():
    p = init_ck_gru_params(Rng(0), 3, 4, 2)
    with pytest.raises(ShapeError):
        ck_gru_step(Tensor(np.zeros(5)), Tensor(np.zeros(4)), Tensor(np.zeros(2)), p)


def test_bigru_single_token_uses_same_input_for_both_halves():
    rng = Rng(8)
    d, h, c = 3, 4, 2
    pf = init_ck_gru_params(rng, d, h, c)
    X = rng.uniform_block(d, -1, 1).reshape(1, d)
    A = rng.uniform_block(c, -1, 1).reshape(1, c)
    out = bigru_forward(Tensor(X), Tensor(A), pf, pf)
    assert out.data.shape == (1, 2 * h)
    assert np.abs(out.data[0, :h] - out.data[0, h:]).max() < 1e-15


def test_bigru_output_shape_and_length_mismatch():
    rng = Rng(9)
    d, h, c, k = 3, 5, 2, 4
    pf = init_ck_gru_params(rng, d, h, c)
    pb = init_ck_gru_params(rng, d, h, c)
    X = rng.uniform_block(k * d, -1, 1).reshape(k, d)
    A = rng.uniform_block(k * c, -1, 1).reshape(k, c)
    assert bigru_forward(Tensor(X), Tensor(A), pf, pb).data.shape == (k, 2 * h)
    with pytest.raises(ShapeError):
        bigru_forward(Tensor(X), Tensor(A[:-1]), pf, pb)


def test_bigru_reversal_swaps_direction_halves():
    rng = Rng(10)
    d, h, c, k = 3, 4, 2, 5
    p = init_ck_gru_params(rng, d, h, c)
    X = rng.uniform_block(k * d, -1, 1).reshape(k, d)
    A = rng.uniform_block(k * c, -1, 1).reshape(k, c)
    out = bigru_forward(Tensor(X), Tensor(A), p, p).data
    rev = bigru_forward(Tensor(X[::-1].copy()), Tensor(A[::-1].copy()), p, p).data
    assert np.abs(rev[::-1, :h] - out[:, h:]).max() < 1e-12
    assert np.abs(rev[::-1, h:] - out[:, :h]).max() < 1e-12


def _attn_weights(rng, width):
    bound = 1.0 / math.sqrt(width)
    mk = lambda: Tensor(rng.uniform_block(width * width, -bound, bound).reshape(width, width))
    return mk(), mk(), mk()


def test_gcm_identical_rows_give_exactly_uniform_weights():
    rng = Rng(11)
    k, width = 5, 6
    wq, wk, wv = _attn_weights(rng, width)
    row = rng.uniform_block(width, -1, 1)
    hidden = Tensor(np.tile(row, (k, 1)))
    _, weights = gcm_attend(hidden, wq, wk, wv, iterations=3)
    assert weights.shape == (3, k)
    assert np.all(weights == 1.0 / k)


def test_gcm_weights_sum_to_one_every_iteration():
    rng = Rng(12)
    k, width = 7, 4
    wq, wk, wv = _attn_weights(rng, width)
    hidden = Tensor(rng.uniform_block(k * width, -1, 1).reshape(k, width))
    out, weights = gcm_attend(hidden, wq, wk, wv, iterations=4)
    assert out.data.shape == (k, width)
    for it in range(4):
        assert weights[it].min() >= 0.0
        assert abs(weights[it].sum() - 1.0) < 1e-9


def test_gcm_hand_computed_two_tokens():
    # 1x2 projections, k=2: weights are the softmax of two scalar scores
    hidden = np.array([[1.0, 0.0], [0.0, 2.0]])
    wq = Tensor(np.array([[0.5, -0.25]]))
    wk = Tensor(np.array([[1.0, 0.5]]))
    wv = Tensor(np.array([[0.0, 0.0], [0.0, 0.0]]))
    _, weights = gcm_attend(Tensor(hidden), wq, wk, wv, iterations=1, residual=True)
    q = wq.data @ hidden.mean(axis=0)          # scalar query
    scores = (hidden @ wk.data.T)[:, 0] * q[0] / math.sqrt(2.0)
    e = np.exp(scores - scores.max())
    expected = e / e.sum()
    assert np.abs(weights[0] - expected).max() < 1e-12


def test_gcm_residual_off_changes_memory():
    rng = Rng(13)
    k, width = 3, 4
    wq, wk, wv = _attn_weights(rng, width)
    hidden = Tensor(rng.uniform_block(k * width, -1, 1).reshape(k, width))
    with_res, _ = gcm_attend(hidden, wq, wk, wv, iterations=1, residual=True)
    without, _ = gcm_attend(hidden, wq, wk, wv, iterations=1, residual=False)
    assert np.abs(with_res.data - without.data - hidden.data).max() < 1e-12


def test_gcm_gradients_flow():
    rng = Rng(14)
    k, width = 4, 4
    params = ParamSet()
    wq = params.add("wq", rng.uniform_block(width * width, -0.5, 0.5).reshape(width, width))
    wk = params.add("wk", rng.uniform_block(width * width, -0.5, 0.5).reshape(width, width))
    wv = params.add("wv", rng.uniform_block(width * width, -0.5, 0.5).reshape(width, width))
    hidden = params.add("hidden", rng.uniform_block(k * width, -1, 1).reshape(k, width))
    mix = rng.uniform_block(k * width, -1, 1).reshape(k, width)

    def fn():
        out, _ = gcm_attend(hidden, wq, wk, wv, iterations=2)
        return tsum(out * mix)

    assert finite_diff_check(fn, params) < 1e-4


def test_fuse_zero_parameters_give_zero_logits():
    head = ClassifierHead(
        w_red=Tensor(np.zeros((4, 6))), b_red=Tensor(np.zeros(4)),
        w_out=Tensor(np.zeros((3, 4 + 9 + 2))), b_out=Tensor(np.zeros(3)))
    logits = fuse_and_classify(Tensor(np.ones(6)), np.full(9, 0.5), np.ones(2), head)
    assert np.array_equal(logits.data, np.zeros(3))
    assert int(np.argmax(logits.data)) == 0  # ties break to the lowest class


def test_fuse_without_reduction_layer_still_differentiable():
    # d_red == 2h: the reduce layer is square, gradients still check out
    rng = Rng(15)
    two_h = 6
    params = ParamSet()
    head = ClassifierHead(
        w_red=params.add("w_red", rng.uniform_block(two_h * two_h, -0.4, 0.4).reshape(two_h, two_h)),
        b_red=params.add("b_red", np.zeros(two_h)),
        w_out=params.add("w_out", rng.uniform_block(3 * (two_h + 9 + 2), -0.4, 0.4).reshape(3, two_h + 9 + 2)),
        b_out=params.add("b_out", np.zeros(3)),
    )
    summary = params.add("summary", rng.uniform_block(two_h, -1, 1))
    vad = rng.uniform_block(9, 0, 1)
    meta = rng.uniform_block(2, 0, 1)

    def fn():
        from ckgru.autodiff import cross_entropy, reshape

        logits = fuse_and_classify(summary, vad, meta, head)
        return cross_entropy(reshape(logits, (1, 3)), [2])

    assert finite_diff_check(fn, params) < 1e-4


def test_embedding_provider_vocab_and_oov():
    rng = Rng(16)
    provider = EmbeddingProvider.build([["b", "a", "b"], ["c", "b"]], 4, rng)
    # frequency order: b(3), then ties a/c lexicographic; OOV row first
    assert provider.vocab_list() == ["<oov>", "b", "a", "c"]
    ids = provider.ids(["b", "zzz", "c"])
    assert ids.tolist() == [1, 0, 3]
    assert provider.table.shape == (4, 4)
    assert len(provider.vocab_hash()) == 64


def test_embedding_provider_from_file(tmp_path):
    path = tmp_path / "emb.tsv"
    path.write_text("hello\t0.1\t0.2\nworld\t0.3\t0.4\n", encoding="utf-8")
    provider = EmbeddingProvider.from_file(path)
    assert provider.mode == "file_backed"
    assert provider.d_w == 2
    assert provider.ids(["world", "nope"]).tolist() == [2, 0]
    assert np.array_equal(provider.table[0], [0.0, 0.0])
