import math

import numpy as np
import pytest

from adsm.encoder import (EncoderParams, TrainConfig, encode, flatten_params,
                          init_params, load_params, resize_output, save_params,
                          set_flat_params, set_subsample, subsampled_length,
                          train, utterance_grads)
from adsm.ctc import log_loss
from adsm.errors import FormatError
from adsm.lattice import build_word_dag_implicit, ctc_expand, lattice_from_dag
from adsm.vocab import Vocabulary
from conftest import chars_vocab


def test_train_config_validation():
    TrainConfig()
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(decay=0.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(holdout_fraction=1.0)


def test_subsampled_length_is_iterated_ceil():
    rng = np.random.default_rng(5)
    for _ in range(200):
        T = int(rng.integers(1, 50))
        f = 2 ** int(rng.integers(0, 4))
        want = T
        k = f
        while k > 1:
            want = math.ceil(want / 2)
            k //= 2
        assert subsampled_length(T, f) == want
    assert subsampled_length(17, 1) == 17


def test_init_params_shapes_and_pool_schedule():
    p = init_params(6, (8, 5), 4, subsample_factor=4, radii=(1, 0), seed=0)
    assert p.hidden_sizes == (8, 5)
    assert p.weights[0].shape == (3 * 6, 8)
    assert p.weights[1].shape == (8, 5)
    assert p.out_w.shape == (5, 4)
    assert p.pool_after == (0, 1)
    assert init_params(6, (8, 5), 4, subsample_factor=8).pool_after == (0, 1, 1)
    assert init_params(6, (8,), 4, subsample_factor=4).pool_after == (0, 0)
    with pytest.raises(ValueError, match="power of two"):
        init_params(6, (8,), 4, subsample_factor=3)
    with pytest.raises(ValueError, match="radius"):
        init_params(6, (8, 5), 4, radii=(1,))


def test_encode_shape_and_normalization():
    rng = np.random.default_rng(9)
    for factor in (1, 2, 4):
        p = init_params(5, (7,), 4, subsample_factor=factor, seed=1)
        for T in (1, 3, 8, 11):
            x = rng.standard_normal((T, 5))
            logp = encode(x, p)
            assert logp.shape == (subsampled_length(T, factor), 4)
            np.testing.assert_allclose(np.exp(logp).sum(axis=1), 1.0, rtol=1e-12)
    with pytest.raises(ValueError, match="expected"):
        encode(rng.standard_normal((4, 3)), p)


def test_encode_matches_manual_single_layer():
    # radius 1, no pooling: one affine + tanh + affine + log softmax
    rng = np.random.default_rng(13)
    p = init_params(3, (4,), 5, subsample_factor=1, radii=(1,), seed=2)
    x = rng.standard_normal((6, 3))
    xp = np.vstack([np.zeros(3), x, np.zeros(3)])
    ctx = np.hstack([xp[t : t + 3].ravel() for t in range(6)]).reshape(6, 9)
    h = np.tanh(ctx @ p.weights[0] + p.biases[0])
    score = h @ p.out_w + p.out_b
    want = score - np.log(np.exp(score).sum(axis=1, keepdims=True))
    np.testing.assert_allclose(encode(x, p), want, atol=1e-12)


def test_pooling_keeps_pairwise_max():
    # with frame-local context, swapping a pooling pair cannot change the output
    rng = np.random.default_rng(17)
    p = init_params(4, (6,), 3, subsample_factor=2, radii=(0,), seed=3)
    x = rng.standard_normal((8, 4))
    swapped = x.copy()
    for k in range(0, 8, 2):
        swapped[[k, k + 1]] = swapped[[k + 1, k]]
    np.testing.assert_allclose(encode(x, p), encode(swapped, p), atol=1e-12)


def small_graph(vocab_word="ab"):
    vocab = chars_vocab(vocab_word)
    dag = build_word_dag_implicit(vocab_word, vocab)
    return vocab, ctc_expand(lattice_from_dag(dag), vocab)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(19)
    for factor in (1, 2):
        vocab, graph = small_graph()
        p = init_params(3, (4,), vocab.num_classes, subsample_factor=factor, seed=4)
        assert p.n_params() <= 100
        T = graph.min_frames * factor + 2
        x = rng.standard_normal((T, 3))
        _, grads = utterance_grads(x, graph, p)
        flat_g = np.concatenate([g.ravel() for g in grads])
        theta = flatten_params(p)
        eps = 1e-4
        for k in rng.choice(theta.size, size=12, replace=False):
            step = np.zeros_like(theta)
            step[k] = eps
            set_flat_params(p, theta + step)
            up, _ = utterance_grads(x, graph, p)
            set_flat_params(p, theta - step)
            dn, _ = utterance_grads(x, graph, p)
            set_flat_params(p, theta)
            fd = (up - dn) / (2 * eps)
            assert flat_g[k] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def toy_dataset(n=12, T=6, seed=0):
    """Two prototype classes, one single-letter word each."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary.from_units([("a", True), ("b", True)])
    protos = {"a": rng.standard_normal(3), "b": rng.standard_normal(3)}
    data = []
    for i in range(n):
        word = "ab"[i % 2]
        x = protos[word] + 0.05 * rng.standard_normal((T, 3))
        lat = lattice_from_dag(build_word_dag_implicit(word, vocab))
        data.append((x, ctc_expand(lat, vocab)))
    return vocab, data


def test_train_reduces_loss_and_is_seeded():
    vocab, data = toy_dataset()
    cfg = TrainConfig(learning_rate=0.5, epochs=15, seed=7, holdout_fraction=0.25)
    p1 = init_params(3, (6,), vocab.num_classes, seed=5)
    r1 = train(data, p1, cfg)
    assert r1.params is p1
    assert len(r1.curve) == 15
    assert r1.skipped == 0
    assert r1.curve[-1][0] < r1.curve[0][0]
    assert all(np.isfinite(h) for _, h in r1.curve)
    p2 = init_params(3, (6,), vocab.num_classes, seed=5)
    r2 = train(data, p2, cfg)
    np.testing.assert_array_equal(flatten_params(p1), flatten_params(p2))


def test_train_restores_best_holdout_epoch():
    vocab, data = toy_dataset()
    cfg = TrainConfig(learning_rate=0.5, epochs=10, seed=7, holdout_fraction=0.25)
    p = init_params(3, (6,), vocab.num_classes, seed=5)
    result = train(data, p, cfg)
    best = min(h for _, h in result.curve)
    rng = np.random.default_rng(7)
    order = rng.permutation(len(data))
    hold = [data[i] for i in order[: int(round(0.25 * len(data)))]]
    final = float(np.mean([log_loss(g, encode(x, p))[0] for x, g in hold]))
    assert final == pytest.approx(best, abs=1e-12)


def test_train_skips_infeasible_and_rejects_empty():
    vocab, data = toy_dataset(n=6, T=6)
    v2 = chars_vocab("ab")
    two_label = ctc_expand(lattice_from_dag(build_word_dag_implicit("ab", v2)), v2)
    # raw T=2 pools to one frame at factor 4; two labels cannot fit
    p = init_params(3, (6,), vocab.num_classes, subsample_factor=4, seed=5)
    short = (np.zeros((2, 3)), two_label)
    result = train(data + [short], p, TrainConfig(epochs=1, seed=0))
    assert result.skipped == 1
    with pytest.raises(ValueError, match="infeasible"):
        train([short], p, TrainConfig(epochs=1, seed=0))


def test_resize_output_modes():
    p = init_params(3, (6, 4), 5, subsample_factor=2, seed=11)
    fresh = resize_output(p, 8, seed=12)
    assert fresh.num_classes == 8
    assert fresh.out_w.shape == (4, 8)
    assert not np.array_equal(fresh.weights[0], p.weights[0])
    warm = resize_output(p, 8, seed=12, keep_lower=True)
    np.testing.assert_array_equal(warm.weights[0], p.weights[0])
    np.testing.assert_array_equal(warm.biases[1], p.biases[1])
    assert warm.out_w.shape == (4, 8)
    assert warm.subsample_factor == p.subsample_factor


def test_set_subsample_redistributes_pools():
    p = init_params(3, (6, 4), 5, subsample_factor=2, seed=11)
    assert p.pool_after == (0,)
    set_subsample(p, 4)
    assert p.subsample_factor == 4
    assert p.pool_after == (0, 1)


def test_params_save_load_round_trip(tmp_path):
    p = init_params(3, (5, 4), 6, subsample_factor=2, radii=(1, 0), seed=13)
    path = tmp_path / "params.txt"
    save_params(p, path)
    q = load_params(path)
    assert (q.input_dim, q.num_classes, q.subsample_factor) == (3, 6, 2)
    assert q.radii == (1, 0)
    assert q.pool_after == p.pool_after
    np.testing.assert_array_equal(flatten_params(q), flatten_params(p))
    first = path.read_bytes()
    save_params(q, path)
    assert path.read_bytes() == first


def test_params_load_rejects_bad_files(tmp_path):
    path = tmp_path / "params.txt"
    path.write_text("wrong\n")
    with pytest.raises(FormatError, match="header"):
        load_params(path)
    p = init_params(3, (4,), 5, seed=0)
    save_params(p, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(FormatError):
        load_params(path)
