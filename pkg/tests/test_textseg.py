import math

import numpy as np
import pytest

from adsm.errors import FormatError
from adsm.textseg import (BOS, EOS, SubwordNgramLM, detokenize,
                          segment_corpus, segment_word, train_lm)
from adsm.vocab import SegTable, Vocabulary, marked

from conftest import enumerate_segmentations, flagged


def small_table():
    """Words "ab" (split-favored 3:1) and "b"; vocab also holds "aa"."""
    vocab = Vocabulary.from_units(
        [("a", False), ("a", True), ("b", False), ("b", True),
         ("ab", True), ("aa", False), ("aa", True)])
    entries = {
        "ab": [((vocab.id("a", False), vocab.id("b", True)), 0.75),
               ((vocab.id("ab", True),), 0.25)],
        "b": [((vocab.id("b", True),), 1.0)],
    }
    return SegTable.explicit(entries, vocab)


def counted_lm():
    lm = SubwordNgramLM(order=2, add_k=0.5, events=("a", "b_", EOS))
    lm.add((BOS,), "a", 2.0)
    lm.add(("a",), "b_", 2.0)
    lm.add(("b_",), EOS, 2.0)
    return lm


def test_lm_validation():
    with pytest.raises(ValueError):
        SubwordNgramLM(order=0, add_k=0.1, events=(EOS,))
    with pytest.raises(ValueError):
        SubwordNgramLM(order=2, add_k=0.0, events=(EOS,))
    with pytest.raises(ValueError):
        SubwordNgramLM(order=2, add_k=0.1, events=("a", "b"))


def test_history_is_fixed_length():
    lm = SubwordNgramLM(order=3, add_k=0.1, events=("a", EOS))
    assert lm._history(()) == (BOS, BOS)
    assert lm._history(("a",)) == (BOS, "a")
    assert lm._history(("a", "b", "c")) == ("b", "c")
    uni = SubwordNgramLM(order=1, add_k=0.1, events=("a", EOS))
    assert uni._history(("a", "b")) == ()


def test_logp_hand_values():
    lm = counted_lm()
    # counts 2 with add_k 0.5 over 3 events: (2 + .5) / (2 + 1.5)
    seen = math.log(2.5 / 3.5)
    assert lm.logp("a", ()) == pytest.approx(seen, rel=1e-12)
    assert lm.logp("b_", ("a",)) == pytest.approx(seen, rel=1e-12)
    assert lm.logp(EOS, ("a", "b_")) == pytest.approx(seen, rel=1e-12)
    # unseen event under a seen history
    assert lm.logp("b_", ()) == pytest.approx(math.log(0.5 / 3.5), rel=1e-12)
    # history never counted at all
    assert lm.logp("a", ("b_",)) == pytest.approx(math.log(0.5 / 3.5), rel=1e-12)
    with pytest.raises(KeyError):
        lm.logp("zz", ())


def test_conditionals_sum_to_one():
    lm = counted_lm()
    for hist in [(), ("a",), ("b_",), ("a", "b_")]:
        total = sum(math.exp(lm.logp(e, hist)) for e in lm.events)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_score_and_perplexity():
    lm = counted_lm()
    assert lm.score(("a", "b_")) == pytest.approx(3 * math.log(2.5 / 3.5), rel=1e-12)
    # 3 events over 3 positions, every conditional 2.5/3.5
    assert lm.perplexity([("a", "b_")]) == pytest.approx(3.5 / 2.5, rel=1e-12)
    with pytest.raises(ValueError):
        lm.perplexity([])


def test_lm_save_load_round_trip(tmp_path):
    lm = counted_lm()
    lm.add((), "a", 0.25)  # order-1 style empty history exercises the "-" form
    p1, p2 = tmp_path / "lm1.tsv", tmp_path / "lm2.tsv"
    lm.save(p1)
    back = SubwordNgramLM.load(p1)
    assert back.order == lm.order
    assert back.add_k == lm.add_k
    assert back.events == lm.events
    assert back.counts == lm.counts
    assert back.totals == lm.totals
    back.save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_lm_load_rejects_bad_files(tmp_path):
    path = tmp_path / "lm.tsv"
    path.write_text("#wrong\n", encoding="utf-8")
    with pytest.raises(FormatError):
        SubwordNgramLM.load(path)
    path.write_text("#adsm-lm-v1\nngram\ta\tb\n", encoding="utf-8")
    with pytest.raises(FormatError):
        SubwordNgramLM.load(path)
    path.write_text("#adsm-lm-v1\nthis\tline\tis\tbad\n", encoding="utf-8")
    with pytest.raises(FormatError):
        SubwordNgramLM.load(path)
    path.write_text("#adsm-lm-v1\nadd_k\t0.1\nevents\t</s>\n", encoding="utf-8")
    with pytest.raises(FormatError):  # order missing
        SubwordNgramLM.load(path)


def test_train_lm_counts():
    lm = train_lm(small_table(), order=2, add_k=0.1)
    assert lm.events == ("a", "a_", "aa", "aa_", "ab_", "b", "b_", EOS)
    assert lm.counts[(BOS,)] == {"a": 0.75, "ab_": 0.25, "b_": 1.0}
    assert lm.counts[("a",)] == {"b_": 0.75}
    assert lm.counts[("b_",)] == {EOS: 1.75}
    assert lm.counts[("ab_",)] == {EOS: 0.25}
    assert lm.totals[(BOS,)] == pytest.approx(2.0)
    assert lm.totals[("b_",)] == pytest.approx(1.75)


def test_train_lm_rejects_bad_tables():
    vocab = Vocabulary.from_units([("a", True)])
    with pytest.raises(ValueError):
        train_lm(SegTable.implicit(["a"], vocab))
    with pytest.raises(ValueError):
        train_lm(SegTable.explicit({}, vocab))


def test_known_word_best_takes_heaviest_variant():
    table = small_table()
    lm = train_lm(table)
    assert segment_word("ab", table, lm) == (("a", False), ("b", True))
    assert segment_word("b", table, lm, mode="sample", rng=0) == (("b", True),)


def test_known_word_sampling_follows_weights():
    table = small_table()
    lm = train_lm(table)
    rng = np.random.default_rng(11)
    n = 2000
    split = sum(segment_word("ab", table, lm, mode="sample", rng=rng)
                == (("a", False), ("b", True)) for _ in range(n))
    # 3 sigma around p = 0.75
    sigma = math.sqrt(0.75 * 0.25 / n)
    assert abs(split / n - 0.75) < 3 * sigma
    # integer seeds restart the generator, so the draw is reproducible
    draws = [segment_word("ab", table, lm, mode="sample", rng=5) for _ in range(4)]
    assert len(set(draws)) == 1


def test_unknown_word_matches_exhaustive_argmax():
    rng = np.random.default_rng(23)
    alphabet = "ab"
    for _ in range(60):
        units = {(ch, e) for ch in alphabet for e in (False, True)}
        for _ in range(int(rng.integers(2, 6))):
            k = int(rng.integers(2, 4))
            piece = "".join(rng.choice(list(alphabet), size=k))
            units.add((piece, bool(rng.integers(2))))
        vocab = Vocabulary.from_units(units)
        tokens = tuple(sorted(marked(u) for u in vocab))
        lm = SubwordNgramLM(order=2, add_k=0.2, events=tokens + (EOS,))
        for _ in range(12):  # pseudo-training on random token strings
            sent = [tokens[int(rng.integers(len(tokens)))]
                    for _ in range(int(rng.integers(1, 5)))]
            for i, tok in enumerate(sent):
                lm.add(lm._history(tuple(sent[:i])), tok, float(rng.integers(1, 4)))
            lm.add(lm._history(tuple(sent)), EOS, 1.0)
        table = SegTable.explicit({}, vocab)
        word = "".join(rng.choice(list(alphabet), size=int(rng.integers(1, 7))))
        spellings = {s for s, _ in vocab}
        cands = []
        for pieces in enumerate_segmentations(word, spellings):
            us = flagged(pieces)
            if all(u in vocab for u in us):
                toks = tuple(marked(u) for u in us)
                cands.append((lm.score(toks), len(us), toks, us))
        want = cands[0]
        for c in cands[1:]:
            if (c[0], ) > (want[0], ) or (c[0] == want[0] and (c[1], c[2]) < (want[1], want[2])):
                want = c
        assert segment_word(word, table, lm) == want[3]


def test_dp_prefers_fewer_then_lexicographic():
    vocab = Vocabulary.from_units(
        [("a", False), ("a", True), ("aa", False), ("aa", True), ("b", True)])
    lm = SubwordNgramLM(order=2, add_k=0.3,
                        events=tuple(sorted(marked(u) for u in vocab)) + (EOS,))
    table = SegTable.explicit({}, vocab)
    # no counts: every conditional is uniform, so score depends on length only
    assert segment_word("aa", table, lm) == (("aa", True),)
    assert segment_word("aaa", table, lm) == (("a", False), ("aa", True))


def test_segment_word_errors():
    table = small_table()
    lm = train_lm(table)
    with pytest.raises(ValueError):
        segment_word("ab", table, lm, mode="weird")
    with pytest.raises(ValueError, match="outside the alphabet"):
        segment_word("axb", table, lm)
    # chars known but no word-final unit fits
    vocab = Vocabulary.from_units([("c", False), ("d", True)])
    bare = SegTable.explicit({}, vocab)
    lm2 = SubwordNgramLM(order=2, add_k=0.1,
                         events=tuple(sorted(marked(u) for u in vocab)) + (EOS,))
    with pytest.raises(ValueError, match="current vocabulary"):
        segment_word("dc", bare, lm2)


def test_segment_corpus_round_trips():
    table = small_table()
    lm = train_lm(table)
    lines = ["ab b", "b ab ab", "aab b"]
    for mode in ("best", "sample"):
        segged = segment_corpus(lines, table, lm, mode=mode, seed=3)
        assert [detokenize(s) for s in segged] == lines
    best = segment_corpus(["ab b"], table, lm)
    assert best == ["a b_ b_"]


def test_segment_corpus_sampling_is_seeded():
    table = small_table()
    lm = train_lm(table)
    lines = ["ab ab ab ab ab ab"] * 4
    a = segment_corpus(lines, table, lm, mode="sample", seed=9)
    b = segment_corpus(lines, table, lm, mode="sample", seed=9)
    assert a == b
    trials = [segment_corpus(lines, table, lm, mode="sample", seed=s)
              for s in range(8)]
    assert len({tuple(t) for t in trials}) > 1


def test_detokenize():
    assert detokenize("a b_ ab_") == "ab ab"
    assert detokenize("b_") == "b"
    assert detokenize("") == ""
    with pytest.raises(ValueError):
        detokenize("a b")
