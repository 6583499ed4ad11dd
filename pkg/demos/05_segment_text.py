"""
Segmenting text with a learned subword table
============================================

Once the pipeline has produced a final segmentation table, text can be
tokenized without any audio.  Words from the table use their stored
variants; anything else falls back to a dynamic program over an n-gram
model of the learned units.  Word-end markers keep the token stream
invertible, so the original text is always recoverable.
"""

import numpy as np

from adsm.textseg import detokenize, segment_corpus, segment_word, train_lm
from adsm.vocab import SegTable, Vocabulary, marked

# A hand-built final table standing in for a pipeline result: "hello" has
# two stored variants, everything else one.  The vocabulary also carries
# every single character, which is what guarantees open-vocabulary cover.
units = [("hel", False), ("lo", True), ("hello", True), ("wor", False),
         ("ld", True), ("or", False), ("orld", True)]
for ch in "helowrd":
    units += [(ch, False), (ch, True)]
vocab = Vocabulary.from_units(units)
entries = {
    "hello": [((vocab.id("hel", False), vocab.id("lo", True)), 0.8),
              ((vocab.id("hello", True),), 0.2)],
    "world": [((vocab.id("wor", False), vocab.id("ld", True)), 1.0)],
}
table = SegTable.explicit(entries, vocab)

# The n-gram model is counted from the table itself, each variant weighted
# by its stored weight.
lm = train_lm(table, order=2, add_k=0.1)
print(f"LM over {len(lm.events)} events, order {lm.order}")

print("\nstored words:")
for word in table.words():
    units = segment_word(word, table, lm)
    print(f"  {word} -> {' '.join(marked(u) for u in units)}")

# "held" and "wold" never occurred, but their characters did; the DP picks
# the highest-scoring split under the unit LM.
print("\nunseen words:")
for word in ("held", "wold", "wow", "hellolo"):
    units = segment_word(word, table, lm)
    print(f"  {word} -> {' '.join(marked(u) for u in units)}")

# Sampling mode draws stored variants by weight; useful as a training-time
# data augmentation.  The draw below follows the 0.8 / 0.2 split.
rng = np.random.default_rng(3)
draws = [segment_word("hello", table, lm, mode="sample", rng=rng)
         for _ in range(1000)]
frac = np.mean([d == (("hel", False), ("lo", True)) for d in draws])
print(f"\nsample mode picked hel lo_ in {100 * frac:.1f}% of 1000 draws")

# Whole lines round-trip exactly through the marked token stream.
lines = ["hello world", "world hello held"]
segged = segment_corpus(lines, table, lm)
for before, after in zip(lines, segged):
    print(f"\n  {before!r}")
    print(f"  -> {after!r}")
    print(f"  -> {detokenize(after)!r}")
assert [detokenize(s) for s in segged] == lines
