"""
Training the encoder and aligning the corpus
============================================

One refinement round from the inside: a synthetic corpus with known chunk
structure, an encoder trained against the segmentation lattices, and a
prior-scaled Viterbi pass that picks one segmentation per word occurrence.
The collected variant weights are then thresholded, collapsing the
segmentation sets to what the audio actually supports.
"""

import numpy as np

from adsm.corpus import SyntheticSpec, g2p_entries_for, gen_synthetic
from adsm.encoder import TrainConfig, init_params, train
from adsm.lexicon import build_initial_vocab, make_initial_segtable, prepare_entries
from adsm.pipeline import align_corpus, build_dataset, refine
from adsm.vocab import marked

# Four words built from the chunks ab and cd; features are per-chunk
# prototype vectors plus noise, so chunk boundaries are recoverable.
spec = SyntheticSpec(
    word_segs={"ab": ("ab",), "cd": ("cd",), "abcd": ("ab", "cd"),
               "cdab": ("cd", "ab")},
    dim=8, frames_per_unit=4, noise=0.1, n_utterances=60,
    min_words=2, max_words=3, seed=5)
corp, truth = gen_synthetic(spec)
print(f"corpus: {len(corp)} utterances, words {sorted(corp.words())}")

entries = prepare_entries(g2p_entries_for(spec))
vocab = build_initial_vocab(entries, corp.words())
table = make_initial_segtable(corp.words(), vocab)
print(f"initial vocabulary: {len(vocab)} units")

# Train at subsampling factor 2.  The loss marginalizes over every
# segmentation of every word, so no alignment is needed yet.
dataset = build_dataset(corp, vocab, table)
params = init_params(8, (24,), vocab.num_classes, subsample_factor=2,
                     radii=(0,), seed=0)
result = train(dataset, params, TrainConfig(epochs=12, learning_rate=1.0,
                                            batch_size=8, seed=1), vocab)
print("\nloss curve (train / holdout):")
for epoch, (tr, ho) in enumerate(result.curve):
    print(f"  epoch {epoch:2d}  {tr:8.4f}  {ho:8.4f}")

# Align with the label prior scaled by 0.3: dividing the posteriors by
# q^0.3 keeps frequent classes from swallowing every frame.
aligned, stats, skipped = align_corpus(params, dataset, 0.3, vocab)
print(f"\naligned {len(aligned)} utterances, skipped {skipped}")

print("\ncollected variant weights:")
for word in sorted(stats.counts):
    for units, count in stats.counts[word].items():
        print(f"  {word:5s} -> {' '.join(marked(u) for u in units):12s} {count:4.0f}")

# Keep variants above 5% relative weight; everything else is discarded and
# the weights renormalized.  The vocabulary shrinks to the surviving units
# plus the single-character safety net.
table2, vocab2 = refine(stats, 0.05)
print(f"\nafter refinement: {len(vocab2)} units")
for word in table2.words():
    for units, weight in table2.unit_variants(word):
        print(f"  {word:5s} -> {' '.join(marked(u) for u in units):12s} {weight:.2f}")
