"""Per-word segmentation DAGs, utterance lattices, and their blank-augmented
frame-transition graphs.

A :class:`WordSegDAG` encodes a word's allowed unit sequences as labeled arcs
between character positions (implicit form) or trie nodes (explicit form).
Word DAGs concatenate into an :class:`UttLattice`, which expands into a
:class:`CtcGraph` whose frame paths are exactly the blank-augmented alignments
of every allowed unit sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .vocab import Unit, Vocabulary, marked

GRAPH_HEADER = "#adsm-graph-v1"
DAG_HEADER = "#adsm-dag-v1"


@dataclass(frozen=True)
class WordSegDAG:
    """Acyclic graph over one word; every source-to-sink path is one allowed
    unit sequence.  ``node_pos[n]`` is the character position of node ``n``;
    the source is node 0 at position 0, the sink is the last node at
    position ``len(word)``.  Arcs into the sink carry word-end labels."""

    word: str
    node_pos: tuple[int, ...]
    arcs: tuple[tuple[int, int, int], ...]  # (from_node, to_node, unit id)

    @property
    def n_nodes(self) -> int:
        return len(self.node_pos)

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return len(self.node_pos) - 1


@dataclass(frozen=True)
class UttLattice:
    """Concatenation of word DAGs; arcs never cross a word boundary.

    ``boundaries[i]`` is the node where word ``i`` starts; the final entry is
    the global sink."""

    words: tuple[str, ...]
    n_nodes: int
    arcs: tuple[tuple[int, int, int, int], ...]  # (from, to, unit id, word index)
    boundaries: tuple[int, ...]


def build_word_dag_implicit(word: str, vocab: Vocabulary) -> WordSegDAG:
    """DAG of every segmentation of ``word`` over the vocabulary.

    Nodes are the character positions 0..len(word).  Arcs that cannot reach
    the sink or be reached from the source are pruned so downstream graphs
    carry no dead states.  Raises ValueError when the word is not spellable.
    """
    n = len(word)
    candidate = []
    for i in range(n):
        for j in range(i + 1, n + 1):
            unit = (word[i:j], j == n)
            uid = vocab.id_of.get(unit)
            if uid is not None:
                candidate.append((i, j, uid))
    fwd = [False] * (n + 1)
    fwd[0] = True
    for i, j, _ in candidate:  # candidates are sorted by (i, j): one forward sweep suffices
        if fwd[i]:
            fwd[j] = True
    bwd = [False] * (n + 1)
    bwd[n] = True
    for i, j, _ in reversed(candidate):
        if bwd[j]:
            bwd[i] = True
    if not (fwd[n] and bwd[0]):
        raise ValueError(f"word {word!r} is not spellable over the vocabulary")
    arcs = tuple((i, j, uid) for i, j, uid in candidate if fwd[i] and bwd[j])
    return WordSegDAG(word, tuple(range(n + 1)), arcs)


def build_word_dag_explicit(variants: Sequence[Sequence[int]],
                            vocab: Vocabulary) -> WordSegDAG:
    """Prefix-sharing DAG whose path set is exactly the given variant set.

    Variants sharing only a suffix stay on separate branches (merging them
    could splice paths together); all branches join at a single sink node.
    """
    seqs = sorted({tuple(v) for v in variants})
    if not seqs:
        raise ValueError("no variants")
    words = set()
    for ids in seqs:
        units = [vocab.unit(i) for i in ids]
        flags = [e for _, e in units]
        if not flags[-1] or any(flags[:-1]):
            raise ValueError("word_end must sit exactly on the last unit")
        words.add("".join(s for s, _ in units))
    if len(words) > 1:
        raise ValueError(f"variants spell different words: {sorted(words)}")
    word = words.pop()
    n = len(word)

    # Trie over variant prefixes; node ids in discovery order, sink appended last.
    node_pos = [0]
    children: list[dict[int, int]] = [{}]
    trie_arcs: list[tuple[int, int, int]] = []
    ends: list[tuple[int, int]] = []  # (pre-final node, final unit id)
    for ids in seqs:
        node = 0
        for uid in ids[:-1]:
            nxt = children[node].get(uid)
            if nxt is None:
                nxt = len(node_pos)
                spelling, _ = vocab.unit(uid)
                node_pos.append(node_pos[node] + len(spelling))
                children.append({})
                children[node][uid] = nxt
                trie_arcs.append((node, nxt, uid))
            node = nxt
        ends.append((node, ids[-1]))
    sink = len(node_pos)
    node_pos.append(n)
    arcs = tuple(trie_arcs) + tuple((node, sink, uid) for node, uid in ends)
    return WordSegDAG(word, tuple(node_pos), arcs)


def concat_utterance(dags: Sequence[WordSegDAG]) -> UttLattice:
    """Chain word DAGs, fusing each sink with the next source."""
    if not dags:
        raise ValueError("empty word list")
    arcs: list[tuple[int, int, int, int]] = []
    boundaries = [0]
    offset = 0
    for w, dag in enumerate(dags):
        for u, v, uid in dag.arcs:
            arcs.append((u + offset, v + offset, uid, w))
        offset += dag.n_nodes - 1  # sink is reused as the next word's source
        boundaries.append(offset)
    return UttLattice(tuple(d.word for d in dags), offset + 1, tuple(arcs),
                      tuple(boundaries))


def lattice_from_dag(dag: WordSegDAG) -> UttLattice:
    return concat_utterance([dag])


@dataclass
class CtcGraph:
    """Frame-transition graph: states emit one class per frame, a frame path
    is accepted when consecutive states are linked by a transition (self
    loops included), it starts in ``initial`` and ends in ``final``.

    States 0..n_nodes-1 are the lattice nodes' blank states; one label state
    per lattice arc follows.  Direct label-to-label transitions exist only
    between different labels; identical neighbors must pass through the
    intervening node's blank state, which keeps the collapse of every
    accepted path inside the lattice's path set.
    """

    labels: np.ndarray           # per-state emitted class, blank for node states
    blank: int
    initial: np.ndarray          # state ids
    final: np.ndarray            # state ids
    pred: list[np.ndarray]       # per-state predecessor ids (self included), ascending
    succ: list[np.ndarray]       # per-state successor ids (self included), ascending
    state_arc: np.ndarray        # lattice arc index per state, -1 for blanks
    state_word: np.ndarray       # word index per state, -1 for blanks
    min_frames: int
    label_adj: list[np.ndarray] = field(repr=False)   # arc-to-arc adjacency
    label_initial: np.ndarray = field(repr=False)     # arc indices leaving the source
    label_final: np.ndarray = field(repr=False)       # arc indices entering the sink
    arc_labels: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return self.blank + 1

    def transitions(self) -> list[tuple[int, int]]:
        """All (from, to) pairs, self loops included."""
        return [(int(p), s) for s in range(self.n_states) for p in self.pred[s]]


def ctc_expand(lattice: UttLattice, vocab: Vocabulary) -> CtcGraph:
    """Blank-augment a lattice into its frame-transition graph."""
    n_nodes = lattice.n_nodes
    arcs = lattice.arcs
    n_states = n_nodes + len(arcs)
    blank = vocab.blank_id

    labels = np.full(n_states, blank, dtype=np.int64)
    state_arc = np.full(n_states, -1, dtype=np.int64)
    state_word = np.full(n_states, -1, dtype=np.int64)
    for a, (_, _, uid, w) in enumerate(arcs):
        labels[n_nodes + a] = uid
        state_arc[n_nodes + a] = a
        state_word[n_nodes + a] = w

    out_arcs: list[list[int]] = [[] for _ in range(n_nodes)]
    in_arcs: list[list[int]] = [[] for _ in range(n_nodes)]
    for a, (u, v, _, _) in enumerate(arcs):
        out_arcs[u].append(a)
        in_arcs[v].append(a)

    succ: list[set[int]] = [set() for _ in range(n_states)]
    for s in range(n_states):
        succ[s].add(s)
    for a, (u, v, uid, _) in enumerate(arcs):
        sa = n_nodes + a
        succ[u].add(sa)            # node blank -> label state
        succ[sa].add(v)            # label state -> node blank
        for b in out_arcs[v]:      # label -> label, different labels only
            if arcs[b][2] != uid:
                succ[sa].add(n_nodes + b)

    pred: list[set[int]] = [set() for _ in range(n_states)]
    for s, outs in enumerate(succ):
        for t in outs:
            pred[t].add(s)

    source, sink = 0, n_nodes - 1
    initial = np.array(sorted([source] + [n_nodes + a for a in out_arcs[source]]),
                       dtype=np.int64)
    final = np.array(sorted([sink] + [n_nodes + a for a in in_arcs[sink]]),
                     dtype=np.int64)

    pred_a = [np.array(sorted(p), dtype=np.int64) for p in pred]
    succ_a = [np.array(sorted(s), dtype=np.int64) for s in succ]

    # Minimal accepted path length: BFS on the self-loop-free transition graph.
    INF = n_states + 1
    dist = np.full(n_states, INF, dtype=np.int64)
    dist[initial] = 1
    order = sorted(range(n_states), key=_state_rank(n_nodes, arcs))
    for s in order:
        if dist[s] >= INF:
            continue
        for t in succ_a[s]:
            if t != s and dist[s] + 1 < dist[t]:
                dist[t] = dist[s] + 1
    min_frames = int(dist[final].min())

    label_adj = [np.array(sorted(n_nodes + b for b in out_arcs[v]), dtype=np.int64) - n_nodes
                 for (_, v, _, _) in arcs]
    return CtcGraph(
        labels=labels,
        blank=blank,
        initial=initial,
        final=final,
        pred=pred_a,
        succ=succ_a,
        state_arc=state_arc,
        state_word=state_word,
        min_frames=min_frames,
        label_adj=label_adj,
        label_initial=np.array(sorted(out_arcs[source]), dtype=np.int64),
        label_final=np.array(sorted(in_arcs[sink]), dtype=np.int64),
        arc_labels=np.array([uid for (_, _, uid, _) in arcs], dtype=np.int64),
    )


def _state_rank(n_nodes, arcs):
    # Topological key: blanks sort at their node position, label states between
    # their endpoints.  Node ids increase along the lattice by construction.
    def rank(s):
        if s < n_nodes:
            return (s, 0)
        u, v, _, _ = arcs[s - n_nodes]
        return (u, 1, v, s)
    return rank


def path_stats(g: CtcGraph | WordSegDAG | UttLattice) -> tuple[int, int, int]:
    """(path count, shortest label length, longest label length) by DP."""
    count, _, lo, hi = _label_path_dp(g)
    return count, lo, hi


def path_length_stats(g: CtcGraph | WordSegDAG | UttLattice) -> tuple[int, float]:
    """(path count, mean label length over all paths)."""
    count, total, _, _ = _label_path_dp(g)
    return count, total / count if count else 0.0


def _label_path_dp(g):
    if isinstance(g, CtcGraph):
        n = len(g.arc_labels)
        starts, finals, adj = g.label_initial, g.label_final, g.label_adj
        order = range(n)
    else:
        lattice = lattice_from_dag(g) if isinstance(g, WordSegDAG) else g
        n = len(lattice.arcs)
        out_by_node: list[list[int]] = [[] for _ in range(lattice.n_nodes)]
        for a, (u, _, _, _) in enumerate(lattice.arcs):
            out_by_node[u].append(a)
        starts = out_by_node[0]
        finals = [a for a, (_, v, _, _) in enumerate(lattice.arcs)
                  if v == lattice.n_nodes - 1]
        adj = [out_by_node[lattice.arcs[a][1]] for a in range(n)]
        order = range(n)

    INF = 1 << 60
    count = [0] * n
    total = [0] * n
    lo = [INF] * n
    hi = [-1] * n
    for a in starts:
        count[a], total[a], lo[a], hi[a] = 1, 1, 1, 1
    # Arc order is topological: an arc's id can only feed arcs with larger
    # source nodes, and arcs are sorted by source node first.
    for a in order:
        if not count[a]:
            continue
        for b in adj[a]:
            b = int(b)
            count[b] += count[a]
            total[b] += total[a] + count[a]
            lo[b] = min(lo[b], lo[a] + 1)
            hi[b] = max(hi[b], hi[a] + 1)
    c = sum(count[a] for a in finals)
    t = sum(total[a] for a in finals)
    l = min((lo[a] for a in finals if count[a]), default=0)
    h = max((hi[a] for a in finals if count[a]), default=0)
    return c, t, l, h


def enumerate_label_paths(g: WordSegDAG | UttLattice) -> list[tuple[int, ...]]:
    """All source-to-sink unit-id sequences, by plain recursive walk.

    Exponential in path count; test and oracle use only.
    """
    lattice = lattice_from_dag(g) if isinstance(g, WordSegDAG) else g
    out_by_node: list[list[tuple[int, int]]] = [[] for _ in range(lattice.n_nodes)]
    for u, v, uid, _ in lattice.arcs:
        out_by_node[u].append((v, uid))
    sink = lattice.n_nodes - 1
    paths: list[tuple[int, ...]] = []

    def walk(node, prefix):
        if node == sink:
            paths.append(tuple(prefix))
            return
        for v, uid in out_by_node[node]:
            prefix.append(uid)
            walk(v, prefix)
            prefix.pop()

    walk(0, [])
    return paths


def dump_graph(graph: CtcGraph, vocab: Vocabulary | None = None) -> str:
    """Line-oriented dump (`state id label`, `arc from to`) for golden tests."""
    lines = [GRAPH_HEADER]
    for s in range(graph.n_states):
        uid = int(graph.labels[s])
        if vocab is not None:
            label = vocab.spelling(uid)
        else:
            label = "eps" if uid == graph.blank else str(uid)
        lines.append(f"state {s} {label}")
    for u, v in graph.transitions():
        lines.append(f"arc {u} {v}")
    for s in graph.initial:
        lines.append(f"initial {int(s)}")
    for s in graph.final:
        lines.append(f"final {int(s)}")
    return "\n".join(lines) + "\n"


def dump_dag(dag: WordSegDAG, vocab: Vocabulary | None = None) -> str:
    lines = [DAG_HEADER]
    for n, pos in enumerate(dag.node_pos):
        lines.append(f"node {n} {pos}")
    for u, v, uid in dag.arcs:
        label = vocab.spelling(uid) if vocab is not None else str(uid)
        lines.append(f"arc {u} {v} {label}")
    return "\n".join(lines) + "\n"
