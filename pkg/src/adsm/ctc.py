"""Exact dynamic programming over frame-transition graphs.

All quantities live in log space; per-frame scores are gathered through a
padded predecessor table so each DP step is a single vectorized reduction.
The exhaustive :func:`enumerate_oracle` deliberately avoids this machinery
and recomputes everything from first principles on tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InfeasibleUtteranceError, NumericalError
from .lattice import CtcGraph, UttLattice, WordSegDAG, enumerate_label_paths, lattice_from_dag

PRIOR_FLOOR = 1e-10


def collapse(frame_labels: Sequence[int], blank: int) -> tuple[int, ...]:
    """Remove label loops, then blanks."""
    out = []
    prev = None
    for y in frame_labels:
        y = int(y)
        if y != prev and y != blank:
            out.append(y)
        prev = y
    return tuple(out)


@dataclass(frozen=True)
class Alignment:
    """A frame path with its collapsed unit sequence and frame spans."""

    frame_labels: tuple[int, ...]
    frame_states: tuple[int, ...]
    collapsed: tuple[int, ...]
    spans: tuple[tuple[int, int], ...]  # (first_frame, last_frame) per collapsed unit


def _check_posteriors(logp: np.ndarray) -> np.ndarray:
    logp = np.asarray(logp, dtype=np.float64)
    if logp.ndim != 2:
        raise ValueError("posterior matrix must be 2-D")
    if not np.all(np.isfinite(logp)):
        raise NumericalError("posterior matrix contains non-finite values")
    return logp


def _check_feasible(graph: CtcGraph, n_frames: int) -> None:
    if n_frames < graph.min_frames:
        raise InfeasibleUtteranceError(
            f"{n_frames} frames < minimal alignment length {graph.min_frames}")


def _padded(index_lists: list[np.ndarray], n_states: int) -> np.ndarray:
    """Ragged id lists to a dense matrix; the sentinel column indexes a -inf slot."""
    width = max(len(ix) for ix in index_lists)
    out = np.full((n_states, width), n_states, dtype=np.int64)
    for s, ix in enumerate(index_lists):
        out[s, : len(ix)] = ix
    return out


def _forward(graph: CtcGraph, scores: np.ndarray) -> np.ndarray:
    """alpha[t, s]: log-sum over accepted prefixes ending in state s at t."""
    T = scores.shape[0]
    S = graph.n_states
    pred = _padded(graph.pred, S)
    emit = scores[:, graph.labels]          # (T, S)
    alpha = np.full((T, S), -np.inf)
    alpha[0, graph.initial] = emit[0, graph.initial]
    buf = np.empty(S + 1)
    buf[S] = -np.inf
    for t in range(1, T):
        buf[:S] = alpha[t - 1]
        alpha[t] = logsumexp(buf[pred], axis=1) + emit[t]
    return alpha


def _backward(graph: CtcGraph, scores: np.ndarray) -> np.ndarray:
    """beta[t, s]: log-sum over accepted suffixes leaving state s after t."""
    T = scores.shape[0]
    S = graph.n_states
    succ = _padded(graph.succ, S)
    emit = scores[:, graph.labels]
    beta = np.full((T, S), -np.inf)
    beta[T - 1, graph.final] = 0.0
    buf = np.empty(S + 1)
    buf[S] = -np.inf
    for t in range(T - 2, -1, -1):
        buf[:S] = beta[t + 1] + emit[t + 1]
        beta[t] = logsumexp(buf[succ], axis=1)
    return beta


def log_loss(graph: CtcGraph, logp: np.ndarray) -> tuple[float, np.ndarray]:
    """Marginal negative log-likelihood over all accepted frame paths, plus
    the per-frame class occupancy table.

    The occupancy is the loss gradient's moving part: with ``P = exp(logp)``
    the derivative w.r.t. the pre-softmax score at (t, c) is ``P[t, c] -
    occ[t, c]``.
    """
    logp = _check_posteriors(logp)
    T = logp.shape[0]
    _check_feasible(graph, T)
    alpha = _forward(graph, logp)
    beta = _backward(graph, logp)
    total = logsumexp(alpha[T - 1, graph.final])
    if not np.isfinite(total):
        raise NumericalError("all accepted paths carry zero probability")
    gamma = np.exp(alpha + beta - total)    # (T, S) state occupancy
    occ = np.zeros((T, logp.shape[1]))
    np.add.at(occ.T, graph.labels, gamma.T)
    return float(-total), occ


def _alignment_from_states(graph: CtcGraph, states: Sequence[int]) -> Alignment:
    frame_labels = tuple(int(graph.labels[s]) for s in states)
    collapsed = []
    spans = []
    prev = None
    for t, s in enumerate(states):
        if s != prev:
            if graph.labels[s] != graph.blank:
                collapsed.append(int(graph.labels[s]))
                spans.append([t, t])
        elif graph.labels[s] != graph.blank:
            spans[-1][1] = t
        prev = s
    return Alignment(frame_labels, tuple(int(s) for s in states),
                     tuple(collapsed), tuple((a, b) for a, b in spans))


def viterbi(graph: CtcGraph, logp: np.ndarray, prior: np.ndarray | None = None,
            prior_scale: float = 0.0) -> Alignment:
    """Best accepted frame path under prior-divided posteriors.

    Maximizes sum_t ( logp[t, y_t] - prior_scale * log q[y_t] ); the prior is
    floored at 1e-10 before the division so unseen classes stay finite.  Ties
    resolve to the smallest predecessor state id, making alignments
    bit-reproducible.
    """
    logp = _check_posteriors(logp)
    if not 0.0 <= prior_scale <= 1.0:
        raise ValueError("prior scale must lie in [0, 1]")
    T = logp.shape[0]
    _check_feasible(graph, T)
    scores = logp
    if prior_scale > 0.0:
        if prior is None:
            raise ValueError("prior_scale > 0 requires a prior")
        prior = np.asarray(prior, dtype=np.float64)
        if prior.shape != (logp.shape[1],):
            raise ValueError("prior shape does not match class count")
        scores = logp - prior_scale * np.log(np.maximum(prior, PRIOR_FLOOR))

    S = graph.n_states
    pred = _padded(graph.pred, S)
    emit = scores[:, graph.labels]
    delta = np.full((T, S), -np.inf)
    delta[0, graph.initial] = emit[0, graph.initial]
    back = np.zeros((T, S), dtype=np.int64)
    buf = np.empty(S + 1)
    buf[S] = -np.inf
    for t in range(1, T):
        buf[:S] = delta[t - 1]
        cand = buf[pred]                      # (S, maxdeg)
        choice = np.argmax(cand, axis=1)      # first max = smallest pred id
        delta[t] = cand[np.arange(S), choice] + emit[t]
        back[t] = pred[np.arange(S), choice]
    finals = graph.final
    end_scores = delta[T - 1, finals]
    if not np.isfinite(end_scores.max()):
        raise InfeasibleUtteranceError("no accepted path of this length")
    best = int(finals[int(np.argmax(end_scores))])
    states = [best]
    for t in range(T - 1, 0, -1):
        states.append(int(back[t, states[-1]]))
    states.reverse()
    return _alignment_from_states(graph, states)


def estimate_prior(posteriors: Iterable[np.ndarray], num_classes: int) -> np.ndarray:
    """Arithmetic mean of the posterior rows over every frame of the stream,
    renormalized to sum exactly to one."""
    total = np.zeros(num_classes)
    frames = 0
    for logp in posteriors:
        logp = _check_posteriors(logp)
        if logp.shape[1] != num_classes:
            raise ValueError("class count mismatch in posterior stream")
        total += np.exp(logp).sum(axis=0)
        frames += logp.shape[0]
    if frames == 0:
        raise ValueError("empty posterior stream")
    q = total / frames
    return q / q.sum()


def sample_path(graph: CtcGraph, logp: np.ndarray, temperature: float = 1.0,
                rng: np.random.Generator | int | None = None) -> Alignment:
    """Draw an accepted frame path with probability proportional to the path
    posterior raised to 1/temperature, by forward filtering and backward
    sampling.  Deterministic for a given seed."""
    logp = _check_posteriors(logp)
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    scores = logp / temperature
    T = scores.shape[0]
    _check_feasible(graph, T)
    alpha = _forward(graph, scores)
    S = graph.n_states
    finals = graph.final
    states = [int(finals[_draw(alpha[T - 1, finals], rng)])]
    for t in range(T - 1, 0, -1):
        preds = graph.pred[states[-1]]
        states.append(int(preds[_draw(alpha[t - 1, preds], rng)]))
    states.reverse()
    return _alignment_from_states(graph, states)


def _draw(logw: np.ndarray, rng: np.random.Generator) -> int:
    m = logw.max()
    if not np.isfinite(m):
        raise InfeasibleUtteranceError("no accepted path of this length")
    w = np.exp(logw - m)
    w = np.cumsum(w)
    return int(np.searchsorted(w, rng.random() * w[-1], side="right").clip(0, len(logw) - 1))


@dataclass(frozen=True)
class OracleResult:
    loss: float
    best_path: tuple[int, ...]
    path_probs: dict[tuple[int, ...], float]   # accepted frame path -> posterior


def enumerate_oracle(lattice: UttLattice | WordSegDAG, logp: np.ndarray,
                     max_frames: int = 8, max_units: int = 5) -> OracleResult:
    """Exhaustive reference: walk every frame string over the classes, keep
    those whose collapse is an allowed unit sequence, and tally in linear
    space with plain Python floats."""
    lattice = lattice_from_dag(lattice) if isinstance(lattice, WordSegDAG) else lattice
    logp = _check_posteriors(logp)
    T, classes = logp.shape
    blank = classes - 1
    if T > max_frames or classes - 1 > max_units:
        raise ValueError(f"instance too large for enumeration (T={T}, units={classes - 1})")
    allowed = set(enumerate_label_paths(lattice))
    rows = [[float(x) for x in row] for row in logp]
    total = 0.0
    best_lp = -math.inf
    best_path: tuple[int, ...] = ()
    path_probs: dict[tuple[int, ...], float] = {}
    for y in itertools.product(range(classes), repeat=T):
        if collapse(y, blank) not in allowed:
            continue
        lp = 0.0
        for t in range(T):
            lp += rows[t][y[t]]
        p = math.exp(lp)
        total += p
        path_probs[y] = p
        if lp > best_lp:
            best_lp = lp
            best_path = y
    if total == 0.0 or not path_probs:
        raise InfeasibleUtteranceError("no accepted frame string at this length")
    for y in path_probs:
        path_probs[y] /= total
    return OracleResult(-math.log(total), best_path, path_probs)
