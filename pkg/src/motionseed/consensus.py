"""Attention-consensus seed selection.

Each seed's signature is compared with the mean of every other seed's
signature; the seed that agrees best with the rest of the group wins.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _backend
from .errors import DimensionMismatch, NonFiniteScore, TooFewSeeds, ZeroVector


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector shapes {u.shape} and {v.shape} differ")
    uu = float(np.dot(u, u))
    vv = float(np.dot(v, v))
    if uu == 0.0 or vv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    # sqrt(uu * uu) == uu exactly, so identical inputs give exactly 1.0
    c = float(np.dot(u, v)) / math.sqrt(uu * vv)
    return min(1.0, max(-1.0, c))


class CosineSimilarity:
    name = "cosine"
    needs_distributions = False

    def __call__(self, u, v):
        return cosine_similarity(u, v)


@dataclass(frozen=True)
class ConsensusResult:
    scores: dict  # seed_id -> a_i, keys in ascending seed order
    ranking: list
    selected: int
    metric_name: str


def _leave_one_out_means(vectors):
    # One ordered total, then subtract: bitwise-identical signatures get
    # bitwise-identical means (and scores), whatever their position. The
    # difference is never negative because rounding is monotone and every
    # partial sum of non-negative terms dominates each term.
    total = np.zeros_like(vectors[0])
    for v in vectors:
        total += v
    n = len(vectors)
    return [(total - v) / (n - 1) for v in vectors]


def consensus_scores(signatures: Sequence, similarity=None, threads=None) -> list[float]:
    """Score a_i = sim(h_i, mean of h_j for j != i), returned in input order.

    ``signatures`` holds Signature objects or bare vectors. Internally the set
    is processed in ascending seed order so the scores do not depend on how the
    input is ordered.
    """
    similarity = similarity or CosineSimilarity()
    n = len(signatures)
    if n < 2:
        raise TooFewSeeds(f"consensus needs at least 2 signatures, got {n}")
    vecs = [np.asarray(getattr(s, "vector", s), dtype=np.float64) for s in signatures]
    ids = [getattr(s, "seed_id", i) for i, s in enumerate(signatures)]
    if len(set(ids)) != n:
        raise ValueError("duplicate seed ids")
    if any(v.ndim != 1 or v.shape != vecs[0].shape for v in vecs):
        raise DimensionMismatch("signature vectors must be 1-D and of equal length")

    order = sorted(range(n), key=lambda i: ids[i])
    ordered = [vecs[i] for i in order]
    means = _leave_one_out_means(ordered)
    if getattr(similarity, "needs_distributions", False):
        means = [m / m.sum() for m in means]

    def score(k):
        return float(similarity(ordered[k], means[k]))

    workers = threads or _backend.thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sorted_scores = list(pool.map(score, range(n)))
    else:
        sorted_scores = [score(k) for k in range(n)]

    out = [0.0] * n
    for k, i in enumerate(order):
        out[i] = sorted_scores[k]
    return out


def _as_items(scores):
    if isinstance(scores, Mapping):
        items = list(scores.items())
    else:
        items = list(enumerate(scores))
    if not items:
        raise ValueError("no scores given")
    for sid, s in items:
        if not math.isfinite(s):
            raise NonFiniteScore(f"seed {sid} has non-finite score {s!r}")
    return items


def rank_seeds(scores) -> list:
    """Seed ids by descending score; ties go to the smaller seed id."""
    return [sid for sid, _ in sorted(_as_items(scores), key=lambda kv: (-kv[1], kv[0]))]


def select_seed(scores):
    return rank_seeds(scores)[0]


def ace_seed(signatures: Sequence, similarity=None, threads=None) -> ConsensusResult:
    """Full selection: scores, ranking and the chosen seed."""
    similarity = similarity or CosineSimilarity()
    values = consensus_scores(signatures, similarity, threads=threads)
    ids = [getattr(s, "seed_id", i) for i, s in enumerate(signatures)]
    scores = dict(sorted(zip(ids, values)))
    ranking = rank_seeds(scores)
    return ConsensusResult(scores, ranking, ranking[0], similarity.name)
