"""Rank alignment between human pairwise preferences and metric rankings."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyMetricSet, InvalidJudgment, UniverseMismatch, UnknownItem


def item_key(item):
    """Ascending order for item ids: numbers numerically, then text."""
    s = str(item)
    if re.fullmatch(r"-?\d+", s):
        return (0, int(s), s)
    return (1, 0, s)


@dataclass(frozen=True)
class PairwiseJudgment:
    item_a: str
    item_b: str
    winner: str
    annotator: str | None = None

    def __post_init__(self):
        if self.item_a == self.item_b:
            raise InvalidJudgment(f"judgment compares {self.item_a!r} with itself")
        if self.winner not in (self.item_a, self.item_b):
            raise InvalidJudgment(f"winner {self.winner!r} is not one of ({self.item_a!r}, {self.item_b!r})")


@dataclass(frozen=True)
class RankingList:
    items: tuple  # best first
    scores: dict = field(default_factory=dict)
    tie_groups: tuple = ()

    def top(self, k):
        return set(self.items[:k])

    def bottom(self, k):
        return set(self.items[len(self.items) - k:])


def ranking_from_scores(scores: Mapping, higher_is_better=True) -> RankingList:
    """Order items by score; equal scores fall back to ascending item id."""
    sign = -1.0 if higher_is_better else 1.0
    items = sorted(scores, key=lambda it: (sign * float(scores[it]), item_key(it)))
    groups, current = [], []
    for it in items:
        if current and scores[it] != scores[current[0]]:
            groups.append(tuple(current))
            current = []
        current.append(it)
    if current:
        groups.append(tuple(current))
    return RankingList(tuple(items), dict(scores), tuple(g for g in groups if len(g) > 1))


def wins_ranking(judgments: Iterable[PairwiseJudgment], items: Sequence) -> RankingList:
    """Rank items by how often each was preferred."""
    universe = list(items)
    counts = {it: 0 for it in universe}
    for j in judgments:
        for it in (j.item_a, j.item_b):
            if it not in counts:
                raise UnknownItem(f"judgment mentions unknown item {it!r}")
        counts[j.winner] += 1
    return ranking_from_scores(counts, higher_is_better=True)


def pair_count(n: int) -> int:
    if n < 2:
        raise ValueError("need at least 2 items")
    return n * (n - 1) // 2


def _check(reference: RankingList, candidate: RankingList, k):
    if set(reference.items) != set(candidate.items) or len(reference.items) != len(candidate.items):
        raise UniverseMismatch("rankings cover different items")
    if not 1 <= k <= len(reference.items):
        raise ValueError(f"k={k} outside [1, {len(reference.items)}]")


def recall_at_top_k(reference: RankingList, candidate: RankingList, k: int) -> float:
    _check(reference, candidate, k)
    return 100.0 * len(reference.top(k) & candidate.top(k)) / k


def recall_at_bottom_k(reference: RankingList, candidate: RankingList, k: int) -> float:
    _check(reference, candidate, k)
    return 100.0 * len(reference.bottom(k) & candidate.bottom(k)) / k


def averaged_recall(reference: RankingList, candidates: Sequence[RankingList], k: int, end="top") -> float:
    """Mean recall over a set of metric rankings."""
    if not candidates:
        raise EmptyMetricSet("no metric rankings to average")
    fn = {"top": recall_at_top_k, "bottom": recall_at_bottom_k}[end]
    values = [fn(reference, c, k) for c in candidates]
    return sum(values) / len(values)


@dataclass(frozen=True)
class RecallReport:
    k: int
    r_at_top_k: float
    r_at_bottom_k: float
    per_metric: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "k": self.k,
            "r_at_top_k": self.r_at_top_k,
            "r_at_bottom_k": self.r_at_bottom_k,
            "per_metric": self.per_metric,
        }


def random_recall_baseline(n=10, k=5, trials=10_000, seed=0):
    """Monte-Carlo mean R@top-k / R@bottom-k of uniformly random rankings."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    items = [str(i) for i in range(n)]
    reference = RankingList(tuple(items))
    top = bottom = 0.0
    for _ in range(trials):
        cand = RankingList(tuple(items[i] for i in rng.permutation(n)))
        top += recall_at_top_k(reference, cand, k)
        bottom += recall_at_bottom_k(reference, cand, k)
    return top / trials, bottom / trials


def read_judgments(path) -> list[PairwiseJudgment]:
    """CSV rows ``item_a,item_b,winner[,annotator]``; a header row is optional."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            row = [c.strip() for c in row]
            if not row or not any(row):
                continue
            if lineno == 1 and row[:3] == ["item_a", "item_b", "winner"]:
                continue
            if len(row) not in (3, 4):
                raise InvalidJudgment(f"{path}:{lineno}: expected 3 or 4 columns, got {len(row)}")
            out.append(PairwiseJudgment(row[0], row[1], row[2], row[3] if len(row) == 4 and row[3] else None))
    return out
