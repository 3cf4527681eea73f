import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motionseed.attention import RegionKind, Signature
from motionseed.consensus import (CosineSimilarity, ace_seed, consensus_scores, cosine_similarity, rank_seeds,
                                  select_seed)
from motionseed.errors import DimensionMismatch, NonFiniteScore, TooFewSeeds, ZeroVector
from motionseed.attention import TokenGrid
from motionseed.sinkhorn import SinkhornSimilarity


def oracle_scores(vectors, sim):
    """Straightforward leave-one-out consensus, written independently."""
    out = []
    for i, v in enumerate(vectors):
        others = [w for j, w in enumerate(vectors) if j != i]
        out.append(sim(v, sum(others) / len(others)))
    return out


def outlier_family(n_inliers=9, outlier_at=4):
    inlier = np.zeros(16)
    inlier[:8] = 1 / 8
    outlier = np.zeros(16)
    outlier[12:] = 1 / 4
    vecs = [inlier.copy() for _ in range(n_inliers)]
    vecs.insert(outlier_at, outlier)
    return vecs


class TestCosine:
    def test_identical(self):
        v = np.array([0.3, 0.1, 0.6])
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0, 0], [0, 1, 0]) == 0.0

    def test_half(self):
        u = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
        v = np.array([1.0, 0.0, 1.0]) / math.sqrt(2)
        assert cosine_similarity(u, v) == pytest.approx(0.5, abs=1e-15)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0, 0], [1, 0])

    def test_dimension(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity([1, 0], [1, 0, 0])

    @given(st.lists(st.floats(0.01, 10), min_size=3, max_size=3), st.floats(0.1, 100))
    def test_scale_invariant(self, v, c):
        v = np.array(v)
        w = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(v * c, w) == pytest.approx(cosine_similarity(v, w), abs=1e-12)


class TestScores:
    def test_two_seeds_symmetric(self):
        a, b = np.array([0.7, 0.2, 0.1]), np.array([0.1, 0.3, 0.6])
        s = consensus_scores([a, b])
        assert abs(s[0] - s[1]) <= 1e-12
        assert s[0] == pytest.approx(cosine_similarity(a, b), abs=1e-12)

    def test_identical_signatures(self):
        v = np.array([0.2, 0.3, 0.5])
        assert consensus_scores([v] * 5) == [1.0] * 5

    def test_identical_signatures_sinkhorn(self):
        g = TokenGrid.from_frames(1, 2, 2)
        v = np.array([0.1, 0.2, 0.3, 0.4])
        s = consensus_scores([v] * 4, SinkhornSimilarity(g, 0.01))
        assert len(set(s)) == 1
        assert -0.02 < s[0] <= 0

    def test_matches_oracle(self, rng):
        vecs = [rng.dirichlet(np.ones(12)) for _ in range(7)]
        np.testing.assert_allclose(consensus_scores(vecs), oracle_scores(vecs, cosine_similarity), atol=1e-12)

    def test_outlier_lowest(self):
        vecs = outlier_family()
        scores = consensus_scores(vecs)
        # for an inlier the others average to 1/9 on its 8 cells and 1/36 on the outlier's 4
        expected_in = (1 / 9) / (math.sqrt(1 / 8) * math.sqrt(8 / 81 + 4 / 36**2))
        assert scores[4] == 0.0
        for i, s in enumerate(scores):
            if i != 4:
                assert s == pytest.approx(expected_in, abs=1e-12)
        r = ace_seed(vecs)
        assert r.ranking[-1] == 4 and r.selected != 4

    def test_outlier_lowest_sinkhorn(self):
        vecs = outlier_family()
        r = ace_seed(vecs, SinkhornSimilarity(TokenGrid.from_frames(1, 4, 4)))
        assert r.ranking[-1] == 4
        assert r.selected == ace_seed(vecs).selected == 0

    def test_too_few(self):
        with pytest.raises(TooFewSeeds):
            consensus_scores([np.ones(3) / 3])

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            consensus_scores([np.ones(3) / 3, np.ones(4) / 4])

    def test_threaded_matches_serial(self, rng):
        vecs = [rng.dirichlet(np.ones(20)) for _ in range(10)]
        assert consensus_scores(vecs, threads=4) == consensus_scores(vecs, threads=1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.permutations(range(6)))
    def test_permutation_equivariant(self, seed, perm):
        r = np.random.default_rng(seed)
        sigs = [Signature(i, r.dirichlet(np.ones(9)), 10, (22, 26), RegionKind.INVERSE_FOREGROUND) for i in range(6)]
        base = consensus_scores(sigs)
        shuffled = [sigs[p] for p in perm]
        got = consensus_scores(shuffled)
        assert got == [base[p] for p in perm]
        assert ace_seed(shuffled).selected == ace_seed(sigs).selected

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
    def test_common_rescaling_keeps_selection(self, seed, c):
        r = np.random.default_rng(seed)
        vecs = [r.dirichlet(np.ones(9)) for _ in range(5)]
        assert ace_seed([v * c for v in vecs]).selected == ace_seed(vecs).selected

    @pytest.mark.parametrize("delta", [0.2, 0.4, 0.6])
    def test_outlier_never_selected(self, delta):
        r = np.random.default_rng(int(delta * 10))
        n = 16
        for _ in range(50):
            base = r.dirichlet(np.ones(n))
            inliers = []
            for _ in range(6):
                # each inlier within delta/8 TV of base, so pairwise within delta/4
                noise = r.dirichlet(np.ones(n))
                inliers.append((1 - delta / 8) * base + delta / 8 * noise)
            outlier = r.dirichlet(np.ones(n) * 0.2)
            while 0.5 * np.abs(outlier - base).sum() <= delta:
                outlier = r.dirichlet(np.ones(n) * 0.2)
            vecs = inliers[:3] + [outlier] + inliers[3:]
            tv = 0.5 * np.abs(outlier - base).sum()
            assert tv > delta
            assert ace_seed(vecs).selected != 3


class TestSelection:
    def test_argmax(self):
        assert select_seed({0: 0.9, 1: 0.7}) == 0

    def test_tie_to_smaller_id(self):
        assert select_seed({5: 0.8, 2: 0.8}) == 2

    def test_rank_descending(self):
        assert rank_seeds({0: 0.1, 1: 0.9, 2: 0.5}) == [1, 2, 0]

    def test_rank_all_equal(self):
        assert rank_seeds({3: 0.5, 1: 0.5, 2: 0.5}) == [1, 2, 3]

    def test_non_finite(self):
        with pytest.raises(NonFiniteScore):
            select_seed({0: float("nan"), 1: 0.2})

    def test_result_fields(self, rng):
        sigs = [Signature(i + 10, rng.dirichlet(np.ones(5)), 10, (22, 26), RegionKind.FOREGROUND) for i in range(4)]
        r = ace_seed(sigs)
        assert sorted(r.ranking) == [10, 11, 12, 13]
        assert r.selected == r.ranking[0]
        assert list(r.scores) == [10, 11, 12, 13]
        assert r.metric_name == CosineSimilarity.name
