import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privhc.plainhc import (
    ClusterMetadata,
    LinkageKind,
    SelectionStrategy,
    accuracy,
    hc_run,
    hc_run_grouped,
    ideal_fhc,
    linkage,
    pairwise_sq_dists,
    sq_dist,
)
from privhc.rng import apply_perm

from oracles import brute_accuracy, brute_hc, brute_linkage, brute_sq_dist


def rand_points(rng, n, d, hi=2**16 - 1):
    return [tuple(rng.randrange(hi + 1) for _ in range(d)) for _ in range(n)]


class TestSqDist:
    def test_small(self):
        assert sq_dist((1, 2), (4, 6)) == 25

    def test_identity(self):
        x = (7, 0, 123456)
        assert sq_dist(x, x) == 0

    def test_domain_extremes(self):
        l = 32
        assert sq_dist((0,), (2**l - 1,)) == (2**l - 1) ** 2

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sq_dist((1, 2), (1, 2, 3))

    @given(
        st.lists(st.integers(0, 2**16 - 1), min_size=1, max_size=6),
        st.data(),
    )
    def test_matches_oracle(self, a, data):
        b = data.draw(
            st.lists(st.integers(0, 2**16 - 1), min_size=len(a), max_size=len(a))
        )
        assert sq_dist(a, b) == brute_sq_dist(a, b)
        assert sq_dist(a, b) == sq_dist(b, a)


class TestLinkage:
    def test_single_1d(self):
        assert linkage([(1,)], [(4,), (6,)], LinkageKind.SINGLE) == 9

    def test_complete_1d(self):
        assert linkage([(1,)], [(4,), (6,)], LinkageKind.COMPLETE) == 25

    def test_singletons_agree(self):
        a, b = (3, 1), (0, 5)
        for kind in LinkageKind:
            assert linkage([a], [b], kind) == sq_dist(a, b)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            linkage([], [(1,)], LinkageKind.SINGLE)

    def test_matches_oracle(self):
        rng = random.Random(7)
        for _ in range(20):
            xs = rand_points(rng, rng.randrange(1, 5), 3)
            ys = rand_points(rng, rng.randrange(1, 5), 3)
            assert linkage(xs, ys, LinkageKind.SINGLE) == brute_linkage(xs, ys, True)
            assert linkage(xs, ys, LinkageKind.COMPLETE) == brute_linkage(xs, ys, False)


class TestHcRun:
    def test_three_point_merge(self):
        res = hc_run([(1,), (2,), (10,)], LinkageKind.SINGLE, 2)
        dend = res.dendrogram
        assert len(dend.merges) == 1
        step = dend.merges[0]
        assert (step.left, step.right, step.new) == (0, 1, 0)
        assert set(dend.target_clusters) == {frozenset({0, 1}), frozenset({2})}

    def test_target_equals_n(self):
        pts = [(5,), (9,), (1,)]
        res = hc_run(pts, LinkageKind.COMPLETE, 3)
        assert res.dendrogram.merges == ()
        assert len(res.dendrogram.target_clusters) == 3

    def test_target_out_of_range(self):
        with pytest.raises(ValueError):
            hc_run([(1,), (2,)], LinkageKind.SINGLE, 0)
        with pytest.raises(ValueError):
            hc_run([(1,), (2,)], LinkageKind.SINGLE, 3)

    @pytest.mark.parametrize("kind", list(LinkageKind))
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_matches_bruteforce_50pts(self, kind, seed):
        rng = random.Random(seed)
        pts = rand_points(rng, 50, 2, hi=999)
        res = hc_run(pts, kind, 5)
        merges, clusters = brute_hc(pts, kind is LinkageKind.SINGLE, 5)
        assert [(s.round, s.left, s.right) for s in res.dendrogram.merges] == merges
        assert set(res.dendrogram.target_clusters) == {
            frozenset(c) for c in clusters.values()
        }

    @pytest.mark.parametrize("kind", list(LinkageKind))
    def test_every_merge_is_min_pair(self, kind):
        # no monotonicity assumed; instead re-scan all live pairs each round
        rng = random.Random(11)
        pts = rand_points(rng, 40, 3, hi=200)
        res = hc_run(pts, kind, 4)
        clusters = {i: {i} for i in range(len(pts))}
        for step in res.dendrogram.merges:
            chosen = linkage(
                [pts[a] for a in clusters[step.left]],
                [pts[b] for b in clusters[step.right]],
                kind,
            )
            slots = sorted(clusters)
            for x in slots:
                for y in slots:
                    if x >= y:
                        continue
                    d = linkage(
                        [pts[a] for a in clusters[x]],
                        [pts[b] for b in clusters[y]],
                        kind,
                    )
                    assert d >= chosen or (x, y) > (step.left, step.right)
            clusters[step.left] |= clusters.pop(step.right)

    def test_metadata_sums(self):
        rng = random.Random(3)
        pts = rand_points(rng, 30, 4, hi=50)
        res = hc_run(pts, LinkageKind.SINGLE, 3)
        assert sum(m.size for m in res.target_metadata) == 30
        for members, meta in zip(res.dendrogram.target_clusters, res.target_metadata):
            assert meta.size == len(members)
            expect = tuple(
                sum(pts[m][c] for m in members) for c in range(4)
            )
            assert meta.rep_sum == expect

    def test_rep_sum_additive_over_merges(self):
        rng = random.Random(5)
        pts = rand_points(rng, 20, 2, hi=99)
        res = hc_run(pts, LinkageKind.COMPLETE, 1)
        sums = {i: np.array(p, dtype=object) for i, p in enumerate(pts)}
        for step, meta in zip(res.dendrogram.merges, res.merge_metadata):
            sums[step.left] = sums[step.left] + sums.pop(step.right)
            assert tuple(sums[step.left]) == meta.rep_sum

    def test_grouped_degenerates_to_plain(self):
        rng = random.Random(9)
        pts = rand_points(rng, 25, 2, hi=300)
        plain = hc_run(pts, LinkageKind.SINGLE, 4)
        grouped = hc_run_grouped(pts, [[i] for i in range(25)], LinkageKind.SINGLE, 4)
        assert grouped.dendrogram == plain.dendrogram

    def test_grouped_matches_linkage_defn(self):
        pts = [(0,), (1,), (10,), (11,), (50,)]
        groups = [[0, 1], [2, 3], [4]]
        res = hc_run_grouped(pts, groups, LinkageKind.SINGLE, 2)
        # linkage({0,1},{10,11}) = 81 < linkage({10,11},{50}) = 1521
        first = res.dendrogram.merges[0]
        assert (first.left, first.right) == (0, 1)
        assert frozenset({0, 1, 2, 3}) in res.dendrogram.target_clusters


class TestIdealFhc:
    def test_target_selection_count(self):
        rng = random.Random(21)
        p = rand_points(rng, 6, 2, hi=99)
        q = rand_points(rng, 5, 2, hi=99)
        _, redacted, _ = ideal_fhc(
            p, q, LinkageKind.SINGLE, 3, SelectionStrategy.target(), perm_seed=5
        )
        assert len(redacted) == 3
        assert all(desc[0] == "target" for desc, _ in redacted)

    def test_smerging_excludes_singleton_parents(self):
        # the very first merge joins two singletons: children sizes 1, 1
        rng = random.Random(2)
        p = rand_points(rng, 4, 1, hi=9)
        q = rand_points(rng, 4, 1, hi=9)
        dend, redacted, _ = ideal_fhc(
            p, q, LinkageKind.SINGLE, 1, SelectionStrategy.smerging(1), perm_seed=1
        )
        rounds = {desc[1] for desc, _ in redacted}
        assert 0 not in rounds

    def test_deterministic_per_seed(self):
        rng = random.Random(4)
        p = rand_points(rng, 7, 3, hi=999)
        q = rand_points(rng, 6, 3, hi=999)
        a = ideal_fhc(p, q, LinkageKind.COMPLETE, 4, SelectionStrategy.target(), 99)
        b = ideal_fhc(p, q, LinkageKind.COMPLETE, 4, SelectionStrategy.target(), 99)
        assert a == b
        c = ideal_fhc(p, q, LinkageKind.COMPLETE, 4, SelectionStrategy.target(), 100)
        assert c != a

    def test_permutation_invariance_of_content(self):
        # tie-free data in generic position: clusters mapped back through the
        # permutation must match the unpermuted run
        rng = random.Random(31)
        while True:
            p = rand_points(rng, 8, 2, hi=10**6)
            q = rand_points(rng, 7, 2, hi=10**6)
            d = pairwise_sq_dists(p + q)
            vals = d[np.triu_indices(15, k=1)]
            if len(set(vals.tolist())) == len(vals):
                break
        dend, redacted, perm = ideal_fhc(
            p, q, LinkageKind.SINGLE, 4, SelectionStrategy.target(), perm_seed=8
        )
        base = hc_run(p + q, LinkageKind.SINGLE, 4)
        mapped = {
            frozenset(perm[i] for i in members) for members in dend.target_clusters
        }
        assert mapped == set(base.dendrogram.target_clusters)

    def test_sizes_sum_to_n(self):
        rng = random.Random(6)
        p = rand_points(rng, 9, 2, hi=99)
        q = rand_points(rng, 8, 2, hi=99)
        _, redacted, _ = ideal_fhc(
            p, q, LinkageKind.SINGLE, 5, SelectionStrategy.target(), 3
        )
        assert sum(meta.size for _, meta in redacted) == 17


class TestAccuracy:
    def test_pure_clusters(self):
        clusters = [{0, 1}, {2, 3, 4}]
        labels = [0, 0, 1, 1, 1]
        assert accuracy(clusters, labels) == 1.0

    def test_majority_rule(self):
        assert accuracy([{0, 1, 2}], ["a", "a", "b"]) == pytest.approx(2 / 3)

    def test_tie_breaks_to_smallest_label(self):
        # labels 0 and 1 tie; 0 wins, so exactly half the points are correct
        assert accuracy([{0, 1, 2, 3}], [1, 1, 0, 0]) == 0.5

    def test_empty_clustering_rejected(self):
        with pytest.raises(ValueError):
            accuracy([], [])

    def test_matches_bruteforce_recount(self):
        rng = random.Random(77)
        n = 200
        labels = [rng.randrange(5) for _ in range(n)]
        order = list(range(n))
        rng.shuffle(order)
        cut1, cut2 = n // 3, 2 * n // 3
        clusters = [set(order[:cut1]), set(order[cut1:cut2]), set(order[cut2:])]
        assert accuracy(clusters, labels) == pytest.approx(
            brute_accuracy(clusters, labels)
        )

    def test_exclude_mask(self):
        clusters = [{0, 1, 2}]
        labels = [0, 0, 1]
        mask = [False, False, True]
        assert accuracy(clusters, labels, exclude=mask) == 1.0
