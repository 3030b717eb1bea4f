"""Tree sampling, enumeration, conditioning, spines and balls."""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from bgwtilt import (
    FamilyError,
    GammaConstraint,
    MultitypeTree,
    OrderedFamily,
    Overflow,
    SampleSpec,
    TreeSamplingError,
    ball,
    blob_expectation_check,
    empirical_tv,
    enumerate_trees,
    integer_preimage,
    kesten_sample,
    mean_matrix,
    perron_vectors,
    project,
    sample_conditioned,
    sample_tree,
    size_biased_law,
)
from bgwtilt.trees import (
    conditioned_sampler,
    kesten_ball_law,
    kesten_forest,
    sample_forest,
    tree_records,
    tv_empirical_vs_law,
    unconditioned_ball_law,
)


class TestSampleTree:
    def test_single_root(self):
        zeta = OrderedFamily.from_dicts(1, [{(): Fraction(1)}])
        tree = sample_tree(zeta, 0, SampleSpec(seed=1))
        assert tree.size == 1

    def test_deterministic_in_seed(self, two_type):
        zeta, _ = two_type
        spec = SampleSpec(seed=99, cap=10000)
        assert sample_tree(zeta, 0, spec) == sample_tree(zeta, 0, spec)

    def test_singleton_probability(self, mono_critical):
        n = 100_000
        trees = sample_forest(mono_critical, 0, n, SampleSpec(seed=5, cap=4))
        singles = sum(1 for t in trees if not isinstance(t, Overflow) and t.size == 1)
        se = math.sqrt(0.5 * 0.5 / n)
        assert abs(singles / n - 0.5) <= 3 * se

    def test_overflow_value(self, mono_supercritical):
        # A supercritical tree survives forever with positive probability,
        # so some seed hits the cap.
        hits = [
            t
            for t in sample_forest(mono_supercritical, 0, 50, SampleSpec(seed=2, cap=64))
            if isinstance(t, Overflow)
        ]
        assert hits and hits[0].cap == 64


class TestEnumerate:
    def test_monotype_small(self, mono_critical):
        trees = enumerate_trees(mono_critical, 0, 3)
        probs = {t.size: p for t, p in trees}
        assert probs == {1: Fraction(1, 2), 3: Fraction(1, 8)}

    def test_deterministic_single(self):
        zeta = OrderedFamily.from_dicts(1, [{(): Fraction(1)}])
        trees = enumerate_trees(zeta, 0, 5)
        assert len(trees) == 1 and trees[0][1] == Fraction(1)

    def test_two_type_root2_single(self, two_type):
        zeta, _ = two_type
        singles = [(t, p) for t, p in enumerate_trees(zeta, 1, 1)]
        assert len(singles) == 1
        assert singles[0][1] == Fraction(1, 3)

    def test_mass_bounded(self, two_type):
        zeta, _ = two_type
        total = sum(p for _, p in enumerate_trees(zeta, 0, 8))
        assert 0 < float(total) <= 1

    def test_budget_guard(self, mono_critical):
        with pytest.raises(FamilyError):
            enumerate_trees(mono_critical, 0, 15)

    def test_completeness_against_sampling(self, mono_critical):
        n_cap = 9
        exact = float(sum(p for _, p in enumerate_trees(mono_critical, 0, n_cap)))
        n = 100_000
        trees = sample_forest(mono_critical, 0, n, SampleSpec(seed=8, cap=n_cap + 1))
        small = sum(
            1 for t in trees if not isinstance(t, Overflow) and t.size <= n_cap
        )
        se = math.sqrt(exact * (1 - exact) / n)
        assert abs(small / n - exact) <= 3 * se


class TestConditioned:
    def test_trivial_target(self, mono_critical):
        gamma = GammaConstraint(np.array([[1]]), target=np.array([1]))
        tree = sample_conditioned(mono_critical, gamma, 0, SampleSpec(seed=3, cap=10))
        assert tree.size == 1

    def test_law_matches_enumeration(self, two_type):
        zeta, _ = two_type
        gamma = GammaConstraint(np.array([[1, 1]]), target=np.array([6]))
        slice6 = [
            (t, p) for t, p in enumerate_trees(zeta, 0, 6) if t.size == 6
        ]
        total = sum(p for _, p in slice6)
        exact = {t.encode(): float(p / total) for t, p in slice6}
        n = 30_000
        it = conditioned_sampler(zeta, gamma, 0, SampleSpec(seed=12, cap=7, attempts=10 ** 8))
        counts = Counter(next(it).encode() for _ in range(n))
        assert set(counts) <= set(exact)
        for sig, pe in exact.items():
            se = math.sqrt(pe * (1 - pe) / n)
            assert abs(counts[sig] / n - pe) <= 3 * se + 1e-9

    def test_law_matches_enumeration_monotype_deep(self, mono_critical):
        # 1e5 accepted draws against the exact slice of size-5 trees.
        gamma = GammaConstraint(np.array([[1]]), target=np.array([5]))
        slice5 = [(t, p) for t, p in enumerate_trees(mono_critical, 0, 5) if t.size == 5]
        total = sum(p for _, p in slice5)
        exact = {t.encode(): float(p / total) for t, p in slice5}
        n = 100_000
        it = conditioned_sampler(
            mono_critical, gamma, 0, SampleSpec(seed=77, cap=6, attempts=10 ** 8)
        )
        counts = Counter(next(it).encode() for _ in range(n))
        assert set(counts) <= set(exact)
        for sig, pe in exact.items():
            se = math.sqrt(pe * (1 - pe) / n)
            assert abs(counts[sig] / n - pe) <= 3 * se + 1e-9

    def test_negative_gamma_entries(self, two_type):
        # Difference conditioning exercises the non-monotone path.
        zeta, _ = two_type
        gamma = GammaConstraint(np.array([[1, -1]]), target=np.array([-1]))
        tree = sample_conditioned(zeta, gamma, 0, SampleSpec(seed=4, cap=12, attempts=10 ** 6))
        n = tree.type_counts()
        assert n[0] - n[1] == -1

    def test_companion_conditioned_law_empirically(self, two_type):
        # Sampling the original supercritical family conditioned on size 5
        # must match the exact conditional law of its extinction companion.
        from bgwtilt import subcritical_companion, tilt_ordered

        zeta, mu = two_type
        zq = tilt_ordered(zeta, subcritical_companion(mu))
        slice5 = [(t, p) for t, p in enumerate_trees(zq, 0, 5) if t.size == 5]
        total = sum(p for _, p in slice5)
        exact = {t.encode(): float(p / total) for t, p in slice5}
        gamma = GammaConstraint(np.array([[1, 1]]), target=np.array([5]))
        n = 20_000
        it = conditioned_sampler(zeta, gamma, 0, SampleSpec(seed=14, cap=6, attempts=10 ** 8))
        counts = Counter(next(it).encode() for _ in range(n))
        assert set(counts) <= set(exact)
        for sig, pe in exact.items():
            se = math.sqrt(pe * (1 - pe) / n)
            assert abs(counts[sig] / n - pe) <= 3 * se + 1e-9

    def test_attempts_exhausted(self, mono_critical):
        gamma = GammaConstraint(np.array([[1]]), target=np.array([2]))  # even sizes impossible
        with pytest.raises(TreeSamplingError):
            sample_conditioned(mono_critical, gamma, 0, SampleSpec(seed=1, cap=10, attempts=500))

    def test_equivalent_tiltings_share_conditional_laws(self, two_type):
        from bgwtilt import subcritical_companion, tilt_ordered

        zeta, mu = two_type
        q = subcritical_companion(mu)
        budget = 10
        base = enumerate_trees(zeta, 0, budget)
        tilted = enumerate_trees(tilt_ordered(zeta, q), 0, budget)
        by_size_a: dict[int, dict[str, float]] = {}
        by_size_b: dict[int, dict[str, float]] = {}
        for (t, p), (t2, p2) in zip(base, tilted):
            assert t.encode() == t2.encode()  # same enumeration order
            by_size_a.setdefault(t.size, {})[t.encode()] = float(p)
            by_size_b.setdefault(t2.size, {})[t2.encode()] = float(p2)
        for size, law_a in by_size_a.items():
            za, zb = sum(law_a.values()), sum(by_size_b[size].values())
            tv = 0.5 * sum(
                abs(law_a[sig] / za - by_size_b[size][sig] / zb) for sig in law_a
            )
            assert tv <= 1e-9


class TestIntegerPreimage:
    def test_identity(self):
        gamma = GammaConstraint(np.eye(3, dtype=int))
        assert integer_preimage(gamma, [4, 0, 7], bound=10) == (4, 0, 7)

    def test_lex_smallest(self):
        gamma = GammaConstraint(np.array([[1, 1]]))
        assert integer_preimage(gamma, [5], bound=10) == (0, 5)

    def test_negative_coefficients(self):
        gamma = GammaConstraint(np.array([[2, -1]]))
        assert integer_preimage(gamma, [1], bound=10) == (1, 1)

    def test_unreachable(self):
        gamma = GammaConstraint(np.array([[2]]))
        assert integer_preimage(gamma, [3], bound=10) is None


class TestSizeBiased:
    def test_monotype_binary(self, mono_critical):
        hat = size_biased_law(mono_critical)
        assert dict(hat.atoms[0]) == {(0, 0): pytest.approx(1.0, abs=1e-15)}

    def test_swap_family(self, swap_critical):
        hat = size_biased_law(swap_critical)
        # b is constant, so the reweighting is by word length.
        assert dict(hat.atoms[0])[(1,)] == pytest.approx(1.0, abs=1e-12)
        assert dict(hat.atoms[1])[(0, 0)] == pytest.approx(1.0, abs=1e-12)

    def test_normalization_many_families(
        self, mono_critical, swap_critical, symmetric_two_critical,
        mono_skew_critical, ring_three,
    ):
        for zeta in (mono_critical, swap_critical, symmetric_two_critical,
                     mono_skew_critical, ring_three):
            hat = size_biased_law(zeta)
            for law in hat.atoms:
                total = math.fsum(float(m) for _, m in law)
                assert abs(total - 1.0) <= 1e-12
                assert () not in dict(law)

    def test_needs_critical(self, two_type):
        with pytest.raises(FamilyError):
            size_biased_law(two_type[0])


class TestKesten:
    def test_depth_zero(self, mono_critical):
        prefix = kesten_sample(mono_critical, 0, 0, SampleSpec(seed=1))
        assert prefix.tree.size == 1
        assert prefix.spine == (0,)

    def test_monotype_binary_spine(self, mono_critical):
        prefix = kesten_sample(mono_critical, 0, 5, SampleSpec(seed=7))
        depths = prefix.tree.depths()
        for idx in prefix.spine[:-1]:
            assert prefix.tree.child_count[idx] == 2
        assert [depths[i] for i in prefix.spine] == list(range(6))

    def test_monotype_spine_child_uniform(self, mono_critical):
        # b is constant, so the spine child is uniform among the two children.
        n, depth = 3000, 4
        first = 0
        total = 0
        for prefix in kesten_forest(mono_critical, 0, depth, n, SampleSpec(seed=33)):
            kids = prefix.tree.children()
            for above, below in zip(prefix.spine, prefix.spine[1:]):
                total += 1
                if kids[above][0] == below:
                    first += 1
        se = math.sqrt(0.25 / total)
        assert abs(first / total - 0.5) <= 3 * se

    def test_spine_type_frequencies(self, symmetric_two_critical):
        # Spine types form a Markov chain; empirically match its stationary law.
        zeta = symmetric_two_critical
        b = perron_vectors(mean_matrix(project(zeta))).b
        hat = size_biased_law(zeta, b)
        # Transition matrix of the spine-type chain.
        K = zeta.K
        P = np.zeros((K, K))
        for i in range(K):
            for word, mass in hat.atoms[i]:
                weights = np.array([b[t] for t in word])
                for pos, t in enumerate(word):
                    P[i, t] += float(mass) * weights[pos] / weights.sum()
        evals, evecs = np.linalg.eig(P.T)
        pi = np.real(evecs[:, np.argmin(np.abs(evals - 1))])
        pi = np.abs(pi) / np.abs(pi).sum()
        n, depth = 4000, 6
        counts = np.zeros(K)
        for prefix in kesten_forest(zeta, 0, depth, n, SampleSpec(seed=21)):
            for idx in prefix.spine[1:]:
                counts[prefix.tree.types[idx]] += 1
        freq = counts / counts.sum()
        se = 1.0 / math.sqrt(counts.sum())
        assert np.max(np.abs(freq - pi)) <= 3 * se

    def test_needs_critical(self, two_type):
        with pytest.raises(FamilyError):
            kesten_sample(two_type[0], 0, 2, SampleSpec(seed=1))


class TestBalls:
    def test_radius_zero(self, two_type):
        zeta, _ = two_type
        tree = sample_tree(zeta, 1, SampleSpec(seed=11, cap=1000))
        assert ball(tree, 0) == "2()"

    def test_single_root_any_radius(self):
        zeta = OrderedFamily.from_dicts(1, [{(): Fraction(1)}])
        tree = sample_tree(zeta, 0, SampleSpec(seed=1))
        assert ball(tree, 5) == "1()"

    def test_equal_prefix_equal_signature(self):
        t1 = MultitypeTree(K=1, types=(0, 0, 0), parent=(-1, 0, 0), child_count=(2, 0, 0))
        t2 = MultitypeTree(
            K=1, types=(0, 0, 0, 0, 0), parent=(-1, 0, 1, 1, 0),
            child_count=(2, 2, 0, 0, 0),
        )
        assert ball(t1, 1) == ball(t2, 1)
        assert ball(t1, 2) != ball(t2, 2)

    def test_prefix_radius_guard(self, mono_critical):
        prefix = kesten_sample(mono_critical, 0, 2, SampleSpec(seed=3))
        with pytest.raises(FamilyError):
            ball(prefix, 3)

    def test_plane_order_matters(self):
        t1 = MultitypeTree(K=2, types=(0, 0, 1), parent=(-1, 0, 0), child_count=(2, 0, 0))
        t2 = MultitypeTree(K=2, types=(0, 1, 0), parent=(-1, 0, 0), child_count=(2, 0, 0))
        assert ball(t1, 1) != ball(t2, 1)


class TestEmpiricalTV:
    def test_identical(self):
        assert empirical_tv(["a", "b", "b"], ["a", "b", "b"]) == 0.0

    def test_disjoint(self):
        assert empirical_tv(["a", "a"], ["b"]) == 1.0

    def test_half(self):
        assert empirical_tv(["a", "a", "b", "b"], ["a", "a", "a", "a"]) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(FamilyError):
            empirical_tv([], ["a"])

    def test_vs_law(self):
        assert tv_empirical_vs_law(["a", "b"], {"a": 0.5, "b": 0.5}) == 0.0


class TestBallLaws:
    def test_unconditioned_mass(self, two_type):
        zeta, _ = two_type
        for r in (0, 1, 2):
            law = unconditioned_ball_law(zeta, 0, r)
            assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)

    def test_kesten_law_matches_sampling(self, mono_critical):
        law = kesten_ball_law(mono_critical, 0, 2)
        n = 20_000
        balls = [
            ball(p, 2) for p in kesten_forest(mono_critical, 0, 2, n, SampleSpec(seed=17))
        ]
        counts = Counter(balls)
        assert set(counts) <= set(law)
        for sig, pe in law.items():
            se = math.sqrt(pe * (1 - pe) / n)
            assert abs(counts[sig] / n - pe) <= 3.5 * se + 1e-9


class TestBlob:
    def test_monotype_vacuous(self, mono_critical):
        report = blob_expectation_check(mono_critical, 100, seed=1)
        assert report.estimates == {}

    def test_symmetric_family_unit_ratio(self, symmetric_two_critical):
        report = blob_expectation_check(symmetric_two_critical, 40_000, seed=9)
        assert report.targets[1] == pytest.approx(1.0, abs=1e-10)
        assert abs(report.zscores[1]) <= 3.0

    def test_needs_critical(self, two_type):
        with pytest.raises(FamilyError):
            blob_expectation_check(two_type[0], 10, seed=1)


class TestRecords:
    def test_roundtrip_fields(self, mono_critical):
        tree = sample_tree(mono_critical, 0, SampleSpec(seed=30, cap=100000))
        assert not isinstance(tree, Overflow)
        rec = tree_records(tree)
        assert rec[0] == (0, -1, 1)
        assert len(rec) == tree.size
