"""Spectral radius, Perron vectors, extinction and segment bisection."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bgwtilt import (
    ProjectedFamily,
    Regime,
    SpectralError,
    asymptotic_direction,
    classify,
    critical_on_segment,
    extinction_probabilities,
    mean_matrix,
    perron_vectors,
    project,
    spectral_radius,
    subcritical_companion,
    tilt,
)
from bgwtilt.chigeom import chi
from bgwtilt.families import tilted_moments


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(3)) == pytest.approx(1.0, abs=1e-12)

    def test_two_type_closed_form(self, two_type):
        # 2x2 characteristic polynomial: det = 0, trace = 4/3.
        rho = spectral_radius(mean_matrix(two_type[1]))
        assert rho == pytest.approx(4 / 3, abs=1e-12)

    def test_reducible_diagonal(self):
        assert spectral_radius(np.diag([0.5, 0.25])) == pytest.approx(0.5, abs=1e-12)

    def test_periodic_swap(self):
        assert spectral_radius(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_collatz_wielandt_sandwich(self, two_type):
        m = mean_matrix(two_type[1]) + np.eye(2)
        rho = spectral_radius(mean_matrix(two_type[1])) + 1.0
        v = np.ones(2)
        for _ in range(50):
            w = m @ v
            ratios = w / v
            assert ratios.min() <= rho + 1e-12
            assert ratios.max() >= rho - 1e-12
            v = w / w.max()


class TestPerron:
    def test_k1(self):
        data = perron_vectors(np.eye(1))
        assert data.rho == pytest.approx(1.0)
        np.testing.assert_allclose(data.a, [1.0])
        np.testing.assert_allclose(data.b, [1.0])

    def test_two_type_left_vector(self, two_type):
        data = perron_vectors(mean_matrix(two_type[1]))
        np.testing.assert_allclose(data.a, [1 / 3, 2 / 3], atol=1e-12)
        np.testing.assert_allclose(data.b, [1.5, 0.75], atol=1e-12)
        assert data.a.sum() == pytest.approx(1.0, abs=1e-12)
        assert float(data.a @ data.b) == pytest.approx(1.0, abs=1e-12)

    def test_doubly_stochastic(self):
        m = np.array([[0.5, 0.5], [0.5, 0.5]])
        data = perron_vectors(m)
        np.testing.assert_allclose(data.a, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(data.b, [1.0, 1.0], atol=1e-12)

    def test_residuals(self, corpus):
        for mu in corpus:
            if not mu.finite_support:
                continue
            m = mean_matrix(mu)
            try:
                data = perron_vectors(m)
            except SpectralError:
                continue  # reducible members of the corpus
            assert np.max(np.abs(data.a @ m - data.rho * data.a)) < 1e-10
            assert np.max(np.abs(m @ data.b - data.rho * data.b)) < 1e-10


class TestClassify:
    def test_two_type_supercritical(self, two_type):
        assert classify(two_type[1]).regime is Regime.SUPERCRITICAL

    def test_mono_critical(self, mono_critical):
        assert classify(project(mono_critical)).regime is Regime.CRITICAL

    def test_companion_subcritical(self, two_type):
        _, mu = two_type
        q = subcritical_companion(mu)
        assert classify(tilt(mu, q)).regime is Regime.SUBCRITICAL


class TestAsymptoticDirection:
    def test_monotype(self, mono_critical):
        np.testing.assert_allclose(asymptotic_direction(project(mono_critical)), [1.0])

    def test_symmetric_swap(self, swap_critical):
        x = asymptotic_direction(project(swap_critical))
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-10)
        assert x.sum() == pytest.approx(1.0, abs=1e-12)

    def test_not_critical_raises(self, two_type):
        with pytest.raises(SpectralError):
            asymptotic_direction(two_type[1])


class TestExtinction:
    def test_critical_returns_one(self, mono_critical):
        np.testing.assert_allclose(extinction_probabilities(project(mono_critical)), [1.0])

    def test_quadratic_root(self, mono_supercritical):
        # p = 1/4 + (3/4) p^2 has minimal root 1/3.
        p = extinction_probabilities(project(mono_supercritical))
        assert p[0] == pytest.approx(1 / 3, abs=1e-13)

    def test_two_type_closed_form(self, two_type):
        # Eliminating p2 = 1/(2 - p1) gives 3 p1^3 - 11 p1^2 + 10 p1 - 2 = 0,
        # whose minimal root is (4 - sqrt(10)) / 3.
        _, mu = two_type
        p = extinction_probabilities(mu)
        p1 = (4 - math.sqrt(10)) / 3
        np.testing.assert_allclose(p, [p1, 1 / (2 - p1)], atol=1e-12)
        resid = max(abs(mu.gf(i, p) - p[i]) for i in range(2))
        assert resid < 1e-13

    def test_monotone_iteration(self, two_type):
        _, mu = two_type
        p = np.zeros(2)
        prev = p
        for _ in range(200):
            p = np.array([mu.gf(i, prev) for i in range(2)])
            assert np.all(p >= prev - 1e-15)
            assert np.all(p <= 1.0)
            prev = p


class TestCompanion:
    def test_subcritical_input_gives_zero(self, mono_subcritical):
        np.testing.assert_allclose(
            subcritical_companion(project(mono_subcritical)), [0.0], atol=1e-12
        )

    def test_quadratic(self, mono_supercritical):
        q = subcritical_companion(project(mono_supercritical))
        assert q[0] == pytest.approx(math.log(1 / 3), abs=1e-12)

    def test_two_type_chi_identity(self, two_type):
        _, mu = two_type
        q = subcritical_companion(mu)
        assert np.max(np.abs(chi(mu, q))) < 1e-10

    def test_never_supercritical(self, corpus):
        for mu in corpus:
            if not mu.finite_support or not validate_ok(mu):
                continue
            q = subcritical_companion(mu)
            assert classify(tilt(mu, q)).regime is not Regime.SUPERCRITICAL


def validate_ok(mu: ProjectedFamily) -> bool:
    from bgwtilt import validate

    return validate(mu).finite


class TestSegmentBisection:
    def test_already_critical(self, mono_critical):
        mu = project(mono_critical)
        assert critical_on_segment(mu, np.array([1.0])) == 0.0

    def test_two_type_companion_segment(self, two_type):
        _, mu = two_type
        q = subcritical_companion(mu)
        trace: list = []
        lam = critical_on_segment(mu, q, trace=trace)
        assert 0 < lam < 1
        means, _ = tilted_moments(mu, lam * q)
        assert abs(spectral_radius(means) - 1.0) <= 1e-10
        # Continuity along the sampled path: nearby radii stay close.
        trace.sort()
        for (l1, r1), (l2, r2) in zip(trace, trace[1:]):
            m1, _ = tilted_moments(mu, l1 * q)
            m2, _ = tilted_moments(mu, l2 * q)
            lipschitz = np.linalg.norm(m1 - m2, 2)
            assert abs(r1 - r2) <= 10 * lipschitz + 1e-12

    def test_monotype_closed_form(self, mono_subcritical):
        # For support {0, 2} and mean 1/2: rho(lam) = 2 e^{2 lam s} / (3 + e^{2 lam s});
        # rho = 1 at e^{2 lam s} = 3.
        mu = project(mono_subcritical)
        s = math.log(4.0)
        lam = critical_on_segment(mu, np.array([s]))
        assert lam == pytest.approx(math.log(3.0) / (2 * s), abs=1e-9)
        means, _ = tilted_moments(mu, np.array([lam * s]))
        assert abs(means[0, 0] - 1.0) <= 1e-10

    def test_no_bracket(self, mono_subcritical):
        mu = project(mono_subcritical)
        with pytest.raises(SpectralError):
            critical_on_segment(mu, np.array([-1.0]))

    def test_supercritical_shift_pipeline(self, mono_subcritical):
        from bgwtilt import supercritical_shift
        from bgwtilt.spectral import rho_at

        mu = project(mono_subcritical)
        s = supercritical_shift(mu)
        assert rho_at(mu, np.full(1, s)) > 1.0
        lam = critical_on_segment(mu, np.full(1, s))
        assert abs(rho_at(mu, np.full(1, lam * s)) - 1.0) <= 1e-10
