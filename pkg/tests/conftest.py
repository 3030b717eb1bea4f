"""Shared family corpus for the test suite."""

from __future__ import annotations

from fractions import Fraction

import pytest

from bgwtilt import OrderedFamily, ProjectedFamily, project
from bgwtilt.casebook import preimage_family, two_type_example

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


@pytest.fixture(scope="session")
def two_type():
    zeta, mu = two_type_example()
    return zeta, mu


@pytest.fixture(scope="session")
def mono_critical() -> OrderedFamily:
    """Monotype, no child or two children with probability 1/2 each."""
    return OrderedFamily.from_dicts(1, [{(): HALF, (0, 0): HALF}])


@pytest.fixture(scope="session")
def mono_supercritical() -> OrderedFamily:
    return OrderedFamily.from_dicts(1, [{(): QUARTER, (0, 0): Fraction(3, 4)}])


@pytest.fixture(scope="session")
def mono_subcritical() -> OrderedFamily:
    return OrderedFamily.from_dicts(1, [{(): Fraction(3, 4), (0, 0): QUARTER}])


@pytest.fixture(scope="session")
def swap_critical() -> OrderedFamily:
    """Type 1 always begets one type 2; type 2 begets two type 1 or none."""
    return OrderedFamily.from_dicts(
        2, [{(1,): Fraction(1)}, {(): HALF, (0, 0): HALF}]
    )


@pytest.fixture(scope="session")
def symmetric_two_critical() -> OrderedFamily:
    """Symmetric critical 2-type family with direction (1/2, 1/2)."""
    e = Fraction(1, 8)
    law = {(): Fraction(3, 8), (0,): e, (1,): e, (0, 1): Fraction(3, 8)}
    return OrderedFamily.from_dicts(2, [dict(law), dict(law)])


@pytest.fixture(scope="session")
def mono_skew_critical() -> OrderedFamily:
    """Monotype with mean one and asymmetric support {0, 1, 3}."""
    return OrderedFamily.from_dicts(
        1, [{(): HALF, (0,): QUARTER, (0, 0, 0): QUARTER}]
    )


@pytest.fixture(scope="session")
def deterministic_chain() -> OrderedFamily:
    """Every vertex has exactly one child of its own type."""
    return OrderedFamily.from_dicts(1, [{(0,): Fraction(1)}])


@pytest.fixture(scope="session")
def ring_three() -> OrderedFamily:
    """Three types in a cycle; critical but periodic."""
    return OrderedFamily.from_dicts(
        3,
        [
            {(): HALF, (1, 1): HALF},
            {(): HALF, (2, 2): HALF},
            {(): HALF, (0, 0): HALF},
        ],
    )


@pytest.fixture(scope="session")
def corpus(
    two_type,
    mono_critical,
    mono_supercritical,
    mono_subcritical,
    swap_critical,
    symmetric_two_critical,
    mono_skew_critical,
    deterministic_chain,
    ring_three,
) -> list[ProjectedFamily]:
    """At least ten finite-support projections, mixed regimes."""
    zeta, mu = two_type
    from bgwtilt import subcritical_companion, tilt

    families = [
        mu,
        tilt(mu, subcritical_companion(mu)),
        project(mono_critical),
        project(mono_supercritical),
        project(mono_subcritical),
        project(swap_critical),
        project(symmetric_two_critical),
        project(mono_skew_critical),
        project(deterministic_chain),
        project(ring_three),
        preimage_family(3),
    ]
    return families
