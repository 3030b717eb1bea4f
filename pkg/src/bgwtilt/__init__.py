"""Exponential tiltings of multitype branching offspring families."""

from .families import (
    Analytic,
    FamilyError,
    FiniteSupport,
    OrderedFamily,
    ProjectedFamily,
    ValidationReport,
    family_from_config,
    family_to_config,
    gf_eval,
    mean_matrix,
    project,
    tilt,
    tilt_ordered,
    tilt_ordered_weights,
    tilt_weights,
    validate,
)
from .spectral import (
    Criticality,
    PerronData,
    Regime,
    SpectralError,
    asymptotic_direction,
    classify,
    critical_on_segment,
    extinction_probabilities,
    perron_vectors,
    spectral_radius,
    subcritical_companion,
    supercritical_shift,
)
from .chigeom import (
    ConeCase,
    CriticalSolveResult,
    GammaConstraint,
    SolveOptions,
    SolverDivergence,
    accessible_directions,
    chi,
    chi_jacobian,
    cone_membership,
    critical_for_direction,
    f_and_grad,
    find_critical_equivalent,
    gamma_equivalent,
    trace_boundary,
)
from .trees import (
    BallSignature,
    KestenPrefix,
    MultitypeTree,
    Overflow,
    SampleSpec,
    TreeSamplingError,
    ball,
    blob_expectation_check,
    empirical_tv,
    enumerate_trees,
    integer_preimage,
    kesten_sample,
    sample_conditioned,
    sample_tree,
    size_biased_law,
)

__version__ = "0.1.0"
