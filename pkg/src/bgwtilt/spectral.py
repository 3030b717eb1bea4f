"""Spectral radius, Perron vectors, criticality and extinction.

The spectral radius is computed by power iteration on M + I with
Collatz-Wielandt bounds, which gives a certified two-sided enclosure;
the shift makes the iteration converge for periodic irreducible
matrices as well.  Eigenvectors are then read off the null space of
M - rho*I.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .families import (
    FamilyError,
    ProjectedFamily,
    mean_matrix,
    minimal_fixed_point,
    tilted_moments,
)

#: |rho - 1| below this counts as critical unless the caller overrides it.
CRITICALITY_TOL = 1e-9

_CW_GAP = 1e-13
_CW_CAP = 200_000


class SpectralError(RuntimeError):
    """Eigen-computation failed to meet its certificate."""


def _is_irreducible(m: np.ndarray) -> bool:
    K = m.shape[0]
    adj = m > 0

    def reach(mat: np.ndarray) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.nonzero(mat[u])[0]:
                if int(v) not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        return len(seen) == K

    return reach(adj) and reach(adj.T)


def spectral_radius(m: np.ndarray) -> float:
    """Perron root of a nonnegative matrix, correct to about 1e-12.

    Irreducible matrices get the certified Collatz-Wielandt enclosure;
    reducible ones fall back to a general eigensolve.
    """
    m = np.asarray(m, dtype=float)
    K = m.shape[0]
    if m.shape != (K, K) or np.any(m < 0) or not np.all(np.isfinite(m)):
        raise FamilyError("mean matrix must be square, nonnegative and finite")
    if K == 1:
        return float(m[0, 0])
    if not _is_irreducible(m):
        return float(np.max(np.abs(np.linalg.eigvals(m))))

    shifted = m + np.eye(K)
    v = np.ones(K)
    lower, upper = 0.0, math.inf
    for _ in range(_CW_CAP):
        w = shifted @ v
        ratios = w / v
        lower = max(lower, float(ratios.min()))
        upper = min(upper, float(ratios.max()))
        if upper - lower < _CW_GAP:
            return 0.5 * (lower + upper) - 1.0
        v = w / w.max()
    if upper - lower < 1e-11:
        return 0.5 * (lower + upper) - 1.0
    raise SpectralError(
        f"power iteration stalled with Collatz-Wielandt bounds [{lower - 1}, {upper - 1}]"
    )


def _null_vector(a: np.ndarray) -> np.ndarray:
    """Unit vector minimizing |a v|, via the smallest right singular vector."""
    _, _, vt = np.linalg.svd(a)
    return vt[-1]


@dataclass(frozen=True)
class PerronData:
    rho: float
    a: np.ndarray  # left eigenvector, sum(a) = 1
    b: np.ndarray  # right eigenvector, sum(a*b) = 1
    X: np.ndarray | None  # asymptotic direction when rho == 1


def perron_vectors(m: np.ndarray, crit_tol: float = CRITICALITY_TOL) -> PerronData:
    """Positive left/right Perron eigenvectors with the standard normalization."""
    m = np.asarray(m, dtype=float)
    K = m.shape[0]
    if K > 1 and not _is_irreducible(m):
        raise SpectralError("Perron vectors need an irreducible mean matrix")
    rho = spectral_radius(m)
    shifted = m - rho * np.eye(K)
    a = _null_vector(shifted.T)
    b = _null_vector(shifted)
    if a.sum() < 0:
        a = -a
    if b.sum() < 0:
        b = -b
    if np.any(a <= 0) or np.any(b <= 0):
        raise SpectralError("Perron eigenvectors were not strictly positive")
    a = a / a.sum()
    b = b / float(a @ b)
    resid = max(
        float(np.max(np.abs(a @ m - rho * a))),
        float(np.max(np.abs(m @ b - rho * b))),
    )
    if resid > 1e-10:
        raise SpectralError(f"eigen-residual {resid:.3e} above certificate 1e-10")
    X = a.copy() if abs(rho - 1.0) <= crit_tol else None
    return PerronData(rho=rho, a=a, b=b, X=X)


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class Criticality:
    regime: Regime
    rho: float
    tol: float

    @property
    def is_critical(self) -> bool:
        return self.regime is Regime.CRITICAL


def classify(mu: ProjectedFamily, tol: float = CRITICALITY_TOL) -> Criticality:
    rho = spectral_radius(mean_matrix(mu))
    if abs(rho - 1.0) <= tol:
        regime = Regime.CRITICAL
    elif rho < 1.0:
        regime = Regime.SUBCRITICAL
    else:
        regime = Regime.SUPERCRITICAL
    return Criticality(regime=regime, rho=rho, tol=tol)


def asymptotic_direction(mu: ProjectedFamily, tol: float = CRITICALITY_TOL) -> np.ndarray:
    """L1-normalized positive left 1-eigenvector of a critical family."""
    cls = classify(mu, tol)
    if not cls.is_critical:
        raise SpectralError(f"family is {cls.regime.value} (rho={cls.rho}), not critical")
    data = perron_vectors(mean_matrix(mu), crit_tol=tol)
    return data.a  # sum(a)=1 with positive entries, so already L1-normalized


def extinction_probabilities(
    mu: ProjectedFamily, tol: float = 1e-13, max_iter: int = 10 ** 6
) -> np.ndarray:
    """Minimal fixed point of p -> phi(p); all-ones when not supercritical."""
    cls = classify(mu)
    if cls.regime is not Regime.SUPERCRITICAL:
        return np.ones(mu.K)
    return minimal_fixed_point(mu, tol=tol, max_iter=max_iter)


def subcritical_companion(mu: ProjectedFamily) -> np.ndarray:
    """q = log p, the tilting that conditions on extinction.

    The q-tilting shares all Gamma-conditioned tree laws with mu and is
    never supercritical.
    """
    p = extinction_probabilities(mu)
    if np.any(p <= 0):
        raise FamilyError("family is not finite: some extinction probability is 0")
    return np.log(p)


def rho_at(mu: ProjectedFamily, theta: np.ndarray) -> float:
    means, _ = tilted_moments(mu, theta)
    return spectral_radius(means)


def supercritical_shift(mu: ProjectedFamily, s0: float = 1.0, s_max: float = 256.0) -> float:
    """Smallest tried s with rho(s * ones) > 1, doubling from s0.

    Entire nondegenerate irreducible families become supercritical for
    large s, which gives :func:`critical_on_segment` a usable bracket end.
    """
    s = s0
    while s <= s_max:
        if rho_at(mu, np.full(mu.K, s)) > 1.0:
            return s
        s *= 2.0
    raise SpectralError(f"no supercritical diagonal tilting found up to s = {s_max}")


def critical_on_segment(
    mu: ProjectedFamily,
    theta_end: np.ndarray,
    tol: float = 1e-10,
    trace: list | None = None,
) -> float:
    """Bisection for lambda with rho(lambda * theta_end) = 1.

    Requires the endpoint radii to bracket 1.  ``trace`` optionally
    collects the (lambda, rho) evaluations for continuity diagnostics.
    """
    theta_end = np.asarray(theta_end, dtype=float)

    def rho(lam: float) -> float:
        r = rho_at(mu, lam * theta_end)
        if trace is not None:
            trace.append((lam, r))
        return r

    r0, r1 = rho(0.0), rho(1.0)
    if abs(r0 - 1.0) <= tol:
        return 0.0
    if abs(r1 - 1.0) <= tol:
        return 1.0
    if (r0 - 1.0) * (r1 - 1.0) > 0:
        raise SpectralError(
            f"no bracket: rho(0)={r0}, rho(theta_end)={r1} are on the same side of 1"
        )
    lo, hi = 0.0, 1.0
    sign_lo = r0 - 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rm = rho(mid)
        if abs(rm - 1.0) <= tol:
            return mid
        if (rm - 1.0) * sign_lo > 0:
            lo = mid
        else:
            hi = mid
    raise SpectralError("bisection failed to localize a critical point on the segment")
