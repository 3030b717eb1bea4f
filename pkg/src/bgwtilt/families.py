"""Offspring families of multitype branching processes and their tiltings.

Two family representations are used throughout:

* :class:`OrderedFamily` - per-type laws on ordered type-words.  This is
  the object trees are sampled from, since the order of children matters
  for plane trees.
* :class:`ProjectedFamily` - per-type laws on child-count vectors,
  obtained by forgetting the order of a word.  All spectral and
  geometric computations happen here.

A projected family is backed either by an explicit finite support
(:class:`FiniteSupport`, masses may be exact :class:`fractions.Fraction`
or floats) or by closed-form generating-function evaluators
(:class:`Analytic`), which exist for the non-entire counterexample
family and carry operator-declared validity flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ._intlat import integer_rank, lattice_is_full

Mass = Fraction | float
Counts = tuple[int, ...]
Word = tuple[int, ...]

#: Largest allowed |theta|_inf when producing a tilted family in doubles.
THETA_BOUND = 700.0

#: Per-type masses must sum to one within this.
MASS_TOL = 1e-12

_EXTINCTION_TOL = 1e-13
_EXTINCTION_CAP = 10 ** 6


class FamilyError(ValueError):
    """Invalid family data or an operation outside its domain."""


def _as_counts(values: Iterable[int]) -> Counts:
    out = tuple(int(v) for v in values)
    if any(v < 0 for v in out):
        raise FamilyError(f"negative child count in {out}")
    return out


def _check_unit_mass(total: Mass, what: str) -> None:
    err = abs(float(total) - 1.0)
    if err > MASS_TOL:
        raise FamilyError(f"{what} masses sum to {float(total)!r}, off by {err:.3e}")


@dataclass(frozen=True)
class OrderedFamily:
    """Finite-support offspring laws on ordered type-words.

    ``atoms[i]`` lists the law of type ``i`` as sorted ``(word, mass)``
    pairs; words are tuples of 0-based type indices.
    """

    K: int
    atoms: tuple[tuple[tuple[Word, Mass], ...], ...]

    def __post_init__(self) -> None:
        if self.K < 1:
            raise FamilyError("need at least one type")
        if len(self.atoms) != self.K:
            raise FamilyError("one law per type required")
        for i, law in enumerate(self.atoms):
            if not law:
                raise FamilyError(f"type {i} has an empty law")
            total: Mass = 0
            for word, mass in law:
                if any(t < 0 or t >= self.K for t in word):
                    raise FamilyError(f"word {word} uses a type outside 0..{self.K - 1}")
                if float(mass) < 0:
                    raise FamilyError("negative probability")
                total = total + mass
            _check_unit_mass(total, f"type {i} word")

    @staticmethod
    def from_dicts(K: int, laws: Sequence[Mapping[Word, Mass]]) -> OrderedFamily:
        atoms = tuple(
            tuple(
                sorted(
                    ((tuple(w), m) for w, m in law.items() if float(m) != 0),
                    key=lambda a: (len(a[0]), a[0]),
                )
            )
            for law in laws
        )
        return OrderedFamily(K, atoms)

    def law(self, i: int) -> dict[Word, Mass]:
        return dict(self.atoms[i])

    @property
    def exact(self) -> bool:
        return all(isinstance(m, Fraction) for law in self.atoms for _, m in law)

    def to_float(self) -> OrderedFamily:
        return OrderedFamily(
            self.K, tuple(tuple((w, float(m)) for w, m in law) for law in self.atoms)
        )


@dataclass(frozen=True)
class FiniteSupport:
    """Sparse per-type laws on count vectors, sorted for canonical equality."""

    atoms: tuple[tuple[tuple[Counts, Mass], ...], ...]

    def __post_init__(self) -> None:
        for i, law in enumerate(self.atoms):
            total: Mass = 0
            for counts, mass in law:
                if float(mass) < 0:
                    raise FamilyError("negative probability")
                total = total + mass
            _check_unit_mass(total, f"type {i} count")

    @staticmethod
    def from_dicts(laws: Sequence[Mapping[Counts, Mass]]) -> FiniteSupport:
        return FiniteSupport(
            tuple(
                tuple(sorted((tuple(c), m) for c, m in law.items() if float(m) != 0))
                for law in laws
            )
        )


@dataclass(frozen=True)
class Analytic:
    """Closed-form generating functions with operator-declared properties.

    ``gf``, ``grad`` and ``hess`` evaluate phi^(i) and its x-derivatives at
    a point x with positive coordinates.  ``in_domain`` guards the region
    where the series behind the closed forms converge; ``flags`` are the
    structural properties the operator vouches for (they cannot be decided
    from evaluators alone).  ``series_tol`` records the truncation tolerance
    used when the closed forms were validated against their series.
    """

    K: int
    gf: Callable[[int, np.ndarray], float]
    grad: Callable[[int, np.ndarray], np.ndarray]
    hess: Callable[[int, np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray], bool]
    flags: Mapping[str, bool]
    series_tol: float = 1e-12

    def __post_init__(self) -> None:
        ones = np.ones(self.K)
        if not self.in_domain(ones):
            raise FamilyError("the point (1,...,1) must be inside the declared domain")
        for i in range(self.K):
            err = abs(self.gf(i, ones) - 1.0)
            if err > 1e-10:
                raise FamilyError(f"phi^({i}) is not normalized at 1: off by {err:.3e}")


@dataclass(frozen=True)
class ProjectedFamily:
    """A per-type law on child-count vectors with one of two backends."""

    K: int
    backend: FiniteSupport | Analytic

    def __post_init__(self) -> None:
        if isinstance(self.backend, FiniteSupport):
            if len(self.backend.atoms) != self.K:
                raise FamilyError("one law per type required")
            for law in self.backend.atoms:
                for counts, _ in law:
                    if len(counts) != self.K:
                        raise FamilyError("count vector length must equal K")
        elif self.backend.K != self.K:
            raise FamilyError("backend K mismatch")

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def from_masses(K: int, laws: Sequence[Mapping[Counts, Mass]]) -> ProjectedFamily:
        return ProjectedFamily(K, FiniteSupport.from_dicts(laws))

    @property
    def finite_support(self) -> bool:
        return isinstance(self.backend, FiniteSupport)

    @property
    def exact(self) -> bool:
        return self.finite_support and all(
            isinstance(m, Fraction) for law in self.backend.atoms for _, m in law
        )

    def masses(self, i: int) -> dict[Counts, Mass]:
        if not self.finite_support:
            raise FamilyError("analytic backend has no explicit masses")
        return dict(self.backend.atoms[i])

    def to_float(self) -> ProjectedFamily:
        if not self.finite_support:
            return self
        return ProjectedFamily(
            self.K,
            FiniteSupport(
                tuple(tuple((c, float(m)) for c, m in law) for law in self.backend.atoms)
            ),
        )

    # -- generating function surface ------------------------------------------

    def in_domain(self, x: np.ndarray) -> bool:
        if self.finite_support:
            return True
        return self.backend.in_domain(np.asarray(x, dtype=float))

    def gf(self, i: int, x: Sequence[float]) -> float:
        """Evaluate phi^(i) at the point x."""
        xv = np.asarray(x, dtype=float)
        if not self.finite_support:
            if not self.backend.in_domain(xv):
                raise FamilyError(f"point {xv} outside the declared domain of convergence")
            return float(self.backend.gf(i, xv))
        total = 0.0
        for counts, mass in self.backend.atoms[i]:
            term = float(mass)
            for xj, kj in zip(xv, counts):
                term *= xj ** kj
            total += term
        return total

    def gf_grad(self, i: int, x: Sequence[float]) -> np.ndarray:
        xv = np.asarray(x, dtype=float)
        if not self.finite_support:
            if not self.backend.in_domain(xv):
                raise FamilyError(f"point {xv} outside the declared domain of convergence")
            return np.asarray(self.backend.grad(i, xv), dtype=float)
        grad = np.zeros(self.K)
        for counts, mass in self.backend.atoms[i]:
            base = float(mass)
            powers = [xj ** kj for xj, kj in zip(xv, counts)]
            for j, kj in enumerate(counts):
                if kj == 0:
                    continue
                term = base * kj * xv[j] ** (kj - 1)
                for m, p in enumerate(powers):
                    if m != j:
                        term *= p
                grad[j] += term
        return grad

    def gf_hess(self, i: int, x: Sequence[float]) -> np.ndarray:
        xv = np.asarray(x, dtype=float)
        if not self.finite_support:
            if not self.backend.in_domain(xv):
                raise FamilyError(f"point {xv} outside the declared domain of convergence")
            return np.asarray(self.backend.hess(i, xv), dtype=float)
        hess = np.zeros((self.K, self.K))
        for counts, mass in self.backend.atoms[i]:
            base = float(mass)
            for a in range(self.K):
                for b in range(a, self.K):
                    ka, kb = counts[a], counts[b]
                    if a == b:
                        if ka < 2:
                            continue
                        coeff = ka * (ka - 1)
                    else:
                        if ka == 0 or kb == 0:
                            continue
                        coeff = ka * kb
                    term = base * coeff
                    for j, kj in enumerate(counts):
                        e = kj - (j == a) - (j == b)
                        term *= xv[j] ** e
                    hess[a, b] += term
                    if a != b:
                        hess[b, a] += term
        return hess


# ---------------------------------------------------------------------------
# Named operations
# ---------------------------------------------------------------------------


def project(zeta: OrderedFamily) -> ProjectedFamily:
    """Forget word order: mass of a count vector pools all matching words."""
    laws: list[dict[Counts, Mass]] = []
    for law in zeta.atoms:
        pooled: dict[Counts, Mass] = {}
        for word, mass in law:
            counts = tuple(word.count(t) for t in range(zeta.K))
            pooled[counts] = pooled.get(counts, 0) + mass
        laws.append(pooled)
    return ProjectedFamily.from_masses(zeta.K, laws)


def gf_eval(mu: ProjectedFamily, i: int, x: Sequence[float]) -> float:
    return mu.gf(i, x)


def _word_counts(word: Word, K: int) -> Counts:
    return tuple(word.count(t) for t in range(K))


def _check_theta(theta: Sequence[float], K: int) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if th.shape != (K,):
        raise FamilyError(f"theta must have {K} entries")
    if not np.all(np.isfinite(th)):
        raise FamilyError("theta entries must be finite")
    if np.max(np.abs(th)) > THETA_BOUND:
        raise FamilyError(f"|theta|_inf exceeds the overflow guard {THETA_BOUND}")
    return th


def tilt_weights(mu: ProjectedFamily, y: Sequence[Mass]) -> ProjectedFamily:
    """Tilt by explicit per-type weights y (y = e^theta), exact on rationals."""
    if not mu.finite_support:
        raise FamilyError("weight tilting needs a finite-support backend")
    yv = list(y)
    if len(yv) != mu.K or any(float(v) <= 0 for v in yv):
        raise FamilyError("weights must be K positive numbers")
    laws: list[dict[Counts, Mass]] = []
    for law in mu.backend.atoms:
        weighted: dict[Counts, Mass] = {}
        norm: Mass = 0
        for counts, mass in law:
            w = mass
            for v, k in zip(yv, counts):
                w = w * v ** k
            weighted[counts] = w
            norm = norm + w
        laws.append({c: w / norm for c, w in weighted.items()})
    return ProjectedFamily.from_masses(mu.K, laws)


def tilt(mu: ProjectedFamily, theta: Sequence[float]) -> ProjectedFamily:
    """Exponential tilting by theta with per-type renormalization."""
    th = _check_theta(theta, mu.K)
    if not mu.finite_support:
        return _tilt_analytic(mu, th)
    if not np.any(th):
        return mu
    laws: list[dict[Counts, Mass]] = []
    for law in mu.backend.atoms:
        # Shift exponents before exponentiating so large theta stays finite.
        logw = [math.fsum(t * k for t, k in zip(th, counts)) for counts, _ in law]
        shift = max(logw)
        weights = [float(m) * math.exp(lw - shift) for (_, m), lw in zip(law, logw)]
        norm = math.fsum(weights)
        laws.append({counts: w / norm for (counts, _), w in zip(law, weights)})
    return ProjectedFamily.from_masses(mu.K, laws)


def _tilt_analytic(mu: ProjectedFamily, theta: np.ndarray) -> ProjectedFamily:
    base = mu.backend
    assert isinstance(base, Analytic)
    scale = np.exp(theta)
    point = scale.copy()
    if not base.in_domain(point):
        raise FamilyError("tilt point outside the declared domain of convergence")
    norms = [base.gf(i, point) for i in range(mu.K)]

    def gf(i: int, x: np.ndarray) -> float:
        return base.gf(i, x * scale) / norms[i]

    def grad(i: int, x: np.ndarray) -> np.ndarray:
        return base.grad(i, x * scale) * scale / norms[i]

    def hess(i: int, x: np.ndarray) -> np.ndarray:
        return base.hess(i, x * scale) * np.outer(scale, scale) / norms[i]

    def in_domain(x: np.ndarray) -> bool:
        return base.in_domain(x * scale)

    return ProjectedFamily(
        mu.K,
        Analytic(mu.K, gf, grad, hess, in_domain, dict(base.flags), base.series_tol),
    )


def tilt_ordered_weights(zeta: OrderedFamily, y: Sequence[Mass]) -> OrderedFamily:
    yv = list(y)
    if len(yv) != zeta.K or any(float(v) <= 0 for v in yv):
        raise FamilyError("weights must be K positive numbers")
    laws: list[dict[Word, Mass]] = []
    for law in zeta.atoms:
        weighted: dict[Word, Mass] = {}
        norm: Mass = 0
        for word, mass in law:
            w = mass
            for v, k in zip(yv, _word_counts(word, zeta.K)):
                w = w * v ** k
            weighted[word] = w
            norm = norm + w
        laws.append({wd: w / norm for wd, w in weighted.items()})
    return OrderedFamily.from_dicts(zeta.K, laws)


def tilt_ordered(zeta: OrderedFamily, theta: Sequence[float]) -> OrderedFamily:
    """Tilt an ordered family; words are weighted through their counts."""
    th = _check_theta(theta, zeta.K)
    if not np.any(th):
        return zeta
    laws: list[dict[Word, Mass]] = []
    for law in zeta.atoms:
        logw = [
            math.fsum(t * k for t, k in zip(th, _word_counts(word, zeta.K)))
            for word, _ in law
        ]
        shift = max(logw)
        weights = [float(m) * math.exp(lw - shift) for (_, m), lw in zip(law, logw)]
        norm = math.fsum(weights)
        laws.append({word: w / norm for (word, _), w in zip(law, weights)})
    return OrderedFamily.from_dicts(zeta.K, laws)


def mean_matrix(mu: ProjectedFamily) -> np.ndarray:
    """M[i, j] = expected number of type-j children of a type-i vertex."""
    if mu.finite_support:
        m = np.zeros((mu.K, mu.K))
        for i, law in enumerate(mu.backend.atoms):
            for counts, mass in law:
                m[i] += float(mass) * np.asarray(counts, dtype=float)
        return m
    ones = np.ones(mu.K)
    return np.vstack([mu.gf_grad(i, ones) for i in range(mu.K)])


def log_gf_exp(mu: ProjectedFamily, i: int, theta: Sequence[float]) -> float:
    """log phi^(i)(e^theta), computed with an exponent shift on finite support."""
    th = np.asarray(theta, dtype=float)
    if not mu.finite_support:
        return math.log(mu.gf(i, np.exp(th)))
    law = mu.backend.atoms[i]
    logw = [math.fsum(t * k for t, k in zip(th, counts)) for counts, _ in law]
    shift = max(logw)
    total = math.fsum(float(m) * math.exp(lw - shift) for (_, m), lw in zip(law, logw))
    return shift + math.log(total)


def tilted_moments(
    mu: ProjectedFamily, theta: Sequence[float], with_cov: bool = False
) -> tuple[np.ndarray, np.ndarray | None]:
    """Mean matrix (and optionally per-type covariances) of the theta-tilting.

    Works directly from the base family so no tilted family is materialized;
    on finite support a shifted-exponent form keeps far-out theta stable.
    """
    th = np.asarray(theta, dtype=float)
    K = mu.K
    means = np.zeros((K, K))
    covs = np.zeros((K, K, K)) if with_cov else None
    if mu.finite_support:
        for i, law in enumerate(mu.backend.atoms):
            logw = [math.fsum(t * k for t, k in zip(th, counts)) for counts, _ in law]
            shift = max(logw)
            weights = np.array(
                [float(m) * math.exp(lw - shift) for (_, m), lw in zip(law, logw)]
            )
            weights /= weights.sum()
            pts = np.array([counts for counts, _ in law], dtype=float)
            mean = weights @ pts
            means[i] = mean
            if with_cov:
                centered = pts - mean
                covs[i] = (weights[:, None] * centered).T @ centered
        return means, covs
    point = np.exp(th)
    for i in range(K):
        val = mu.gf(i, point)
        grad = mu.gf_grad(i, point)
        means[i] = point * grad / val
        if with_cov:
            hess = mu.gf_hess(i, point)
            outer = np.outer(point, point)
            covs[i] = outer * (hess / val - np.outer(grad, grad) / val ** 2)
            covs[i] += np.diag(means[i])
    return means, covs


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    entire: bool
    finite: bool
    nondegenerate: bool
    nonlocalized: bool
    irreducible: bool
    aperiodic: bool
    extinction_probs: np.ndarray | None = None
    reasons: Mapping[str, str] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return (
            self.entire
            and self.finite
            and self.nondegenerate
            and self.nonlocalized
            and self.irreducible
            and self.aperiodic
        )

    def flag(self, name: str) -> bool:
        return bool(getattr(self, name))


def minimal_fixed_point(
    mu: ProjectedFamily,
    tol: float = _EXTINCTION_TOL,
    max_iter: int = _EXTINCTION_CAP,
) -> np.ndarray:
    """Componentwise-minimal solution of p = phi(p), iterated up from 0.

    The iteration is monotone nondecreasing and bounded by 1, so it always
    converges.  Near-critical families contract at a rate close to 1; when
    the projected remaining work exceeds the cap, a Newton polish on
    phi(p) - p is attempted first and accepted only if it lands at a
    verified fixed point at or above the current iterate.
    """
    p = np.zeros(mu.K)
    prev_gap = math.inf
    for it in range(max_iter):
        nxt = np.array([mu.gf(i, p) for i in range(mu.K)])
        gap = float(np.max(np.abs(nxt - p)))
        if gap < tol:
            return nxt
        if it >= 500 and gap > 0:
            rate = gap / prev_gap if prev_gap > 0 else 1.0
            hopeless = rate >= 1.0 or (
                math.log(tol / gap) / math.log(rate) > max_iter - it
            )
            if hopeless:
                polished = _newton_fixed_point(mu, nxt, tol)
                if polished is not None:
                    return polished
        prev_gap = gap
        p = nxt
    raise FamilyError(
        f"extinction iteration did not reach {tol} in {max_iter} steps; last iterate {p}"
    )


def _newton_fixed_point(
    mu: ProjectedFamily, p0: np.ndarray, tol: float
) -> np.ndarray | None:
    """Newton steps on phi(p) - p = 0 from below; None when unverifiable."""
    p = p0.copy()
    eye = np.eye(mu.K)
    for _ in range(100):
        val = np.array([mu.gf(i, p) for i in range(mu.K)])
        resid = val - p
        if float(np.max(np.abs(resid))) < tol:
            if np.all(p <= 1.0 + 1e-12) and np.all(p >= p0 - 1e-9):
                return np.minimum(p, 1.0)
            return None
        jac = np.vstack([mu.gf_grad(i, p) for i in range(mu.K)])
        try:
            step = np.linalg.solve(jac - eye, -resid)
        except np.linalg.LinAlgError:
            return None
        p = p + step
        if not np.all(np.isfinite(p)) or np.any(p < -1e-9) or np.any(p > 2.0):
            return None
    return None


def _strongly_connected(adj: np.ndarray) -> bool:
    K = adj.shape[0]

    def reach(mat: np.ndarray) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in range(K):
                if mat[u, v] and v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == K

    return reach(adj) and reach(adj.T)


def validate(mu: ProjectedFamily, extinction_tol: float = _EXTINCTION_TOL) -> ValidationReport:
    """Decide the standing structural hypotheses for a finite-support family.

    Analytic families cannot be inspected structurally, so their
    operator-declared flags are returned unchanged.
    """
    if not mu.finite_support:
        flags = dict(mu.backend.flags)
        return ValidationReport(
            entire=flags.get("entire", False),
            finite=flags.get("finite", False),
            nondegenerate=flags.get("nondegenerate", False),
            nonlocalized=flags.get("nonlocalized", False),
            irreducible=flags.get("irreducible", False),
            aperiodic=flags.get("aperiodic", False),
            reasons={"backend": "analytic; flags are operator-declared"},
        )

    K = mu.K
    reasons: dict[str, str] = {}
    atoms = mu.backend.atoms

    nondegenerate = any(
        sum(counts) >= 2 for law in atoms for counts, mass in law if float(mass) > 0
    )
    if not nondegenerate:
        reasons["nondegenerate"] = "no type ever has two or more children"

    # Nonlocalized: within-type support differences must span R^K.
    diffs: list[Counts] = []
    for law in atoms:
        support = [counts for counts, mass in law if float(mass) > 0]
        base = support[0]
        diffs.extend(tuple(c - b for c, b in zip(counts, base)) for counts in support[1:])
    nonlocalized = integer_rank(diffs) == K if diffs else False
    if not nonlocalized:
        reasons["nonlocalized"] = "some linear count statistic is deterministic"

    adj = (mean_matrix(mu) > 0).astype(int)
    irreducible = _strongly_connected(adj)
    if not irreducible:
        reasons["irreducible"] = "positivity digraph of the mean matrix is not strongly connected"

    # Aperiodic: differences of pooled support points must generate Z^K.
    pooled = sorted(
        {counts for law in atoms for counts, mass in law if float(mass) > 0}
    )
    pool_diffs = [
        tuple(a - b for a, b in zip(p, pooled[0])) for p in pooled[1:]
    ]
    aperiodic = lattice_is_full(pool_diffs, K)
    if not aperiodic:
        reasons["aperiodic"] = "support differences generate a proper sublattice of Z^K"

    # Finiteness equals positivity of the minimal fixed point of phi, and
    # its positivity pattern is decidable exactly: close the set of
    # childless-capable types under "has an atom supported inside the set".
    finite_types = {
        i
        for i, law in enumerate(atoms)
        if any(sum(c) == 0 and float(m) > 0 for c, m in law)
    }
    changed = True
    while changed:
        changed = False
        for i, law in enumerate(atoms):
            if i in finite_types:
                continue
            for counts, mass in law:
                if float(mass) > 0 and all(
                    counts[j] == 0 or j in finite_types for j in range(K)
                ):
                    finite_types.add(i)
                    changed = True
                    break
    finite = len(finite_types) == K
    p = None
    if finite:
        try:
            p = minimal_fixed_point(mu, tol=extinction_tol, max_iter=50_000)
        except FamilyError:
            p = None  # near-critical crawl; the finite flag stands regardless
    else:
        reasons["finite"] = "some type dies out with probability zero"

    return ValidationReport(
        entire=True,  # automatic for finite support
        finite=finite,
        nondegenerate=nondegenerate,
        nonlocalized=nonlocalized,
        irreducible=irreducible,
        aperiodic=aperiodic,
        extinction_probs=p,
        reasons=reasons,
    )


# ---------------------------------------------------------------------------
# Config file format
# ---------------------------------------------------------------------------


def _parse_prob(raw: object) -> Mass:
    if isinstance(raw, str):
        return Fraction(raw)
    if isinstance(raw, (int, float)):
        return float(raw)
    raise FamilyError(f"cannot parse probability {raw!r}")


def family_from_config(doc: Mapping) -> tuple[OrderedFamily | None, ProjectedFamily]:
    """Parse the JSON family document.

    Types in the file are 1-based.  Atoms must be uniformly "word" entries
    (yielding an ordered family plus its projection) or uniformly "counts"
    entries (projection only).
    """
    try:
        K = int(doc["K"])
        entries = list(doc["types"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FamilyError(f"malformed family document: {exc}") from exc
    if K < 1:
        raise FamilyError("K must be positive")
    kinds = {
        "word" if "word" in atom else "counts"
        for entry in entries
        for atom in entry.get("atoms", ())
    }
    if len(kinds) != 1:
        raise FamilyError("atoms must be uniformly 'word' or uniformly 'counts'")
    kind = kinds.pop()

    per_type: dict[int, dict] = {}
    for entry in entries:
        i = int(entry["type"]) - 1
        if not 0 <= i < K:
            raise FamilyError(f"type {entry['type']} outside 1..{K}")
        law = per_type.setdefault(i, {})
        for atom in entry["atoms"]:
            prob = _parse_prob(atom["prob"])
            if kind == "word":
                key = tuple(int(t) - 1 for t in atom["word"])
                if any(t < 0 or t >= K for t in key):
                    raise FamilyError(f"word {atom['word']} uses a type outside 1..{K}")
            else:
                key = _as_counts(atom["counts"])
                if len(key) != K:
                    raise FamilyError("counts vectors must have K entries")
            law[key] = law.get(key, 0) + prob
    if set(per_type) != set(range(K)):
        raise FamilyError("every type 1..K needs a law")

    laws = [per_type[i] for i in range(K)]
    if kind == "word":
        zeta = OrderedFamily.from_dicts(K, laws)
        return zeta, project(zeta)
    return None, ProjectedFamily.from_masses(K, laws)


def family_to_config(
    zeta: OrderedFamily | None = None, mu: ProjectedFamily | None = None
) -> dict:
    """Inverse of :func:`family_from_config`; prefers the ordered form."""

    def fmt(m: Mass) -> object:
        return str(m) if isinstance(m, Fraction) else float(m)

    if zeta is not None:
        return {
            "K": zeta.K,
            "types": [
                {
                    "type": i + 1,
                    "atoms": [
                        {"word": [t + 1 for t in w], "prob": fmt(m)}
                        for w, m in zeta.atoms[i]
                    ],
                }
                for i in range(zeta.K)
            ],
        }
    if mu is None or not mu.finite_support:
        raise FamilyError("need an ordered or finite-support family to serialize")
    return {
        "K": mu.K,
        "types": [
            {
                "type": i + 1,
                "atoms": [
                    {"counts": list(c), "prob": fmt(m)} for c, m in mu.backend.atoms[i]
                ],
            }
            for i in range(mu.K)
        ],
    }
