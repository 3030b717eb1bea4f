"""Geometry of the tilt map chi and the critical-tilting solver.

chi sends a tilt vector theta to (log phi^(i)(e^theta) - theta_i)_i.
Its Jacobian is M_theta - I, critical tiltings are exactly the theta
mapped to the boundary of the image of chi, and the critical tilting
equivalent to a reference theta_bar is the maximizer of the strictly
concave objective f_X = -X' chi over the equivalence class
{theta : P chi(theta) = P chi(theta_bar)}, with P the orthogonal
projector whose kernel is the row space of the conditioning matrix.

The maximization is a projected Newton with Armijo line search; the
equality constraint is enforced by a quadratic penalty ramped by a
fixed factor per outer round until the equivalence residual passes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._intlat import integer_rank
from .families import (
    FamilyError,
    OrderedFamily,
    ProjectedFamily,
    log_gf_exp,
    project,
    tilted_moments,
    validate,
)
from .spectral import (
    CRITICALITY_TOL,
    perron_vectors,
    rho_at,
    subcritical_companion,
)


class SolverDivergence(RuntimeError):
    """Constrained ascent diverged; carries a trajectory summary."""

    def __init__(self, message: str, trajectory: list[dict]):
        super().__init__(message)
        self.trajectory = trajectory

    def summary(self) -> str:
        lines = [str(self)]
        for entry in self.trajectory[-12:]:
            lines.append(
                "  round={round} penalty={penalty:.1e} |theta|={tnorm:.3f} "
                "value={value:.6g} equiv={equiv:.2e} rho_gap={rho_gap:.2e} "
                "status={status}".format(**entry)
            )
        return "\n".join(lines)


@dataclass(frozen=True)
class GammaConstraint:
    """Integer conditioning matrix of full row rank, with optional target."""

    matrix: np.ndarray
    target: np.ndarray | None = None

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.size == 0:
            raise FamilyError("gamma must be a nonempty 2-d integer matrix")
        if not np.array_equal(m, m.astype(int)):
            raise FamilyError("gamma entries must be integers")
        m = m.astype(int)
        if not m.any():
            raise FamilyError("gamma must not be the zero matrix")
        if integer_rank(m.tolist()) != m.shape[0]:
            raise FamilyError("gamma rows must be linearly independent")
        object.__setattr__(self, "matrix", m)
        if self.target is not None:
            t = np.asarray(self.target)
            if t.shape != (m.shape[0],):
                raise FamilyError("target must have one entry per gamma row")
            if not np.array_equal(t, t.astype(int)):
                raise FamilyError("target entries must be integers")
            object.__setattr__(self, "target", t.astype(int))

    @property
    def ell(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def K(self) -> int:
        return int(self.matrix.shape[1])

    def kernel_basis(self) -> np.ndarray:
        """Orthonormal K x (K - ell) basis of ker(gamma)."""
        _, _, vt = np.linalg.svd(self.matrix.astype(float))
        return vt[self.ell:].T.copy()


class ConeCase(enum.Enum):
    ZERO = "ZeroCone"
    OPEN = "OpenCone"


@dataclass(frozen=True)
class CriticalSolveResult:
    theta_star: np.ndarray
    X_star: np.ndarray
    lam: float
    objective: float
    residuals: Mapping[str, float]
    cone_case: ConeCase
    stats: Mapping[str, object] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# chi and its derivatives
# ---------------------------------------------------------------------------


def chi(mu: ProjectedFamily, theta: Sequence[float]) -> np.ndarray:
    """chi_i(theta) = log phi^(i)(e^theta) - theta_i."""
    th = np.asarray(theta, dtype=float)
    if th.shape != (mu.K,):
        raise FamilyError(f"theta must have {mu.K} entries")
    if not mu.finite_support and not mu.in_domain(np.exp(th)):
        raise FamilyError(f"theta={th} is outside the declared domain of convergence")
    return np.array([log_gf_exp(mu, i, th) - th[i] for i in range(mu.K)])


def chi_jacobian(mu: ProjectedFamily, theta: Sequence[float]) -> np.ndarray:
    """Jacobian of chi at theta, equal to M_theta - I."""
    means, _ = tilted_moments(mu, np.asarray(theta, dtype=float))
    return means - np.eye(mu.K)


def f_and_grad(
    mu: ProjectedFamily,
    X: Sequence[float],
    theta: Sequence[float],
    with_hessian: bool = False,
) -> tuple[float, np.ndarray] | tuple[float, np.ndarray, np.ndarray]:
    """Value and gradient (optionally Hessian) of f_X(theta) = -X' chi(theta).

    The Hessian is minus the X-weighted sum of the tilted offspring
    covariances, hence negative semidefinite everywhere and negative
    definite for nonlocalized families.
    """
    Xv = np.asarray(X, dtype=float)
    if np.any(Xv <= 0):
        raise FamilyError("direction X must have positive entries")
    th = np.asarray(theta, dtype=float)
    value = -float(Xv @ chi(mu, th))
    means, covs = tilted_moments(mu, th, with_cov=with_hessian)
    grad = (np.eye(mu.K) - means).T @ Xv
    if not with_hessian:
        return value, grad
    hess = -np.einsum("k,kij->ij", Xv, covs)
    return value, grad, hess


def gamma_equivalent(
    mu: ProjectedFamily,
    theta: Sequence[float],
    theta_prime: Sequence[float],
    gamma: GammaConstraint,
    tol: float = 1e-9,
) -> bool:
    """Whether chi(theta) - chi(theta') lies in the row space of gamma."""
    diff = chi(mu, theta) - chi(mu, theta_prime)
    return equivalence_residual(diff, gamma) <= tol


def equivalence_residual(diff: np.ndarray, gamma: GammaConstraint) -> float:
    """Distance from diff to Im(gamma'), the orthocomplement of ker(gamma)."""
    B = gamma.kernel_basis()
    if B.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(B.T @ diff))


def cone_membership(
    mu: ProjectedFamily,
    gamma: GammaConstraint,
    theta_bar: Sequence[float],
    crit_tol: float = CRITICALITY_TOL,
    zero_tol: float = 1e-9,
) -> ConeCase:
    """ZeroCone iff theta_bar is critical and gamma annihilates its direction."""
    from .spectral import SpectralError

    th = np.asarray(theta_bar, dtype=float)
    means, _ = tilted_moments(mu, th)
    try:
        data = perron_vectors(means, crit_tol=crit_tol)
    except (SpectralError, np.linalg.LinAlgError):
        return ConeCase.OPEN
    if data.X is None:
        return ConeCase.OPEN
    if float(np.linalg.norm(gamma.matrix @ data.X)) <= zero_tol:
        return ConeCase.ZERO
    return ConeCase.OPEN


# ---------------------------------------------------------------------------
# Newton machinery
# ---------------------------------------------------------------------------


@dataclass
class SolveOptions:
    grad_tol: float = 1e-11
    max_newton: int = 400
    penalty_init: float = 10.0
    penalty_factor: float = 10.0
    max_rounds: int = 14
    equiv_target: float = 1e-9
    rho_target: float = 1e-9
    tangent_grad_target: float = 1e-9
    theta_guard: float = 250.0
    crit_tol: float = CRITICALITY_TOL


def _theta_domain_ok(mu: ProjectedFamily, theta: np.ndarray, guard: float) -> bool:
    if float(np.max(np.abs(theta))) > guard:
        return False
    if mu.finite_support:
        return True
    return mu.in_domain(np.exp(theta))


def _newton(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    theta0: np.ndarray,
    domain_ok: Callable[[np.ndarray], bool],
    grad_tol: float,
    max_iter: int,
) -> tuple[np.ndarray, str, int]:
    """Damped Newton descent; returns (theta, status, iterations).

    status is 'converged' (gradient small), 'wall' (line search blocked,
    typically at a domain boundary), or 'maxiter'.
    """
    theta = theta0.copy()
    value, grad, hess = fun(theta)
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= grad_tol:
            return theta, "converged", it
        step_dir = None
        ridge = 0.0
        for _ in range(6):
            try:
                h = hess + ridge * np.eye(len(theta))
                np.linalg.cholesky(h)
                step_dir = np.linalg.solve(h, -grad)
                break
            except np.linalg.LinAlgError:
                scale = max(float(np.trace(np.abs(hess))) / len(theta), 1e-8)
                ridge = max(ridge * 100.0, 1e-10 * scale)
        if step_dir is None or float(grad @ step_dir) >= 0:
            step_dir = -grad / max(gnorm, 1e-300)
        slope = float(grad @ step_dir)
        step = 1.0
        moved = False
        while step >= 1e-14:
            cand = theta + step * step_dir
            if domain_ok(cand):
                try:
                    cv, cg, ch = fun(cand)
                except (FamilyError, OverflowError, FloatingPointError):
                    cv = None
                if cv is not None and cv <= value + 1e-4 * step * slope:
                    theta, value, grad, hess = cand, cv, cg, ch
                    moved = True
                    break
            step *= 0.5
        if not moved:
            return theta, "wall", it
    return theta, "maxiter", max_iter


def _tangent_gradient_norm(
    mu: ProjectedFamily, X: np.ndarray, theta: np.ndarray, B: np.ndarray
) -> float:
    """Norm of grad f_X projected on the tangent space of the constraint set.

    The constraint manifold is {theta : B' chi(theta) = const}; its tangent
    space is the kernel of B'(M_theta - I).  With no constraint (B empty)
    this is the plain gradient norm.
    """
    _, grad = f_and_grad(mu, X, theta)
    if B.shape[1] == 0:
        return float(np.linalg.norm(grad))
    jc = B.T @ chi_jacobian(mu, theta)
    _, s, vt = np.linalg.svd(jc)
    cut = max(jc.shape) * np.finfo(float).eps * (s[0] if len(s) else 1.0)
    rows = vt[: int(np.sum(s > cut))]
    tangential = grad - rows.T @ (rows @ grad)
    return float(np.linalg.norm(tangential))


def _solve_metrics(
    mu: ProjectedFamily,
    X: np.ndarray,
    theta: np.ndarray,
    B: np.ndarray,
    chibar: np.ndarray,
) -> dict[str, float]:
    cval = B.T @ (chi(mu, theta) - chibar) if B.shape[1] else np.zeros(0)
    return {
        "rho_gap": abs(rho_at(mu, theta) - 1.0),
        "equivalence_residual": float(np.linalg.norm(cval)),
        "gradient_norm": _tangent_gradient_norm(mu, X, theta, B),
    }


def _check_solver_inputs(mu: ProjectedFamily, X: np.ndarray) -> None:
    if np.any(X <= 0):
        raise FamilyError("direction X must have positive entries")
    report = validate(mu)
    required = ("finite", "nondegenerate", "nonlocalized", "irreducible")
    bad = [name for name in required if not report.flag(name)]
    if bad:
        raise FamilyError(f"family fails the standing hypotheses: {', '.join(bad)}")


def _solve_constrained(
    mu: ProjectedFamily,
    B: np.ndarray,
    chibar: np.ndarray,
    X: np.ndarray,
    starts: Sequence[Callable[[], np.ndarray | None]],
    opts: SolveOptions,
) -> tuple[np.ndarray, list[dict]]:
    """Penalized maximization of f_X over {theta : B'(chi - chibar) = 0}.

    ``starts`` are lazy providers; later ones (typically the subcritical
    companion) are only evaluated when earlier starts fail.
    """
    K = mu.K
    eye = np.eye(K)
    constrained = B.shape[1] > 0
    trajectory: list[dict] = []

    def domain_ok(th: np.ndarray) -> bool:
        return _theta_domain_ok(mu, th, opts.theta_guard)

    def objective(w: float) -> Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]:
        def fun(th: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
            ch = chi(mu, th)
            means, covs = tilted_moments(mu, th, with_cov=True)
            jac = means - eye
            if constrained:
                cval = B.T @ (ch - chibar)
                bc = B @ cval
                jc = B.T @ jac
                val = float(X @ ch) + 0.5 * w * float(cval @ cval)
                grad = jac.T @ X + w * (jac.T @ bc)
                coeff = X + w * bc
                hess = np.einsum("k,kij->ij", coeff, covs) + w * jc.T @ jc
                try:
                    np.linalg.cholesky(hess + 1e-14 * np.eye(K))
                except np.linalg.LinAlgError:
                    # Gauss-Newton fallback keeps the model convex.
                    hess = np.einsum("k,kij->ij", X, covs) + w * jc.T @ jc
                return val, grad, hess
            val = float(X @ ch)
            grad = jac.T @ X
            hess = np.einsum("k,kij->ij", X, covs)
            return val, grad, hess

        return fun

    for provide_start in starts:
        start = provide_start()
        if start is None:
            continue
        theta = np.asarray(start, dtype=float).copy()
        if not domain_ok(theta):
            continue
        penalty = opts.penalty_init
        stuck = 0
        prev_theta: np.ndarray | None = None
        for rnd in range(opts.max_rounds if constrained else 1):
            theta, status, iters = _newton(
                objective(penalty), theta, domain_ok, opts.grad_tol, opts.max_newton
            )
            metrics = _solve_metrics(mu, X, theta, B, chibar)
            trajectory.append(
                {
                    "round": rnd,
                    "penalty": penalty,
                    "theta": theta.tolist(),
                    "tnorm": float(np.linalg.norm(theta)),
                    "value": -float(X @ chi(mu, theta)),
                    "equiv": metrics["equivalence_residual"],
                    "rho_gap": metrics["rho_gap"],
                    "status": status,
                    "newton_iters": iters,
                }
            )
            if (
                metrics["equivalence_residual"] <= opts.equiv_target
                and metrics["rho_gap"] <= opts.rho_target
                and metrics["gradient_norm"] <= opts.tangent_grad_target
            ):
                return theta, trajectory
            if status == "wall" and not constrained:
                break
            # Ramping the penalty cannot help once the iterate is pinned
            # against the domain wall; give up on this start after two
            # stagnant rounds.
            if status == "wall" and prev_theta is not None and np.allclose(
                theta, prev_theta, rtol=0, atol=1e-13
            ):
                stuck += 1
                if stuck >= 2:
                    break
            else:
                stuck = 0
            prev_theta = theta.copy()
            penalty *= opts.penalty_factor
    raise SolverDivergence(
        "constrained ascent did not reach the critical equivalence targets "
        "(objective unbounded or blocked at the domain boundary)",
        trajectory,
    )


def _result_from_theta(
    mu: ProjectedFamily,
    gamma: GammaConstraint,
    X: np.ndarray,
    theta: np.ndarray,
    B: np.ndarray,
    chibar: np.ndarray,
    cone_case: ConeCase,
    stats: dict,
    lam_tol: float = 1e-6,
) -> CriticalSolveResult:
    means, _ = tilted_moments(mu, theta)
    data = perron_vectors(means, crit_tol=max(CRITICALITY_TOL, 1e-7))
    x_star = data.a
    metrics = _solve_metrics(mu, X, theta, B, chibar)
    gx = gamma.matrix @ X
    gxs = gamma.matrix @ x_star
    if cone_case is ConeCase.ZERO:
        lam = 0.0
        # The equivalence class is the singleton {theta_bar}: no feasible
        # directions, so the constrained gradient vanishes by convention.
        metrics["gradient_norm"] = 0.0
    else:
        lam = float(gx @ gxs) / float(gx @ gx)
        fit = float(np.linalg.norm(gxs - lam * gx))
        if lam <= 0:
            raise SolverDivergence(
                f"solution lies on the opposite cone branch (lambda={lam:.3e} <= 0)",
                stats.get("trajectory", []),
            )
        if fit > lam_tol:
            raise SolverDivergence(
                f"gamma-image of the solved direction is not proportional to "
                f"gamma X (residual {fit:.3e})",
                stats.get("trajectory", []),
            )
        stats = dict(stats, lambda_fit_residual=fit)
    return CriticalSolveResult(
        theta_star=theta,
        X_star=x_star,
        lam=lam,
        objective=-float(X @ chi(mu, theta)),
        residuals=metrics,
        cone_case=cone_case,
        stats=stats,
    )


def find_critical_equivalent(
    mu: ProjectedFamily,
    gamma: GammaConstraint,
    theta_bar: Sequence[float] | None = None,
    X: Sequence[float] | None = None,
    opts: SolveOptions | None = None,
) -> CriticalSolveResult:
    """Critical tilting gamma-equivalent to theta_bar, in the direction class of X.

    Maximizes f_X over the equivalence class of theta_bar.  On success the
    result carries |rho - 1|, the equivalence residual and the tangent
    gradient norm; lambda > 0 fits gamma X_star = lambda gamma X.  When
    theta_bar is already critical with gamma X_bar = 0 the class is the
    singleton {theta_bar} (ZeroCone) and theta_bar is returned unchanged.
    """
    opts = opts or SolveOptions()
    K = mu.K
    theta_bar = np.zeros(K) if theta_bar is None else np.asarray(theta_bar, dtype=float)
    X = np.full(K, 1.0 / K) if X is None else np.asarray(X, dtype=float)
    if gamma.K != K:
        raise FamilyError("gamma column count must equal the number of types")
    _check_solver_inputs(mu, X)

    B = gamma.kernel_basis()
    chibar = chi(mu, theta_bar)
    cone = cone_membership(mu, gamma, theta_bar, crit_tol=opts.crit_tol)
    if cone is ConeCase.ZERO:
        return _result_from_theta(
            mu, gamma, X, theta_bar, B, chibar, ConeCase.ZERO, {"note": "zero cone"}
        )
    if float(np.linalg.norm(gamma.matrix @ X)) <= 1e-12:
        raise FamilyError("gamma X = 0: pick a direction not annihilated by gamma")

    def fallback_q() -> np.ndarray | None:
        try:
            q = subcritical_companion(mu)
        except FamilyError:
            return None
        return q if float(np.linalg.norm(q - theta_bar)) > 1e-12 else None

    theta, trajectory = _solve_constrained(
        mu, B, chibar, X, [lambda: theta_bar, fallback_q], opts
    )
    return _result_from_theta(
        mu,
        gamma,
        X,
        theta,
        B,
        chibar,
        ConeCase.OPEN,
        {"trajectory": trajectory, "rounds": len(trajectory)},
    )


def critical_for_direction(
    mu: ProjectedFamily,
    X: Sequence[float],
    start: Sequence[float] | None = None,
    opts: SolveOptions | None = None,
) -> CriticalSolveResult:
    """Unconstrained minimizer of X' chi; critical with direction parallel to X.

    Divergence means the direction is not an achievable asymptotic
    direction of any critical tilting.
    """
    opts = opts or SolveOptions()
    Xv = np.asarray(X, dtype=float)
    _check_solver_inputs(mu, Xv)
    K = mu.K
    B = np.zeros((K, 0))
    chibar = np.zeros(K)
    starts: list[Callable[[], np.ndarray | None]] = []
    if start is not None:
        start_arr = np.asarray(start, dtype=float)
        starts.append(lambda: start_arr)
    starts.append(lambda: np.zeros(K))

    def fallback_q() -> np.ndarray | None:
        try:
            return subcritical_companion(mu)
        except FamilyError:
            return None

    starts.append(fallback_q)
    theta, trajectory = _solve_constrained(mu, B, chibar, Xv, starts, opts)
    gamma = GammaConstraint(np.eye(K, dtype=int))
    result = _result_from_theta(
        mu, gamma, Xv, theta, B, chibar, ConeCase.OPEN,
        {"trajectory": trajectory},
    )
    direction_gap = float(np.abs(result.X_star - Xv / Xv.sum()).sum())
    if direction_gap > 1e-6:
        raise SolverDivergence(
            f"solved direction differs from the requested one by {direction_gap:.3e}",
            trajectory,
        )
    return result


# ---------------------------------------------------------------------------
# Boundary tracing and accessible directions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPoint:
    t: float
    theta: np.ndarray
    chi_value: np.ndarray


@dataclass(frozen=True)
class BoundaryTrace:
    points: tuple[BoundaryPoint, ...]
    failures: tuple[tuple[float, str], ...]


def _direction_interval(zeta: OrderedFamily, budget: int = 10) -> tuple[float, float]:
    """Open interval of first-coordinate shares spanned by accessible directions."""
    dirs = accessible_directions(zeta, max_vertices=budget)
    shares = sorted(v[0] / sum(v) for v in dirs if sum(v) > 0)
    if len(shares) < 2 or shares[0] == shares[-1]:
        raise FamilyError("could not bracket the accessible directions at this budget")
    return shares[0], shares[-1]


def trace_boundary(
    mu: ProjectedFamily,
    n_points: int,
    zeta: OrderedFamily | None = None,
    t_range: tuple[float, float] | None = None,
    margin: float = 1e-3,
    opts: SolveOptions | None = None,
    threads: int = 1,
) -> BoundaryTrace:
    """Trace the boundary of the chi image of a 2-type family.

    For each direction X(t) = (t, 1 - t) the boundary point is
    chi(theta*) with theta* the critical tilting of direction X(t).
    The t grid stays strictly inside the cone of achievable directions:
    by default it spans the enumerated accessible directions (shrunk by
    ``margin``), since boundary directions make the objective unbounded.
    """
    if mu.K != 2:
        raise FamilyError("boundary tracing is defined for 2-type families")
    if n_points < 1:
        raise FamilyError("need at least one grid point")
    if t_range is None:
        if zeta is None:
            t_range = (0.0, 1.0)
        else:
            t_range = _direction_interval(zeta)
    lo, hi = t_range
    width = hi - lo
    lo, hi = lo + margin * max(width, 1e-9), hi - margin * max(width, 1e-9)
    if n_points == 1:
        grid = [0.5 * (lo + hi)]
    else:
        grid = [lo + (hi - lo) * i / (n_points - 1) for i in range(n_points)]

    def solve_point(t: float) -> BoundaryPoint:
        res = critical_for_direction(mu, np.array([t, 1.0 - t]), opts=opts)
        return BoundaryPoint(t=t, theta=res.theta_star, chi_value=chi(mu, res.theta_star))

    points: list[BoundaryPoint] = []
    failures: list[tuple[float, str]] = []
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda t: _try_point(solve_point, t), grid))
    else:
        outcomes = [_try_point(solve_point, t) for t in grid]
    for t, outcome in zip(grid, outcomes):
        if isinstance(outcome, BoundaryPoint):
            points.append(outcome)
        else:
            failures.append((t, outcome))
    return BoundaryTrace(points=tuple(points), failures=tuple(failures))


def _try_point(solve: Callable[[float], BoundaryPoint], t: float) -> BoundaryPoint | str:
    try:
        return solve(t)
    except (SolverDivergence, FamilyError) as exc:
        return f"{type(exc).__name__}: {exc}"


def accessible_directions(
    zeta: OrderedFamily, max_vertices: int = 12, hard_cap: int = 16
) -> set[tuple[int, ...]]:
    """Non-root type-count vectors of small trees witnessing a direction.

    A witness tree has positive probability, at least two vertices, a
    root whose type can be childless, and a leaf of the root's type.
    """
    from .trees import enumerate_trees

    if max_vertices > hard_cap:
        raise FamilyError(f"enumeration budget {max_vertices} exceeds the cap {hard_cap}")
    mu = project(zeta)
    childless = {
        i
        for i in range(zeta.K)
        if float(mu.masses(i).get((0,) * zeta.K, 0)) > 0
    }
    out: set[tuple[int, ...]] = set()
    for root in sorted(childless):
        for tree, prob in enumerate_trees(zeta, root, max_vertices):
            if tree.size < 2 or float(prob) <= 0:
                continue
            if not any(
                tree.child_count[u] == 0 and tree.types[u] == root
                for u in range(tree.size)
            ):
                continue
            counts = list(tree.type_counts())
            counts[root] -= 1  # exclude the root itself
            out.add(tuple(counts))
    return out
