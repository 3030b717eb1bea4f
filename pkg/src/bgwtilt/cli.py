"""Command-line surface: validation, solving, tracing, sampling, reports.

Machine-readable results are JSON, plot data is CSV, figures are SVG
(rendered with matplotlib, deterministic ids and no timestamps).  Every
command writes a run manifest recording its arguments, seeds and output
hashes; ``bgwtilt rerun`` replays a manifest and must reproduce every
output bit-exactly.

Exit codes: 0 success, 1 property or criterion failed, 2 input error,
3 solver divergence.
"""

from __future__ import annotations

import functools
import hashlib
from collections import Counter
import json
import math
import sys
import time
from pathlib import Path

import click
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .casebook import (
    boundary_parametrization,
    non_entire_control,
    non_entire_family,
    non_entire_scan,
    preimage_delta,
    preimage_family,
    preimage_tilt_vectors,
    two_type_example,
)
from .chigeom import (
    GammaConstraint,
    SolverDivergence,
    chi,
    find_critical_equivalent,
    trace_boundary,
)
from .families import (
    FamilyError,
    OrderedFamily,
    ProjectedFamily,
    family_from_config,
    family_to_config,
    tilt_ordered,
    validate,
)
from .spectral import SpectralError
from .trees import (
    KestenPrefix,
    MultitypeTree,
    Overflow,
    SampleSpec,
    TreeSamplingError,
    ball,
    conditioned_sampler,
    empirical_tv,
    kesten_forest,
    sample_forest,
    tree_records,
)

plt.rcParams["svg.hashsalt"] = "bgwtilt"

_FLAGS = ("entire", "finite", "nondegenerate", "nonlocalized", "irreducible", "aperiodic")


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (FamilyError, SpectralError, json.JSONDecodeError, OSError) as exc:
            _fail(str(exc), 2)
        except TreeSamplingError as exc:
            _fail(str(exc), 1)
        except SolverDivergence as exc:
            click.echo("solver divergence:", err=True)
            click.echo(exc.summary(), err=True)
            sys.exit(3)

    return wrapper


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [float(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value") and obj.__class__.__name__ == "ConeCase":
        return obj.value
    return obj


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    def cell(v) -> str:
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _save_figure(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    out_dir: Path,
    command: str,
    argv: list[str],
    params: dict,
    seeds: list[int],
    outputs: list[Path],
    t0: float,
) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "argv": argv,
        "params": _jsonable(params),
        "seeds": seeds,
        "outputs": [
            {"name": p.name, "sha256": _sha256(p)} for p in sorted(outputs)
        ],
        "wall_time_s": time.time() - t0,
    }
    path = out_dir / f"{command}.manifest.json"
    _write_json(path, manifest)
    return path


# ---------------------------------------------------------------------------
# Family loading
# ---------------------------------------------------------------------------


def _load_family(arg: str) -> tuple[OrderedFamily | None, ProjectedFamily, dict, str]:
    """Load a family from a JSON path or a builtin: name."""
    if arg.startswith("builtin:"):
        name = arg.split(":", 1)[1]
        if name == "two-type":
            zeta, mu = two_type_example()
            return zeta, mu, family_to_config(zeta), arg
        if name.startswith("preimage-"):
            mu = preimage_family(int(name.split("-", 1)[1]))
            return None, mu, family_to_config(mu=mu), arg
        raise FamilyError(f"unknown builtin family {name!r}")
    path = Path(arg)
    doc = json.loads(path.read_text())
    zeta, mu = family_from_config(doc)
    return zeta, mu, doc, str(path.resolve())


def _need_ordered(zeta: OrderedFamily | None) -> OrderedFamily:
    if zeta is None:
        raise FamilyError("this command samples trees, so the family needs word atoms")
    return zeta


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return np.array([[int(v) for v in r.split()] for r in rows])


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def _family_echo(doc: dict, source: str) -> dict:
    blob = json.dumps(doc, sort_keys=True).encode()
    return {
        "source": source,
        "config": doc,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Exponential tiltings of multitype branching offspring families."""


@main.command("validate")
@click.argument("family")
@click.option("--require", default="all", show_default=True,
              help="Comma list of flags that must hold, or 'all'.")
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_validate(family: str, require: str, out_dir: str) -> None:
    """Check the standing structural hypotheses of a family."""
    t0 = time.time()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zeta, mu, doc, source = _load_family(family)
    report = validate(mu)
    for name in _FLAGS:
        click.echo(f"{name:14s} {'ok' if report.flag(name) else 'FAIL'}")
    if report.extinction_probs is not None:
        click.echo("extinction     " + " ".join(repr(float(p)) for p in report.extinction_probs))
    payload = {
        "family": _family_echo(doc, source),
        "flags": {name: report.flag(name) for name in _FLAGS},
        "extinction_probs": report.extinction_probs,
        "reasons": dict(report.reasons),
    }
    report_path = out / "validate.json"
    _write_json(report_path, payload)
    _write_manifest(out, "validate", ["validate", source, "--require", require],
                    {"family": payload["family"], "require": require}, [], [report_path], t0)
    wanted = _FLAGS if require == "all" else tuple(w.strip() for w in require.split(","))
    unknown = [w for w in wanted if w not in _FLAGS]
    if unknown:
        raise click.UsageError(f"unknown flags: {', '.join(unknown)}")
    if not all(report.flag(name) for name in wanted):
        sys.exit(1)


@main.command("find-critical")
@click.argument("family")
@click.option("--gamma", required=True, help="Integer rows, e.g. '1 1' or '1 0; 0 1'.")
@click.option("--direction", default=None, help="Positive direction X, default uniform.")
@click.option("--theta-bar", default=None, help="Reference tilt vector, default 0.")
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_find_critical(family: str, gamma: str, direction: str | None,
                      theta_bar: str | None, out_dir: str) -> None:
    """Solve for the critical tilting equivalent to the reference."""
    t0 = time.time()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zeta, mu, doc, source = _load_family(family)
    gc = GammaConstraint(_parse_matrix(gamma))
    X = _parse_vector(direction) if direction else None
    tb = _parse_vector(theta_bar) if theta_bar else None
    res = find_critical_equivalent(mu, gc, theta_bar=tb, X=X)
    payload = {
        "family": _family_echo(doc, source),
        "gamma": gc.matrix.tolist(),
        "direction": X,
        "theta_bar": tb,
        "theta_star": res.theta_star,
        "X_star": res.X_star,
        "lambda": res.lam,
        "objective": res.objective,
        "residuals": dict(res.residuals),
        "cone_case": res.cone_case.value,
    }
    out_path = out / "critical.json"
    _write_json(out_path, payload)
    click.echo(f"theta* = {res.theta_star}  cone={res.cone_case.value}")
    click.echo(f"residuals: {dict(res.residuals)}")
    argv = ["find-critical", source, "--gamma", gamma]
    if direction:
        argv += ["--direction", direction]
    if theta_bar:
        argv += ["--theta-bar", theta_bar]
    _write_manifest(out, "find-critical", argv,
                    {"family": payload["family"], "gamma": gamma,
                     "direction": direction, "theta_bar": theta_bar},
                    [], [out_path], t0)


@main.command("boundary")
@click.argument("family")
@click.option("--points", default=50, show_default=True)
@click.option("--closed-form-check", is_flag=True,
              help="Also compare against the two-type example's closed-form boundary curve.")
@click.option("--threads", default=1, show_default=True, envvar="BGWTILT_THREADS")
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_boundary(family: str, points: int, closed_form_check: bool, threads: int,
                 out_dir: str) -> None:
    """Trace the boundary of the image of the tilt map (2-type families)."""
    t0 = time.time()
    if points < 1:
        raise click.UsageError("--points must be at least 1")
    if threads < 1:
        raise click.UsageError("--threads must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zeta, mu, doc, source = _load_family(family)
    if mu.K != 2:
        raise click.UsageError("boundary tracing needs a 2-type family")
    trace = trace_boundary(mu, points, zeta=zeta, threads=threads)
    csv_path = out / "boundary.csv"
    _write_csv(
        csv_path,
        ["t", "theta1", "theta2", "chi1", "chi2"],
        [
            [p.t, float(p.theta[0]), float(p.theta[1]),
             float(p.chi_value[0]), float(p.chi_value[1])]
            for p in trace.points
        ],
    )
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = [float(p.chi_value[0]) for p in trace.points]
    ys = [float(p.chi_value[1]) for p in trace.points]
    ax.plot(xs, ys, "o-", ms=3, lw=1)
    ax.set_xlabel("chi_1")
    ax.set_ylabel("chi_2")
    ax.set_title("image boundary of the tilt map")
    svg_path = out / "boundary.svg"
    _save_figure(fig, svg_path)
    outputs = [csv_path, svg_path]

    if closed_form_check:
        rows = []
        worst = 0.0
        for p in trace.points:
            s, gap = _nearest_parametrized(tuple(p.chi_value))
            worst = max(worst, gap)
            cx, cy = boundary_parametrization(s)
            rows.append([s, cx, cy, float(p.chi_value[0]), float(p.chi_value[1]), gap])
        cmp_path = out / "boundary-closedform.csv"
        _write_csv(cmp_path,
                   ["s", "chi1_closed", "chi2_closed", "chi1_traced", "chi2_traced", "gap"],
                   rows)
        outputs.append(cmp_path)
        click.echo(f"max closed-form gap: {worst!r}")
    click.echo(f"traced {len(trace.points)} points, {len(trace.failures)} failures")
    argv = ["boundary", source, "--points", str(points), "--threads", str(threads)]
    if closed_form_check:
        argv.append("--closed-form-check")
    _write_manifest(out, "boundary", argv,
                    {"family": _family_echo(doc, source), "points": points,
                     "closed_form_check": closed_form_check,
                     "failures": [list(f) for f in trace.failures]},
                    [], outputs, t0)


def _nearest_parametrized(
    point: tuple[float, float], s_lo: float = -16.0, coarse: int = 3200
) -> tuple[float, float]:
    """Nearest point on the closed-form boundary curve: (s, distance)."""
    s_hi = math.log(0.5) - 1e-9

    def dist2(s: float) -> float:
        x, y = boundary_parametrization(s)
        return (x - point[0]) ** 2 + (y - point[1]) ** 2

    best_s = min(
        (s_lo + (s_hi - s_lo) * i / coarse for i in range(coarse + 1)), key=dist2
    )
    lo = max(s_lo, best_s - (s_hi - s_lo) / coarse)
    hi = min(s_hi, best_s + (s_hi - s_lo) / coarse)
    for _ in range(200):
        m1 = lo + 0.382 * (hi - lo)
        m2 = lo + 0.618 * (hi - lo)
        if dist2(m1) < dist2(m2):
            hi = m2
        else:
            lo = m1
    s = 0.5 * (lo + hi)
    return s, math.sqrt(dist2(s))


def _serialize_trees(
    path: Path, items: list[MultitypeTree | KestenPrefix | Overflow]
) -> None:
    lines: list[str] = []
    for n, item in enumerate(items):
        if isinstance(item, Overflow):
            lines.append(f"# tree {n} overflow cap={item.cap}")
            continue
        if isinstance(item, KestenPrefix):
            spine = ",".join(str(i) for i in item.spine)
            trunc = ",".join(str(i) for i in item.truncated)
            lines.append(
                f"# tree {n} size={item.tree.size} depth={item.depth} "
                f"spine={spine} truncated={trunc}"
            )
            tree = item.tree
        else:
            lines.append(f"# tree {n} size={item.size}")
            tree = item
        lines.extend(f"{i} {p} {t}" for i, p, t in tree_records(tree))
    path.write_text("\n".join(lines) + "\n")


@main.command("sample")
@click.argument("family")
@click.option("--samples", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--root-type", default=1, show_default=True, help="1-based root type.")
@click.option("--gamma", default=None, help="Conditioning rows; requires --g.")
@click.option("--g", "target", default=None, help="Conditioning target vector.")
@click.option("--cap", default=100000, show_default=True)
@click.option("--attempts", default=1000000, show_default=True)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_sample(family: str, samples: int, seed: int, root_type: int,
               gamma: str | None, target: str | None, cap: int, attempts: int,
               out_dir: str) -> None:
    """Sample trees, optionally conditioned on gamma N(T) = g."""
    t0 = time.time()
    if samples < 1:
        raise click.UsageError("--samples must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zeta_opt, mu, doc, source = _load_family(family)
    zeta = _need_ordered(zeta_opt)
    if not 1 <= root_type <= zeta.K:
        raise click.UsageError(f"--root-type must be in 1..{zeta.K}")
    spec = SampleSpec(seed=seed, cap=cap, attempts=attempts)
    if (gamma is None) != (target is None):
        raise click.UsageError("--gamma and --g go together")
    if gamma is not None:
        gc = GammaConstraint(_parse_matrix(gamma),
                             target=np.array([int(v) for v in target.replace(",", " ").split()]))
        it = conditioned_sampler(zeta, gc, root_type - 1, spec)
        items: list = [next(it) for _ in range(samples)]
    else:
        items = sample_forest(zeta, root_type - 1, samples, spec)
    trees_path = out / "trees.txt"
    _serialize_trees(trees_path, items)
    n_overflow = sum(isinstance(t, Overflow) for t in items)
    click.echo(f"wrote {samples} trees ({n_overflow} overflowed)")
    argv = ["sample", source, "--samples", str(samples), "--seed", str(seed),
            "--root-type", str(root_type), "--cap", str(cap), "--attempts", str(attempts)]
    if gamma is not None:
        argv += ["--gamma", gamma, "--g", target]
    _write_manifest(out, "sample", argv,
                    {"family": _family_echo(doc, source), "samples": samples,
                     "root_type": root_type, "gamma": gamma, "g": target,
                     "cap": cap, "attempts": attempts, "overflows": n_overflow},
                    [seed], [trees_path], t0)


@main.command("kesten")
@click.argument("family")
@click.option("--depth", required=True, type=int)
@click.option("--samples", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--root-type", default=1, show_default=True)
@click.option("--cap", default=100000, show_default=True)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_kesten(family: str, depth: int, samples: int, seed: int, root_type: int,
               cap: int, out_dir: str) -> None:
    """Sample spine-decomposed prefixes of a critical family."""
    t0 = time.time()
    if samples < 1:
        raise click.UsageError("--samples must be positive")
    if depth < 0:
        raise click.UsageError("--depth must be nonnegative")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zeta_opt, mu, doc, source = _load_family(family)
    zeta = _need_ordered(zeta_opt)
    if not 1 <= root_type <= zeta.K:
        raise click.UsageError(f"--root-type must be in 1..{zeta.K}")
    spec = SampleSpec(seed=seed, cap=cap)
    prefixes = kesten_forest(zeta, root_type - 1, depth, samples, spec)
    trees_path = out / "kesten.txt"
    _serialize_trees(trees_path, prefixes)
    click.echo(f"wrote {samples} prefixes of depth {depth}")
    _write_manifest(out, "kesten",
                    ["kesten", source, "--depth", str(depth), "--samples", str(samples),
                     "--seed", str(seed), "--root-type", str(root_type), "--cap", str(cap)],
                    {"family": _family_echo(doc, source), "depth": depth,
                     "samples": samples, "root_type": root_type, "cap": cap},
                    [seed], [trees_path], t0)


@main.command("locallimit")
@click.argument("family")
@click.option("--gamma", required=True)
@click.option("--targets", default="20,40,80", show_default=True,
              help="Comma-separated scalar targets (rank-1 gamma).")
@click.option("--r", "radius", default=2, show_default=True)
@click.option("--samples", default=10000, show_default=True)
@click.option("--kesten-samples", default=40000, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--direction", default=None)
@click.option("--root-type", default=1, show_default=True)
@click.option("--cap", default=100000, show_default=True,
              help="Vertex cap per attempt; rejection conditions on |T| <= cap.")
@click.option("--attempts", default=10 ** 9, show_default=True)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_locallimit(family: str, gamma: str, targets: str, radius: int, samples: int,
                   kesten_samples: int, seed: int, direction: str | None,
                   root_type: int, cap: int, attempts: int, out_dir: str) -> None:
    """Local-limit proxy: conditioned-tree balls against Kesten-prefix balls.

    Finds the critical gamma-equivalent tilting, samples conditioned trees
    from it at each target, and reports total-variation distances of the
    radius-r ball laws against sampled Kesten prefixes.
    """
    t0 = time.time()
    if samples < 1 or kesten_samples < 1:
        raise click.UsageError("--samples and --kesten-samples must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    zeta_opt, mu, doc, source = _load_family(family)
    zeta = _need_ordered(zeta_opt)
    if not 1 <= root_type <= zeta.K:
        raise click.UsageError(f"--root-type must be in 1..{zeta.K}")
    gmat = _parse_matrix(gamma)
    if gmat.shape[0] != 1:
        raise click.UsageError("the local-limit pipeline takes a single gamma row")
    gc = GammaConstraint(gmat)
    X = _parse_vector(direction) if direction else None
    res = find_critical_equivalent(mu, gc, X=X)
    zc = tilt_ordered(zeta, res.theta_star)
    glist = [int(v) for v in targets.split(",")]

    kesten_balls = [
        ball(p, radius)
        for p in kesten_forest(zc, root_type - 1, radius, kesten_samples,
                               SampleSpec(seed=seed + 1))
    ]
    rows = []
    dist_paths = []
    row_min = int(gmat[0].min())
    for g in sorted(glist):
        cond = GammaConstraint(gmat, target=np.array([g]))
        # When every row entry is >= 1 the tree size is bounded by g, so a
        # tight cap is safe; otherwise fall back to the user cap.
        g_cap = g // row_min + 1 if row_min >= 1 else cap
        spec = SampleSpec(seed=seed, cap=min(cap, g_cap), attempts=attempts)
        it = conditioned_sampler(zc, cond, root_type - 1, spec)
        balls = [ball(next(it), radius) for _ in range(samples)]
        tv = empirical_tv(balls, kesten_balls)
        rows.append([g, tv, samples, kesten_samples])
        ca, cb = Counter(balls), Counter(kesten_balls)
        dist_path = out / f"balls-g{g}.csv"
        _write_csv(
            dist_path,
            ["signature", "freq_a", "freq_b"],
            [
                [sig, ca[sig] / samples, cb[sig] / kesten_samples]
                for sig in sorted(set(ca) | set(cb))
            ],
        )
        dist_paths.append(dist_path)
        click.echo(f"g={g}: tv={tv!r}")
    tv_path = out / "locallimit.csv"
    _write_csv(tv_path, ["g", "tv", "samples", "kesten_samples"], rows)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([r[0] for r in rows], [r[1] for r in rows], "o-")
    ax.set_xlabel("target size g")
    ax.set_ylabel(f"TV of radius-{radius} ball laws")
    ax.set_title("conditioned trees vs Kesten prefixes")
    svg_path = out / "locallimit.svg"
    _save_figure(fig, svg_path)
    result_path = out / "locallimit.json"
    _write_json(result_path, {
        "family": _family_echo(doc, source),
        "gamma": gmat.tolist(),
        "theta_star": res.theta_star,
        "residuals": dict(res.residuals),
        "radius": radius,
        "rows": [{"g": r[0], "tv": r[1]} for r in rows],
    })
    argv = ["locallimit", source, "--gamma", gamma, "--targets", targets,
            "--r", str(radius), "--samples", str(samples),
            "--kesten-samples", str(kesten_samples), "--seed", str(seed),
            "--root-type", str(root_type), "--cap", str(cap),
            "--attempts", str(attempts)]
    if direction:
        argv += ["--direction", direction]
    _write_manifest(out, "locallimit", argv,
                    {"family": _family_echo(doc, source), "gamma": gamma,
                     "targets": glist, "radius": radius, "samples": samples,
                     "kesten_samples": kesten_samples},
                    [seed, seed + 1],
                    [tv_path, svg_path, result_path] + dist_paths, t0)


@main.group("appendix")
def appendix() -> None:
    """Verification procedures for the two constructed example families."""


@appendix.command("a")
@click.option("--A", "a_param", required=True, type=float)
@click.option("--eps", required=True, type=float)
@click.option("--s-ladder", default="10,20,40", show_default=True)
@click.option("--grid-n", default=400, show_default=True)
@click.option("--solve", is_flag=True,
              help="Also run the critical-equivalent solver at theta-bar=(-s, s); "
                   "diverges (exit 3) when eps > 0 is large-s infeasible.")
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_appendix_a(a_param: float, eps: float, s_ladder: str, grid_n: int,
                   solve: bool, out_dir: str) -> None:
    """Scan the non-entire family for critical-equivalence obstructions."""
    t0 = time.time()
    if a_param <= 0 or eps < 0:
        raise click.UsageError("need --A > 0 and --eps >= 0")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ladder = [float(v) for v in s_ladder.split(",")]
    report = non_entire_scan(a_param, eps, s_ladder=ladder, grid_n=grid_n)
    csv_path = out / "scan.csv"
    _write_csv(csv_path, ["s", "theta1", "theta2", "residual"],
               [[r.s, r.theta1, r.theta2, r.residual] for r in report.rows])
    json_path = out / "scan.json"
    _write_json(json_path, {
        "A": report.A,
        "eps": report.eps,
        "per_s": {repr(s): dict(v) for s, v in sorted(report.per_s.items())},
        "bound_constant": report.bound_constant,
        "box": report.box,
        "disclaimer": report.disclaimer,
        "notes": dict(report.notes),
    })
    svg_path = out / "scan.svg"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ss = sorted(report.per_s)
    ax.plot(ss, [report.per_s[s]["min_residual"] for s in ss], "o-",
            label="min residual")
    ax.axhline(report.bound_constant / 3.0, ls="--", color="gray",
               label="admissible bound")
    ax.set_xlabel("s")
    ax.set_ylabel("|s/2 - theta1/6|")
    ax.set_yscale("log")
    ax.legend()
    _save_figure(fig, svg_path)
    outputs = [csv_path, json_path, svg_path]
    click.echo(f"evidence bound C/3 = {report.bound_constant / 3.0!r}; "
               f"all s exceed: {report.all_exceed}")
    click.echo(report.disclaimer)
    if eps == 0.0:
        res = non_entire_control(a_param, s=ladder[0])
        control_path = out / "control.json"
        _write_json(control_path, {
            "theta_star": res.theta_star,
            "residuals": dict(res.residuals),
            "lambda": res.lam,
        })
        outputs.append(control_path)
        click.echo(f"control solve converged: theta* = {res.theta_star}")
    argv = ["appendix", "a", "--A", repr(a_param), "--eps", repr(eps),
            "--s-ladder", s_ladder, "--grid-n", str(grid_n)]
    if solve:
        argv.append("--solve")
    _write_manifest(out, "appendix-a", argv,
                    {"A": a_param, "eps": eps, "s_ladder": ladder, "grid_n": grid_n,
                     "solve": solve},
                    [], outputs, t0)
    if solve and eps > 0.0:
        mu = non_entire_family(a_param, eps)
        gc = GammaConstraint(np.array([[6, 1]]))
        res = find_critical_equivalent(
            mu, gc, theta_bar=np.array([-ladder[0], ladder[0]]),
            X=np.array([0.5, 0.5]),
        )
        click.echo(f"solver unexpectedly converged: {res.theta_star}")


@appendix.command("b")
@click.option("--N", "n_pairs", required=True, type=int)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@_guard
def cmd_appendix_b(n_pairs: int, out_dir: str) -> None:
    """Enumerate the tilt vectors that collapse to zero under the tilt map."""
    t0 = time.time()
    if n_pairs < 3:
        raise click.UsageError("--N must be at least 3")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    delta = preimage_delta(n_pairs)
    vectors = preimage_tilt_vectors(n_pairs)
    mu = preimage_family(n_pairs)
    max_chi = max(float(np.max(np.abs(chi(mu, th)))) for th in vectors)
    csv_path = out / "preimages.csv"
    header = ["index"] + [f"theta{i + 1}" for i in range(2 * n_pairs)]
    _write_csv(csv_path, header,
               [[i] + [float(v) for v in th] for i, th in enumerate(vectors)])
    json_path = out / "preimages.json"
    _write_json(json_path, {
        "N": n_pairs,
        "K": 2 * n_pairs,
        "delta": delta,
        "count": len(vectors),
        "expected_count": math.comb(2 * n_pairs, n_pairs),
        "max_abs_chi": max_chi,
    })
    click.echo(f"delta = {delta!r}")
    click.echo(f"{len(vectors)} preimage vectors, max |chi|_inf = {max_chi!r}")
    _write_manifest(out, "appendix-b", ["appendix", "b", "--N", str(n_pairs)],
                    {"N": n_pairs}, [], [csv_path, json_path], t0)


@main.command("emit-family")
@click.argument("name")
@click.argument("dest", type=click.Path(dir_okay=False))
@_guard
def cmd_emit_family(name: str, dest: str) -> None:
    """Write a builtin family config ('two-type', 'preimage-N') to a file."""
    t0 = time.time()
    _, _, doc, _ = _load_family(f"builtin:{name}")
    dest_path = Path(dest)
    dest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {dest}")
    _write_manifest(dest_path.resolve().parent, "emit-family",
                    ["emit-family", name, str(dest_path.resolve())],
                    {"name": name}, [], [dest_path], t0)


@main.command("rerun")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_guard
def cmd_rerun(manifest: str, out_dir: str) -> None:
    """Re-execute a manifest; outputs must reproduce bit-exactly."""
    doc = json.loads(Path(manifest).read_text())
    argv = list(doc["argv"]) + ["--out-dir", out_dir]
    main.main(args=argv, standalone_mode=False)
    expected = {entry["name"]: entry["sha256"] for entry in doc["outputs"]}
    mismatched = [
        name
        for name, digest in expected.items()
        if _sha256(Path(out_dir) / name) != digest
    ]
    if mismatched:
        _fail(f"outputs differ from the manifest: {', '.join(mismatched)}", 1)
    click.echo(f"reproduced {len(expected)} outputs bit-exactly")


if __name__ == "__main__":
    main()
