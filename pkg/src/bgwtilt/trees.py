"""Sampling, exact enumeration and local comparison of multitype trees.

Trees are stored in depth-first preorder with explicit parent links and
child counts, which makes ball extraction and canonical encoding linear
time.  All samplers are deterministic functions of their inputs and a
64-bit seed (counter-based Philox streams), so runs reproduce bit-exactly.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .families import FamilyError, Mass, OrderedFamily, mean_matrix, project
from .spectral import classify, perron_vectors

if TYPE_CHECKING:  # pragma: no cover - only for annotations
    from .chigeom import GammaConstraint

ENUMERATION_BUDGET = 14

BallSignature = str


class TreeSamplingError(RuntimeError):
    """Sampling could not produce the requested output."""


@dataclass(frozen=True)
class MultitypeTree:
    """Rooted plane tree with type labels, nodes in depth-first preorder."""

    K: int
    types: tuple[int, ...]
    parent: tuple[int, ...]
    child_count: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.types)
        if not (len(self.parent) == len(self.child_count) == n) or n == 0:
            raise FamilyError("inconsistent tree arrays")
        if self.parent[0] != -1 or any(
            not (0 <= p < i) for i, p in enumerate(self.parent) if i > 0
        ):
            raise FamilyError("parents must precede children in preorder")
        if sum(self.child_count) != n - 1:
            raise FamilyError("child counts do not add up to the vertex count")

    @property
    def size(self) -> int:
        return len(self.types)

    def type_counts(self) -> tuple[int, ...]:
        """N(T): number of vertices of each type, root included."""
        counts = [0] * self.K
        for t in self.types:
            counts[t] += 1
        return tuple(counts)

    def counts_excluding_root(self) -> tuple[int, ...]:
        counts = list(self.type_counts())
        counts[self.types[0]] -= 1
        return tuple(counts)

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.size)]
        for i in range(1, self.size):
            out[self.parent[i]].append(i)
        return out

    def depths(self) -> list[int]:
        d = [0] * self.size
        for i in range(1, self.size):
            d[i] = d[self.parent[i]] + 1
        return d

    def encode(self, radius: int | None = None) -> BallSignature:
        """Canonical parenthesized preorder encoding, pruned below ``radius``."""
        kids = self.children()

        def rec(u: int, left: int | None) -> str:
            if left is not None and left == 0:
                return f"{self.types[u] + 1}()"
            inner = "".join(
                rec(v, None if left is None else left - 1) for v in kids[u]
            )
            return f"{self.types[u] + 1}({inner})"

        return rec(0, radius)


@dataclass(frozen=True)
class KestenPrefix:
    """Spine-decomposed tree truncated at a generation depth."""

    tree: MultitypeTree
    spine: tuple[int, ...]
    depth: int
    truncated: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.spine) != self.depth + 1:
            raise FamilyError("spine must carry one node per generation")
        if self.spine[0] != 0:
            raise FamilyError("spine must start at the root")
        for above, below in zip(self.spine, self.spine[1:]):
            if self.tree.parent[below] != above:
                raise FamilyError("spine nodes must form a root-started path")


@dataclass(frozen=True)
class SampleSpec:
    seed: int
    cap: int = 100_000
    attempts: int = 1_000_000

    def __post_init__(self) -> None:
        if self.cap < 1 or self.attempts < 1:
            raise FamilyError("cap and attempts must be at least 1")


@dataclass(frozen=True)
class Overflow:
    """Returned when a growing tree would exceed the vertex cap."""

    cap: int


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _tables(zeta: OrderedFamily) -> list[tuple[list[float], list[tuple[int, ...]]]]:
    """Per-type cumulative masses and words, in canonical atom order."""
    prep = []
    for law in zeta.atoms:
        cum: list[float] = []
        words: list[tuple[int, ...]] = []
        acc = 0.0
        for word, mass in law:
            acc += float(mass)
            cum.append(acc)
            words.append(word)
        cum[-1] = max(cum[-1], 1.0)  # guard the last bin against rounding
        prep.append((cum, words))
    return prep


def _philox(seed: int) -> np.random.Generator:
    """Counter-based stream keyed by the seed reduced to 64 bits."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & (2 ** 64 - 1))))


class _Uniforms:
    """Buffered uniforms from a Philox stream keyed by the seed."""

    def __init__(self, seed: int, chunk: int = 1 << 16):
        self._rng = _philox(seed)
        self._chunk = chunk
        self._buf: list[float] = self._rng.random(chunk).tolist()
        self._pos = 0

    def take(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(self._chunk).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _grow(
    prep: Sequence[tuple[list[float], list[tuple[int, ...]]]],
    root_type: int,
    cap: int,
    uni: _Uniforms,
) -> MultitypeTree | Overflow:
    types: list[int] = []
    parent: list[int] = []
    kc: list[int] = []
    stack: list[tuple[int, int]] = [(-1, root_type)]
    take = uni.take
    while stack:
        par, ty = stack.pop()
        idx = len(types)
        if idx >= cap:
            return Overflow(cap)
        types.append(ty)
        parent.append(par)
        cum, words = prep[ty]
        k = bisect_right(cum, take())
        if k >= len(words):
            k = len(words) - 1
        word = words[k]
        kc.append(len(word))
        for child in reversed(word):
            stack.append((idx, child))
    return MultitypeTree(
        K=len(prep), types=tuple(types), parent=tuple(parent), child_count=tuple(kc)
    )


def sample_tree(zeta: OrderedFamily, root_type: int, spec: SampleSpec) -> MultitypeTree | Overflow:
    """One branching tree; a deterministic function of (zeta, root_type, seed)."""
    if not 0 <= root_type < zeta.K:
        raise FamilyError(f"root type {root_type} outside 0..{zeta.K - 1}")
    return _grow(_tables(zeta), root_type, spec.cap, _Uniforms(spec.seed))


def sample_forest(
    zeta: OrderedFamily, root_type: int, n: int, spec: SampleSpec
) -> list[MultitypeTree | Overflow]:
    """n independent trees drawn from one seeded stream."""
    prep = _tables(zeta)
    uni = _Uniforms(spec.seed)
    return [_grow(prep, root_type, spec.cap, uni) for _ in range(n)]


def conditioned_sampler(
    zeta: OrderedFamily,
    gamma: "GammaConstraint",
    root_type: int,
    spec: SampleSpec,
) -> Iterator[MultitypeTree]:
    """Rejection sampler for trees with gamma N(T) = target.

    When every gamma entry is nonnegative the partial counts are monotone,
    so an attempt is abandoned as soon as a row overshoots its target.
    Attempts run in a count-only fast path; the rare accepted attempt is
    replayed from the same uniforms to rebuild the tree structure.

    Attempts that would exceed ``spec.cap`` vertices are rejected, so the
    sampled law is additionally conditioned on the tree fitting the cap;
    pick the cap from the gamma row when an exact bound matters.
    """
    if gamma.target is None:
        raise FamilyError("the conditioning needs a target vector g")
    if not 0 <= root_type < zeta.K:
        raise FamilyError(f"root type {root_type} outside 0..{zeta.K - 1}")
    rows = gamma.matrix.astype(int)
    monotone = bool(np.all(rows >= 0))
    prep = _tables(zeta)
    cums = [cum for cum, _ in prep]
    word_lists = [words for _, words in prep]
    # Children are pushed reversed so the stack pops them in sibling order;
    # the replay pass must consume uniforms in exactly this order.
    rev_words = [[w[::-1] for w in words] for words in word_lists]
    K = zeta.K
    nrows = rows.shape[0]
    gtup = tuple(int(v) for v in gamma.target)
    incr = [tuple(int(rows[r, t]) for r in range(nrows)) for t in range(K)]
    scalar = nrows == 1 and monotone
    inc1 = [int(rows[0, t]) for t in range(K)]
    g1 = gtup[0]
    cap = spec.cap

    rng = _philox(spec.seed)
    # An attempt draws at most cap uniforms; refill (discarding the tail,
    # which keeps the stream a deterministic function of the inputs) only
    # when fewer than that remain.
    chunk = max(1 << 16, 2 * (cap + 1))
    buf: list[float] = rng.random(chunk).tolist()
    pos = 0

    accepted = 0
    attempts = 0
    while attempts < spec.attempts:
        attempts += 1
        if pos + cap + 1 > len(buf):
            buf = rng.random(chunk).tolist()
            pos = 0
        start = pos
        stack = [root_type]
        size = 0
        matched = False
        if scalar:
            partial = 0
            while stack:
                ty = stack.pop()
                size += 1
                if size > cap:
                    break
                partial += inc1[ty]
                if partial > g1:
                    break
                cum = cums[ty]
                u = buf[pos]
                pos += 1
                k = 0
                last = len(cum) - 1
                while k < last and u >= cum[k]:
                    k += 1
                stack.extend(rev_words[ty][k])
            matched = not stack and size <= cap and partial == g1
        else:
            partial_v = [0] * nrows
            overshoot = False
            while stack:
                ty = stack.pop()
                size += 1
                if size > cap:
                    break
                inc = incr[ty]
                for r in range(nrows):
                    partial_v[r] += inc[r]
                    if monotone and partial_v[r] > gtup[r]:
                        overshoot = True
                if overshoot:
                    break
                cum = cums[ty]
                u = buf[pos]
                pos += 1
                k = bisect_right(cum, u)
                if k >= len(word_lists[ty]):
                    k = len(word_lists[ty]) - 1
                stack.extend(rev_words[ty][k])
            matched = not stack and size <= cap and tuple(partial_v) == gtup
        if matched:
            accepted += 1
            yield _replay(prep, root_type, buf, start, K)
    rate = accepted / attempts if attempts else 0.0
    raise TreeSamplingError(
        f"rejection budget of {spec.attempts} attempts exhausted; "
        f"acceptance rate so far {rate:.3e}"
    )


def _replay(
    prep,
    root_type: int,
    buf: Sequence[float],
    start: int,
    K: int,
) -> MultitypeTree:
    """Rebuild the structure of an accepted attempt from its uniforms."""
    types: list[int] = []
    parent: list[int] = []
    kc: list[int] = []
    stack: list[tuple[int, int]] = [(-1, root_type)]
    pos = start
    while stack:
        par, ty = stack.pop()
        idx = len(types)
        types.append(ty)
        parent.append(par)
        cum, words = prep[ty]
        k = bisect_right(cum, buf[pos])
        pos += 1
        if k >= len(words):
            k = len(words) - 1
        word = words[k]
        kc.append(len(word))
        for child in reversed(word):
            stack.append((idx, child))
    return MultitypeTree(
        K=K, types=tuple(types), parent=tuple(parent), child_count=tuple(kc)
    )


def sample_conditioned(
    zeta: OrderedFamily,
    gamma: "GammaConstraint",
    root_type: int,
    spec: SampleSpec,
) -> MultitypeTree:
    """First accepted tree of the rejection sampler."""
    return next(conditioned_sampler(zeta, gamma, root_type, spec))


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------


def enumerate_trees(
    zeta: OrderedFamily, root_type: int, max_vertices: int
) -> list[tuple[MultitypeTree, Mass]]:
    """Every positive-probability tree with at most ``max_vertices`` vertices.

    Probabilities are exact when the family masses are Fractions.  The
    listed probabilities sum to P(|T| <= max_vertices) < or = 1.
    """
    if max_vertices < 1:
        return []
    if max_vertices > ENUMERATION_BUDGET:
        raise FamilyError(
            f"enumeration budget exceeded: {max_vertices} > {ENUMERATION_BUDGET}"
        )
    atoms = [
        [(word, mass) for word, mass in law if float(mass) > 0] for law in zeta.atoms
    ]
    tree_memo: dict[tuple[int, int], list] = {}
    forest_memo: dict[tuple[tuple[int, ...], int], list] = {}

    def trees_for(i: int, budget: int) -> list:
        key = (i, budget)
        if key in tree_memo:
            return tree_memo[key]
        out = []
        for word, mass in atoms[i]:
            if len(word) > budget - 1:
                continue
            for children, prob, size in forests(word, budget - 1):
                out.append(((i, children), mass * prob, 1 + size))
        tree_memo[key] = out
        return out

    def forests(word: tuple[int, ...], budget: int) -> list:
        if not word:
            return [((), 1, 0)]
        key = (word, budget)
        if key in forest_memo:
            return forest_memo[key]
        rest = word[1:]
        out = []
        for tree, p, s in trees_for(word[0], budget - len(rest)):
            for others, q, s2 in forests(rest, budget - s):
                out.append(((tree,) + others, p * q, s + s2))
        forest_memo[key] = out
        return out

    results = []
    for nested, prob, _ in trees_for(root_type, max_vertices):
        results.append((_nested_to_tree(nested, zeta.K), prob))
    return results


def _nested_to_tree(nested: tuple, K: int) -> MultitypeTree:
    types: list[int] = []
    parent: list[int] = []
    kc: list[int] = []
    stack = [(nested, -1)]
    while stack:
        (ty, children), par = stack.pop()
        idx = len(types)
        types.append(ty)
        parent.append(par)
        kc.append(len(children))
        for child in reversed(children):
            stack.append((child, idx))
    return MultitypeTree(K=K, types=tuple(types), parent=tuple(parent), child_count=tuple(kc))


# ---------------------------------------------------------------------------
# Integer preimages of gamma
# ---------------------------------------------------------------------------


def integer_preimage(
    gamma: "GammaConstraint", k: Sequence[int], bound: int
) -> tuple[int, ...] | None:
    """Lexicographically smallest r in Z_+^K with gamma r = k, |r|_inf <= bound."""
    rows = gamma.matrix.astype(int)
    nrows, K = rows.shape
    kv = [int(x) for x in k]
    if len(kv) != nrows:
        raise FamilyError("k must have one entry per gamma row")
    # Per-row envelope of what the remaining coordinates can still add.
    lo_rest = [[0] * (K + 1) for _ in range(nrows)]
    hi_rest = [[0] * (K + 1) for _ in range(nrows)]
    for r in range(nrows):
        for j in range(K - 1, -1, -1):
            c = int(rows[r, j])
            lo_rest[r][j] = lo_rest[r][j + 1] + min(0, c) * bound
            hi_rest[r][j] = hi_rest[r][j + 1] + max(0, c) * bound

    out: list[int] = []

    def dfs(j: int, partial: list[int]) -> bool:
        if j == K:
            return partial == kv
        for v in range(bound + 1):
            feasible = True
            nxt = [partial[r] + v * int(rows[r, j]) for r in range(nrows)]
            for r in range(nrows):
                need = kv[r] - nxt[r]
                if need < lo_rest[r][j + 1] or need > hi_rest[r][j + 1]:
                    feasible = False
                    break
            if feasible:
                out.append(v)
                if dfs(j + 1, nxt):
                    return True
                out.pop()
        return False

    if dfs(0, [0] * nrows):
        return tuple(out)
    return None


# ---------------------------------------------------------------------------
# Size-biased law and Kesten prefixes
# ---------------------------------------------------------------------------


def size_biased_law(
    zeta: OrderedFamily, b: np.ndarray | None = None
) -> OrderedFamily:
    """Spine offspring law: word mass rescaled by the summed b of its letters.

    Requires a critical projection; the right eigenvector identity M b = b
    is exactly what makes each reweighted law a probability again.
    """
    mu = project(zeta)
    if not classify(mu).is_critical:
        raise FamilyError("size-biased law is defined for critical families")
    if b is None:
        b = perron_vectors(mean_matrix(mu)).b
    b = np.asarray(b, dtype=float)
    laws: list[dict[tuple[int, ...], float]] = []
    for j, law in enumerate(zeta.atoms):
        biased: dict[tuple[int, ...], float] = {}
        for word, mass in law:
            if not word:
                continue
            biased[word] = float(mass) * float(sum(b[t] for t in word)) / float(b[j])
        laws.append(biased)
    return OrderedFamily.from_dicts(zeta.K, laws)


def kesten_sample(
    zeta: OrderedFamily, root_type: int, depth: int, spec: SampleSpec
) -> KestenPrefix:
    """Kesten-tree prefix: spine with size-biased words, independent bushes.

    The spine child is picked with probability proportional to its type's
    right-eigenvector entry; everything hanging off the spine is an
    unconditioned tree, truncated at generation ``depth``.
    """
    if depth < 0:
        raise FamilyError("depth must be nonnegative")
    mu = project(zeta)
    if not classify(mu).is_critical:
        raise FamilyError("Kesten prefixes are defined for critical families")
    b = perron_vectors(mean_matrix(mu)).b
    hat = size_biased_law(zeta, b)
    prep = _tables(zeta)
    prep_hat = _tables(hat)
    uni = _Uniforms(spec.seed)
    return _grow_kesten(prep, prep_hat, b, root_type, depth, spec.cap, uni, zeta.K)


def kesten_forest(
    zeta: OrderedFamily, root_type: int, depth: int, n: int, spec: SampleSpec
) -> list[KestenPrefix]:
    mu = project(zeta)
    if not classify(mu).is_critical:
        raise FamilyError("Kesten prefixes are defined for critical families")
    b = perron_vectors(mean_matrix(mu)).b
    hat = size_biased_law(zeta, b)
    prep = _tables(zeta)
    prep_hat = _tables(hat)
    uni = _Uniforms(spec.seed)
    return [
        _grow_kesten(prep, prep_hat, b, root_type, depth, spec.cap, uni, zeta.K)
        for _ in range(n)
    ]


def _grow_kesten(
    prep,
    prep_hat,
    b: np.ndarray,
    root_type: int,
    depth: int,
    cap: int,
    uni: _Uniforms,
    K: int,
) -> KestenPrefix:
    types: list[int] = []
    parent: list[int] = []
    kc: list[int] = []
    spine: list[int] = []
    truncated: list[int] = []
    take = uni.take

    def new_node(ty: int, par: int) -> int:
        idx = len(types)
        if idx >= cap:
            raise TreeSamplingError(f"Kesten prefix exceeded the cap of {cap} vertices")
        types.append(ty)
        parent.append(par)
        kc.append(0)
        return idx

    def grow_off(ty: int, par: int, gen: int) -> None:
        idx = new_node(ty, par)
        if gen == depth:
            truncated.append(idx)
            return
        cum, words = prep[ty]
        k = bisect_right(cum, take())
        if k >= len(words):
            k = len(words) - 1
        word = words[k]
        kc[idx] = len(word)
        for child in word:
            grow_off(child, idx, gen + 1)

    def grow_spine(ty: int, par: int, gen: int) -> None:
        idx = new_node(ty, par)
        spine.append(idx)
        if gen == depth:
            truncated.append(idx)
            return
        cum, words = prep_hat[ty]
        k = bisect_right(cum, take())
        if k >= len(words):
            k = len(words) - 1
        word = words[k]
        kc[idx] = len(word)
        weights = [float(b[t]) for t in word]
        total = sum(weights)
        u = take() * total
        pick = 0
        acc = 0.0
        for pos, w in enumerate(weights):
            acc += w
            if u <= acc:
                pick = pos
                break
        for pos, child in enumerate(word):
            if pos == pick:
                grow_spine(child, idx, gen + 1)
            else:
                grow_off(child, idx, gen + 1)

    grow_spine(root_type, -1, 0)
    tree = MultitypeTree(
        K=K, types=tuple(types), parent=tuple(parent), child_count=tuple(kc)
    )
    return KestenPrefix(tree=tree, spine=tuple(spine), depth=depth, truncated=tuple(truncated))


# ---------------------------------------------------------------------------
# Balls and empirical comparison
# ---------------------------------------------------------------------------


def ball(tree: MultitypeTree | KestenPrefix, r: int) -> BallSignature:
    """Canonical signature of the radius-r ball around the root."""
    if r < 0:
        raise FamilyError("radius must be nonnegative")
    if isinstance(tree, KestenPrefix):
        if r > tree.depth:
            raise FamilyError(f"radius {r} exceeds the prefix depth {tree.depth}")
        return tree.tree.encode(radius=r)
    return tree.encode(radius=r)


def empirical_tv(
    samples_a: Iterable[BallSignature], samples_b: Iterable[BallSignature]
) -> float:
    """Half the L1 distance between the two empirical frequency vectors."""
    ca = Counter(samples_a)
    cb = Counter(samples_b)
    na, nb = sum(ca.values()), sum(cb.values())
    if na == 0 or nb == 0:
        raise FamilyError("empirical TV needs nonempty sample multisets")
    keys = set(ca) | set(cb)
    return 0.5 * sum(abs(ca[k] / na - cb[k] / nb) for k in keys)


def tv_empirical_vs_law(
    samples: Iterable[BallSignature], law: Mapping[BallSignature, float]
) -> float:
    """TV distance between an empirical multiset and an exact signature law."""
    ca = Counter(samples)
    n = sum(ca.values())
    if n == 0:
        raise FamilyError("empirical TV needs a nonempty sample multiset")
    keys = set(ca) | set(law)
    return 0.5 * sum(abs(ca[k] / n - law.get(k, 0.0)) for k in keys)


def unconditioned_ball_law(
    zeta: OrderedFamily, root_type: int, r: int
) -> dict[BallSignature, float]:
    """Exact law of the radius-r ball of an unconditioned tree."""
    memo: dict[tuple[int, int], dict[str, float]] = {}

    def law(i: int, rr: int) -> dict[str, float]:
        key = (i, rr)
        if key in memo:
            return memo[key]
        if rr == 0:
            out = {f"{i + 1}()": 1.0}
        else:
            out = {}
            for word, mass in zeta.atoms[i]:
                parts: list[dict[str, float]] = [law(t, rr - 1) for t in word]
                combos: list[tuple[str, float]] = [("", float(mass))]
                for part in parts:
                    combos = [
                        (sig + s2, p * p2) for sig, p in combos for s2, p2 in part.items()
                    ]
                for sig, p in combos:
                    full = f"{i + 1}({sig})"
                    out[full] = out.get(full, 0.0) + p
        memo[key] = out
        return out

    return law(root_type, r)


def kesten_ball_law(
    zeta: OrderedFamily, root_type: int, r: int, b: np.ndarray | None = None
) -> dict[BallSignature, float]:
    """Exact law of the radius-r ball of the Kesten tree."""
    mu = project(zeta)
    if not classify(mu).is_critical:
        raise FamilyError("Kesten ball law is defined for critical families")
    if b is None:
        b = perron_vectors(mean_matrix(mu)).b
    b = np.asarray(b, dtype=float)
    hat = size_biased_law(zeta, b)
    memo: dict[tuple[int, int], dict[str, float]] = {}

    def spine_law(i: int, rr: int) -> dict[str, float]:
        key = (i, rr)
        if key in memo:
            return memo[key]
        if rr == 0:
            out = {f"{i + 1}()": 1.0}
        else:
            out = {}
            for word, mass in hat.atoms[i]:
                weights = [float(b[t]) for t in word]
                total = sum(weights)
                for pick, wpick in enumerate(weights):
                    branch_prob = float(mass) * wpick / total
                    combos: list[tuple[str, float]] = [("", branch_prob)]
                    for pos, t in enumerate(word):
                        part = (
                            spine_law(t, rr - 1)
                            if pos == pick
                            else unconditioned_ball_law(zeta, t, rr - 1)
                        )
                        combos = [
                            (sig + s2, p * p2)
                            for sig, p in combos
                            for s2, p2 in part.items()
                        ]
                    for sig, p in combos:
                        full = f"{i + 1}({sig})"
                        out[full] = out.get(full, 0.0) + p
        memo[key] = out
        return out

    return spine_law(root_type, r)


# ---------------------------------------------------------------------------
# Spine expectation diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlobReport:
    """Monte Carlo check of the per-type expectations below the first
    return to the root's type."""

    n_samples: int
    seed: int
    estimates: Mapping[int, float] = field(default_factory=dict)
    targets: Mapping[int, float] = field(default_factory=dict)
    stderrs: Mapping[int, float] = field(default_factory=dict)
    zscores: Mapping[int, float] = field(default_factory=dict)
    overflows: int = 0

    @property
    def max_abs_z(self) -> float:
        return max((abs(z) for z in self.zscores.values()), default=0.0)


def blob_expectation_check(
    zeta: OrderedFamily, n_samples: int, seed: int, cap: int = 1_000_000
) -> BlobReport:
    """Estimate E[#type-j vertices with no type-1 ancestor below the root].

    Compares against X(j)/X(1) where X is the asymptotic direction of the
    (necessarily critical) family.  Subtrees hanging from non-root type-1
    vertices cannot contribute, so growth is pruned there.
    """
    mu = project(zeta)
    cls = classify(mu)
    if not cls.is_critical:
        raise FamilyError("the blob expectation identity needs a critical family")
    if zeta.K == 1:
        return BlobReport(n_samples=n_samples, seed=seed)
    x_dir = perron_vectors(mean_matrix(mu)).a
    prep = _tables(zeta)
    uni = _Uniforms(seed)
    take = uni.take
    K = zeta.K
    sums = np.zeros(K)
    sums_sq = np.zeros(K)
    overflows = 0
    accepted = 0
    while accepted < n_samples:
        trials = accepted + overflows
        if trials >= 1000 and accepted < 1e-4 * trials:
            raise TreeSamplingError("overflow-dominated sampling in the blob check")
        counts = [0] * K
        stack = [0]
        expand_root = True
        nodes = 0
        failed = False
        while stack:
            ty = stack.pop()
            nodes += 1
            if nodes > cap:
                failed = True
                break
            is_root = expand_root
            expand_root = False
            if not is_root:
                counts[ty] += 1
            if ty == 0 and not is_root:
                continue  # descendants would have a type-1 ancestor
            cum, words = prep[ty]
            k = bisect_right(cum, take())
            if k >= len(words):
                k = len(words) - 1
            stack.extend(words[k])
        if failed:
            overflows += 1
            continue
        accepted += 1
        arr = np.asarray(counts, dtype=float)
        sums += arr
        sums_sq += arr * arr
    means = sums / n_samples
    variances = np.maximum(sums_sq / n_samples - means ** 2, 0.0)
    stderrs = np.sqrt(variances / n_samples)
    estimates, targets, errs, zs = {}, {}, {}, {}
    for j in range(1, K):
        target = float(x_dir[j] / x_dir[0])
        estimates[j] = float(means[j])
        targets[j] = target
        errs[j] = float(stderrs[j])
        zs[j] = (means[j] - target) / stderrs[j] if stderrs[j] > 0 else math.inf
    return BlobReport(
        n_samples=n_samples,
        seed=seed,
        estimates=estimates,
        targets=targets,
        stderrs=errs,
        zscores=zs,
        overflows=overflows,
    )


def tree_records(tree: MultitypeTree) -> list[tuple[int, int, int]]:
    """Preorder (index, parent, type) rows for the newline-delimited format."""
    return [
        (i, tree.parent[i], tree.types[i] + 1) for i in range(tree.size)
    ]
